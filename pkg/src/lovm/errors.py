"""Exception hierarchy: everything the CLI maps to exit code 1 derives from LovmError."""


class LovmError(Exception):
    """Base class for domain errors (bad inputs, violated invariants, failed requests)."""


class BundleError(LovmError):
    """Embedding bundle is missing, malformed, or violates a tensor invariant."""


class TableError(LovmError):
    """Ground-truth / scores / grouping table is malformed or incomplete."""


class TextGenError(LovmError):
    """Text generation failed: bad prompt inputs, transport failure, or unparseable reply."""
