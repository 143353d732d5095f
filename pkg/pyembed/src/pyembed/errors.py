class EncodeError(Exception):
    """Any input, model, or output problem the caller can act on."""
