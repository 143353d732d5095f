"""Text-encoder bridge that writes embedding bundle directories."""

from .encode import encode_bundle
from .errors import EncodeError

__all__ = ["EncodeError", "encode_bundle"]
__version__ = "0.1.0"
