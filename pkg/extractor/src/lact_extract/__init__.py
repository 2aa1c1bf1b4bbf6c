"""Extract per-layer activations from a language model into LACT files.

Standalone companion tool to the capacity-expansion package: it shares no
code with it, only the LACT activation-file format.
"""

from .format import write_lact, UNLABELED
from .backends import HashBackend, TransformersBackend, BackendError

__all__ = ["write_lact", "UNLABELED", "HashBackend", "TransformersBackend",
           "BackendError"]

__version__ = "0.1.0"
