"""Random quotients of groups in the density model.

Relator sampling under four word measures, cogrowth and spectral radius
estimates, collapse sweeps, small cancellation checks and van Kampen
diagram bookkeeping.
"""

from .errors import (CapacityError, DomainError, InputError, InsufficientSignal,
                     MethodNotAvailable, NumericError, RQError)
from .groups import parse_group
from .records import TOOL_VERSION as __version__
from .sampler import MeasureSpec, RelatorSet, RngStream, sample_relator_set, sample_words

__all__ = [
    "CapacityError", "DomainError", "InputError", "InsufficientSignal", "MethodNotAvailable",
    "NumericError", "RQError", "MeasureSpec", "RelatorSet", "RngStream", "parse_group",
    "sample_relator_set", "sample_words", "__version__",
]
