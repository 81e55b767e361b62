"""Day-ahead PV power forecasting with a wavelet-preprocessed neural network ensemble."""

__version__ = "0.1.0"

from ._backend import BACKEND  # noqa: E402
from .errors import PvnneError  # noqa: E402

__all__ = ["BACKEND", "PvnneError", "__version__"]
