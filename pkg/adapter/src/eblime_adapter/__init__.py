"""Reference adapter for serving black-box models to the explainer over
the newline-delimited JSON subprocess protocol."""

from .models import linear_ramp, logistic_ramp, mean_mask
from .protocol import PROTOCOL_VERSION, serve

__version__ = "0.1.0"

__all__ = ["PROTOCOL_VERSION", "linear_ramp", "logistic_ramp", "mean_mask", "serve"]
