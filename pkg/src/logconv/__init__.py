"""Numerical checks of Rogers–Shephard type inequalities for log-concave functions."""
__version__ = "0.1.0"

from . import convbody, grid, model, oracle, polytope, verify  # noqa: E402

__all__ = ["convbody", "grid", "model", "oracle", "polytope", "verify"]
