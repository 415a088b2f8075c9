"""adamlab: a desk-scale laboratory for norm-Adam, momentum methods, and
AdaGrad under relaxed (gradient-dependent) smoothness."""

__version__ = "0.1.0"

from ._backend import BACKEND  # noqa: F401
