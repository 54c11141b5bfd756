"""Sparse progressive distillation for small transformer encoders.

Train a dense teacher, then produce a sparse student via magnitude
pruning, layer-wise distillation, and probabilistic module grafting; plus
an empirical lab for subset-sum approximation bounds.
"""

__version__ = "0.1.0"

from .errors import (
    ConfigError,
    ContractError,
    InputError,
    NumericError,
    ShapeError,
    SpdError,
)
from .rng import Rng
from .tensor import Tensor

__all__ = [
    "ConfigError",
    "ContractError",
    "InputError",
    "NumericError",
    "Rng",
    "ShapeError",
    "SpdError",
    "Tensor",
    "__version__",
]
