from .tensor import (
    NonFiniteError,
    ShapeError,
    Tensor,
    concat,
    maximum,
    minimum,
    nan_guard,
    no_grad,
    ones,
    zeros,
)
from .gradcheck import grad_check

__all__ = [
    "Tensor",
    "ShapeError",
    "NonFiniteError",
    "concat",
    "maximum",
    "minimum",
    "zeros",
    "ones",
    "no_grad",
    "nan_guard",
    "grad_check",
]
