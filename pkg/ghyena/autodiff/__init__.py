from ghyena.autodiff.gradcheck import analytic_gradients, finite_diff_check
from ghyena.autodiff.params import ParamScope, ParamStore
from ghyena.autodiff.tensor import (
    PRIMITIVES,
    Tape,
    Tensor,
    active_tape,
    apply_op,
    as_tensor,
    default_dtype,
    get_default_dtype,
    primitive_forward,
    set_default_dtype,
)

__all__ = [
    "PRIMITIVES",
    "ParamScope",
    "ParamStore",
    "Tape",
    "Tensor",
    "active_tape",
    "analytic_gradients",
    "apply_op",
    "as_tensor",
    "default_dtype",
    "finite_diff_check",
    "get_default_dtype",
    "primitive_forward",
    "set_default_dtype",
]
