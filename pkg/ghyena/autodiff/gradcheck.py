import logging
from typing import Callable, Dict, Optional

import numpy as np

from ghyena.autodiff.params import ParamStore
from ghyena.autodiff.tensor import Tape, Tensor
from ghyena.core.errors import NumericalError

logger = logging.getLogger(__name__)

Objective = Callable[[ParamStore], Tensor]


def analytic_gradients(f: Objective, params: ParamStore) -> Dict[str, np.ndarray]:
    params.zero_grad()
    with Tape() as tape:
        loss = f(params)
        tape.backward(loss)
    return params.gradients()


def _value(f: Objective, params: ParamStore) -> float:
    value = float(f(params).data)
    if not np.isfinite(value):
        raise NumericalError("objective is not finite", {"value": value})
    return value


def finite_diff_check(
    f: Objective,
    params: ParamStore,
    eps: float = 1e-6,
    max_entries: Optional[int] = None,
    seed: int = 0,
    floor: float = 1e-12,
    zero_tol: float = 1e-10,
) -> float:
    """Largest relative error between tape gradients and central differences.

    The error of one entry is ``|analytic - fd| / (|fd| + floor)``. Entries where both
    values are below ``zero_tol`` count as agreeing zeros. ``max_entries`` samples that
    many coordinates per tensor for large models; a larger ``floor`` compares gradients
    smaller than it on an absolute scale.
    """
    if eps <= 0:
        raise ValueError("eps must be positive")
    _value(f, params)
    analytic = analytic_gradients(f, params)
    rng = np.random.default_rng(seed)

    worst = 0.0
    for name, param in params.items():
        flat = param.data.reshape(-1)
        if max_entries is not None and flat.size > max_entries:
            coords = np.sort(rng.choice(flat.size, size=max_entries, replace=False))
        else:
            coords = np.arange(flat.size)

        fd = np.empty(coords.size)
        for slot, i in enumerate(coords):
            original = flat[i]
            flat[i] = original + eps
            f_plus = _value(f, params)
            flat[i] = original - eps
            f_minus = _value(f, params)
            flat[i] = original
            fd[slot] = (f_plus - f_minus) / (2.0 * eps)

        exact = analytic[name].reshape(-1)[coords]
        errs = np.abs(exact - fd) / (np.abs(fd) + floor)
        errs[(np.abs(exact) < zero_tol) & (np.abs(fd) < zero_tol)] = 0.0
        err = float(errs.max()) if errs.size else 0.0
        if err > worst:
            worst = err
        logger.debug("gradcheck %s: rel err %.3e over %d entries", name, err, coords.size)
    return worst
