from typing import Dict, Iterator, Mapping, Tuple

import numpy as np

from ghyena.autodiff.tensor import Tensor, get_default_dtype
from ghyena.core.errors import GHyenaError, ShapeError


class ParamStore:
    """Named trainable tensors in creation order.

    Iteration order is the order of ``add`` calls, so two stores built by the same
    construction sequence enumerate identically.
    """

    def __init__(self) -> None:
        self._params: Dict[str, Tensor] = {}

    def add(self, name: str, value: np.ndarray) -> Tensor:
        if name in self._params:
            raise GHyenaError(f"parameter {name!r} already registered")
        if any(ch.isspace() for ch in name):
            raise GHyenaError(f"parameter name {name!r} must not contain whitespace")
        data = np.array(value, dtype=get_default_dtype(), copy=True)
        param = Tensor(data, requires_grad=True, name=name)
        self._params[name] = param
        return param

    def scope(self, prefix: str) -> "ParamScope":
        return ParamScope(self, prefix)

    def __getitem__(self, name: str) -> Tensor:
        return self._params[name]

    def __contains__(self, name: object) -> bool:
        return name in self._params

    def __iter__(self) -> Iterator[str]:
        return iter(self._params)

    def __len__(self) -> int:
        return len(self._params)

    def items(self) -> Iterator[Tuple[str, Tensor]]:
        return iter(self._params.items())

    def num_parameters(self) -> int:
        return sum(p.size for p in self._params.values())

    def zero_grad(self) -> None:
        for p in self._params.values():
            p.grad = None

    def gradients(self) -> Dict[str, np.ndarray]:
        """Gradient per parameter; parameters the loss never reached get zeros."""
        return {
            name: p.grad if p.grad is not None else np.zeros_like(p.data)
            for name, p in self._params.items()
        }

    def state_dict(self) -> Dict[str, np.ndarray]:
        return {name: p.data.copy() for name, p in self._params.items()}

    def load_state_dict(self, state: Mapping[str, np.ndarray], strict: bool = True) -> None:
        missing = [n for n in self._params if n not in state]
        unexpected = [n for n in state if n not in self._params]
        if strict and (missing or unexpected):
            raise GHyenaError(f"state mismatch: missing={missing} unexpected={unexpected}")
        for name, p in self._params.items():
            if name not in state:
                continue
            value = np.asarray(state[name])
            if value.shape != p.shape:
                raise ShapeError(f"load_state_dict[{name}]", p.shape, value.shape)
            p.data[...] = value


class ParamScope:
    """Prefixing view over a ``ParamStore`` used while building layers."""

    def __init__(self, store: ParamStore, prefix: str):
        self.store = store
        self.prefix = prefix

    def add(self, name: str, value: np.ndarray) -> Tensor:
        return self.store.add(f"{self.prefix}.{name}" if self.prefix else name, value)

    def scope(self, prefix: str) -> "ParamScope":
        return ParamScope(self.store, f"{self.prefix}.{prefix}" if self.prefix else prefix)
