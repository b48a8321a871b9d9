"""Sinusoidal network predicting per-position aggregation weights for global tokens."""
import numpy as np

from ghyena.autodiff.params import ParamScope
from ghyena.autodiff.tensor import Tensor, sine, softplus
from ghyena.nn.layers import Linear


class SirenNet:
    """Scalar position -> ``num_outputs`` strictly positive weights.

    Hidden layers apply ``sin(omega * (x W + b))``. Weights follow the SIREN scheme: the
    first layer is uniform in ``[-1/in, 1/in]`` and later layers in
    ``[-sqrt(6/in)/omega, sqrt(6/in)/omega]``.
    """

    def __init__(
        self,
        scope: ParamScope,
        num_outputs: int,
        rng: np.random.Generator,
        hidden: int = 32,
        layers: int = 2,
        omega: float = 30.0,
    ):
        self.omega = omega
        self.hidden = []
        in_dim = 1
        for i in range(layers):
            layer = Linear(scope.scope(f"hidden{i}"), in_dim, hidden, rng, init="zeros")
            bound = 1.0 / in_dim if i == 0 else np.sqrt(6.0 / in_dim) / omega
            layer.weight.data[...] = rng.uniform(-bound, bound, size=layer.weight.shape)
            self.hidden.append(layer)
            in_dim = hidden
        self.head = Linear(scope.scope("head"), in_dim, num_outputs, rng, init="zeros")
        bound = np.sqrt(6.0 / in_dim) / omega
        self.head.weight.data[...] = rng.uniform(-bound, bound, size=self.head.weight.shape)

    @property
    def num_outputs(self) -> int:
        return self.head.out_dim

    def __call__(self, t: Tensor) -> Tensor:
        h = t
        for layer in self.hidden:
            h = sine(layer(h) * self.omega)
        return softplus(self.head(h))


def siren_weights(n: int, net: SirenNet) -> Tensor:
    """(n, G) weights for positions ``i / max(n - 1, 1)``."""
    if n < 1:
        raise ValueError("token count must be at least 1")
    t = np.arange(n, dtype=float).reshape(n, 1) / max(n - 1, 1)
    return net(Tensor(t))
