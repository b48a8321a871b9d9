"""Long convolutions over the token axis.

All convolutions here are circular: ``u_i = sum_j q_j * k_{(i - j) mod N}``. Scalar,
vector and geometric convolutions share one differentiable kernel,
``bilinear_conv``, which evaluates any signed sum of channel-pair convolutions with a
single forward transform per input channel and one inverse transform per output
channel. Its backward pass uses the correlation identities
``dL/dq = g (star) k`` and ``dL/dk = g (star) q``, evaluated with the same transforms.
"""
from dataclasses import dataclass
from typing import Optional, Sequence, Tuple

import numpy as np

from ghyena.autodiff.params import ParamScope
from ghyena.autodiff.tensor import ArrayLike, Tensor, apply_op, as_tensor, concat, dot, unbroadcast
from ghyena.core.errors import ShapeError
from ghyena.longconv.fft import ComplexSpectrum, irfft, rfft

Term = Tuple[int, int, int, float]


@dataclass(frozen=True)
class LeviCivitaPlan:
    """Nonzero entries (l, h, p, sign) of the Levi-Civita symbol.

    ``(a x b)[l] = sum over entries of sign * a[h] * b[p]``.
    """

    entries: Tuple[Tuple[int, int, int, int], ...]

    def __post_init__(self) -> None:
        if len(self.entries) != 6:
            raise ValueError(f"expected 6 entries, got {len(self.entries)}")
        for l in range(3):
            if sum(1 for e in self.entries if e[0] == l) != 2:
                raise ValueError(f"output component {l} must have exactly two entries")
        if any(e[3] not in (1, -1) for e in self.entries):
            raise ValueError("signs must be +1 or -1")

    def factor_matrices(self) -> Tuple[np.ndarray, np.ndarray, np.ndarray]:
        """Expand/cross-expand/reduce matrices of the factorised cross-product tensor.

        With ``E`` (6x3) selecting ``q[h]``, ``X`` (6x3) selecting ``sign * k[p]`` and ``R``
        (3x6) summing rows into components, ``a x b == R @ ((E @ a) * (X @ b))``.
        """
        expand = np.zeros((6, 3))
        cross_expand = np.zeros((6, 3))
        reduce = np.zeros((3, 6))
        for row, (l, h, p, sign) in enumerate(self.entries):
            expand[row, h] = 1.0
            cross_expand[row, p] = sign
            reduce[l, row] = 1.0
        return expand, cross_expand, reduce

    def flipped(self, row: int) -> "LeviCivitaPlan":
        """Copy with the sign of one entry inverted."""
        entries = list(self.entries)
        l, h, p, sign = entries[row]
        entries[row] = (l, h, p, -sign)
        return LeviCivitaPlan(tuple(entries))


LEVI_CIVITA = LeviCivitaPlan((
    (0, 1, 2, 1), (0, 2, 1, -1),
    (1, 2, 0, 1), (1, 0, 2, -1),
    (2, 0, 1, 1), (2, 1, 0, -1),
))


def _spectra(x: np.ndarray) -> np.ndarray:
    # (..., N, C) -> (..., C, N//2+1)
    return rfft(np.moveaxis(x, -2, -1)).values


def _signals(spec: np.ndarray, n: int, dtype: np.dtype) -> np.ndarray:
    return np.moveaxis(irfft(ComplexSpectrum(spec, n)), -1, -2).astype(dtype, copy=False)


def bilinear_conv(q: ArrayLike, k: ArrayLike, terms: Sequence[Term], out_channels: int, op: str = "bilinear_conv") -> Tensor:
    """``out[..., c] = sum over (c, a, b, s) in terms of s * (q[..., a] conv k[..., b])``.

    ``q`` is (..., N, A) and ``k`` is (..., N, B); convolution runs over axis -2.
    """
    q, k = as_tensor(q), as_tensor(k)
    if q.ndim < 2 or k.ndim < 2 or q.shape[-2] != k.shape[-2]:
        raise ShapeError(op, q.shape, k.shape, reason="token axes differ")
    try:
        lead = np.broadcast_shapes(q.shape[:-2], k.shape[:-2])
    except ValueError:
        raise ShapeError(op, q.shape, k.shape) from None
    n = q.shape[-2]
    Q, K = _spectra(q.data), _spectra(k.data)
    bins = n // 2 + 1

    U = np.zeros(lead + (out_channels, bins), dtype=np.complex128)
    for c, a, b, s in terms:
        U[..., c, :] += s * Q[..., a, :] * K[..., b, :]
    out = _signals(U, n, q.dtype)

    def backward(g: np.ndarray) -> Tuple[np.ndarray, np.ndarray]:
        G = _spectra(g)
        GQ = np.zeros(lead + (q.shape[-1], bins), dtype=np.complex128)
        GK = np.zeros(lead + (k.shape[-1], bins), dtype=np.complex128)
        for c, a, b, s in terms:
            GQ[..., a, :] += s * G[..., c, :] * np.conj(K[..., b, :])
            GK[..., b, :] += s * G[..., c, :] * np.conj(Q[..., a, :])
        gq = unbroadcast(_signals(GQ, n, q.dtype), q.shape)
        gk = unbroadcast(_signals(GK, n, k.dtype), k.shape)
        return gq, gk

    return apply_op(op, (q, k), out, backward)


def circular_conv(q: np.ndarray, k: np.ndarray) -> np.ndarray:
    """Circular convolution of two equal-length signals along the last axis."""
    q, k = np.asarray(q, dtype=float), np.asarray(k, dtype=float)
    if q.shape != k.shape or q.ndim == 0:
        raise ShapeError("circular_conv", q.shape, k.shape, reason="lengths differ")
    n = q.shape[-1]
    return irfft(ComplexSpectrum(rfft(q).values * rfft(k).values, n))


def scalar_long_conv(q_inv: ArrayLike, k_inv: ArrayLike) -> Tensor:
    """Per-channel circular convolution of (..., N, d) sequences."""
    q_inv, k_inv = as_tensor(q_inv), as_tensor(k_inv)
    if q_inv.shape[-2:] != k_inv.shape[-2:]:
        raise ShapeError("scalar_long_conv", q_inv.shape, k_inv.shape)
    d = q_inv.shape[-1]
    return bilinear_conv(q_inv, k_inv, [(c, c, c, 1.0) for c in range(d)], d, op="scalar_long_conv")


def vector_long_conv(q_eqv: ArrayLike, k_eqv: ArrayLike, plan: LeviCivitaPlan = LEVI_CIVITA) -> Tensor:
    """``u_i = sum_j q_j x k_{(i-j) mod N}`` as six signed scalar convolutions.

    No 1/N factor is applied here; callers scale the result.
    """
    q_eqv, k_eqv = as_tensor(q_eqv), as_tensor(k_eqv)
    if q_eqv.shape[-1:] != (3,) or k_eqv.shape[-1:] != (3,):
        raise ShapeError("vector_long_conv", q_eqv.shape, k_eqv.shape, reason="last axis must be 3, got")
    terms = [(l, h, p, float(sign)) for l, h, p, sign in plan.entries]
    return bilinear_conv(q_eqv, k_eqv, terms, 3, op="vector_long_conv")


@dataclass
class GeometricConvParams:
    """Interaction weights lambda1..lambda5 and the scalarisation vector ``w``."""

    lambdas: Tuple[Tensor, Tensor, Tensor, Tensor, Tensor]
    w: Tensor

    @classmethod
    def create(cls, scope: ParamScope, dim: int, rng: np.random.Generator) -> "GeometricConvParams":
        lambdas = tuple(scope.add(f"lambda{i}", np.array(1.0)) for i in range(1, 6))
        w = scope.add("w", rng.normal(0.0, 1.0 / np.sqrt(dim), size=dim))
        return cls(lambdas=lambdas, w=w)  # type: ignore[arg-type]

    @classmethod
    def from_values(cls, lambdas: Sequence[float], w: Sequence[float]) -> "GeometricConvParams":
        if len(lambdas) != 5:
            raise ValueError("exactly five interaction weights are required")
        return cls(lambdas=tuple(Tensor(v) for v in lambdas), w=Tensor(w))  # type: ignore[arg-type]


def _geometric_terms(plan: LeviCivitaPlan) -> Sequence[Term]:
    # channel layout of both operands: [alpha, r_x, r_y, r_z]
    terms = [(0, 0, 0, 1.0)]
    terms += [(1, 1 + d, 1 + d, 1.0) for d in range(3)]
    terms += [(2 + d, 0, 1 + d, 1.0) for d in range(3)]
    terms += [(5 + d, 1 + d, 0, 1.0) for d in range(3)]
    terms += [(8 + l, 1 + h, 1 + p, float(s)) for l, h, p, s in plan.entries]
    return terms


def geometric_long_conv(
    alpha1: ArrayLike,
    r1: ArrayLike,
    alpha2: ArrayLike,
    r2: ArrayLike,
    params: GeometricConvParams,
    plan: LeviCivitaPlan = LEVI_CIVITA,
) -> Tuple[Tensor, Tensor]:
    """Scalar-vector interaction convolution.

    alpha3 = l1 (a1 * a2) + l2 sum_d (r1[d] * r2[d])
    r3     = l3 (a1 * r2) + l4 (a2 * r1) + l5 (r1 *x r2)
    """
    alpha1, r1, alpha2, r2 = (as_tensor(t) for t in (alpha1, r1, alpha2, r2))
    if alpha1.shape[-1:] != (1,) or alpha2.shape[-1:] != (1,):
        raise ShapeError("geometric_long_conv", alpha1.shape, alpha2.shape, reason="scalar streams must be (..., N, 1), got")
    if r1.shape[-1:] != (3,) or r2.shape[-1:] != (3,):
        raise ShapeError("geometric_long_conv", r1.shape, r2.shape, reason="vector streams must be (..., N, 3), got")
    if alpha1.shape[:-1] != r1.shape[:-1] or alpha2.shape[:-1] != r2.shape[:-1]:
        raise ShapeError("geometric_long_conv", alpha1.shape, r1.shape, alpha2.shape, r2.shape)

    t = bilinear_conv(concat([alpha1, r1], -1), concat([alpha2, r2], -1), _geometric_terms(plan), 11,
                      op="geometric_long_conv")
    l1, l2, l3, l4, l5 = params.lambdas
    alpha3 = l1 * t[..., 0:1] + l2 * t[..., 1:2]
    r3 = l3 * t[..., 2:5] + l4 * t[..., 5:8] + l5 * t[..., 8:11]
    return alpha3, r3


def scalarize(f: ArrayLike, w: ArrayLike) -> Tensor:
    """``f_i . w`` per token: (..., N, d) x (d,) -> (..., N, 1)."""
    f, w = as_tensor(f), as_tensor(w)
    if w.ndim != 1 or f.shape[-1] != w.shape[0]:
        raise ShapeError("scalarize", f.shape, w.shape)
    return dot(f, w, axis=-1, keepdims=True)


def scale_factor(n: int, conv_scale: Optional[float]) -> float:
    return 1.0 / n if conv_scale is None else float(conv_scale)
