"""Quadratic brute-force references for the long convolutions.

Each oracle evaluates ``u_i = sum_j q_j (op) k_{(i - j) mod N}`` directly. Rows are
processed in blocks so the gathered kernel matrix stays near 2**16 entries per block.
"""
from typing import Iterator, Sequence, Tuple

import numpy as np

from ghyena.core.errors import ShapeError

_BLOCK_ENTRIES = 1 << 16


def _row_blocks(n: int) -> Iterator[np.ndarray]:
    step = max(1, _BLOCK_ENTRIES // max(n, 1))
    for start in range(0, n, step):
        yield np.arange(start, min(n, start + step))


def _shifted(k: np.ndarray, rows: np.ndarray) -> np.ndarray:
    # out[r, j] = k[(rows[r] - j) mod N]
    n = k.shape[0]
    return k[(rows[:, None] - np.arange(n)[None, :]) % n]


def circular_conv_naive(q: np.ndarray, k: np.ndarray) -> np.ndarray:
    q, k = np.asarray(q, dtype=float), np.asarray(k, dtype=float)
    if q.shape != k.shape or q.ndim != 1:
        raise ShapeError("circular_conv_naive", q.shape, k.shape)
    n = q.shape[0]
    out = np.empty(n)
    for i in range(n):
        out[i] = sum(q[j] * k[(i - j) % n] for j in range(n))
    return out


def scalar_long_conv_naive(q_inv: np.ndarray, k_inv: np.ndarray) -> np.ndarray:
    q_inv, k_inv = np.asarray(q_inv, dtype=float), np.asarray(k_inv, dtype=float)
    if q_inv.shape != k_inv.shape or q_inv.ndim != 2:
        raise ShapeError("scalar_long_conv_naive", q_inv.shape, k_inv.shape)
    out = np.empty_like(q_inv)
    for rows in _row_blocks(q_inv.shape[0]):
        out[rows] = np.einsum("jc,rjc->rc", q_inv, _shifted(k_inv, rows))
    return out


def vector_long_conv_naive(q_eqv: np.ndarray, k_eqv: np.ndarray) -> np.ndarray:
    q_eqv, k_eqv = np.asarray(q_eqv, dtype=float), np.asarray(k_eqv, dtype=float)
    if q_eqv.ndim != 2 or q_eqv.shape[-1] != 3 or q_eqv.shape != k_eqv.shape:
        raise ShapeError("vector_long_conv_naive", q_eqv.shape, k_eqv.shape, reason="expected matching (N, 3), got")
    out = np.empty_like(q_eqv)
    for rows in _row_blocks(q_eqv.shape[0]):
        out[rows] = np.cross(q_eqv[None, :, :], _shifted(k_eqv, rows)).sum(axis=1)
    return out


def geometric_long_conv_naive(
    alpha1: np.ndarray,
    r1: np.ndarray,
    alpha2: np.ndarray,
    r2: np.ndarray,
    lambdas: Sequence[float],
) -> Tuple[np.ndarray, np.ndarray]:
    """Evaluates each of the five interaction terms with its own double sum."""
    a1 = np.asarray(alpha1, dtype=float).reshape(-1)
    a2 = np.asarray(alpha2, dtype=float).reshape(-1)
    r1, r2 = np.asarray(r1, dtype=float), np.asarray(r2, dtype=float)
    n = a1.shape[0]
    if a2.shape[0] != n or r1.shape != (n, 3) or r2.shape != (n, 3):
        raise ShapeError("geometric_long_conv_naive", a1.shape, r1.shape, a2.shape, r2.shape)
    l1, l2, l3, l4, l5 = (float(v) for v in lambdas)

    alpha3 = np.empty((n, 1))
    r3 = np.empty((n, 3))
    for rows in _row_blocks(n):
        a2s, r2s = _shifted(a2, rows), _shifted(r2, rows)
        scalar_scalar = a2s @ a1
        vector_dot = np.einsum("jd,rjd->r", r1, r2s)
        scalar_vector = np.einsum("j,rjd->rd", a1, r2s)
        vector_scalar = np.einsum("rj,jd->rd", a2s, r1)
        vector_cross = np.cross(r1[None, :, :], r2s).sum(axis=1)
        alpha3[rows, 0] = l1 * scalar_scalar + l2 * vector_dot
        r3[rows] = l3 * scalar_vector + l4 * vector_scalar + l5 * vector_cross
    return alpha3, r3


def dot_product_attention_naive(q_eqv: np.ndarray, k_eqv: np.ndarray, v_eqv: np.ndarray) -> np.ndarray:
    """Full-matrix reference for dot-product vector attention."""
    q, k, v = (np.asarray(a, dtype=float) for a in (q_eqv, k_eqv, v_eqv))
    n = q.shape[0]
    c = q @ k.T / np.sqrt(n)
    s = np.exp(c - c.max(axis=1, keepdims=True))
    s /= s.sum(axis=1, keepdims=True)
    return s @ v
