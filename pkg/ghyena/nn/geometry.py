"""Geometric sequences, token neighbourhoods and rigid motions."""
from dataclasses import dataclass, replace
from typing import Dict, Optional, Tuple

import numpy as np
from scipy.spatial import cKDTree
from scipy.spatial.transform import Rotation

from ghyena.autodiff.tensor import ArrayLike, Tensor, as_tensor, mean
from ghyena.core.errors import GHyenaError, ShapeError

EdgeMap = Dict[Tuple[int, int], np.ndarray]


@dataclass
class GeometricSequence:
    """N tokens of invariant features ``f`` (..., N, d) and vectors ``x`` (..., N, 3).

    Leading axes are batch axes shared by both streams. ``edges`` maps token pairs
    (i, j) to edge attributes and is only supported for unbatched sequences.
    """

    f: Tensor
    x: Tensor
    edges: Optional[EdgeMap] = None

    def __post_init__(self) -> None:
        self.f = as_tensor(self.f)
        self.x = as_tensor(self.x)
        if self.x.ndim < 2 or self.x.shape[-1] != 3:
            raise ShapeError("GeometricSequence", self.x.shape, reason="x must be (..., N, 3), got")
        if self.f.ndim != self.x.ndim or self.f.shape[:-1] != self.x.shape[:-1]:
            raise ShapeError("GeometricSequence", self.f.shape, self.x.shape, reason="streams disagree on tokens")
        if self.n < 1 or self.d < 1:
            raise ShapeError("GeometricSequence", self.f.shape, reason="need N >= 1 and d >= 1, got")

    @property
    def n(self) -> int:
        return self.x.shape[-2]

    @property
    def d(self) -> int:
        return self.f.shape[-1]

    @property
    def batch_shape(self) -> Tuple[int, ...]:
        return self.x.shape[:-2]

    def replace(self, **changes) -> "GeometricSequence":
        return replace(self, **changes)

    def validate(self) -> "GeometricSequence":
        if not (np.all(np.isfinite(self.f.data)) and np.all(np.isfinite(self.x.data))):
            raise GHyenaError("GeometricSequence contains NaN or Inf")
        return self


@dataclass(frozen=True)
class Neighborhood:
    """Fixed-width neighbour lists: ``index`` (..., N, K) with a 0/1 ``mask``.

    Masked slots point at the token itself so gathered differences vanish.
    """

    index: np.ndarray
    mask: np.ndarray

    @property
    def width(self) -> int:
        return self.index.shape[-1]

    @property
    def counts(self) -> np.ndarray:
        return self.mask.sum(axis=-1)

    @classmethod
    def chain(cls, n: int) -> "Neighborhood":
        """Immediate predecessor and successor of every token."""
        i = np.arange(n)
        index = np.stack([i - 1, i + 1], axis=-1)
        mask = ((index >= 0) & (index < n)).astype(float)
        index = np.where(mask > 0, index, i[:, None])
        return cls(index=index, mask=mask)

    @classmethod
    def spatial(cls, x: np.ndarray, k: int, radius: Optional[float] = None) -> "Neighborhood":
        """Top-k nearest tokens within ``radius`` of each token, excluding itself."""
        x = np.asarray(x, dtype=float)
        if x.ndim > 2:
            parts = [cls.spatial(xb, k, radius) for xb in x.reshape(-1, *x.shape[-2:])]
            lead = x.shape[:-2]
            return cls(index=np.stack([p.index for p in parts]).reshape(*lead, x.shape[-2], -1),
                       mask=np.stack([p.mask for p in parts]).reshape(*lead, x.shape[-2], -1))
        n = x.shape[0]
        tree = cKDTree(x)
        query_k = min(k + 1, n)
        dist, idx = tree.query(x, k=query_k, distance_upper_bound=np.inf if radius is None else radius)
        dist, idx = dist.reshape(n, query_k), idx.reshape(n, query_k)
        self_idx = np.arange(n)[:, None]
        valid = (idx < n) & (idx != self_idx)
        index = np.full((n, k), -1, dtype=np.intp)
        mask = np.zeros((n, k))
        for row in range(n):
            picks = idx[row][valid[row]][:k]
            index[row, : picks.size] = picks
            mask[row, : picks.size] = 1.0
        index = np.where(mask > 0, index, self_idx)
        return cls(index=index, mask=mask)

    def edge_features(self, edges: Optional[EdgeMap], edge_dim: int) -> np.ndarray:
        """(N, K, edge_dim) attributes per neighbour slot; missing pairs are zero."""
        out = np.zeros(self.index.shape + (edge_dim,))
        if not edges or edge_dim == 0:
            return out
        if self.index.ndim != 2:
            raise GHyenaError("edge attributes are only supported for unbatched sequences")
        for i in range(self.index.shape[0]):
            for slot in range(self.width):
                if self.mask[i, slot] == 0:
                    continue
                attr = edges.get((i, int(self.index[i, slot])))
                if attr is not None:
                    out[i, slot] = np.asarray(attr, dtype=float).reshape(edge_dim)
        return out


def center(seq: GeometricSequence) -> Tuple[GeometricSequence, Tensor]:
    centroid = mean(seq.x, axis=-2, keepdims=True)
    return seq.replace(x=seq.x - centroid), centroid


def uncenter(seq: GeometricSequence, centroid: ArrayLike) -> GeometricSequence:
    return seq.replace(x=seq.x + as_tensor(centroid))


def random_rotation(rng: np.random.Generator) -> np.ndarray:
    return Rotation.random(random_state=rng).as_matrix()


def check_rotation(r: np.ndarray, tol: float = 1e-8) -> np.ndarray:
    r = np.asarray(r, dtype=float)
    if r.shape != (3, 3):
        raise ShapeError("rotation", r.shape, reason="expected (3, 3), got")
    if np.linalg.norm(r.T @ r - np.eye(3)) > tol or np.linalg.det(r) < 0:
        raise GHyenaError("matrix is not a proper rotation (R^T R != I or det != +1)")
    return r


def transform(seq: GeometricSequence, r: np.ndarray, t: Optional[np.ndarray] = None) -> GeometricSequence:
    """Apply ``x -> R x + t`` to every token; invariant features are untouched."""
    x = seq.x.data @ np.asarray(r).T
    if t is not None:
        x = x + np.asarray(t)
    return seq.replace(x=Tensor(x))
