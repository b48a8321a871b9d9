"""Discrete Fourier transforms over the last axis.

Power-of-two lengths use an iterative radix-2 decimation-in-time transform vectorised
over all leading axes. Every other length goes through Bluestein's chirp-z identity,
which re-expresses the DFT as a circular convolution of power-of-two length
``m >= 2n - 1``. Twiddle, bit-reversal and chirp tables are computed once per length and
kept in ``functools.lru_cache`` tables, which serialise their own updates.
"""
from dataclasses import dataclass
from functools import lru_cache
from typing import Tuple

import numpy as np

from ghyena.core.errors import ShapeError


@dataclass(frozen=True)
class ComplexSpectrum:
    """Real-input spectrum: ``n // 2 + 1`` bins of a length-``n`` signal."""

    values: np.ndarray
    n: int

    @property
    def re(self) -> np.ndarray:
        return self.values.real

    @property
    def im(self) -> np.ndarray:
        return self.values.imag


def _is_pow2(n: int) -> bool:
    return n > 0 and (n & (n - 1)) == 0


def _next_pow2(n: int) -> int:
    return 1 << (n - 1).bit_length()


@lru_cache(maxsize=64)
def _bit_reversal(n: int) -> np.ndarray:
    bits = n.bit_length() - 1
    idx = np.arange(n)
    rev = np.zeros(n, dtype=np.intp)
    for b in range(bits):
        rev |= ((idx >> b) & 1) << (bits - 1 - b)
    rev.setflags(write=False)
    return rev


@lru_cache(maxsize=128)
def _twiddles(size: int, inverse: bool) -> np.ndarray:
    sign = 1.0 if inverse else -1.0
    w = np.exp(sign * 2j * np.pi * np.arange(size // 2) / size)
    w.setflags(write=False)
    return w


@lru_cache(maxsize=64)
def _chirp(n: int) -> Tuple[np.ndarray, np.ndarray, int]:
    """Bluestein tables: chirp w_j and the spectrum of its wrapped conjugate."""
    j = np.arange(n, dtype=np.int64)
    # j^2 mod 2n keeps the phase argument small and exact in integers
    phase = (j * j) % (2 * n)
    w = np.exp(-1j * np.pi * phase / n)
    m = _next_pow2(2 * n - 1)
    b = np.zeros(m, dtype=np.complex128)
    b[:n] = np.conj(w)
    b[m - n + 1:] = np.conj(w[1:])[::-1]
    b_hat = _radix2(b, inverse=False)
    w.setflags(write=False)
    b_hat.setflags(write=False)
    return w, b_hat, m


def _radix2(a: np.ndarray, inverse: bool) -> np.ndarray:
    n = a.shape[-1]
    lead = a.shape[:-1]
    out = a[..., _bit_reversal(n)]
    size = 2
    while size <= n:
        half = size // 2
        blocks = out.reshape(*lead, n // size, size)
        even = blocks[..., :half]
        odd = blocks[..., half:] * _twiddles(size, inverse)
        out = np.concatenate([even + odd, even - odd], axis=-1).reshape(*lead, n)
        size *= 2
    return out


def _bluestein(a: np.ndarray, inverse: bool) -> np.ndarray:
    n = a.shape[-1]
    w, b_hat, m = _chirp(n)
    if inverse:
        # the inverse DFT is the conjugate of the forward DFT of the conjugate
        return np.conj(_bluestein(np.conj(a), inverse=False))
    padded = np.zeros(a.shape[:-1] + (m,), dtype=np.complex128)
    padded[..., :n] = a * w
    conv = _radix2(_radix2(padded, inverse=False) * b_hat, inverse=True) / m
    return conv[..., :n] * w


def fft(x: np.ndarray) -> np.ndarray:
    """Unnormalised forward DFT along the last axis."""
    a = np.asarray(x)
    n = a.shape[-1] if a.ndim else 0
    if n == 0:
        raise ShapeError("fft", a.shape, reason="signal length must be >= 1, got")
    a = a.astype(np.complex128, copy=False)
    if n == 1:
        return a.copy()
    return _radix2(a, inverse=False) if _is_pow2(n) else _bluestein(a, inverse=False)


def ifft(x: np.ndarray) -> np.ndarray:
    """Inverse DFT along the last axis, normalised by 1/n."""
    a = np.asarray(x)
    n = a.shape[-1] if a.ndim else 0
    if n == 0:
        raise ShapeError("ifft", a.shape, reason="signal length must be >= 1, got")
    a = a.astype(np.complex128, copy=False)
    if n == 1:
        return a.copy()
    out = _radix2(a, inverse=True) if _is_pow2(n) else _bluestein(a, inverse=True)
    return out / n


def rfft(signal: np.ndarray) -> ComplexSpectrum:
    """Spectrum of a real signal along the last axis."""
    x = np.asarray(signal)
    if x.ndim == 0 or x.shape[-1] == 0:
        raise ShapeError("rfft", x.shape, reason="signal length must be >= 1, got")
    n = x.shape[-1]
    return ComplexSpectrum(values=fft(x)[..., : n // 2 + 1], n=n)


def irfft(spectrum: ComplexSpectrum, n: int = None) -> np.ndarray:
    """Real signal of length ``n`` whose rfft is ``spectrum``."""
    n = spectrum.n if n is None else n
    half = spectrum.values
    if half.shape[-1] != n // 2 + 1:
        raise ShapeError("irfft", half.shape, reason=f"expected {n // 2 + 1} bins for n={n}, got")
    # rebuild the Hermitian-symmetric upper half: X[n-k] = conj(X[k])
    upper = np.conj(half[..., 1:(n + 1) // 2][..., ::-1])
    full = np.concatenate([half, upper], axis=-1)
    return ifft(full).real


def dft_naive(signal: np.ndarray) -> np.ndarray:
    """O(n^2) DFT by definition; reference for tests."""
    x = np.asarray(signal, dtype=np.complex128)
    n = x.shape[-1]
    k = np.arange(n)
    basis = np.exp(-2j * np.pi * np.outer(k, k) / n)
    return x @ basis.T
