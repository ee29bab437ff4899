"""Discrete Fourier transforms along one axis.

Power-of-two lengths go through the radix-2 kernel; every other length uses
the O(L^2) DFT matrix. The inverse carries the 1/L factor.
"""

from __future__ import annotations

import numpy as np

from fsru import kernels
from fsru.tensor import ComplexTensor, Tensor, _make, as_tensor


def is_power_of_two(n: int) -> bool:
    return n >= 1 and (n & (n - 1)) == 0


def _check_axis(shape, axis):
    if len(shape) == 0 or shape[axis] == 0:
        raise ValueError("empty transform axis")


def naive_dft_array(z: np.ndarray, axis: int = -2, inverse: bool = False) -> np.ndarray:
    """Unnormalized DFT by explicit matrix product."""
    z = np.asarray(z, dtype=np.complex128)
    _check_axis(z.shape, axis)
    n = z.shape[axis]
    k = np.arange(n)
    sign = 1.0 if inverse else -1.0
    mat = np.exp(sign * 2j * np.pi * np.outer(k, k) / n)
    moved = np.moveaxis(z, axis, 0)
    out = np.tensordot(mat, moved, axes=(1, 0))
    return np.moveaxis(out, 0, axis)


def fft_pair(re: np.ndarray, im: np.ndarray, axis: int = -2, inverse: bool = False,
             normalize: bool = True) -> tuple:
    """Transform a real pair along ``axis``; returns a new (re, im) pair.

    ``normalize`` applies 1/L on the inverse only.
    """
    re = np.asarray(re, dtype=np.float64)
    im = np.asarray(im, dtype=np.float64)
    _check_axis(re.shape, axis)
    n = re.shape[axis]
    if not is_power_of_two(n):
        out = naive_dft_array(re + 1j * im, axis, inverse)
        out_re, out_im = out.real.copy(), out.imag.copy()
    elif re.ndim == 3 and axis % 3 == 1:
        # (B, L, d): every re[b] is already a C-contiguous (L, d) block
        out_re = np.array(re, order="C")
        out_im = np.array(im, order="C")
        for b in range(re.shape[0]):
            kernels.fft_inplace(out_re[b], out_im[b], inverse)
    elif axis % re.ndim == 0 and re.ndim == 2:
        out_re = np.array(re, order="C")
        out_im = np.array(im, order="C")
        kernels.fft_inplace(out_re, out_im, inverse)
    else:
        moved_shape = np.moveaxis(re, axis, 0).shape
        r = np.ascontiguousarray(np.moveaxis(re, axis, 0)).reshape(n, -1)
        i = np.ascontiguousarray(np.moveaxis(im, axis, 0)).reshape(n, -1)
        kernels.fft_inplace(r, i, inverse)
        out_re = np.moveaxis(r.reshape(moved_shape), 0, axis)
        out_im = np.moveaxis(i.reshape(moved_shape), 0, axis)
    if inverse and normalize:
        out_re = out_re / n
        out_im = out_im / n
    return out_re, out_im


def fft_array(z: np.ndarray, axis: int = -2, inverse: bool = False) -> np.ndarray:
    """Complex-array convenience wrapper around :func:`fft_pair`."""
    z = np.asarray(z, dtype=np.complex128)
    re, im = fft_pair(z.real, z.imag, axis, inverse)
    return re + 1j * im


def _transform(x: ComplexTensor, axis: int, inverse: bool) -> ComplexTensor:
    re, im = x.re, x.im
    _check_axis(re.shape, axis)
    n = re.shape[axis]
    out_re, out_im = fft_pair(re.data, im.data, axis, inverse)
    # adjoint of the unnormalized forward map F is L * F^{-1}; of (1/L) F^H it is F / L
    scale = 1.0 / n if inverse else 1.0

    def adjoint(g_re, g_im):
        a_re, a_im = fft_pair(g_re, g_im, axis, inverse=not inverse, normalize=False)
        return a_re * scale, a_im * scale

    def bw_re(g):
        a_re, a_im = adjoint(g, np.zeros_like(g))
        return a_re, a_im

    def bw_im(g):
        a_re, a_im = adjoint(np.zeros_like(g), g)
        return a_re, a_im

    op = "idft" if inverse else "dft"
    return ComplexTensor(_make(out_re, (re, im), bw_re, op + ".re"),
                         _make(out_im, (re, im), bw_im, op + ".im"))


def dft_1d(x, axis: int = -2) -> ComplexTensor:
    """X[k] = sum_i x[i] exp(-2 pi j k i / L) along ``axis``, per channel."""
    if not isinstance(x, ComplexTensor):
        x = ComplexTensor.from_real(as_tensor(x))
    return _transform(x, axis, inverse=False)


def idft_1d(x, axis: int = -2) -> ComplexTensor:
    """Inverse of :func:`dft_1d`, including the 1/L normalization."""
    if not isinstance(x, ComplexTensor):
        x = ComplexTensor.from_real(as_tensor(x))
    return _transform(x, axis, inverse=True)


def real_part(z: ComplexTensor) -> Tensor:
    return z.re
