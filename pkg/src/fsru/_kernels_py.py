"""Pure-numpy fallback for the compiled kernels (same signatures, same results)."""

import numpy as np


def _bit_reverse_indices(n):
    bits = n.bit_length() - 1
    idx = np.arange(n)
    rev = np.zeros(n, dtype=np.int64)
    for b in range(bits):
        rev |= ((idx >> b) & 1) << (bits - 1 - b)
    return rev


def fft_inplace(re, im, inverse=False):
    """Unnormalized radix-2 transform along axis 0; stages are vectorized."""
    n, cols = re.shape
    if n < 2:
        return
    perm = _bit_reverse_indices(n)
    re[...] = re[perm]
    im[...] = im[perm]
    sign = 1.0 if inverse else -1.0
    k = np.arange(n // 2)
    tw_re = np.cos(2.0 * np.pi * k / n)
    tw_im = sign * np.sin(2.0 * np.pi * k / n)
    h = 1
    while h < n:
        stride = n // (2 * h)
        wr = tw_re[: h * stride : stride][None, :, None]
        wi = tw_im[: h * stride : stride][None, :, None]
        r = re.reshape(n // (2 * h), 2, h, cols)
        i = im.reshape(n // (2 * h), 2, h, cols)
        br, bi = r[:, 1], i[:, 1]
        tr = br * wr - bi * wi
        ti = br * wi + bi * wr
        r[:, 1] = r[:, 0] - tr
        i[:, 1] = i[:, 0] - ti
        r[:, 0] += tr
        i[:, 0] += ti
        h *= 2


def circular_conv_direct(x, kernel):
    """out[s, c] = sum_t kernel[t, c] * x[(s - t) mod L, c]."""
    out = np.zeros_like(x)
    for t in range(x.shape[0]):
        out += kernel[t] * np.roll(x, t, axis=0)
    return out
