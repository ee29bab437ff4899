"""Frequency-domain representation and cross-modal fusion.

Both modalities go to the frequency domain along the token axis, each power
spectrum is compressed by a cosine-weighted filter bank, each compressed
spectrum is gated by a pooled summary of the other modality, and the result is
transformed back (real part kept).

Tensors are (..., L, d) with the token axis at -2; a leading batch axis is
optional.
"""

from __future__ import annotations

import csv
import io
from dataclasses import dataclass

import numpy as np

from fsru import tensor as T
from fsru.embedding import ParamSet
from fsru.fft import dft_1d, idft_1d
from fsru.tensor import ComplexTensor, Tensor


def cosine_weights(k: int) -> np.ndarray:
    """cos((2i-1) pi / 2k) for i = 1..k.

    The sequence is antisymmetric, w[k-1-i] = -w[i] and the middle entry of an
    odd k is 0, so it is built that way to make the zero sum exact.
    """
    if k < 1:
        raise ValueError("empty filter bank")
    w = np.zeros(k)
    for i in range(k // 2):
        w[i] = np.cos((2 * i + 1) * np.pi / (2 * k))
        w[k - 1 - i] = -w[i]
    return w


def spectrum(x, axis: int = -2) -> ComplexTensor:
    """Per-channel DFT of a real embedding along its token axis."""
    return dft_1d(x, axis=axis)


def effective_filter(bank: Tensor) -> Tensor | None:
    """sum_i w_i k_i, grouped as sum_{i < k/2} w_i (k_i - k_{k-1-i}).

    Returns None for k = 1, where every weight is zero.
    """
    k = bank.shape[0]
    w = cosine_weights(k)
    total = None
    for i in range(k // 2):
        term = T.mul(T.sub(bank[i], bank[k - 1 - i]), float(w[i]))
        total = term if total is None else T.add(total, term)
    return total


def usc(X: ComplexTensor, bank: Tensor | None, length: int | None = None) -> Tensor:
    """Unimodal spectrum compression.

    X_hat = sum_i (1/l) |X|^2 * k_i * cos((2i-1) pi / 2k). ``bank`` is (k, l, d);
    ``bank=None`` is the pass-through |X|^2 / l used by the no-compression
    ablation.
    """
    length = X.shape[-2] if length is None else length
    power = T.mul(T.abs_sq(X), 1.0 / length)
    if bank is None:
        return power
    if bank.shape[0] == 0:
        raise ValueError("empty filter bank")
    if bank.shape[1:] != X.shape[-2:]:
        raise T.ShapeError(f"filter shape {bank.shape[1:]} does not match spectrum {X.shape[-2:]}")
    eff = effective_filter(bank)
    if eff is None:
        return T.mul(power, np.zeros(X.shape[-2:]))
    return T.mul(power, eff)


@dataclass
class SpectralBlockParams(ParamSet):
    """Filter banks, selection parameters and the two 1x1 channel maps.

    ``conv_t_*`` produces the filter applied to the text spectrum (computed from
    the image side); ``conv_v_*`` the filter applied to the image spectrum.
    Banks are None when compression is ablated; theta/conv are None when
    co-selection is ablated.
    """

    bank_t: Tensor | None
    bank_v: Tensor | None
    theta_t: Tensor | None
    theta_v: Tensor | None
    conv_t_w: Tensor | None
    conv_t_b: Tensor | None
    conv_v_w: Tensor | None
    conv_v_b: Tensor | None

    @classmethod
    def init(cls, rng: np.random.Generator, k: int, m: int, n: int, d: int,
             use_usc: bool = True, use_csc: bool = True, full_conv: bool = False,
             noise: float = 0.01):
        if k < 1:
            raise ValueError("empty filter bank")

        def bank(length):
            w = cosine_weights(k)
            norm = float(np.dot(w, w))
            # sum_i w_i k_i starts at 1 (near-identity compression)
            base = (w / norm)[:, None, None] if norm > 0 else np.ones((k, 1, 1))
            return Tensor(base + rng.uniform(-noise, noise, size=(k, length, d)),
                          requires_grad=True)

        def theta(length):
            return Tensor(1.0 + rng.uniform(-noise, noise, size=(length, d)), requires_grad=True)

        def conv_w():
            return Tensor(np.eye(d) if full_conv else np.ones(d), requires_grad=True)

        def conv_b():
            return Tensor(np.zeros(d), requires_grad=True)

        return cls(
            bank_t=bank(m) if use_usc else None,
            bank_v=bank(n) if use_usc else None,
            theta_t=theta(m) if use_csc else None,
            theta_v=theta(n) if use_csc else None,
            conv_t_w=conv_w() if use_csc else None,
            conv_t_b=conv_b() if use_csc else None,
            conv_v_w=conv_w() if use_csc else None,
            conv_v_b=conv_b() if use_csc else None,
        )

    @property
    def use_usc(self) -> bool:
        return self.bank_t is not None

    @property
    def use_csc(self) -> bool:
        return self.theta_t is not None

    @property
    def k(self) -> int | None:
        return None if self.bank_t is None else self.bank_t.shape[0]


@dataclass
class SpectrumPair:
    text: Tensor
    image: Tensor


def selection_filter(other: Tensor, theta: Tensor, weight: Tensor, bias: Tensor) -> Tensor:
    """Conv(Avg(other * theta)): a (..., 1, d) filter from the other modality."""
    pooled = T.mean(T.mul(other, theta), axis=-2, keepdims=True)
    return T.conv1x1(pooled, weight, bias)


def csc(pair: SpectrumPair, params: SpectralBlockParams) -> SpectrumPair:
    """Cross-modal spectrum co-selection (each modality gated by the other)."""
    if not params.use_csc:
        return pair
    f_t = selection_filter(pair.image, params.theta_v, params.conv_t_w, params.conv_t_b)
    f_v = selection_filter(pair.text, params.theta_t, params.conv_v_w, params.conv_v_b)
    return SpectrumPair(T.mul(pair.text, f_t), T.mul(pair.image, f_v))


def spectral_stages(x_t, x_v, params: SpectralBlockParams) -> dict:
    """Run the block and keep every intermediate (for dumps and diagnostics)."""
    X_t, X_v = spectrum(x_t), spectrum(x_v)
    raw = SpectrumPair(T.abs_sq(X_t), T.abs_sq(X_v))
    comp = SpectrumPair(usc(X_t, params.bank_t), usc(X_v, params.bank_v))
    sel = csc(comp, params)
    y_t = idft_1d(ComplexTensor.from_real(sel.text)).re
    y_v = idft_1d(ComplexTensor.from_real(sel.image)).re
    return {"raw": raw, "usc": comp, "csc": sel, "out": SpectrumPair(y_t, y_v)}


def spectral_block(x_t, x_v, params: SpectralBlockParams) -> tuple:
    """spectrum -> compression -> co-selection -> inverse transform (real part)."""
    out = spectral_stages(x_t, x_v, params)["out"]
    return out.text, out.image


def sparsity(power: np.ndarray, rel: float = 0.01) -> float:
    """Fraction of bins below ``rel`` times the maximum magnitude."""
    power = np.abs(np.asarray(power))
    top = power.max()
    return 0.0 if top == 0 else float((power < rel * top).mean())


def spectrum_dump(x_t, x_v, params: SpectralBlockParams) -> str:
    """CSV of one sample's spectra: modality, stage, token_bin, channel, value."""
    with T.no_grad():
        stages = spectral_stages(x_t, x_v, params)
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(["modality", "stage", "token_bin", "channel", "value"])
    for stage in ("raw", "usc", "csc"):
        pair = stages[stage]
        for modality, t in (("text", pair.text), ("image", pair.image)):
            arr = t.data if t.ndim == 2 else t.data[0]
            for b in range(arr.shape[0]):
                for c in range(arr.shape[1]):
                    writer.writerow([modality, stage, b, c, repr(float(arr[b, c]))])
    return buf.getvalue()
