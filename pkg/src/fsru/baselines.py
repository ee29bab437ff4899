"""Alternative token mixers, the convolution-theorem check, FLOP formulas and timing.

Every mixer maps (..., L, d) to (..., L, d), so any of them can stand in for
the spectral block inside the model.
"""

from __future__ import annotations

import csv
import enum
import gc
import io
import math
import statistics
import time
from dataclasses import dataclass

import numpy as np

from fsru import kernels
from fsru import tensor as T
from fsru.embedding import ParamSet, uniform_init
from fsru.fft import fft_pair
from fsru.spectral import SpectralBlockParams, spectral_block
from fsru.tensor import ComplexTensor, Tensor


class MixerKind(str, enum.Enum):
    SPECTRAL = "spectral"
    SELF_ATTENTION = "self_attention"
    SPATIAL_MLP = "spatial_mlp"


@dataclass
class AttentionParams(ParamSet):
    w_q: Tensor
    w_k: Tensor
    w_v: Tensor

    @classmethod
    def init(cls, rng: np.random.Generator, d: int):
        return cls(*(uniform_init(rng, (d, d), d) for _ in range(3)))


@dataclass
class SpatialMLPParams(ParamSet):
    w: Tensor  # L x L token-mixing matrix
    b: Tensor  # L x 1

    @classmethod
    def init(cls, rng: np.random.Generator, length: int):
        return cls(uniform_init(rng, (length, length), length),
                   Tensor(np.zeros((length, 1)), requires_grad=True))


def attention_scores(x, params: AttentionParams) -> Tensor:
    """softmax(x W_q (x W_k)^T / sqrt(d)), rows sum to 1."""
    d = x.shape[-1]
    q = T.matmul(x, params.w_q)
    k = T.matmul(x, params.w_k)
    return T.softmax(T.mul(T.matmul(q, T.transpose(k)), 1.0 / math.sqrt(d)), axis=-1)


def self_attention(x, params: AttentionParams) -> Tensor:
    """Single-head softmax(x W_q (x W_k)^T / sqrt(d)) x W_v."""
    x = T.as_tensor(x)
    return T.matmul(attention_scores(x, params), T.matmul(x, params.w_v))


def spatial_mlp(x, params: SpatialMLPParams) -> Tensor:
    """relu(W x + b): one token-mixing layer shared across channels."""
    x = T.as_tensor(x)
    return T.relu(T.add(T.matmul(params.w, x), params.b))


# ---------------------------------------------------------------------------
# convolution theorem


def circular_conv_equivalence(x, kernel) -> tuple:
    """(direct circular convolution, idft(dft(kernel) * dft(x))) along tokens.

    Under a translation-invariant kernel k(s, t) = k(s - t), kernel
    summation over tokens is this circular convolution, so the two outputs
    agree.
    """
    x = np.ascontiguousarray(x, dtype=np.float64)
    kernel = np.ascontiguousarray(kernel, dtype=np.float64)
    if x.shape != kernel.shape:
        raise T.ShapeError(f"input {x.shape} and kernel {kernel.shape} differ")
    direct = kernels.circular_conv_direct(x, kernel)
    zeros = np.zeros_like(x)
    xr, xi = fft_pair(x, zeros, axis=0)
    kr, ki = fft_pair(kernel, zeros, axis=0)
    prod = T.complex_mul(ComplexTensor(kr, ki), ComplexTensor(xr, xi))
    back, _ = fft_pair(prod.re.data, prod.im.data, axis=0, inverse=True)
    return direct, back


# ---------------------------------------------------------------------------
# analytic FLOPs (complexity table, image and text columns; log base 2)


def flops(kind, length: int, d: int, column: str = "image") -> float:
    """Analytic FLOP count for one mixer on an L x d input.

    image column: spatial MLP n^2 d; attention n d^2 + n^2 d;
    spectral n d log n + (n + d) d.
    text column: m^2 d; m^2 d + m d^2; m d log m + (m log d + d) d.
    """
    kind = MixerKind(kind)
    if length < 1 or d < 1:
        raise ValueError("L and d must be positive")
    L, lg = length, math.log2
    if column == "image":
        table = {
            MixerKind.SPATIAL_MLP: L * L * d,
            MixerKind.SELF_ATTENTION: L * d * d + L * L * d,
            MixerKind.SPECTRAL: L * d * lg(L) + (L + d) * d,
        }
    elif column == "text":
        table = {
            MixerKind.SPATIAL_MLP: L * L * d,
            MixerKind.SELF_ATTENTION: L * L * d + L * d * d,
            MixerKind.SPECTRAL: L * d * lg(L) + (L * lg(d) + d) * d,
        }
    else:
        raise ValueError(f"unknown column {column!r}")
    return table[kind]


# ---------------------------------------------------------------------------
# timing harness


@dataclass
class BenchRecord:
    kind: str
    L: int
    d: int
    median_ns: int
    flops: float
    repeats: int
    low_confidence: bool


def make_mixer(kind, length: int, d: int, rng: np.random.Generator, k: int = 2):
    """Return ``fn(x_t, x_v) -> (y_t, y_v)`` for (L, d) inputs, as used in the model.

    The spectral block mixes the pair jointly; the other kinds mix each
    modality with its own parameters.
    """
    kind = MixerKind(kind)
    if kind is MixerKind.SPECTRAL:
        params = SpectralBlockParams.init(rng, k, length, length, d)
        return lambda x_t, x_v: spectral_block(x_t, x_v, params)
    if kind is MixerKind.SELF_ATTENTION:
        p_t, p_v = AttentionParams.init(rng, d), AttentionParams.init(rng, d)
        return lambda x_t, x_v: (self_attention(x_t, p_t), self_attention(x_v, p_v))
    p_t, p_v = SpatialMLPParams.init(rng, length), SpatialMLPParams.init(rng, length)
    return lambda x_t, x_v: (spatial_mlp(x_t, p_t), spatial_mlp(x_v, p_v))


def _single_thread():
    try:
        from threadpoolctl import threadpool_limits
    except ImportError:  # pragma: no cover
        import contextlib

        return contextlib.nullcontext()
    return threadpool_limits(limits=1)


def time_call(fn, repeats: int = 20, warmup: int = 5) -> list:
    """Per-call wall times in ns, with the garbage collector paused (as timeit does)."""
    for _ in range(warmup):
        fn()
    out = []
    was_enabled = gc.isenabled()
    gc.disable()
    try:
        for _ in range(repeats):
            t0 = time.perf_counter_ns()
            fn()
            out.append(time.perf_counter_ns() - t0)
    finally:
        if was_enabled:
            gc.enable()
    return out


def bench(kinds, sizes, repeats: int = 20, warmup: int = 5, seed: int = 0) -> list:
    """Median forward wall time of one text/image pair per (kind, L, d).

    ``sizes`` is a list of (L, d). Runs single-threaded without graph recording.
    """
    records = []
    rng = np.random.default_rng(seed)
    with _single_thread(), T.no_grad():
        for length, d in sizes:
            x_t = Tensor(rng.normal(size=(length, d)))
            x_v = Tensor(rng.normal(size=(length, d)))
            for kind in kinds:
                fn = make_mixer(kind, length, d, rng)
                times = time_call(lambda: fn(x_t, x_v), repeats, warmup)
                records.append(BenchRecord(MixerKind(kind).value, length, d,
                                           int(statistics.median(times)),
                                           flops(kind, length, d), repeats, repeats < 20))
    return records


def bench_csv(records) -> str:
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(["kind", "L", "d", "median_ns", "flops", "low_confidence"])
    for r in records:
        writer.writerow([r.kind, r.L, r.d, r.median_ns, repr(float(r.flops)), int(r.low_confidence)])
    return buf.getvalue()
