"""Synthetic text+image data with class-dependent frequency signatures, and its file format.

Each sample is built in the frequency domain: the chosen bins get unit total
power with random phases, the spectrum is made conjugate-symmetric and
inverse-transformed, then noise is added. Rumors (label 1) concentrate power
in a few low bins; non-rumors spread it over a wider band.

Text signals are quantized to token ids. Images get one signal per pixel
position inside a patch, running along the patch sequence, mapped into [0, 1].

File format (UTF-8, one record per line after the header)::

    #fsru-synthetic v1 m=<m> h=<h> w=<w> patch_size=<p> vocab_size=<V>
    <label>\\t<id> <id> ... <id>\\t<base64 of little-endian f64, shape (h*w, p*p)>

A record may carry fewer than m token ids; the tail is padding.
"""

from __future__ import annotations

import base64
import io
from dataclasses import dataclass, field

import numpy as np

from fsru.checkpoint import atomic_write_bytes
from fsru.fft import fft_array

TEXT_RANGE = 3.0
PIXEL_SCALE = 0.15


class DatasetFormatError(ValueError):
    pass


@dataclass
class SyntheticSpec:
    count: int = 1200
    balance: float = 0.5
    m: int = 32
    h: int = 4
    w: int = 4
    patch_size: int = 4
    vocab_size: int = 64
    text_bands: dict = field(default_factory=lambda: {1: (2, 3), 0: tuple(range(6, 14))})
    image_bands: dict = field(default_factory=lambda: {1: (1,), 0: (3, 4, 5, 6, 7)})
    noise: float = 0.5
    consistency: float = 1.0

    @property
    def n(self) -> int:
        return self.h * self.w

    def validate(self):
        if self.count < 4:
            raise ValueError("sample count must be at least 4")
        if not 0.0 <= self.balance <= 1.0 or not 0.0 <= self.consistency <= 1.0:
            raise ValueError("balance and consistency must lie in [0, 1]")
        for name, bands, length in (("text", self.text_bands, self.m),
                                    ("image", self.image_bands, self.n)):
            for label in (0, 1):
                for b in bands[label]:
                    if not 1 <= b < length // 2:
                        raise ValueError(f"invalid {name} band index {b}: must satisfy "
                                         f"1 <= b < {length // 2}")


@dataclass
class Dataset:
    ids: np.ndarray       # (N, m) int
    mask: np.ndarray      # (N, m) float, 1 where a token is present
    patches: np.ndarray   # (N, h*w, p*p) float in [0, 1]
    labels: np.ndarray    # (N,) int
    h: int
    w: int
    patch_size: int
    vocab_size: int

    def __len__(self):
        return self.labels.size

    @property
    def m(self) -> int:
        return self.ids.shape[1]

    @property
    def n(self) -> int:
        return self.h * self.w

    def subset(self, idx) -> "Dataset":
        idx = np.asarray(idx)
        return Dataset(self.ids[idx], self.mask[idx], self.patches[idx], self.labels[idx],
                       self.h, self.w, self.patch_size, self.vocab_size)

    def batches(self, batch_size: int, rng: np.random.Generator | None = None):
        order = np.arange(len(self)) if rng is None else rng.permutation(len(self))
        for start in range(0, len(self), batch_size):
            yield self.subset(order[start:start + batch_size])


def planted_signal(bins, length: int, rng: np.random.Generator) -> np.ndarray:
    """Real unit-power signal whose spectrum is supported on ``bins`` (and mirrors)."""
    spec = np.zeros(length, dtype=np.complex128)
    amp = np.sqrt(length * length / (2.0 * len(bins)))
    for b in bins:
        z = amp * np.exp(1j * rng.uniform(0, 2 * np.pi))
        spec[b] = z
        spec[length - b] = np.conj(z)
    return fft_array(spec[:, None], axis=0, inverse=True)[:, 0].real


def text_to_ids(signal: np.ndarray, vocab_size: int) -> np.ndarray:
    scaled = (signal + TEXT_RANGE) / (2 * TEXT_RANGE) * (vocab_size - 1)
    return np.clip(np.rint(scaled), 0, vocab_size - 1).astype(np.int64)


def ids_to_text(ids: np.ndarray, vocab_size: int) -> np.ndarray:
    return np.asarray(ids) / (vocab_size - 1) * (2 * TEXT_RANGE) - TEXT_RANGE


def generate(spec: SyntheticSpec, seed: int) -> Dataset:
    spec.validate()
    rng = np.random.default_rng(seed)
    n_pos = int(round(spec.count * spec.balance))
    labels = np.array([1] * n_pos + [0] * (spec.count - n_pos), dtype=np.int64)
    labels = labels[rng.permutation(spec.count)]
    p2 = spec.patch_size ** 2
    ids = np.zeros((spec.count, spec.m), dtype=np.int64)
    patches = np.zeros((spec.count, spec.n, p2))
    for s, y in enumerate(labels):
        text = planted_signal(spec.text_bands[y], spec.m, rng)
        text = text + spec.noise * rng.normal(size=spec.m)
        ids[s] = text_to_ids(text, spec.vocab_size)
        img_label = y if rng.uniform() < spec.consistency else 1 - y
        for c in range(p2):
            sig = planted_signal(spec.image_bands[img_label], spec.n, rng)
            sig = sig + spec.noise * rng.normal(size=spec.n)
            patches[s, :, c] = np.clip(0.5 + PIXEL_SCALE * sig, 0.0, 1.0)
    return Dataset(ids, np.ones((spec.count, spec.m)), patches, labels, spec.h, spec.w,
                   spec.patch_size, spec.vocab_size)


def band_energy_oracle(ds: Dataset, rumor_bins, threshold: float = 0.5) -> np.ndarray:
    """Predict 1 when the rumor bins hold more than ``threshold`` of the non-DC text power."""
    preds = np.zeros(len(ds), dtype=np.int64)
    for s in range(len(ds)):
        live = ds.mask[s] > 0
        sig = ids_to_text(ds.ids[s][live], ds.vocab_size)
        power = np.abs(fft_array(sig[:, None], axis=0)[:, 0]) ** 2
        length = sig.size
        half = power[1:length // 2 + 1]
        total = half.sum()
        band = sum(power[b] for b in rumor_bins if b < length)
        preds[s] = int(total > 0 and band / total > threshold)
    return preds


# ---------------------------------------------------------------------------
# serialization


def dumps(ds: Dataset) -> str:
    buf = io.StringIO()
    buf.write(f"#fsru-synthetic v1 m={ds.m} h={ds.h} w={ds.w} patch_size={ds.patch_size} "
              f"vocab_size={ds.vocab_size}\n")
    for s in range(len(ds)):
        live = ds.ids[s][ds.mask[s] > 0]
        grid = base64.b64encode(np.ascontiguousarray(ds.patches[s], dtype="<f8").tobytes())
        buf.write(f"{int(ds.labels[s])}\t{' '.join(str(int(t)) for t in live)}\t"
                  f"{grid.decode('ascii')}\n")
    return buf.getvalue()


def loads(text: str) -> Dataset:
    lines = text.splitlines()
    if not lines or not lines[0].startswith("#fsru-synthetic v1"):
        raise DatasetFormatError("missing '#fsru-synthetic v1' header")
    try:
        meta = dict(tok.split("=", 1) for tok in lines[0].split()[2:])
        m, h, w = int(meta["m"]), int(meta["h"]), int(meta["w"])
        p, vocab = int(meta["patch_size"]), int(meta["vocab_size"])
    except (KeyError, ValueError) as exc:
        raise DatasetFormatError(f"bad header: {lines[0]!r}") from exc
    records = [ln for ln in lines[1:] if ln.strip()]
    count = len(records)
    ids = np.zeros((count, m), dtype=np.int64)
    mask = np.zeros((count, m))
    patches = np.zeros((count, h * w, p * p))
    labels = np.zeros(count, dtype=np.int64)
    for s, line in enumerate(records):
        parts = line.split("\t")
        if len(parts) != 3:
            raise DatasetFormatError(f"record {s}: expected 3 tab-separated fields")
        label, toks, grid = parts
        if label not in ("0", "1"):
            raise DatasetFormatError(f"record {s}: label must be 0 or 1")
        labels[s] = int(label)
        tok = [int(t) for t in toks.split()]
        if len(tok) > m:
            raise DatasetFormatError(f"record {s}: {len(tok)} tokens exceed m={m}")
        if any(t < 0 or t >= vocab for t in tok):
            raise DatasetFormatError(f"record {s}: unknown token")
        ids[s, :len(tok)] = tok
        mask[s, :len(tok)] = 1.0
        raw = base64.b64decode(grid)
        if len(raw) != 8 * h * w * p * p:
            raise DatasetFormatError(f"record {s}: patch grid has {len(raw)} bytes, "
                                     f"expected {8 * h * w * p * p}")
        patches[s] = np.frombuffer(raw, dtype="<f8").reshape(h * w, p * p)
    return Dataset(ids, mask, patches, labels, h, w, p, vocab)


def save(path, ds: Dataset):
    atomic_write_bytes(path, dumps(ds).encode("utf-8"))


def load(path) -> Dataset:
    with open(path, encoding="utf-8") as fh:
        return loads(fh.read())
