"""Text and image-patch embeddings.

Text: word table lookup plus a fixed sinusoidal position code; padded positions
are zeroed. Image: linear patch projection, width-3 circular convolution along
the patch sequence, relu.
"""

from __future__ import annotations

from dataclasses import dataclass, fields

import numpy as np

from fsru import tensor as T
from fsru.tensor import Tensor


class ParamSet:
    """Mixin for dataclasses whose fields are all trainable tensors."""

    def named(self, prefix: str = "") -> dict:
        return {prefix + f.name: getattr(self, f.name) for f in fields(self)
                if isinstance(getattr(self, f.name), Tensor)}


def uniform_init(rng: np.random.Generator, shape, d: int) -> Tensor:
    bound = 1.0 / np.sqrt(d)
    return Tensor(rng.uniform(-bound, bound, size=shape), requires_grad=True)


def sinusoidal_positions(length: int, d: int) -> np.ndarray:
    """PE[pos, 2i] = sin(pos / 10000^(2i/d)), PE[pos, 2i+1] = cos(same)."""
    pos = np.arange(length)[:, None]
    i = np.arange(0, d, 2)[None, :]
    angle = pos / np.power(10000.0, i / d)
    pe = np.zeros((length, d))
    pe[:, 0::2] = np.sin(angle)
    pe[:, 1::2] = np.cos(angle)[:, : d // 2]
    return pe


@dataclass
class TextSample:
    token_ids: list
    m_max: int

    def __post_init__(self):
        if len(self.token_ids) > self.m_max:
            raise ValueError(f"text has {len(self.token_ids)} tokens, maximum is {self.m_max}")

    @property
    def mask(self) -> np.ndarray:
        mask = np.zeros(self.m_max)
        mask[: len(self.token_ids)] = 1.0
        return mask

    def padded_ids(self) -> np.ndarray:
        ids = np.zeros(self.m_max, dtype=np.int64)
        ids[: len(self.token_ids)] = self.token_ids
        return ids


@dataclass
class ImageSample:
    """Patch grid flattened row-major to (h*w, patch_size**2)."""

    patches: np.ndarray
    h: int
    w: int

    def __post_init__(self):
        self.patches = np.asarray(self.patches, dtype=np.float64)
        if self.patches.ndim != 2 or self.patches.shape[0] != self.h * self.w:
            raise ValueError(f"patch grid shape {self.patches.shape} does not match a "
                             f"{self.h}x{self.w} grid")
        if not np.all(np.isfinite(self.patches)):
            raise ValueError("non-finite pixel values")


@dataclass
class EmbeddingParams(ParamSet):
    word_table: Tensor    # vocab x d
    patch_proj: Tensor    # p^2 x d
    conv_kernel: Tensor   # 3 x d x d, taps for offsets -1, 0, +1
    conv_bias: Tensor     # d

    @classmethod
    def init(cls, rng: np.random.Generator, vocab_size: int, patch_dim: int, d: int):
        return cls(
            word_table=uniform_init(rng, (vocab_size, d), d),
            patch_proj=uniform_init(rng, (patch_dim, d), d),
            conv_kernel=uniform_init(rng, (3, d, d), d),
            conv_bias=Tensor(np.zeros(d), requires_grad=True),
        )

    @property
    def d(self) -> int:
        return self.word_table.shape[1]

    @property
    def vocab_size(self) -> int:
        return self.word_table.shape[0]

    @property
    def patch_dim(self) -> int:
        return self.patch_proj.shape[0]


def embed_text_ids(ids: np.ndarray, mask: np.ndarray, params: EmbeddingParams) -> Tensor:
    """Batched or single text embedding; ``ids`` is (..., m), ``mask`` 1 where real."""
    ids = np.asarray(ids, dtype=np.int64)
    mask = np.asarray(mask, dtype=np.float64)
    live = ids[mask > 0]
    if live.size and (live.min() < 0 or live.max() >= params.vocab_size):
        raise ValueError("unknown token")
    safe = np.where(mask > 0, ids, 0)
    pe = sinusoidal_positions(ids.shape[-1], params.d)
    out = T.add(T.take_rows(params.word_table, safe), pe)
    return T.mul(out, mask[..., None])


def embed_text(sample: TextSample, params: EmbeddingParams) -> Tensor:
    return embed_text_ids(sample.padded_ids(), sample.mask, params)


def circular_conv3(x, kernel, bias) -> Tensor:
    """out[i] = x[i-1] W_0 + x[i] W_1 + x[i+1] W_2 + b, indices mod L (axis -2)."""
    out = T.matmul(T.roll(x, 1, axis=-2), kernel[0])
    out = T.add(out, T.matmul(x, kernel[1]))
    out = T.add(out, T.matmul(T.roll(x, -1, axis=-2), kernel[2]))
    return T.add(out, bias)


def embed_patches(patches: np.ndarray, params: EmbeddingParams) -> Tensor:
    """Batched or single image embedding from (..., n, p^2) patch arrays."""
    patches = np.asarray(patches, dtype=np.float64)
    if patches.shape[-1] != params.patch_dim:
        raise ValueError(f"patch vectors have length {patches.shape[-1]}, "
                         f"expected {params.patch_dim}")
    proj = T.matmul(patches, params.patch_proj)
    return T.relu(circular_conv3(proj, params.conv_kernel, params.conv_bias))


def embed_image(sample: ImageSample, params: EmbeddingParams) -> Tensor:
    return embed_patches(sample.patches, params)
