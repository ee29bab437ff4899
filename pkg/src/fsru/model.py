"""The full network: embeddings, a token mixer per modality pair, pooling, fusion head."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from fsru import objectives as O
from fsru import tensor as T
from fsru.baselines import AttentionParams, MixerKind, SpatialMLPParams, self_attention, spatial_mlp
from fsru.config import RunConfig
from fsru.data import Dataset
from fsru.embedding import EmbeddingParams, embed_patches, embed_text_ids
from fsru.spectral import SpectralBlockParams, spectral_block
from fsru.tensor import Tensor


@dataclass
class ForwardResult:
    probs: np.ndarray
    total: Tensor | None
    report: O.LossReport | None
    features: O.BatchFeatures
    gamma: np.ndarray
    fused: np.ndarray


class FSRUModel:
    def __init__(self, config: RunConfig, rng: np.random.Generator | None = None):
        self.config = config
        rng = np.random.default_rng(config.seed) if rng is None else rng
        c = config
        self.embedding = EmbeddingParams.init(rng, c.vocab_size, c.patch_size ** 2, c.d)
        self.mixer = MixerKind(c.mixer)
        self.spectral = self.mix_t = self.mix_v = None
        if self.mixer is MixerKind.SPECTRAL:
            self.spectral = SpectralBlockParams.init(rng, c.k, c.m, c.n, c.d, c.use_usc,
                                                     c.use_csc, c.full_conv)
        elif self.mixer is MixerKind.SELF_ATTENTION:
            self.mix_t, self.mix_v = AttentionParams.init(rng, c.d), AttentionParams.init(rng, c.d)
        else:
            self.mix_t, self.mix_v = SpatialMLPParams.init(rng, c.m), SpatialMLPParams.init(rng, c.n)
        self.head = O.HeadParams.init(rng, c.d)

    # -- parameters -------------------------------------------------------

    def parameters(self) -> dict:
        out = dict(self.embedding.named("emb."))
        if self.spectral is not None:
            out.update(self.spectral.named("spec."))
        else:
            out.update(self.mix_t.named("mix_t."))
            out.update(self.mix_v.named("mix_v."))
        out.update(self.head.named("head."))
        return out

    def state_dict(self) -> dict:
        return {k: p.data.copy() for k, p in self.parameters().items()}

    def load_state_dict(self, arrays: dict):
        params = self.parameters()
        missing = sorted(set(params) - set(arrays))
        if missing:
            raise ValueError(f"checkpoint lacks array {missing[0]!r}")
        for name, p in params.items():
            arr = np.asarray(arrays[name], dtype=np.float64)
            if arr.shape != p.shape:
                raise ValueError(f"array {name!r} has shape {arr.shape}, config expects {p.shape}")
            p.data = arr.copy()

    # -- forward ----------------------------------------------------------

    def mix(self, x_t: Tensor, x_v: Tensor) -> tuple:
        if self.mixer is MixerKind.SPECTRAL:
            return spectral_block(x_t, x_v, self.spectral)
        if self.mixer is MixerKind.SELF_ATTENTION:
            return self_attention(x_t, self.mix_t), self_attention(x_v, self.mix_v)
        return spatial_mlp(x_t, self.mix_t), spatial_mlp(x_v, self.mix_v)

    def pool(self, y: Tensor) -> Tensor:
        pooled = T.mean(y, axis=-2)
        return T.layer_norm(pooled, eps=1e-12) if self.config.pool_norm else pooled

    def features(self, batch: Dataset) -> O.BatchFeatures:
        x_t = embed_text_ids(batch.ids, batch.mask, self.embedding)
        x_v = embed_patches(batch.patches, self.embedding)
        y_t, y_v = self.mix(x_t, x_v)
        return O.BatchFeatures(self.pool(y_t), self.pool(y_v), batch.labels)

    def forward(self, batch: Dataset, with_loss: bool = True) -> ForwardResult:
        c = self.config
        feats = self.features(batch)
        if c.use_dsf:
            g = O.gamma(feats)
        else:
            g = Tensor(np.full(batch.labels.size, c.dsf_gamma))
        fused = O.fuse(feats, g, self.head)
        logit = O.logits(fused, self.head)
        probs = T.softmax(logit, axis=-1).data
        total = report = None
        if with_loss:
            cls_term = O.l_cls(logit, batch.labels)
            if c.use_cl:
                full_term = O.l_full(feats, c.tau, c.literal_contrastive)
                self_term = O.l_self(feats, c.tau)
                alpha, beta = c.alpha, c.beta
            else:
                full_term = self_term = Tensor(0.0)
                alpha = beta = 0.0
            total, report = O.total_loss(cls_term, full_term, self_term, alpha, beta,
                                         float(np.mean(g.data)))
        return ForwardResult(probs, total, report, feats, g.data.copy(), fused.data)
