"""Contrastive terms, distribution-similarity fusion, classifier head, total loss.

All functions take pooled (B, d) feature tensors.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass

import numpy as np

from fsru import tensor as T
from fsru.embedding import ParamSet, uniform_init
from fsru.tensor import Tensor

LN2 = math.log(2.0)
_MASKED = -1e9


class DegenerateBatchWarning(UserWarning):
    pass


@dataclass
class BatchFeatures:
    text: Tensor
    image: Tensor
    labels: np.ndarray

    def __post_init__(self):
        self.labels = np.asarray(self.labels, dtype=np.int64)

    @property
    def size(self) -> int:
        return self.text.shape[0]


@dataclass
class HeadParams(ParamSet):
    w_t: Tensor   # d x d
    w_v: Tensor   # d x d
    fc_w: Tensor  # d x 2
    fc_b: Tensor  # 2

    @classmethod
    def init(cls, rng: np.random.Generator, d: int):
        return cls(w_t=uniform_init(rng, (d, d), d), w_v=uniform_init(rng, (d, d), d),
                   fc_w=uniform_init(rng, (d, 2), d), fc_b=Tensor(np.zeros(2), requires_grad=True))


@dataclass
class LossReport:
    l_cls: float
    l_full: float
    l_self: float
    total: float
    mean_gamma: float
    alpha: float
    beta: float


def normalize_rows(x: Tensor, floor: float = 1e-24) -> Tensor:
    """x / |x| per row; squared norms below ``floor`` are raised to it (zero rows stay zero)."""
    sq = T.clip(T.sum_(T.mul(x, x), axis=-1, keepdims=True), floor, np.inf)
    return T.div(x, T.sqrt(sq))


def _zero(flag: str) -> Tensor:
    warnings.warn(flag, DegenerateBatchWarning, stacklevel=3)
    return Tensor(0.0)


def pairwise_log_prob(x: Tensor, tau: float) -> Tensor:
    """log( e^{cos(a,q)/tau} / sum_{q' != a} e^{cos(a,q')/tau} ) for every (a, q)."""
    z = normalize_rows(x)
    sim = T.mul(T.matmul(z, T.transpose(z)), 1.0 / tau)
    b = x.shape[0]
    return T.log_softmax(T.add(sim, np.eye(b) * _MASKED), axis=-1)


def positive_weights(labels: np.ndarray, literal: bool = False) -> np.ndarray:
    """Weight of each (anchor, positive) term: 1/|R_c| for anchors of class c.

    ``literal`` pairs class-0 anchors with class-1 samples, as the published
    equation's second sum is written.
    """
    labels = np.asarray(labels)
    b = labels.size
    w = np.zeros((b, b))
    for c in (0, 1):
        anchors = labels == c
        count = int(anchors.sum())
        if count == 0:
            continue
        target = labels == (1 if (literal and c == 0) else c)
        w[np.ix_(anchors, target)] = 1.0 / count
    np.fill_diagonal(w, 0.0)
    return w


def l_full(batch: BatchFeatures, tau: float = 0.1, literal: bool = False) -> Tensor:
    """Supervised intra-modal contrastive loss, summed over both modalities."""
    if batch.size < 2:
        return _zero("l_full needs at least 2 samples")
    w = positive_weights(batch.labels, literal)
    total = None
    for feats in (batch.text, batch.image):
        term = T.neg(T.sum_(T.mul(pairwise_log_prob(feats, tau), w)))
        total = term if total is None else T.add(total, term)
    return total


def l_self(batch: BatchFeatures, tau: float = 0.1) -> Tensor:
    """Symmetric InfoNCE between the text and image of each sample."""
    b = batch.size
    if b < 2:
        return _zero("l_self needs at least 2 samples")
    sim = T.mul(T.matmul(normalize_rows(batch.text), T.transpose(normalize_rows(batch.image))),
                1.0 / tau)
    eye = np.eye(b)
    t2v = T.sum_(T.mul(T.log_softmax(sim, axis=-1), eye))
    v2t = T.sum_(T.mul(T.log_softmax(T.transpose(sim), axis=-1), eye))
    return T.mul(T.add(t2v, v2t), -1.0 / (2 * b))


def gamma(batch: BatchFeatures) -> Tensor:
    """Per-sample JS divergence of softmax(text) and softmax(image), over ln 2."""
    log_p = T.log_softmax(batch.text, axis=-1)
    log_q = T.log_softmax(batch.image, axis=-1)
    # log of the midpoint, shifted by the elementwise max so saturated
    # softmaxes (p or q underflowing to 0) stay finite
    hi = np.maximum(log_p.data, log_q.data)
    mid = T.mul(T.add(T.exp(T.sub(log_p, hi)), T.exp(T.sub(log_q, hi))), 0.5)
    log_m = T.add(T.log(mid), hi)
    kl_p = T.sum_(T.mul(T.exp(log_p), T.sub(log_p, log_m)), axis=-1)
    kl_q = T.sum_(T.mul(T.exp(log_q), T.sub(log_q, log_m)), axis=-1)
    js = T.mul(T.add(kl_p, kl_q), 0.5)
    return T.clip(T.mul(js, 1.0 / LN2), 0.0, 1.0)


def fuse(batch: BatchFeatures, g, params: HeadParams) -> Tensor:
    """m = (1 - g)(x_t W_t + x_v W_v) + g x_t + g x_v, per sample."""
    g = T.as_tensor(g)
    g = T.reshape(g, (-1, 1)) if g.ndim == 1 else g
    cross = T.add(T.matmul(batch.text, params.w_t), T.matmul(batch.image, params.w_v))
    return T.add(T.mul(T.sub(1.0, g), cross), T.mul(g, T.add(batch.text, batch.image)))


def logits(m: Tensor, params: HeadParams) -> Tensor:
    return T.add(T.matmul(m, params.fc_w), params.fc_b)


def classify(m: Tensor, params: HeadParams) -> Tensor:
    """Softmax(FC(m)); column 1 is the rumor probability."""
    return T.softmax(logits(m, params), axis=-1)


def l_cls(logit: Tensor, labels: np.ndarray) -> Tensor:
    """Mean binary cross-entropy of a two-way softmax."""
    labels = np.asarray(labels, dtype=np.int64)
    onehot = np.eye(2)[labels]
    return T.mul(T.sum_(T.mul(T.log_softmax(logit, axis=-1), onehot)), -1.0 / labels.size)


def total_loss(cls_term: Tensor, full_term: Tensor, self_term: Tensor, alpha: float = 0.2,
               beta: float = 0.2, mean_gamma: float = float("nan")) -> tuple:
    """L = L_cls + alpha L_full + beta L_self; returns (tensor, LossReport)."""
    if alpha < 0 or beta < 0:
        raise ValueError("alpha and beta must be non-negative")
    total = T.add(T.add(cls_term, T.mul(full_term, alpha)), T.mul(self_term, beta))
    report = LossReport(cls_term.item(), full_term.item(), self_term.item(), total.item(),
                        mean_gamma, alpha, beta)
    return total, report
