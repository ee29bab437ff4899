"""Training loop, evaluation, ablation and k sweeps, convergence runs, feature projection."""

from __future__ import annotations

import csv
import io
import json
import logging
import os
import warnings
from dataclasses import dataclass, field

import numpy as np

from fsru import checkpoint
from fsru.config import RunConfig
from fsru.data import Dataset
from fsru.metrics import Metrics, compute_metrics
from fsru.model import FSRUModel
from fsru.objectives import DegenerateBatchWarning
from fsru.optim import Adam
from fsru.tensor import backward, no_grad

log = logging.getLogger(__name__)

METRIC_COLUMNS = ["epoch", "split", "l_cls", "l_full", "l_self", "total", "mean_gamma",
                  "accuracy", "precision_rumor", "recall_rumor", "f1_rumor",
                  "precision_nonrumor", "recall_nonrumor", "f1_nonrumor"]
CHECKPOINT_NAME = "checkpoint.fsru"


class NumericError(RuntimeError):
    def __init__(self, epoch: int, batch_index: int, report):
        super().__init__(f"non-finite loss at epoch {epoch}, batch {batch_index}: {report}")
        self.epoch = epoch
        self.batch_index = batch_index
        self.report = report


@dataclass
class EpochRow:
    epoch: int
    split: str
    l_cls: float
    l_full: float
    l_self: float
    total: float
    mean_gamma: float
    metrics: Metrics

    def as_list(self) -> list:
        m = self.metrics
        return [self.epoch, self.split] + [repr(float(v)) for v in (
            self.l_cls, self.l_full, self.l_self, self.total, self.mean_gamma, m.accuracy,
            m.precision_rumor, m.recall_rumor, m.f1_rumor, m.precision_nonrumor,
            m.recall_nonrumor, m.f1_nonrumor)]


@dataclass
class TrainResult:
    model: FSRUModel
    rows: list = field(default_factory=list)

    def split_rows(self, split: str) -> list:
        return [r for r in self.rows if r.split == split]

    @property
    def final_test(self) -> Metrics | None:
        rows = self.split_rows("test")
        return rows[-1].metrics if rows else None

    def epochs_to(self, accuracy: float) -> int | None:
        """First epoch whose test accuracy reaches ``accuracy``."""
        for r in self.split_rows("test"):
            if r.metrics.accuracy >= accuracy:
                return r.epoch
        return None


def split_dataset(ds: Dataset, test_fraction: float, seed: int) -> tuple:
    order = np.random.default_rng(seed).permutation(len(ds))
    n_test = max(1, int(round(len(ds) * test_fraction)))
    return ds.subset(np.sort(order[n_test:])), ds.subset(np.sort(order[:n_test]))


def _evaluate_model(model: FSRUModel, ds: Dataset, batch_size: int, epoch: int,
                    split: str) -> EpochRow:
    sums = np.zeros(5)
    preds = []
    with no_grad(), warnings.catch_warnings():
        warnings.simplefilter("ignore", DegenerateBatchWarning)
        for batch in ds.batches(batch_size):
            out = model.forward(batch)
            r = out.report
            sums += len(batch) * np.array([r.l_cls, r.l_full, r.l_self, r.total, r.mean_gamma])
            preds.append(np.argmax(out.probs, axis=1))
    sums /= len(ds)
    return EpochRow(epoch, split, *sums, compute_metrics(ds.labels, np.concatenate(preds)))


def predict(model: FSRUModel, ds: Dataset, batch_size: int = 256) -> np.ndarray:
    preds = []
    with no_grad():
        for batch in ds.batches(batch_size):
            preds.append(np.argmax(model.forward(batch, with_loss=False).probs, axis=1))
    return np.concatenate(preds)


def check_compatible(config: RunConfig, ds: Dataset):
    expected = {"m": config.m, "n": config.n, "vocab_size": config.vocab_size,
                "patch_size": config.patch_size}
    actual = {"m": ds.m, "n": ds.n, "vocab_size": ds.vocab_size, "patch_size": ds.patch_size}
    for key, value in expected.items():
        if actual[key] != value:
            raise ValueError(f"dataset {key}={actual[key]} does not match config {key}={value}")


def train(config: RunConfig, train_ds: Dataset, test_ds: Dataset | None = None,
          out_dir=None, frozen: tuple = ()) -> TrainResult:
    """Adam on the total loss; logs one train row (and one test row) per epoch.

    ``frozen`` lists parameter-name prefixes excluded from updates. With
    ``out_dir`` the metrics CSV, convergence CSV and checkpoint are written there.
    """
    config.validate()
    check_compatible(config, train_ds)
    model = FSRUModel(config)
    params = {k: p for k, p in model.parameters().items()
              if not any(k.startswith(f) for f in frozen)}
    for name, p in model.parameters().items():
        p.requires_grad = name in params
    opt = Adam(params, lr=config.lr)
    rng = np.random.default_rng(config.seed + 1)
    result = TrainResult(model)
    for epoch in range(1, config.epochs + 1):
        sums = np.zeros(5)
        preds, labels = [], []
        for b_idx, batch in enumerate(train_ds.batches(config.batch_size, rng)):
            opt.zero_grad()
            with warnings.catch_warnings():
                warnings.simplefilter("ignore", DegenerateBatchWarning)
                out = model.forward(batch)
            r = out.report
            if not np.isfinite(r.total):
                err = NumericError(epoch, b_idx, r)
                if out_dir is not None:
                    _dump_diagnostic(out_dir, err, batch)
                raise err
            backward(out.total)
            opt.step()
            sums += len(batch) * np.array([r.l_cls, r.l_full, r.l_self, r.total, r.mean_gamma])
            preds.append(np.argmax(out.probs, axis=1))
            labels.append(batch.labels)
        sums /= len(train_ds)
        result.rows.append(EpochRow(epoch, "train", *sums,
                                    compute_metrics(np.concatenate(labels), np.concatenate(preds))))
        if test_ds is not None:
            result.rows.append(_evaluate_model(model, test_ds, max(config.batch_size, 256),
                                               epoch, "test"))
        last = result.rows[-1]
        log.info("epoch %d %s loss=%.4f acc=%.4f", epoch, last.split, last.total,
                 last.metrics.accuracy)
    if out_dir is not None:
        write_outputs(out_dir, result)
    return result


def _dump_diagnostic(out_dir, err: NumericError, batch: Dataset):
    payload = {"epoch": err.epoch, "batch_index": err.batch_index, "report": vars(err.report),
               "labels": batch.labels.tolist()}
    checkpoint.atomic_write_bytes(os.path.join(out_dir, "diagnostic.json"),
                                  json.dumps(payload, indent=2, default=str).encode())


def metrics_csv(rows) -> str:
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(METRIC_COLUMNS)
    for r in rows:
        writer.writerow(r.as_list())
    return buf.getvalue()


def convergence_csv(results: dict) -> str:
    """``results`` maps mixer kind to TrainResult."""
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(["epoch", "mixer_kind", "train_loss", "test_accuracy"])
    for kind, res in results.items():
        tests = {r.epoch: r.metrics.accuracy for r in res.split_rows("test")}
        for r in res.split_rows("train"):
            writer.writerow([r.epoch, kind, repr(float(r.total)),
                             repr(float(tests.get(r.epoch, float("nan"))))])
    return buf.getvalue()


def write_outputs(out_dir, result: TrainResult):
    os.makedirs(out_dir, exist_ok=True)
    checkpoint.atomic_write_bytes(os.path.join(out_dir, "metrics.csv"),
                                  metrics_csv(result.rows).encode())
    checkpoint.atomic_write_bytes(os.path.join(out_dir, "convergence.csv"),
                                  convergence_csv({result.model.config.mixer: result}).encode())
    save_model(os.path.join(out_dir, CHECKPOINT_NAME), result.model)


def save_model(path, model: FSRUModel):
    checkpoint.save(path, model.state_dict(), {"config": model.config.to_dict()})


def load_model(path) -> FSRUModel:
    arrays, meta = checkpoint.load(path)
    if "config" not in meta:
        raise checkpoint.CheckpointError("checkpoint carries no config")
    model = FSRUModel(RunConfig.from_dict(meta["config"]))
    model.load_state_dict(arrays)
    return model


def evaluate(ckpt_path, ds: Dataset) -> Metrics:
    model = load_model(ckpt_path)
    check_compatible(model.config, ds)
    return compute_metrics(ds.labels, predict(model, ds))


def cross_validate(config: RunConfig, ds: Dataset) -> list:
    """k-fold CV; returns one TrainResult per fold."""
    folds = np.array_split(np.random.default_rng(config.seed).permutation(len(ds)), config.k_folds)
    results = []
    for i, test_idx in enumerate(folds):
        train_idx = np.sort(np.concatenate([f for j, f in enumerate(folds) if j != i]))
        results.append(train(config, ds.subset(train_idx), ds.subset(np.sort(test_idx))))
    return results


# ---------------------------------------------------------------------------
# ablation and sweep drivers

ABLATIONS = {
    "full": {},
    "-usc": {"use_usc": False},
    "-csc": {"use_csc": False},
    "-dsf": {"use_dsf": False},
    "-cl": {"use_cl": False},
}


def _summary_row(label, res: TrainResult) -> list:
    m = res.final_test
    last = res.split_rows("train")[-1]
    return [label, repr(m.accuracy), repr(m.f1_rumor), repr(m.f1_nonrumor),
            repr(float(last.l_full)), repr(float(last.l_self))]


def ablate(config: RunConfig, train_ds: Dataset, test_ds: Dataset) -> tuple:
    """Train every variant on the same data and seed; returns (results, csv text)."""
    results = {name: train(config.replace(**change), train_ds, test_ds)
               for name, change in ABLATIONS.items()}
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(["variant", "accuracy", "f1_rumor", "f1_nonrumor", "l_full", "l_self"])
    for name, res in results.items():
        writer.writerow(_summary_row(name, res))
    return results, buf.getvalue()


def sweep_k(config: RunConfig, train_ds: Dataset, test_ds: Dataset,
            ks=(1, 2, 4, 8)) -> tuple:
    results = {k: train(config.replace(k=k), train_ds, test_ds) for k in ks}
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(["k", "accuracy", "f1_rumor", "f1_nonrumor", "l_full", "l_self"])
    for k, res in results.items():
        writer.writerow(_summary_row(k, res))
    return results, buf.getvalue()


def convergence(config: RunConfig, train_ds: Dataset, test_ds: Dataset,
                mixers=("spectral", "self_attention", "spatial_mlp")) -> tuple:
    results = {kind: train(config.replace(mixer=kind), train_ds, test_ds) for kind in mixers}
    return results, convergence_csv(results)


# ---------------------------------------------------------------------------
# projection


def fused_features(model: FSRUModel, ds: Dataset, batch_size: int = 256) -> np.ndarray:
    out = []
    with no_grad():
        for batch in ds.batches(batch_size):
            out.append(model.forward(batch, with_loss=False).fused)
    return np.concatenate(out)


def pca_2d(features: np.ndarray) -> np.ndarray:
    """Top-2 principal-component scores; zeros (with a warning) when degenerate."""
    x = np.asarray(features, dtype=np.float64)
    if x.shape[0] < 3:
        raise ValueError("projection needs at least 3 samples")
    centered = x - x.mean(axis=0)
    _, s, vt = np.linalg.svd(centered, full_matrices=False)
    if s.size == 0 or s[0] <= 1e-12 * max(1.0, np.abs(x).max()):
        warnings.warn("degenerate feature covariance; projecting to the origin")
        return np.zeros((x.shape[0], 2))
    comps = vt[:2]
    proj = centered @ comps.T
    if proj.shape[1] < 2:
        proj = np.hstack([proj, np.zeros((proj.shape[0], 2 - proj.shape[1]))])
    return proj


def projection_csv(points: np.ndarray, labels) -> str:
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(["x", "y", "label"])
    for (px, py), y in zip(points, labels):
        writer.writerow([repr(float(px)), repr(float(py)), int(y)])
    return buf.getvalue()


def project_features(model: FSRUModel, ds: Dataset) -> str:
    return projection_csv(pca_2d(fused_features(model, ds)), ds.labels)
