"""Command-line entry point: ``fsru <subcommand> [options]``.

Exit status is 0 on success, 1 for usage or input errors and 2 when training
hits a non-finite loss.
"""

from __future__ import annotations

import argparse
import json
import logging
import os
import sys

import numpy as np

from fsru import baselines, data, train as tr
from fsru.checkpoint import CheckpointError, atomic_write_bytes
from fsru.config import ConfigError, RunConfig, load_config

EXIT_OK, EXIT_USAGE, EXIT_NUMERIC = 0, 1, 2


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(EXIT_USAGE, f"{self.prog}: error: {message}\n")


def _common(p: argparse.ArgumentParser):
    p.add_argument("--config", help="JSON file with RunConfig fields")
    p.add_argument("--seed", type=int, help="overrides the config seed")
    p.add_argument("--out-dir", default=".", help="where output files go (default: .)")
    p.add_argument("--set", dest="overrides", action="append", default=[], metavar="KEY=VALUE",
                   help="override one config field; repeatable")


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="fsru", description="Frequency-spectrum multimodal rumor classifier.")
    parser.add_argument("-v", "--verbose", action="store_true", help="log every epoch")
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)

    p = sub.add_parser("generate", help="write a planted-spectrum synthetic dataset")
    _common(p)
    p.add_argument("--count", type=int, default=1200)
    p.add_argument("--balance", type=float, default=0.5)
    p.add_argument("--noise", type=float, default=0.5)
    p.add_argument("--consistency", type=float, default=1.0)
    p.add_argument("--grid", type=int, nargs=2, default=(4, 4), metavar=("H", "W"))
    p.add_argument("--output", default="dataset.txt", help="file name inside --out-dir")

    p = sub.add_parser("train", help="train on a dataset file")
    _common(p)
    p.add_argument("--data", required=True)
    p.add_argument("--test-data", help="held-out file; otherwise a test_fraction split is used")
    p.add_argument("--compare-mixers", action="store_true",
                   help="also train the attention and spatial-MLP mixers and write convergence.csv")

    p = sub.add_parser("evaluate", help="score a checkpoint on a dataset file")
    _common(p)
    p.add_argument("--checkpoint", required=True)
    p.add_argument("--data", required=True)

    for name, text in (("ablate", "train the full model and each ablation variant"),
                       ("sweep-k", "train with k in 1, 2, 4, 8")):
        p = sub.add_parser(name, help=text)
        _common(p)
        p.add_argument("--data", required=True)
        p.add_argument("--test-data")

    p = sub.add_parser("bench", help="time the three token mixers")
    _common(p)
    p.add_argument("--sizes", type=int, nargs="+", default=[128, 256, 512, 1024])
    p.add_argument("--kinds", nargs="+", default=[k.value for k in baselines.MixerKind],
                   choices=[k.value for k in baselines.MixerKind])
    p.add_argument("--repeats", type=int, default=20)
    p.add_argument("--warmup", type=int, default=5)

    p = sub.add_parser("project", help="2-D PCA projection of fused features")
    _common(p)
    p.add_argument("--checkpoint", required=True)
    p.add_argument("--data", required=True)
    return parser


def _config(args) -> RunConfig:
    cfg = load_config(args.config, args.overrides)
    if args.seed is not None:
        cfg = cfg.replace(seed=args.seed)
    return cfg


def _write(args, name: str, text: str) -> str:
    os.makedirs(args.out_dir, exist_ok=True)
    path = os.path.join(args.out_dir, name)
    atomic_write_bytes(path, text.encode("utf-8"))
    return path


def _splits(args, cfg: RunConfig) -> tuple:
    ds = data.load(args.data)
    if args.test_data:
        return ds, data.load(args.test_data)
    return tr.split_dataset(ds, cfg.test_fraction, cfg.seed)


def cmd_generate(args) -> int:
    cfg = _config(args)
    h, w = args.grid
    spec = data.SyntheticSpec(count=args.count, balance=args.balance, m=cfg.m, h=h, w=w,
                              patch_size=cfg.patch_size, vocab_size=cfg.vocab_size,
                              noise=args.noise, consistency=args.consistency)
    if spec.n != cfg.n:
        raise UsageError(f"grid {h}x{w} gives n={spec.n} but the config has n={cfg.n}")
    try:
        ds = data.generate(spec, cfg.seed)
    except ValueError as exc:
        raise UsageError(str(exc)) from exc
    os.makedirs(args.out_dir, exist_ok=True)
    path = os.path.join(args.out_dir, args.output)
    data.save(path, ds)
    print(f"wrote {len(ds)} samples ({int(ds.labels.sum())} rumor) to {path}")
    return EXIT_OK


def cmd_train(args) -> int:
    cfg = _config(args)
    if cfg.k_folds > 1:
        results = tr.cross_validate(cfg, data.load(args.data))
        rows = [r for res in results for r in res.rows]
        _write(args, "metrics.csv", tr.metrics_csv(rows))
        accs = [res.final_test.accuracy for res in results]
        print(f"{cfg.k_folds}-fold accuracy mean={np.mean(accs):.4f} std={np.std(accs):.4f}")
        return EXIT_OK
    train_ds, test_ds = _splits(args, cfg)
    result = tr.train(cfg, train_ds, test_ds, out_dir=args.out_dir)
    if args.compare_mixers:
        results = {cfg.mixer: result}
        for kind in ("spectral", "self_attention", "spatial_mlp"):
            if kind not in results:
                results[kind] = tr.train(cfg.replace(mixer=kind), train_ds, test_ds)
        _write(args, "convergence.csv", tr.convergence_csv(results))
    print(json.dumps(vars(result.final_test), default=list))
    return EXIT_OK


def cmd_evaluate(args) -> int:
    metrics = tr.evaluate(args.checkpoint, data.load(args.data))
    text = json.dumps(vars(metrics), default=list)
    _write(args, "evaluation.json", text + "\n")
    print(text)
    return EXIT_OK


def cmd_ablate(args) -> int:
    cfg = _config(args)
    train_ds, test_ds = _splits(args, cfg)
    _, text = tr.ablate(cfg, train_ds, test_ds)
    print(f"wrote {_write(args, 'ablation.csv', text)}")
    return EXIT_OK


def cmd_sweep_k(args) -> int:
    cfg = _config(args)
    train_ds, test_ds = _splits(args, cfg)
    _, text = tr.sweep_k(cfg, train_ds, test_ds)
    print(f"wrote {_write(args, 'sweep_k.csv', text)}")
    return EXIT_OK


def cmd_bench(args) -> int:
    cfg = _config(args)
    sizes = [(L, cfg.d) for L in args.sizes]
    records = baselines.bench(args.kinds, sizes, repeats=args.repeats, warmup=args.warmup,
                              seed=cfg.seed)
    print(f"wrote {_write(args, 'bench.csv', baselines.bench_csv(records))}")
    return EXIT_OK


def cmd_project(args) -> int:
    model = tr.load_model(args.checkpoint)
    ds = data.load(args.data)
    tr.check_compatible(model.config, ds)
    print(f"wrote {_write(args, 'projection.csv', tr.project_features(model, ds))}")
    return EXIT_OK


COMMANDS = {"generate": cmd_generate, "train": cmd_train, "evaluate": cmd_evaluate,
            "ablate": cmd_ablate, "sweep-k": cmd_sweep_k, "bench": cmd_bench,
            "project": cmd_project}


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(message)s")
    try:
        return COMMANDS[args.command](args)
    except tr.NumericError as exc:
        print(f"fsru: {exc}", file=sys.stderr)
        return EXIT_NUMERIC
    except (UsageError, ConfigError, data.DatasetFormatError, CheckpointError,
            FileNotFoundError, ValueError) as exc:
        print(f"fsru: error: {exc}", file=sys.stderr)
        return EXIT_USAGE


if __name__ == "__main__":
    sys.exit(main())
