"""Command-line harness: train, eval, bench, and verify.

Exit codes are a stable contract for CI: 0 success, 1 invariant or numeric
failure (including a non-SPD training system), 2 configuration or IO error.
All artifacts land under the configured output directory.
"""

from __future__ import annotations

import argparse
import sys
from pathlib import Path

import numpy as np

from . import bench as bench_mod
from . import verify as verify_mod
from .config import (ConfigError, RunConfig, load_datasets, load_run_config,
                     missing_data_paths)
from .data import DataFormatError, TransformSpec, fit_apply_transforms, load_delimited, load_idx
from .linalg import NotSPDError
from .metrics import accuracy, roc_auc
from .snapshot import SnapshotFormatError, load_snapshot, save_snapshot
from .training import run_training

EXIT_OK = 0
EXIT_NUMERIC = 1
EXIT_CONFIG = 2


def _thread_cap(threads: int):
    """BLAS thread limit as a context manager; a no-op when uncapped."""
    if threads and threads > 0:
        try:
            from threadpoolctl import threadpool_limits
            return threadpool_limits(limits=threads)
        except ImportError:
            print("threadpoolctl not installed; 'threads' key ignored", file=sys.stderr)
    import contextlib
    return contextlib.nullcontext()


def _print_architecture(cfg: RunConfig) -> None:
    widths = cfg.widths
    core = widths[:-1] + [1]
    d = widths[-1]
    params_per_replica = sum((2 * n_in + 1) * n_out for n_in, n_out in zip(core, core[1:]))
    print(f"architecture: {'-'.join(map(str, widths))}")
    print(f"replicas: {d}, packages per replica: {len(core) - 1}")
    for i, (n_in, n_out) in enumerate(zip(core, core[1:]), start=1):
        print(f"  package {i}: {n_in} -> {n_out}, constellation points {2 * n_in + 1}")
    print(f"trainable parameters: {params_per_replica * d:,}")
    print(f"alpha={cfg.alpha} batch_rows={cfg.batch_rows} epochs={cfg.epochs} "
          f"precision={cfg.precision} init={cfg.init} task={cfg.task}")


def _write_effective_config(cfg: RunConfig, out_dir: Path) -> None:
    lines = ["# resolved configuration", "[data]", f"format = {cfg.data_format}"]
    for key in ("train_images", "train_labels", "test_images", "test_labels", "path"):
        val = getattr(cfg, key)
        if val is not None:
            lines.append(f"{key} = {val}")
    lines += [
        f"label_column = {cfg.label_column}", f"delimiter = {cfg.delimiter}",
        f"normalize = {cfg.normalize}", f"clamp = {cfg.clamp}",
        f"log_columns = {','.join(map(str, cfg.log_columns))}",
        f"log1p_columns = {','.join(map(str, cfg.log1p_columns))}",
        "", "[model]",
        f"widths = {','.join(map(str, cfg.widths))}", f"alpha = {cfg.alpha}",
        f"init = {cfg.init}", f"sigma2 = {cfg.sigma2}",
        f"kernel_b = {cfg.kernel_b}", f"kernel_c = {cfg.kernel_c}",
        f"precision = {cfg.precision}",
        "", "[train]",
        f"epochs = {cfg.epochs}", f"batch_rows = {cfg.batch_rows}", f"seed = {cfg.seed}",
        f"shuffle = {cfg.shuffle}", f"precompute_first_layer = {cfg.precompute_first_layer}",
        f"task = {cfg.task}", f"threads = {cfg.threads}",
        "", "[output]",
        f"dir = {cfg.out_dir}", f"snapshot_every = {cfg.snapshot_every}",
    ]
    (out_dir / "effective.ini").write_text("\n".join(lines) + "\n")


def cmd_train(args) -> int:
    try:
        cfg = load_run_config(args.config, check_paths=not args.dry_run)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG

    if args.dry_run:
        _print_architecture(cfg)
        for key, p in missing_data_paths(cfg):
            print(f"note: [data] {key} not staged yet: {p}")
        return EXIT_OK

    try:
        train, test, fitted_spec = load_datasets(cfg)
    except (DataFormatError, OSError) as exc:
        print(f"data error: {exc}", file=sys.stderr)
        return EXIT_CONFIG

    out_dir = Path(cfg.out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    _write_effective_config(cfg, out_dir)
    csv_path = out_dir / "metrics.csv"
    preprocessing = None if fitted_spec is None else fitted_spec.to_dict()

    limiter = _thread_cap(cfg.threads)

    def on_epoch(record, live_model):
        print(f"epoch {record.epoch}: train={record.train_metric:.4f} "
              f"test={record.test_metric:.4f} residual={record.residual:.4e} "
              f"({record.seconds:.1f}s)", flush=True)
        if cfg.snapshot_every and record.epoch and record.epoch % cfg.snapshot_every == 0:
            save_snapshot(out_dir / f"model-epoch{record.epoch}.phc1", live_model,
                          preprocessing=preprocessing)

    try:
        with limiter:
            tc = cfg.train_config()
            model, records = run_training(tc, train, test, csv_path=csv_path,
                                          on_epoch=on_epoch)
    except NotSPDError as exc:
        print(f"training system not positive definite (raise alpha): {exc}", file=sys.stderr)
        return EXIT_NUMERIC
    except ValueError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG

    save_snapshot(out_dir / "model.phc1", model, preprocessing=preprocessing)
    print(f"wrote {csv_path} and {out_dir / 'model.phc1'}")
    return EXIT_OK


def cmd_eval(args) -> int:
    try:
        model, preprocessing = load_snapshot(args.snapshot)
    except (SnapshotFormatError, OSError) as exc:
        print(f"snapshot error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    try:
        if args.labels:
            data = load_idx(args.dataset, args.labels)
        else:
            data = load_delimited(args.dataset, label_column=args.label_column,
                                  delimiter=args.delimiter)
    except (DataFormatError, OSError) as exc:
        print(f"data error: {exc}", file=sys.stderr)
        return EXIT_CONFIG

    if preprocessing is not None:
        spec = TransformSpec.from_dict(preprocessing)
        data, _ = fit_apply_transforms(data, spec)

    scores = model.scores(data.features)
    if model.d > 1:
        metric = accuracy(np.argmax(scores, axis=1), data.labels)
        print(f"accuracy: {metric:.4f}")
    else:
        metric = roc_auc(scores[:, 0], data.labels)
        print(f"roc_auc: {metric:.4f}")
    return EXIT_OK


def cmd_bench(args) -> int:
    widths = [n for n in (16, 32, 64, 128, 256, 512, 1024, 2048) if n <= args.max_n]
    try:
        rows = bench_mod.run_bench(widths=widths, batch_rows=tuple(args.batch_rows),
                                   repeats=args.repeats, seed=args.seed)
    except AssertionError as exc:
        print(f"agreement failure: {exc}", file=sys.stderr)
        return EXIT_NUMERIC
    if args.out:
        bench_mod.write_csv(rows, args.out)
        print(f"wrote {args.out}")
    for row in rows:
        print(f"{row.op:20s} n={row.n:5d} r={row.r:4d} fast={row.fast_seconds:.2e}s "
              f"naive={row.naive_seconds:.2e}s err={row.max_rel_err:.1e}")
    for op, n in bench_mod.crossover_widths(rows).items():
        where = str(n) if n is not None else "none in range"
        print(f"crossover width for {op}: {where}")
    return EXIT_OK


def cmd_verify(args) -> int:
    results = verify_mod.run_all(seed=args.seed)
    return EXIT_OK if all(r.passed for r in results) else EXIT_NUMERIC


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="polycascade",
                                     description="Polyharmonic cascade training harness")
    sub = parser.add_subparsers(dest="command", required=True)

    p_train = sub.add_parser("train", help="train a model from a run config file")
    p_train.add_argument("config", help="path to an INI run config")
    p_train.add_argument("--dry-run", action="store_true",
                         help="validate the config and print the resolved architecture")
    p_train.set_defaults(fn=cmd_train)

    p_eval = sub.add_parser("eval", help="evaluate a snapshot on a dataset")
    p_eval.add_argument("snapshot")
    p_eval.add_argument("dataset", help="IDX images file (with --labels) or delimited text")
    p_eval.add_argument("--labels", help="IDX labels file")
    p_eval.add_argument("--label-column", type=int, default=0)
    p_eval.add_argument("--delimiter", default=",")
    p_eval.set_defaults(fn=cmd_eval)

    p_bench = sub.add_parser("bench", help="time fast vs naive package operations")
    p_bench.add_argument("--max-n", type=int, default=2048)
    p_bench.add_argument("--batch-rows", type=int, nargs="+", default=[64, 256])
    p_bench.add_argument("--repeats", type=int, default=5)
    p_bench.add_argument("--seed", type=int, default=0)
    p_bench.add_argument("--out", help="CSV output path")
    p_bench.set_defaults(fn=cmd_bench)

    p_verify = sub.add_parser("verify", help="run the invariant battery")
    p_verify.add_argument("--seed", type=int, default=0)
    p_verify.set_defaults(fn=cmd_verify)
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    return args.fn(args)


if __name__ == "__main__":
    sys.exit(main())
