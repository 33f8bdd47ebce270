"""Command-line entry point.

Subcommands: ``ckpt`` (file-level checkpoint arithmetic), ``bench run`` (the
seeded benchmark), ``sweep lambda`` (scaling-factor ablation), and ``report``
(tables and figures from a finished run directory).

Exit codes: 0 success, 1 I/O or runtime failure, 2 validation error.
"""

import argparse
import json
import sys
from pathlib import Path

from . import __version__
from .checkpoint import KIND_DELTA, digest, read_checkpoint, write_checkpoint
from .config import SequenceConfig
from .editing import TrimSpec, apply, diff, sparsity_stats, trim
from .errors import SeqEditError, StageError, ValidationError
from .figures import save_final_bars, save_stage_curve, save_sweep
from .metrics import curve_to_table, metrics_to_table, stage_curve
from .pipeline import lambda_sweep, sweep_to_table
from .runio import (
    atomic_write_text,
    load_method_runs,
    utc_now,
    write_json,
    write_manifest,
    write_method_run,
)
from .toybench.baselines import METHOD_ORDER, run_bench

DEFAULT_GRID = "0,0.2,0.4,0.6,0.8,1.0"


def _load_config(path: str | None, seed: int | None) -> SequenceConfig:
    cfg = SequenceConfig.from_file(path) if path else SequenceConfig.from_dict({})
    if seed is not None:
        cfg = cfg.with_overrides({"seed": seed})
    return cfg


def _parse_methods(raw: str) -> list[str]:
    methods = [m.strip() for m in raw.split(",") if m.strip()]
    if not methods:
        raise ValidationError("no methods requested")
    return methods


def _parse_grid(raw: str) -> list[float]:
    try:
        return [float(tok) for tok in raw.split(",") if tok.strip()]
    except ValueError as exc:
        raise ValidationError(f"bad grid value: {exc}") from exc


def cmd_ckpt_diff(args) -> int:
    minuend = read_checkpoint(args.minuend)
    subtrahend = read_checkpoint(args.subtrahend)
    tau = diff(minuend, subtrahend)
    write_checkpoint(tau, args.out)
    print(f"wrote delta {args.out} (digest {digest(tau)})")
    return 0


def cmd_ckpt_trim(args) -> int:
    tau = read_checkpoint(args.in_path)
    trimmed = trim(tau, TrimSpec(k=args.k, scope=args.scope))
    write_checkpoint(trimmed, args.out)
    stats = sparsity_stats(trimmed)
    print(
        f"wrote {args.out}: kept {stats['n_nonzero']} of {stats['n_total']} "
        f"values (digest {digest(trimmed)})"
    )
    return 0


def cmd_ckpt_apply(args) -> int:
    base = read_checkpoint(args.base)
    tau = read_checkpoint(args.tau)
    edited = apply(base, tau, args.lam)
    write_checkpoint(edited, args.out)
    print(f"wrote {args.out} (digest {digest(edited)})")
    return 0


def cmd_ckpt_stats(args) -> int:
    ckpt = read_checkpoint(args.in_path)
    stats = {
        "digest": digest(ckpt),
        "kind": ckpt.kind,
        "n_tensors": len(ckpt.tensors),
        "n_params": ckpt.n_params,
    }
    if ckpt.kind == KIND_DELTA:
        stats.update(sparsity_stats(ckpt))
    stats["meta"] = dict(ckpt.meta)
    if args.json:
        print(json.dumps(stats, indent=2))
    else:
        for key, value in stats.items():
            print(f"{key}: {value}")
    return 0


def cmd_bench_run(args) -> int:
    cfg = _load_config(args.config, args.seed)
    if args.print_config:
        sys.stdout.write(cfg.to_json())
        return 0
    if not args.out_dir:
        raise ValidationError("--out-dir is required to run the benchmark")
    methods = _parse_methods(args.methods)
    out_dir = Path(args.out_dir)
    started = utc_now()
    outputs = []

    config_path = out_dir / "config.json"
    write_json(config_path, cfg.raw)
    outputs.append(config_path)

    try:
        runs = run_bench(cfg, methods)
    except StageError as exc:
        for record in exc.records:
            path = out_dir / "stages" / exc.method / f"stage_{record.stage}.json"
            write_json(path, record.to_dict())
        print(
            f"error: aborted at stage {exc.stage}; kept {len(exc.records)} "
            f"completed stage record(s) under {out_dir / 'stages' / exc.method}",
            file=sys.stderr,
        )
        raise
    for run in runs:
        outputs.extend(write_method_run(out_dir, run))

    tables = []
    for run in runs:
        tables.extend(record.metrics_edited for record in run.records)
        if not run.records:
            tables.append(run.final_metrics)
    results_path = out_dir / "tables" / "results.csv"
    atomic_write_text(results_path, metrics_to_table(tables, cfg.n_domains).render_csv())
    outputs.append(results_path)

    write_manifest(out_dir, cfg.raw, cfg.seed, started, outputs, __version__)
    for run in runs:
        final = run.final_metrics
        line = f"{run.method}: final awer {final.awer:.4f}"
        if final.werr is not None:
            line += f", werr {final.werr:+.2f}%"
        print(line)
    print(f"run complete: {out_dir}")
    return 0


def cmd_sweep_lambda(args) -> int:
    cfg = _load_config(args.config, args.seed)
    if not args.out_dir:
        raise ValidationError("--out-dir is required to run the sweep")
    grid = _parse_grid(args.grid)
    out_dir = Path(args.out_dir)
    started = utc_now()

    points = lambda_sweep(cfg, args.stage, grid)
    outputs = []
    config_path = out_dir / "config.json"
    write_json(config_path, cfg.raw)
    outputs.append(config_path)
    table_path = out_dir / "tables" / "lambda_sweep.csv"
    atomic_write_text(table_path, sweep_to_table(points).render_csv())
    outputs.append(table_path)
    outputs.append(save_sweep(points, out_dir / "figures" / "lambda_sweep.png"))
    write_manifest(out_dir, cfg.raw, cfg.seed, started, outputs, __version__)

    for p in points:
        print(
            f"lambda {p.lam:g}: previous {p.previous:.2f}%, "
            f"new {p.new:.2f}%, all {p.all_seen:.2f}%"
        )
    print(f"sweep complete: {out_dir}")
    return 0


def cmd_report_table(args) -> int:
    runs = load_method_runs(args.in_dir)
    tables = [run.final_metrics for run in runs]
    out_dir = Path(args.out_dir or args.in_dir)
    rendered_table = metrics_to_table(tables)
    text = (
        rendered_table.render_csv() if args.format == "csv"
        else rendered_table.render_markdown()
    )
    path = out_dir / "tables" / f"final_table.{args.format}"
    atomic_write_text(path, text)
    figure = save_final_bars(tables, out_dir / "figures" / "final_awer.png")
    sys.stdout.write(text)
    print(f"wrote {path} and {figure}")
    return 0


def cmd_report_curve(args) -> int:
    runs = load_method_runs(args.in_dir)
    by_method = {run.method: run.records for run in runs if run.records}
    if not by_method:
        raise ValidationError("no stage-wise records to build a curve from")
    rows = stage_curve(by_method)
    out_dir = Path(args.out_dir or args.in_dir)
    table = curve_to_table(rows)
    text = table.render_csv() if args.format == "csv" else table.render_markdown()
    path = out_dir / "tables" / f"stage_curve.{args.format}"
    atomic_write_text(path, text)
    figure = save_stage_curve(rows, out_dir / "figures" / "stage_curve.png")
    sys.stdout.write(text)
    print(f"wrote {path} and {figure}")
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="seqedit",
        description="Sequential model editing: checkpoint arithmetic, a seeded "
        "continual-learning benchmark, sweeps, and reports.",
    )
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)

    ckpt = sub.add_parser("ckpt", help="file-level checkpoint arithmetic")
    ckpt_sub = ckpt.add_subparsers(dest="subcommand", required=True)

    p = ckpt_sub.add_parser("diff", help="delta = minuend - subtrahend")
    p.add_argument("--minuend", required=True, help="fine-tuned checkpoint file")
    p.add_argument("--subtrahend", required=True, help="base checkpoint file")
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_ckpt_diff)

    p = ckpt_sub.add_parser("trim", help="keep only the largest-magnitude values")
    p.add_argument("--in", dest="in_path", required=True, help="delta checkpoint file")
    p.add_argument("--k", type=float, default=0.5, help="fraction kept (default 0.5)")
    p.add_argument("--scope", choices=("global", "per-tensor"), default="global")
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_ckpt_trim)

    p = ckpt_sub.add_parser("apply", help="base + lambda * delta")
    p.add_argument("--base", required=True)
    p.add_argument("--tau", required=True, help="delta checkpoint file")
    p.add_argument("--lambda", dest="lam", type=float, default=0.4,
                   help="scaling factor (default 0.4)")
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_ckpt_apply)

    p = ckpt_sub.add_parser("stats", help="digest, sparsity, and meta of a checkpoint")
    p.add_argument("--in", dest="in_path", required=True)
    p.add_argument("--json", action="store_true", help="machine-readable output")
    p.set_defaults(func=cmd_ckpt_stats)

    bench = sub.add_parser("bench", help="seeded continual-learning benchmark")
    bench_sub = bench.add_subparsers(dest="subcommand", required=True)
    p = bench_sub.add_parser("run", help="run benchmark methods and write a run directory")
    p.add_argument("--config", help="JSON config file; defaults apply when omitted")
    p.add_argument("--out-dir", help="output directory for records, tables, manifest")
    p.add_argument("--methods", default=",".join(METHOD_ORDER),
                   help="comma-separated subset of: " + ", ".join(METHOD_ORDER))
    p.add_argument("--seed", type=int, help="override the config master seed")
    p.add_argument("--print-config", action="store_true",
                   help="print the fully resolved config and exit")
    p.set_defaults(func=cmd_bench_run)

    sweep = sub.add_parser("sweep", help="hyperparameter sweeps")
    sweep_sub = sweep.add_subparsers(dest="subcommand", required=True)
    p = sweep_sub.add_parser("lambda", help="vary the scaling factor at one stage")
    p.add_argument("--config", help="JSON config file; defaults apply when omitted")
    p.add_argument("--out-dir", help="output directory for the sweep table and figure")
    p.add_argument("--stage", type=int, default=2, help="probe stage (default 2)")
    p.add_argument("--grid", default=DEFAULT_GRID,
                   help=f"comma-separated scaling values (default {DEFAULT_GRID})")
    p.add_argument("--seed", type=int, help="override the config master seed")
    p.set_defaults(func=cmd_sweep_lambda)

    report = sub.add_parser("report", help="tables and figures from a run directory")
    report_sub = report.add_subparsers(dest="subcommand", required=True)
    for name, func, text in (
        ("table", cmd_report_table, "final comparison table"),
        ("curve", cmd_report_curve, "per-stage seen-domain error curve"),
    ):
        p = report_sub.add_parser(name, help=text)
        p.add_argument("--in", dest="in_dir", required=True, help="run directory to read")
        p.add_argument("--format", choices=("csv", "md"), default="csv")
        p.add_argument("--out-dir", help="where to write (default: the run directory)")
        p.set_defaults(func=func)
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except ValidationError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except OSError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    except SeqEditError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
