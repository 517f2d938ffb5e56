"""Command-line interface.

Subcommands: train, denoise, complete, hetero, mhn, ae, gradcheck, grid,
bench.  Global flags --config/--seed/--out.  Exit codes: 0 success,
2 config error, 3 I/O error, 4 gradient-check failure.
"""

import argparse
import csv
import sys
import time
from pathlib import Path

import numpy as np

from . import backend, checkpoint, core, data, harness, memory
from .core import Activation, TrainConfig
from .errors import ConfigError, FormatError, PcamError

EXIT_OK = 0
EXIT_CONFIG = 2
EXIT_IO = 3
EXIT_GRADCHECK = 4

_TASK_BY_COMMAND = {
    "denoise": "denoise",
    "complete": "complete",
    "hetero": "hetero",
    "mhn": "mhn_compare",
    "ae": "ae_compare",
    "gradcheck": "gradcheck",
}


def _build_parser():
    parser = argparse.ArgumentParser(
        prog="pcam",
        description="Predictive-coding associative memory experiments",
    )
    parser.add_argument("--config", help="key=value experiment config file")
    parser.add_argument("--seed", type=int, help="override the config seed")
    parser.add_argument("--out", help="override the output directory")
    sub = parser.add_subparsers(dest="command", required=True)
    for name in ("train", *_TASK_BY_COMMAND):
        sub.add_parser(name)
    grid = sub.add_parser("grid", help="tile images into one PPM")
    grid.add_argument("output", help="output PPM path")
    grid.add_argument("rows", nargs="+",
                      help="comma-separated image files, one argument per row")
    grid.add_argument("--diff", metavar="I,J",
                      help="append |row I - row J| as a difference row")
    bench = sub.add_parser("bench", help="compare compiled and numpy backends")
    bench.add_argument("--width", type=int, default=256)
    bench.add_argument("--sensory", type=int, default=3072)
    bench.add_argument("--batch", type=int, default=16)
    bench.add_argument("--steps", type=int, default=100)
    bench.add_argument("--repeat", type=int, default=3)
    return parser


def _resolve_config(args):
    overrides = {}
    if args.seed is not None:
        overrides["seed"] = str(args.seed)
    if args.out is not None:
        overrides["out"] = args.out
    if args.command in _TASK_BY_COMMAND:
        overrides["task"] = _TASK_BY_COMMAND[args.command]
    if args.config:
        harness.load_config(args.config)  # reject bad files before overriding
        return harness.load_config(args.config, overrides)
    return harness.build_config({}, overrides)


def _cmd_train(cfg, sweep_values):
    outdir = Path(cfg.out)
    outdir.mkdir(parents=True, exist_ok=True)
    ds, _, _ = harness.make_dataset(cfg)
    model, trace = harness.train_pcn(cfg, ds)
    ckpt = outdir / f"pcn_seed{cfg.seed}.pcam"
    checkpoint.save_model(model, ckpt)
    trace_path = outdir / "training_trace.csv"
    with open(trace_path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh)
        writer.writerow(["epoch", "mean_energy"])
        writer.writerows((i, repr(e)) for i, e in enumerate(trace))
    print(f"trained {model.widths} on {len(ds)} items; "
          f"final mean energy {trace[-1]:.3e}")
    print(f"checkpoint: {ckpt}")
    print(f"trace: {trace_path}")
    return EXIT_OK


def _cmd_task(cfg, sweep_values):
    artifacts = harness.run_experiment(cfg, sweep_values)
    for row in artifacts.rows:
        print(
            f"{row['task']}: depth={row['depth']} width={row['width']} "
            f"N={row['N']} {row['corruption']} -> rate "
            f"{float(row['rate']):.3f} ({row['retrieved']}/{row['total']})"
        )
    print(f"metrics: {artifacts.csv_path}")
    if cfg.task == "gradcheck":
        report = artifacts.gradcheck_report
        print(
            "gradcheck max relative errors: "
            f"values {report['values']:.2e}, weights {report['weights']:.2e}, "
            f"memory {report['memory']:.2e}"
        )
        if not report["passed"]:
            print("gradcheck FAILED (tolerance 1e-4)", file=sys.stderr)
            return EXIT_GRADCHECK
    return EXIT_OK


def _cmd_grid(args):
    rows = []
    for group in args.rows:
        rows.append([data.read_tensor(p) for p in group.split(",") if p])
    if args.diff:
        i, j = (int(v) for v in args.diff.split(","))
        rows.append([
            harness.difference_tensor(a, b)
            for a, b in zip(rows[i], rows[j])
        ])
    harness.emit_grid(rows, args.output)
    print(f"wrote {args.output}")
    return EXIT_OK


def _time_call(fn, repeat):
    best = float("inf")
    for _ in range(repeat):
        t0 = time.perf_counter()
        fn()
        best = min(best, time.perf_counter() - t0)
    return best


def _cmd_bench(args):
    mods = backend.available()
    widths = [args.sensory, args.width, args.width]
    model = core.init_model(widths, Activation.RELU, seed=0)
    rng = np.random.default_rng(0)
    items = rng.uniform(0, 1, (args.batch, args.sensory))
    print(f"widths={widths} batch={args.batch} steps={args.steps} "
          f"(best of {args.repeat})")
    header = f"{'kernel':<18}" + "".join(f"{n:>12}" for n in mods)
    print(header)
    results = {}
    for name, mod in mods.items():
        def run_relax(mod=mod):
            xs = mod.feed_backward(model.weights, model.memory, 1, args.batch)
            xs[0] = items.copy()
            mod.relax(model.weights, model.memory, 1, xs,
                      np.zeros_like(items), 0.05, args.steps)
        results.setdefault("relax", {})[name] = _time_call(run_relax, args.repeat)

        def run_epoch(mod=mod):
            m = model.copy()
            mod.train_epoch(m.weights, m.memory, 1, items, 24, 0.05, 1e-3)
        results.setdefault("train_epoch", {})[name] = _time_call(
            run_epoch, args.repeat
        )

        def run_single(mod=mod):
            xs = mod.feed_backward(model.weights, model.memory, 1, 1)
            xs[0] = items[:1].copy()
            mod.relax(model.weights, model.memory, 1, xs,
                      np.zeros((1, args.sensory)), 0.05, args.steps)
        results.setdefault("relax_single", {})[name] = _time_call(
            run_single, args.repeat
        )
    for kernel, times in results.items():
        line = f"{kernel:<18}"
        for name in mods:
            line += f"{times[name] * 1000:>10.1f}ms"
        if len(times) == 2:
            line += f"   (x{times['numpy'] / times['cython']:.2f})"
        print(line)
    return EXIT_OK


def main(argv=None):
    args = _build_parser().parse_args(argv)
    try:
        if args.command == "grid":
            return _cmd_grid(args)
        if args.command == "bench":
            return _cmd_bench(args)
        cfg, sweep_values = _resolve_config(args)
        if args.command == "train":
            return _cmd_train(cfg, sweep_values)
        return _cmd_task(cfg, sweep_values)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except (OSError, IOError, FormatError) as exc:
        print(f"i/o error: {exc}", file=sys.stderr)
        return EXIT_IO
    except PcamError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_CONFIG


if __name__ == "__main__":
    sys.exit(main())
