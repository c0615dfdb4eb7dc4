"""Command-line front end.

Exit codes: 0 success, 1 config error, 2 divergence in every seed (or a failed
``verify`` check), 3 I/O error.
"""

from __future__ import annotations

import argparse
import dataclasses
import logging
import sys
from pathlib import Path

import numpy as np

from .channel import generate_dataset, rayleigh_mimo, write_dataset_csv
from .complex_linalg import make_rng
from .errors import CheckpointError, ConfigError
from .experiment import builtin_presets, get_preset, load_checkpoint, parse_config, run_grid

EXIT_OK, EXIT_CONFIG, EXIT_DIVERGED, EXIT_IO = 0, 1, 2, 3


def _cmd_run(args) -> int:
    if args.preset and args.config:
        raise ConfigError("give either a config file or --preset, not both")
    if args.preset:
        cfg = get_preset(args.preset)
    elif args.config:
        path = Path(args.config)
        cfg = parse_config(path) if path.exists() else get_preset(args.config)
    else:
        raise ConfigError("run needs a config file or preset name")
    if args.desk_scale:
        cfg = cfg.desk_scale()
    overrides = {k: v for k, v in (("seed", args.seed), ("epochs", args.epochs),
                                   ("seeds", args.seeds), ("workers", args.workers)) if v is not None}
    if overrides:
        cfg = dataclasses.replace(cfg, **overrides)
    out = Path(args.out) if args.out else Path(cfg.out_dir)
    record = run_grid(cfg, out_dir=out, save_checkpoints=args.save_checkpoints)
    n_div = sum(record.diverged)
    print(f"{cfg.name}: {cfg.seeds} seed(s), {cfg.epochs} epoch(s), {n_div} diverged")
    if not record.all_diverged:
        print(f"final mean train {record.mean_train_db[-1]:.3f} dB, val {record.mean_val_db[-1]:.3f} dB")
    print(f"wrote {out / (cfg.name + '.csv')}")
    return EXIT_DIVERGED if record.all_diverged else EXIT_OK


def _cmd_verify(args) -> int:
    from .verification import gradient_suite, init_statistics, shallow_equivalence

    ok = True
    checks = gradient_suite(args.seed)
    n_bad = sum(not c.ok for c in checks)
    worst = max(c.rel_err for c in checks)
    print(f"gradient oracle: {len(checks) - n_bad}/{len(checks)} coordinates ok (worst rel err {worst:.2e})")
    ok &= n_bad == 0
    diff = shallow_equivalence(args.seed)
    print(f"shallow/deep update agreement: max rel diff {diff:.2e}")
    ok &= diff < 1e-12
    report, mean_var = init_statistics(args.seed)
    print(f"init: mean v1 {report.mean_v1:.4f} (target {report.target_v1}), "
          f"output variance {mean_var:.4f} (target {report.target_output_variance})")
    ok &= report.v1_ok and abs(mean_var - report.target_output_variance) <= 0.3 * report.target_output_variance
    print("PASS" if ok else "FAIL")
    return EXIT_OK if ok else EXIT_DIVERGED


def _cmd_gen_data(args) -> int:
    rng = make_rng(args.seed)
    channel = rayleigh_mimo(4, 4, rng, seed=args.seed)
    ds = generate_dataset(args.n_samples, args.ebn0, channel, rng, input_scheme=args.input_scheme, seed=args.seed)
    out = Path(args.out or "dataset.csv")
    write_dataset_csv(ds, out)
    print(f"wrote {len(ds)} samples to {out}")
    return EXIT_OK


def _cmd_inspect(args) -> int:
    net = load_checkpoint(args.checkpoint)
    print(f"P={net.P} R={net.R} layers={net.depth}")
    for l, layer in enumerate(net.layers):
        print(f"  layer {l}: neurons={layer.n_neurons} inputs={layer.n_inputs} outputs={layer.n_outputs} "
              f"|W|rms={np.sqrt(np.mean(np.abs(layer.W) ** 2)):.4g} "
              f"sigma=[{layer.sigma.min():.4g}, {layer.sigma.max():.4g}]")
    for label, stats in (("input", net.input_norm), ("output", net.output_norm)):
        if stats is not None:
            print(f"  {label} normalization: {stats.mode}, scale={stats.scale:.6g}")
    return EXIT_OK


def _cmd_presets(args) -> int:
    for p in builtin_presets():
        print(f"{p.name:28s} {p.scheme:14s} {p.architecture} rates={p.layer_rates}")
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="crbf", description="Complex-valued RBF network experiments")
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True)

    run = sub.add_parser("run", help="train a (scheme x seed) grid and write convergence CSV")
    run.add_argument("config", nargs="?", help="YAML config file or preset name")
    run.add_argument("--preset")
    run.add_argument("--seed", type=int, help="master seed")
    run.add_argument("--out", help="output directory")
    run.add_argument("--desk-scale", action="store_true", help="500 epochs, 10 seeds")
    run.add_argument("--epochs", type=int)
    run.add_argument("--seeds", type=int)
    run.add_argument("--workers", type=int)
    run.add_argument("--save-checkpoints", action="store_true")
    run.set_defaults(func=_cmd_run)

    verify = sub.add_parser("verify", help="gradient, update-equivalence and init-statistics checks")
    verify.add_argument("--seed", type=int, default=0)
    verify.set_defaults(func=_cmd_verify)

    gen = sub.add_parser("gen-data", help="export a surrogate MIMO dataset as CSV")
    gen.add_argument("--seed", type=int, default=0)
    gen.add_argument("--out")
    gen.add_argument("--n-samples", type=int, default=3840 + 1280)
    gen.add_argument("--ebn0", type=float, default=26.0)
    gen.add_argument("--input-scheme", choices=("stack", "zero-pad"), default="stack")
    gen.set_defaults(func=_cmd_gen_data)

    inspect = sub.add_parser("inspect", help="summarize a checkpoint")
    inspect.add_argument("checkpoint")
    inspect.set_defaults(func=_cmd_inspect)

    presets = sub.add_parser("presets", help="list built-in experiment presets")
    presets.set_defaults(func=_cmd_presets)
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(levelname)s %(message)s")
    try:
        return args.func(args)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except CheckpointError as exc:
        print(f"checkpoint error: {exc}", file=sys.stderr)
        return EXIT_IO
    except OSError as exc:
        print(f"I/O error: {exc}", file=sys.stderr)
        return EXIT_IO


if __name__ == "__main__":
    sys.exit(main())
