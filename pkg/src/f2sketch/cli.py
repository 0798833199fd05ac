"""Command line entry point: ``f2sketch {mse,memory,edisj,gen,exhaustive}``.

Exit status is 1 when the subcommand's pass/fail criterion fails, 2 on
usage errors.
"""

from __future__ import annotations

import argparse
import json
import sys
from dataclasses import fields
from pathlib import Path

from . import harness, oracle, streamgen

EXHAUSTIVE_GRID = [(1,), (2,), (1, 1), (2, 1), (2, 1, 1), (3, 2, 1)]


def _add_common(p: argparse.ArgumentParser) -> None:
    p.add_argument("--workload", choices=harness.WORKLOADS, default=argparse.SUPPRESS)
    p.add_argument("--n", type=int, default=argparse.SUPPRESS)
    p.add_argument("--epsilon", type=float, default=argparse.SUPPRESS)
    p.add_argument("--trials", type=int, default=argparse.SUPPRESS)
    p.add_argument("--seed", type=int, default=argparse.SUPPRESS)
    p.add_argument("--out", default=argparse.SUPPRESS, help="CSV (or stream file for gen)")
    p.add_argument("--baseline", action="store_true", default=argparse.SUPPRESS,
                   help="also run the AMS tug-of-war baseline")
    p.add_argument("--universe-size", dest="universe_size", type=int, default=argparse.SUPPRESS)
    p.add_argument("--zipf-exponent", dest="zipf_exponent", type=float, default=argparse.SUPPRESS)
    p.add_argument("--t", type=int, default=argparse.SUPPRESS)
    p.add_argument("--d", type=int, default=argparse.SUPPRESS)
    p.add_argument("--label", choices=[lb.value for lb in streamgen.Label], default=argparse.SUPPRESS)
    p.add_argument("--plant-level", dest="plant_level", type=int, default=argparse.SUPPRESS)
    p.add_argument("--input", dest="input_path", default=argparse.SUPPRESS)
    p.add_argument("--sketch-epsilon", dest="sketch_epsilon", type=float, default=argparse.SUPPRESS)
    p.add_argument("--no-timing", dest="timing", action="store_false", default=argparse.SUPPRESS,
                   help="leave wall_time empty so reruns are byte-identical")
    p.add_argument("--config", type=Path, help="JSON file; its keys override flags")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="f2sketch", description=__doc__.splitlines()[0])
    sub = parser.add_subparsers(dest="command", required=True)
    for name, help_ in [
        ("mse", "empirical mean squared relative error vs eps^2"),
        ("memory", "encoded sketch size vs bit budget"),
        ("edisj", "YES/NO distinguishing on EDISJ gap streams"),
    ]:
        _add_common(sub.add_parser(name, help=help_))
    gen = sub.add_parser("gen", help="write a generated stream to a file")
    _add_common(gen)
    gen.add_argument("--format", choices=["binary", "text"], default=None)
    ex = sub.add_parser("exhaustive", help="exact mean/variance check on tiny instances")
    ex.add_argument("--freqs", help="comma separated frequencies, e.g. 2,1,1")
    ex.add_argument("--buckets", type=int, nargs="+", default=[1, 2, 3])
    return parser


def make_config(args: argparse.Namespace) -> harness.ExperimentConfig:
    names = {f.name for f in fields(harness.ExperimentConfig)}
    values = {k: v for k, v in vars(args).items() if k in names}
    if getattr(args, "config", None):
        extra = json.loads(Path(args.config).read_text())
        unknown = set(extra) - names
        if unknown:
            raise ValueError(f"unknown config keys: {sorted(unknown)}")
        values.update(extra)
    return harness.ExperimentConfig(**values).validate()


def _cmd_mse(cfg) -> bool:
    s = harness.run_mse_experiment(cfg)
    print(f"P={s.bucket_count} F2={s.exact_f2} trials={cfg.trials}")
    print(f"empirical MSE={s.empirical_mse:.6g} predicted={s.predicted_mse:.6g} "
          f"bound={s.bound:.6g} threshold={s.threshold:.6g}")
    if s.baseline_mse is not None:
        print(f"AMS baseline MSE={s.baseline_mse:.6g}")
    _maybe_csv(cfg, s.rows)
    print("PASS" if s.passed else "FAIL")
    return s.passed


def _cmd_memory(cfg) -> bool:
    s = harness.run_memory_experiment(cfg)
    print(f"P={s.bucket_count} n={s.n} mean_bits={s.mean_bits:.1f} max_bits={s.max_bits} "
          f"budget={s.budget} fixed_width={s.fixed_width_bits}")
    _maybe_csv(cfg, s.rows)
    print("PASS" if s.passed else "FAIL")
    return s.passed


def _cmd_edisj(cfg) -> bool:
    s = harness.run_edisj_experiment(cfg)
    print(f"params={s.params}")
    print(f"yes_f2={s.yes_f2} max_no_f2={s.max_no_f2} threshold={s.threshold}")
    print(f"accuracy={s.accuracy:.4f} oracle_accuracy={s.oracle_accuracy:.4f}")
    _maybe_csv(cfg, s.rows)
    print("PASS" if s.passed else "FAIL")
    return s.passed


def _cmd_gen(cfg, fmt) -> bool:
    if not cfg.out:
        raise ValueError("gen needs --out")
    out = Path(cfg.out)
    if cfg.workload == "multilevel":
        stream, layout = streamgen.multilevel_stream(
            cfg.n, cfg.epsilon, cfg.seed, cfg.universe_size, cfg.plant_level, cfg.label
        )
        streamgen.write_layout(out.with_name(out.name + ".layout.json"), layout)
    else:
        stream = harness.build_stream(cfg)
    streamgen.write_stream(out, stream, fmt)
    print(f"wrote {stream.size} ids to {out}")
    return True


def _cmd_exhaustive(args) -> bool:
    grid = [tuple(int(v) for v in args.freqs.split(","))] if args.freqs else EXHAUSTIVE_GRID
    ok = True
    for freqs in grid:
        for p in args.buckets:
            mean, var = oracle.exhaustive_sketch_moments(freqs, p)
            f2 = oracle.exact_moment(freqs, 2)
            want = oracle.predicted_variance(freqs, p)
            good = mean == f2 and var == want
            ok &= good
            print(f"freqs={freqs} P={p} mean={mean} F2={f2} var={var} "
                  f"(2/P)(F2^2-F4)={want} {'ok' if good else 'MISMATCH'}")
    print("PASS" if ok else "FAIL")
    return ok


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        if args.command == "exhaustive":
            ok = _cmd_exhaustive(args)
        else:
            cfg = make_config(args)
            if args.command == "gen":
                ok = _cmd_gen(cfg, args.format)
            else:
                ok = {"mse": _cmd_mse, "memory": _cmd_memory, "edisj": _cmd_edisj}[args.command](cfg)
    except (ValueError, TypeError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    return 0 if ok else 1


def _maybe_csv(cfg, rows) -> None:
    if cfg.out:
        harness.emit_csv(rows, cfg.out, timing=cfg.timing)
        print(f"wrote {len(rows)} rows to {cfg.out}")


if __name__ == "__main__":
    sys.exit(main())
