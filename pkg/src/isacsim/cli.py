"""Command-line front end.

Verbs:

* ``sweep``    — Monte Carlo SNR sweep, metric CSV.
* ``estimate`` — coarse support/angle report on one seeded scene (JSON).
* ``refine``   — one seeded refinement run: parameters plus cost trace CSV.
* ``crlb``     — angle-bound table CSV on one seeded shared-angle scene.
* ``selftest`` — fast invariant suite; exit 0 iff every check passes.

Every output starts with ``# key = value`` lines echoing the effective
configuration, so results are self-describing.  Exit codes: 0 success,
2 configuration error, 3 numerical failure.
"""

from __future__ import annotations

import argparse
import io
import json
import sys

import numpy as np

from . import __version__
from .config import apply_overrides, build_experiment, effective_lines, load_config
from .exceptions import ConfigError
from .harness import crlb_table, estimate_scene, run_refinement, run_sweep
from .selftest import run_selftest

__all__ = ["main", "entrypoint"]


def _build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="isacsim",
        description="Beamspace channel estimation experiments: sparse coarse stage, "
        "alternating refinement, information bounds.",
    )
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = parser.add_subparsers(dest="verb", required=True)
    for verb, text in (
        ("sweep", "run the Monte Carlo SNR sweep and emit the metric CSV"),
        ("estimate", "report coarse support and angles on one seeded scene"),
        ("refine", "run one seeded refinement and emit its cost trace"),
        ("crlb", "emit the angle-bound table on one seeded shared scene"),
        ("selftest", "run the fast invariant suite"),
    ):
        p = sub.add_parser(verb, help=text)
        p.add_argument("--config", help="plain-text key = value config file")
        p.add_argument("--out", help="output file (default: stdout)")
        p.add_argument("--override", action="append", default=[], metavar="KEY=VALUE",
                       help="override a config key (repeatable)")
        p.add_argument("--threads", type=int, default=1, help="worker threads for trials")
        p.add_argument("--seed", type=int, default=None, help="override the experiment seed")
    return parser


def _emit(text: str, out_path) -> None:
    if out_path:
        with open(out_path, "w", newline="") as fh:
            fh.write(text)
    else:
        sys.stdout.write(text)


def _comment_block(lines) -> str:
    return "".join(f"# {line}\n" for line in lines)


def _fmt_complex(z: complex) -> str:
    return f"{z.real:.9g}{z.imag:+.9g}j"


def _run_sweep(cfg, sage_mode, args) -> str:
    records = run_sweep(cfg, threads=args.threads)
    buf = io.StringIO()
    for line in effective_lines(cfg, sage_mode):
        buf.write(f"# {line}\n")
    buf.write("snr_db,n_subcarriers,method,metric,value,trials,seed\n")
    for r in records:
        buf.write(
            f"{r.snr_db:.9g},{r.n_subcarriers},{r.method},{r.metric},"
            f"{r.value:.9g},{r.trials},{r.seed}\n"
        )
    return buf.getvalue()


def _run_estimate(cfg, sage_mode, args) -> str:
    report = estimate_scene(cfg)
    return _comment_block(effective_lines(cfg, sage_mode)) + json.dumps(report, indent=2, sort_keys=True) + "\n"


def _run_refine(cfg, sage_mode, args) -> str:
    truth, refiner = run_refinement(cfg, mode=sage_mode)
    lines = list(effective_lines(cfg, sage_mode))
    lines.append(f"true shared_aoa_rad = {', '.join(f'{a:.9g}' for a in truth['shared_aoa_rad'])}")
    lines.append(f"true comm_aod_rad = {', '.join(f'{a:.9g}' for a in truth['comm_aod_rad'])}")
    p = refiner.params_
    if p.comm_gains is not None:
        for k in range(p.k_paths):
            lines.append(f"refined comm_gain[{k}] = {_fmt_complex(p.comm_gains[k])}")
            lines.append(f"refined comm_aoa_rad[{k}] = {p.comm_aoas[k]:.9g}")
            lines.append(f"refined comm_aod_rad[{k}] = {p.comm_aods[k]:.9g}")
    if p.sens_gains is not None:
        for k in range(p.k_paths):
            lines.append(f"refined sens_gain[{k}] = {_fmt_complex(p.sens_gains[k])}")
            lines.append(f"refined sens_angle_rad[{k}] = {p.sens_angles[k]:.9g}")
    lines.append(f"final cost = {refiner.cost_:.9g}")
    lines.append(f"outer iterations = {refiner.n_iter_}")
    lines.append(f"converged = {refiner.converged_}")
    buf = io.StringIO()
    buf.write(_comment_block(lines))
    buf.write("iteration,mode,cost\n")
    for it, mode, cost in refiner.trace_:
        buf.write(f"{it},{mode},{cost:.9g}\n")
    return buf.getvalue()


def _run_crlb(cfg, sage_mode, args) -> str:
    rows = crlb_table(cfg)
    buf = io.StringIO()
    buf.write(_comment_block(effective_lines(cfg, sage_mode)))
    buf.write("snr_db,subsystem,path,crlb_rad2,crlb_nuisance_rad2\n")
    for snr_db, subsystem, path, direct, nuisance in rows:
        buf.write(f"{snr_db:.9g},{subsystem},{path},{direct:.9g},{nuisance:.9g}\n")
    return buf.getvalue()


def main(argv=None) -> int:
    parser = _build_parser()
    args = parser.parse_args(argv)

    try:
        values = load_config(args.config) if args.config else {}
        values = apply_overrides(values, args.override)
        if args.seed is not None:
            values["seed"] = int(args.seed)
        cfg, sage_mode = build_experiment(values)
        if args.threads < 1:
            raise ConfigError(f"--threads must be >= 1, got {args.threads}")
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return 2

    try:
        if args.verb == "selftest":
            failures = run_selftest()
            return 0 if failures == 0 else 3
        runner = {
            "sweep": _run_sweep,
            "estimate": _run_estimate,
            "refine": _run_refine,
            "crlb": _run_crlb,
        }[args.verb]
        _emit(runner(cfg, sage_mode, args), args.out)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return 2
    except (ArithmeticError, np.linalg.LinAlgError) as exc:
        print(f"numerical failure: {exc}", file=sys.stderr)
        return 3
    except ValueError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return 2
    except OSError as exc:
        print(f"io error: {exc}", file=sys.stderr)
        return 2
    return 0


def entrypoint() -> None:
    sys.exit(main())
