"""Command-line entry point.

Subcommands map one-to-one onto the experiment drivers, plus `models`
(capability listing).  Delimited output (CSV rows or a JSON report) goes
to --out or stdout; verdicts and fits go to stderr.  Exit status: 0 when
every verdict passes, 2 when any fails, 1 on usage or configuration
errors.  Reruns of the same invocation produce byte-identical output.
"""

from __future__ import annotations

import argparse
import json
import sys
from typing import List, Optional

from bsquant.experiments import (
    ExperimentConfig,
    run_convergence,
    run_decay,
    run_kernel_check,
    run_profile,
    run_quantize,
)
from bsquant.legendrian import loop_presets, make_loop
from bsquant.models import parse_model
from bsquant.reporting import verdict_lines, write_report

__all__ = ["main", "build_parser"]

_RUNNERS = {
    "kernel-check": run_kernel_check,
    "quantize": run_quantize,
    "profile": run_profile,
    "decay": run_decay,
    "convergence": run_convergence,
}

_USAGE_EXIT = 1
_VERDICT_EXIT = 2


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        print(f"{self.prog}: error: {message}", file=sys.stderr)
        raise SystemExit(_USAGE_EXIT)


def _parse_k_list(text: str):
    try:
        ks = tuple(int(part) for part in text.split(",") if part.strip())
    except ValueError:
        raise ValueError(f"levels must be comma-separated integers: {text!r}")
    if not ks or any(k < 1 for k in ks):
        raise ValueError("levels must be positive integers")
    return ks


def _parse_w_points(text: str):
    points = []
    for chunk in text.split(";"):
        chunk = chunk.strip()
        if not chunk:
            continue
        parts = chunk.split(",")
        if len(parts) == 1:
            points.append(complex(float(parts[0]), 0.0))
        elif len(parts) == 2:
            points.append(complex(float(parts[0]), float(parts[1])))
        else:
            raise ValueError(f"offset must be re or re,im: {chunk!r}")
    if not points:
        raise ValueError("no offsets given")
    return tuple(points)


def _add_common(sub: argparse.ArgumentParser):
    sub.add_argument("--config", help="JSON file of config fields "
                     "(flags given on the command line override it)")
    sub.add_argument("--model", help="model name, e.g. bf:1 or cp1:2")
    sub.add_argument("--loop", help="loop preset, e.g. cp1-equator or "
                     "bf-plane:a=1,y0=0.6")
    sub.add_argument("--k", help="comma-separated levels, e.g. 64,128,256")
    sub.add_argument("--w", help="offsets re,im separated by ';'")
    sub.add_argument("--w-grid", dest="w_grid",
                     help="offset grid, e.g. p=-2:2:0.25,q=-2:2:0.25")
    sub.add_argument("--ell", type=int, help="correction order (0, 1 or 2)")
    sub.add_argument("--epsilon", type=float, help="envelope slack in (0,1)")
    sub.add_argument("--quad-nodes", dest="quad_nodes", type=int,
                     help="loop quadrature nodes (>= max(64, 8k))")
    sub.add_argument("--seed", type=int, help="seed for randomized sweeps")
    sub.add_argument("--window-const", dest="window_const", type=float,
                     help="window radius multiplier (default 1)")
    sub.add_argument("--format", choices=("csv", "json"), default="csv",
                     help="delimited output format")
    sub.add_argument("--out", help="write delimited output to this file")
    sub.add_argument("--svg", help="render the report figure to this file")


def build_parser() -> _Parser:
    parser = _Parser(prog="bs-quantize",
                     description="Quantized-loop scaling experiments on "
                                 "model circle bundles.")
    subs = parser.add_subparsers(dest="command", required=True)
    for name, runner in _RUNNERS.items():
        sub = subs.add_parser(name, help=runner.__doc__.splitlines()[0],
                              description=runner.__doc__)
        _add_common(sub)
    subs.add_parser("models", help="list models, presets and contracts")
    return parser


def _config_from_args(args) -> ExperimentConfig:
    fields = {}
    if args.config:
        with open(args.config) as fh:
            loaded = json.load(fh)
        if not isinstance(loaded, dict):
            raise ValueError("config file must hold a JSON object")
        allowed = set(ExperimentConfig.__dataclass_fields__)
        unknown = set(loaded) - allowed
        if unknown:
            raise ValueError(f"unknown config keys: {sorted(unknown)}")
        fields.update(loaded)
        if "k_list" in fields:
            fields["k_list"] = tuple(int(k) for k in fields["k_list"])
        if "w_points" in fields:
            fields["w_points"] = tuple(
                complex(p[0], p[1]) if isinstance(p, (list, tuple))
                else complex(p) for p in fields["w_points"])
    if args.model is not None:
        fields["model"] = args.model
    if args.loop is not None:
        fields["loop"] = args.loop
    if args.k is not None:
        fields["k_list"] = _parse_k_list(args.k)
    if args.w is not None:
        fields["w_points"] = _parse_w_points(args.w)
    if args.w_grid is not None:
        fields["w_grid"] = args.w_grid
    for name in ("ell", "epsilon", "quad_nodes", "seed", "window_const"):
        val = getattr(args, name)
        if val is not None:
            fields[name] = val
    cfg = ExperimentConfig(**fields)
    parse_model(cfg.model)                      # validate early
    if not 0 <= cfg.ell <= 2:
        raise ValueError("correction order must be 0, 1 or 2")
    if not 0 < cfg.epsilon < 1:
        raise ValueError("epsilon must lie in (0, 1)")
    return cfg


def _models_text() -> str:
    lines = [
        "models:",
        "  bf:<d>    flat model, base C^d; closed-form kernel, exact "
        "Gaussian scaling law",
        "  cp1:<D>   curved model, degree D line bundle over the "
        "projective line;",
        "            level-k section space has dimension D*k + 1",
        "",
        "loop presets (make_loop):",
    ]
    for name in loop_presets():
        loop = make_loop(name)
        lines.append(f"  {name:<20s} model {loop.model.name}, "
                     f"{len(loop.components)} component(s)")
    lines += [
        "",
        "contracts:",
        "  loop quadrature floor: max(64, 8k) nodes",
        "  prediction window:     |w| <= window_const * k^(1/6)",
        "  correction orders:     ell in {0, 1, 2}",
    ]
    return "\n".join(lines) + "\n"


def main(argv: Optional[List[str]] = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    if args.command == "models":
        sys.stdout.write(_models_text())
        return 0
    try:
        cfg = _config_from_args(args)
        report = _RUNNERS[args.command](cfg)
        text = write_report(report, args.out, args.format)
        if args.svg:
            from bsquant.figures import render_report
            render_report(report, args.svg)
    except (ValueError, OSError, json.JSONDecodeError) as exc:
        print(f"bs-quantize: error: {exc}", file=sys.stderr)
        return _USAGE_EXIT
    if not args.out:
        sys.stdout.write(text)
    for line in verdict_lines(report):
        print(line, file=sys.stderr)
    print(f"RESULT: {'PASS' if report.passed else 'FAIL'}", file=sys.stderr)
    return 0 if report.passed else _VERDICT_EXIT


if __name__ == "__main__":
    sys.exit(main())
