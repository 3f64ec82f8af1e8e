"""Command line entry point: ``stsbc {simulate,required-ebn0,figure}``."""

from __future__ import annotations

import argparse
import csv
import json
import logging
import sys
from dataclasses import replace
from fractions import Fraction
from pathlib import Path

import numpy as np

from . import harness

SCHEME_CHOICES = ("alamouti", "sm", "golden", "3d")


def parse_grid(text: str) -> tuple[float, ...]:
    """``A:B:STEP`` (inclusive), or a single value, or a comma list."""
    if ":" in text:
        parts = [float(p) for p in text.split(":")]
        if len(parts) != 3 or parts[2] <= 0:
            raise argparse.ArgumentTypeError(f"grid must be A:B:STEP with STEP > 0, got {text!r}")
        a, b, step = parts
        n = int(np.floor((b - a) / step + 1e-9)) + 1
        return tuple(round(a + i * step, 9) for i in range(n))
    return tuple(float(p) for p in text.split(","))


def _common(p: argparse.ArgumentParser, grid: bool):
    p.add_argument("--config", type=Path, help="JSON file with any of the flag values")
    p.add_argument("--scheme", choices=SCHEME_CHOICES)
    p.add_argument("--mod", type=int, choices=(4, 16, 64, 256))
    p.add_argument("--rc", choices=("1/2", "2/3", "3/4"))
    p.add_argument("--beta-db", type=float)
    if grid:
        p.add_argument("--ebn0-db", type=parse_grid)
    p.add_argument("--target-ber", type=float)
    p.add_argument("--min-frame-errors", type=int)
    p.add_argument("--max-bits", type=int)
    p.add_argument("--iterations", type=int)
    p.add_argument("--seed", type=int)
    p.add_argument("--detector", choices=("mmse-ic", "exhaustive"))
    p.add_argument("--info-len", type=int)
    p.add_argument("--early-exit", action="store_true", default=None)
    p.add_argument("--out", type=Path)


_DEFAULTS = {
    "scheme": "alamouti", "mod": 64, "rc": "2/3", "beta_db": 0.0, "ebn0_db": (10.0,),
    "target_ber": 1e-3, "min_frame_errors": 100, "max_bits": None, "iterations": 5,
    "seed": 0, "detector": "mmse-ic", "info_len": 9000, "early_exit": False, "out": None,
}


def resolve_options(args: argparse.Namespace) -> dict:
    """Defaults < config file < command-line flags."""
    opts = dict(_DEFAULTS)
    if getattr(args, "config", None):
        try:
            data = json.loads(Path(args.config).read_text())
        except (OSError, json.JSONDecodeError) as exc:
            raise SystemExit(f"cannot read config {args.config}: {exc}")
        for key, value in data.items():
            key = key.replace("-", "_")
            if key not in opts:
                raise SystemExit(f"unknown config key {key!r} in {args.config}")
            if key == "ebn0_db" and isinstance(value, str):
                value = parse_grid(value)
            elif key == "ebn0_db" and not isinstance(value, (list, tuple)):
                value = (float(value),)
            opts[key] = value
    for key in opts:
        value = getattr(args, key, None)
        if value is not None:
            opts[key] = value
    return opts


def config_from_options(opts: dict) -> harness.SimConfig:
    return harness.SimConfig(
        scheme=opts["scheme"], order=int(opts["mod"]), rate=Fraction(opts["rc"]),
        beta_db=float(opts["beta_db"]), ebn0_grid=tuple(opts["ebn0_db"]),
        target_ber=float(opts["target_ber"]), min_frame_errors=int(opts["min_frame_errors"]),
        max_bits=None if opts["max_bits"] is None else int(opts["max_bits"]),
        iterations=int(opts["iterations"]), seed=int(opts["seed"]), detector=opts["detector"],
        info_len=int(opts["info_len"]), early_exit=bool(opts["early_exit"]),
    )


def cmd_simulate(args) -> int:
    opts = resolve_options(args)
    cfg = config_from_options(opts)
    points = harness.run_sweep(cfg)
    out = opts["out"]
    if out:
        harness.write_csv(points, out)
    else:
        w = csv.DictWriter(sys.stdout, fieldnames=harness.CSV_COLUMNS)
        w.writeheader()
        for p in points:
            w.writerow(p.csv_row())
    return 0


def _report_required(res: harness.RequiredEbN0, cfg: harness.SimConfig) -> dict:
    return {
        "scheme": cfg.scheme.value, "mod": cfg.order, "rc": str(cfg.rate), "eta": f"{cfg.eta:g}",
        "beta_db": f"{cfg.beta_db:g}", "target_ber": f"{res.target_ber:g}",
        "required_ebn0_db": "out-of-range" if res.ebn0_db is None else f"{res.ebn0_db:.3f}",
    }


def cmd_required(args) -> int:
    opts = resolve_options(args)
    cfg = config_from_options(opts)
    res = harness.required_ebn0(cfg)
    row = _report_required(res, cfg)
    print(json.dumps(row))
    if opts["out"]:
        pts = sorted(res.evaluated.items())
        harness.write_csv([p for _, p in pts], opts["out"])
    return 0 if res.in_range else 2


def cmd_figure(args) -> int:
    overrides = {}
    if args.target_ber is not None:
        overrides["target_ber"] = args.target_ber
    if args.max_bits is not None:
        overrides["max_bits"] = args.max_bits
    if args.min_frame_errors is not None:
        overrides["min_frame_errors"] = args.min_frame_errors
    if args.seed is not None:
        overrides["seed"] = args.seed
    configs = harness.figure_configs(args.id, **overrides)
    out = args.out or Path(f"figure{args.id}.csv")
    summary_path = out.with_name(out.stem + "_required.csv")
    harness.write_csv([], out)
    with summary_path.open("w", newline="") as fh:
        w = csv.DictWriter(fh, fieldnames=list(_report_required(
            harness.RequiredEbN0(None, 1e-3), configs[0]).keys()))
        w.writeheader()
        for cfg in configs:
            res = harness.required_ebn0(cfg)
            harness.write_csv([p for _, p in sorted(res.evaluated.items())], out, append=True)
            row = _report_required(res, cfg)
            w.writerow(row)
            fh.flush()
            print(json.dumps(row), flush=True)
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="stsbc", description=__doc__)
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True)
    p = sub.add_parser("simulate", help="BER over an Eb/N0 grid")
    _common(p, grid=True)
    p.set_defaults(func=cmd_simulate)
    p = sub.add_parser("required-ebn0", help="Eb/N0 reaching a target BER")
    _common(p, grid=False)
    p.set_defaults(func=cmd_required)
    p = sub.add_parser("figure", help="run a preconfigured figure grid")
    p.add_argument("--id", type=int, choices=(2, 3), required=True)
    p.add_argument("--target-ber", type=float)
    p.add_argument("--max-bits", type=int)
    p.add_argument("--min-frame-errors", type=int)
    p.add_argument("--seed", type=int)
    p.add_argument("--out", type=Path)
    p.set_defaults(func=cmd_figure)
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(asctime)s %(levelname)s %(message)s")
    return args.func(args)


if __name__ == "__main__":
    sys.exit(main())
