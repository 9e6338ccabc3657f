"""Command-line interface: ``dephasim {simulate,sweep,scan,presets}``.

Exit status: 0 on success, 1 on runtime failure, 2 on usage/config errors.
Outputs are UTF-8 with LF line endings; floats are written with 17
significant digits so they round-trip exactly.
"""

from __future__ import annotations

import argparse
import csv
import json
import logging
import os
import sys
from dataclasses import dataclass, field
from pathlib import Path

from .experiments import (
    ENGINES,
    PRESETS,
    Budget,
    ExperimentRecord,
    ScanRecord,
    SpecError,
    SweepRecord,
    get_preset,
    run_convergence_scan,
    run_disorder_sweep,
    run_single_realization,
)
from .experiments import _spec_from_dict

log = logging.getLogger("dephasim")

SUBCOMMANDS = ("simulate", "sweep", "scan", "presets")


class UsageError(Exception):
    pass


def _fmt(x) -> str:
    return "" if x is None else format(float(x), ".17g")


@dataclass
class CliInvocation:
    subcommand: str
    config_path: str | None = None
    preset: str | None = None
    overrides: dict = field(default_factory=dict)
    verbosity: int = 0
    spec: object = None


def _budget(text: str) -> Budget:
    try:
        n, e = text.lower().split("x")
        return Budget(int(n), int(e))
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected NxE (e.g. 80x400), got {text!r}") from None


def _pairs(text: str):
    return tuple((b.num_windows, b.ensemble_size) for b in map(_budget, text.split(",")))


def _engines(text: str):
    names = tuple(e.strip() for e in text.split(",") if e.strip())
    if not names:
        raise argparse.ArgumentTypeError("--engines needs at least one engine")
    for n in names:
        if n not in ENGINES:
            raise argparse.ArgumentTypeError(f"unknown engine {n!r}; choose from {', '.join(ENGINES)}")
    return names


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="dephasim", description="Dephasing Anderson model: exact vs randomised-tilt.")
    sub = parser.add_subparsers(dest="subcommand", required=True)

    common = argparse.ArgumentParser(add_help=False)
    src = common.add_mutually_exclusive_group()
    src.add_argument("--preset", choices=sorted(PRESETS), help="built-in experiment")
    src.add_argument("--config", help="JSON experiment document")
    common.add_argument("--seed", type=int, help="master seed (tilt schedules, derived disorder seeds)")
    common.add_argument("--disorder-seed", type=int, help="disorder seed for a single realization")
    common.add_argument("--threads", type=int, help="worker threads (default: $DEPHASIM_THREADS or 1)")
    common.add_argument("--out", help="output directory")
    common.add_argument("--engines", type=_engines, help="comma list from exact,digital,analogue")
    dens = common.add_mutually_exclusive_group()
    dens.add_argument("--density", dest="density", action="store_true", default=None, help="accumulate density matrices (needed for I_s)")
    dens.add_argument("--populations-only", dest="density", action="store_false", help="accumulate site populations only")
    common.add_argument("--digital", type=_budget, metavar="NxE", help="digital windows x ensemble size")
    common.add_argument("--analogue", type=_budget, metavar="NxE", help="analogue windows x ensemble size")
    common.add_argument("--realizations", type=int, help="number of disorder realizations")
    common.add_argument("--stop-rule", choices=("fixed", "quarter_decay"))
    common.add_argument("-v", "--verbose", action="count", default=0)

    sub.add_parser("simulate", parents=[common], help="one disorder realization, all engines")
    sub.add_parser("sweep", parents=[common], help="I_p distribution over disorder realizations")
    scan = sub.add_parser("scan", parents=[common], help="mean I_p over a list of (N, E) budgets")
    scan.add_argument("--pairs", type=_pairs, metavar="NxE,...", help="budgets to scan")
    presets = sub.add_parser("presets", help="list built-in experiments")
    presets.add_argument("--show", choices=sorted(PRESETS), help="print one preset as a JSON config")
    return parser


def parse_and_validate(argv=None) -> CliInvocation:
    """Parse argv into a validated invocation; raises SystemExit(2) on usage errors."""
    parser = build_parser()
    args = parser.parse_args(argv)
    inv = CliInvocation(subcommand=args.subcommand)
    if args.subcommand == "presets":
        inv.preset = args.show
        return inv
    inv.verbosity = args.verbose
    inv.preset, inv.config_path = args.preset, args.config
    if inv.preset is None and inv.config_path is None:
        parser.error("one of --preset or --config is required")
    try:
        if inv.config_path is not None:
            path = Path(inv.config_path)
            if not path.is_file():
                raise UsageError(f"config file not found: {path}")
            try:
                data = json.loads(path.read_text(encoding="utf-8"))
            except json.JSONDecodeError as exc:
                raise UsageError(f"{path}: invalid JSON ({exc})") from exc
            spec = _spec_from_dict(data)
        else:
            spec = get_preset(inv.preset)

        threads = args.threads
        if threads is None and os.environ.get("DEPHASIM_THREADS"):
            try:
                threads = int(os.environ["DEPHASIM_THREADS"])
            except ValueError:
                raise UsageError(f"DEPHASIM_THREADS must be an integer, got {os.environ['DEPHASIM_THREADS']!r}") from None
        overrides = {
            "master_seed": args.seed,
            "disorder_seed": args.disorder_seed,
            "threads": threads,
            "output_dir": args.out,
            "engines": args.engines,
            "density": args.density,
            "digital": args.digital,
            "analogue": args.analogue,
            "realizations": args.realizations,
            "stop_rule": args.stop_rule,
        }
        if args.subcommand == "scan":
            overrides["scan_pairs"] = args.pairs
        overrides = {k: v for k, v in overrides.items() if v is not None}
        inv.overrides = overrides
        spec = spec.replace(**overrides)
        if spec.output_dir is None:
            raise UsageError("an output directory is required (--out or output_dir in the config)")
        if args.subcommand == "sweep" and ("exact" not in spec.engines or len(spec.engines) < 2):
            raise UsageError("sweep needs the exact engine and at least one of digital, analogue")
        if args.subcommand == "scan" and not spec.scan_pairs:
            raise UsageError("scan needs --pairs or scan_pairs in the config")
    except (UsageError, SpecError) as exc:
        parser.error(str(exc))
    inv.spec = spec
    return inv


def _write_json(path: Path, obj):
    with path.open("w", encoding="utf-8", newline="\n") as fh:
        json.dump(obj, fh, indent=2, sort_keys=True)
        fh.write("\n")


def _write_csv(path: Path, header, rows):
    with path.open("w", encoding="utf-8", newline="") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(header)
        writer.writerows(rows)


def _seeds(spec, disorder_seed=None) -> dict:
    d = {"master_seed": spec.master_seed}
    if disorder_seed is not None:
        d["disorder_seed"] = disorder_seed
    return d


def emit_outputs(record, out_dir) -> list[Path]:
    """Write the machine-readable artifacts for a record; returns the paths written.

    simulate: populations.csv, infidelities.json, timing.json
    sweep:    distribution.csv, summary.json
    scan:     scan.csv, scan.json
    """
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    written = []
    if isinstance(record, ExperimentRecord):
        engines = record.engines
        header = ["site"] + [f"p_{e}" for e in engines]
        n = len(next(iter(record.populations.values()))) if engines else 0
        rows = [[x] + [_fmt(record.populations[e][x]) for e in engines] for x in range(n)]
        _write_csv(out / "populations.csv", header, rows)
        doc = {
            "spec": record.spec.to_dict(),
            "seeds": _seeds(record.spec, record.disorder_seed),
            "total_time": record.total_time,
            "engines": engines,
            "pairs": {k: v.as_dict() for k, v in record.infidelities.items()},
            "settings": record.settings,
            "errors": record.errors,
            "decay": record.decay,
        }
        _write_json(out / "infidelities.json", doc)
        _write_json(out / "timing.json", record.timing)
        written += [out / "populations.csv", out / "infidelities.json", out / "timing.json"]
    elif isinstance(record, SweepRecord):
        engines = record.protocol_engines
        header = ["realization", "disorder_seed"] + [f"ip_{e}" for e in engines]
        rows = [[r["realization"], r["disorder_seed"]] + [_fmt(r[f"ip_{e}"]) for e in engines] for r in record.rows]
        _write_csv(out / "distribution.csv", header, rows)
        doc = {
            "spec": record.spec.to_dict(),
            "seeds": _seeds(record.spec),
            "realizations_requested": record.spec.realizations,
            "realizations_ok": len(record.rows),
            "realizations_failed": len(record.failures),
            "failures": record.failures,
            "engines": record.summaries,
        }
        _write_json(out / "summary.json", doc)
        written += [out / "distribution.csv", out / "summary.json"]
    elif isinstance(record, ScanRecord):
        header = ["engine", "num_windows", "ensemble_size", "mean_ip", "stderr_ip", "n"]
        rows = [
            [r["engine"], r["num_windows"], r["ensemble_size"], _fmt(r["mean_ip"]), _fmt(r["stderr_ip"]), r["n"]]
            for r in record.table
        ]
        _write_csv(out / "scan.csv", header, rows)
        _write_json(out / "scan.json", {"spec": record.spec.to_dict(), "seeds": _seeds(record.spec), "table": record.table, "trend": record.trend})
        written += [out / "scan.csv", out / "scan.json"]
    else:
        raise TypeError(f"cannot emit outputs for {type(record).__name__}")
    return written


def _check_writable(out_dir: str):
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    probe = out / ".write-probe"
    probe.write_text("", encoding="utf-8")
    probe.unlink()


def main(argv=None) -> int:
    inv = parse_and_validate(argv)
    if inv.subcommand == "presets":
        if inv.preset:
            print(json.dumps(PRESETS[inv.preset].to_dict(), indent=2, sort_keys=True))
        else:
            for name, spec in PRESETS.items():
                budgets = f"digital {spec.digital.num_windows}x{spec.digital.ensemble_size}, analogue {spec.analogue.num_windows}x{spec.analogue.ensemble_size}"
                print(f"{name}: L={spec.lattice.num_sites} gamma={spec.gamma:g} t={spec.total_time:g} R={spec.realizations} {budgets}")
        return 0

    logging.basicConfig(level=logging.WARNING - 10 * min(inv.verbosity, 2), format="%(levelname)s %(name)s: %(message)s")
    spec = inv.spec
    try:
        _check_writable(spec.output_dir)
    except OSError as exc:
        print(f"dephasim: cannot write to output directory {spec.output_dir}: {exc}", file=sys.stderr)
        return 1
    try:
        if inv.subcommand == "simulate":
            record = run_single_realization(spec)
        elif inv.subcommand == "sweep":
            record = run_disorder_sweep(spec, spec.output_dir)
        else:
            record = run_convergence_scan(spec)
        emit_outputs(record, spec.output_dir)
    except SpecError as exc:
        print(f"dephasim: {exc}", file=sys.stderr)
        return 2
    except Exception as exc:
        log.debug("failure", exc_info=True)
        print(f"dephasim: {type(exc).__name__}: {exc}", file=sys.stderr)
        return 1
    if inv.subcommand == "simulate" and record.errors:
        print(f"dephasim: engine errors: {record.errors}", file=sys.stderr)
        return 1
    return 0


if __name__ == "__main__":
    sys.exit(main())
