"""Command-line sweep over arrival rate and allocation scheme.

Writes one CSV row per (scheme, arrival rate) with the replication means
and 95% confidence half-widths. Lines starting with ``#`` echo the full
effective configuration.
"""
from __future__ import annotations

import argparse
import csv
import io
import logging
import sys

from . import __version__
from .config import LoadedConfig, format_settings, load_config, parse_settings
from .engine import RunSpec, replicate
from .errors import ConfigError
from .metrics import aggregate
from .model import Scheme

log = logging.getLogger("mbsalloc")


def _num(x) -> str:
    if x is None:
        return "nan"
    return format(float(x), ".10g")


def csv_columns(class_labels) -> list:
    return (["scheme", "lambda_total"]
            + [f"P_block_{c}" for c in class_labels]
            + [f"P_drop_{c}" for c in class_labels]
            + ["P_drop", "P_drop_CI", "P_forced", "P_forced_CI", "P_forced_alt",
               "utilization", "replications", "seed_base"])


def sweep_rows(loaded: LoadedConfig, workers=None, check=False):
    """Yield ``(scheme, lambda, Summary)`` in output order."""
    config, rates, sweep = loaded
    for scheme in sweep.schemes:
        cfg = config.with_scheme(scheme)
        for lam in sweep.lambda_values:
            spec = RunSpec(cfg, rates.with_rate(lam), sweep.horizon_s, sweep.warmup_s, sweep.seed)
            log.info("running %s at lambda=%g (%d replications)", scheme, lam, sweep.replications)
            records = replicate(spec, sweep.replications, sweep.seeds(), workers=workers, check=check)
            yield scheme, lam, aggregate(records)


def run_sweep(loaded: LoadedConfig, out=None, workers=None, check=False) -> str:
    """Run the sweep and write CSV to ``out`` (returns the text as well)."""
    buf = io.StringIO()
    labels = [c.label for c in loaded.config.classes()]
    buf.write(f"# mbsalloc {__version__}\n")
    buf.write("# forced termination: dropped handovers / admitted new calls; "
              "P_forced_alt: (blocked new + dropped handovers) / offered new\n")
    for line in format_settings(loaded.effective):
        buf.write(f"# {line}\n")
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(csv_columns(labels))
    for scheme, lam, summary in sweep_rows(loaded, workers=workers, check=check):
        m, hw = summary.mean, summary.half_width
        writer.writerow(
            [scheme.name, _num(lam)]
            + [_num(m[f"P_block_{c}"]) for c in labels]
            + [_num(m[f"P_drop_{c}"]) for c in labels]
            + [_num(m["P_drop"]), _num(hw["P_drop"]), _num(m["P_forced"]),
               _num(hw["P_forced"]), _num(m["P_forced_alt"]), _num(m["utilization"]),
               summary.n, loaded.sweep.seed])
    text = buf.getvalue()
    if out is not None:
        out.write(text)
    return text


def _parse_lambdas(text: str) -> list:
    try:
        return [float(x) for x in text.replace(" ", "").split(",") if x]
    except ValueError:
        raise ConfigError(f"--lambda: not a comma-separated list of numbers: {text!r}") from None


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(
        prog="mbsalloc",
        description="Sweep blocking, handover dropping, forced termination and "
                    "utilization over arrival rate for each allocation scheme.")
    p.add_argument("--config", metavar="PATH", help="TOML key/value configuration file")
    p.add_argument("--scheme", action="append", metavar="NAME",
                   help="'proposed' or 'fixed:KBPS'; repeatable (default: config sweep.schemes)")
    p.add_argument("--lambda", dest="lambdas", metavar="LIST",
                   help="comma-separated total new-call arrival rates in calls/s")
    p.add_argument("--replications", type=int, metavar="N")
    p.add_argument("--seed", type=int, metavar="N", help="seed of the first replication")
    p.add_argument("--horizon", type=float, metavar="SECONDS", help="simulated time per run")
    p.add_argument("--out", default="stdout", metavar="PATH|stdout")
    p.add_argument("--workers", type=int, metavar="N", help="replication threads")
    p.add_argument("--check", action="store_true", help="verify cell invariants after every event")
    p.add_argument("-v", "--verbose", action="store_true")
    return p


def _load(args) -> LoadedConfig:
    settings = dict(load_config(args.config).settings) if args.config else {}
    if args.scheme:
        settings["sweep.schemes"] = [Scheme.parse(s).name for s in args.scheme]
    if args.lambdas is not None:
        settings["sweep.lambda"] = _parse_lambdas(args.lambdas)
    if args.replications is not None:
        settings["sweep.replications"] = args.replications
    if args.seed is not None:
        settings["sweep.seed"] = args.seed
    if args.horizon is not None:
        settings["sim.horizon_s"] = args.horizon
    return parse_settings(settings)


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(message)s", stream=sys.stderr)
    try:
        loaded = _load(args)
        if args.out == "stdout":
            run_sweep(loaded, sys.stdout, workers=args.workers, check=args.check)
        else:
            with open(args.out, "w", newline="") as fh:
                run_sweep(loaded, fh, workers=args.workers, check=args.check)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return 1
    except OSError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    except Exception as exc:  # noqa: BLE001 - exit code 2 marks internal faults
        log.exception("internal error")
        print(f"internal error: {exc}", file=sys.stderr)
        return 2
    return 0


if __name__ == "__main__":
    sys.exit(main())
