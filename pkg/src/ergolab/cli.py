"""Command line entry point: ``ergolab <experiment> --config FILE [options]``."""
import argparse
import json
import sys
import time

from .errors import ConfigError, ErgolabError
from .experiments import EXPERIMENT_NAMES, default_workers, run_experiment, validate_config
from .tables import emit

EXIT_OK, EXIT_CONFIG, EXIT_RUNTIME = 0, 2, 3


def build_parser():
    ap = argparse.ArgumentParser(prog="ergolab", description=__doc__)
    ap.add_argument("experiment", choices=EXPERIMENT_NAMES)
    ap.add_argument("--config", required=True, help="JSON config file")
    ap.add_argument("--seed", type=int, default=None, help="override the config seed")
    ap.add_argument("--workers", type=int, default=None,
                    help="worker processes (default: $ERGOLAB_WORKERS or 1)")
    ap.add_argument("--out", default=None, help="output path prefix")
    ap.add_argument("--format", choices=("csv", "json", "both"), default="csv")
    return ap


def main(argv=None):
    args = build_parser().parse_args(argv)
    try:
        with open(args.config, encoding="utf-8") as fh:
            raw = json.load(fh)
    except (OSError, json.JSONDecodeError) as exc:
        print(f"config error: cannot read {args.config}: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    if not isinstance(raw, dict):
        print("config error: config must be a JSON object", file=sys.stderr)
        return EXIT_CONFIG
    if raw.setdefault("experiment", args.experiment) != args.experiment:
        print(f"config error: config is for {raw['experiment']!r}, command line asks for "
              f"{args.experiment!r}", file=sys.stderr)
        return EXIT_CONFIG
    if args.seed is not None:
        raw["seed"] = args.seed
    try:
        cfg = validate_config(raw)
    except ConfigError as exc:
        for v in exc.violations:
            print(f"config error: {v}", file=sys.stderr)
        return EXIT_CONFIG
    workers = args.workers if args.workers is not None else default_workers()
    prefix = args.out or cfg.output or f"ergolab-{cfg.experiment}"
    formats = ("csv", "json") if args.format == "both" else (args.format,)
    start = time.perf_counter()
    try:
        table = run_experiment(cfg, workers)
    except ErgolabError as exc:
        print(f"runtime error: {exc}", file=sys.stderr)
        return EXIT_RUNTIME
    wall = time.perf_counter() - start
    try:
        paths = emit(table, prefix, formats)
        with open(f"{prefix}.run.json", "w", encoding="utf-8", newline="\n") as fh:
            json.dump({"wall_time_s": wall, "workers": workers, "outputs": paths}, fh,
                      sort_keys=True, indent=1)
    except OSError as exc:
        print(f"runtime error: cannot write output: {exc}", file=sys.stderr)
        return EXIT_RUNTIME
    for p in paths:
        print(p)
    summary = table.metadata.get("summary")
    if summary:
        print(json.dumps(summary, sort_keys=True))
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
