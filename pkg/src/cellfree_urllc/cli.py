"""Command-line entry point: ``cellfree-urllc {run,sweep-t,sweep-clusters,sweep-n}``.

Exit status is 0 on success, 2 on a configuration error and 3 when an
experiment aborts because too many trials failed. The worker count is read
from the ``CELLFREE_URLLC_WORKERS`` environment variable.
"""

from __future__ import annotations

import argparse
import json
import sys

from .config import ConfigError, ScenarioConfig, load_config
from .harness import MODES, ExperimentAborted, emit, emit_table, run_experiment, sweep_clusters, sweep_n, sweep_t


def _floats(text: str) -> list[float]:
    return [float(v) for v in text.split(",") if v.strip()]


def _ints(text: str) -> list[int]:
    return [int(v) for v in text.split(",") if v.strip()]


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="cellfree-urllc", description="Cell-free URLLC precoding experiments.")
    sub = parser.add_subparsers(dest="command", required=True)

    def common(p):
        p.add_argument("--config", help="YAML/JSON scenario file")
        p.add_argument("--seed", type=int)
        p.add_argument("--trials", type=int)
        p.add_argument("--out", help="output file (default: summary on stdout only)")
        p.add_argument("--format", choices=("csv", "json"), default="csv")

    p = sub.add_parser("run", help="Monte-Carlo run of one precoding mode")
    common(p)
    p.add_argument("--mode", choices=MODES, default="centralized")

    p = sub.add_parser("sweep-t", help="95%%-likely rates versus transmission time")
    common(p)
    p.add_argument("--t-values", type=_floats, default=[1e-5, 2e-5, 5e-5, 1e-4], help="seconds, comma separated")

    p = sub.add_parser("sweep-clusters", help="centralized versus clustered precoding")
    common(p)
    p.add_argument("--clusters", type=_ints, default=[1, 2, 4, 16], help="cluster counts, comma separated")

    p = sub.add_parser("sweep-n", help="rates versus antennas per AP")
    common(p)
    p.add_argument("--n-values", type=_ints, default=[1, 2, 4])
    p.add_argument("--modes", type=lambda s: s.split(","), default=["centralized", "mmse"])
    return parser


def _config(args) -> ScenarioConfig:
    overrides = {"seed": args.seed, "trials": args.trials}
    if args.config:
        return load_config(args.config, overrides)
    return ScenarioConfig.from_dict({k: v for k, v in overrides.items() if v is not None})


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        config = _config(args)
        if args.command == "run":
            report = run_experiment(config, args.mode)
            if args.out:
                emit(report, args.out, args.format)
            print(json.dumps(report.summary(), indent=1))
            return 0
        if args.command == "sweep-t":
            rows = sweep_t(config, args.t_values)
        elif args.command == "sweep-clusters":
            rows = sweep_clusters(config, args.clusters)
        else:
            bad = [m for m in args.modes if m not in MODES]
            if bad:
                raise ConfigError(f"unknown mode(s) {bad}")
            rows = sweep_n(config, args.n_values, args.modes)
        if args.out:
            emit_table(rows, args.out, args.format)
        print(json.dumps(rows, indent=1))
        return 0
    except ConfigError as exc:
        print(f"configuration error: {exc}", file=sys.stderr)
        return 2
    except ExperimentAborted as exc:
        print(f"aborted: {exc}", file=sys.stderr)
        return 3


if __name__ == "__main__":
    sys.exit(main())
