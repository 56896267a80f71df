"""Command-line entry points.

Exit codes: 0 success, 2 configuration problems, 3 anything else.
"""

from __future__ import annotations

import argparse
import json
import logging
import sys

from .harness import (
    ConfigError,
    config_from_dict,
    load_config,
    run_and_write,
    summarize,
)


def _format_summary(summary: dict) -> str:
    strategies = summary.get("strategies", {})
    rows = [f"{'strategy':<18} {'thr med (Mbps)':>14} {'thr p20':>10} "
            f"{'ang err med':>12} {'outage':>8} {'overhead':>9}"]

    def fmt(v, nd=1):
        return "-" if v is None else f"{v:.{nd}f}"

    for name in sorted(strategies):
        s = strategies[name]
        rows.append(
            f"{name:<18} {fmt(s['throughput_mbps']['median']):>14} "
            f"{fmt(s['throughput_mbps']['p20']):>10} "
            f"{fmt(s['angle_error_deg']['median'], 2):>12} "
            f"{s['outage_fraction']:>8.3f} "
            f"{s['overhead_fraction']:>9.4f}")
    base = strategies.get("non_collaborative", {})
    base_med = base.get("throughput_mbps", {}).get("median")
    for name in ("commrad_single", "commrad_multi"):
        med = strategies.get(name, {}).get("throughput_mbps", {}).get("median")
        if med and base_med:
            rows.append(f"{name} / non_collaborative median throughput: "
                        f"{med / base_med:.2f}x")
    return "\n".join(rows)


def _cmd_run(args) -> int:
    config = load_config(args.config)
    if args.output is not None:
        import dataclasses
        config = dataclasses.replace(config, output_dir=args.output)
    result = run_and_write(config)
    if not args.quiet:
        print(_format_summary(summarize(result)))
    return 0


def _cmd_sweep(args) -> int:
    with open(args.config) as f:
        raw = json.load(f)
    if not isinstance(raw, dict):
        raise ConfigError("config root must be a JSON object")
    rollup: dict[str, list[float]] = {}
    for seed in range(args.seeds):
        trial = dict(raw)
        if "scenario" in trial:
            trial["seed"] = seed
        elif "scene" in trial:
            trial["scene"] = dict(trial["scene"], seed=seed)
        if args.output is not None:
            trial["output_dir"] = f"{args.output}/seed{seed:03d}"
        config = config_from_dict(trial)
        summary = summarize(run_and_write(config))
        for name, s in summary["strategies"].items():
            med = s["throughput_mbps"]["median"]
            if med is not None:
                rollup.setdefault(name, []).append(med)
        if not args.quiet:
            print(f"seed {seed}:")
            print(_format_summary(summary))
    print("mean of per-seed median throughput (Mbps):")
    for name in sorted(rollup):
        vals = rollup[name]
        print(f"  {name:<18} {sum(vals) / len(vals):.1f}  "
              f"({len(vals)} trials)")
    return 0


def _cmd_report(args) -> int:
    try:
        with open(args.summary) as f:
            summary = json.load(f)
    except (OSError, json.JSONDecodeError) as e:
        raise ConfigError(f"cannot load summary {args.summary}: {e}") from e
    print(_format_summary(summary))
    return 0


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(
        prog="radarbeam",
        description="Radar-aided mmWave beam management simulator")
    p.add_argument("-v", "--verbose", action="store_true",
                   help="debug logging")
    sub = p.add_subparsers(dest="command", required=True)

    run = sub.add_parser("run", help="run one experiment config")
    run.add_argument("config", help="JSON experiment config")
    run.add_argument("--output", help="directory for result files")
    run.add_argument("--quiet", action="store_true")
    run.set_defaults(func=_cmd_run)

    sweep = sub.add_parser("sweep", help="rerun a config across seeds")
    sweep.add_argument("config")
    sweep.add_argument("--seeds", type=int, default=5)
    sweep.add_argument("--output")
    sweep.add_argument("--quiet", action="store_true")
    sweep.set_defaults(func=_cmd_sweep)

    rep = sub.add_parser("report", help="print a stored summary.json")
    rep.add_argument("summary")
    rep.set_defaults(func=_cmd_report)
    return p


def main(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(
        level=logging.DEBUG if args.verbose else logging.WARNING,
        format="%(levelname)s %(name)s: %(message)s")
    try:
        return args.func(args)
    except ConfigError as e:
        print(f"config error: {e}", file=sys.stderr)
        return 2
    except Exception as e:  # noqa: BLE001 - CLI boundary
        logging.getLogger(__name__).exception("run failed")
        print(f"error: {e}", file=sys.stderr)
        return 3


if __name__ == "__main__":
    sys.exit(main())
