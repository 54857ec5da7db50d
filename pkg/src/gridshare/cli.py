"""Command-line front end: run, sweep, detect, compare, keygen."""

from __future__ import annotations

import argparse
import csv
import dataclasses
import sys

from . import harness, numtheory
from .errors import GridShareError
from .transport import PHASES


def _add_seed_args(parser):
    parser.add_argument("--seed-profiles", type=int, default=1)
    parser.add_argument("--seed-crypto", type=int, default=2)
    parser.add_argument("--seed-adversary", type=int, default=3)


def _add_scenario_args(parser):
    parser.add_argument("--scenario", help="key = value scenario file")
    parser.add_argument("--n-tas", type=int)
    parser.add_argument("--bits-p", type=int)
    parser.add_argument("--bits-b", type=int)
    parser.add_argument("--scale", type=int)
    parser.add_argument("--zeta", type=float)
    parser.add_argument("--varsigma", type=int)
    parser.add_argument("--beta", type=float)
    parser.add_argument("--mode", choices=["secure", "plain"])
    parser.add_argument("--mr-rounds", type=int)
    parser.add_argument("--worst-case", action="store_true", default=None)
    parser.add_argument("--force-reveal", action="store_true", default=None)
    parser.add_argument("--faithful-keygen", action="store_true", default=None)
    _add_seed_args(parser)


_FLAG_TO_FIELD = {
    "n_tas": "n_tas", "bits_p": "bits_p", "bits_b": "bits_b",
    "scale": "scale", "zeta": "zeta", "varsigma": "varsigma", "beta": "beta",
    "mode": "mode", "mr_rounds": "mr_rounds",
    "worst_case": "worst_case", "force_reveal": "force_reveal",
    "seed_profiles": "seed_profiles", "seed_crypto": "seed_crypto",
    "seed_adversary": "seed_adversary",
}


def build_config(args):
    if getattr(args, "scenario", None):
        with open(args.scenario) as fh:
            config = harness.parse_scenario_file(fh.read())
    else:
        config = harness.ScenarioConfig()
    overrides = {}
    for flag, name in _FLAG_TO_FIELD.items():
        value = getattr(args, flag, None)
        if value is not None:
            overrides[name] = value
    if getattr(args, "faithful_keygen", None):
        overrides["keygen_mode"] = "faithful"
    return dataclasses.replace(config, **overrides)


def _print_report(report):
    print(f"status: {report.status} after {report.iterations} iterations")
    print(f"clearing price: {report.clearing_price:.6f}")
    print(f"commitment check: {report.check_result}")
    if report.detection is not None:
        d = report.detection
        print(f"detection: triggered={d.triggered} "
              f"t_m={sorted(d.t_m_list)} t_f={sorted(d.t_f_list)}")
    print(f"{'phase':<17}{'entity':<8}{'seconds':>10}"
          f"{'traffic_kb':>12}{'storage_kb':>12}")
    for phase, entity, sec, tkb, skb in _report_rows(report):
        print(f"{phase:<17}{entity:<8}{sec:>10.4f}{tkb:>12.6f}{skb:>12.6f}")


def _report_rows(report):
    for phase in PHASES:
        sec = report.timings.get(phase, 0.0)
        for entity in ("TA", "TO"):
            yield (phase, entity, sec, report.traffic_kb[phase][entity],
                   report.storage_kb[phase][entity])


def _write_report_csv(report, path):
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["phase", "entity", "seconds", "traffic_kb",
                         "storage_kb"])
        writer.writerows(_report_rows(report))


def cmd_run(args):
    report = harness.run_scenario(build_config(args))
    _print_report(report)
    if args.out:
        _write_report_csv(report, args.out)
        print(f"wrote {args.out}")
    return 0


def cmd_sweep(args):
    config = build_config(args)
    values = [int(v) for v in args.values.split(",")]
    rows = harness.sweep(config, args.axis, values, repeats=args.repeats)
    harness.write_sweep_csv(rows, args.out)
    print(f"wrote {len(rows)} rows to {args.out}")
    return 0


def cmd_detect(args):
    config = build_config(args)
    summary = harness.detection_experiment(
        config, n_targets=args.targets, n_runs=args.runs)
    print(f"runs: {summary.runs}, targets per run: {summary.targets_per_run}")
    print(f"true positives: {summary.true_positives}")
    print(f"false negatives: {summary.false_negatives}")
    print(f"false positives: {summary.false_positives}")
    print(f"wrong list: {summary.wrong_list}")
    print(f"t_m flags: {summary.t_m_total}, t_f flags: {summary.t_f_total}")
    print(f"accuracy: {summary.accuracy:.4f}")
    return 0 if summary.false_negatives == 0 else 1


def cmd_compare(args):
    report = harness.compare_baseline(build_config(args))
    print(f"{'mode':<8}{'ta_traffic_kb':>15}{'to_traffic_kb':>15}"
          f"{'to_storage_kb':>15}{'clearing_price':>16}")
    for row in report.rows():
        print(f"{row['mode']:<8}{row['ta_traffic_kb']:>15.6f}"
              f"{row['to_traffic_kb']:>15.6f}{row['to_storage_kb']:>15.6f}"
              f"{row['clearing_price']:>16.6f}")
    print(f"prices equal: {report.prices_equal}")
    return 0 if report.prices_equal else 1


def cmd_keygen(args):
    rng = __import__("random").Random(f"{args.seed}/keygen")
    mode = "faithful" if args.faithful_keygen else "fast"
    ck = numtheory.generate_group_params(args.bits_p, args.bits_b, rng,
                                         mode=mode, rounds=args.mr_rounds)
    text = ck.serialize()
    if args.out:
        with open(args.out, "w") as fh:
            fh.write(text)
        print(f"wrote {args.out}")
    else:
        print(text, end="")
    return 0


def build_parser():
    parser = argparse.ArgumentParser(
        prog="gridshare",
        description="Privacy-preserving energy trading simulator")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("run", help="execute one full trading slot")
    _add_scenario_args(p)
    p.add_argument("--out", help="write the per-phase table as CSV")
    p.set_defaults(func=cmd_run)

    p = sub.add_parser("sweep", help="scale one axis and record metrics")
    _add_scenario_args(p)
    p.add_argument("--axis", required=True,
                   choices=["n_tas", "bits_q", "bits_p"])
    p.add_argument("--values", required=True,
                   help="comma-separated axis values")
    p.add_argument("--repeats", type=int, default=5,
                   help="timing repeats per value (median reported)")
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_sweep)

    p = sub.add_parser("detect", help="run the detection-accuracy experiment")
    _add_scenario_args(p)
    p.add_argument("--runs", type=int, default=500)
    p.add_argument("--targets", type=int, default=15)
    p.set_defaults(func=cmd_detect)

    p = sub.add_parser("compare",
                       help="secure vs plain baseline on identical seeds")
    _add_scenario_args(p)
    p.set_defaults(func=cmd_compare)

    p = sub.add_parser("keygen", help="generate and print a commitment key")
    p.add_argument("--bits-p", type=int, default=20)
    p.add_argument("--bits-b", type=int, default=1000)
    p.add_argument("--seed", type=int, default=2)
    p.add_argument("--mr-rounds", type=int,
                   default=numtheory.DEFAULT_MR_ROUNDS)
    p.add_argument("--faithful-keygen", action="store_true")
    p.add_argument("--out")
    p.set_defaults(func=cmd_keygen)
    return parser


def main(argv=None):
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except GridShareError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
