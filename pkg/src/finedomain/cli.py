"""Command line interface.

    finedomain run <scenario.cfg | builtin-name> [--stages N] [--resolution H]
                   [--seed S] [--out DIR]
    finedomain certify <report-dir> --bound M [--trials N] [--seed S]
    finedomain export <report-dir> --region x0,y0,x1,y1 --px N [--out PREFIX]
"""

from __future__ import annotations

import argparse
import os
import sys
from dataclasses import replace

from .errors import FineDomainError, InsufficientStages
from .rational import SynthesizedFunction, SynthesisStage
from .report import write_report
from .runner import certify_blowup_mechanics, export_field, load_run, run_scenario
from .scenarios import BUILTIN_NAMES, builtin_scenario, parse_config


def _load_scenario(arg, args):
    if os.path.exists(arg):
        with open(arg) as fh:
            scenario = parse_config(fh.read())
    elif arg in BUILTIN_NAMES:
        scenario = builtin_scenario(arg, args.resolution)
    else:
        raise FineDomainError(f"no such config file or builtin scenario: {arg!r}")
    overrides = {}
    if args.stages is not None:
        overrides["stage_count"] = args.stages
        overrides["synth_stages"] = min(scenario.synth_stages, args.stages)
    if args.seed is not None:
        overrides["seed"] = args.seed
    if args.resolution is not None and os.path.exists(arg):
        overrides["resolution"] = args.resolution
    return replace(scenario, **overrides) if overrides else scenario


def _cmd_run(args) -> int:
    scenario = _load_scenario(args.scenario, args)
    out = args.out or f"runs/{scenario.name}"
    try:
        result = run_scenario(scenario, out_dir=out)
    except FineDomainError as exc:
        # pipeline failure: record what happened, exit nonzero
        os.makedirs(out, exist_ok=True)
        write_report(
            [("run", {"scenario": scenario.name}), ("error", {"message": str(exc)})],
            path=os.path.join(out, "report.txt"),
        )
        print(f"error: {exc}", file=sys.stderr)
        return 2
    print(result.report_text, end="")
    print(f"artifacts written to {out}")
    return 0 if result.verdict else 1


def _cmd_certify(args) -> int:
    run = load_run(args.report_dir)
    if not run.rationals:
        print("error: run has no synthesized stages to certify", file=sys.stderr)
        return 2
    stages = tuple(
        SynthesisStage(n=k + 1, fn=R, low=2.0 ** -(k + 1), high=0.0, certificate=None)
        for k, R in enumerate(run.rationals)
    )
    f = SynthesizedFunction(stages)
    # stage data (K_n, F_n, pieces); the F masks rebuild from the scenario echo
    with open(os.path.join(args.report_dir, "scenario.txt")) as fh:
        echo = fh.read()
    domain = None
    try:
        scenario = parse_config(echo)
        domain = scenario.build_domain()
    except FineDomainError:
        pass
    stage_data = []
    for n, K in enumerate(run.compacts, start=1):
        F = domain.complement_at(n) if domain is not None else None
        pieces = run.pieces_by_stage[n - 1] if n - 1 < len(run.pieces_by_stage) else ()
        stage_data.append((K, F, pieces))
    try:
        record = certify_blowup_mechanics(
            f, stage_data, args.bound, trials=args.trials, seed=args.seed
        )
    except InsufficientStages as exc:
        write_report(
            [("blowup", {"M": args.bound, "insufficient_stages": str(exc)})],
            path=os.path.join(args.report_dir, "certify.report.txt"),
        )
        print(f"insufficient stages: {exc}")
        return 0
    path = os.path.join(args.report_dir, "certify.report.txt")
    write_report([("blowup", record)], path=path)
    print(f"hit rate {record['hit_rate_percent']:.2f}% "
          f"({record['hits']}/{record['qualifying']}), report at {path}")
    return 0 if record["pass"] else 1


def _cmd_export(args) -> int:
    run = load_run(args.report_dir)
    if not run.rationals:
        print("error: run has no synthesized stages to export", file=sys.stderr)
        return 2
    stages = tuple(
        SynthesisStage(n=k + 1, fn=R, low=2.0 ** -(k + 1), high=0.0, certificate=None)
        for k, R in enumerate(run.rationals)
    )
    f = SynthesizedFunction(stages)
    region = tuple(float(v) for v in args.region.split(","))
    if len(region) != 4:
        print("error: --region needs x0,y0,x1,y1", file=sys.stderr)
        return 2
    out_prefix = args.out or os.path.join(args.report_dir, "field")
    try:
        paths = export_field(f, region, args.px, out_prefix)
    except FineDomainError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    for p in paths:
        print(f"wrote {p} ({os.path.getsize(p)} bytes)")
    return 0


def main(argv=None) -> int:
    ap = argparse.ArgumentParser(prog="finedomain", description=__doc__)
    sub = ap.add_subparsers(dest="command", required=True)
    p_run = sub.add_parser("run", help="run a scenario pipeline")
    p_run.add_argument("scenario", help="config file path or builtin name")
    p_run.add_argument("--stages", type=int, default=None)
    p_run.add_argument("--resolution", type=float, default=None)
    p_run.add_argument("--seed", type=int, default=None)
    p_run.add_argument("--out", default=None)
    p_run.set_defaults(func=_cmd_run)
    p_cert = sub.add_parser("certify", help="blow-up mechanics Monte Carlo")
    p_cert.add_argument("report_dir")
    p_cert.add_argument("--bound", type=float, required=True)
    p_cert.add_argument("--trials", type=int, default=1000)
    p_cert.add_argument("--seed", type=int, default=0)
    p_cert.set_defaults(func=_cmd_certify)
    p_exp = sub.add_parser("export", help="heatmap and CSV field export")
    p_exp.add_argument("report_dir")
    p_exp.add_argument("--region", required=True)
    p_exp.add_argument("--px", type=int, default=512)
    p_exp.add_argument("--out", default=None)
    p_exp.set_defaults(func=_cmd_export)
    args = ap.parse_args(argv)
    try:
        return args.func(args)
    except FineDomainError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    raise SystemExit(main())
