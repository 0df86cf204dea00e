"""Command line entry point: ``python -m d2dprice {generate,run,sweep,verify}``.

Configuration files are YAML (JSON also parses) with optional top-level
sections ``network`` (GenParams fields), ``dsera`` (DseraConfig fields, with a
nested ``pricing`` mapping) and ``experiment`` (ExperimentSpec fields).
"""
from __future__ import annotations

import argparse
import json
import logging
import sys
from pathlib import Path

import yaml

from .baselines import ALGORITHMS, get_algorithm
from .dsera import DseraConfig, save_outcome
from .harness import ExperimentSpec, run_experiment
from .netgen import GenParams, NetworkInstance, generate


def _load_config(path) -> dict:
    if not path:
        return {}
    data = yaml.safe_load(Path(path).read_text()) or {}
    if not isinstance(data, dict):
        raise SystemExit(f"config {path} must be a mapping")
    return data


def _gen_params(cfg: dict, args) -> GenParams:
    params = GenParams.from_dict(cfg.get("network", {}))
    changes = {}
    if getattr(args, "n_cues", None) is not None:
        changes["n_cues"] = args.n_cues
    if getattr(args, "m_d2d", None) is not None:
        changes["m_d2d"] = args.m_d2d
    if getattr(args, "seed", None) is not None:
        changes["rng_seed"] = args.seed
    return params.replace(**changes) if changes else params


def cmd_generate(args) -> int:
    cfg = _load_config(args.config)
    base = _gen_params(cfg, args)
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    for k in range(args.count):
        inst = generate(base.replace(rng_seed=base.rng_seed + k))
        path = out / f"instance_N{inst.n}_M{inst.m}_seed{base.rng_seed + k}.json"
        inst.save(path)
        print(path)
    return 0


def cmd_run(args) -> int:
    cfg = _load_config(args.config)
    if args.instance:
        inst = NetworkInstance.load(args.instance)
    else:
        inst = generate(_gen_params(cfg, args))
    dcfg = DseraConfig.from_dict(cfg.get("dsera", {}))
    if args.trace:
        dcfg = DseraConfig.from_dict({**dcfg.to_dict(), "trace": True})
    outcome = get_algorithm(args.algorithm)(inst, dcfg)
    summary = outcome.summary()
    print(json.dumps(summary, indent=2, sort_keys=True))
    if args.out:
        out = Path(args.out)
        out.mkdir(parents=True, exist_ok=True)
        save_outcome(outcome, out / f"{args.algorithm}_outcome.json")
        outcome.write_trace_csv(out / f"{args.algorithm}_trace.csv")
    return 0


def cmd_sweep(args) -> int:
    spec = ExperimentSpec.load(args.config) if args.config else ExperimentSpec()
    changes = spec.to_dict()
    changes["network"], changes["dsera"] = spec.network, spec.dsera
    if args.out:
        changes["out_dir"] = args.out
    if args.seed is not None:
        changes["base_seed"] = args.seed
    if args.drops is not None:
        changes["drops"] = args.drops
    if args.workers is not None:
        changes["workers"] = args.workers
    spec = ExperimentSpec(**changes)

    def progress(done, total):
        if done % max(1, total // 20) == 0 or done == total:
            print(f"  {done}/{total} drops", file=sys.stderr)

    report = run_experiment(spec, progress=progress)
    print(f"{'axis':>6} {'algorithm':>10} {'n':>4} {'sum_rate':>10} {'avg_rate':>9} {'admit':>6}")
    for row in report.summary():
        print(f"{row['axis']:>6} {row['algorithm']:>10} {row['n']:>4} "
              f"{row['sum_rate_mean']:>10.2f} {row['average_rate_mean']:>9.3f} "
              f"{row['admission_ratio_mean']:>6.3f}")
    print(f"CSV written to {spec.out_dir}")
    return 0


def cmd_verify(args) -> int:
    from .acceptance import run_all

    only = {int(x) for x in args.only.split(",")} if args.only else None
    lines = []

    def report(line):
        print(line, flush=True)
        lines.append(line)

    results = run_all(quick=args.quick, only=only, report=report)
    failed = [r for r in results if not r.passed]
    report(f"{len(results) - len(failed)}/{len(results)} checks passed")
    if args.out:
        out = Path(args.out)
        out.mkdir(parents=True, exist_ok=True)
        (out / "verify.txt").write_text("\n".join(lines) + "\n")
    return 1 if failed else 0


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="d2dprice", description=__doc__.splitlines()[0])
    p.add_argument("-v", "--verbose", action="store_true")
    sub = p.add_subparsers(dest="command", required=True)

    g = sub.add_parser("generate", help="write network instance fixtures as JSON")
    g.add_argument("--config")
    g.add_argument("--seed", type=int)
    g.add_argument("--n-cues", type=int)
    g.add_argument("--m-d2d", type=int)
    g.add_argument("--count", type=int, default=1)
    g.add_argument("--out", default="instances")
    g.set_defaults(func=cmd_generate)

    r = sub.add_parser("run", help="run one algorithm on one instance")
    r.add_argument("--algorithm", choices=ALGORITHMS, default="dsera")
    r.add_argument("--instance", help="instance JSON; generated from --config/--seed if absent")
    r.add_argument("--config")
    r.add_argument("--seed", type=int)
    r.add_argument("--n-cues", type=int)
    r.add_argument("--m-d2d", type=int)
    r.add_argument("--trace", action="store_true", help="record a per-outer-iteration trace")
    r.add_argument("--out")
    r.set_defaults(func=cmd_run)

    s = sub.add_parser("sweep", help="run a Monte-Carlo experiment and write CSVs")
    s.add_argument("--config", help="YAML with an 'experiment' section")
    s.add_argument("--seed", type=int, help="base seed")
    s.add_argument("--drops", type=int)
    s.add_argument("--workers", type=int)
    s.add_argument("--out")
    s.set_defaults(func=cmd_sweep)

    v = sub.add_parser("verify", help="run the acceptance checks; exit 1 if any fails")
    v.add_argument("--quick", action="store_true", help="reduced sizes for a smoke run")
    v.add_argument("--only", help="comma-separated check numbers, e.g. 1,2,10")
    v.add_argument("--out")
    v.set_defaults(func=cmd_verify)
    return p


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    return args.func(args)


if __name__ == "__main__":
    sys.exit(main())
