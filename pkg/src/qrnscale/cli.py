"""
Command-line interface.

    qrnscale evaluate --n-links 22 --d 6.24
    qrnscale optimize --set noise.p2=1 --set noise.eta=1
    qrnscale sweep --config experiments/qos_floors.yaml --out out/qos_floors.csv --threads 4
    qrnscale oracle-check --config experiments/oracle_small.yaml

Exit codes: 0 success, 1 invalid spec, 2 no feasible solution, 3 I/O failure,
4 oracle disagreement.
"""

from __future__ import annotations

import argparse
import itertools
import json
import logging
import sys
from pathlib import Path

import yaml

from .chain import ChainDecision
from .experiments import (SpecError, apply_overrides, records_to_csv, run_experiment, to_json_document,
                          write_outputs, ExperimentSpec)
from .oracle import analytic_rate, mc_rate, naive_grid_optimum
from .search import derive_bounds, exhaustive_search

EXIT_OK, EXIT_SPEC, EXIT_INFEASIBLE, EXIT_IO, EXIT_ORACLE = 0, 1, 2, 3, 4

log = logging.getLogger("qrnscale")


def _parse_set(items: list[str]) -> dict:
    out = {}
    for item in items:
        key, sep, value = item.partition("=")
        if not sep or not key:
            raise SpecError(f"--set expects KEY=VALUE, got {item!r}")
        out[key.strip()] = yaml.safe_load(value)
    return out


def _raw_spec(args: argparse.Namespace, scenario: str | None) -> dict:
    raw: dict = {}
    if args.config:
        try:
            raw = yaml.safe_load(Path(args.config).read_text()) or {}
        except OSError as exc:
            raise SpecError(f"cannot read config {args.config}: {exc}") from None
        except yaml.YAMLError as exc:
            raise SpecError(f"{args.config}: {exc}") from None
    if scenario is not None:
        raw["scenario"] = scenario
    overrides = _parse_set(args.set)
    if args.seed is not None:
        overrides["seed"] = args.seed
    if args.format is not None:
        overrides["format"] = args.format
    return apply_overrides(raw, overrides)


def _emit(spec: ExperimentSpec, records, summary, out: str | None) -> None:
    target = out or spec.output
    if target:
        for p in write_outputs(records, summary, target, spec.format, spec):
            log.info("wrote %s", p)
    elif spec.format == "json":
        sys.stdout.write(json.dumps(to_json_document(records, summary, spec), indent=2) + "\n")
    else:
        sys.stdout.write(records_to_csv(records))


def cmd_run(args: argparse.Namespace) -> int:
    scenario = {"evaluate": "evaluate", "optimize": "optimize"}.get(args.cmd)
    raw = _raw_spec(args, scenario)
    if args.cmd == "evaluate":
        dec = raw.setdefault("decision", {})
        for key in ("n_links", "d", "n_link_distill", "n_e2e_distill"):
            v = getattr(args, key, None)
            if v is not None:
                dec[key] = v
    if args.cmd == "optimize" and args.method:
        raw["method"] = args.method
    if args.cmd == "sweep" and "scenario" not in raw:
        raise SpecError("sweep needs a config with a 'scenario'")
    spec = ExperimentSpec.from_dict(raw)
    records, summary = run_experiment(spec, threads=args.threads)
    _emit(spec, records, summary, args.out)
    if args.cmd in ("evaluate", "optimize") and not any(r["feasible"] for r in records):
        return EXIT_INFEASIBLE
    return EXIT_OK


def cmd_oracle(args: argparse.Namespace) -> int:
    raw = _raw_spec(args, None)
    raw.setdefault("scenario", "optimize")
    spec = ExperimentSpec.from_dict(raw)
    bounds_over = {k: v for k, v in spec.bounds.items() if k != "n_hard_cap"}
    for k in ("n_max", "n_link_distill_max", "n_e2e_distill_max"):
        bounds_over.setdefault(k, {"n_max": 40}.get(k, 4))
        bounds_over[k] = int(bounds_over[k])
    bounds_over.setdefault("d_coarse_step", 0.25)
    ok = True
    b = derive_bounds(spec.link, spec.noise, spec.qos, **bounds_over)
    fast = exhaustive_search(spec.link, spec.noise, spec.qos, b, spec.pins, refine=False)
    slow = naive_grid_optimum(spec.link, spec.noise, spec.qos, b, spec.pins)
    same = fast.found == slow.found and fast.decision == slow.decision and fast.objective_km == slow.objective_km
    ok &= same
    print(f"{'PASS' if same else 'FAIL'} grid: pruned={fast.decision} naive={slow.decision} "
          f"({fast.evaluations_used} vs {slow.evaluations_used} evaluations)")

    # sample at one attenuation length: at the optimum separation successes are too rare to sample
    n_links = fast.decision.n_links if fast.found else 1
    d = spec.link.l0
    for i, (nl, ne) in enumerate(itertools.product(range(3), range(3))):
        dec = ChainDecision(n_links, d, nl, ne)
        try:
            est = mc_rate(dec, spec.link, spec.noise, trials=args.trials, seed=spec.seed + i)
        except ValueError as exc:
            print(f"SKIP mc n_L={nl} n_E={ne}: {exc}")
            continue
        exact = analytic_rate(dec, spec.link, spec.noise)
        good = abs(est.mean_rate - exact) <= 3 * est.std_error or est.mean_rate == exact
        ok &= good
        print(f"{'PASS' if good else 'FAIL'} mc n_L={nl} n_E={ne}: mc={est.mean_rate:.6g} "
              f"+/- {est.std_error:.3g} analytic={exact:.6g}")
    return EXIT_OK if ok else EXIT_ORACLE


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", help="YAML experiment file")
    common.add_argument("--seed", type=int, default=None)
    common.add_argument("--out", help="output file (default: stdout)")
    common.add_argument("--format", choices=("csv", "json"), default=None)
    common.add_argument("--threads", type=int, default=1)
    common.add_argument("--set", action="append", default=[], metavar="KEY=VALUE",
                        help="override a config entry, e.g. qos.f_min=0.7 or grid.r_min=[1,10]")
    common.add_argument("-v", "--verbose", action="store_true")

    p = argparse.ArgumentParser(prog="qrnscale", description="Repeater-chain scalability planner.")
    sub = p.add_subparsers(dest="cmd", required=True)

    ev = sub.add_parser("evaluate", parents=[common], help="evaluate one decision")
    ev.add_argument("--n-links", dest="n_links", type=int)
    ev.add_argument("--d", type=float, help="node separation in km")
    ev.add_argument("--nl", dest="n_link_distill", type=int)
    ev.add_argument("--ne", dest="n_e2e_distill", type=int)
    ev.set_defaults(func=cmd_run)

    op = sub.add_parser("optimize", parents=[common], help="maximise chain length")
    op.add_argument("--method", choices=("exhaustive", "genetic"))
    op.set_defaults(func=cmd_run)

    sw = sub.add_parser("sweep", parents=[common], help="run a sweep scenario from a config")
    sw.set_defaults(func=cmd_run)

    oc = sub.add_parser("oracle-check", parents=[common], help="cross-check optimiser and rate model")
    oc.add_argument("--trials", type=int, default=10_000)
    oc.set_defaults(func=cmd_oracle)
    return p


def main(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        return args.func(args)
    except SpecError as exc:
        print(f"invalid spec: {exc}", file=sys.stderr)
        return EXIT_SPEC
    except OSError as exc:
        print(f"I/O error: {exc}", file=sys.stderr)
        return EXIT_IO
    except ValueError as exc:
        print(f"invalid input: {exc}", file=sys.stderr)
        return EXIT_SPEC


if __name__ == "__main__":
    sys.exit(main())
