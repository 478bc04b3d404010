"""
Experiment harness: parameter sweeps over the planner, written as CSV or JSON.

An experiment is described by a YAML mapping (see ``experiments/`` in the
repository). Every grid point produces exactly one record, infeasible ones
included, and records are emitted in grid order so reruns are byte-identical.
"""

from __future__ import annotations

import csv
import dataclasses
import io
import itertools
import json
import logging
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any

import yaml

from .chain import ChainDecision, LinkConfig, QosRequirement, evaluate
from .genetic import GaConfig, ga_search
from .model import NoiseParams
from .search import Pins, QosUnachievable, derive_bounds, exhaustive_search

log = logging.getLogger(__name__)

SCHEMA_VERSION = "1.0"

SCENARIOS = (
    "evaluate",
    "optimize",
    "sweep_qos",
    "sweep_d_vs_rmin_r0",
    "sweep_no_link_distill",
    "sweep_no_e2e_distill",
    "sweep_noise",
    "ga_convergence",
)

SCENARIO_PINS = {
    "sweep_no_link_distill": {"n_link_distill": 0},
    "sweep_no_e2e_distill": {"n_e2e_distill": 0},
}

# swept symbol -> config section it overrides
GRID_KEYS = {
    "f0": "link", "r0": "link", "l0": "link",
    "p2": "noise", "eta": "noise",
    "r_min": "qos", "f_min": "qos",
    "n_links": "decision", "d": "decision", "n_link_distill": "decision", "n_e2e_distill": "decision",
    "seed": "seed",
}

COLUMNS = (
    "scenario", "point", "f0", "r0", "l0", "p2", "eta", "r_min", "f_min", "seed", "method",
    "feasible", "objective_km", "n_links", "d", "n_link_distill", "n_e2e_distill",
    "e2e_fidelity", "e2e_rate", "link_fidelity", "link_rate", "reason", "evaluations",
)
_INT_COLUMNS = {"point", "seed", "n_links", "n_link_distill", "n_e2e_distill", "evaluations"}
_STR_COLUMNS = {"scenario", "method", "reason"}
_BOOL_COLUMNS = {"feasible"}


class SpecError(ValueError):
    """Experiment description is malformed."""


def _as_float_map(section: str, raw: Any, allowed: set[str]) -> dict[str, float]:
    if raw is None:
        return {}
    if not isinstance(raw, dict):
        raise SpecError(f"'{section}' must be a mapping")
    unknown = set(raw) - allowed
    if unknown:
        raise SpecError(f"unknown key(s) in '{section}': {sorted(unknown)}")
    try:
        return {k: float(v) for k, v in raw.items()}
    except (TypeError, ValueError) as exc:
        raise SpecError(f"non-numeric value in '{section}': {exc}") from None


@dataclass(frozen=True)
class ExperimentSpec:
    scenario: str
    link: LinkConfig = LinkConfig()
    noise: NoiseParams = NoiseParams()
    qos: QosRequirement = QosRequirement()
    bounds: dict[str, float] = field(default_factory=dict)
    ga: GaConfig = GaConfig()
    pins: Pins = Pins()
    decision: dict[str, float] = field(default_factory=dict)
    grid: dict[str, list] = field(default_factory=dict)
    method: str = "exhaustive"
    seed: int = 0
    output: str | None = None
    format: str = "csv"
    name: str = ""

    @classmethod
    def from_dict(cls, raw: dict) -> "ExperimentSpec":
        if not isinstance(raw, dict):
            raise SpecError("experiment spec must be a mapping")
        known = {f.name for f in dataclasses.fields(cls)}
        unknown = set(raw) - known
        if unknown:
            raise SpecError(f"unknown top-level key(s): {sorted(unknown)}")
        scenario = raw.get("scenario")
        if scenario not in SCENARIOS:
            raise SpecError(f"scenario must be one of {SCENARIOS}, got {scenario!r}")
        try:
            link = LinkConfig(**_as_float_map("link", raw.get("link"), {"f0", "r0", "l0", "d"}))
            noise = NoiseParams(**_as_float_map("noise", raw.get("noise"), {"p2", "eta"}))
            qos = QosRequirement(**_as_float_map("qos", raw.get("qos"), {"r_min", "f_min"}))
            ga_raw = raw.get("ga") or {}
            ga_fields = {f.name: f.type for f in dataclasses.fields(GaConfig)}
            bad = set(ga_raw) - set(ga_fields)
            if bad:
                raise SpecError(f"unknown key(s) in 'ga': {sorted(bad)}")
            ga = GaConfig(**{k: (float(v) if ga_fields[k] == "float" else int(v)) for k, v in ga_raw.items()})
            pins_raw = dict(raw.get("pins") or {})
            pins_raw.update(SCENARIO_PINS.get(scenario, {}))
            pins = Pins.from_mapping({k: (float(v) if k == "d" else int(v)) for k, v in pins_raw.items()})
            bounds = _as_float_map("bounds", raw.get("bounds"), {
                "n_max", "d_min", "d_max", "d_coarse_step", "d_refine_step",
                "n_link_distill_max", "n_e2e_distill_max", "n_hard_cap"})
            decision = _as_float_map("decision", raw.get("decision"),
                                     {"n_links", "d", "n_link_distill", "n_e2e_distill"})
        except SpecError:
            raise
        except (TypeError, ValueError) as exc:
            raise SpecError(str(exc)) from None

        grid = raw.get("grid") or {}
        if not isinstance(grid, dict):
            raise SpecError("'grid' must be a mapping of parameter -> list of values")
        for k, v in grid.items():
            if k not in GRID_KEYS:
                raise SpecError(f"cannot sweep unknown parameter {k!r}")
            if not isinstance(v, list) or not v:
                raise SpecError(f"grid for {k!r} must be a non-empty list")
        method = raw.get("method", "genetic" if scenario == "ga_convergence" else "exhaustive")
        if method not in ("exhaustive", "genetic"):
            raise SpecError(f"method must be 'exhaustive' or 'genetic', got {method!r}")
        fmt = raw.get("format", "csv")
        if fmt not in ("csv", "json"):
            raise SpecError(f"format must be 'csv' or 'json', got {fmt!r}")
        if scenario == "evaluate" and not {"n_links", "d"} <= set(decision) | set(grid):
            raise SpecError("evaluate needs decision.n_links and decision.d")
        return cls(scenario=scenario, link=link, noise=noise, qos=qos, bounds=bounds, ga=ga, pins=pins,
                   decision=decision, grid={k: list(v) for k, v in grid.items()}, method=method,
                   seed=int(raw.get("seed", 0)), output=raw.get("output"), format=fmt,
                   name=str(raw.get("name", "")))

    def to_dict(self) -> dict:
        d = {
            "scenario": self.scenario,
            "name": self.name,
            "link": dataclasses.asdict(self.link),
            "noise": dataclasses.asdict(self.noise),
            "qos": dataclasses.asdict(self.qos),
            "bounds": dict(self.bounds),
            "ga": dataclasses.asdict(self.ga),
            "pins": {k: v for k, v in dataclasses.asdict(self.pins).items() if v is not None},
            "decision": dict(self.decision),
            "grid": {k: list(v) for k, v in self.grid.items()},
            "method": self.method,
            "seed": self.seed,
            "format": self.format,
        }
        if self.output is not None:
            d["output"] = self.output
        return d


def load_spec(path: str | Path, overrides: dict | None = None) -> ExperimentSpec:
    try:
        raw = yaml.safe_load(Path(path).read_text())
    except yaml.YAMLError as exc:
        raise SpecError(f"{path}: {exc}") from None
    return ExperimentSpec.from_dict(apply_overrides(raw or {}, overrides or {}))


def apply_overrides(raw: dict, overrides: dict[str, Any]) -> dict:
    """Set dotted keys (``qos.f_min``, ``grid.r_min``) on a copy of ``raw``."""
    out = json.loads(json.dumps(raw))
    for key, value in overrides.items():
        node = out
        *parents, leaf = key.split(".")
        for p in parents:
            node = node.setdefault(p, {})
            if not isinstance(node, dict):
                raise SpecError(f"cannot set {key!r}: {p!r} is not a mapping")
        node[leaf] = value
    return out


def grid_points(spec: ExperimentSpec) -> list[dict[str, Any]]:
    keys = list(spec.grid)
    return [dict(zip(keys, combo)) for combo in itertools.product(*(spec.grid[k] for k in keys))]


@dataclass(frozen=True)
class _Point:
    index: int
    link: LinkConfig
    noise: NoiseParams
    qos: QosRequirement
    decision: dict
    seed: int


def _resolve(spec: ExperimentSpec, index: int, values: dict) -> _Point:
    sections = {
        "link": dataclasses.asdict(spec.link),
        "noise": dataclasses.asdict(spec.noise),
        "qos": dataclasses.asdict(spec.qos),
        "decision": dict(spec.decision),
    }
    seed = spec.seed
    for k, v in values.items():
        where = GRID_KEYS[k]
        if where == "seed":
            seed = int(v)
        else:
            sections[where][k] = float(v)
    try:
        return _Point(index, LinkConfig(**sections["link"]), NoiseParams(**sections["noise"]),
                      QosRequirement(**sections["qos"]), sections["decision"], seed)
    except ValueError as exc:
        raise SpecError(f"grid point {index} ({values}): {exc}") from None


def _base_record(spec: ExperimentSpec, pt: _Point, method: str) -> dict:
    return {
        "scenario": spec.scenario, "point": pt.index,
        "f0": pt.link.f0, "r0": pt.link.r0, "l0": pt.link.l0,
        "p2": pt.noise.p2, "eta": pt.noise.eta,
        "r_min": pt.qos.r_min, "f_min": pt.qos.f_min,
        "seed": pt.seed, "method": method,
        "feasible": False, "objective_km": None, "n_links": None, "d": None,
        "n_link_distill": None, "n_e2e_distill": None, "e2e_fidelity": None, "e2e_rate": None,
        "link_fidelity": None, "link_rate": None, "reason": None, "evaluations": 0,
    }


def _fill(rec: dict, result) -> dict:
    dec = result.decision
    rec.update(
        feasible=result.feasible, objective_km=dec.objective, n_links=dec.n_links, d=dec.d,
        n_link_distill=dec.n_link_distill, n_e2e_distill=dec.n_e2e_distill,
        e2e_fidelity=result.e2e_fidelity, e2e_rate=result.e2e_rate,
        link_fidelity=result.link_fidelity, link_rate=result.link_rate, reason=result.reason.value,
    )
    return rec


def _run_point(spec: ExperimentSpec, pt: _Point) -> tuple[dict, dict]:
    """One record plus per-point extras for the summary."""
    if spec.scenario == "evaluate":
        d = pt.decision
        try:
            dec = ChainDecision(int(d["n_links"]), float(d["d"]), int(d.get("n_link_distill", 0)),
                                int(d.get("n_e2e_distill", 0)))
        except ValueError as exc:
            raise SpecError(f"grid point {pt.index}: {exc}") from None
        rec = _base_record(spec, pt, "evaluate")
        rec["evaluations"] = 1
        return _fill(rec, evaluate(dec, pt.link, pt.noise, pt.qos)), {}

    method = spec.method
    rec = _base_record(spec, pt, method)
    overrides = {k: v for k, v in spec.bounds.items() if k != "n_hard_cap"}
    for k in ("n_max", "n_link_distill_max", "n_e2e_distill_max"):
        if k in overrides:
            overrides[k] = int(overrides[k])
    hard_cap = int(spec.bounds.get("n_hard_cap", 500))
    try:
        bounds = derive_bounds(pt.link, pt.noise, pt.qos, n_hard_cap=hard_cap, **overrides)
    except QosUnachievable:
        rec["reason"] = "qos_rate_unachievable"
        return rec, {}
    except ValueError as exc:
        raise SpecError(f"grid point {pt.index}: {exc}") from None

    if method == "genetic":
        ga = dataclasses.replace(spec.ga, seed=pt.seed)
        sol = ga_search(pt.link, pt.noise, pt.qos, bounds, ga, spec.pins)
    else:
        sol = exhaustive_search(pt.link, pt.noise, pt.qos, bounds, spec.pins)
    rec["evaluations"] = sol.evaluations_used
    extra: dict = {}
    if sol.history:
        extra["history"] = list(sol.history)
    if spec.scenario == "ga_convergence":
        ref = exhaustive_search(pt.link, pt.noise, pt.qos, bounds, spec.pins)
        extra["exhaustive_objective_km"] = ref.objective_km
    if not sol.found:
        rec["reason"] = "no_feasible_solution"
        return rec, extra
    return _fill(rec, sol.result), extra


def run_experiment(spec: ExperimentSpec, threads: int = 1) -> tuple[list[dict], dict]:
    """
    Run every grid point of ``spec`` and return ``(records, summary)``.

    Points may run on ``threads`` worker threads; records are always returned
    in grid order and do not depend on the thread count.
    """
    points = [_resolve(spec, i, v) for i, v in enumerate(grid_points(spec))]
    if spec.scenario in ("evaluate", "optimize") and len(points) > 1:
        log.info("%s scenario with %d grid points", spec.scenario, len(points))
    if threads > 1:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            outputs = list(pool.map(lambda p: _run_point(spec, p), points))
    else:
        outputs = [_run_point(spec, p) for p in points]
    records = [r for r, _ in outputs]
    records.sort(key=lambda r: r["point"])

    feasible = [r for r in records if r["feasible"]]
    summary: dict[str, Any] = {
        "points": len(records),
        "feasible_points": len(feasible),
    }
    if feasible and spec.scenario != "evaluate":
        best = max(feasible, key=lambda r: (r["objective_km"], -r["point"]))
        summary["best_point"] = best["point"]
        summary["best_objective_km"] = best["objective_km"]
    extras = {str(r["point"]): e for r, (_, e) in zip(records, outputs) if e}
    if extras:
        summary["per_point"] = extras
    return records, summary


def _fmt(v: Any) -> str:
    if v is None:
        return ""
    if isinstance(v, bool):
        return "true" if v else "false"
    if isinstance(v, float):
        return repr(v)
    return str(v)


def records_to_csv(records: list[dict]) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(COLUMNS)
    for r in records:
        w.writerow([_fmt(r[c]) for c in COLUMNS])
    return buf.getvalue()


def _parse(col: str, text: str) -> Any:
    if text == "":
        return None
    if col in _BOOL_COLUMNS:
        return text == "true"
    if col in _INT_COLUMNS:
        return int(text)
    if col in _STR_COLUMNS:
        return text
    return float(text)


def read_csv_records(text: str) -> list[dict]:
    rows = list(csv.reader(io.StringIO(text)))
    if not rows or tuple(rows[0]) != COLUMNS:
        raise ValueError("CSV header does not match the record schema")
    return [{c: _parse(c, t) for c, t in zip(COLUMNS, row)} for row in rows[1:]]


def to_json_document(records: list[dict], summary: dict, spec: ExperimentSpec | None) -> dict:
    return {
        "schema_version": SCHEMA_VERSION,
        "spec_echo": spec.to_dict() if spec else None,
        "records": [{c: r[c] for c in COLUMNS} for r in records],
        "summary": summary,
    }


def write_outputs(records: list[dict], summary: dict, path: str | Path, fmt: str = "csv",
                  spec: ExperimentSpec | None = None) -> list[Path]:
    """
    Write records to ``path``. CSV output gets a ``<stem>.summary.json`` sidecar
    holding the summary and spec echo. Returns the paths written.
    """
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    doc = to_json_document(records, summary, spec)
    if fmt == "json":
        path.write_text(json.dumps(doc, indent=2, allow_nan=False) + "\n", encoding="utf-8")
        return [path]
    if fmt != "csv":
        raise ValueError(f"unknown format {fmt!r}")
    path.write_text(records_to_csv(records), encoding="utf-8", newline="")
    side = path.with_name(path.stem + ".summary.json")
    del doc["records"]
    side.write_text(json.dumps(doc, indent=2, allow_nan=False) + "\n", encoding="utf-8")
    return [path, side]
