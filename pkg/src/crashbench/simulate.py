"""Seeded synthetic corpora with known rates, for statistical oracles.

A scenario describes a grid of cells in one location, each with a human crash
rate and human / ADS miles.  Human and ADS crash counts are Poisson draws:
``human ~ Poisson(rate_c * human_miles_c / 1e6)`` and
``ads ~ Poisson(true_ratio * rate_c * ads_miles_c / 1e6)``.

Scenario YAML::

    seed: 7
    location: Simville
    outcome: AnyInjuryReported
    true_ratio: 0.5
    grid: {level: 12, lat0: 33.40, lon0: -112.10, rows: 3, cols: 4}
    human_rate_ipmm: [1.0, 2.5, ...]   # one per cell, or {mean: 2.0, spread: 0.5}
    human_miles: {total: 2.0e8}        # uniform split, or a list per cell
    ads_miles: {total: 2.0e7, shares: same_as_human}   # or a list per cell

Random numbers come from numpy's PCG64 generator, which is reproducible across
platforms for a given seed.
"""

from __future__ import annotations

import csv
import json
import math
from dataclasses import dataclass
from pathlib import Path
from typing import Any, Mapping, Optional, Sequence

import numpy as np
import yaml

from .benchmark import dynamic_reweight
from .model import (
    Actor,
    BodyClass,
    Configuration,
    CrashRecord,
    EqualAngleGrid,
    Injury,
    Location,
    OutcomeLevel,
    RoadClass,
    Severity,
)
from .stats import compare


class ScenarioError(ValueError):
    pass


@dataclass(frozen=True)
class Cell:
    cell_id: str
    center: tuple[float, float]
    human_rate: float  # IPMM
    human_miles: float
    ads_miles: float


@dataclass(frozen=True)
class Scenario:
    seed: int
    location: str
    outcome: OutcomeLevel
    true_ratio: float
    cells: tuple[Cell, ...]

    @property
    def ads_total(self) -> float:
        return math.fsum(c.ads_miles for c in self.cells)

    @property
    def true_benchmark(self) -> float:
        """Human rate weighted by the ADS mile distribution."""
        t = self.ads_total
        return math.fsum(c.human_rate * c.ads_miles / t for c in self.cells)

    @property
    def true_pooled(self) -> float:
        h = math.fsum(c.human_miles for c in self.cells)
        return math.fsum(c.human_rate * c.human_miles for c in self.cells) / h


def _per_cell(spec: Any, n: int, rng: np.random.Generator, what: str) -> np.ndarray:
    if isinstance(spec, (list, tuple)):
        if len(spec) != n:
            raise ScenarioError(f"{what}: expected {n} values, got {len(spec)}")
        return np.asarray(spec, dtype=float)
    if isinstance(spec, Mapping) and "mean" in spec:
        # lognormal spread around the mean, mean preserved
        s = float(spec.get("spread", 0.0))
        return float(spec["mean"]) * np.exp(rng.normal(-s * s / 2, s, size=n))
    raise ScenarioError(f"{what}: need a list or {{mean, spread}}")


def _miles(spec: Any, n: int, rng: np.random.Generator, what: str, like: Optional[np.ndarray] = None):
    if isinstance(spec, (list, tuple)):
        if len(spec) != n:
            raise ScenarioError(f"{what}: expected {n} values, got {len(spec)}")
        return np.asarray(spec, dtype=float)
    if not isinstance(spec, Mapping) or "total" not in spec:
        raise ScenarioError(f"{what}: need a list or {{total, shares}}")
    total = float(spec["total"])
    shares = spec.get("shares", "uniform")
    if shares == "uniform":
        w = np.full(n, 1.0 / n)
    elif shares == "same_as_human":
        if like is None:
            raise ScenarioError(f"{what}: same_as_human only applies to ADS miles")
        w = like / like.sum()
    elif shares == "dirichlet":
        w = rng.dirichlet(np.ones(n))
    elif isinstance(shares, (list, tuple)) and len(shares) == n:
        w = np.asarray(shares, dtype=float)
        w = w / w.sum()
    else:
        raise ScenarioError(f"{what}: unknown shares {shares!r}")
    return total * w


def scenario_from_dict(data: Mapping, seed: Optional[int] = None) -> Scenario:
    unknown = set(data) - {"seed", "location", "outcome", "true_ratio", "grid",
                           "human_rate_ipmm", "human_miles", "ads_miles"}
    if unknown:
        raise ScenarioError(f"unknown scenario keys {sorted(unknown)}")
    seed = int(data.get("seed", 0) if seed is None else seed)
    rng = np.random.default_rng(seed)
    g = data.get("grid") or {}
    level, rows, cols = int(g.get("level", 12)), int(g.get("rows", 2)), int(g.get("cols", 2))
    grid = EqualAngleGrid(level)
    lat0, lon0 = float(g.get("lat0", 0.0)), float(g.get("lon0", 0.0))
    r0, c0 = grid.index(lat0, lon0)
    ids = [f"L{level}/{r0 + i}/{c0 + j}" for i in range(rows) for j in range(cols)]
    n = len(ids)
    rates = _per_cell(data.get("human_rate_ipmm", {"mean": 1.0}), n, rng, "human_rate_ipmm")
    hmiles = _miles(data.get("human_miles", {"total": 1e8}), n, rng, "human_miles")
    amiles = _miles(data.get("ads_miles", {"total": 1e7}), n, rng, "ads_miles", like=hmiles)
    ratio = float(data.get("true_ratio", 1.0))
    if not ratio > 0 or (rates <= 0).any() or (hmiles <= 0).any() or (amiles < 0).any() \
            or not amiles.sum() > 0:
        raise ScenarioError("rates, ratio and human miles must be > 0; ADS miles >= 0 with a positive total")
    cells = tuple(Cell(i, grid.center(i), float(r), float(h), float(a))
                  for i, r, h, a in zip(ids, rates, hmiles, amiles))
    return Scenario(seed, str(data.get("location", "Simville")),
                    OutcomeLevel(data.get("outcome", OutcomeLevel.AnyInjuryReported.value)), ratio, cells)


def load_scenario(path: str | Path, seed: Optional[int] = None) -> Scenario:
    with open(path, encoding="utf-8") as fh:
        return scenario_from_dict(yaml.safe_load(fh) or {}, seed)


@dataclass(frozen=True)
class Draw:
    human_counts: tuple[int, ...]
    ads_counts: tuple[int, ...]


def draw(scenario: Scenario, rng: Optional[np.random.Generator] = None) -> Draw:
    rng = rng if rng is not None else np.random.default_rng(scenario.seed)
    rates = np.array([c.human_rate for c in scenario.cells])
    hm = np.array([c.human_miles for c in scenario.cells])
    am = np.array([c.ads_miles for c in scenario.cells])
    human = rng.poisson(rates * hm / 1e6)
    ads = rng.poisson(scenario.true_ratio * rates * am / 1e6)
    return Draw(tuple(int(x) for x in human), tuple(int(x) for x in ads))


def _severity(outcome: OutcomeLevel) -> Severity:
    if outcome is OutcomeLevel.AirbagDeployment:
        return Severity(Injury.NONE, True, True, None)
    if outcome is OutcomeLevel.SuspectedSeriousInjuryPlus:
        return Severity(Injury.A, False, True, True)
    return Severity(Injury.C, False, True, False)


def records_for(scenario: Scenario, counts: Sequence[int], prefix: str) -> list[CrashRecord]:
    sev = _severity(scenario.outcome)
    out = []
    k = 0
    for cell, n in zip(scenario.cells, counts):
        for _ in range(n):
            k += 1
            out.append(CrashRecord(
                crash_id=f"{prefix}-{k:06d}",
                subject=Actor(BodyClass.PassengerVehicle, 1, True),
                location=Location(scenario.location),
                partner=Actor(BodyClass.PassengerVehicle, 2, True),
                coordinates=cell.center,
                road_class=RoadClass.SurfaceStreet,
                configuration=Configuration.IntersectionTurningOrCrossing,
                severity=sev,
            ))
    return out


def truth(scenario: Scenario, d: Draw) -> dict:
    return {
        "seed": scenario.seed,
        "location": scenario.location,
        "outcome": scenario.outcome.value,
        "true_ratio": scenario.true_ratio,
        "true_benchmark_ipmm": scenario.true_benchmark,
        "true_pooled_ipmm": scenario.true_pooled,
        "true_ads_ipmm": scenario.true_ratio * scenario.true_benchmark,
        "ads_miles": scenario.ads_total,
        "human_crashes": sum(d.human_counts),
        "ads_crashes": sum(d.ads_counts),
        "cells": [
            {"cell_id": c.cell_id, "human_rate_ipmm": c.human_rate, "human_miles": c.human_miles,
             "ads_miles": c.ads_miles, "human_crashes": h, "ads_crashes": a}
            for c, h, a in zip(scenario.cells, d.human_counts, d.ads_counts)
        ],
    }


def write_outputs(scenario: Scenario, out: str | Path) -> dict[str, Path]:
    """Sample once and write a runnable corpus plus ``truth.json`` and ``pipeline.yaml``."""
    from .benchmark import CellMiles, write_cell_miles
    from .ingest import write_canonical

    out = Path(out)
    out.mkdir(parents=True, exist_ok=True)
    d = draw(scenario)
    paths = {
        "human": out / "human_crashes.csv",
        "ads": out / "ads_crashes.csv",
        "exposure": out / "human_exposure.csv",
        "cells": out / "cell_miles.csv",
        "ads_miles": out / "ads_miles.csv",
        "truth": out / "truth.json",
        "pipeline": out / "pipeline.yaml",
    }
    write_canonical(paths["human"], records_for(scenario, d.human_counts, "HUM"))
    write_canonical(paths["ads"], records_for(scenario, d.ads_counts, "ADS"))
    with open(paths["exposure"], "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["location", "road_class", "vehicle_class", "cell", "miles"])
        total = math.fsum(c.human_miles for c in scenario.cells)
        w.writerow([scenario.location, RoadClass.SurfaceStreet.value, "All", "", repr(total)])
        for c in scenario.cells:
            w.writerow([scenario.location, RoadClass.SurfaceStreet.value, "All", c.cell_id, repr(c.human_miles)])
    write_cell_miles(paths["cells"], [
        CellMiles(scenario.location, c.cell_id, c.human_miles, c.ads_miles) for c in scenario.cells])
    with open(paths["ads_miles"], "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["location", "miles"])
        w.writerow([scenario.location, repr(scenario.ads_total)])
    with open(paths["truth"], "w", encoding="utf-8") as fh:
        json.dump(truth(scenario, d), fh, indent=2, sort_keys=True)
        fh.write("\n")
    level = int(scenario.cells[0].cell_id.split("/")[0][1:])
    pipeline = {
        "ads": {"canonical": paths["ads"].name, "miles": paths["ads_miles"].name},
        "human": {
            "crashes": [paths["human"].name],
            "exposure": paths["exposure"].name,
            "cells": paths["cells"].name,
        },
        "parameters": {"underreporting": False, "dynamic": True, "cell_level": level},
        "report": {"outcomes": [scenario.outcome.value], "crash_types": "aggregate",
                   "formats": ["csv", "md"]},
    }
    with open(paths["pipeline"], "w", encoding="utf-8") as fh:
        yaml.safe_dump(pipeline, fh, sort_keys=True)
    return paths


# --- coverage oracle ----------------------------------------------------------------

@dataclass(frozen=True)
class CoverageResult:
    true_ratio: float
    replicates: int
    covered: int
    undefined: int  # both counts zero; counted as not covered

    @property
    def coverage(self) -> float:
        return self.covered / self.replicates


def coverage_study(true_ratio: float, replicates: int = 1000, seed: int = 0, alpha: float = 0.05,
                   count_range: tuple[float, float] = (2.0, 100.0), cells: int = 4) -> CoverageResult:
    """Empirical CI coverage of the true ratio over seeded replicates.

    Each replicate draws expected human and ADS counts uniformly in
    ``count_range``, spreads them over ``cells`` cells with ADS shares equal to
    human shares (so the reweighted benchmark is the pooled rate), samples
    Poisson counts and runs the comparison.
    """
    rng = np.random.default_rng(seed)
    covered = undefined = 0
    for _ in range(replicates):
        e_h, e_a = rng.uniform(*count_range, size=2)
        shares = rng.dirichlet(np.ones(cells))
        rate = rng.uniform(0.5, 5.0)  # IPMM
        human_miles = e_h / rate * 1e6 * shares
        ads_miles = e_a / (true_ratio * rate) * 1e6 * shares
        sc = Scenario(0, "Sim", OutcomeLevel.AnyInjuryReported, true_ratio, tuple(
            Cell(f"c{i}", (0.0, 0.0), rate, float(h), float(a))
            for i, (h, a) in enumerate(zip(human_miles, ads_miles))))
        d = draw(sc, rng)
        bench, _ = dynamic_reweight({c.cell_id: (n, c.human_miles) for c, n in zip(sc.cells, d.human_counts)},
                                    {c.cell_id: c.ads_miles for c in sc.cells},
                                    location="Sim", outcome=sc.outcome.value)
        results, gaps = compare({("Sim", sc.outcome.value, "All"): float(sum(d.ads_counts))},
                                {"Sim": sc.ads_total}, [bench], alpha)
        if gaps:
            undefined += 1
            continue
        r = results[0]
        ratio_lo, ratio_hi = 1 + r.ci_lower / 100, 1 + r.ci_upper / 100
        if ratio_lo <= true_ratio <= ratio_hi:
            covered += 1
    return CoverageResult(true_ratio, replicates, covered, undefined)
