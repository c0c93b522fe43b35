"""Adjusted human benchmark rates.

Rates are crashed vehicles per million miles (IPMM).  A BenchmarkRate also
carries an effective Poisson count and exposure so that it can enter the exact
rate-ratio interval; ``rate = 1e6 * effective_count / exposure`` always holds.

For reweighted or blended rates the effective count is moment matched: the
rate estimator ``R`` has variance ``V`` under Poisson sampling of the human
counts, and ``n_eff = R**2 / V`` is the Poisson count with the same relative
precision.  With ADS shares equal to human shares this collapses to the pooled
count and miles.  ``count_rule="ads_exposure"`` instead sets the exposure to
the ADS miles of interest.
"""

from __future__ import annotations

import csv
import logging
import math
from collections import defaultdict
from dataclasses import dataclass, field, replace
from typing import Iterable, Mapping, Optional, Sequence

from .classify import ClassifiedRecord
from .model import (
    AGGREGATE,
    ALL_LOCATIONS,
    CrashTypeGroup,
    EqualAngleGrid,
    CellScheme,
    ExposureTable,
    OutcomeLevel,
    PRIMARY_OUTCOMES,
    RoadClass,
    F2R_STRIKING,
    F2R_STRUCK,
    crash_type_sort_key,
    location_sort_key,
)

log = logging.getLogger(__name__)

UNDERREPORTING_FACTOR = 1.47
RATE_REL_TOL = 1e-9
COUNT_RULES = ("moment", "ads_exposure")
ZERO_MILE_POLICIES = ("abort", "fallback")


class BenchmarkError(ValueError):
    pass


class DataGapError(BenchmarkError):
    """Inputs needed for a benchmark are missing."""


@dataclass(frozen=True)
class BenchmarkRate:
    location: str
    outcome: str
    crash_type: str
    rate: float
    effective_count: float
    exposure: float
    underreporting_applied: bool = False
    dynamic_applied: bool = False

    def __post_init__(self):
        if not self.exposure > 0:
            raise BenchmarkError(f"exposure must be > 0, got {self.exposure}")
        if self.rate < 0 or self.effective_count < 0:
            raise BenchmarkError("rate and effective_count must be >= 0")
        implied = 1e6 * self.effective_count / self.exposure
        if not math.isclose(self.rate, implied, rel_tol=RATE_REL_TOL, abs_tol=1e-300):
            raise BenchmarkError(f"rate {self.rate} != 1e6 * count / exposure = {implied}")

    @property
    def key(self) -> tuple[str, str, str]:
        return self.location, self.outcome, self.crash_type

    def sort_key(self):
        return (location_sort_key(self.location), self.outcome,
                crash_type_sort_key(self.crash_type), self.crash_type)


def make_rate(location: str, outcome: str, crash_type: str, count: float, exposure: float,
              **flags) -> BenchmarkRate:
    return BenchmarkRate(location, str(outcome), crash_type, ipmm(count, exposure),
                         float(count), float(exposure), **flags)


# --- elementary adjustments ------------------------------------------------------

def ipmm(count: float, miles: float) -> float:
    if not miles > 0:
        raise BenchmarkError(f"miles must be > 0, got {miles}")
    if count < 0:
        raise BenchmarkError(f"count must be >= 0, got {count}")
    return 1e6 * count / miles


def passenger_adjust(total_miles: float, vm4_passenger_share: float) -> float:
    if not 0.0 <= vm4_passenger_share <= 1.0:
        raise BenchmarkError(f"passenger share must be in [0, 1], got {vm4_passenger_share}")
    if total_miles < 0:
        raise BenchmarkError("miles must be >= 0")
    return total_miles * vm4_passenger_share


def underreporting_adjust(count: float, outcome: OutcomeLevel | str, factor: float = UNDERREPORTING_FACTOR,
                          enabled: bool = True) -> float:
    """Inflate Any-Injury counts only; other outcomes pass through untouched."""
    if factor < 1.0:
        raise BenchmarkError(f"underreporting factor must be >= 1, got {factor}")
    if enabled and OutcomeLevel(outcome) is OutcomeLevel.AnyInjuryReported:
        return count * factor
    return count


def set_underreporting(rate: BenchmarkRate, enabled: bool,
                       factor: float = UNDERREPORTING_FACTOR) -> BenchmarkRate:
    """Move a rate to the requested underreporting state.

    Scaling keeps the exposure and multiplies (or divides) rate and count by
    ``factor``.  Rates for outcomes the correction never touches come back
    unchanged.
    """
    if OutcomeLevel(rate.outcome) is not OutcomeLevel.AnyInjuryReported:
        return rate
    if rate.underreporting_applied == enabled:
        return rate
    if factor < 1.0:
        raise BenchmarkError(f"underreporting factor must be >= 1, got {factor}")
    scale = factor if enabled else 1.0 / factor
    return replace(rate, rate=rate.rate * scale, effective_count=rate.effective_count * scale,
                   underreporting_applied=enabled)


def expected_count_delta(human_rate: float, ads_miles: float, ads_count: float) -> float:
    if not ads_miles > 0:
        raise BenchmarkError("ads_miles must be > 0")
    return ads_count - human_rate * ads_miles / 1e6


def split_f2r(rate: BenchmarkRate) -> tuple[BenchmarkRate, BenchmarkRate]:
    """Human front-to-rear rates split evenly: one striking and one struck vehicle per crash."""
    if rate.crash_type != CrashTypeGroup.V2VF2R.value:
        raise BenchmarkError(f"split_f2r expects a V2VF2R rate, got {rate.crash_type}")
    half = replace(rate, rate=rate.rate / 2, effective_count=rate.effective_count / 2)
    return replace(half, crash_type=F2R_STRIKING), replace(half, crash_type=F2R_STRUCK)


# --- dynamic reweighting ---------------------------------------------------------

@dataclass(frozen=True)
class CellWeight:
    cell_id: str
    ads_mile_share: float
    human_mile_share: float
    weight: float
    fallback: bool = False


@dataclass(frozen=True)
class CellWeights:
    cells: tuple[CellWeight, ...]

    def __post_init__(self):
        visited = [c.ads_mile_share for c in self.cells if c.ads_mile_share > 0]
        if visited and not math.isclose(math.fsum(visited), 1.0, rel_tol=1e-9):
            raise BenchmarkError("ADS mile shares must sum to 1")

    def as_dict(self) -> dict[str, CellWeight]:
        return {c.cell_id: c for c in self.cells}


def _from_moments(rate: float, variance: float, fallback_exposure: float, **kw) -> BenchmarkRate:
    # Poisson count with the same relative precision as the rate estimator
    if rate > 0 and variance > 0:
        n_eff = rate * rate / variance
        return BenchmarkRate(rate=rate, effective_count=n_eff, exposure=1e6 * n_eff / rate, **kw)
    if rate > 0:
        raise BenchmarkError("positive rate with zero variance")
    return BenchmarkRate(rate=0.0, effective_count=0.0, exposure=fallback_exposure, **kw)


def _from_ads_exposure(rate: float, ads_exposure: float, **kw) -> BenchmarkRate:
    return BenchmarkRate(rate=rate, effective_count=rate * ads_exposure / 1e6, exposure=ads_exposure, **kw)


def dynamic_reweight(cell_rates: Mapping[str, tuple[float, float]],
                     ads_cell_miles: Mapping[str, float],
                     location: str = "", outcome: str = "", crash_type: str = AGGREGATE,
                     policy: str = "abort", count_rule: str = "moment",
                     ads_exposure: Optional[float] = None) -> tuple[BenchmarkRate, CellWeights]:
    """Human rate reweighted to the ADS distribution of miles over cells.

    ``cell_rates`` maps cell id to (human_crashes, human_miles).  ADS-visited
    cells without human miles either abort (listing the cells) or, under
    ``policy="fallback"``, take the pooled rate of the whole table.
    """
    if policy not in ZERO_MILE_POLICIES:
        raise BenchmarkError(f"unknown zero-mile policy {policy!r}")
    if count_rule not in COUNT_RULES:
        raise BenchmarkError(f"unknown count rule {count_rule!r}")
    if any(m < 0 for m in ads_cell_miles.values()):
        raise BenchmarkError("negative ADS cell miles")
    for cell, (c, m) in cell_rates.items():
        if c < 0 or m < 0:
            raise BenchmarkError(f"negative human crashes or miles in cell {cell}")
    ads_total = math.fsum(ads_cell_miles.values())
    if not ads_total > 0:
        raise DataGapError("no ADS miles in any cell")
    human_total = math.fsum(m for _, m in cell_rates.values())
    crash_total = math.fsum(c for c, _ in cell_rates.values())

    visited = sorted(c for c, m in ads_cell_miles.items() if m > 0)
    missing = [c for c in visited if cell_rates.get(c, (0.0, 0.0))[1] <= 0]
    if missing and policy == "abort":
        raise DataGapError(f"ADS-visited cells without human miles: {', '.join(missing)}")
    if missing:
        if not human_total > 0:
            raise DataGapError("no human miles in any cell for fallback")
        log.warning("%s/%s/%s: %d cell(s) without human miles use the pooled rate: %s",
                    location, outcome, crash_type, len(missing), ", ".join(missing))

    terms, var_terms, weights = [], [], []
    for cell in sorted(set(cell_rates) | set(ads_cell_miles)):
        crashes, hmiles = cell_rates.get(cell, (0.0, 0.0))
        a_share = ads_cell_miles.get(cell, 0.0) / ads_total
        h_share = hmiles / human_total if human_total > 0 else 0.0
        fallback = cell in missing
        weights.append(CellWeight(cell, a_share, h_share,
                                  a_share / h_share if a_share > 0 and h_share > 0 else 0.0,
                                  fallback))
        if a_share == 0:
            continue
        if fallback:
            terms.append(1e6 * crash_total / human_total * a_share)
            var_terms.append(a_share ** 2 * 1e12 * crash_total / human_total ** 2)
        else:
            terms.append(1e6 * crashes / hmiles * a_share)
            var_terms.append(a_share ** 2 * 1e12 * crashes / hmiles ** 2)

    rate = math.fsum(terms)
    labels = dict(location=location, outcome=str(outcome), crash_type=crash_type, dynamic_applied=True)
    if count_rule == "ads_exposure":
        out = _from_ads_exposure(rate, ads_exposure if ads_exposure is not None else ads_total, **labels)
    else:
        visited_miles = math.fsum(cell_rates[c][1] for c in visited if c in cell_rates)
        out = _from_moments(rate, math.fsum(var_terms), visited_miles or human_total or 1.0, **labels)
    return out, CellWeights(tuple(weights))


def blend_locations(rates: Mapping[str, BenchmarkRate], ads_miles: Mapping[str, float],
                    location: str = ALL_LOCATIONS, count_rule: str = "moment") -> BenchmarkRate:
    """ADS-mileage weighted average of per-location rates."""
    if not rates:
        raise BenchmarkError("nothing to blend")
    if count_rule not in COUNT_RULES:
        raise BenchmarkError(f"unknown count rule {count_rule!r}")
    first = next(iter(rates.values()))
    for r in rates.values():
        if (r.outcome, r.crash_type) != (first.outcome, first.crash_type):
            raise BenchmarkError("blend inputs must share outcome and crash type")
    locs = sorted(rates, key=location_sort_key)
    for loc in locs:
        if not ads_miles.get(loc, 0.0) > 0:
            raise BenchmarkError(f"no ADS miles for {loc}")
    total = math.fsum(ads_miles[loc] for loc in locs)
    shares = {loc: ads_miles[loc] / total for loc in locs}
    rate = math.fsum(rates[loc].rate * shares[loc] for loc in locs)
    labels = dict(
        location=location, outcome=first.outcome, crash_type=first.crash_type,
        underreporting_applied=all(r.underreporting_applied for r in rates.values()),
        dynamic_applied=all(r.dynamic_applied for r in rates.values()),
    )
    if count_rule == "ads_exposure":
        return _from_ads_exposure(rate, total, **labels)
    # Var(r_l) = r_l**2 / n_l for a Poisson-based rate
    var = math.fsum(shares[l] ** 2 * rates[l].rate ** 2 / rates[l].effective_count
                    for l in locs if rates[l].effective_count > 0)
    return _from_moments(rate, var, math.fsum(rates[l].exposure for l in locs), **labels)


# --- building benchmarks from human corpora ---------------------------------------

@dataclass(frozen=True)
class CellMiles:
    """One row of the cell-mileage file."""

    location: str
    cell_id: str
    human_miles: float
    ads_miles: float
    human_crashes: Mapping[str, float] = field(default_factory=dict)


CELL_COLUMNS = ("location", "cell_id", "human_miles", "ads_miles")


def read_cell_miles(path) -> list[CellMiles]:
    out = []
    with open(path, newline="", encoding="utf-8") as fh:
        reader = csv.DictReader(fh)
        missing = [c for c in CELL_COLUMNS if c not in (reader.fieldnames or [])]
        if missing:
            raise BenchmarkError(f"{path}: missing columns {missing}")
        crash_cols = [c for c in reader.fieldnames if c.startswith("human_crashes_")]
        for row in reader:
            out.append(CellMiles(
                row["location"], row["cell_id"], float(row["human_miles"]), float(row["ads_miles"]),
                {c[len("human_crashes_"):]: float(row[c]) for c in crash_cols if row[c] != ""},
            ))
    return out


def write_cell_miles(path, rows: Sequence[CellMiles]) -> None:
    outcomes = sorted({o for r in rows for o in r.human_crashes})
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(list(CELL_COLUMNS) + [f"human_crashes_{o}" for o in outcomes])
        for r in sorted(rows, key=lambda r: (location_sort_key(r.location), r.cell_id)):
            w.writerow([r.location, r.cell_id, repr(float(r.human_miles)), repr(float(r.ads_miles))]
                       + [repr(float(r.human_crashes[o])) if o in r.human_crashes else "" for o in outcomes])


@dataclass(frozen=True)
class BenchmarkConfig:
    underreporting: bool = True
    factor: float = UNDERREPORTING_FACTOR
    dynamic: bool = False
    zero_mile_policy: str = "abort"
    count_rule: str = "moment"
    crash_types: bool = True
    f2r_split: bool = True
    vm4_passenger_share: Mapping[str, float] = field(default_factory=dict)
    cell_level: int = 13


@dataclass(frozen=True)
class HumanInputs:
    records: tuple[ClassifiedRecord, ...] = ()
    exposure: ExposureTable = field(default_factory=ExposureTable)
    cells: tuple[CellMiles, ...] = ()
    ads_miles: Mapping[str, float] = field(default_factory=dict)


def _type_keys(config: BenchmarkConfig) -> list[str]:
    keys = [AGGREGATE]
    if config.crash_types:
        keys += [g.value for g in CrashTypeGroup]
    return keys


def _counts(records: Iterable[ClassifiedRecord], outcome: OutcomeLevel,
            scheme: Optional[CellScheme] = None) -> dict[tuple[str, str, Optional[str]], float]:
    """Weighted surface-street counts keyed by (location, crash type, cell)."""
    out: dict = defaultdict(float)
    for c in records:
        rec = c.record
        if rec.road_class is not RoadClass.SurfaceStreet or outcome not in c.outcomes:
            continue
        cell = None
        if scheme is not None:
            if rec.coordinates is None:
                raise DataGapError(f"record {rec.crash_id} has no coordinates for cell assignment")
            cell = scheme.cell_of(*rec.coordinates)
        for key in (AGGREGATE, c.crash_type.group.value):
            out[(rec.location.name, key, cell)] += rec.weight
    return out


def build_benchmarks(inputs: HumanInputs, config: BenchmarkConfig = BenchmarkConfig(),
                     scheme: Optional[CellScheme] = None) -> list[BenchmarkRate]:
    """Per-location, per-outcome, per-crash-type benchmarks plus the blended row.

    Static rates divide weighted surface-street crash counts (or, without
    records, the cell file's aggregate crash totals) by passenger adjusted
    surface-street miles.  Dynamic rates reweight per-cell rates by
    the ADS cell distribution; cell counts come from record coordinates, or
    from the cell file's ``human_crashes_<outcome>`` columns when no records
    are given.
    """
    if scheme is None:
        scheme = EqualAngleGrid(config.cell_level)
    surface = inputs.exposure.surface_only()
    locations = [l for l in surface.locations() if l != ALL_LOCATIONS]
    if config.dynamic:
        locations = sorted({c.location for c in inputs.cells} | set(locations), key=location_sort_key)
    type_keys = _type_keys(config)
    cells_by_loc: dict[str, list[CellMiles]] = defaultdict(list)
    for c in inputs.cells:
        cells_by_loc[c.location].append(c)

    out: list[BenchmarkRate] = []
    for outcome in PRIMARY_OUTCOMES:
        counts = _counts(inputs.records, outcome, scheme if config.dynamic and inputs.records else None)
        for loc in locations:
            share = config.vm4_passenger_share.get(loc, 1.0)
            for ctype in type_keys:
                if config.dynamic:
                    rate = _dynamic_for(loc, outcome, ctype, cells_by_loc.get(loc, []), counts,
                                        share, config, bool(inputs.records), inputs.ads_miles.get(loc))
                    if rate is None:
                        continue
                else:
                    miles = passenger_adjust(surface.total(loc, cells=False), share)
                    if not miles > 0:
                        continue
                    if inputs.records:
                        n = counts.get((loc, ctype, None), 0.0)
                    elif ctype == AGGREGATE and cells_by_loc.get(loc):
                        n = _cell_file_total(cells_by_loc[loc], outcome)
                    else:
                        continue
                    rate = make_rate(loc, outcome.value, ctype, n, miles)
                out.append(set_underreporting(rate, config.underreporting, config.factor))
    out = _with_blend(out, inputs.ads_miles, config)
    if config.f2r_split:
        out += [half for r in out if r.crash_type == CrashTypeGroup.V2VF2R.value for half in split_f2r(r)]
    return sorted(out, key=BenchmarkRate.sort_key)


def _cell_file_total(cells: Sequence[CellMiles], outcome: OutcomeLevel) -> float:
    if any(outcome.value not in c.human_crashes for c in cells):
        raise DataGapError(f"cell file lacks human_crashes_{outcome.value}")
    return math.fsum(c.human_crashes[outcome.value] for c in cells)


def _dynamic_for(loc, outcome, ctype, cells, counts, share, config, from_records, ads_exposure):
    if not cells:
        raise DataGapError(f"dynamic benchmark requested but no cell miles for {loc}")
    if not from_records and ctype != AGGREGATE:
        return None
    cell_rates = {}
    for c in cells:
        if from_records:
            n = counts.get((loc, ctype, c.cell_id), 0.0)
        elif outcome.value in c.human_crashes:
            n = c.human_crashes[outcome.value]
        else:
            raise DataGapError(f"cell file lacks human_crashes_{outcome.value}")
        cell_rates[c.cell_id] = (n, passenger_adjust(c.human_miles, share))
    if from_records:
        stray = {k[2] for k in counts if k[0] == loc and k[1] == ctype} - set(cell_rates)
        if stray:
            raise DataGapError(f"{loc}: crashes in cells absent from the cell file: {sorted(stray)[:5]}")
    ads_cells = {c.cell_id: c.ads_miles for c in cells}
    rate, _ = dynamic_reweight(cell_rates, ads_cells, loc, outcome.value, ctype,
                               policy=config.zero_mile_policy, count_rule=config.count_rule,
                               ads_exposure=ads_exposure)
    return rate


def _with_blend(rates: list[BenchmarkRate], ads_miles: Mapping[str, float],
                config: BenchmarkConfig) -> list[BenchmarkRate]:
    groups: dict[tuple[str, str], dict[str, BenchmarkRate]] = defaultdict(dict)
    for r in rates:
        if ads_miles.get(r.location, 0.0) > 0:
            groups[(r.outcome, r.crash_type)][r.location] = r
    blended = [blend_locations(g, ads_miles, count_rule=config.count_rule)
               for _, g in sorted(groups.items())]
    return rates + blended


def sensitivity_grid(inputs: HumanInputs, config: BenchmarkConfig = BenchmarkConfig(),
                     scheme: Optional[CellScheme] = None) -> dict[tuple[bool, bool], list[BenchmarkRate]]:
    """Benchmarks for every (underreporting, dynamic) combination."""
    return {
        (ur, dyn): build_benchmarks(inputs, replace(config, underreporting=ur, dynamic=dyn), scheme)
        for ur in (True, False) for dyn in (True, False)
    }


def regrid_published(rates: Iterable[BenchmarkRate], underreporting: bool,
                     factor: float = UNDERREPORTING_FACTOR) -> list[BenchmarkRate]:
    """Put precomputed rates into the requested underreporting state."""
    return sorted((set_underreporting(r, underreporting, factor) for r in rates),
                  key=BenchmarkRate.sort_key)


# --- CSV ---------------------------------------------------------------------------

BENCHMARK_COLUMNS = ("location", "outcome", "crash_type", "rate", "effective_count", "exposure",
                     "underreporting_applied", "dynamic_applied")


def _flag(text: str) -> bool:
    t = text.strip().lower()
    if t in ("true", "1", "yes"):
        return True
    if t in ("false", "0", "no", ""):
        return False
    raise BenchmarkError(f"not a boolean: {text!r}")


def write_benchmarks(path, rates: Iterable[BenchmarkRate]) -> None:
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(BENCHMARK_COLUMNS)
        for r in sorted(rates, key=BenchmarkRate.sort_key):
            w.writerow([r.location, r.outcome, r.crash_type, repr(r.rate), repr(r.effective_count),
                        repr(r.exposure), str(r.underreporting_applied).lower(),
                        str(r.dynamic_applied).lower()])


def read_benchmarks(path) -> list[BenchmarkRate]:
    """Read benchmark rows; ``rate`` may be omitted or must agree with count / exposure."""
    out = []
    with open(path, newline="", encoding="utf-8") as fh:
        reader = csv.DictReader(fh)
        need = ("location", "outcome", "crash_type", "effective_count", "exposure")
        missing = [c for c in need if c not in (reader.fieldnames or [])]
        if missing:
            raise BenchmarkError(f"{path}: missing columns {missing}")
        for i, row in enumerate(reader, start=2):
            try:
                count, exposure = float(row["effective_count"]), float(row["exposure"])
                rate = float(row["rate"]) if row.get("rate") else ipmm(count, exposure)
                out.append(BenchmarkRate(
                    row["location"], OutcomeLevel(row["outcome"]).value, row["crash_type"] or AGGREGATE,
                    rate, count, exposure,
                    _flag(row.get("underreporting_applied") or ""), _flag(row.get("dynamic_applied") or ""),
                ))
            except ValueError as exc:
                raise BenchmarkError(f"{path}:{i}: {exc}") from exc
    return sorted(out, key=BenchmarkRate.sort_key)
