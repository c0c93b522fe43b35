"""Comparison tables, event-count matrices and the sensitivity grid as CSV or markdown.

CSV files carry display-rounded columns next to full-precision ``_raw``
columns; the raw columns are the source of truth and round-trip exactly.
"""

from __future__ import annotations

import csv
import io
import logging
import math
from collections import defaultdict
from dataclasses import dataclass
from pathlib import Path
from typing import Iterable, Mapping, Optional, Sequence

from .classify import ClassifiedRecord, PreCrashMovement
from .model import (
    AGGREGATE,
    CrashTypeGroup,
    F2R_STRIKING,
    F2R_STRUCK,
    F2RRole,
    OutcomeLevel,
    PRIMARY_OUTCOMES,
    crash_type_sort_key,
    location_sort_key,
)
from .stats import ComparisonResult

log = logging.getLogger(__name__)

CRASH_TYPE_SCOPES = ("aggregate", "per-group", "f2r-split", "all")
FORMATS = ("csv", "md")


class ReportError(RuntimeError):
    pass


@dataclass(frozen=True)
class ReportSpec:
    outcomes: tuple[str, ...] = tuple(o.value for o in PRIMARY_OUTCOMES)
    locations: Optional[tuple[str, ...]] = None  # None selects every location present
    crash_types: str = "all"
    formats: tuple[str, ...] = ("csv",)

    def __post_init__(self):
        if not self.outcomes:
            raise ReportError("select at least one outcome")
        if self.locations is not None and not self.locations:
            raise ReportError("select at least one location")
        for o in self.outcomes:
            OutcomeLevel(o)
        if self.crash_types not in CRASH_TYPE_SCOPES:
            raise ReportError(f"crash_types must be one of {CRASH_TYPE_SCOPES}")
        bad = [f for f in self.formats if f not in FORMATS]
        if bad:
            raise ReportError(f"unknown format(s) {bad}")

    def keeps_type(self, key: str) -> bool:
        f2r = key in (F2R_STRIKING, F2R_STRUCK, CrashTypeGroup.V2VF2R.value)
        if self.crash_types == "aggregate":
            return key == AGGREGATE
        if self.crash_types == "per-group":
            return key not in (F2R_STRIKING, F2R_STRUCK)
        if self.crash_types == "f2r-split":
            return f2r
        return True

    def select(self, results: Iterable[ComparisonResult]) -> list[ComparisonResult]:
        return sorted(
            (r for r in results
             if r.outcome in self.outcomes
             and (self.locations is None or r.location in self.locations)
             and self.keeps_type(r.crash_type)),
            key=ComparisonResult.sort_key,
        )


# --- number formatting -------------------------------------------------------------

def _raw(x: float) -> str:
    if math.isinf(x):
        return "inf" if x > 0 else "-inf"
    return repr(float(x))


def _fixed(x: float, digits: int) -> str:
    if math.isinf(x):
        return "inf" if x > 0 else "-inf"
    s = f"{x:.{digits}f}"
    return s[1:] if s.startswith("-") and float(s) == 0 else s


def _pct(x: float) -> str:
    return _fixed(x, 0)


def _label(key: str) -> str:
    return {F2R_STRIKING: "V2VF2R Striking", F2R_STRUCK: "V2VF2R Struck"}.get(key, key)


# --- comparison table ---------------------------------------------------------------

COMPARISON_COLUMNS = (
    "location", "outcome", "crash_type", "human_ipmm", "ads_ipmm", "expected_delta", "percent_diff",
    "ci_lower", "ci_upper", "significant", "ci_upper_unbounded",
    "human_ipmm_raw", "ads_ipmm_raw", "expected_delta_raw", "rate_ratio_raw", "percent_diff_raw",
    "ci_lower_raw", "ci_upper_raw", "ads_count", "ads_miles", "human_count", "human_exposure", "alpha",
)


def comparison_rows(results: Sequence[ComparisonResult]) -> list[list[str]]:
    rows = []
    for r in results:
        rows.append([
            r.location, r.outcome, r.crash_type,
            _fixed(r.human_ipmm, 2), _fixed(r.ads_ipmm, 2), _fixed(r.expected_count_delta, 1),
            _pct(r.percent_difference), _pct(r.ci_lower), _pct(r.ci_upper),
            "true" if r.significant else "false", "true" if r.upper_unbounded else "false",
            _raw(r.human_ipmm), _raw(r.ads_ipmm), _raw(r.expected_count_delta),
            _raw(r.rate_ratio), _raw(r.percent_difference), _raw(r.ci_lower), _raw(r.ci_upper),
            _raw(r.ads_count), _raw(r.ads_miles), _raw(r.human_count), _raw(r.human_exposure),
            _raw(r.alpha),
        ])
    return rows


def comparison_markdown(results: Sequence[ComparisonResult]) -> str:
    level = f"{100 * (1 - results[0].alpha):g}% CI" if results else "95% CI"
    head = ["Location", "Outcome", "Crash type", "Human IPMM", "ADS IPMM",
            "Expected ADS count difference", "Percent difference", level]
    lines = ["| " + " | ".join(head) + " |", "|" + "---|" * len(head)]
    for r in results:
        star = "*" if r.significant else ""
        upper = "unbounded" if r.upper_unbounded else f"{_pct(r.ci_upper)}%"
        pct = "unbounded" if math.isinf(r.percent_difference) else f"{_pct(r.percent_difference)}%"
        lines.append("| " + " | ".join([
            r.location, r.outcome, _label(r.crash_type), _fixed(r.human_ipmm, 2), _fixed(r.ads_ipmm, 2),
            _fixed(r.expected_count_delta, 1), pct + star, f"[{_pct(r.ci_lower)}%, {upper}]",
        ]) + " |")
    return "\n".join(lines) + "\n"


def _write(path: Path, text: str) -> Path:
    try:
        path.parent.mkdir(parents=True, exist_ok=True)
        with open(path, "w", newline="", encoding="utf-8") as fh:
            fh.write(text)
    except OSError as exc:
        raise ReportError(f"cannot write {path}: {exc}") from exc
    return path


def _csv_text(header: Sequence[str], rows: Iterable[Sequence[str]]) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(header)
    w.writerows(rows)
    return buf.getvalue()


def emit_comparison_table(results: Iterable[ComparisonResult], spec: ReportSpec, out: str | Path,
                          stem: str = "comparison") -> list[Path]:
    """Write ``<stem>.csv`` and/or ``<stem>.md`` into directory ``out``."""
    chosen = spec.select(results)
    if not chosen:
        log.warning("no comparison rows match the report selection; writing header only")
    out = Path(out)
    paths = []
    if "csv" in spec.formats:
        paths.append(_write(out / f"{stem}.csv", _csv_text(COMPARISON_COLUMNS, comparison_rows(chosen))))
    if "md" in spec.formats:
        paths.append(_write(out / f"{stem}.md", comparison_markdown(chosen)))
    return paths


def _float(text: str) -> float:
    return float(text)  # float() already accepts "inf"


def read_comparison_table(path: str | Path) -> list[ComparisonResult]:
    """Rebuild results from the raw columns of an emitted comparison CSV."""
    out = []
    try:
        fh = open(path, newline="", encoding="utf-8")
    except OSError as exc:
        raise ReportError(f"cannot read {path}: {exc}") from exc
    with fh:
        for row in csv.DictReader(fh):
            ads_count, ads_miles = _float(row["ads_count"]), _float(row["ads_miles"])
            human_count, human_exposure = _float(row["human_count"]), _float(row["human_exposure"])
            out.append(ComparisonResult(
                ads_count=ads_count, ads_miles=ads_miles,
                human_count=human_count, human_exposure=human_exposure,
                rate_ratio=_float(row["rate_ratio_raw"]),
                percent_difference=_float(row["percent_diff_raw"]),
                ci_lower=_float(row["ci_lower_raw"]), ci_upper=_float(row["ci_upper_raw"]),
                significant=row["significant"] == "true",
                expected_count_delta=_float(row["expected_delta_raw"]),
                alpha=_float(row["alpha"]),
                location=row["location"], outcome=row["outcome"], crash_type=row["crash_type"],
            ))
    return out


# --- event counts ---------------------------------------------------------------------

def event_count_matrix(classified: Iterable[ClassifiedRecord],
                       outcomes: Sequence[OutcomeLevel] = PRIMARY_OUTCOMES
                       ) -> dict[str, dict[str, float]]:
    """Group x outcome counts (all locations), every group present even when zero."""
    m = {g.value: {o.value: 0.0 for o in outcomes} for g in CrashTypeGroup}
    for c in classified:
        for o in outcomes:
            if o in c.outcomes:
                m[c.crash_type.group.value][o.value] += c.record.weight
    return m


def _count(x: float) -> str:
    return str(int(x)) if float(x).is_integer() else _raw(x)


def emit_event_counts(classified: Iterable[ClassifiedRecord], out: str | Path,
                      formats: Sequence[str] = ("csv",), stem: str = "event_counts") -> list[Path]:
    m = event_count_matrix(classified)
    outcomes = [o.value for o in PRIMARY_OUTCOMES]
    rows = [[g] + [_count(m[g][o]) for o in outcomes] for g in m]
    rows.append(["Total"] + [_count(math.fsum(m[g][o] for g in m)) for o in outcomes])
    out = Path(out)
    paths = []
    if "csv" in formats:
        paths.append(_write(out / f"{stem}.csv", _csv_text(["crash_type"] + outcomes, rows)))
    if "md" in formats:
        lines = ["| Crash type | " + " | ".join(outcomes) + " |", "|---|" + "---|" * len(outcomes)]
        lines += ["| " + " | ".join(r) + " |" for r in rows]
        paths.append(_write(out / f"{stem}.md", "\n".join(lines) + "\n"))
    return paths


def movement_matrix(classified: Iterable[ClassifiedRecord],
                    outcomes: Sequence[OutcomeLevel] = (OutcomeLevel.AirbagDeployment,
                                                        OutcomeLevel.AnyInjuryReported)
                    ) -> dict[str, dict[str, int]]:
    """Pre-crash movement of the subject in front-to-rear struck crashes."""
    cats = [m.value for m in PreCrashMovement] + ["Unknown"]
    table = {o.value: {c: 0 for c in cats} for o in outcomes}
    for c in classified:
        if c.crash_type.group is not CrashTypeGroup.V2VF2R or c.crash_type.f2r_role is not F2RRole.Struck:
            continue
        cat = c.movement.value if c.movement is not None else "Unknown"
        for o in outcomes:
            if o in c.outcomes:
                table[o.value][cat] += 1
    return table


def emit_movement_table(classified: Iterable[ClassifiedRecord], out: str | Path,
                        formats: Sequence[str] = ("csv",), stem: str = "f2r_struck_movement") -> list[Path]:
    t = movement_matrix(classified)
    cats = [m.value for m in PreCrashMovement] + ["Unknown"]
    rows = [[o] + [str(t[o][c]) for c in cats] + [str(sum(t[o].values()))] for o in t]
    header = ["outcome"] + cats + ["total"]
    out = Path(out)
    paths = []
    if "csv" in formats:
        paths.append(_write(out / f"{stem}.csv", _csv_text(header, rows)))
    if "md" in formats:
        lines = ["| " + " | ".join(header) + " |", "|" + "---|" * len(header)]
        lines += ["| " + " | ".join(r) + " |" for r in rows]
        paths.append(_write(out / f"{stem}.md", "\n".join(lines) + "\n"))
    return paths


# --- sensitivity grid -----------------------------------------------------------------

Variant = tuple[bool, bool]  # (underreporting, dynamic)


def _variant_name(v: Variant) -> str:
    return f"ur_{'on' if v[0] else 'off'}_dyn_{'on' if v[1] else 'off'}"


def _same(a: Optional[ComparisonResult], b: Optional[ComparisonResult]) -> bool:
    if a is None or b is None:
        return a is b
    return (a.human_count, a.human_exposure, a.ci_lower, a.ci_upper) == \
           (b.human_count, b.human_exposure, b.ci_lower, b.ci_upper)


def sensitivity_rows(grid: Mapping[Variant, Iterable[ComparisonResult]]
                     ) -> tuple[list[str], list[list[str]]]:
    variants = sorted(grid, reverse=True)
    by_key: dict = defaultdict(dict)
    for v in variants:
        for r in grid[v]:
            by_key[r.key][v] = r
    header = ["location", "outcome", "crash_type"]
    for v in variants:
        n = _variant_name(v)
        header += [f"{n}_human_ipmm", f"{n}_percent_diff", f"{n}_ci_lower", f"{n}_ci_upper",
                   f"{n}_significant"]
    header += ["underreporting", "dynamic", "significance"]
    rows = []
    keys = sorted(by_key, key=lambda k: (location_sort_key(k[0]), k[1], crash_type_sort_key(k[2]), k[2]))
    for key in keys:
        cells = by_key[key]
        row = list(key)
        for v in variants:
            r = cells.get(v)
            row += ["", "", "", "", ""] if r is None else [
                _raw(r.human_ipmm), _raw(r.percent_difference), _raw(r.ci_lower), _raw(r.ci_upper),
                "true" if r.significant else "false"]
        ur_pairs = [((True, d), (False, d)) for d in (True, False) if (True, d) in grid and (False, d) in grid]
        dyn_pairs = [((u, True), (u, False)) for u in (True, False) if (u, True) in grid and (u, False) in grid]
        row.append(_effect(cells, ur_pairs))
        row.append(_effect(cells, dyn_pairs))
        flags = {r.significant for r in cells.values()}
        row.append("flip" if len(flags) > 1 else "stable")
        rows.append(row)
    return header, rows


def _effect(cells, pairs) -> str:
    if not pairs:
        return "n/a"
    return "insensitive" if all(_same(cells.get(a), cells.get(b)) for a, b in pairs) else "sensitive"


def emit_sensitivity_grid(grid: Mapping[Variant, Iterable[ComparisonResult]], out: str | Path,
                          formats: Sequence[str] = ("csv",), stem: str = "sensitivity") -> list[Path]:
    """One row per comparison cell, one column block per (underreporting, dynamic) variant."""
    grid = {v: list(rs) for v, rs in grid.items()}
    header, rows = sensitivity_rows(grid)
    out = Path(out)
    paths = []
    if "csv" in formats:
        paths.append(_write(out / f"{stem}.csv", _csv_text(header, rows)))
    if "md" in formats:
        short = ["location", "outcome", "crash_type"] + [_variant_name(v) for v in sorted(grid, reverse=True)] \
            + ["underreporting", "dynamic", "significance"]
        lines = ["| " + " | ".join(short) + " |", "|" + "---|" * len(short)]
        nv = len(grid)
        for row in rows:
            cells = []
            for i in range(nv):
                blk = row[3 + 5 * i: 8 + 5 * i]
                if blk[0] == "":
                    cells.append("")
                    continue
                star = "*" if blk[4] == "true" else ""
                cells.append(f"{_fixed(float(blk[0]), 2)} / {_pct(float(blk[1]))}%{star}")
            lines.append("| " + " | ".join(row[:3] + cells + row[-3:]) + " |")
        paths.append(_write(out / f"{stem}.md", "\n".join(lines) + "\n"))
    return paths

