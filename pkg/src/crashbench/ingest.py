"""Parse delimited source files into canonical records through mapping configs.

A mapping config is YAML::

    source_name: ca_switrs
    kind: crash            # crash | sgo | exposure
    delimiter: ","
    unknown_vehicle_weight: {LosAngeles: 0.93, SanFrancisco: 0.89}
    dedupe: {key: "Report ID", version: "Report Version"}   # optional
    field_map:
      - template: "{CASE_ID}-{PARTY_NUMBER}"   # joins columns; blank if any is blank
        field: crash_id
      - column: STWD_VEHTYPE_AT_FAULT
        field: subject.body_class
        value_map:
          - {pattern: "A|B|C|D", value: PassengerVehicle}
        default: UnknownVehicle      # blank cell
        otherwise: UnknownVehicle    # non-blank cell matching no pattern
      - field: severity.max_injury
        cases:
          - when: {column: SEV, equals: "Unknown"}
            value: None
    rules:                           # ordered; failing rows are dropped and tallied
      passenger_vehicle: {column: VTYPE, in: [A, B, C, D, ""]}
      surface_street: {not: {column: ROUTE, matches: "I-.*"}}

Patterns are regular expressions that must match the whole (stripped) cell;
values may use group references such as ``\\g<0>``.
When more than one pattern matches a value the config is ambiguous and a
ConfigError is raised.  Non-blank values that match nothing (and have no
``otherwise``) are tallied in the report and the row is dropped.

Several entries may target the same field: booleans are OR-ed, injuries take
the most severe value, and anything else keeps the first value produced.
"""

from __future__ import annotations

import csv
import math
import re
import string
from collections import Counter
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from importlib import resources
from pathlib import Path
from typing import Any, Callable, Iterable, Mapping, Optional, Sequence

import yaml

from .model import (
    Actor,
    Annotations,
    BodyClass,
    Configuration,
    CrashRecord,
    ExposureRow,
    ExposureTable,
    F2RRole,
    InitiatorRole,
    Injury,
    Kinematics,
    Location,
    ModelError,
    RoadClass,
    Severity,
    VehicleClass,
)


class ConfigError(ValueError):
    """A mapping config is malformed or does not fit its input file."""


class ParseError(ValueError):
    """An input file cannot be read at all."""


class RowError(ValueError):
    """One row cannot be converted; tallied, not fatal."""


PARSE_ERROR = "parse_error"
SUPERSEDED = "superseded_version"

# canonical field -> converter from a mapped string
_BOOL_TRUE = {"true", "t", "yes", "y", "1"}
_BOOL_FALSE = {"false", "f", "no", "n", "0"}


def _to_bool(v: str) -> bool:
    t = v.strip().lower()
    if t in _BOOL_TRUE:
        return True
    if t in _BOOL_FALSE:
        return False
    raise RowError(f"not a boolean: {v!r}")


def _to_float(v: str) -> float:
    try:
        x = float(v.replace(",", "")) if isinstance(v, str) else float(v)
    except ValueError:
        raise RowError(f"not a number: {v!r}") from None
    if math.isnan(x):
        raise RowError("NaN value")
    return x


def _to_int(v: str) -> int:
    x = _to_float(v)
    if x != int(x):
        raise RowError(f"not an integer: {v!r}")
    return int(x)


def _enum(cls) -> Callable[[str], Any]:
    def conv(v: str):
        try:
            return cls(v.strip())
        except ValueError:
            raise RowError(f"{v!r} is not a {cls.__name__}") from None
    return conv


CRASH_FIELDS: dict[str, Callable[[str], Any]] = {
    "crash_id": str.strip,
    "location": str.strip,
    "coordinates.lat": _to_float,
    "coordinates.lon": _to_float,
    "road_class": _enum(RoadClass),
    "sequence_position": _to_int,
    "configuration": _enum(Configuration),
    "subject.body_class": _enum(BodyClass),
    "subject.role_order": _to_int,
    "subject.in_transport": _to_bool,
    "partner.body_class": _enum(BodyClass),
    "partner.role_order": _to_int,
    "partner.in_transport": _to_bool,
    "severity.max_injury": _enum(Injury),
    "severity.any_airbag_any_vehicle": _to_bool,
    "severity.police_reported": _to_bool,
    "severity.police_confirmed_serious": _to_bool,
    "annotations.initiator_role": _enum(InitiatorRole),
    "annotations.f2r_role": _enum(F2RRole),
    "annotations.stopped_duration_s": _to_float,
    "annotations.peak_deceleration_mps2": _to_float,
    "weight": _to_float,
}

EXPOSURE_FIELDS: dict[str, Callable[[str], Any]] = {
    "location": str.strip,
    "road_class": _enum(RoadClass),
    "miles": _to_float,
    "vehicle_class": _enum(VehicleClass),
    "cell": str.strip,
}

KINDS = ("crash", "sgo", "exposure")


# --- predicates ------------------------------------------------------------------

Predicate = Callable[[Mapping[str, str]], bool]


def _compile_predicate(spec: Any, columns: list[str], where: str) -> Predicate:
    """Turn a predicate mapping into a callable, collecting referenced columns."""
    if spec is True or spec is None:
        return lambda row: True
    if spec is False:
        return lambda row: False
    if not isinstance(spec, Mapping):
        raise ConfigError(f"{where}: predicate must be a mapping, got {spec!r}")
    if "all" in spec or "any" in spec:
        op = "all" if "all" in spec else "any"
        parts = [_compile_predicate(p, columns, where) for p in spec[op]]
        if op == "all":
            return lambda row: all(p(row) for p in parts)
        return lambda row: any(p(row) for p in parts)
    if "not" in spec:
        inner = _compile_predicate(spec["not"], columns, where)
        return lambda row: not inner(row)
    col = spec.get("column")
    if col is None:
        raise ConfigError(f"{where}: predicate needs 'column': {spec!r}")
    columns.append(col)
    ops = [k for k in spec if k != "column"]
    if len(ops) != 1:
        raise ConfigError(f"{where}: predicate on {col!r} needs exactly one operator")
    op, arg = ops[0], spec[ops[0]]
    get = lambda row: (row.get(col) or "").strip()  # noqa: E731
    if op == "equals":
        return lambda row: get(row) == str(arg)
    if op == "in":
        vals = {str(a) for a in arg}
        return lambda row: get(row) in vals
    if op == "not_in":
        vals = {str(a) for a in arg}
        return lambda row: get(row) not in vals
    if op == "matches":
        rx = _regex(arg, where)
        return lambda row: rx.fullmatch(get(row)) is not None
    if op == "missing":
        want = bool(arg)
        return lambda row: (get(row) == "") == want
    if op in ("lt", "gt"):
        bound = float(arg)

        def cmp(row):
            try:
                x = float(get(row))
            except ValueError:
                return False
            return x < bound if op == "lt" else x > bound
        return cmp
    raise ConfigError(f"{where}: unknown predicate operator {op!r}")


def _regex(pattern: str, where: str) -> re.Pattern:
    try:
        return re.compile(str(pattern))
    except re.error as exc:
        raise ConfigError(f"{where}: bad pattern {pattern!r}: {exc}") from None


# --- config ----------------------------------------------------------------------

@dataclass(frozen=True)
class ValueRule:
    pattern: str
    value: str


@dataclass(frozen=True)
class FieldEntry:
    canonical_field: str
    source_column: Optional[str] = None
    value_map: tuple[ValueRule, ...] = ()
    cases: tuple[tuple[Any, str], ...] = ()
    default: Optional[str] = None
    otherwise: Optional[str] = None
    const: Optional[str] = None
    template: Optional[str] = None  # e.g. "{case_id}-{party_number}"

    def template_columns(self) -> list[str]:
        if self.template is None:
            return []
        return [name for _, name, _, _ in string.Formatter().parse(self.template) if name]


@dataclass(frozen=True)
class MappingConfig:
    source_name: str
    kind: str = "crash"
    field_map: tuple[FieldEntry, ...] = ()
    rules: tuple[tuple[str, Any], ...] = ()
    unknown_vehicle_weight: float | Mapping[str, float] = 1.0
    delimiter: str = ","
    dedupe: Optional[Mapping[str, str]] = None
    notes: str = ""

    def __post_init__(self):
        if self.kind not in KINDS:
            raise ConfigError(f"{self.source_name}: kind must be one of {KINDS}")
        known = EXPOSURE_FIELDS if self.kind == "exposure" else CRASH_FIELDS
        for e in self.field_map:
            if e.canonical_field not in known:
                raise ConfigError(f"{self.source_name}: unknown canonical field {e.canonical_field!r}")
            if e.source_column is None and e.const is None and not e.cases and e.template is None:
                raise ConfigError(f"{self.source_name}: {e.canonical_field} needs column, const, cases or template")
            try:
                e.template_columns()
            except ValueError as exc:
                raise ConfigError(f"{self.source_name}: bad template {e.template!r}: {exc}") from None
        weights = (self.unknown_vehicle_weight.values()
                   if isinstance(self.unknown_vehicle_weight, Mapping) else [self.unknown_vehicle_weight])
        for w in weights:
            if not 0.0 <= float(w) <= 1.0:
                raise ConfigError(f"{self.source_name}: unknown_vehicle_weight {w} outside [0, 1]")

    def weight_for(self, location: str) -> float:
        w = self.unknown_vehicle_weight
        if isinstance(w, Mapping):
            if location not in w:
                raise RowError(f"no unknown-vehicle weight for {location}")
            return float(w[location])
        return float(w)

    def referenced_columns(self) -> list[str]:
        cols: list[str] = []
        for e in self.field_map:
            if e.source_column is not None:
                cols.append(e.source_column)
            cols += e.template_columns()
            for when, _ in e.cases:
                _compile_predicate(when, cols, self.source_name)
        for name, pred in self.rules:
            _compile_predicate(pred, cols, f"{self.source_name}:{name}")
        if self.dedupe:
            cols += [self.dedupe["key"], self.dedupe["version"]]
        return list(dict.fromkeys(cols))


def _entry(raw: Mapping, source: str) -> FieldEntry:
    if "field" not in raw:
        raise ConfigError(f"{source}: field_map entry without 'field': {raw!r}")
    vm = tuple(ValueRule(str(v["pattern"]), str(v["value"])) for v in raw.get("value_map", ()))
    for v in vm:
        _regex(v.pattern, source)
    cases = tuple((c["when"], str(c["value"])) for c in raw.get("cases", ()))
    opt = lambda k: None if raw.get(k) is None else str(raw[k])  # noqa: E731
    return FieldEntry(raw["field"], raw.get("column"), vm, cases, opt("default"), opt("otherwise"), opt("const"),
                      opt("template"))


def config_from_dict(data: Mapping, source: str = "<config>") -> MappingConfig:
    if not isinstance(data, Mapping) or "source_name" not in data:
        raise ConfigError(f"{source}: config must be a mapping with source_name")
    unknown = set(data) - {"source_name", "kind", "delimiter", "field_map", "rules",
                           "unknown_vehicle_weight", "dedupe", "notes"}
    if unknown:
        raise ConfigError(f"{source}: unknown keys {sorted(unknown)}")
    delim = data.get("delimiter", ",")
    if delim in ("tab", "\\t"):
        delim = "\t"
    return MappingConfig(
        source_name=str(data["source_name"]),
        kind=data.get("kind", "crash"),
        field_map=tuple(_entry(e, source) for e in data.get("field_map", ())),
        rules=tuple((str(k), v) for k, v in (data.get("rules") or {}).items()),
        unknown_vehicle_weight=data.get("unknown_vehicle_weight", 1.0),
        delimiter=delim,
        dedupe=data.get("dedupe"),
        notes=str(data.get("notes", "")),
    )


def load_config(path: str | Path) -> MappingConfig:
    try:
        with open(path, encoding="utf-8") as fh:
            data = yaml.safe_load(fh)
    except yaml.YAMLError as exc:
        raise ConfigError(f"{path}: {exc}") from None
    return config_from_dict(data, str(path))


def builtin_config(name: str) -> MappingConfig:
    """One of the configs shipped in ``crashbench/configs``."""
    ref = resources.files("crashbench") / "configs" / f"{name}.yaml"
    if not ref.is_file():
        raise ConfigError(f"no built-in config {name!r}")
    return config_from_dict(yaml.safe_load(ref.read_text(encoding="utf-8")), name)


# --- report ----------------------------------------------------------------------

@dataclass(frozen=True)
class IngestReport:
    source: str
    rows_read: int
    rows_emitted: int
    rows_dropped_by_rule: Mapping[str, int] = field(default_factory=dict)
    unmapped_values: tuple[tuple[str, str, int], ...] = ()
    errors: tuple[str, ...] = ()

    def __post_init__(self):
        if self.rows_read != self.rows_emitted + sum(self.rows_dropped_by_rule.values()):
            raise ValueError("rows_read must equal emitted + dropped")

    @staticmethod
    def merge(reports: Sequence["IngestReport"], source: str = "merged") -> "IngestReport":
        dropped: Counter = Counter()
        unmapped: Counter = Counter()
        for r in reports:
            dropped.update(r.rows_dropped_by_rule)
            unmapped.update({(c, v): n for c, v, n in r.unmapped_values})
        return IngestReport(
            source, sum(r.rows_read for r in reports), sum(r.rows_emitted for r in reports),
            dict(sorted(dropped.items())),
            tuple((c, v, n) for (c, v), n in sorted(unmapped.items())),
            tuple(e for r in reports for e in r.errors),
        )


class _Tally:
    def __init__(self, source: str):
        self.source = source
        self.read = 0
        self.emitted = 0
        self.dropped: Counter = Counter()
        self.unmapped: Counter = Counter()
        self.errors: list[str] = []

    def drop(self, rule: str, message: Optional[str] = None):
        self.dropped[rule] += 1
        if message and len(self.errors) < 100:
            self.errors.append(message)

    def report(self) -> IngestReport:
        return IngestReport(
            self.source, self.read, self.emitted, dict(sorted(self.dropped.items())),
            tuple((c, v, n) for (c, v), n in sorted(self.unmapped.items())), tuple(self.errors),
        )


# --- row mapping -------------------------------------------------------------------

class _Unmapped(RowError):
    def __init__(self, column: str, value: str):
        super().__init__(f"unmapped value {value!r} in column {column!r}")
        self.column, self.value = column, value


class _Mapper:
    def __init__(self, config: MappingConfig, header: Sequence[str]):
        self.config = config
        cols = config.referenced_columns()
        missing = [c for c in cols if c not in header]
        if missing:
            raise ConfigError(f"{config.source_name}: column(s) not in file header: {', '.join(missing)}")
        self.rules = [(name, _compile_predicate(p, [], name)) for name, p in config.rules]
        self.entries = []
        for e in config.field_map:
            rules = [(re.compile(v.pattern), v.value) for v in e.value_map]
            cases = [(_compile_predicate(w, [], e.canonical_field), v) for w, v in e.cases]
            self.entries.append((e, rules, cases))
        self.converters = EXPOSURE_FIELDS if config.kind == "exposure" else CRASH_FIELDS

    def _value(self, e: FieldEntry, rules, cases, row) -> Optional[str]:
        for pred, value in cases:
            if pred(row):
                return value
        if e.const is not None:
            return e.const
        if e.template is not None:
            parts = {c: (row.get(c) or "").strip() for c in e.template_columns()}
            return e.template.format_map(parts) if all(parts.values()) else e.default
        if e.source_column is None:
            return None
        raw = (row.get(e.source_column) or "").strip()
        if raw == "":
            return e.default
        if not rules:
            return raw
        hits = [(m, value) for m, value in ((rx.fullmatch(raw), v) for rx, v in rules) if m]
        if len(hits) > 1:
            raise ConfigError(f"{self.config.source_name}: ambiguous value_map for column "
                              f"{e.source_column!r}: {raw!r} matches {len(hits)} patterns")
        if hits:
            m, value = hits[0]
            return m.expand(value)
        if e.otherwise is not None:
            return e.otherwise
        raise _Unmapped(e.source_column, raw)

    def fields(self, row: Mapping[str, str]) -> dict[str, Any]:
        out: dict[str, Any] = {}
        for e, rules, cases in self.entries:
            value = self._value(e, rules, cases, row)
            if value is None or value == "":
                continue
            conv = self.converters[e.canonical_field](value)
            prev = out.get(e.canonical_field)
            if prev is None:
                out[e.canonical_field] = conv
            elif isinstance(conv, bool):
                out[e.canonical_field] = prev or conv
            elif isinstance(conv, Injury) and conv.rank > prev.rank:
                out[e.canonical_field] = conv
        return out

    def failed_rule(self, row: Mapping[str, str]) -> Optional[str]:
        for name, pred in self.rules:
            if not pred(row):
                return name
        return None


def _read_rows(path: str | Path, delimiter: str) -> tuple[list[str], list[dict[str, str]]]:
    try:
        with open(path, newline="", encoding="utf-8-sig") as fh:
            reader = csv.DictReader(fh, delimiter=delimiter)
            header = list(reader.fieldnames or [])
            if not header:
                raise ParseError(f"{path}: no header row")
            rows = list(reader)
    except (OSError, UnicodeDecodeError, csv.Error) as exc:
        raise ParseError(f"{path}: {exc}") from exc
    return header, rows


def _dedupe(rows: list[dict[str, str]], spec: Mapping[str, str], tally: _Tally) -> list[dict[str, str]]:
    """Keep the highest report version per key, preserving file order."""
    key, version = spec["key"], spec["version"]
    best: dict[str, tuple[float, int]] = {}
    for i, row in enumerate(rows):
        try:
            v = float(row.get(version) or 0)
        except ValueError:
            v = 0.0
        k = (row.get(key) or "").strip()
        if k not in best or v > best[k][0]:
            best[k] = (v, i)
    keep = {i for _, i in best.values()}
    for i in range(len(rows)):
        if i not in keep:
            tally.drop(SUPERSEDED)
    return [r for i, r in enumerate(rows) if i in keep]


def _record(f: dict[str, Any], config: MappingConfig) -> CrashRecord:
    if "crash_id" not in f or "location" not in f or "subject.body_class" not in f:
        raise RowError("crash_id, location and subject.body_class are required")
    subject = Actor(f["subject.body_class"], f.get("subject.role_order", 1), f.get("subject.in_transport", True))
    partner = None
    if "partner.body_class" in f:
        partner = Actor(f["partner.body_class"], f.get("partner.role_order", subject.role_order + 1),
                        f.get("partner.in_transport", True))
    coords = None
    if "coordinates.lat" in f or "coordinates.lon" in f:
        if "coordinates.lat" not in f or "coordinates.lon" not in f:
            raise RowError("half a coordinate pair")
        coords = (f["coordinates.lat"], f["coordinates.lon"])
    kin = None
    if "annotations.stopped_duration_s" in f or "annotations.peak_deceleration_mps2" in f:
        kin = Kinematics(f.get("annotations.stopped_duration_s", 0.0),
                         f.get("annotations.peak_deceleration_mps2", 0.0))
    location = Location(f["location"])
    weight = f.get("weight")
    if weight is None:
        weight = config.weight_for(location.name) if subject.body_class is BodyClass.UnknownVehicle else 1.0
    return CrashRecord(
        crash_id=f["crash_id"],
        subject=subject,
        location=location,
        partner=partner,
        coordinates=coords,
        road_class=f.get("road_class", RoadClass.Unknown),
        sequence_position=f.get("sequence_position", 1),
        configuration=f.get("configuration", Configuration.OtherOrUnknown),
        severity=Severity(
            f.get("severity.max_injury", Injury.NONE),
            f.get("severity.any_airbag_any_vehicle", False),
            f.get("severity.police_reported", False),
            f.get("severity.police_confirmed_serious"),
        ),
        annotations=Annotations(f.get("annotations.initiator_role"), f.get("annotations.f2r_role"), kin),
        weight=weight,
    )


def _parse(path, config: MappingConfig, build: Callable[[dict[str, Any]], Any],
           required: Sequence[str] = ()) -> tuple[list, IngestReport]:
    header, rows = _read_rows(path, config.delimiter)
    absent = [c for c in required if c not in header]
    if absent:
        raise ParseError(f"{path}: required column(s) missing: {', '.join(absent)}")
    mapper = _Mapper(config, header)
    tally = _Tally(config.source_name)
    tally.read = len(rows)
    if config.dedupe:
        rows = _dedupe(rows, config.dedupe, tally)
    out = []
    for lineno, row in enumerate(rows, start=2):
        if None in row:  # more cells than header fields
            tally.drop(PARSE_ERROR, f"{path}: row {lineno}: too many fields")
            continue
        rule = mapper.failed_rule(row)
        if rule is not None:
            tally.drop(rule)
            continue
        try:
            out.append(build(mapper.fields(row)))
        except _Unmapped as exc:
            tally.unmapped[(exc.column, exc.value)] += 1
            tally.drop(PARSE_ERROR, f"{path}: row {lineno}: {exc}")
        except (RowError, ModelError) as exc:
            tally.drop(PARSE_ERROR, f"{path}: row {lineno}: {exc}")
    tally.emitted = len(out)
    return out, tally.report()


def parse_crash_file(path: str | Path, config: MappingConfig) -> tuple[list[CrashRecord], IngestReport]:
    if config.kind == "exposure":
        raise ConfigError(f"{config.source_name} is an exposure config")
    records, report = _parse(path, config, lambda f: _record(f, config))
    return sorted(records, key=lambda r: r.crash_id), report


SGO_SEVERITY_COLUMN = "Highest Injury Severity Alleged"


def parse_sgo_file(path: str | Path, config: Optional[MappingConfig] = None
                   ) -> tuple[list[CrashRecord], IngestReport]:
    """ADS incident reports plus review annotation columns, via the built-in ``sgo`` config."""
    config = config or builtin_config("sgo")
    records, report = _parse(path, config, lambda f: _record(f, config), required=(SGO_SEVERITY_COLUMN,))
    return sorted(records, key=lambda r: r.crash_id), report


def _exposure_row(f: dict[str, Any]) -> ExposureRow:
    if "location" not in f or "miles" not in f:
        raise RowError("location and miles are required")
    if f["miles"] < 0:
        raise RowError(f"negative miles {f['miles']}")
    return ExposureRow(Location(f["location"]), f.get("road_class", RoadClass.Unknown), f["miles"],
                       f.get("vehicle_class", VehicleClass.All), f.get("cell"))


def parse_exposure(path: str | Path, config: MappingConfig) -> tuple[ExposureTable, IngestReport]:
    if config.kind != "exposure":
        raise ConfigError(f"{config.source_name} is not an exposure config")
    rows, report = _parse(path, config, _exposure_row)
    return ExposureTable(tuple(rows)), report


def parse_many(paths: Sequence[str | Path], config: MappingConfig, jobs: int = 1
               ) -> tuple[list[CrashRecord], IngestReport]:
    """Parse several files (in parallel when jobs > 1) and merge by crash_id."""
    parse = parse_sgo_file if config.kind == "sgo" else parse_crash_file
    if jobs > 1:
        with ThreadPoolExecutor(max_workers=jobs) as pool:
            parts = list(pool.map(lambda p: parse(p, config), paths))
    else:
        parts = [parse(p, config) for p in paths]
    records = sorted((r for recs, _ in parts for r in recs), key=lambda r: r.crash_id)
    ids = [r.crash_id for r in records]
    if len(ids) != len(set(ids)):
        dup = sorted({i for i in ids if ids.count(i) > 1})
        raise ParseError(f"duplicate crash_id across inputs: {dup[:5]}")
    return records, IngestReport.merge([rep for _, rep in parts], config.source_name)


# --- canonical CSV ---------------------------------------------------------------

CANONICAL_COLUMNS = (
    "crash_id", "location", "lat", "lon", "road_class", "sequence_position", "configuration",
    "subject_body_class", "subject_role_order", "subject_in_transport",
    "partner_body_class", "partner_role_order", "partner_in_transport",
    "max_injury", "any_airbag_any_vehicle", "police_reported", "police_confirmed_serious",
    "initiator_role", "f2r_role", "stopped_duration_s", "peak_deceleration_mps2", "weight",
)


def _b(x: Optional[bool]) -> str:
    return "" if x is None else ("true" if x else "false")


def _f(x: Optional[float]) -> str:
    return "" if x is None else repr(float(x))


def _e(x) -> str:
    return "" if x is None else x.value


def record_to_row(r: CrashRecord) -> list[str]:
    lat, lon = r.coordinates if r.coordinates is not None else (None, None)
    p = r.partner
    k = r.annotations.kinematics
    return [
        r.crash_id, r.location.name, _f(lat), _f(lon), r.road_class.value, str(r.sequence_position),
        r.configuration.value, r.subject.body_class.value, str(r.subject.role_order),
        _b(r.subject.in_transport),
        _e(p.body_class) if p else "", str(p.role_order) if p else "", _b(p.in_transport) if p else "",
        r.severity.max_injury.value, _b(r.severity.any_airbag_any_vehicle),
        _b(r.severity.police_reported), _b(r.severity.police_confirmed_serious),
        _e(r.annotations.initiator_role), _e(r.annotations.f2r_role),
        _f(k.stopped_duration_s if k else None), _f(k.peak_deceleration_mps2 if k else None),
        _f(r.weight),
    ]


def record_from_row(row: Mapping[str, str]) -> CrashRecord:
    g = lambda k: row.get(k, "")  # noqa: E731
    opt = lambda k, conv: conv(g(k)) if g(k) != "" else None  # noqa: E731
    partner = None
    if g("partner_body_class"):
        partner = Actor(BodyClass(g("partner_body_class")), int(g("partner_role_order")),
                        _to_bool(g("partner_in_transport")))
    kin = None
    if g("stopped_duration_s") or g("peak_deceleration_mps2"):
        kin = Kinematics(float(g("stopped_duration_s")), float(g("peak_deceleration_mps2")))
    coords = (float(g("lat")), float(g("lon"))) if g("lat") else None
    return CrashRecord(
        crash_id=g("crash_id"),
        subject=Actor(BodyClass(g("subject_body_class")), int(g("subject_role_order")),
                      _to_bool(g("subject_in_transport"))),
        location=Location(g("location")),
        partner=partner,
        coordinates=coords,
        road_class=RoadClass(g("road_class")),
        sequence_position=int(g("sequence_position")),
        configuration=Configuration(g("configuration")),
        severity=Severity(Injury(g("max_injury")), _to_bool(g("any_airbag_any_vehicle")),
                          _to_bool(g("police_reported")), opt("police_confirmed_serious", _to_bool)),
        annotations=Annotations(opt("initiator_role", InitiatorRole), opt("f2r_role", F2RRole), kin),
        weight=float(g("weight")),
    )


def write_canonical(path: str | Path, records: Iterable[CrashRecord],
                    extra: Optional[Callable[[CrashRecord], Sequence[str]]] = None,
                    extra_columns: Sequence[str] = ()) -> None:
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(list(CANONICAL_COLUMNS) + list(extra_columns))
        for r in sorted(records, key=lambda r: r.crash_id):
            w.writerow(record_to_row(r) + (list(extra(r)) if extra else []))


def read_canonical(path: str | Path) -> list[CrashRecord]:
    header, rows = _read_rows(path, ",")
    missing = [c for c in CANONICAL_COLUMNS if c not in header]
    if missing:
        raise ParseError(f"{path}: not a canonical file, missing {missing}")
    out = []
    for lineno, row in enumerate(rows, start=2):
        try:
            out.append(record_from_row(row))
        except (ValueError, KeyError) as exc:
            raise ParseError(f"{path}: row {lineno}: {exc}") from exc
    return out


# --- ADS mileage -----------------------------------------------------------------

def read_ads_miles(path: str | Path) -> dict[str, float]:
    """Two-column file (location, miles)."""
    header, rows = _read_rows(path, ",")
    if "location" not in header or "miles" not in header:
        raise ParseError(f"{path}: expected columns location, miles")
    out: dict[str, float] = {}
    for lineno, row in enumerate(rows, start=2):
        try:
            miles = _to_float(row["miles"])
        except RowError as exc:
            raise ParseError(f"{path}: row {lineno}: {exc}") from None
        if miles < 0:
            raise ParseError(f"{path}: row {lineno}: negative miles")
        loc = Location(row["location"].strip()).name
        if loc in out:
            raise ParseError(f"{path}: duplicate location {loc}")
        out[loc] = miles
    return out
