"""Command-line pipeline: ingest -> classify -> benchmark -> compare -> report.

Stages communicate through files in one run directory (``--out``).  Each stage
reads the pipeline config (``--config``), consumes the previous stage's files
(from ``--input`` when given, else ``--out``) and records its outcome in
``manifest.json``.

Exit codes: 0 ok, 2 usage, 3 config error, 4 parse error, 5 data gap,
6 I/O error.
"""

from __future__ import annotations

import argparse
import csv
import hashlib
import json
import logging
import os
import sys
from dataclasses import dataclass, field, replace
from datetime import datetime, timezone
from pathlib import Path
from typing import Any, Callable, Optional, Sequence

import yaml

from . import __version__
from .benchmark import (
    BenchmarkConfig,
    BenchmarkError,
    DataGapError,
    HumanInputs,
    read_benchmarks,
    read_cell_miles,
    regrid_published,
    sensitivity_grid,
    build_benchmarks,
    split_f2r,
    write_benchmarks,
)
from .classify import ClassifiedRecord, classify_all, event_counts
from .ingest import (
    ConfigError,
    IngestReport,
    ParseError,
    builtin_config,
    load_config,
    parse_exposure,
    parse_many,
    read_ads_miles,
    read_canonical,
    write_canonical,
)
from .model import (
    CrashType,
    CrashTypeGroup,
    ExposureTable,
    F2RRole,
    OutcomeLevel,
)
from .report import (
    ReportError,
    ReportSpec,
    emit_comparison_table,
    emit_event_counts,
    emit_movement_table,
    emit_sensitivity_grid,
    read_comparison_table,
)
from .simulate import ScenarioError, load_scenario, write_outputs
from .stats import StatsError, compare

log = logging.getLogger("crashbench")

EXIT_OK, EXIT_USAGE, EXIT_CONFIG, EXIT_PARSE, EXIT_GAP, EXIT_IO = 0, 2, 3, 4, 5, 6
STAGES = ("ingest", "classify", "benchmark", "compare", "report")


class CliError(Exception):
    code = EXIT_CONFIG
    category = "config"


class GapError(CliError):
    code = EXIT_GAP
    category = "data-gap"


# file names inside the run directory
ADS_RECORDS = "ads_records.csv"
HUMAN_RECORDS = "human_records.csv"
EXPOSURE = "human_exposure.csv"
ADS_CLASSIFIED = "ads_classified.csv"
HUMAN_CLASSIFIED = "human_classified.csv"
BENCHMARKS = "benchmarks.csv"
COMPARISONS = "comparisons.csv"
GAPS = "gaps.csv"
MANIFEST = "manifest.json"
REPORT_DIR = "report"


# --- configuration -------------------------------------------------------------------

def _on_off(v: Any) -> bool:
    if isinstance(v, bool):
        return v
    if str(v).lower() in ("on", "true", "yes", "1"):
        return True
    if str(v).lower() in ("off", "false", "no", "0"):
        return False
    raise ConfigError(f"expected on/off, got {v!r}")


@dataclass(frozen=True)
class PipelineConfig:
    path: Path
    base: Path
    ads: dict
    human: dict
    alpha: float = 0.05
    underreporting: bool = True
    factor: float = 1.47
    dynamic: bool = True
    zero_mile_policy: str = "abort"
    count_rule: str = "moment"
    cell_level: int = 13
    jobs: int = 1
    report: dict = field(default_factory=dict)

    def resolve(self, p: str | Path) -> Path:
        p = Path(p)
        return p if p.is_absolute() else self.base / p

    def input_paths(self) -> list[Path]:
        out = []
        for section in (self.ads, self.human):
            for key, v in section.items():
                if key in ("config", "crash_config", "exposure_config", "vm4_passenger_share"):
                    continue
                for item in (v if isinstance(v, list) else [v]):
                    if isinstance(item, str):
                        out.append(self.resolve(item))
        return out

    def config_paths(self) -> list[Path]:
        out = [self.path]
        for section, key in ((self.ads, "config"), (self.human, "crash_config"), (self.human, "exposure_config")):
            v = section.get(key)
            if v and (v.endswith(".yaml") or v.endswith(".yml")):
                out.append(self.resolve(v))
        return out

    def benchmark_config(self) -> BenchmarkConfig:
        return BenchmarkConfig(
            underreporting=self.underreporting, factor=self.factor, dynamic=self.dynamic,
            zero_mile_policy=self.zero_mile_policy, count_rule=self.count_rule,
            vm4_passenger_share=dict(self.human.get("vm4_passenger_share") or {}),
            cell_level=self.cell_level,
        )

    def report_spec(self, fmt: Optional[Sequence[str]] = None) -> ReportSpec:
        r = self.report
        locs = r.get("locations")
        return ReportSpec(
            outcomes=tuple(r.get("outcomes") or [o.value for o in
                                                   (OutcomeLevel.AnyInjuryReported, OutcomeLevel.AirbagDeployment,
                                                    OutcomeLevel.SuspectedSeriousInjuryPlus)]),
            locations=tuple(locs) if locs else None,
            crash_types=r.get("crash_types", "all"),
            formats=tuple(fmt or r.get("formats") or ("csv",)),
        )


def load_pipeline(path: str | Path, args: argparse.Namespace) -> PipelineConfig:
    path = Path(path)
    try:
        with open(path, encoding="utf-8") as fh:
            data = yaml.safe_load(fh) or {}
    except OSError as exc:
        raise ConfigError(f"cannot read config {path}: {exc}") from None
    except yaml.YAMLError as exc:
        raise ConfigError(f"{path}: {exc}") from None
    if not isinstance(data, dict):
        raise ConfigError(f"{path}: top level must be a mapping")
    unknown = set(data) - {"ads", "human", "parameters", "report"}
    if unknown:
        raise ConfigError(f"{path}: unknown sections {sorted(unknown)}")
    params = data.get("parameters") or {}
    bad = set(params) - {"alpha", "underreporting", "factor", "dynamic", "zero_mile_policy",
                         "count_rule", "cell_level", "jobs"}
    if bad:
        raise ConfigError(f"{path}: unknown parameters {sorted(bad)}")
    cfg = PipelineConfig(
        path=path, base=path.resolve().parent,
        ads=dict(data.get("ads") or {}), human=dict(data.get("human") or {}),
        alpha=float(params.get("alpha", 0.05)),
        underreporting=_on_off(params.get("underreporting", True)),
        factor=float(params.get("factor", 1.47)),
        dynamic=_on_off(params.get("dynamic", True)),
        zero_mile_policy=str(params.get("zero_mile_policy", "abort")),
        count_rule=str(params.get("count_rule", "moment")),
        cell_level=int(params.get("cell_level", 13)),
        jobs=int(params.get("jobs", 1)),
        report=dict(data.get("report") or {}),
    )
    # command-line flags override the file
    over = {}
    if getattr(args, "alpha", None) is not None:
        over["alpha"] = args.alpha
    if getattr(args, "underreporting", None) is not None:
        over["underreporting"] = args.underreporting == "on"
    if getattr(args, "dynamic", None) is not None:
        over["dynamic"] = args.dynamic == "on"
    if getattr(args, "jobs", None) is not None:
        over["jobs"] = args.jobs
    cfg = replace(cfg, **over)
    if not 0 < cfg.alpha < 1:
        raise ConfigError(f"alpha must be in (0, 1), got {cfg.alpha}")
    if cfg.jobs < 1:
        raise ConfigError("jobs must be >= 1")
    if "miles" not in cfg.ads:
        raise ConfigError(f"{path}: ads.miles is required")
    if not ({"sgo", "canonical"} & set(cfg.ads)):
        raise ConfigError(f"{path}: ads.sgo or ads.canonical is required")
    if "benchmarks" not in cfg.human and not {"crashes", "exposure"} <= set(cfg.human) \
            and "cells" not in cfg.human:
        raise ConfigError(f"{path}: human.benchmarks, or human.crashes with exposure/cells, is required")
    return cfg


def _mapping(cfg: PipelineConfig, value: Optional[str], default: str):
    name = value or default
    if name.endswith(".yaml") or name.endswith(".yml"):
        return load_config(cfg.resolve(name))
    return builtin_config(name)


# --- manifest ------------------------------------------------------------------------

def _sha256(path: Path) -> str:
    h = hashlib.sha256()
    with open(path, "rb") as fh:
        for chunk in iter(lambda: fh.read(1 << 16), b""):
            h.update(chunk)
    return h.hexdigest()


def _digests(paths: Sequence[Path], base: Path) -> dict[str, str]:
    out = {}
    for p in paths:
        if p.is_file():
            try:
                key = str(p.resolve().relative_to(base.resolve()))
            except ValueError:
                key = str(p)
            out[key] = _sha256(p)
    return dict(sorted(out.items()))


def update_manifest(out: Path, cfg: Optional[PipelineConfig], stage: str, status: str,
                    outputs: Sequence[Path] = (), error: Optional[str] = None) -> None:
    path = out / MANIFEST
    manifest: dict = {}
    if path.is_file():
        try:
            manifest = json.loads(path.read_text(encoding="utf-8"))
        except (OSError, json.JSONDecodeError):
            manifest = {}
    manifest["tool"] = "crashbench"
    manifest["version"] = __version__
    manifest["timestamp"] = datetime.now(timezone.utc).isoformat(timespec="seconds")
    if cfg is not None:
        manifest["configs"] = _digests(cfg.config_paths(), cfg.base)
        manifest["inputs"] = _digests(cfg.input_paths(), cfg.base)
        manifest["parameters"] = {
            "alpha": cfg.alpha, "underreporting": cfg.underreporting, "factor": cfg.factor,
            "dynamic": cfg.dynamic, "zero_mile_policy": cfg.zero_mile_policy,
            "count_rule": cfg.count_rule, "cell_level": cfg.cell_level,
        }
    stages = manifest.setdefault("stages", {})
    entry = {"status": status, "outputs": _digests(list(outputs), out)}
    if error:
        entry["error"] = error
    stages[stage] = entry
    out.mkdir(parents=True, exist_ok=True)
    path.write_text(json.dumps(manifest, indent=2, sort_keys=True) + "\n", encoding="utf-8")


# --- stages ----------------------------------------------------------------------------

def _need(path: Path, stage: str) -> Path:
    if not path.is_file():
        raise GapError(f"missing {path.name} from the {stage} stage (looked in {path.parent})")
    return path


def _write_json(path: Path, data: Any) -> Path:
    path.write_text(json.dumps(data, indent=2, sort_keys=True) + "\n", encoding="utf-8")
    return path


def _report_dict(r: IngestReport) -> dict:
    return {
        "rows_read": r.rows_read, "rows_emitted": r.rows_emitted,
        "rows_dropped_by_rule": dict(r.rows_dropped_by_rule),
        "unmapped_values": [list(u) for u in r.unmapped_values],
        "errors": list(r.errors),
    }


def _write_exposure(path: Path, table: ExposureTable) -> Path:
    rows = sorted(table.rows, key=lambda r: (r.location.name, r.road_class.value, r.vehicle_class.value,
                                              r.cell or "", r.miles))
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["location", "road_class", "vehicle_class", "cell", "miles"])
        for r in rows:
            w.writerow([r.location.name, r.road_class.value, r.vehicle_class.value, r.cell or "", repr(r.miles)])
    return path


def stage_ingest(cfg: PipelineConfig, out: Path, inputs: Optional[Sequence[str]] = None) -> list[Path]:
    outputs = []
    reports = {}
    if inputs:
        ads_paths = [Path(p) for p in inputs]
    else:
        raw = cfg.ads.get("sgo") or cfg.ads.get("canonical")
        ads_paths = [cfg.resolve(p) for p in (raw if isinstance(raw, list) else [raw])]
    if "sgo" in cfg.ads or inputs:
        records, rep = parse_many(ads_paths, _mapping(cfg, cfg.ads.get("config"), "sgo"), cfg.jobs)
        reports["ads"] = _report_dict(rep)
    else:
        records = sorted((r for p in ads_paths for r in read_canonical(p)), key=lambda r: r.crash_id)
    write_canonical(out / ADS_RECORDS, records)
    outputs.append(out / ADS_RECORDS)

    if "crashes" in cfg.human:
        paths = [cfg.resolve(p) for p in cfg.human["crashes"]]
        conf = cfg.human.get("crash_config", "canonical")
        if conf == "canonical":
            human = sorted((r for p in paths for r in read_canonical(p)), key=lambda r: r.crash_id)
        else:
            human, rep = parse_many(paths, _mapping(cfg, conf, conf), cfg.jobs)
            reports["human"] = _report_dict(rep)
        write_canonical(out / HUMAN_RECORDS, human)
        outputs.append(out / HUMAN_RECORDS)
    if "exposure" in cfg.human:
        table, rep = parse_exposure(cfg.resolve(cfg.human["exposure"]),
                                    _mapping(cfg, cfg.human.get("exposure_config"), "canonical_exposure"))
        reports["exposure"] = _report_dict(rep)
        bad = table.check_cell_totals()
        if bad:
            log.warning("cell-level miles differ from location totals by > 0.1%% for: %s", ", ".join(bad))
        outputs.append(_write_exposure(out / EXPOSURE, table))
    outputs.append(_write_json(out / "ingest_report.json", reports))
    for name, rep in reports.items():
        if rep["unmapped_values"]:
            log.warning("%s: %d unmapped value(s); see ingest_report.json", name, len(rep["unmapped_values"]))
    return outputs


CLASS_COLUMNS = ("crash_type_group", "f2r_role", "outcomes", "pre_crash_movement")


def _class_cols(records: Sequence[ClassifiedRecord]) -> dict:
    return {c.record.crash_id: c for c in records}


def write_classified(path: Path, classified: Sequence[ClassifiedRecord]) -> Path:
    by_id = _class_cols(classified)

    def extra(r):
        c = by_id[r.crash_id]
        return [c.crash_type.group.value, c.crash_type.f2r_role.value if c.crash_type.f2r_role else "",
                ";".join(sorted(o.value for o in c.outcomes)), c.movement.value if c.movement else ""]
    write_canonical(path, [c.record for c in classified], extra, CLASS_COLUMNS)
    return path


def read_classified(path: Path) -> list[ClassifiedRecord]:
    """Classified files carry their labels; records are re-read from the canonical columns."""
    from .classify import PreCrashMovement
    from .ingest import record_from_row

    out = []
    with open(path, newline="", encoding="utf-8") as fh:
        reader = csv.DictReader(fh)
        missing = [c for c in CLASS_COLUMNS if c not in (reader.fieldnames or [])]
        if missing:
            raise ParseError(f"{path}: not a classified file, missing {missing}")
        for row in reader:
            role = F2RRole(row["f2r_role"]) if row["f2r_role"] else None
            out.append(ClassifiedRecord(
                record=record_from_row(row),
                crash_type=CrashType(CrashTypeGroup(row["crash_type_group"]), role),
                outcomes=frozenset(OutcomeLevel(o) for o in row["outcomes"].split(";") if o),
                movement=PreCrashMovement(row["pre_crash_movement"]) if row["pre_crash_movement"] else None,
            ))
    return out


def stage_classify(cfg: PipelineConfig, out: Path, src: Path) -> list[Path]:
    outputs = [write_classified(out / ADS_CLASSIFIED, classify_all(read_canonical(_need(src / ADS_RECORDS, "ingest"))))]
    if (src / HUMAN_RECORDS).is_file():
        outputs.append(write_classified(out / HUMAN_CLASSIFIED, classify_all(read_canonical(src / HUMAN_RECORDS))))
    elif "crashes" in cfg.human:
        _need(src / HUMAN_RECORDS, "ingest")
    return outputs


def _variant_file(ur: bool, dyn: bool) -> str:
    return f"benchmarks_ur_{'on' if ur else 'off'}_dyn_{'on' if dyn else 'off'}.csv"


def _human_inputs(cfg: PipelineConfig, src: Path) -> HumanInputs:
    records: tuple = ()
    if "crashes" in cfg.human:
        records = tuple(read_classified(_need(src / HUMAN_CLASSIFIED, "classify")))
    exposure = ExposureTable()
    if "exposure" in cfg.human:
        exposure, _ = parse_exposure(_need(src / EXPOSURE, "ingest"), builtin_config("canonical_exposure"))
    cells = tuple(read_cell_miles(cfg.resolve(cfg.human["cells"]))) if "cells" in cfg.human else ()
    ads_miles = read_ads_miles(cfg.resolve(cfg.ads["miles"]))
    return HumanInputs(records, exposure, cells, ads_miles)


def _with_split(rates):
    have = {r.key for r in rates}
    extra = [h for r in rates if r.crash_type == CrashTypeGroup.V2VF2R.value for h in split_f2r(r)
             if h.key not in have]
    return sorted(list(rates) + extra, key=lambda r: r.sort_key())


def stage_benchmark(cfg: PipelineConfig, out: Path, src: Path, sensitivity: bool = True) -> list[Path]:
    outputs = []
    if "benchmarks" in cfg.human:
        published = read_benchmarks(cfg.resolve(cfg.human["benchmarks"]))
        if not cfg.dynamic and any(r.dynamic_applied for r in published):
            raise GapError("--dynamic off needs human crashes and cell miles; "
                           "the precomputed benchmarks only carry dynamically adjusted rates")
        rates = _with_split(regrid_published(published, cfg.underreporting, cfg.factor))
        write_benchmarks(out / BENCHMARKS, rates)
        outputs.append(out / BENCHMARKS)
        if sensitivity:
            for ur in (True, False):
                name = _variant_file(ur, True)
                write_benchmarks(out / name, _with_split(regrid_published(published, ur, cfg.factor)))
                outputs.append(out / name)
        return outputs
    inputs = _human_inputs(cfg, src)
    bcfg = cfg.benchmark_config()
    write_benchmarks(out / BENCHMARKS, build_benchmarks(inputs, bcfg))
    outputs.append(out / BENCHMARKS)
    if sensitivity:
        can_dynamic = bool(inputs.cells)
        can_static = bool(inputs.exposure.rows)
        for (ur, dyn), rates in sorted(_grid(inputs, bcfg, can_static, can_dynamic).items(), reverse=True):
            write_benchmarks(out / _variant_file(ur, dyn), rates)
            outputs.append(out / _variant_file(ur, dyn))
    return outputs


def _grid(inputs, bcfg, can_static, can_dynamic):
    if can_static and can_dynamic:
        return sensitivity_grid(inputs, bcfg)
    dyn = can_dynamic
    return {(ur, dyn): build_benchmarks(inputs, replace(bcfg, underreporting=ur, dynamic=dyn))
            for ur in (True, False)}


def _write_gaps(path: Path, gaps) -> Path:
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["location", "outcome", "crash_type", "reason"])
        for g in gaps:
            w.writerow([g.location, g.outcome, g.crash_type, g.reason])
    return path


def _comparisons(cfg: PipelineConfig, src: Path, bench_path: Path):
    classified = read_classified(_need(src / ADS_CLASSIFIED, "classify"))
    counts = event_counts(classified)
    ads_miles = read_ads_miles(cfg.resolve(cfg.ads["miles"]))
    benches = read_benchmarks(bench_path)
    # every benchmark key is requested; missing ADS miles surface as gaps
    return compare(counts, ads_miles, benches, cfg.alpha, jobs=cfg.jobs)


def stage_compare(cfg: PipelineConfig, out: Path, src: Path) -> list[Path]:
    results, gaps = _comparisons(cfg, src, _need(src / BENCHMARKS, "benchmark"))
    spec = ReportSpec(crash_types="all", formats=("csv",))
    outputs = emit_comparison_table(results, spec, out, stem=COMPARISONS[:-4])
    outputs.append(_write_gaps(out / GAPS, gaps))
    if gaps:
        log.warning("%d comparison cell(s) without a result; see %s", len(gaps), GAPS)
    for path in sorted(src.glob("benchmarks_ur_*.csv")):
        variant = path.stem[len("benchmarks_"):]
        res, _ = _comparisons(cfg, src, path)
        outputs += emit_comparison_table(res, spec, out, stem=f"comparisons_{variant}")
    return outputs


def stage_report(cfg: PipelineConfig, out: Path, src: Path, fmt: Optional[Sequence[str]] = None) -> list[Path]:
    spec = cfg.report_spec(fmt)
    rdir = out / REPORT_DIR
    results = read_comparison_table(_need(src / COMPARISONS, "compare"))
    outputs = emit_comparison_table(results, spec, rdir)
    classified = read_classified(_need(src / ADS_CLASSIFIED, "classify"))
    outputs += emit_event_counts(classified, rdir, spec.formats)
    outputs += emit_movement_table(classified, rdir, spec.formats)
    grid = {}
    for path in sorted(src.glob("comparisons_ur_*.csv")):
        parts = path.stem.split("_")  # comparisons_ur_on_dyn_off
        grid[(parts[2] == "on", parts[4] == "on")] = spec.select(read_comparison_table(path))
    if grid and cfg.report.get("sensitivity", True):
        outputs += emit_sensitivity_grid(grid, rdir, spec.formats)
    return outputs


# --- command plumbing ---------------------------------------------------------------------

def _run_stage(name: str, args, fn: Callable[[PipelineConfig, Path], list[Path]]) -> int:
    out = Path(args.out)
    cfg = None
    try:
        cfg = load_pipeline(args.config, args)
        out.mkdir(parents=True, exist_ok=True)
        outputs = fn(cfg, out)
    except Exception as exc:  # categorized below; anything else is a bug and re-raised
        code, category = _categorize(exc)
        if code is None:
            raise
        log.error("%s failed [%s]: %s", name, category, exc)
        try:
            update_manifest(out, cfg, name, "failed", error=f"{category}: {exc}")
        except OSError:
            pass
        return code
    update_manifest(out, cfg, name, "ok", outputs)
    log.info("%s: wrote %d file(s) to %s", name, len(outputs), out)
    return EXIT_OK


def _categorize(exc: BaseException) -> tuple[Optional[int], str]:
    if isinstance(exc, CliError):
        return exc.code, exc.category
    if isinstance(exc, OSError) or isinstance(exc.__cause__, OSError):
        return EXIT_IO, "io"
    if isinstance(exc, DataGapError):
        return EXIT_GAP, "data-gap"
    if isinstance(exc, (ConfigError, ScenarioError, ReportError)):
        return EXIT_CONFIG, "config"
    if isinstance(exc, (ParseError, BenchmarkError, StatsError, ValueError)):
        return EXIT_PARSE, "parse"
    return None, ""


def _src(args) -> Path:
    return Path(args.input[0]) if getattr(args, "input", None) else Path(args.out)


def cmd_ingest(args) -> int:
    return _run_stage("ingest", args, lambda cfg, out: stage_ingest(cfg, out, args.input))


def cmd_classify(args) -> int:
    return _run_stage("classify", args, lambda cfg, out: stage_classify(cfg, out, _src(args)))


def cmd_benchmark(args) -> int:
    return _run_stage("benchmark", args, lambda cfg, out: stage_benchmark(cfg, out, _src(args)))


def cmd_compare(args) -> int:
    return _run_stage("compare", args, lambda cfg, out: stage_compare(cfg, out, _src(args)))


def cmd_report(args) -> int:
    return _run_stage("report", args, lambda cfg, out: stage_report(cfg, out, _src(args), args.format))


def cmd_pipeline(args) -> int:
    steps = [
        ("ingest", lambda cfg, out: stage_ingest(cfg, out, args.input)),
        ("classify", lambda cfg, out: stage_classify(cfg, out, out)),
        ("benchmark", lambda cfg, out: stage_benchmark(cfg, out, out)),
        ("compare", lambda cfg, out: stage_compare(cfg, out, out)),
        ("report", lambda cfg, out: stage_report(cfg, out, out, args.format)),
    ]
    for name, fn in steps:
        code = _run_stage(name, args, fn)
        if code != EXIT_OK:
            return code
    return EXIT_OK


def cmd_simulate(args) -> int:
    out = Path(args.out)
    try:
        scenario = load_scenario(args.config, args.seed)
        paths = write_outputs(scenario, out)
    except Exception as exc:
        code, category = _categorize(exc)
        if code is None:
            raise
        log.error("simulate failed [%s]: %s", category, exc)
        return code
    manifest = {
        "tool": "crashbench", "version": __version__,
        "timestamp": datetime.now(timezone.utc).isoformat(timespec="seconds"),
        "configs": _digests([Path(args.config)], Path(args.config).resolve().parent),
        "seed": scenario.seed,
        "stages": {"simulate": {"status": "ok", "outputs": _digests(list(paths.values()), out)}},
    }
    _write_json(out / MANIFEST, manifest)
    log.info("simulate: wrote %d file(s) to %s", len(paths), out)
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="crashbench", description=__doc__.split("\n")[0])
    p.add_argument("--version", action="version", version=f"crashbench {__version__}")
    sub = p.add_subparsers(dest="command", required=True)

    def common(sp, input_help):
        sp.add_argument("--config", required=True, help="pipeline config (YAML)")
        sp.add_argument("--out", required=True, help="run directory")
        sp.add_argument("--input", nargs="+", help=input_help)
        sp.add_argument("--alpha", type=float, help="two-sided CI level is 1 - alpha (default 0.05)")
        sp.add_argument("--underreporting", choices=("on", "off"), help="any-injury underreporting correction")
        sp.add_argument("--dynamic", choices=("on", "off"), help="spatial dynamic benchmark")
        sp.add_argument("--jobs", type=int, help="worker threads for parsing and comparisons")
        sp.add_argument("--format", choices=("csv", "md"), action="append", help="report format (repeatable)")
        sp.add_argument("--seed", type=int, help="accepted for uniformity; used by simulate")

    stage_help = "directory holding the previous stage's files (default: --out)"
    for name, fn, ih in [
        ("ingest", cmd_ingest, "ADS report file(s), overriding ads.sgo in the config"),
        ("classify", cmd_classify, stage_help),
        ("benchmark", cmd_benchmark, stage_help),
        ("compare", cmd_compare, stage_help),
        ("report", cmd_report, stage_help),
        ("pipeline", cmd_pipeline, "ADS report file(s), overriding ads.sgo in the config"),
    ]:
        sp = sub.add_parser(name, help=f"run the {name} stage" if name != "pipeline" else "run all stages")
        common(sp, ih)
        sp.set_defaults(func=fn)

    sp = sub.add_parser("simulate", help="write a seeded synthetic corpus with known rates")
    sp.add_argument("--config", required=True, help="scenario (YAML)")
    sp.add_argument("--out", required=True, help="output directory")
    sp.add_argument("--seed", type=int, help="overrides the scenario seed")
    sp.set_defaults(func=cmd_simulate)
    return p


def main(argv: Optional[Sequence[str]] = None) -> int:
    level = os.environ.get("CRASHBENCH_LOG", "WARNING").upper()
    logging.basicConfig(level=getattr(logging, level, logging.WARNING), stream=sys.stderr,
                        format="%(levelname)s %(name)s: %(message)s")
    args = build_parser().parse_args(argv)
    return args.func(args)


if __name__ == "__main__":
    sys.exit(main())
