import csv
import sys
from importlib import resources
from pathlib import Path

import pytest

sys.path.insert(0, str(Path(__file__).parent))

from crashbench.classify import classify_all  # noqa: E402
from crashbench.cli import main  # noqa: E402
from crashbench.ingest import parse_sgo_file  # noqa: E402

FIXTURES = Path(__file__).parent / "fixtures"
DATA = Path(str(resources.files("crashbench") / "data"))


def read_reference(group=None):
    with open(FIXTURES / "published_reference.csv", newline="", encoding="utf-8") as fh:
        rows = list(csv.DictReader(fh))
    return [r for r in rows if group is None or r["group"] in ((group,) if isinstance(group, str) else group)]


@pytest.fixture(scope="session")
def data_dir():
    return DATA


@pytest.fixture(scope="session")
def sgo_records():
    records, report = parse_sgo_file(DATA / "sgo_fixture.csv")
    return records, report


@pytest.fixture(scope="session")
def classified(sgo_records):
    return classify_all(sgo_records[0])


@pytest.fixture(scope="session")
def pipeline_run(tmp_path_factory):
    """The bundled example pipeline, run once per session."""
    out = tmp_path_factory.mktemp("run")
    assert main(["pipeline", "--config", str(DATA / "pipeline.yaml"), "--out", str(out)]) == 0
    return out


@pytest.fixture(scope="session")
def comparisons(pipeline_run):
    from crashbench.report import read_comparison_table

    return {r.key: r for r in read_comparison_table(pipeline_run / "comparisons.csv")}


def pytest_terminal_summary(terminalreporter):
    from acceptance_log import summary_lines

    lines = summary_lines()
    if lines:
        terminalreporter.section("acceptance criteria")
        for line in lines:
            terminalreporter.write_line(line)
