"""Randomized invariants, checked with hypothesis."""

import math

import pytest
from hypothesis import HealthCheck, assume, given, settings
from hypothesis import strategies as st

from crashbench.benchmark import blend_locations, dynamic_reweight, make_rate
from crashbench.classify import classify, tally
from crashbench.ingest import read_canonical, write_canonical
from crashbench.model import (
    Actor,
    Annotations,
    BodyClass,
    Configuration,
    CrashRecord,
    CrashTypeGroup,
    F2RRole,
    Injury,
    Kinematics,
    Location,
    RoadClass,
    SERIOUS_INJURIES,
    Severity,
)
from crashbench.stats import clopper_pearson
from oracles import clopper_pearson_tail, reweighted_rate

miles = st.floats(1e3, 1e9)
counts = st.integers(0, 500)


@st.composite
def cells(draw, min_size=1, max_size=12):
    n = draw(st.integers(min_size, max_size))
    return [(float(draw(counts)), draw(miles), draw(st.floats(0.0, 1e7))) for _ in range(n)]


def reweight(table):
    human = {f"c{i}": (c, h) for i, (c, h, _) in enumerate(table)}
    ads = {f"c{i}": a for i, (_, _, a) in enumerate(table)}
    return dynamic_reweight(human, ads)[0].rate


class TestClopperPearson:
    @given(st.integers(1, 40), st.integers(0, 40), st.sampled_from([0.05, 0.01]))
    @settings(max_examples=60, deadline=None)
    def test_matches_tail_oracle(self, n, x, alpha):
        assume(x <= n)
        lo, hi = clopper_pearson(x, n, alpha)
        olo, ohi = clopper_pearson_tail(x, n, alpha)
        assert lo == pytest.approx(olo, abs=1e-8) and hi == pytest.approx(ohi, abs=1e-8)

    @given(st.floats(1.0, 1e6), st.floats(0.0, 1.0), st.floats(0.0, 1.0))
    @settings(max_examples=80, deadline=None)
    def test_monotone_in_successes(self, n, u, v):
        x1, x2 = sorted((u * n, v * n))
        lo1, hi1 = clopper_pearson(x1, n)
        lo2, hi2 = clopper_pearson(x2, n)
        assert lo1 <= lo2 + 1e-9 and hi1 <= hi2 + 1e-9
        assert 0.0 <= lo1 <= x1 / n + 1e-9 <= hi1 + 2e-9 <= 1.0 + 2e-9


class TestReweight:
    @given(cells())
    @settings(max_examples=100, deadline=None)
    def test_convex_and_matches_oracle(self, table):
        assume(sum(a for *_, a in table) > 0)
        rate = reweight(table)
        visited = [1e6 * c / h for c, h, a in table if a > 0]
        assert min(visited) * (1 - 1e-9) <= rate <= max(visited) * (1 + 1e-9)
        assert rate == pytest.approx(reweighted_rate(table), rel=1e-9, abs=1e-12)

    @given(cells(), st.floats(1e-3, 1e3))
    @settings(max_examples=60, deadline=None)
    def test_ads_scale_invariance(self, table, k):
        assume(sum(a for *_, a in table) > 0)
        scaled = [(c, h, a * k) for c, h, a in table]
        assert reweight(scaled) == pytest.approx(reweight(table), rel=1e-9, abs=1e-12)


class TestBlend:
    @given(st.lists(st.tuples(st.floats(0.01, 20.0), st.floats(1.0, 1e7)), min_size=1, max_size=4))
    @settings(max_examples=80, deadline=None)
    def test_convex(self, parts):
        names = ["Phoenix", "SanFrancisco", "LosAngeles", "Austin"]
        rates = {names[i]: make_rate(names[i], "AnyInjuryReported", "All", r * 100, 1e8)
                 for i, (r, _) in enumerate(parts)}
        ads = {names[i]: m for i, (_, m) in enumerate(parts)}
        out = blend_locations(rates, ads).rate
        vals = [r.rate for r in rates.values()]
        assert min(vals) * (1 - 1e-12) <= out <= max(vals) * (1 + 1e-12)


bodies = st.sampled_from(list(BodyClass))


@st.composite
def records(draw):
    subject = Actor(draw(bodies), 1, draw(st.booleans()))
    partner = draw(st.one_of(st.none(), st.builds(Actor, bodies, st.integers(2, 4), st.booleans())))
    injury = draw(st.sampled_from(list(Injury)))
    serious = draw(st.one_of(st.none(), st.just(False), st.just(injury in SERIOUS_INJURIES)))
    kin = draw(st.one_of(st.none(), st.builds(Kinematics, st.floats(0, 10), st.floats(0, 12))))
    coords = draw(st.one_of(st.none(), st.tuples(st.floats(-90, 90), st.floats(-180, 180))))
    weight = 1.0 if subject.body_class is BodyClass.PassengerVehicle else draw(st.floats(0, 1))
    return CrashRecord(
        crash_id=draw(st.from_regex(r"[A-Z]{1,3}-[0-9]{1,5}", fullmatch=True)),
        subject=subject,
        location=Location(draw(st.sampled_from(["Phoenix", "SanFrancisco", "LosAngeles", "Austin", "Tucson"]))),
        partner=partner, coordinates=coords,
        road_class=draw(st.sampled_from(list(RoadClass))),
        sequence_position=draw(st.integers(1, 3)),
        configuration=draw(st.sampled_from(list(Configuration))),
        severity=Severity(injury, draw(st.booleans()), draw(st.booleans()), serious),
        annotations=Annotations(f2r_role=draw(st.one_of(st.none(), st.sampled_from(list(F2RRole)))),
                                kinematics=kin),
        weight=weight,
    )


class TestRecords:
    @given(st.lists(records(), max_size=20, unique_by=lambda r: r.crash_id))
    @settings(max_examples=40, deadline=None)
    def test_partition(self, recs):
        counts = tally(classify(r) for r in recs)
        assert sum(counts.values()) == len(recs)
        assert all(isinstance(g, CrashTypeGroup) for g in counts)

    @given(recs=st.lists(records(), max_size=20, unique_by=lambda r: r.crash_id))
    @settings(max_examples=40, deadline=None, suppress_health_check=[HealthCheck.function_scoped_fixture])
    def test_canonical_round_trip(self, recs, tmp_path_factory):
        path = tmp_path_factory.mktemp("canon") / "c.csv"
        write_canonical(path, recs)
        back = read_canonical(path)
        assert back == sorted(recs, key=lambda r: r.crash_id)
        assert all(math.isfinite(r.weight) for r in back)
