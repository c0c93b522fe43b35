import math

import numpy as np
import pytest

from crashbench.benchmark import (
    UNDERREPORTING_FACTOR,
    BenchmarkConfig,
    BenchmarkError,
    BenchmarkRate,
    CellMiles,
    DataGapError,
    HumanInputs,
    blend_locations,
    build_benchmarks,
    dynamic_reweight,
    expected_count_delta,
    ipmm,
    make_rate,
    passenger_adjust,
    read_benchmarks,
    read_cell_miles,
    regrid_published,
    sensitivity_grid,
    set_underreporting,
    split_f2r,
    underreporting_adjust,
    write_benchmarks,
    write_cell_miles,
)
from crashbench.model import F2R_STRIKING, F2R_STRUCK, OutcomeLevel
from oracles import pooled_rate, reweighted_rate

ANY, BAG, SER = "AnyInjuryReported", "AirbagDeployment", "SuspectedSeriousInjuryPlus"


class TestElementary:
    def test_ipmm(self):
        assert ipmm(24, 31.159e6) == pytest.approx(0.770, abs=5e-4)
        assert ipmm(0, 123.0) == 0.0
        assert ipmm(48, 56.700e6) == pytest.approx(0.847, abs=5e-4)

    def test_ipmm_rejects_nonpositive_miles(self):
        with pytest.raises(BenchmarkError):
            ipmm(1, 0)

    def test_passenger_adjust(self):
        assert passenger_adjust(1e7, 1.0) == 1e7
        assert passenger_adjust(1e7, 0.0) == 0.0
        assert passenger_adjust(2.5e7, 0.92) == pytest.approx(2.3e7, rel=1e-12)
        with pytest.raises(BenchmarkError):
            passenger_adjust(1e7, 1.2)

    def test_underreporting_adjust(self):
        assert underreporting_adjust(100, ANY, 1.47, True) == pytest.approx(147)
        assert underreporting_adjust(100, BAG, 1.47, True) == 100
        assert underreporting_adjust(100, SER, 1.47, True) == 100
        assert underreporting_adjust(100, ANY, 1.47, False) == 100

    def test_expected_count_delta(self):
        assert expected_count_delta(2.09, 31.159e6, 24) == pytest.approx(-41.1, abs=0.05)
        assert expected_count_delta(1.42, 31.159e6, 8) == pytest.approx(-36.3, abs=0.2)
        assert expected_count_delta(0, 1e6, 0) == 0

    def test_rate_invariant_enforced(self):
        with pytest.raises(BenchmarkError):
            BenchmarkRate("Phoenix", ANY, "All", 2.0, 10.0, 1e6)

    def test_set_underreporting_round_trip(self):
        r = make_rate("Phoenix", ANY, "All", 100.0, 5e7)
        on = set_underreporting(r, True)
        assert on.rate == pytest.approx(r.rate * UNDERREPORTING_FACTOR, rel=1e-15)
        assert on.exposure == r.exposure and on.underreporting_applied
        back = set_underreporting(on, False)
        assert back.rate == pytest.approx(r.rate, rel=1e-15)
        bag = make_rate("Phoenix", BAG, "All", 100.0, 5e7)
        assert set_underreporting(bag, True) is bag

    def test_split_f2r(self):
        r = make_rate("Phoenix", ANY, "V2VF2R", 40.0, 1e8)
        striking, struck = split_f2r(r)
        assert (striking.crash_type, struck.crash_type) == (F2R_STRIKING, F2R_STRUCK)
        assert striking.rate == struck.rate == r.rate / 2
        with pytest.raises(BenchmarkError):
            split_f2r(make_rate("Phoenix", ANY, "Other", 1.0, 1e6))


class TestDynamicReweight:
    def test_two_cells(self):
        cells = {"a": (1.0, 1e6), "b": (3.0, 1e6)}
        rate, w = dynamic_reweight(cells, {"a": 75.0, "b": 25.0})
        assert rate.rate == pytest.approx(1.5, rel=1e-12)
        assert w.as_dict()["a"].ads_mile_share == 0.75

    def test_single_cell_support(self):
        cells = {"a": (7.0, 2e6), "b": (3.0, 1e6)}
        rate, w = dynamic_reweight(cells, {"a": 10.0, "b": 0.0})
        assert rate.rate == pytest.approx(3.5, rel=1e-12)
        assert w.as_dict()["b"].weight == 0.0

    def test_equal_shares_match_pooled_rate(self):
        rng = np.random.default_rng(11)
        hmiles = rng.uniform(1e5, 1e7, 100)
        crashes = rng.poisson(hmiles * 2e-6).astype(float)
        amiles = hmiles * 0.003
        cells = {f"c{i}": (c, h) for i, (c, h) in enumerate(zip(crashes, hmiles))}
        rate, _ = dynamic_reweight(cells, {f"c{i}": a for i, a in enumerate(amiles)})
        ref = pooled_rate(list(zip(crashes, hmiles, amiles)))
        assert rate.rate == pytest.approx(ref, rel=1e-9)
        assert rate.rate == pytest.approx(reweighted_rate(list(zip(crashes, hmiles, amiles))), rel=1e-12)

    def test_scale_invariance(self):
        cells = {"a": (4.0, 1e6), "b": (9.0, 3e6), "c": (1.0, 5e5)}
        ads = {"a": 3.0, "b": 5.0, "c": 2.0}
        r1, _ = dynamic_reweight(cells, ads)
        r2, _ = dynamic_reweight(cells, {k: v * 1e6 for k, v in ads.items()})
        assert r1.rate == pytest.approx(r2.rate, rel=1e-12)

    def test_zero_human_miles_abort(self):
        with pytest.raises(DataGapError, match="b"):
            dynamic_reweight({"a": (1.0, 1e6), "b": (0.0, 0.0)}, {"a": 1.0, "b": 1.0})

    def test_zero_human_miles_fallback(self):
        rate, w = dynamic_reweight({"a": (2.0, 1e6), "b": (0.0, 0.0)}, {"a": 1.0, "b": 1.0}, policy="fallback")
        # cell b takes the pooled rate, which equals cell a's rate here
        assert rate.rate == pytest.approx(2.0)
        assert w.as_dict()["b"].fallback

    def test_ads_exposure_count_rule(self):
        rate, _ = dynamic_reweight({"a": (1.0, 1e6), "b": (3.0, 1e6)}, {"a": 3e6, "b": 1e6},
                                   count_rule="ads_exposure")
        assert rate.exposure == 4e6
        assert rate.effective_count == pytest.approx(1.5 * 4)

    def test_moment_count_is_raw_count_without_reweighting(self):
        # one cell: the effective count is the observed crash count
        rate, _ = dynamic_reweight({"a": (37.0, 1e7)}, {"a": 1.0})
        assert rate.effective_count == pytest.approx(37.0, rel=1e-12)
        assert rate.exposure == pytest.approx(1e7, rel=1e-12)


class TestBlend:
    def test_two_locations(self):
        rates = {"Phoenix": make_rate("Phoenix", ANY, "All", 1e6, 1e12 / 2.09),
                 "SanFrancisco": make_rate("SanFrancisco", ANY, "All", 1e6, 1e12 / 8.02)}
        b = blend_locations(rates, {"Phoenix": 31.159e6, "SanFrancisco": 18.260e6})
        assert b.rate == pytest.approx(4.281, abs=5e-4)
        assert b.location == "AllLocations"

    def test_identity_and_convexity(self):
        r = make_rate("Phoenix", BAG, "All", 50.0, 1e8)
        assert blend_locations({"Phoenix": r}, {"Phoenix": 5.0}).rate == pytest.approx(r.rate)
        same = {loc: make_rate(loc, BAG, "All", 50.0, 1e8) for loc in ("Phoenix", "Austin")}
        assert blend_locations(same, {"Phoenix": 3.0, "Austin": 1.0}).rate == pytest.approx(0.5)

    def test_ads_exposure_rule(self):
        rates = {"Phoenix": make_rate("Phoenix", ANY, "All", 1e6, 1e12 / 2.0)}
        b = blend_locations(rates, {"Phoenix": 31e6}, count_rule="ads_exposure")
        assert b.exposure == 31e6 and b.effective_count == pytest.approx(62.0)

    def test_mismatched_inputs(self):
        rates = {"Phoenix": make_rate("Phoenix", ANY, "All", 1.0, 1e6),
                 "Austin": make_rate("Austin", BAG, "All", 1.0, 1e6)}
        with pytest.raises(BenchmarkError):
            blend_locations(rates, {"Phoenix": 1.0, "Austin": 1.0})


def _human_inputs():
    """Two cells in Phoenix with crashes assigned through the cell file."""
    cells = (
        CellMiles("Phoenix", "L13/100/200", 4e7, 1e6, {ANY: 80.0, BAG: 30.0, SER: 4.0}),
        CellMiles("Phoenix", "L13/100/201", 6e7, 3e6, {ANY: 240.0, BAG: 60.0, SER: 6.0}),
    )
    from crashbench.model import ExposureRow, ExposureTable, Location, RoadClass

    exposure = ExposureTable((ExposureRow(Location("Phoenix"), RoadClass.SurfaceStreet, 1e8),))
    return HumanInputs((), exposure, cells, {"Phoenix": 4e6})


class TestBuild:
    def test_dynamic_from_cell_file(self):
        rates = {r.key: r for r in build_benchmarks(_human_inputs(), BenchmarkConfig(dynamic=True, crash_types=False))}
        r = rates[("Phoenix", BAG, "All")]
        assert r.rate == pytest.approx(1e6 * (30 / 4e7 * 0.25 + 60 / 6e7 * 0.75))
        assert r.dynamic_applied and not r.underreporting_applied
        blended = rates[("AllLocations", BAG, "All")]
        assert blended.rate == pytest.approx(r.rate)

    def test_sensitivity_grid(self):
        grid = sensitivity_grid(_human_inputs(), BenchmarkConfig(crash_types=False))
        assert len(grid) == 4
        get = lambda ur, dyn, o: {r.key: r for r in grid[(ur, dyn)]}[("Phoenix", o, "All")]  # noqa: E731
        for dyn in (True, False):
            assert get(True, dyn, ANY).rate == pytest.approx(get(False, dyn, ANY).rate * 1.47, rel=1e-15)
            assert get(True, dyn, BAG) == get(False, dyn, BAG)
            assert get(True, dyn, SER) == get(False, dyn, SER)
        static = get(False, False, BAG)
        assert static.rate == pytest.approx(1e6 * 90 / 1e8)
        rates = {(ur, dyn): get(ur, dyn, ANY).rate for ur in (True, False) for dyn in (True, False)}
        assert len(set(rates.values())) == 4
        again = sensitivity_grid(_human_inputs(), BenchmarkConfig(crash_types=False))
        assert again == grid


class TestFiles:
    def test_benchmark_csv_round_trip(self, tmp_path):
        rates = [make_rate("Phoenix", ANY, "V2VF2R", 1e6 / 3, 1e12 / 7, underreporting_applied=True),
                 make_rate("AllLocations", BAG, "All", 0.0, 1e9, dynamic_applied=True)]
        write_benchmarks(tmp_path / "b.csv", rates)
        back = read_benchmarks(tmp_path / "b.csv")
        assert sorted(back, key=lambda r: r.sort_key()) == sorted(rates, key=lambda r: r.sort_key())

    def test_cell_file_round_trip(self, tmp_path):
        rows = list(_human_inputs().cells)
        write_cell_miles(tmp_path / "c.csv", rows)
        assert read_cell_miles(tmp_path / "c.csv") == rows

    def test_regrid_published_bundled(self, data_dir):
        published = read_benchmarks(data_dir / "published_benchmarks.csv")
        off = {r.key: r for r in regrid_published(published, False)}
        on = {r.key: r for r in published}
        key = ("Phoenix", ANY, "All")
        assert off[key].rate * 1.47 == pytest.approx(on[key].rate, rel=1e-15)
        assert off[("Phoenix", BAG, "All")] == on[("Phoenix", BAG, "All")]
        assert all(not math.isnan(r.rate) for r in off.values())
        assert OutcomeLevel(key[1]) is OutcomeLevel.AnyInjuryReported
