"""Exact interval estimation for the ratio of two Poisson rates.

The ratio interval is the conditional construction: given ``n = x_a + x_b``
events, ``x_a`` is binomial with success probability
``p = rho * t_a / (rho * t_a + t_b)``.  Clopper-Pearson limits on ``p`` map
monotonically onto limits for ``rho``.

Counts may be fractional (adjusted benchmarks).  The beta-quantile form of
the Clopper-Pearson limits is used throughout, which reduces to the classical
binomial limits at integer counts.
"""

from __future__ import annotations

import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from typing import Iterable, Mapping, Optional

from scipy.special import betainc

from .model import AGGREGATE, ALL_LOCATIONS, crash_type_sort_key, location_sort_key

PROB_TOL = 1e-10


class StatsError(ValueError):
    pass


class UndefinedComparison(StatsError):
    """Both counts are zero; the ratio carries no information."""


def _bisect(f, lo: float, hi: float, tol: float) -> float:
    # f increasing on [lo, hi] with f(lo) <= 0 <= f(hi)
    for _ in range(200):
        mid = 0.5 * (lo + hi)
        if mid <= lo or mid >= hi or hi - lo <= tol:
            break
        if f(mid) < 0.0:
            lo = mid
        else:
            hi = mid
    return 0.5 * (lo + hi)


def _beta_quantile(q: float, a: float, b: float, tol: float) -> float:
    # I_p(a, b) is increasing in p; tighten below the requested tolerance
    return _bisect(lambda p: betainc(a, b, p) - q, 0.0, 1.0, tol * 1e-3)


def clopper_pearson(successes: float, trials: float, alpha: float = 0.05,
                    tol: float = PROB_TOL) -> tuple[float, float]:
    """Two-sided exact limits for a binomial proportion.

    Lower limit is the ``alpha/2`` quantile of Beta(x, n - x + 1), upper the
    ``1 - alpha/2`` quantile of Beta(x + 1, n - x).  ``x = 0`` gives a lower
    limit of 0 and ``x = n`` an upper limit of 1.
    """
    x, n = float(successes), float(trials)
    if not 0.0 < alpha < 1.0:
        raise StatsError(f"alpha must be in (0, 1), got {alpha}")
    if not n > 0:
        raise StatsError(f"trials must be > 0, got {trials}")
    if not 0.0 <= x <= n:
        raise StatsError(f"successes must be in [0, trials], got {successes} of {trials}")
    lower = 0.0 if x == 0 else _beta_quantile(alpha / 2, x, n - x + 1, tol)
    upper = 1.0 if x == n else _beta_quantile(1 - alpha / 2, x + 1, n - x, tol)
    return lower, upper


@dataclass(frozen=True)
class ComparisonResult:
    """ADS vs. benchmark rate comparison; percentages are 100 * (ratio - 1)."""

    ads_count: float
    ads_miles: float
    human_count: float
    human_exposure: float
    rate_ratio: float
    percent_difference: float
    ci_lower: float
    ci_upper: float
    significant: bool
    expected_count_delta: float
    alpha: float = 0.05
    location: str = ""
    outcome: str = ""
    crash_type: str = AGGREGATE

    @property
    def ads_ipmm(self) -> float:
        return 1e6 * self.ads_count / self.ads_miles

    @property
    def human_ipmm(self) -> float:
        return 1e6 * self.human_count / self.human_exposure

    @property
    def upper_unbounded(self) -> bool:
        return math.isinf(self.ci_upper)

    @property
    def key(self) -> tuple[str, str, str]:
        return self.location, self.outcome, self.crash_type

    def sort_key(self):
        return (location_sort_key(self.location), self.outcome,
                crash_type_sort_key(self.crash_type), self.crash_type)


def rate_ratio_ci(x_a: float, t_a: float, x_b: float, t_b: float, alpha: float = 0.05,
                  **labels) -> ComparisonResult:
    """Exact conditional CI for (x_a / t_a) / (x_b / t_b).

    ``t_a`` and ``t_b`` are exposures in the same unit.  ``labels`` fill the
    location / outcome / crash_type fields of the result.
    """
    if not (t_a > 0 and t_b > 0):
        raise StatsError("exposures must be > 0")
    if x_a < 0 or x_b < 0:
        raise StatsError("counts must be >= 0")
    if x_a == 0 and x_b == 0:
        raise UndefinedComparison("both counts are zero")
    n = x_a + x_b
    p_lo, p_hi = clopper_pearson(x_a, n, alpha)
    scale = t_b / t_a
    r_lo = p_lo / (1.0 - p_lo) * scale
    r_hi = math.inf if p_hi >= 1.0 else p_hi / (1.0 - p_hi) * scale
    ratio = math.inf if x_b == 0 else (x_a / t_a) / (x_b / t_b)
    lower, upper = 100.0 * (r_lo - 1.0), 100.0 * (r_hi - 1.0)
    return ComparisonResult(
        ads_count=float(x_a), ads_miles=float(t_a),
        human_count=float(x_b), human_exposure=float(t_b),
        rate_ratio=ratio,
        percent_difference=100.0 * (ratio - 1.0),
        ci_lower=lower, ci_upper=upper,
        significant=lower > 0.0 or upper < 0.0,
        expected_count_delta=x_a - x_b / t_b * t_a,
        alpha=alpha,
        **labels,
    )


def poisson_interval(count: float, alpha: float = 0.05) -> tuple[float, float]:
    """Exact (Garwood) interval for a Poisson mean; the x_b -> inf limit of rate_ratio_ci."""
    from scipy.special import gammaincinv

    lower = 0.0 if count == 0 else float(gammaincinv(count, alpha / 2))
    upper = float(gammaincinv(count + 1, 1 - alpha / 2))
    return lower, upper


# --- orchestration -------------------------------------------------------------

@dataclass(frozen=True)
class Gap:
    location: str
    outcome: str
    crash_type: str
    reason: str


def compare(ads_counts: Mapping[tuple[str, str, str], float],
            ads_miles: Mapping[str, float],
            benchmarks: Iterable,
            alpha: float = 0.05,
            keys: Optional[Iterable[tuple[str, str, str]]] = None,
            jobs: int = 1) -> tuple[list[ComparisonResult], list[Gap]]:
    """One ComparisonResult per (location, outcome, crash_type) with a benchmark.

    ``benchmarks`` are BenchmarkRate-like objects.  The blended location row
    sums ADS counts and miles over the locations that carry ADS miles.
    Requested keys without a benchmark, without ADS miles, or with both counts
    zero are returned as gaps instead of being dropped.
    """
    bench = {(b.location, b.outcome, b.crash_type): b for b in benchmarks}
    if keys is None:
        keys = list(bench)
    located = [loc for loc in ads_miles if loc != ALL_LOCATIONS]
    total_miles = math.fsum(ads_miles[loc] for loc in located)

    def ads_for(loc, outcome, ctype):
        if loc == ALL_LOCATIONS:
            count = math.fsum(ads_counts.get((l, outcome, ctype), 0.0) for l in located)
            return count, ads_miles.get(ALL_LOCATIONS, total_miles)
        return ads_counts.get((loc, outcome, ctype), 0.0), ads_miles.get(loc, 0.0)

    def one(key):
        loc, outcome, ctype = key
        b = bench.get(key)
        if b is None:
            return Gap(loc, outcome, ctype, "no benchmark")
        count, miles = ads_for(loc, outcome, ctype)
        if not miles > 0:
            return Gap(loc, outcome, ctype, "no ADS miles")
        try:
            return rate_ratio_ci(count, miles, b.effective_count, b.exposure, alpha,
                                 location=loc, outcome=outcome, crash_type=ctype)
        except UndefinedComparison:
            return Gap(loc, outcome, ctype, "both counts zero")

    keys = sorted(set(keys), key=lambda k: (location_sort_key(k[0]), k[1],
                                             crash_type_sort_key(k[2]), k[2]))
    if jobs > 1:
        with ThreadPoolExecutor(max_workers=jobs) as pool:
            out = list(pool.map(one, keys))
    else:
        out = [one(k) for k in keys]
    results = [r for r in out if isinstance(r, ComparisonResult)]
    gaps = [g for g in out if isinstance(g, Gap)]
    return results, gaps
