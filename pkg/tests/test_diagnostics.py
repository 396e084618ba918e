import datetime

import numpy as np
import pytest

from rainhmm.diagnostics import (
    CheckReport,
    EnsembleStats,
    aggregate,
    dry_period_lengths,
    effect_curves,
    run_lengths,
    season_index,
    seasonal_sorted_envelope,
    seasonal_zero_proportion,
    sorted_value_envelope,
    spearman_autocorr,
    top_k_dry_envelope,
)
from rainhmm.inference import ChainSet, MCMCSettings, ParameterLayout
from rainhmm.model import RainfallSeries, StateSpace

from helpers import hourly, make_bases, naive_spearman, random_series


# ---------------------------------------------------------------------------
# dry periods
# ---------------------------------------------------------------------------

def test_dry_lengths_hand_cases():
    assert list(dry_period_lengths(np.zeros(10))) == [10]
    assert list(dry_period_lengths([0, 0.2, 0.4, 0, 0, 0.6, 0])) == [2, 2, 1]
    assert list(dry_period_lengths(np.full(6, 0.4))) == []
    # 0.2 counts as dry, 0.4 does not
    assert list(dry_period_lengths([0.2, 0.2, 0.4, 0.2])) == [2, 1]


def test_run_lengths_partition():
    rng = np.random.default_rng(1)
    v = rng.choice([0.0, 0.2, 0.6], size=777)
    dry = run_lengths(v <= 0.2)
    wet = run_lengths(v > 0.2)
    assert dry.sum() + wet.sum() == v.size


# ---------------------------------------------------------------------------
# rank autocorrelation
# ---------------------------------------------------------------------------

def test_spearman_monotone_and_alternating():
    assert np.isclose(spearman_autocorr(np.arange(50.0), 1), 1.0, atol=1e-12)
    alt = np.array([1.0, 2.0, 1.0, 2.0, 1.0, 2.0])
    assert np.isclose(spearman_autocorr(alt, 1), -1.0, atol=1e-12)


def test_spearman_constant_series_undefined():
    assert np.isnan(spearman_autocorr(np.full(100, 0.2), 1))


def test_spearman_matches_naive_oracle_with_ties():
    rng = np.random.default_rng(2)
    for lag in (1, 2, 6, 24):
        # grid-valued series: plenty of ties, the regime that matters
        v = 0.2 * rng.integers(0, 6, size=300).astype(float)
        ours = spearman_autocorr(v, lag)
        ref = naive_spearman(v, lag)
        assert np.isclose(ours, ref, atol=1e-12)


def test_spearman_invariant_under_monotone_transform():
    rng = np.random.default_rng(3)
    v = rng.exponential(2.0, 500)
    a = spearman_autocorr(v, 2)
    b = spearman_autocorr(np.exp(v / 3.0), 2)
    assert np.isclose(a, b, atol=1e-12)
    assert -1.0 <= a <= 1.0


def test_spearman_lag_validation():
    with pytest.raises(ValueError):
        spearman_autocorr(np.arange(10.0), 0)
    with pytest.raises(ValueError):
        spearman_autocorr(np.arange(5.0), 4)


# ---------------------------------------------------------------------------
# seasons
# ---------------------------------------------------------------------------

def test_season_index_calendar_mapping():
    ts = np.array(["2001-01-15", "2001-03-01", "2001-06-30", "2001-09-10",
                   "2001-12-25"], dtype="datetime64[s]")
    assert list(season_index(ts)) == [0, 1, 2, 3, 0]


def test_seasonal_zero_proportion_extremes():
    n = 24 * 365
    ts = hourly("2001-01-01T00:00:00", n)
    assert np.allclose(seasonal_zero_proportion(np.zeros(n), ts),
                       np.ones(4), atol=0)
    si = season_index(ts)
    v = np.where(si == 2, 0.0, 0.2)
    props = seasonal_zero_proportion(v, ts)
    assert np.allclose(props, [0.0, 0.0, 1.0, 0.0], atol=0)


def test_seasonal_zero_proportion_counting():
    rng = np.random.default_rng(4)
    n = 24 * 365
    ts = hourly("2003-01-01T00:00:00", n)
    v = np.where(rng.random(n) < 0.4, 0.0, 0.2)
    props = seasonal_zero_proportion(v, ts)
    si = season_index(ts)
    for s in range(4):
        assert props[s] == np.mean(v[si == s] == 0.0)


# ---------------------------------------------------------------------------
# aggregation
# ---------------------------------------------------------------------------

def test_daily_aggregation_hand_value():
    ts = hourly("2001-05-01T00:00:00", 24)
    totals, keys = aggregate(np.full(24, 0.2), ts, "daily")
    assert totals.shape == (1,)
    assert abs(totals[0] - 4.8) < 1e-9
    assert keys[0] == np.datetime64("2001-05-01")


def test_aggregation_conserves_total():
    rng = np.random.default_rng(5)
    ts = hourly("2001-11-17T07:00:00", 5000)   # awkward offset on purpose
    v = 0.2 * rng.integers(0, 5, 5000).astype(float)
    for res in ("daily", "monthly"):
        totals, _ = aggregate(v, ts, res)
        assert abs(totals.sum() - v.sum()) < 1e-9


def test_aggregation_matches_datetime_oracle():
    rng = np.random.default_rng(6)
    ts = hourly("2000-02-26T13:00:00", 2000)    # spans the leap day
    v = 0.2 * rng.integers(0, 4, 2000).astype(float)
    buckets_d, buckets_m = {}, {}
    for t, x in zip(ts.astype("datetime64[s]").tolist(), v):
        buckets_d.setdefault(t.date(), 0.0)
        buckets_d[t.date()] += x
        buckets_m.setdefault((t.year, t.month), 0.0)
        buckets_m[(t.year, t.month)] += x
    totals_d, keys_d = aggregate(v, ts, "daily")
    assert totals_d.size == len(buckets_d)
    for key, tot in zip(keys_d, totals_d):
        assert abs(buckets_d[key.item()] - tot) < 1e-12
    totals_m, keys_m = aggregate(v, ts, "monthly")
    assert totals_m.size == len(buckets_m) == 4   # Feb..May, leap year
    with pytest.raises(ValueError):
        aggregate(v, ts, "weekly")


# ---------------------------------------------------------------------------
# envelopes
# ---------------------------------------------------------------------------

def test_check_report_linear_interpolation_quantiles():
    stack = np.array([[0.0], [1.0], [2.0], [3.0]])
    rep = CheckReport.build("demo", np.array([1.0]), stack, ["only"])
    assert np.isclose(rep.lo[0], 0.075, atol=1e-12)
    assert np.isclose(rep.median[0], 1.5, atol=1e-12)
    assert np.isclose(rep.hi[0], 2.925, atol=1e-12)
    assert rep.inside[0]
    assert rep.n_outside == 0
    out = CheckReport.build("demo", np.array([3.5]), stack, ["only"])
    assert not out.inside[0]


def test_check_report_ordering_invariant():
    rng = np.random.default_rng(7)
    stack = rng.normal(size=(200, 30))
    rep = CheckReport.build("demo", stack[0], stack,
                            [f"c{i}" for i in range(30)])
    assert np.all(rep.lo <= rep.median + 1e-15)
    assert np.all(rep.median <= rep.hi + 1e-15)


def series_of(values, ts):
    return RainfallSeries.create(np.asarray(values, dtype=float), ts)


def test_top_k_truncates_to_shortest():
    n = 240
    ts = hourly("2001-01-01T00:00:00", n)
    rng = np.random.default_rng(8)
    obs = random_series(rng, ts, wet_prob=0.5)
    ens = [random_series(rng, ts, wet_prob=0.5) for _ in range(10)]
    rep = top_k_dry_envelope(ens, obs, k=800)
    shortest = min([dry_period_lengths(obs.values).size]
                   + [dry_period_lengths(s.values).size for s in ens])
    assert len(rep.labels) == shortest
    assert rep.meta["requested_k"] == 800
    assert rep.meta["discarded_ranks"] == 800 - shortest
    # ranks are descending in the observed overlay
    assert np.all(np.diff(rep.observed) <= 0)


def test_ensemble_stats_rejects_calendar_mismatch():
    ts = hourly("2001-01-01T00:00:00", 200)
    rng = np.random.default_rng(9)
    acc = EnsembleStats(random_series(rng, ts))
    short = random_series(rng, hourly("2001-01-01T00:00:00", 100))
    with pytest.raises(ValueError):
        acc.add(short)
    with pytest.raises(ValueError):
        acc.finalize()


def test_ensemble_stats_full_report_set():
    n = 24 * 380
    ts = hourly("2001-01-01T00:00:00", n)
    rng = np.random.default_rng(10)
    obs = random_series(rng, ts)
    acc = EnsembleStats(obs, top_k=40)
    for _ in range(25):
        acc.add(random_series(rng, ts))
    reports = {r.name: r for r in acc.finalize()}
    expected = {"dry_top_k", "spearman_autocorr", "seasonal_zero_proportion",
                "sorted_values_DJF", "sorted_values_MAM", "sorted_values_JJA",
                "sorted_values_SON", "sorted_daily", "sorted_monthly"}
    assert set(reports) == expected
    assert reports["spearman_autocorr"].labels == ["lag_1", "lag_2", "lag_6",
                                                   "lag_24"]
    # an observed series statistically identical to the ensemble should sit
    # inside most envelopes
    daily = reports["sorted_daily"]
    assert daily.n_outside < 0.5 * len(daily.labels)
    for rep in reports.values():
        assert np.all(rep.lo[np.isfinite(rep.lo)]
                      <= rep.hi[np.isfinite(rep.hi)] + 1e-15)


def test_wrapper_envelopes_agree_with_accumulator():
    n = 24 * 370
    ts = hourly("2001-01-01T00:00:00", n)
    rng = np.random.default_rng(11)
    obs = random_series(rng, ts)
    ens = [random_series(rng, ts) for _ in range(12)]
    by_season = seasonal_sorted_envelope(ens, obs)
    assert set(by_season) == {"DJF", "MAM", "JJA", "SON"}
    daily = sorted_value_envelope(ens, obs, "daily")
    acc = EnsembleStats(obs)
    for s in ens:
        acc.add(s)
    ref = {r.name: r for r in acc.finalize()}
    assert np.allclose(daily.lo, ref["sorted_daily"].lo, atol=0)
    assert np.allclose(by_season["JJA"].median,
                       ref["sorted_values_JJA"].median, atol=0)


# ---------------------------------------------------------------------------
# effect curves
# ---------------------------------------------------------------------------

def test_effect_curves_constant_posterior():
    _, bases = make_bases(2000)
    space = StateSpace(1, 1)
    layout = ParameterLayout.create(space, bases)
    rng = np.random.default_rng(12)
    theta = rng.normal(size=layout.n_params)
    draws = np.tile(theta, (2, 5, 1))
    cs = ChainSet(layout, MCMCSettings(n_chains=2, n_iter=10, burn_in=0,
                                       thin=2, seed=0),
                  [0, 1], draws, np.zeros((2, 5)), np.zeros((2, 5)), [])
    curves = effect_curves(cs, bases, n_grid=50)
    assert set(curves) == set(layout.spline_names)
    a1 = curves["a1"]
    expected = bases.seasonal.evaluate(np.arange(50) / 50) @ theta[
        layout.spline_slice("a1")]
    assert np.allclose(a1.median, expected, atol=1e-12)
    assert np.allclose(a1.lo, a1.hi, atol=1e-12)
    c2w = curves["c2_wet1"]
    assert c2w.meta["covariate"] == "overall"
