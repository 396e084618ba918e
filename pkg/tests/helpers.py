"""Shared fixtures for the test suite: tiny calendars and random models."""

import numpy as np

from rainhmm.model import EmissionModel, RainfallSeries, StateSpace, TransitionModel
from rainhmm.splines import BasisSet, build_time_covariates


def hourly(start, n):
    return np.datetime64(start) + np.arange(n) * np.timedelta64(3600, "s")


def make_bases(n_hours, start="2001-01-01T00:00:00", seasonal_knots=4,
               overall_knots=4):
    cov = build_time_covariates(hourly(start, n_hours))
    return cov, BasisSet.build(cov, seasonal_knots=seasonal_knots,
                               overall_knots=overall_knots)


def random_transition(rng, space, bases, spline_scale=0.0):
    d, w = space.n_dry, space.n_wet
    ks, ko = bases.seasonal.n_coef, bases.overall.n_coef
    return TransitionModel(
        iota=np.sort(rng.normal(0.5, 1.0, d))[::-1].copy(),
        a1=spline_scale * rng.normal(size=ks),
        a2=spline_scale * rng.normal(size=ko),
        q=rng.dirichlet(np.ones(w)),
        v=rng.dirichlet(np.ones(d)),
        r=np.stack([rng.dirichlet(np.ones(w + 1)) for _ in range(w)]),
        p0=rng.dirichlet(np.ones(d + w)),
    )


def random_emission(rng, space, bases, spline_scale=0.0):
    g = space.n_groups
    ks, ko = bases.seasonal.n_coef, bases.overall.n_coef
    return EmissionModel(
        eta=np.sort(rng.normal(0.0, 1.0, g))[::-1].copy(),
        b1=spline_scale * rng.normal(size=(g, ks)),
        b2=spline_scale * rng.normal(size=(g, ko)),
        alpha=rng.normal(0.5, 0.5, g),
        c1=spline_scale * rng.normal(size=(g, ks)),
        c2=spline_scale * rng.normal(size=(g, ko)),
        gamma=np.concatenate([[rng.normal(0, 0.2)],
                              np.sort(rng.normal(0.1, 0.15, g - 1))]),
        d1=spline_scale * rng.normal(size=(g, ks)),
        d2=spline_scale * rng.normal(size=(g, ko)),
    )


def random_series(rng, timestamps, wet_prob=0.4, mean_mm=2.0):
    n = len(timestamps)
    wet = rng.random(n) < wet_prob
    vals = np.where(wet, 0.2 * np.ceil(rng.exponential(mean_mm, n) / 0.2), 0.0)
    return RainfallSeries.create(vals, timestamps)


def naive_average_ranks(v):
    """O(n^2) rank computation: 1 + count(smaller) + (count(equal)-1)/2."""
    v = np.asarray(v, dtype=float)
    less = (v[None, :] < v[:, None]).sum(axis=1)
    equal = (v[None, :] == v[:, None]).sum(axis=1)
    return less + (equal + 1) / 2.0


def naive_spearman(x, lag):
    """Rank correlation between offset copies, built from first principles."""
    x = np.asarray(x, dtype=float)
    a = naive_average_ranks(x[:-lag])
    b = naive_average_ranks(x[lag:])
    am = a - a.mean()
    bm = b - b.mean()
    denom = np.sqrt((am @ am) * (bm @ bm))
    if denom == 0.0:
        return np.nan
    return float((am @ bm) / denom)
