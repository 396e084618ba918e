"""Posterior-predictive checking statistics and envelope assembly.

Each statistic is computed identically on the observed series and on every
simulated series; the ensemble's per-coordinate 2.5% / 50% / 97.5%
quantiles (linear interpolation) form the predictive envelope against
which the observed value is compared.

A dry period is a maximal run of hours with rainfall of at most 0.2 mm,
so isolated 0.2 mm readings count as dry.  This deliberately differs from
"zero rainfall": the zero-proportion statistics use exact zeros.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass, field

import numpy as np
import scipy.stats

from .model import RainfallSeries

DRY_THRESHOLD_MM = 0.2
SEASONS = ("DJF", "MAM", "JJA", "SON")
DEFAULT_LAGS = (1, 2, 6, 24)
ENVELOPE_QUANTILES = (2.5, 50.0, 97.5)


@dataclass
class CheckReport:
    """Envelope of one checking statistic with the observed overlay.

    observed, lo, median, hi are aligned per coordinate; inside flags
    lo <= observed <= hi.  labels names the coordinates (ranks, lags,
    seasons, ...), meta carries bookkeeping such as discarded ranks.
    """

    name: str
    observed: np.ndarray
    lo: np.ndarray
    median: np.ndarray
    hi: np.ndarray
    inside: np.ndarray
    labels: list
    meta: dict = field(default_factory=dict)

    @classmethod
    def build(cls, name, observed, stack, labels, meta=None) -> "CheckReport":
        """Assemble from a (n_series, m) stack of simulated statistics."""
        observed = np.asarray(observed, dtype=float)
        lo, med, hi = np.percentile(np.asarray(stack, dtype=float),
                                    ENVELOPE_QUANTILES, axis=0)
        with np.errstate(invalid="ignore"):
            inside = (lo <= observed) & (observed <= hi)
        meta = dict(meta or {})
        meta.setdefault("quantile_method", "linear")
        meta.setdefault("n_series", int(np.asarray(stack).shape[0]))
        return cls(name, observed, lo, med, hi, inside, list(labels), meta)

    @property
    def n_outside(self) -> int:
        return int(np.size(self.inside) - np.count_nonzero(self.inside))


# ---------------------------------------------------------------------------
# Per-series statistics
# ---------------------------------------------------------------------------

def run_lengths(mask: np.ndarray) -> np.ndarray:
    """Lengths of maximal runs of True, in order of appearance."""
    mask = np.asarray(mask, dtype=bool)
    if mask.size == 0:
        return np.zeros(0, dtype=np.int64)
    changes = np.nonzero(mask[1:] != mask[:-1])[0]
    starts = np.concatenate(([0], changes + 1))
    ends = np.concatenate((changes, [mask.size - 1]))
    lengths = (ends - starts + 1).astype(np.int64)
    return lengths[mask[starts]]


def dry_period_lengths(values, threshold: float = DRY_THRESHOLD_MM) -> np.ndarray:
    """Descending-sorted lengths (hours) of all dry periods.

    Dry means rainfall not exceeding the threshold; boundary runs count.
    """
    lengths = run_lengths(np.asarray(values, dtype=float) <= threshold)
    return np.sort(lengths)[::-1]


def spearman_autocorr(values, lag: int) -> float:
    """Spearman rank correlation between the series and its lag-shifted copy.

    Ties get average ranks.  A constant input window has no defined rank
    correlation; that case is reported as NaN rather than raised.
    """
    x = np.asarray(values, dtype=float)
    if lag < 1 or x.size <= lag + 2:
        raise ValueError(f"lag {lag} needs a series longer than {lag + 2}")
    with warnings.catch_warnings():
        warnings.simplefilter("ignore")
        rho = scipy.stats.spearmanr(x[:-lag], x[lag:]).statistic
    return float(rho)


def month_index(timestamps) -> np.ndarray:
    """0-based calendar month per timestamp."""
    ts = np.asarray(timestamps, dtype="datetime64[s]")
    return (ts.astype("datetime64[M]") - ts.astype("datetime64[Y]")).astype(int)


def season_index(timestamps) -> np.ndarray:
    """0..3 per timestamp for DJF / MAM / JJA / SON (December belongs to
    the following winter)."""
    return ((month_index(timestamps) + 1) // 3) % 4


def seasonal_zero_proportion(values, timestamps) -> np.ndarray:
    """Proportion of exactly-zero hours in each calendar season.

    Returns 4 values ordered DJF, MAM, JJA, SON; a season absent from the
    record yields NaN.
    """
    v = np.asarray(values, dtype=float)
    si = season_index(timestamps)
    out = np.full(4, np.nan)
    for s in range(4):
        mask = si == s
        if mask.any():
            out[s] = np.mean(v[mask] == 0.0)
    return out


def aggregate(values, timestamps, resolution: str):
    """Sum the hourly series into calendar days or months.

    Returns (totals, period_starts); partial periods at the record edges
    are kept, so the totals always conserve the hourly sum.
    """
    v = np.asarray(values, dtype=float)
    ts = np.asarray(timestamps, dtype="datetime64[s]")
    if resolution == "daily":
        keys = ts.astype("datetime64[D]")
    elif resolution == "monthly":
        keys = ts.astype("datetime64[M]")
    else:
        raise ValueError(f"resolution must be daily or monthly, got {resolution!r}")
    change = np.nonzero(keys[1:] != keys[:-1])[0] + 1
    starts = np.concatenate(([0], change))
    return np.add.reduceat(v, starts), keys[starts]


# ---------------------------------------------------------------------------
# Ensemble accumulation
# ---------------------------------------------------------------------------

class EnsembleStats:
    """One-pass collection of every checking statistic over an ensemble.

    Observed statistics are computed once up front; each simulated series
    contributes via `add`, and `finalize` turns the buffers into
    CheckReports.  Sorted-value vectors are buffered in float32: envelopes
    only need quantiles, and full-scale ensembles are large.
    """

    def __init__(self, observed: RainfallSeries, top_k: int = 800,
                 lags=DEFAULT_LAGS):
        self.observed = observed
        self.top_k = top_k
        self.lags = tuple(lags)
        ts = observed.timestamps
        self.season_masks = [season_index(ts) == s for s in range(4)]
        self.n_hours = observed.n_hours

        self.obs_dry = dry_period_lengths(observed.values)[:top_k]
        self.obs_rho = np.array([spearman_autocorr(observed.values, l)
                                 for l in self.lags])
        self.obs_zero = seasonal_zero_proportion(observed.values, ts)
        self.obs_sorted_season = [np.sort(observed.values[m])
                                  for m in self.season_masks]
        self.obs_daily = np.sort(aggregate(observed.values, ts, "daily")[0])
        self.obs_monthly = np.sort(aggregate(observed.values, ts, "monthly")[0])
        self._daily_starts = None

        self.dry = []
        self.rho = []
        self.zero = []
        self.sorted_season = [[] for _ in range(4)]
        self.daily = []
        self.monthly = []

    def add(self, series: RainfallSeries):
        if series.n_hours != self.n_hours:
            raise ValueError(
                f"simulated series has {series.n_hours} hours, observed has "
                f"{self.n_hours}; the ensemble must share the calendar")
        v = series.values
        ts = series.timestamps
        self.dry.append(dry_period_lengths(v)[:self.top_k])
        self.rho.append([spearman_autocorr(v, l) for l in self.lags])
        self.zero.append(seasonal_zero_proportion(v, ts))
        for s in range(4):
            self.sorted_season[s].append(
                np.sort(v[self.season_masks[s]]).astype(np.float32))
        self.daily.append(np.sort(aggregate(v, ts, "daily")[0]).astype(np.float32))
        self.monthly.append(np.sort(aggregate(v, ts, "monthly")[0]).astype(np.float32))

    @property
    def n_series(self) -> int:
        return len(self.rho)

    def finalize(self) -> list:
        if not self.rho:
            raise ValueError("no simulated series were added")
        reports = [self._dry_report(),
                   CheckReport.build("spearman_autocorr", self.obs_rho,
                                     np.asarray(self.rho),
                                     [f"lag_{l}" for l in self.lags]),
                   CheckReport.build("seasonal_zero_proportion", self.obs_zero,
                                     np.asarray(self.zero), list(SEASONS))]
        for s, season in enumerate(SEASONS):
            reports.append(CheckReport.build(
                f"sorted_values_{season}", self.obs_sorted_season[s],
                np.stack(self.sorted_season[s]),
                [f"rank_{i}" for i in range(self.obs_sorted_season[s].size)]))
        reports.append(CheckReport.build(
            "sorted_daily", self.obs_daily, np.stack(self.daily),
            [f"rank_{i}" for i in range(self.obs_daily.size)]))
        reports.append(CheckReport.build(
            "sorted_monthly", self.obs_monthly, np.stack(self.monthly),
            [f"rank_{i}" for i in range(self.obs_monthly.size)]))
        return reports

    def _dry_report(self) -> CheckReport:
        """Top-k dry periods aligned by rank.

        Series differ in how many dry periods they contain; ranks are kept
        up to the shortest list (observed or simulated) and the number of
        requested ranks dropped that way is recorded.
        """
        k_eff = min([self.top_k, self.obs_dry.size]
                    + [d.size for d in self.dry])
        stack = np.stack([d[:k_eff] for d in self.dry])
        rep = CheckReport.build(
            "dry_top_k", self.obs_dry[:k_eff], stack,
            [f"rank_{i}" for i in range(k_eff)],
            meta={"requested_k": self.top_k,
                  "discarded_ranks": self.top_k - k_eff})
        return rep


def top_k_dry_envelope(ensemble, observed: RainfallSeries,
                       k: int = 800) -> CheckReport:
    """Envelope of the k longest dry periods per series, aligned by rank."""
    acc = EnsembleStats(observed, top_k=k)
    for series in ensemble:
        acc.add(series)
    return acc._dry_report()


def seasonal_sorted_envelope(ensemble, observed: RainfallSeries) -> dict:
    """Per-season sorted-value envelopes (quantile-quantile style)."""
    acc = EnsembleStats(observed)
    for series in ensemble:
        acc.add(series)
    reports = {r.name: r for r in acc.finalize()}
    return {s: reports[f"sorted_values_{s}"] for s in SEASONS}


def sorted_value_envelope(ensemble, observed: RainfallSeries,
                          resolution: str) -> CheckReport:
    """Sorted aggregated (daily or monthly) rainfall envelope."""
    obs_sorted = np.sort(aggregate(observed.values, observed.timestamps,
                                   resolution)[0])
    stack = []
    for series in ensemble:
        stack.append(np.sort(aggregate(series.values, series.timestamps,
                                       resolution)[0]))
    return CheckReport.build(f"sorted_{resolution}", obs_sorted,
                             np.stack(stack),
                             [f"rank_{i}" for i in range(obs_sorted.size)])


# ---------------------------------------------------------------------------
# Posterior effect curves
# ---------------------------------------------------------------------------

def effect_curves(chains, bases, n_grid: int = 200) -> dict:
    """Posterior median and 95% band of every spline effect on a covariate
    grid.

    Seasonal effects are evaluated over one cycle of the year position,
    overall effects over the record fraction [0, 1].  Returns a dict
    mapping effect name (a1, a2, b1_dry, ...) to a CheckReport whose
    observed field repeats the posterior median (there is no data-side
    value for an effect curve).
    """
    pooled = chains.pooled()
    if pooled.shape[0] == 0:
        raise ValueError("posterior is empty")
    layout = chains.layout
    grid = np.arange(n_grid) / n_grid
    rows = {"seasonal": bases.seasonal.evaluate(grid),
            "overall": bases.overall.evaluate(grid)}
    out = {}
    for sname in layout.spline_names:
        stem = sname.split("_")[0]
        basis_kind = "seasonal" if stem.endswith("1") else "overall"
        coefs = pooled[:, layout.spline_slice(sname)]
        curves = coefs @ rows[basis_kind].T
        lo, med, hi = np.percentile(curves, ENVELOPE_QUANTILES, axis=0)
        out[sname] = CheckReport(
            name=f"effect_{sname}", observed=med.copy(), lo=lo, median=med,
            hi=hi, inside=np.ones(n_grid, dtype=bool),
            labels=[f"{x:.4f}" for x in grid],
            meta={"covariate": basis_kind, "n_draws": pooled.shape[0]})
    return out
