"""Penalized cubic regression spline bases on calendar-time covariates.

Two basis families are provided: a cyclic cubic spline of the position
within the calendar year (periodic in value, first and second derivative)
and a natural cubic spline of the position within the whole record.  Both
are parameterized by the function values at the knots, carry the exact
integrated-squared-curvature penalty, and are column-centered (sum-to-zero
over the record hours) so that intercepts can be kept separate.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
import scipy.linalg


class CovariateError(ValueError):
    """Raised when timestamps do not form a valid gap-free hourly record."""


@dataclass(frozen=True)
class TimeCovariates:
    """Per-hour positions within the calendar year and the full record.

    Attributes
    ----------
    n_hours : int
        Number of hours T in the record.
    year_position : ndarray, shape (T,)
        Fraction of the way through the calendar year, in [0, 1).
        Leap-aware: the denominator is the hour count of that specific year.
    overall_position : ndarray, shape (T,)
        Fraction of the way through the record, index / (T - 1), in [0, 1].
    """

    n_hours: int
    year_position: np.ndarray
    overall_position: np.ndarray


def build_time_covariates(timestamps) -> TimeCovariates:
    """Validate an hourly timestamp vector and derive its time covariates.

    Parameters
    ----------
    timestamps : array-like
        Hourly calendar timestamps (datetime64, ISO-8601 strings, or
        anything castable).  Must be strictly increasing with exactly one
        hour between consecutive entries.

    Returns
    -------
    TimeCovariates

    Raises
    ------
    CovariateError
        If any timestamp is off the hour grid, duplicated, or leaves a gap;
        the message names the first offending index.
    """
    ts = np.asarray(timestamps, dtype="datetime64[s]")
    if ts.ndim != 1 or ts.size == 0:
        raise CovariateError("timestamps must be a non-empty 1-d sequence")
    secs = ts.astype("int64")
    off_grid = np.nonzero(secs % 3600 != 0)[0]
    if off_grid.size:
        i = int(off_grid[0])
        raise CovariateError(f"timestamp at index {i} ({ts[i]}) is not on the hour")
    if ts.size > 1:
        steps = np.diff(secs)
        bad = np.nonzero(steps != 3600)[0]
        if bad.size:
            i = int(bad[0])
            if steps[i] <= 0:
                raise CovariateError(
                    f"timestamp at index {i + 1} ({ts[i + 1]}) duplicates or precedes "
                    f"index {i} ({ts[i]})"
                )
            raise CovariateError(
                f"gap of {steps[i] // 3600} hours between index {i} ({ts[i]}) "
                f"and index {i + 1} ({ts[i + 1]})"
            )

    hours = ts.astype("datetime64[h]")
    year_start = ts.astype("datetime64[Y]").astype("datetime64[h]")
    next_year_start = (ts.astype("datetime64[Y]") + 1).astype("datetime64[h]")
    hour_of_year = (hours - year_start).astype("int64")
    hours_in_year = (next_year_start - year_start).astype("int64")
    year_position = hour_of_year / hours_in_year

    n = ts.size
    if n > 1:
        overall_position = np.arange(n) / (n - 1)
    else:
        overall_position = np.zeros(1)
    return TimeCovariates(n, year_position, overall_position)


@dataclass(frozen=True)
class SplineBasis:
    """Precomputed design and curvature penalty for one spline effect.

    The basis is parameterized by function values at the knots; the
    sum-to-zero constraint over the record hours is absorbed, so the
    centered coefficient space has one dimension fewer than the knot count
    and the design columns each sum to zero exactly.

    Attributes
    ----------
    kind : str
        "cyclic-cubic" or "cubic".
    knots : ndarray, shape (n_knots,)
        Knot positions on the covariate axis.
    design : ndarray, shape (T, K)
        Centered basis values per record hour, K = n_knots - 1.
    penalty : ndarray, shape (K, K)
        Symmetric positive-semidefinite integrated-squared-curvature
        penalty in the centered coefficient space.
    centered : bool
    """

    kind: str
    knots: np.ndarray
    design: np.ndarray
    penalty: np.ndarray
    centered: bool
    transform: np.ndarray = field(repr=False, default=None)  # (n_knots, K)
    raw_penalty: np.ndarray = field(repr=False, default=None)  # (n_knots, n_knots)

    @property
    def n_coef(self) -> int:
        return self.design.shape[1]

    def evaluate(self, x) -> np.ndarray:
        """Centered design rows at arbitrary covariate values.

        For the record hours this reproduces ``design``; cyclic bases wrap
        x modulo 1, cubic bases extrapolate linearly beyond the knots.
        """
        x = np.atleast_1d(np.asarray(x, dtype=float))
        if self.kind == "cyclic-cubic":
            rows = cyclic_design_rows(x, self.knots)
        else:
            rows = natural_design_rows(x, self.knots)
        if self.transform is not None:
            rows = rows @ self.transform
        return rows


# ---------------------------------------------------------------------------
# Natural cubic regression spline (value parameterization)
# ---------------------------------------------------------------------------

def _natural_curvature_map(knots: np.ndarray):
    """Map knot values to knot second derivatives for the natural spline.

    Returns (F, S): F is (K, K) with delta = F @ beta (first and last rows
    zero), S = D' B^{-1} D is the exact integral of the squared second
    derivative as a quadratic form in beta.
    """
    k = knots.size
    h = np.diff(knots)
    dmat = np.zeros((k - 2, k))
    bmat = np.zeros((k - 2, k - 2))
    for i in range(k - 2):
        dmat[i, i] = 1.0 / h[i]
        dmat[i, i + 1] = -1.0 / h[i] - 1.0 / h[i + 1]
        dmat[i, i + 2] = 1.0 / h[i + 1]
        bmat[i, i] = (h[i] + h[i + 1]) / 3.0
        if i + 1 < k - 2:
            bmat[i, i + 1] = h[i + 1] / 6.0
            bmat[i + 1, i] = h[i + 1] / 6.0
    binv_d = scipy.linalg.solve(bmat, dmat, assume_a="pos")
    f = np.zeros((k, k))
    f[1:-1] = binv_d
    s = dmat.T @ binv_d
    return f, 0.5 * (s + s.T)


def natural_design_rows(x: np.ndarray, knots: np.ndarray) -> np.ndarray:
    """Raw (uncentered) natural-spline basis rows at covariate values x.

    Row j gives f(x_j) = row . beta where beta holds the knot values and f
    is the natural cubic interpolant; outside the knot range f continues
    linearly (zero curvature).
    """
    f, _ = _natural_curvature_map(knots)
    return _interp_rows(x, knots, f, cyclic=False)


def natural_penalty(knots: np.ndarray) -> np.ndarray:
    """Raw curvature penalty of the natural spline (null space: affine)."""
    _, s = _natural_curvature_map(knots)
    return s


# ---------------------------------------------------------------------------
# Cyclic cubic regression spline
# ---------------------------------------------------------------------------

def _cyclic_curvature_map(knots: np.ndarray, period: float = 1.0):
    """As _natural_curvature_map but for the period-1 cyclic spline.

    Knots are the n distinct positions in [0, period); the wrap knot
    knots[0] + period is implicit and carries the same coefficient.
    """
    n = knots.size
    h = np.empty(n)
    h[:-1] = np.diff(knots)
    h[-1] = knots[0] + period - knots[-1]
    bmat = np.zeros((n, n))
    dmat = np.zeros((n, n))
    for i in range(n):
        prev = (i - 1) % n
        nxt = (i + 1) % n
        bmat[i, i] = (h[prev] + h[i]) / 3.0
        bmat[i, nxt] += h[i] / 6.0
        bmat[nxt, i] += h[i] / 6.0
        dmat[i, i] = -(1.0 / h[prev] + 1.0 / h[i])
        dmat[i, nxt] += 1.0 / h[i]
        dmat[nxt, i] += 1.0 / h[i]
    binv_d = scipy.linalg.solve(bmat, dmat, assume_a="pos")
    s = dmat.T @ binv_d
    return binv_d, 0.5 * (s + s.T)


def cyclic_design_rows(x: np.ndarray, knots: np.ndarray, period: float = 1.0) -> np.ndarray:
    """Raw cyclic-spline basis rows; x is wrapped modulo the period."""
    f, _ = _cyclic_curvature_map(knots, period)
    return _interp_rows(x, knots, f, cyclic=True, period=period)


def cyclic_penalty(knots: np.ndarray, period: float = 1.0) -> np.ndarray:
    """Raw curvature penalty of the cyclic spline (null space: constants)."""
    _, s = _cyclic_curvature_map(knots, period)
    return s


def _interp_rows(x, knots, f, cyclic, period: float = 1.0):
    """Cardinal-basis rows from the cubic interpolation formula.

    Within [knot_j, knot_{j+1}] with gap h:
        f(x) = A b_j + B b_{j+1} + (A^3 - A) h^2/6 d_j + (B^3 - B) h^2/6 d_{j+1}
    where b are knot values, d = F b are knot second derivatives, A and B
    the usual linear interpolation weights.
    """
    x = np.asarray(x, dtype=float)
    n = knots.size
    if cyclic:
        xe = x - np.floor(x / period) * period
        upper = np.concatenate([knots[1:], [knots[0] + period]])
    else:
        xe = np.clip(x, knots[0], knots[-1])
        upper = knots[1:]
    j = np.clip(np.searchsorted(knots, xe, side="right") - 1, 0, n - 2 + (1 if cyclic else 0))
    lo = knots[j]
    hi = upper[j] if cyclic else knots[j + 1]
    h = hi - lo
    a = (hi - xe) / h
    b = (xe - lo) / h
    c = (a**3 - a) * h**2 / 6.0
    d = (b**3 - b) * h**2 / 6.0
    jn = (j + 1) % n if cyclic else j + 1

    rows = np.zeros((x.size, n))
    rows[np.arange(x.size), j] += a
    rows[np.arange(x.size), jn] += b
    rows += c[:, None] * f[j]
    rows += d[:, None] * f[jn]

    if not cyclic:
        # linear continuation beyond the knot range
        above = x > knots[-1]
        below = x < knots[0]
        if above.any() or below.any():
            h0, hl = knots[1] - knots[0], knots[-1] - knots[-2]
            d_lo = np.zeros(n)
            d_lo[0], d_lo[1] = -1.0 / h0, 1.0 / h0
            d_lo -= (h0 / 6.0) * f[1]
            d_hi = np.zeros(n)
            d_hi[-2], d_hi[-1] = -1.0 / hl, 1.0 / hl
            d_hi += (hl / 6.0) * f[-2]
            val_lo = np.zeros(n)
            val_lo[0] = 1.0
            val_hi = np.zeros(n)
            val_hi[-1] = 1.0
            if above.any():
                rows[above] = val_hi + np.outer(x[above] - knots[-1], d_hi)
            if below.any():
                rows[below] = val_lo + np.outer(x[below] - knots[0], d_lo)
    return rows


# ---------------------------------------------------------------------------
# Builders
# ---------------------------------------------------------------------------

def _center(raw_design: np.ndarray, raw_penalty: np.ndarray):
    """Absorb the sum-to-zero-over-hours constraint into the basis.

    Returns (design, penalty, Z) with design = raw_design @ Z, columns
    summing to zero exactly, and Z an orthonormal basis of the constraint
    null space (one column fewer than the raw coefficient count).
    """
    colmeans = raw_design.mean(axis=0)
    z = scipy.linalg.null_space(colmeans[None, :])
    design = raw_design @ z
    penalty = z.T @ raw_penalty @ z
    return design, 0.5 * (penalty + penalty.T), z


def build_cyclic_basis(cov: TimeCovariates, n_knots: int = 6) -> SplineBasis:
    """Cyclic cubic spline basis of the within-year position.

    Knots sit at i/n_knots for i = 0..n_knots-1 on the unit year; the wrap
    point (1 == 0) has continuous value, first and second derivative.

    Raises ------
    ValueError if n_knots < 4.
    """
    if n_knots < 4:
        raise ValueError(f"cyclic basis needs at least 4 knots, got {n_knots}")
    knots = np.arange(n_knots) / n_knots
    raw = cyclic_design_rows(cov.year_position, knots)
    raw_pen = cyclic_penalty(knots)
    design, penalty, z = _center(raw, raw_pen)
    return SplineBasis("cyclic-cubic", knots, design, penalty, True, z, raw_pen)


def build_overall_basis(cov: TimeCovariates, n_knots: int) -> SplineBasis:
    """Natural cubic spline basis of the overall record position.

    Knots sit at i/n_knots for i = 0..n_knots-1; with one knot per record
    year this places them at the year boundaries.  Beyond the last knot the
    basis continues linearly.
    """
    if n_knots < 4:
        raise ValueError(f"cubic basis needs at least 4 knots, got {n_knots}")
    knots = np.arange(n_knots) / n_knots
    raw = natural_design_rows(cov.overall_position, knots)
    raw_pen = natural_penalty(knots)
    design, penalty, z = _center(raw, raw_pen)
    return SplineBasis("cubic", knots, design, penalty, True, z, raw_pen)


@dataclass(frozen=True)
class BasisSet:
    """The shared pair of bases used by every regression in the model."""

    seasonal: SplineBasis
    overall: SplineBasis

    @classmethod
    def build(cls, cov: TimeCovariates, seasonal_knots: int = 6, overall_knots: int = 8):
        return cls(
            seasonal=build_cyclic_basis(cov, seasonal_knots),
            overall=build_overall_basis(cov, overall_knots),
        )
