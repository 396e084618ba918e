"""Simulation of hourly rainfall series from fitted or fixed parameters.

A series is generated in two stages: the latent chain is stepped through
the hour-by-hour transition matrix, then each hour's rainfall is drawn
from the discretized conditional model by inverting the cumulative grid
masses analytically.  The second stage reproduces the fitted likelihood
exactly, including the 0.1 mm truncation and the 0.2 mm rounding grid; no
continuous value is drawn and rounded.

Ensembles assign each series an independent random substream derived from
(seed, series index), so results are reproducible and order-independent.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from numba import njit
from scipy.special import expit

from .model import (
    EmissionModel,
    GRID_MM,
    RainfallSeries,
    StateSpace,
    TransitionModel,
    TRUNC_MM,
    XI_EPS,
)
from .splines import BasisSet, build_time_covariates


@dataclass(frozen=True)
class SimulationRequest:
    """What to simulate: calendar horizon, ensemble size, and seeding.

    timestamps : hourly calendar stamps of the horizon (typically the
        observed record's own calendar, so leap years line up).
    n_series : number of series; for posterior ensembles, None means one
        per retained draw.
    allow_cycling : permit n_series larger than the number of draws by
        reusing draws round-robin.
    keep_latent : also return the latent state path per series.
    """

    timestamps: object
    n_series: int | None = None
    seed: int = 0
    allow_cycling: bool = False
    keep_latent: bool = False


class _HorizonGrid:
    """Covariates and design rows of a simulation horizon, built once."""

    def __init__(self, timestamps, bases: BasisSet):
        self.cov = build_time_covariates(timestamps)
        self.timestamps = np.asarray(timestamps, dtype="datetime64[s]")
        self.seasonal = bases.seasonal.evaluate(self.cov.year_position)
        self.overall = bases.overall.evaluate(self.cov.overall_position)
        self.bases = bases


@njit(cache=True)
def _latent_path(pdt, q, v, r, p0, u):  # pragma: no cover - via wrapper
    """Step the hidden chain; u is one uniform per hour."""
    n_t, n_d = pdt.shape
    n_w = q.shape[0]
    path = np.empty(n_t, np.int32)

    x = u[0]
    s = n_d + n_w - 1
    acc = 0.0
    for i in range(n_d + n_w):
        acc += p0[i]
        if x < acc:
            s = i
            break
    path[0] = s

    for t in range(1, n_t):
        x = u[t]
        if s < n_d:
            p = pdt[t, s]
            if x >= p:
                # leave the dry block; q picks the wet state
                y = (x - p) / (1.0 - p)
                s = n_d + n_w - 1
                acc = 0.0
                for j in range(n_w):
                    acc += q[j]
                    if y < acc:
                        s = n_d + j
                        break
        else:
            i = s - n_d
            if x < r[i, 0]:
                # wet -> dry; v picks the clone
                y = x / r[i, 0]
                s = n_d - 1
                acc = 0.0
                for d in range(n_d):
                    acc += v[d]
                    if y < acc:
                        s = d
                        break
            else:
                y = x - r[i, 0]
                s = n_d + n_w - 1
                acc = 0.0
                for j in range(n_w):
                    acc += r[i, 1 + j]
                    if y < acc:
                        s = n_d + j
                        break
        path[t] = s
    return path


def _sample_values(path, pi, sigma, xi, space: StateSpace, u) -> np.ndarray:
    """Draw the observed grid value per hour given the latent path.

    With probability pi_t the hour is zero.  Otherwise the conditional
    cumulative position c is mapped through the truncated GPD quantile,
    y* = F^{-1}(F(0.1) + c (1 - F(0.1))), and the emitted grid point is the
    one whose censoring interval (x - 0.1, x + 0.1] contains y*.
    """
    n_t = path.size
    groups = np.where(path < space.n_dry, 0, path - space.n_dry + 1)
    rows = np.arange(n_t)
    pi_t = pi[rows, groups]
    wet = u >= pi_t
    values = np.zeros(n_t)
    if not wet.any():
        return values
    c = (u[wet] - pi_t[wet]) / (1.0 - pi_t[wet])
    sig = sigma[rows[wet], groups[wet]]
    shape = xi[rows[wet], groups[wet]]
    with np.errstate(all="ignore"):
        limit = np.abs(shape) <= XI_EPS
        # survival at the truncation point, then at the target quantile
        s01 = np.where(
            limit,
            np.exp(-TRUNC_MM / sig),
            np.where(1.0 + shape * TRUNC_MM / sig > 0,
                     np.exp(-np.log1p(shape * TRUNC_MM / sig)
                            / np.where(limit, 1.0, shape)),
                     0.0),
        )
    if np.any(s01 == 0.0):
        # negative shape with the support endpoint below the truncation
        # point: the fitted likelihood gives such hours zero wet mass, so
        # emitting anything would contradict it
        raise ValueError(
            "wet emission has no support above the 0.1 mm truncation point "
            "(shape too negative for the scale); cannot sample")
    with np.errstate(all="ignore"):
        s_target = s01 * (1.0 - c)
        y = np.where(
            limit,
            -sig * np.log(s_target),
            sig * (s_target ** -np.where(limit, 1.0, shape) - 1.0)
            / np.where(limit, 1.0, shape),
        )
    # cap before the integer cast; a quantile this deep in the tail only
    # arises from astronomically unlucky uniforms or absurd shape values
    k = np.minimum(np.maximum(1, np.ceil((y - TRUNC_MM) / GRID_MM)), 1e15)
    values[wet] = GRID_MM * k.astype(np.int64)
    return values


def simulate_series(trans: TransitionModel, emit: EmissionModel,
                    space: StateSpace, bases: BasisSet, timestamps,
                    rng, keep_latent: bool = False):
    """One simulated series on the given hourly calendar.

    rng is a seed or a numpy Generator.  Returns a RainfallSeries, or
    (RainfallSeries, latent path) when keep_latent is set.
    """
    grid = _HorizonGrid(timestamps, bases)
    return _simulate_on_grid(trans, emit, space, grid, rng, keep_latent)


def _simulate_on_grid(trans, emit, space, grid: _HorizonGrid, rng,
                      keep_latent):
    rng = np.random.default_rng(rng) if not isinstance(rng, np.random.Generator) else rng
    trans.validate(space)
    emit.validate(space)
    shared = grid.seasonal @ trans.a1 + grid.overall @ trans.a2
    pdt = expit(shared[:, None] + trans.iota[None, :])
    pi = expit(emit.eta[None, :] + grid.seasonal @ emit.b1.T
               + grid.overall @ emit.b2.T)
    sigma = np.exp(emit.alpha[None, :] + grid.seasonal @ emit.c1.T
                   + grid.overall @ emit.c2.T)
    xi = (emit.gamma[None, :] + grid.seasonal @ emit.d1.T
          + grid.overall @ emit.d2.T)

    u_path = rng.random(grid.cov.n_hours)
    u_emit = rng.random(grid.cov.n_hours)
    path = _latent_path(pdt, trans.q, trans.v, trans.r, trans.p0, u_path)
    values = _sample_values(path, pi, sigma, xi, space, u_emit)
    series = RainfallSeries(values, grid.timestamps, grid.cov)
    if keep_latent:
        return series, path
    return series


def iter_ensemble(request: SimulationRequest, chains, space: StateSpace,
                  bases: BasisSet):
    """Yield (series index, draw index, series [, latent path]) per draw.

    One series per retained posterior draw, pooled across chains in chain
    order; a smaller n_series truncates, a larger one requires
    allow_cycling.  Streaming keeps memory flat for large ensembles.
    """
    pooled = chains.pooled()
    n_draws = pooled.shape[0]
    if n_draws == 0:
        raise ValueError("posterior is empty; nothing to simulate from")
    n_series = request.n_series if request.n_series is not None else n_draws
    if n_series < 1:
        raise ValueError("n_series must be at least 1")
    if n_series > n_draws and not request.allow_cycling:
        raise ValueError(
            f"{n_series} series requested from {n_draws} draws; pass "
            f"allow_cycling to reuse draws")
    grid = _HorizonGrid(request.timestamps, bases)
    seqs = np.random.SeedSequence(request.seed).spawn(n_series)
    layout = chains.layout
    for i in range(n_series):
        draw = i % n_draws
        trans, emit, _ = layout.unpack(pooled[draw])
        out = _simulate_on_grid(trans, emit, space, grid,
                                np.random.default_rng(seqs[i]),
                                request.keep_latent)
        if request.keep_latent:
            yield i, draw, out[0], out[1]
        else:
            yield i, draw, out


def simulate_ensemble(request: SimulationRequest, chains, space: StateSpace,
                      bases: BasisSet) -> list:
    """Materialized list of the series from `iter_ensemble`."""
    return [item[2] for item in iter_ensemble(request, chains, space, bases)]


def iter_fixed_ensemble(request: SimulationRequest, trans: TransitionModel,
                        emit: EmissionModel, space: StateSpace,
                        bases: BasisSet):
    """Ensemble variant with every series drawn from one parameter vector."""
    n_series = request.n_series if request.n_series is not None else 1
    if n_series < 1:
        raise ValueError("n_series must be at least 1")
    grid = _HorizonGrid(request.timestamps, bases)
    seqs = np.random.SeedSequence(request.seed).spawn(n_series)
    for i in range(n_series):
        out = _simulate_on_grid(trans, emit, space, grid,
                                np.random.default_rng(seqs[i]),
                                request.keep_latent)
        if request.keep_latent:
            yield i, i, out[0], out[1]
        else:
            yield i, i, out


def dry_state_runs(path: np.ndarray, space: StateSpace) -> np.ndarray:
    """Lengths of maximal runs the latent chain spends in the dry block.

    Includes the (censored) boundary runs; callers studying the run-length
    law usually drop the first and last entries.
    """
    dry = np.asarray(path) < space.n_dry
    if dry.size == 0:
        return np.zeros(0, dtype=np.int64)
    changes = np.nonzero(np.diff(dry.astype(np.int8)))[0]
    starts = np.concatenate(([0], changes + 1))
    ends = np.concatenate((changes, [dry.size - 1]))
    lengths = ends - starts + 1
    return lengths[dry[starts]]
