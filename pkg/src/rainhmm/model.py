"""Clone-state hidden Markov model core: parameters, transition matrix,
censored rainfall density, and the forward-algorithm log-likelihood.

The latent chain has D "clone" dry states sharing one conditional rainfall
model but carrying different, time-varying persistence probabilities, plus
W wet states.  Hourly rainfall is a point mass at zero mixed with a
zero-location Generalized Pareto, rounded to a 0.2 mm grid and truncated
at 0.1 mm.  The likelihood marginalizes the latent path exactly with a
scaled forward recursion whose transition matrix changes every hour.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from numba import njit
from scipy.special import expit

from .splines import BasisSet, TimeCovariates, build_time_covariates

GRID_MM = 0.2          # rounding grid of the gauge record
TRUNC_MM = 0.1         # GPD truncation point: zeros absorb everything below
XI_EPS = 1e-6          # |xi| below this uses the exponential limit of the GPD


@dataclass(frozen=True)
class StateSpace:
    """Latent state bookkeeping: D clone dry states then W wet states.

    States 0..D-1 are the dry clones (identical conditional model, distinct
    persistence), states D..D+W-1 are wet.  Emission group 0 is the shared
    dry model; group 1+j belongs to wet state j.
    """

    n_dry: int
    n_wet: int

    def __post_init__(self):
        if self.n_dry < 1 or self.n_wet < 1:
            raise ValueError(
                f"need at least one dry and one wet state, got D={self.n_dry}, W={self.n_wet}"
            )

    @property
    def n_states(self) -> int:
        return self.n_dry + self.n_wet

    @property
    def n_groups(self) -> int:
        """Distinct conditional rainfall models: one dry + one per wet state."""
        return 1 + self.n_wet

    def group_of(self, state: int) -> int:
        return 0 if state < self.n_dry else state - self.n_dry + 1


@dataclass
class TransitionModel:
    """Time-varying transition structure.

    iota : (D,) per-clone persistence intercepts, logit scale.
    a1, a2 : seasonal / overall spline coefficients shared by every clone.
    q : (W,) probabilities of each wet state given a dry->wet move.
    v : (D,) probabilities of each clone given a wet->dry move.
    r : (W, W+1) wet-state rows; column 0 is the total wet->dry mass,
        column 1+j the probability of moving to wet state j.
    p0 : (D+W,) initial state distribution.
    """

    iota: np.ndarray
    a1: np.ndarray
    a2: np.ndarray
    q: np.ndarray
    v: np.ndarray
    r: np.ndarray
    p0: np.ndarray

    def validate(self, space: StateSpace, tol: float = 1e-12):
        d, w = space.n_dry, space.n_wet
        if self.iota.shape != (d,) or self.q.shape != (w,) or self.v.shape != (d,):
            raise ValueError("transition parameter shapes do not match the state space")
        if self.r.shape != (w, w + 1) or self.p0.shape != (d + w,):
            raise ValueError("transition parameter shapes do not match the state space")
        for name, arr in (("q", self.q), ("v", self.v), ("p0", self.p0)):
            _check_simplex(name, arr, tol)
        for i in range(w):
            _check_simplex(f"r[{i}]", self.r[i], tol)


def _check_simplex(name, arr, tol):
    if np.any(arr < -tol) or np.any(arr > 1 + tol):
        raise ValueError(f"{name} has entries outside [0, 1]")
    if abs(arr.sum() - 1.0) > tol:
        raise ValueError(f"{name} sums to {arr.sum():.15f}, not 1")


@dataclass
class EmissionModel:
    """Per-group conditional rainfall model on regression scales.

    For group z at hour t:
        logit pi_t(z)  = eta[z]   + b1[z] . seasonal + b2[z] . overall
        log sigma_t(z) = alpha[z] + c1[z] . seasonal + c2[z] . overall
        xi_t(z)        = gamma[z] + d1[z] . seasonal + d2[z] . overall

    Intercepts are (G,); coefficient blocks are (G, K) with one row per
    group, all groups sharing the same bases.
    """

    eta: np.ndarray
    b1: np.ndarray
    b2: np.ndarray
    alpha: np.ndarray
    c1: np.ndarray
    c2: np.ndarray
    gamma: np.ndarray
    d1: np.ndarray
    d2: np.ndarray

    def validate(self, space: StateSpace):
        g = space.n_groups
        for name in ("eta", "alpha", "gamma"):
            if getattr(self, name).shape != (g,):
                raise ValueError(f"{name} must have one entry per conditional model")
        for name in ("b1", "b2", "c1", "c2", "d1", "d2"):
            arr = getattr(self, name)
            if arr.ndim != 2 or arr.shape[0] != g:
                raise ValueError(f"{name} must have one coefficient row per conditional model")


@dataclass(frozen=True)
class RainfallSeries:
    """Validated hourly record: values on the 0.2 mm grid plus calendar."""

    values: np.ndarray
    timestamps: np.ndarray
    covariates: TimeCovariates

    @classmethod
    def create(cls, values, timestamps) -> "RainfallSeries":
        values = np.asarray(values, dtype=float)
        cov = build_time_covariates(timestamps)
        if values.shape != (cov.n_hours,):
            raise ValueError(
                f"{values.size} values but {cov.n_hours} timestamps"
            )
        if np.any(values < 0):
            i = int(np.argmax(values < 0))
            raise ValueError(f"negative rainfall {values[i]} at index {i}")
        offgrid = np.abs(values / GRID_MM - np.round(values / GRID_MM)) > 1e-9
        if np.any(offgrid):
            i = int(np.argmax(offgrid))
            raise ValueError(f"value {values[i]} at index {i} is not on the 0.2 mm grid")
        ts = np.asarray(timestamps, dtype="datetime64[s]")
        return cls(values, ts, cov)

    @property
    def n_hours(self) -> int:
        return self.values.size


# ---------------------------------------------------------------------------
# Persistence and the transition matrix
# ---------------------------------------------------------------------------

def persistence_probs(trans: TransitionModel, bases: BasisSet) -> np.ndarray:
    """(T, D) matrix of clone persistence probabilities p_d(t).

    logit p_d(t) = iota[d] + a1(t) + a2(t), with both spline effects shared
    across clones; the intercept ordering iota[0] > iota[1] > ... therefore
    carries over to p at every hour.
    """
    shared = bases.seasonal.design @ trans.a1 + bases.overall.design @ trans.a2
    return expit(shared[:, None] + trans.iota[None, :])


def persistence_prob(d: int, t: int, trans: TransitionModel, bases: BasisSet) -> float:
    """Persistence probability of clone d at hour t (scalar convenience)."""
    u = (
        trans.iota[d]
        + bases.seasonal.design[t] @ trans.a1
        + bases.overall.design[t] @ trans.a2
    )
    return float(expit(u))


def transition_matrix(t: int, trans: TransitionModel, space: StateSpace,
                      bases: BasisSet) -> np.ndarray:
    """Full (D+W) x (D+W) stochastic matrix governing the step into hour t."""
    p_row = persistence_probs(trans, bases)[t]
    return transition_matrix_from_p(p_row, trans, space)


def transition_matrix_from_p(p: np.ndarray, trans: TransitionModel,
                             space: StateSpace) -> np.ndarray:
    """Transition matrix for given clone persistence probabilities p (D,).

    Dry row d: diagonal p[d], zero on other clones, q_j (1 - p[d]) on wet
    column j.  Wet row i: v_d r[i, 0] on clone column d, r[i, 1+j] on wet
    column j.
    """
    d, w = space.n_dry, space.n_wet
    n = d + w
    mat = np.zeros((n, n))
    idx = np.arange(d)
    mat[idx, idx] = p
    mat[:d, d:] = np.outer(1.0 - p, trans.q)
    mat[d:, :d] = np.outer(trans.r[:, 0], trans.v)
    mat[d:, d:] = trans.r[:, 1:]
    return mat


# ---------------------------------------------------------------------------
# Censored, truncated GPD emission density
# ---------------------------------------------------------------------------

def gpd_cdf(x, sigma, xi):
    """CDF of the zero-location GPD, elementwise over broadcast arguments.

    F(x) = 1 - (1 + xi x / sigma)^(-1/xi) for x >= 0; the exponential limit
    1 - exp(-x/sigma) is used when |xi| <= XI_EPS.  For xi < 0 the support
    ends at -sigma/xi and F is 1 beyond it.
    """
    x, sigma, xi = np.broadcast_arrays(
        np.asarray(x, dtype=float), np.asarray(sigma, dtype=float),
        np.asarray(xi, dtype=float),
    )
    if np.any(sigma <= 0):
        raise ValueError("GPD scale must be positive")
    if np.any(x < 0):
        raise ValueError("GPD support is x >= 0")
    out = np.empty(x.shape)
    near_zero = np.abs(xi) <= XI_EPS
    if near_zero.any():
        out[near_zero] = -np.expm1(-x[near_zero] / sigma[near_zero])
    gen = ~near_zero
    if gen.any():
        arg = 1.0 + xi[gen] * x[gen] / sigma[gen]
        # arg <= 0 only for xi < 0 at or past the upper endpoint
        out[gen] = np.where(
            arg > 0, -np.expm1(-np.log(np.maximum(arg, 1e-300)) / xi[gen]), 1.0
        )
    return out if out.ndim else float(out)


def emission_params(emit: EmissionModel, bases: BasisSet):
    """Hourly conditional parameters (pi, sigma, xi), each (T, G)."""
    s, o = bases.seasonal.design, bases.overall.design
    pi = expit(emit.eta[None, :] + s @ emit.b1.T + o @ emit.b2.T)
    sigma = np.exp(emit.alpha[None, :] + s @ emit.c1.T + o @ emit.c2.T)
    xi = emit.gamma[None, :] + s @ emit.d1.T + o @ emit.d2.T
    return pi, sigma, xi


def emission_prob(x: float, z: int, t: int, emit: EmissionModel,
                  space: StateSpace, bases: BasisSet) -> float:
    """Probability of observing x mm at hour t in latent state z.

    x must be 0 or a positive multiple of 0.2.  Zero draws pi_t; a grid
    value x draws (1 - pi_t) [F(x+0.1) - F(x-0.1)] / [1 - F(0.1)] with F
    the GPD at that hour's scale and shape.
    """
    if x < 0 or abs(x / GRID_MM - round(x / GRID_MM)) > 1e-9:
        raise ValueError(f"observation {x} is not on the 0.2 mm grid")
    pi, sigma, xi = emission_params(emit, bases)
    g = space.group_of(z)
    p, s, k = pi[t, g], sigma[t, g], xi[t, g]
    if x == 0:
        return float(p)
    denom = 1.0 - gpd_cdf(TRUNC_MM, s, k)
    if denom <= 0.0:
        return 0.0
    mass = gpd_cdf(x + TRUNC_MM, s, k) - gpd_cdf(x - TRUNC_MM, s, k)
    return float((1.0 - p) * mass / denom)


def emission_matrix(values: np.ndarray, emit: EmissionModel,
                    bases: BasisSet) -> np.ndarray:
    """(T, G) probabilities of each observed value under each group.

    This is the per-proposal precomputation that dominates likelihood cost;
    the forward recursion afterwards only reads it.
    """
    pi, sigma, xi = emission_params(emit, bases)
    return emission_matrix_from_params(values, pi, sigma, xi)


def emission_matrix_from_params(values, pi, sigma, xi) -> np.ndarray:
    """Emission matrix from precomputed (T, G) parameter grids."""
    x = values[:, None]
    f_hi = gpd_cdf(x + TRUNC_MM, sigma, xi)
    f_lo = gpd_cdf(np.maximum(x - TRUNC_MM, 0.0), sigma, xi)
    denom = 1.0 - gpd_cdf(TRUNC_MM, sigma, xi)
    with np.errstate(invalid="ignore", divide="ignore"):
        wet_mass = np.where(denom > 0, (1.0 - pi) * (f_hi - f_lo) / denom, 0.0)
    return np.where(x == 0, pi, wet_mass)


def emission_grid_masses(n: int, pi: float, sigma: float, xi: float) -> np.ndarray:
    """Masses of the first n grid points 0, 0.2, ..., 0.2(n-1) (diagnostic).

    The remaining tail mass is (1 - pi) S(0.2 n - 0.1) / S(0.1) with S the
    GPD survival function, so the full distribution sums to one.
    """
    x = np.arange(n) * GRID_MM
    denom = 1.0 - gpd_cdf(TRUNC_MM, sigma, xi)
    out = np.empty(n)
    out[0] = pi
    if denom <= 0:
        out[1:] = 0.0
        return out
    hi = gpd_cdf(x[1:] + TRUNC_MM, sigma, xi)
    lo = gpd_cdf(x[1:] - TRUNC_MM, sigma, xi)
    out[1:] = (1.0 - pi) * (hi - lo) / denom
    return out


# ---------------------------------------------------------------------------
# Forward algorithm
# ---------------------------------------------------------------------------

@njit(cache=True)
def _forward(pdt, emis, q, v, r, p0):  # pragma: no cover - exercised via wrapper
    """Scaled forward recursion; returns (loglik, first bad hour or -1).

    pdt is (T, D) clone persistence, emis is (T, G) observation
    probabilities per group.  Exploits the sparsity of the clone block: the
    step into hour t costs O(D + W^2) instead of O((D+W)^2).
    """
    n_t, n_d = pdt.shape
    n_w = q.shape[0]
    n_s = n_d + n_w
    alpha = np.empty(n_s)
    nxt = np.empty(n_s)

    for s in range(n_d):
        alpha[s] = p0[s] * emis[0, 0]
    for j in range(n_w):
        alpha[n_d + j] = p0[n_d + j] * emis[0, 1 + j]
    c = 0.0
    for s in range(n_s):
        c += alpha[s]
    if not (c > 0.0) or not np.isfinite(c):
        return -np.inf, 0
    loglik = np.log(c)
    for s in range(n_s):
        alpha[s] /= c

    for t in range(1, n_t):
        wet_to_dry = 0.0
        for i in range(n_w):
            wet_to_dry += alpha[n_d + i] * r[i, 0]
        dry_leaving = 0.0
        for d in range(n_d):
            p = pdt[t, d]
            nxt[d] = (alpha[d] * p + v[d] * wet_to_dry) * emis[t, 0]
            dry_leaving += alpha[d] * (1.0 - p)
        for j in range(n_w):
            acc = q[j] * dry_leaving
            for i in range(n_w):
                acc += alpha[n_d + i] * r[i, 1 + j]
            nxt[n_d + j] = acc * emis[t, 1 + j]
        c = 0.0
        for s in range(n_s):
            c += nxt[s]
        if not (c > 0.0) or not np.isfinite(c):
            return -np.inf, t
        loglik += np.log(c)
        for s in range(n_s):
            alpha[s] = nxt[s] / c
    return loglik, -1


def forward_loglik_from_caches(pdt, emis, trans: TransitionModel) -> float:
    """Log-likelihood from precomputed persistence and emission grids."""
    ll, _ = _forward(pdt, emis, trans.q, trans.v, trans.r, trans.p0)
    return ll


def forward_loglik(series: RainfallSeries, trans: TransitionModel,
                   emit: EmissionModel, space: StateSpace,
                   bases: BasisSet) -> float:
    """Exact marginal log-likelihood of the series.

    Runs the scaled forward recursion alpha_t proportional to
    (alpha_{t-1}' P(t)) * e_t with alpha_1 = p0 * e_1, accumulating the log
    normalizers.  Returns -inf if some hour has zero probability in every
    state (use `forward_loglik_detail` to locate it).
    """
    ll, _ = forward_loglik_detail(series, trans, emit, space, bases)
    return ll


def forward_loglik_detail(series: RainfallSeries, trans: TransitionModel,
                          emit: EmissionModel, space: StateSpace,
                          bases: BasisSet):
    """As `forward_loglik`, also reporting the first zero-probability hour.

    Returns (loglik, bad_index); bad_index is -1 on a finite likelihood.
    """
    trans.validate(space)
    emit.validate(space)
    pdt = persistence_probs(trans, bases)
    emis = emission_matrix(series.values, emit, bases)
    ll, bad = _forward(pdt, emis, trans.q, trans.v, trans.r, trans.p0)
    return ll, int(bad)
