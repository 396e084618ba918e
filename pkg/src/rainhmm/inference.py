"""Bayesian fitting of the clone-state rainfall HMM.

Priors and label-switching constraints, a blockwise adaptive random-walk
Metropolis sampler over the exact marginal likelihood, and Gelman-Rubin
convergence diagnostics.  Sampling happens on transformed coordinates so
every proposal is automatically valid: stick-breaking for simplexes, and
a whitened pairing (u, log nu) with beta = sqrt(nu) u for each spline
vector and its smoothing scale.  The pairing removes the funnel between a
spline's amplitude and its scale that traps a random walk sampling them
separately.  Ordering constraints are enforced by rejection.

The sampler keeps per-proposal work small by recomputing only the caches
a block can touch: the persistence grid for iota / persistence splines,
one emission column for a per-state spline block, all columns for the
intercept block.  Cache integrity is asserted against a from-scratch
evaluation at a fixed iteration interval.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
import scipy.linalg
from scipy.special import expit, gammaln, logit

from .model import (
    EmissionModel,
    StateSpace,
    TransitionModel,
    RainfallSeries,
    XI_EPS,
    TRUNC_MM,
    _forward,
)
from .splines import BasisSet

LOG_2PI = math.log(2.0 * math.pi)


# ---------------------------------------------------------------------------
# Priors and constraints
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class PriorSpec:
    """Hyperparameters of the default prior.

    intercept_scale : standard deviation of the Normal(0, s^2) prior on
        every intercept (iota, eta, alpha, gamma).
    nu_scale : scale of the Half-Normal prior on each smoothing scale nu.
    ridge : added to each spline precision (penalty/nu + ridge I) so the
        prior is proper despite the penalty's null space.
    """

    intercept_scale: float = 10.0
    nu_scale: float = math.sqrt(2.0)
    ridge: float = 1e-8


def normal_logpdf_sum(x: np.ndarray, scale: float) -> float:
    """Sum of independent Normal(0, scale^2) log-densities."""
    x = np.asarray(x, dtype=float)
    return float(-0.5 * np.sum((x / scale) ** 2)
                 - x.size * (math.log(scale) + 0.5 * LOG_2PI))


def halfnormal_logpdf(x: float, scale: float) -> float:
    """Half-Normal(0, scale^2) log-density on x >= 0."""
    if x < 0:
        return -np.inf
    return 0.5 * math.log(2.0 / math.pi) - math.log(scale) - 0.5 * (x / scale) ** 2


def dirichlet_flat_logpdf(k: int) -> float:
    """Log-density of the flat Dirichlet(1,..,1) on the k-simplex: log (k-1)!."""
    return float(gammaln(k))


def constraints_ok(iota: np.ndarray, eta: np.ndarray, gamma: np.ndarray) -> bool:
    """Label-switching orderings on the intercepts.

    Clone persistence intercepts strictly decreasing; the dry state's
    zero-probability intercept above every wet state's; wet-state shape
    intercepts strictly increasing (so the last wet state has the heaviest
    tail on average).
    """
    if iota.size > 1 and np.any(np.diff(iota) >= 0):
        return False
    if eta.size > 1 and eta[0] <= np.max(eta[1:]):
        return False
    wet_gamma = gamma[1:]
    if wet_gamma.size > 1 and np.any(np.diff(wet_gamma) <= 0):
        return False
    return True


# ---------------------------------------------------------------------------
# Parameter layout
# ---------------------------------------------------------------------------

def group_labels(space: StateSpace) -> list[str]:
    return ["dry"] + [f"wet{j + 1}" for j in range(space.n_wet)]


@dataclass(frozen=True)
class ParameterLayout:
    """Mapping between the flat parameter vector and named model pieces.

    The vector is ordered: iota, a1, a2, q, v, r (row-major), p0, eta, b1,
    b2, alpha, c1, c2, gamma, d1, d2, nu.  Spline coefficient blocks are
    stored one group-row after another.  `names` gives one label per entry
    for posterior tables.
    """

    space: StateSpace
    n_seasonal: int
    n_overall: int
    slices: dict = field(repr=False)
    names: list = field(repr=False)
    spline_names: list = field(repr=False)
    n_params: int = 0

    @classmethod
    def create(cls, space: StateSpace, bases: BasisSet) -> "ParameterLayout":
        ks, ko = bases.seasonal.n_coef, bases.overall.n_coef
        d, w, g = space.n_dry, space.n_wet, space.n_groups
        labels = group_labels(space)
        entries = [("iota", d), ("a1", ks), ("a2", ko), ("q", w), ("v", d),
                   ("r", w * (w + 1)), ("p0", d + w), ("eta", g),
                   ("b1", g * ks), ("b2", g * ko), ("alpha", g),
                   ("c1", g * ks), ("c2", g * ko), ("gamma", g),
                   ("d1", g * ks), ("d2", g * ko)]
        spline_names = ["a1", "a2"]
        for lbl in labels:
            spline_names += [f"b1_{lbl}", f"b2_{lbl}", f"c1_{lbl}", f"c2_{lbl}",
                             f"d1_{lbl}", f"d2_{lbl}"]
        entries.append(("nu", len(spline_names)))

        slices, names, pos = {}, [], 0
        for name, size in entries:
            slices[name] = slice(pos, pos + size)
            pos += size
        for i in range(d):
            names.append(f"iota_{i}")
        names += [f"a1_{i}" for i in range(ks)] + [f"a2_{i}" for i in range(ko)]
        names += [f"q_{i}" for i in range(w)] + [f"v_{i}" for i in range(d)]
        names += [f"r_{i}_{j}" for i in range(w) for j in range(w + 1)]
        names += [f"p0_{i}" for i in range(d + w)]
        names += [f"eta_{lbl}" for lbl in labels]
        names += [f"b1_{lbl}_{i}" for lbl in labels for i in range(ks)]
        names += [f"b2_{lbl}_{i}" for lbl in labels for i in range(ko)]
        names += [f"alpha_{lbl}" for lbl in labels]
        names += [f"c1_{lbl}_{i}" for lbl in labels for i in range(ks)]
        names += [f"c2_{lbl}_{i}" for lbl in labels for i in range(ko)]
        names += [f"gamma_{lbl}" for lbl in labels]
        names += [f"d1_{lbl}_{i}" for lbl in labels for i in range(ks)]
        names += [f"d2_{lbl}_{i}" for lbl in labels for i in range(ko)]
        names += [f"nu_{s}" for s in spline_names]
        assert len(names) == pos
        return cls(space, ks, ko, slices, names, spline_names, pos)

    # -- named access ------------------------------------------------------

    def get(self, theta: np.ndarray, name: str) -> np.ndarray:
        return theta[self.slices[name]]

    def coef_rows(self, theta: np.ndarray, name: str) -> np.ndarray:
        """Spline coefficient block reshaped to one row per group."""
        k = self.n_seasonal if name in ("b1", "c1", "d1") else self.n_overall
        return self.get(theta, name).reshape(self.space.n_groups, k)

    def spline_slice(self, spline_name: str) -> slice:
        """Flat-vector slice of one spline's coefficient vector."""
        if spline_name in ("a1", "a2"):
            return self.slices[spline_name]
        stem, lbl = spline_name.split("_", 1)
        g = group_labels(self.space).index(lbl)
        k = self.n_seasonal if stem.endswith("1") else self.n_overall
        base = self.slices[stem]
        return slice(base.start + g * k, base.start + (g + 1) * k)

    def unpack(self, theta: np.ndarray):
        """Flat vector -> (TransitionModel, EmissionModel, nu vector)."""
        w = self.space.n_wet
        trans = TransitionModel(
            iota=self.get(theta, "iota").copy(),
            a1=self.get(theta, "a1").copy(),
            a2=self.get(theta, "a2").copy(),
            q=self.get(theta, "q").copy(),
            v=self.get(theta, "v").copy(),
            r=self.get(theta, "r").reshape(w, w + 1).copy(),
            p0=self.get(theta, "p0").copy(),
        )
        emit = EmissionModel(
            eta=self.get(theta, "eta").copy(),
            b1=self.coef_rows(theta, "b1").copy(),
            b2=self.coef_rows(theta, "b2").copy(),
            alpha=self.get(theta, "alpha").copy(),
            c1=self.coef_rows(theta, "c1").copy(),
            c2=self.coef_rows(theta, "c2").copy(),
            gamma=self.get(theta, "gamma").copy(),
            d1=self.coef_rows(theta, "d1").copy(),
            d2=self.coef_rows(theta, "d2").copy(),
        )
        return trans, emit, self.get(theta, "nu").copy()

    def pack(self, trans: TransitionModel, emit: EmissionModel,
             nu: np.ndarray) -> np.ndarray:
        theta = np.empty(self.n_params)
        for name, arr in (("iota", trans.iota), ("a1", trans.a1),
                          ("a2", trans.a2), ("q", trans.q), ("v", trans.v),
                          ("r", trans.r.ravel()), ("p0", trans.p0),
                          ("eta", emit.eta), ("b1", emit.b1.ravel()),
                          ("b2", emit.b2.ravel()), ("alpha", emit.alpha),
                          ("c1", emit.c1.ravel()), ("c2", emit.c2.ravel()),
                          ("gamma", emit.gamma), ("d1", emit.d1.ravel()),
                          ("d2", emit.d2.ravel()), ("nu", nu)):
            theta[self.slices[name]] = arr
        return theta

    def monitored_indices(self) -> np.ndarray:
        """Indices of the convergence-monitored parameters (everything
        except the smoothing scales nu)."""
        return np.arange(self.slices["nu"].start)

    def full_rank_monitored(self) -> np.ndarray:
        """Monitored indices with each simplex's last entry dropped.

        Simplex components are linearly dependent (they sum to one), which
        would make the multivariate between/within covariance comparison
        singular; dropping one coordinate per simplex restores full rank.
        """
        d, w = self.space.n_dry, self.space.n_wet
        drop = set()
        drop.add(self.slices["q"].stop - 1)
        drop.add(self.slices["v"].stop - 1)
        rbase = self.slices["r"].start
        for i in range(w):
            drop.add(rbase + i * (w + 1) + w)
        drop.add(self.slices["p0"].stop - 1)
        return np.array([i for i in self.monitored_indices() if i not in drop])


# ---------------------------------------------------------------------------
# Simplex transform (stick-breaking)
# ---------------------------------------------------------------------------

def simplex_from_unconstrained(z: np.ndarray):
    """Stick-breaking map R^{k-1} -> interior of the k-simplex.

    Offset so z = 0 yields the uniform simplex.  Returns (x, log |J|).
    """
    k = z.size + 1
    x = np.empty(k)
    logj = 0.0
    stick = 1.0
    for i in range(k - 1):
        u = expit(z[i] - math.log(k - 1 - i))
        x[i] = stick * u
        if u <= 0.0 or u >= 1.0 or stick <= 0.0:
            return x, -np.inf
        logj += math.log(stick) + math.log(u) + math.log1p(-u)
        stick *= 1.0 - u
    x[k - 1] = stick
    return x, logj


def unconstrained_from_simplex(x: np.ndarray) -> np.ndarray:
    """Inverse stick-breaking; x must be an interior point of the simplex."""
    k = x.size
    z = np.empty(k - 1)
    stick = 1.0
    for i in range(k - 1):
        u = x[i] / stick
        z[i] = logit(u) + math.log(k - 1 - i)
        stick -= x[i]
    return z


# ---------------------------------------------------------------------------
# Spline prior bookkeeping
# ---------------------------------------------------------------------------

class _SplinePrior:
    """Gaussian prior N(0, (penalty/nu + ridge I)^{-1}) for one spline."""

    def __init__(self, penalty: np.ndarray, ridge: float):
        self.penalty = penalty
        self.ridge = ridge
        eigs = scipy.linalg.eigh(penalty, eigvals_only=True)
        self.eigs = np.maximum(eigs, 0.0)
        with np.errstate(divide="ignore"):
            self.log_eigs = np.log(self.eigs)
            self.log_ridge = float(np.log(ridge)) if ridge > 0 else -np.inf
        self.dim = penalty.shape[0]

    def quad(self, beta: np.ndarray):
        """(beta' penalty beta, beta' beta) pair reused across nu moves."""
        return float(beta @ self.penalty @ beta), float(beta @ beta)

    def logpdf_from_quad(self, quad_s: float, quad_i: float, nu: float) -> float:
        # log(eig/nu + ridge) through logaddexp: extreme nu must degrade to
        # -inf rejection, not overflow warnings
        logdet = float(np.sum(np.logaddexp(self.log_eigs - math.log(nu),
                                           self.log_ridge)))
        with np.errstate(over="ignore"):
            quad_term = quad_s / nu + self.ridge * quad_i
        if not np.isfinite(quad_term):
            return -np.inf
        return 0.5 * (logdet - quad_term - self.dim * LOG_2PI)

    def logpdf(self, beta: np.ndarray, nu: float) -> float:
        qs, qi = self.quad(beta)
        return self.logpdf_from_quad(qs, qi, nu)


# ---------------------------------------------------------------------------
# Sampler settings and results
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class MCMCSettings:
    n_chains: int = 4
    n_iter: int = 20000
    burn_in: int = 10000
    thin: int = 10
    seed: int = 0
    target_accept: float = 0.25
    adapt_cov_after: int = 100     # sweeps of isotropic proposals before
                                   # the empirical covariance kicks in
    check_every: int = 500         # cache-integrity assertion interval
    init_retries: int = 100

    def __post_init__(self):
        if self.n_chains < 1 or self.n_iter < 0 or self.thin < 1:
            raise ValueError("MCMC settings must be positive")
        if not 0 <= self.burn_in <= max(self.n_iter, 1):
            raise ValueError(f"burn-in {self.burn_in} outside 0..{self.n_iter}")

    @property
    def n_retained(self) -> int:
        return max(0, (self.n_iter - self.burn_in)) // self.thin


@dataclass
class ChainSet:
    """Retained posterior draws from a set of independent chains.

    draws : (n_chains, n_retained, n_params) constrained parameter vectors.
    loglik, logpost : matching (n_chains, n_retained) traces.
    acceptance : per chain, block name -> acceptance rate.
    """

    layout: ParameterLayout
    settings: MCMCSettings
    seeds: list
    draws: np.ndarray
    loglik: np.ndarray
    logpost: np.ndarray
    acceptance: list

    @property
    def n_chains(self) -> int:
        return self.draws.shape[0]

    @property
    def n_retained(self) -> int:
        return self.draws.shape[1]

    def parameter(self, name: str) -> np.ndarray:
        """(n_chains, n_retained) trace of one named scalar parameter."""
        i = self.layout.names.index(name)
        return self.draws[:, :, i]

    def pooled(self) -> np.ndarray:
        """All chains stacked: (n_chains * n_retained, n_params)."""
        return self.draws.reshape(-1, self.draws.shape[2])

    def models(self, chain: int, index: int):
        """Reconstruct (TransitionModel, EmissionModel, nu) for one draw."""
        return self.layout.unpack(self.draws[chain, index])


# ---------------------------------------------------------------------------
# Convergence diagnostics
# ---------------------------------------------------------------------------

def psrf(draws: np.ndarray) -> float:
    """Potential scale reduction factor of one scalar parameter.

    draws is (n_chains, n_iterations).  Uses the pooled-variance estimate
    Vhat = (n-1)/n W + B/n; identical constant chains give 1.0 and zero
    within-chain variance with real between-chain spread gives inf, so the
    degenerate cases are flagged by value rather than NaN.
    """
    m, n = draws.shape
    if m < 2 or n < 2:
        raise ValueError("PSRF needs at least 2 chains of length 2")
    within = draws.var(axis=1, ddof=1).mean()
    between_over_n = draws.mean(axis=1).var(ddof=1)
    if within == 0.0:
        return 1.0 if between_over_n == 0.0 else np.inf
    vhat = (n - 1) / n * within + between_over_n
    return float(np.sqrt(vhat / within))


def psrf_table(chains: ChainSet):
    """PSRF per monitored parameter.

    Returns (names, values, degenerate) where degenerate marks parameters
    whose within-chain variance was exactly zero.
    """
    idx = chains.layout.monitored_indices()
    names = [chains.layout.names[i] for i in idx]
    values = np.empty(idx.size)
    degenerate = np.zeros(idx.size, dtype=bool)
    for k, i in enumerate(idx):
        x = chains.draws[:, :, i]
        degenerate[k] = np.all(x.var(axis=1, ddof=1) == 0.0)
        values[k] = psrf(x)
    return names, values, degenerate


def mpsrf(chains: ChainSet) -> float:
    """Multivariate PSRF over the full-rank monitored parameter set.

    Brooks-Gelman: (n-1)/n + (m+1)/m * lambda_max, with lambda_max the
    largest eigenvalue of W^{-1} B/n.  The within matrix gets a tiny
    diagonal ridge if it is numerically singular.
    """
    idx = chains.layout.full_rank_monitored()
    x = chains.draws[:, :, idx]
    m, n, p = x.shape
    if m < 2 or n < 2:
        raise ValueError("MPSRF needs at least 2 chains of length 2")
    chain_means = x.mean(axis=1)
    within = np.zeros((p, p))
    for c in range(m):
        dev = x[c] - chain_means[c]
        within += dev.T @ dev / (n - 1)
    within /= m
    grand = chain_means.mean(axis=0)
    dev = chain_means - grand
    b_over_n = dev.T @ dev / (m - 1)
    ridge = 1e-12 * max(np.trace(within) / p, 1.0)
    try:
        lam = scipy.linalg.eigh(b_over_n, within, eigvals_only=True)
    except scipy.linalg.LinAlgError:
        lam = scipy.linalg.eigh(b_over_n, within + ridge * np.eye(p),
                                eigvals_only=True)
    return float((n - 1) / n + (m + 1) / m * lam[-1])


# ---------------------------------------------------------------------------
# Blocks
# ---------------------------------------------------------------------------

# effect tags: what part of the likelihood state a block can change
_PERSISTENCE = "persistence"    # pdt grid
_TRANSITION = "transition"      # simplex arguments of the forward kernel
_EMISSION_COL = "emission-col"  # one group's emission column
_EMISSION_ALL = "emission-all"  # every emission column (intercept shifts)
_ALL = "all"                    # pdt, every emission column, and the kernel


class _Block:
    def __init__(self, name, kind, zdim, effect, theta_slices=(),
                 group=None, channels=(), splines=(), segments=(),
                 extras=(), constrained=False):
        self.name = name
        self.kind = kind            # identity | simplex | spline | mixed
        self.zdim = zdim
        self.effect = effect
        self.theta_slices = theta_slices
        self.group = group
        self.channels = channels    # subset of ("pi", "sigma", "xi")
        self.splines = splines      # spline indices carried by this block
        self.segments = segments    # mixed kind: (transform, theta_slice)
        self.extras = extras        # spline kind: identity coords after the t's
        self.constrained = constrained
        self.zsl = None             # assigned once the z-vector is laid out
        # adaptation state
        self.log_scale = math.log(0.1 / math.sqrt(max(zdim, 1)))
        self.chol = None
        self.count = 0
        self.mean = np.zeros(zdim)
        self.m2 = np.zeros((zdim, zdim))
        self.adapt_n = 0
        self.proposals = 0
        self.accepts = 0

    def update_cov(self, z_block: np.ndarray):
        self.count += 1
        delta = z_block - self.mean
        self.mean += delta / self.count
        self.m2 += np.outer(delta, z_block - self.mean)

    def restart_adaptation(self):
        """Forget accumulated history but keep the current chol and scale.

        Called once at mid-burn-in: the first half's samples include the
        walk in from the start point, which stretches the empirical
        covariance along the approach path; re-estimating from the second
        half alone gives proposals shaped like the local posterior."""
        self.count = 0
        self.mean[:] = 0.0
        self.m2[:] = 0.0
        self.adapt_n = 0

    def refresh_chol(self):
        if self.count < max(20, 2 * self.zdim):
            return
        cov = self.m2 / (self.count - 1)
        jitter = 1e-10 + 1e-6 * np.trace(cov) / self.zdim
        cov = cov + jitter * np.eye(self.zdim)
        try:
            self.chol = scipy.linalg.cholesky(cov, lower=True)
        except scipy.linalg.LinAlgError:
            pass


def _build_blocks(layout: ParameterLayout):
    """Sampling blocks: grouped so each likelihood evaluation reuses as
    much cached state as possible.  Each spline block carries the two
    smoothing scales of its coefficient vectors, sampled jointly in the
    whitened (u, log nu) coordinates."""
    sp = layout.space
    d, w, g = sp.n_dry, sp.n_wet, sp.n_groups
    sl = layout.slices
    labels = group_labels(sp)
    sname = layout.spline_names
    blocks = []

    blocks.append(_Block("iota", "identity", d, _PERSISTENCE,
                         theta_slices=(sl["iota"],), constrained=True))
    ks, ko = layout.n_seasonal, layout.n_overall
    blocks.append(_Block("pers_splines", "spline", ks + ko + 2, _PERSISTENCE,
                         theta_slices=(sl["a1"], sl["a2"]),
                         splines=(sname.index("a1"), sname.index("a2"))))
    blocks.append(_Block("q", "simplex", w - 1, _TRANSITION,
                         theta_slices=(sl["q"],)))
    blocks.append(_Block("v", "simplex", d - 1, _TRANSITION,
                         theta_slices=(sl["v"],)))
    rbase = sl["r"].start
    for i in range(w):
        blocks.append(_Block(f"r{i}", "simplex", w, _TRANSITION,
                             theta_slices=(slice(rbase + i * (w + 1),
                                                 rbase + (i + 1) * (w + 1)),)))
    blocks.append(_Block("p0", "simplex", d + w - 1, _TRANSITION,
                         theta_slices=(sl["p0"],)))
    blocks.append(_Block("emit_intercepts", "identity", 3 * g, _EMISSION_ALL,
                         theta_slices=(sl["eta"], sl["alpha"], sl["gamma"]),
                         constrained=True))
    for gi, lbl in enumerate(labels):
        for stem, chan in (("b", "pi"), ("c", "sigma"), ("d", "xi")):
            s1 = layout.spline_slice(f"{stem}1_{lbl}")
            s2 = layout.spline_slice(f"{stem}2_{lbl}")
            blocks.append(_Block(
                f"{chan}_splines_{lbl}", "spline", ks + ko + 2, _EMISSION_COL,
                theta_slices=(s1, s2), group=gi, channels=(chan,),
                splines=(sname.index(f"{stem}1_{lbl}"),
                         sname.index(f"{stem}2_{lbl}"))))

    # Per-group "level" blocks: the three overall-trend coefficient vectors
    # of one emission group together with that group's three intercepts.
    # Zero mass, scale and shape for the same column trade off against each
    # other and against the level, so per-channel conditionals crawl there.
    def _elem(s: slice, i: int) -> slice:
        return slice(s.start + i, s.start + i + 1)

    for gi, lbl in enumerate(labels):
        slices = tuple(layout.spline_slice(f"{stem}2_{lbl}")
                       for stem in ("b", "c", "d"))
        blocks.append(_Block(
            f"level_{lbl}", "spline", 3 * ko + 6, _EMISSION_COL,
            theta_slices=slices, group=gi, channels=("pi", "sigma", "xi"),
            splines=tuple(sname.index(f"{stem}2_{lbl}")
                          for stem in ("b", "c", "d")),
            extras=(_elem(sl["eta"], gi), _elem(sl["alpha"], gi),
                    _elem(sl["gamma"], gi)),
            constrained=True))
    blocks.append(_Block(
        "level_pers", "spline", ko + 1 + d, _PERSISTENCE,
        theta_slices=(sl["a2"],), splines=(sname.index("a2"),),
        extras=(sl["iota"],), constrained=True))

    # One joint block over every intercept and every transition simplex.
    # The small blocks above make sharp conditional moves; this one, with
    # its adapted covariance, walks the soft ridge those conditionals
    # barely move along (entry weights trading off against the wet-state
    # intensity levels), which otherwise dominates the mixing time.
    segments = [("identity", sl["iota"]), ("identity", sl["eta"]),
                ("identity", sl["alpha"]), ("identity", sl["gamma"]),
                ("simplex", sl["q"]), ("simplex", sl["v"])]
    for i in range(w):
        segments.append(("simplex", slice(rbase + i * (w + 1),
                                          rbase + (i + 1) * (w + 1))))
    segments.append(("simplex", sl["p0"]))
    segments = [(tr, ts) for tr, ts in segments
                if (ts.stop - ts.start) - (tr == "simplex") > 0]
    zdim = sum((ts.stop - ts.start) - (tr == "simplex")
               for tr, ts in segments)
    blocks.append(_Block("structure", "mixed", zdim, _ALL,
                         segments=tuple(segments), constrained=True))

    pos = 0
    kept = []
    for b in blocks:
        if b.zdim == 0:
            continue  # one-point simplexes have nothing to sample
        b.zsl = slice(pos, pos + b.zdim)
        pos += b.zdim
        kept.append(b)
    return kept, pos


# ---------------------------------------------------------------------------
# Initialization
# ---------------------------------------------------------------------------

def draw_initial_params(rng: np.random.Generator, layout: ParameterLayout,
                        priors: PriorSpec,
                        series: RainfallSeries | None = None) -> np.ndarray:
    """Constraint-satisfying start near crude data moments.

    Intercepts are centred on method-of-moments guesses (zero fraction,
    dry persistence, mean wet excess) and jittered so chains start apart;
    splines start at zero with moderate smoothing scales; simplexes get a
    mild Dirichlet perturbation of uniform.  Starting in the plausible
    region matters here: a start with a near-saturated dry zero
    probability lands in a local mode (the dry group as a pure-zero
    emitter) that a random walk cannot leave.  Without a series the
    moments fall back on typical hourly-rainfall values.
    """
    sp = layout.space
    d, w, g = sp.n_dry, sp.n_wet, sp.n_groups
    theta = np.zeros(layout.n_params)

    if series is not None and series.values.size > 1:
        vals = series.values
        zero = vals == 0
        zero_frac = float(zero.mean())
        prev = zero[:-1]
        dry_persist = float(zero[1:][prev].mean()) if prev.any() else 0.9
        wet = vals[vals > 0]
        excess = float((wet - TRUNC_MM).mean()) if wet.size else 1.0
    else:
        zero_frac, dry_persist, excess = 0.85, 0.95, 1.0
    zero_frac = min(max(zero_frac, 0.55), 0.99)
    dry_persist = min(max(dry_persist, 0.55), 0.99)

    base_pers = float(logit(dry_persist))
    iota = base_pers + np.linspace(0.8, -0.8, d) + 0.25 * rng.standard_normal(d)
    iota[::-1].sort()                     # descending: clone ordering

    base_zero = float(logit(zero_frac))
    eta = np.empty(g)
    eta[0] = base_zero + 1.2              # dry group: more zeros than marginal
    eta[1:] = base_zero - 1.8 - 0.7 * np.arange(w)
    eta += 0.3 * rng.standard_normal(g)
    eta[::-1].sort()                      # descending: dry gets the largest

    alpha = math.log(max(excess, 0.3)) + 0.35 * rng.standard_normal(g)
    gamma = 0.2 * rng.standard_normal(g)
    gamma[1:] = np.sort(gamma[1:])        # wet shapes ascending

    theta[layout.slices["iota"]] = iota
    theta[layout.slices["eta"]] = eta
    theta[layout.slices["alpha"]] = alpha
    theta[layout.slices["gamma"]] = gamma
    theta[layout.slices["q"]] = rng.dirichlet(np.full(w, 6.0))
    theta[layout.slices["v"]] = rng.dirichlet(np.full(d, 6.0))
    theta[layout.slices["r"]] = rng.dirichlet(np.full(w + 1, 6.0),
                                              size=w).ravel()
    theta[layout.slices["p0"]] = rng.dirichlet(np.full(d + w, 6.0))
    theta[layout.slices["nu"]] = np.exp(
        rng.normal(-0.4, 0.35, len(layout.spline_names)))
    return theta


def _log_arg(y, sigma, xi, limit):
    """Per-element log1p(xi y / sigma), the exponent kernel of the GPD.

    Where `limit` marks |xi| below the exponential-limit switch, returns
    y / sigma instead (so the caller's exponent reduces to the exponential
    survival ratio); +inf where y sits past a negative-shape endpoint.
    """
    a = xi * y / sigma
    out = np.where(limit, y / sigma, np.log1p(np.where(a > -1.0, a, 0.0)))
    return np.where(~limit & (a <= -1.0), np.inf, out)


# ---------------------------------------------------------------------------
# The chain
# ---------------------------------------------------------------------------

class _Chain:
    """One MCMC chain with its parameter state and likelihood caches."""

    def __init__(self, series: RainfallSeries, priors: PriorSpec,
                 layout: ParameterLayout, bases: BasisSet,
                 settings: MCMCSettings, rng: np.random.Generator):
        self.series = series
        self.priors = priors
        self.layout = layout
        self.bases = bases
        self.settings = settings
        self.rng = rng
        sp = layout.space
        self.n_dry, self.n_wet, self.n_groups = sp.n_dry, sp.n_wet, sp.n_groups

        self.values = series.values
        self.wet_idx = np.nonzero(self.values > 0)[0]
        self.wet_values = self.values[self.wet_idx]
        self.seas = bases.seasonal.design
        self.over = bases.overall.design
        self.seas_wet = self.seas[self.wet_idx]
        self.over_wet = self.over[self.wet_idx]
        self.n_hours = self.values.size

        self.spline_priors = []
        for s in layout.spline_names:
            stem = s.split("_")[0]
            basis = bases.seasonal if stem.endswith("1") else bases.overall
            self.spline_priors.append(_SplinePrior(basis.penalty, priors.ridge))
        self.dirichlet_const = (
            dirichlet_flat_logpdf(sp.n_wet) + dirichlet_flat_logpdf(sp.n_dry)
            + sp.n_wet * dirichlet_flat_logpdf(sp.n_wet + 1)
            + dirichlet_flat_logpdf(sp.n_states)
        )

        self.blocks, self.n_z = _build_blocks(layout)
        # one sweep = every block once plus a second pass of the joint
        # block halfway through, so the two joint updates sit half a
        # sweep apart: ridge traversal is the bottleneck and gets twice
        # the budget
        self.scan = list(range(len(self.blocks)))
        for bi, b in enumerate(self.blocks):
            if b.name == "structure":
                self.scan.insert(len(self.scan) // 2, bi)
        self.theta = None

    # -- state construction -------------------------------------------------

    def initialize(self):
        for attempt in range(self.settings.init_retries):
            theta = draw_initial_params(self.rng, self.layout, self.priors,
                                        self.series)
            self._set_state(theta)
            if np.isfinite(self.loglik):
                return
        raise RuntimeError(
            f"no finite posterior found in {self.settings.init_retries} "
            f"initialization draws; last log-likelihood {self.loglik}"
        )

    def _set_state(self, theta: np.ndarray):
        """Install a full parameter vector and rebuild every cache."""
        self.theta = theta.copy()
        self._rebuild_caches()

    def _block_coords(self, b: _Block):
        """Current transformed coordinates and log-Jacobian of one block.

        Derived from theta on demand: the joint block's range overlaps
        the small blocks', so cached per-block coordinates would go stale
        whenever a sibling accepts."""
        th = self.theta
        if b.kind == "simplex":
            z = unconstrained_from_simplex(th[b.theta_slices[0]])
            _, jac = simplex_from_unconstrained(z)
            return z, jac
        if b.kind == "spline":
            # z = (u_1, .., u_m, t_1, .., t_m, extras) with
            # beta_i = e^{t_i/2} u_i and nu_i = e^{t_i};
            # log-Jacobian (k_i/2 + 1) t_i per pair, extras identity
            nu_start = self.layout.slices["nu"].start
            t = np.log([th[nu_start + si] for si in b.splines])
            u = [th[ts] * math.exp(-0.5 * t[j])
                 for j, ts in enumerate(b.theta_slices)]
            jac = sum((u[j].size / 2.0 + 1.0) * t[j] for j in range(t.size))
            tail = [th[ts] for ts in b.extras]
            return np.concatenate(u + [t] + tail), jac
        if b.kind == "mixed":
            zs, jac = [], 0.0
            for tr, ts in b.segments:
                if tr == "simplex":
                    zz = unconstrained_from_simplex(th[ts])
                    _, jj = simplex_from_unconstrained(zz)
                    zs.append(zz)
                    jac += jj
                else:
                    zs.append(th[ts])
            return np.concatenate(zs), jac
        return np.concatenate([th[ts] for ts in b.theta_slices]), 0.0

    def _rebuild_caches(self):
        lay, th = self.layout, self.theta
        self.shared_pers = (self.seas @ lay.get(th, "a1")
                            + self.over @ lay.get(th, "a2"))
        self.pdt = expit(self.shared_pers[:, None]
                         + lay.get(th, "iota")[None, :])
        g = self.n_groups
        self.lin_pi = (lay.get(th, "eta")[None, :]
                       + self.seas @ lay.coef_rows(th, "b1").T
                       + self.over @ lay.coef_rows(th, "b2").T)
        self.lin_sig_wet = (lay.get(th, "alpha")[None, :]
                            + self.seas_wet @ lay.coef_rows(th, "c1").T
                            + self.over_wet @ lay.coef_rows(th, "c2").T)
        self.lin_xi_wet = (lay.get(th, "gamma")[None, :]
                           + self.seas_wet @ lay.coef_rows(th, "d1").T
                           + self.over_wet @ lay.coef_rows(th, "d2").T)
        self.emis = np.empty((self.n_hours, g))
        for gi in range(g):
            self.emis[:, gi] = self._emission_column(
                self.lin_pi[:, gi], self.lin_sig_wet[:, gi],
                self.lin_xi_wet[:, gi])
        self.loglik = self._forward()
        self._rebuild_priors()

    def _rebuild_priors(self):
        lay, th, pr = self.layout, self.theta, self.priors
        self.intercept_logp = {
            n: normal_logpdf_sum(lay.get(th, n), pr.intercept_scale)
            for n in ("iota", "eta", "alpha", "gamma")
        }
        nu = lay.get(th, "nu")
        ns = len(lay.spline_names)
        self.spline_quad = np.empty((ns, 2))
        self.spline_logp = np.empty(ns)
        self.nu_logp = np.empty(ns)
        for si, s in enumerate(lay.spline_names):
            beta = th[lay.spline_slice(s)]
            qs, qi = self.spline_priors[si].quad(beta)
            self.spline_quad[si] = (qs, qi)
            self.spline_logp[si] = self.spline_priors[si].logpdf_from_quad(
                qs, qi, nu[si])
            self.nu_logp[si] = halfnormal_logpdf(nu[si], pr.nu_scale)

    # -- pieces -------------------------------------------------------------

    def _emission_column(self, lin_pi, lin_sig_wet, lin_xi_wet) -> np.ndarray:
        """Observation probabilities of one conditional model.

        Zero hours contribute the zero probability pi_t; wet hours the
        censored-GPD grid mass written as a difference of survival ratios,
        S(x-0.1)/S(0.1) - S(x+0.1)/S(0.1), which is cancellation-free.
        """
        out = expit(lin_pi)
        if self.wet_idx.size == 0:
            return out
        x = self.wet_values
        with np.errstate(all="ignore"):
            sig = np.exp(lin_sig_wet)
            xi = lin_xi_wet
            limit = np.abs(xi) <= XI_EPS
            inv_xi = np.where(limit, 1.0, 1.0 / np.where(limit, np.inf, xi))
            lo = _log_arg(x - TRUNC_MM, sig, xi, limit)
            hi = _log_arg(x + TRUNC_MM, sig, xi, limit)
            ref = _log_arg(TRUNC_MM, sig, xi, limit)
            # each survival ratio is 0 past the support's upper endpoint
            s_lo = np.where(np.isposinf(lo), 0.0, np.exp((ref - lo) * inv_xi))
            s_hi = np.where(np.isposinf(hi), 0.0, np.exp((ref - hi) * inv_xi))
            ratio = np.where(np.isposinf(ref), 0.0, s_lo - s_hi)
        out[self.wet_idx] = (1.0 - out[self.wet_idx]) * np.maximum(ratio, 0.0)
        return out

    def _forward(self, pdt=None, emis=None) -> float:
        lay, th = self.layout, self.theta
        w = self.n_wet
        ll, _ = _forward(
            self.pdt if pdt is None else pdt,
            self.emis if emis is None else emis,
            lay.get(th, "q"), lay.get(th, "v"),
            lay.get(th, "r").reshape(w, w + 1), lay.get(th, "p0"))
        return ll

    def target(self) -> float:
        return (self.loglik + sum(self.intercept_logp.values())
                + self.spline_logp.sum() + self.nu_logp.sum()
                + self.dirichlet_const)

    # -- one Metropolis update ---------------------------------------------

    def _update_block(self, bi: int, adapting: bool):
        b = self.blocks[bi]
        z_cur, jac_cur = self._block_coords(b)
        step = self.rng.standard_normal(b.zdim)
        if b.chol is not None:
            step = b.chol @ step
        zc = z_cur + math.exp(b.log_scale) * step

        lay, th = self.layout, self.theta
        cand_theta_parts = []
        cand_nu = []
        spl = self.layout.spline_names

        # --- candidate constrained values + jacobian
        if b.kind == "simplex":
            x, jac_c = simplex_from_unconstrained(zc)
            cand_theta_parts = [(b.theta_slices[0], x)]
        elif b.kind == "spline":
            n_u = sum(ts.stop - ts.start for ts in b.theta_slices)
            t_c = zc[n_u:n_u + len(b.splines)]
            # keep exp(t) far from under/overflow; the half-normal prior
            # makes anything out here astronomically unlikely anyway
            if np.any(np.abs(t_c) > 50.0):
                self._finish(b, bi, False, -np.inf, adapting)
                return
            nu_start = lay.slices["nu"].start
            jac_c = 0.0
            pos = 0
            for j, ts in enumerate(b.theta_slices):
                npar = ts.stop - ts.start
                cand_theta_parts.append(
                    (ts, math.exp(0.5 * t_c[j]) * zc[pos:pos + npar]))
                pos += npar
                jac_c += (npar / 2.0 + 1.0) * t_c[j]
                si = b.splines[j]
                cand_nu.append(math.exp(t_c[j]))
                cand_theta_parts.append(
                    (slice(nu_start + si, nu_start + si + 1),
                     np.array([cand_nu[-1]])))
            pos = n_u + len(b.splines)
            for ts in b.extras:
                npar = ts.stop - ts.start
                cand_theta_parts.append((ts, zc[pos:pos + npar]))
                pos += npar
        elif b.kind == "mixed":
            jac_c = 0.0
            pos = 0
            for tr, ts in b.segments:
                n_theta = ts.stop - ts.start
                if tr == "simplex":
                    x, jj = simplex_from_unconstrained(
                        zc[pos:pos + n_theta - 1])
                    cand_theta_parts.append((ts, x))
                    jac_c += jj
                    pos += n_theta - 1
                else:
                    cand_theta_parts.append((ts, zc[pos:pos + n_theta]))
                    pos += n_theta
        else:
            jac_c = jac_cur
            pos = 0
            for ts in b.theta_slices:
                npar = ts.stop - ts.start
                cand_theta_parts.append((ts, zc[pos:pos + npar]))
                pos += npar

        delta = jac_c - jac_cur
        th_c = None

        def cand_vec():
            nonlocal th_c
            if th_c is None:
                th_c = th.copy()
                for ts, val in cand_theta_parts:
                    th_c[ts] = val
            return th_c

        # --- constraints and prior pieces
        new_intercepts = {}
        if b.constrained:
            tc = cand_vec()
            if not constraints_ok(lay.get(tc, "iota"), lay.get(tc, "eta"),
                                  lay.get(tc, "gamma")):
                self._finish(b, bi, False, -np.inf, adapting)
                return
            for n in ("iota", "eta", "alpha", "gamma"):
                new_intercepts[n] = normal_logpdf_sum(
                    lay.get(tc, n), self.priors.intercept_scale)
                delta += new_intercepts[n] - self.intercept_logp[n]

        new_splines = {}
        new_nu_logp = {}
        for j, si in enumerate(b.splines):
            beta = cand_vec()[lay.spline_slice(spl[si])]
            qs, qi = self.spline_priors[si].quad(beta)
            lp = self.spline_priors[si].logpdf_from_quad(qs, qi, cand_nu[j])
            new_splines[si] = (qs, qi, lp)
            lp_n = halfnormal_logpdf(cand_nu[j], self.priors.nu_scale)
            new_nu_logp[si] = lp_n
            delta += (lp - self.spline_logp[si]) + (lp_n - self.nu_logp[si])

        # --- likelihood pieces
        new_caches = {}
        if np.isfinite(delta):
            tc = cand_vec()
            if b.effect == _PERSISTENCE:
                if b.name == "iota":
                    pdt_c = expit(self.shared_pers[:, None]
                                  + lay.get(tc, "iota")[None, :])
                    new_caches["pdt"] = pdt_c
                else:
                    shared_c = (self.seas @ lay.get(tc, "a1")
                                + self.over @ lay.get(tc, "a2"))
                    pdt_c = expit(shared_c[:, None]
                                  + lay.get(tc, "iota")[None, :])
                    new_caches["shared_pers"] = shared_c
                    new_caches["pdt"] = pdt_c
                ll_c = self._forward_with(tc, pdt=pdt_c)
            elif b.effect == _TRANSITION:
                ll_c = self._forward_with(tc)
            elif b.effect == _ALL:
                pdt_c = expit(self.shared_pers[:, None]
                              + lay.get(tc, "iota")[None, :])
                new_caches["pdt"] = pdt_c
                emis_c = self.emis.copy()
                d_eta = lay.get(tc, "eta") - lay.get(th, "eta")
                d_alpha = lay.get(tc, "alpha") - lay.get(th, "alpha")
                d_gamma = lay.get(tc, "gamma") - lay.get(th, "gamma")
                lin_pi_c = self.lin_pi + d_eta[None, :]
                lin_sig_c = self.lin_sig_wet + d_alpha[None, :]
                lin_xi_c = self.lin_xi_wet + d_gamma[None, :]
                for gi in range(self.n_groups):
                    emis_c[:, gi] = self._emission_column(
                        lin_pi_c[:, gi], lin_sig_c[:, gi], lin_xi_c[:, gi])
                new_caches.update(lin_pi=lin_pi_c, lin_sig_wet=lin_sig_c,
                                  lin_xi_wet=lin_xi_c, emis=emis_c)
                ll_c = self._forward_with(tc, pdt=pdt_c, emis=emis_c)
            else:
                emis_c = self.emis.copy()
                if b.effect == _EMISSION_ALL:
                    d_eta = lay.get(tc, "eta") - lay.get(th, "eta")
                    d_alpha = lay.get(tc, "alpha") - lay.get(th, "alpha")
                    d_gamma = lay.get(tc, "gamma") - lay.get(th, "gamma")
                    lin_pi_c = self.lin_pi + d_eta[None, :]
                    lin_sig_c = self.lin_sig_wet + d_alpha[None, :]
                    lin_xi_c = self.lin_xi_wet + d_gamma[None, :]
                    for gi in range(self.n_groups):
                        emis_c[:, gi] = self._emission_column(
                            lin_pi_c[:, gi], lin_sig_c[:, gi], lin_xi_c[:, gi])
                    new_caches.update(lin_pi=lin_pi_c, lin_sig_wet=lin_sig_c,
                                      lin_xi_wet=lin_xi_c)
                else:
                    gi = b.group
                    lin_pi_g = self.lin_pi[:, gi]
                    lin_sig_g = self.lin_sig_wet[:, gi]
                    lin_xi_g = self.lin_xi_wet[:, gi]
                    tcv = cand_vec()
                    if "pi" in b.channels:
                        lin_pi_g = (lay.get(tcv, "eta")[gi]
                                    + self.seas @ lay.coef_rows(tcv, "b1")[gi]
                                    + self.over @ lay.coef_rows(tcv, "b2")[gi])
                        new_caches["lin_pi_col"] = (gi, lin_pi_g)
                    if "sigma" in b.channels:
                        lin_sig_g = (lay.get(tcv, "alpha")[gi]
                                     + self.seas_wet @ lay.coef_rows(tcv, "c1")[gi]
                                     + self.over_wet @ lay.coef_rows(tcv, "c2")[gi])
                        new_caches["lin_sig_col"] = (gi, lin_sig_g)
                    if "xi" in b.channels:
                        lin_xi_g = (lay.get(tcv, "gamma")[gi]
                                    + self.seas_wet @ lay.coef_rows(tcv, "d1")[gi]
                                    + self.over_wet @ lay.coef_rows(tcv, "d2")[gi])
                        new_caches["lin_xi_col"] = (gi, lin_xi_g)
                    emis_c[:, gi] = self._emission_column(
                        lin_pi_g, lin_sig_g, lin_xi_g)
                new_caches["emis"] = emis_c
                ll_c = self._forward_with(tc, emis=emis_c)
            delta += ll_c - self.loglik
            new_caches["loglik"] = ll_c

        # --- accept / reject
        accept = False
        if np.isfinite(delta):
            accept = delta >= 0 or self.rng.random() < math.exp(delta)
        if accept:
            for ts, val in cand_theta_parts:
                self.theta[ts] = val
            for n, v in new_intercepts.items():
                self.intercept_logp[n] = v
            for si, (qs, qi, lp) in new_splines.items():
                self.spline_quad[si] = (qs, qi)
                self.spline_logp[si] = lp
            for si, lp_n in new_nu_logp.items():
                self.nu_logp[si] = lp_n
            for key, val in new_caches.items():
                if key.endswith("_col"):
                    gi, col = val
                    base = {"lin_pi_col": "lin_pi", "lin_sig_col": "lin_sig_wet",
                            "lin_xi_col": "lin_xi_wet"}[key]
                    getattr(self, base)[:, gi] = col
                else:
                    setattr(self, key, val)
        self._finish(b, bi, accept, delta, adapting)

    def _finish(self, b: _Block, bi: int, accepted: bool, delta: float,
                adapting: bool):
        b.proposals += 1
        if accepted:
            b.accepts += 1
        if adapting:
            b.adapt_n += 1
            acc_prob = 0.0 if not np.isfinite(delta) else min(1.0, math.exp(min(delta, 0.0)))
            gain = 1.0 / max(b.adapt_n, 10) ** 0.6
            b.log_scale += gain * (acc_prob - self.settings.target_accept)
            b.log_scale = min(max(b.log_scale, -15.0), 5.0)

    def _forward_with(self, theta_c: np.ndarray, pdt=None, emis=None) -> float:
        lay = self.layout
        w = self.n_wet
        ll, _ = _forward(
            self.pdt if pdt is None else pdt,
            self.emis if emis is None else emis,
            lay.get(theta_c, "q"), lay.get(theta_c, "v"),
            lay.get(theta_c, "r").reshape(w, w + 1), lay.get(theta_c, "p0"))
        return ll

    # -- driver -------------------------------------------------------------

    def run(self):
        st = self.settings
        kept = np.empty((st.n_retained, self.layout.n_params))
        kept_ll = np.empty(st.n_retained)
        kept_lp = np.empty(st.n_retained)
        k = 0
        for it in range(1, st.n_iter + 1):
            adapting = it <= st.burn_in
            for bi in self.scan:
                self._update_block(bi, adapting)
            if adapting:
                if it == st.burn_in // 2 and st.burn_in >= 4:
                    for b in self.blocks:
                        b.restart_adaptation()
                for b in self.blocks:
                    b.update_cov(self._block_coords(b)[0])
                    if it > st.adapt_cov_after and b.count % 25 == 0:
                        b.refresh_chol()
            if st.check_every and it % st.check_every == 0:
                self._assert_consistent()
            if it > st.burn_in and (it - st.burn_in) % st.thin == 0:
                kept[k] = self.theta
                kept_ll[k] = self.loglik
                kept_lp[k] = self.target()
                k += 1
        acc = {b.name: (b.accepts / b.proposals if b.proposals else 0.0)
               for b in self.blocks}
        return kept[:k], kept_ll[:k], kept_lp[:k], acc

    def _assert_consistent(self):
        """Guard the incremental caches against drift: a from-scratch
        rebuild of the same state must reproduce the cached target."""
        before = self.target()
        theta = self.theta.copy()
        self._set_state(theta)
        after = self.target()
        if not np.isclose(before, after, rtol=1e-8, atol=1e-6):
            raise RuntimeError(
                f"cache inconsistency: incremental target {before!r} vs "
                f"recomputed {after!r}")


# ---------------------------------------------------------------------------
# Public entry point
# ---------------------------------------------------------------------------

def run_mcmc(series: RainfallSeries, priors: PriorSpec, space: StateSpace,
             bases: BasisSet, settings: MCMCSettings) -> ChainSet:
    """Fit the model by blockwise adaptive random-walk Metropolis.

    Each chain is independently seeded and starts from its own jittered
    moment-based point; proposal scales and covariances adapt toward ~25%
    acceptance during burn-in and are frozen afterwards, so retained
    draws target the exact posterior.  Chains run one after the other
    (they share nothing mutable, so running them in separate processes is
    safe if wanted).
    """
    layout = ParameterLayout.create(space, bases)
    seeds = np.random.SeedSequence(settings.seed).spawn(settings.n_chains)
    draws = np.empty((settings.n_chains, settings.n_retained, layout.n_params))
    loglik = np.empty((settings.n_chains, settings.n_retained))
    logpost = np.empty((settings.n_chains, settings.n_retained))
    acceptance = []
    for c, seq in enumerate(seeds):
        chain = _Chain(series, priors, layout, bases, settings,
                       np.random.default_rng(seq))
        chain.initialize()
        kept, ll, lp, acc = chain.run()
        draws[c], loglik[c], logpost[c] = kept, ll, lp
        acceptance.append(acc)
    chain_ids = [list(seq.spawn_key) for seq in seeds]
    return ChainSet(layout, settings, chain_ids, draws, loglik, logpost,
                    acceptance)
