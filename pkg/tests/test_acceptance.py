"""Acceptance battery: one numbered check per guaranteed property.

Each test prints a single PASS/FAIL line (visible with -v through the
test name, and in captured output with the measured numbers).  The fast
exactness checks come first; the parameter-recovery and calibration runs
at the end dominate the wall time (tens of minutes on one core).
"""

import math
import time

import numpy as np
import pytest

from rainhmm.diagnostics import (
    EnsembleStats,
    aggregate,
    dry_period_lengths,
    spearman_autocorr,
)
from rainhmm.generator import dry_state_runs, simulate_series
from rainhmm.inference import (
    MCMCSettings,
    ParameterLayout,
    PriorSpec,
    constraints_ok,
    psrf_table,
    run_mcmc,
)
from rainhmm.model import (
    EmissionModel,
    RainfallSeries,
    StateSpace,
    TransitionModel,
    emission_grid_masses,
    emission_matrix,
    forward_loglik,
    forward_loglik_from_caches,
    gpd_cdf,
    persistence_probs,
    transition_matrix,
)
from rainhmm.splines import BasisSet, build_time_covariates

from helpers import (
    hourly,
    make_bases,
    naive_spearman,
    random_emission,
    random_series,
    random_transition,
)


def _verdict(num, label, ok, detail):
    print(f"[acceptance {num}] {label}: {'PASS' if ok else 'FAIL'} ({detail})")
    assert ok, f"{label}: {detail}"


def _logit(p):
    return math.log(p / (1.0 - p))


# ---------------------------------------------------------------------------
# 1. forward algorithm vs exhaustive path enumeration
# ---------------------------------------------------------------------------

def _enumerated_loglik(values, trans, emit, space, bases):
    """Independent likelihood oracle: sum the complete-data probability
    over every latent path, vectorized over the path index."""
    t_len = len(values)
    s = space.n_states
    mats = np.stack([transition_matrix(t, trans, space, bases)
                     for t in range(t_len)])
    e = emission_matrix(np.asarray(values, dtype=float), emit, bases)
    groups = np.array([space.group_of(z) for z in range(s)])
    eg = e[:, groups]                                    # (T, S)
    paths = np.stack(np.unravel_index(np.arange(s ** t_len), (s,) * t_len),
                     axis=1)                             # (S^T, T)
    prob = trans.p0[paths[:, 0]] * eg[0, paths[:, 0]]
    for t in range(1, t_len):
        prob = prob * mats[t, paths[:, t - 1], paths[:, t]] \
                    * eg[t, paths[:, t]]
    return math.log(prob.sum())


def test_01_forward_likelihood_matches_path_enumeration():
    rng = np.random.default_rng(101)
    space = StateSpace(2, 2)
    # warm the compiled forward kernel outside the timed region
    warm_ts = hourly("2001-01-01T00:00:00", 8)
    _, warm_bases = make_bases(8)
    forward_loglik(RainfallSeries.create(np.zeros(8) + 0.2, warm_ts),
                   random_transition(rng, space, warm_bases),
                   random_emission(rng, space, warm_bases), space, warm_bases)

    start = time.perf_counter()
    worst = 0.0
    for rep in range(50):
        t_len = int(rng.integers(6, 9))
        ts = hourly("2001-03-01T00:00:00", t_len)
        _, bases = make_bases(t_len, start="2001-03-01T00:00:00")
        trans = random_transition(rng, space, bases, spline_scale=0.5)
        emit = random_emission(rng, space, bases, spline_scale=0.3)
        vals = np.where(rng.random(t_len) < 0.45, 0.0,
                        0.2 * rng.integers(1, 12, t_len))
        series = RainfallSeries.create(vals, ts)
        ours = forward_loglik(series, trans, emit, space, bases)
        ref = _enumerated_loglik(vals, trans, emit, space, bases)
        worst = max(worst, abs(ours - ref))
    elapsed = time.perf_counter() - start
    ok = worst < 1e-9 and elapsed < 5.0
    _verdict(1, "forward log-likelihood matches exhaustive path enumeration",
             ok, f"50 draws, max |diff| {worst:.2e}, {elapsed:.2f} s")


# ---------------------------------------------------------------------------
# 2. transition matrix structure
# ---------------------------------------------------------------------------

def test_02_transition_rows_stochastic_and_clone_block_zero():
    rng = np.random.default_rng(102)
    shapes = [(1, 1), (2, 2), (3, 2), (4, 3)]
    _, bases = make_bases(200)
    worst = 0.0
    clone_ok = True
    for i in range(10_000):
        space = StateSpace(*shapes[i % 4])
        trans = random_transition(rng, space, bases, spline_scale=0.7)
        t = int(rng.integers(200))
        mat = transition_matrix(t, trans, space, bases)
        worst = max(worst, float(np.max(np.abs(mat.sum(axis=1) - 1.0))))
        d = space.n_dry
        block = mat[:d, :d].copy()
        np.fill_diagonal(block, 0.0)
        if np.any(block != 0.0):
            clone_ok = False
    ok = worst < 1e-12 and clone_ok
    _verdict(2, "transition rows stochastic, clone off-diagonals exactly zero",
             ok, f"10000 draws, max row-sum deviation {worst:.2e}, "
                 f"clone zeros {'exact' if clone_ok else 'VIOLATED'}")


# ---------------------------------------------------------------------------
# 3. emission normalization
# ---------------------------------------------------------------------------

def test_03_emission_masses_and_tail_sum_to_one():
    rng = np.random.default_rng(103)
    n = 1500
    worst = 0.0
    for _ in range(1000):
        pi = rng.uniform(0.05, 0.95)
        sigma = math.exp(rng.normal(0.0, 0.8))
        xi = rng.uniform(-0.4, 1.0)
        masses = emission_grid_masses(n, pi, sigma, xi)
        s01 = 1.0 - gpd_cdf(0.1, sigma, xi)
        tail = (1.0 - pi) * (1.0 - gpd_cdf(n * 0.2 - 0.1, sigma, xi)) / s01
        worst = max(worst, abs(masses.sum() + tail - 1.0))
    spot = abs(gpd_cdf(1.0, 1.0, 0.5) - 5.0 / 9.0)
    ok = worst < 1e-6 and spot < 1e-12
    _verdict(3, "emission grid masses plus analytic tail sum to one",
             ok, f"1000 draws, max |sum-1| {worst:.2e}, "
                 f"GPD spot-check error {spot:.2e}")


# ---------------------------------------------------------------------------
# 4. dry-spell law is the intended geometric mixture
# ---------------------------------------------------------------------------

def test_04_dry_spells_follow_geometric_mixture():
    space = StateSpace(2, 1)
    t_len = 770_000
    ts = hourly("2001-01-01T00:00:00", t_len)
    _, bases = make_bases(t_len)
    p = np.array([0.9, 0.4])
    v = np.array([0.4, 0.6])
    trans = TransitionModel(
        iota=np.array([_logit(p[0]), _logit(p[1])]),
        a1=np.zeros(bases.seasonal.n_coef), a2=np.zeros(bases.overall.n_coef),
        q=np.array([1.0]), v=v, r=np.array([[0.5, 0.5]]),
        p0=np.full(3, 1 / 3))
    emit = random_emission(np.random.default_rng(104), space, bases)
    _, path = simulate_series(trans, emit, space, bases, ts,
                              np.random.default_rng(104), keep_latent=True)
    runs = dry_state_runs(path, space)[1:-1]     # interior runs only
    n_runs = runs.size
    kmax = int(runs.max())
    counts = np.bincount(runs, minlength=kmax + 1)[1:]
    ecdf = np.cumsum(counts) / n_runs
    k = np.arange(1, kmax + 1)
    mix_cdf = v[0] * (1.0 - p[0] ** k) + v[1] * (1.0 - p[1] ** k)
    ks = float(np.max(np.abs(ecdf - mix_cdf)))
    ok = n_runs >= 100_000 and ks < 0.01
    _verdict(4, "latent dry spells match the two-geometric mixture",
             ok, f"{n_runs} interior runs, Kolmogorov distance {ks:.4f}")


# ---------------------------------------------------------------------------
# 5. parameter recovery at desk scale (shared with the constraint audit)
# ---------------------------------------------------------------------------

RECOVERY_T = 20_000
RECOVERY_REPEATS = 20


def _recovery_truth(bases):
    """Well-separated truth with every spline effect active."""
    rng = np.random.default_rng(77)
    ks, ko = bases.seasonal.n_coef, bases.overall.n_coef

    def wiggle(n, scale, rows=None):
        shape = n if rows is None else (rows, n)
        return scale * rng.standard_normal(shape)

    trans = TransitionModel(
        iota=np.array([2.2, 0.3]),
        a1=wiggle(ks, 0.30), a2=wiggle(ko, 0.20),
        q=np.array([0.65, 0.35]),
        v=np.array([0.55, 0.45]),
        r=np.array([[0.35, 0.45, 0.20],
                    [0.25, 0.30, 0.45]]),
        p0=np.array([0.4, 0.3, 0.2, 0.1]))
    # Emission roles are kept sharply distinct (a dry group whose positive
    # draws are nearly all censored to the first grid cell, a mixed light
    # group, a heavy group that almost never emits zeros): with overlapping
    # roles the posterior develops near-symmetric relabelling modes and no
    # within-mode sampler can meet the convergence gate.
    emit = EmissionModel(
        eta=np.array([2.5, 0.2, -3.5]),
        b1=wiggle(ks, 0.30, rows=3), b2=wiggle(ko, 0.20, rows=3),
        alpha=np.array([-3.0, -0.3, 0.4]),
        c1=wiggle(ks, 0.15, rows=3), c2=wiggle(ko, 0.10, rows=3),
        gamma=np.array([0.05, -0.20, 0.40]),
        d1=wiggle(ks, 0.08, rows=3), d2=wiggle(ko, 0.05, rows=3))
    return trans, emit


@pytest.fixture(scope="module")
def recovery():
    space = StateSpace(2, 2)
    ts = hourly("2001-01-01T00:00:00", RECOVERY_T)
    cov = build_time_covariates(ts)
    bases = BasisSet.build(cov, seasonal_knots=6, overall_knots=4)
    truth_trans, truth_emit = _recovery_truth(bases)
    assert constraints_ok(truth_trans.iota, truth_emit.eta, truth_emit.gamma)
    layout = ParameterLayout.create(space, bases)
    truth_vec = layout.pack(truth_trans, truth_emit,
                            np.ones(len(layout.spline_names)))
    priors = PriorSpec()

    start = time.perf_counter()
    fits = []
    for rep in range(RECOVERY_REPEATS):
        series = simulate_series(truth_trans, truth_emit, space, bases, ts,
                                 np.random.default_rng([4242, rep]))
        settings = MCMCSettings(n_chains=4 if rep == 0 else 1, n_iter=5000,
                                burn_in=2500, thin=2, seed=5000 + rep)
        fits.append(run_mcmc(series, priors, space, bases, settings))
    wall = time.perf_counter() - start
    return {"space": space, "layout": layout, "truth_vec": truth_vec,
            "fits": fits, "wall": wall}


def test_05_posterior_recovers_known_parameters(recovery):
    layout = recovery["layout"]
    truth_vec = recovery["truth_vec"]

    names, values, _ = psrf_table(recovery["fits"][0])
    psrf_ok = bool(np.all(np.isfinite(values)) and np.max(values) < 1.05)
    worst_psrf = names[int(np.argmax(values))], float(np.max(values))

    families = ("iota", "eta", "alpha", "gamma", "q", "v", "r", "p0")
    idx = np.array([i for i, n in enumerate(layout.names)
                    if n.split("_")[0] in families])
    covered = np.zeros(idx.size, dtype=int)
    for fit in recovery["fits"]:
        lo, hi = np.quantile(fit.pooled()[:, idx], [0.05, 0.95], axis=0)
        covered += (lo <= truth_vec[idx]) & (truth_vec[idx] <= hi)
    worst_cov = int(covered.min())
    worst_name = layout.names[int(idx[int(np.argmin(covered))])]
    cover_ok = worst_cov >= int(0.8 * RECOVERY_REPEATS)

    ok = psrf_ok and cover_ok
    _verdict(5, "synthetic-data fits recover the generating parameters", ok,
             f"max PSRF {worst_psrf[1]:.4f} ({worst_psrf[0]}), minimum "
             f"coverage {worst_cov}/{RECOVERY_REPEATS} ({worst_name}), "
             f"{recovery['wall'] / 60:.1f} min for {RECOVERY_REPEATS} fits")


# ---------------------------------------------------------------------------
# 6. predictive-check calibration
# ---------------------------------------------------------------------------

def test_06_envelopes_are_calibrated_under_the_model():
    space = StateSpace(2, 2)
    t_len = 10_000
    ts = hourly("2001-01-01T00:00:00", t_len)
    cov = build_time_covariates(ts)
    bases = BasisSet.build(cov, seasonal_knots=6, overall_knots=4)
    trans, emit = _recovery_truth(bases)

    n_reps, n_draws = 100, 200
    scalar_inside = np.zeros(8, dtype=int)       # 4 lags + 4 seasons
    dry_inside = dry_total = 0
    for rep in range(n_reps):
        rng = np.random.default_rng([606, rep])
        obs = simulate_series(trans, emit, space, bases, ts, rng)
        acc = EnsembleStats(obs, top_k=800)
        for _ in range(n_draws):
            acc.add(simulate_series(trans, emit, space, bases, ts, rng))
        reports = {r.name: r for r in acc.finalize()}
        scalar_inside += np.concatenate([
            reports["spearman_autocorr"].inside,
            reports["seasonal_zero_proportion"].inside]).astype(int)
        dry = reports["dry_top_k"]
        dry_inside += int(np.count_nonzero(dry.inside))
        dry_total += len(dry.labels)

    scalar_ok = bool(np.min(scalar_inside) >= 85)
    dry_rate = dry_inside / dry_total
    dry_ok = dry_rate >= 0.85
    ok = scalar_ok and dry_ok
    labels = ["lag_1", "lag_2", "lag_6", "lag_24",
              "DJF", "MAM", "JJA", "SON"]
    worst = labels[int(np.argmin(scalar_inside))]
    _verdict(6, "observed statistics fall inside their 95% envelopes", ok,
             f"worst scalar {int(np.min(scalar_inside))}/100 ({worst}), "
             f"dry-rank inside rate {dry_rate:.3f} over {dry_total} events")


# ---------------------------------------------------------------------------
# 7. checking-statistic oracles
# ---------------------------------------------------------------------------

def test_07_statistics_match_independent_oracles():
    rng = np.random.default_rng(107)
    lags = (1, 2, 6, 24)
    worst = 0.0
    for i in range(100):
        vals = np.where(rng.random(1000) < 0.5, 0.0,
                        0.2 * rng.integers(1, 9, 1000))
        lag = lags[i % 4]
        worst = max(worst, abs(spearman_autocorr(vals, lag)
                               - naive_spearman(vals, lag)))
    rho_ok = worst < 1e-12

    dry_ok = (list(dry_period_lengths(np.zeros(10))) == [10]
              and list(dry_period_lengths([0, 0.2, 0.4, 0, 0, 0.6, 0]))
              == [2, 2, 1])

    ts = hourly("2001-05-01T00:00:00", 24)
    day_total = aggregate(np.full(24, 0.2), ts, "daily")[0]
    hand_ok = day_total.size == 1 and abs(day_total[0] - 4.8) < 1e-9

    series = random_series(rng, hourly("2002-03-07T11:00:00", 5000))
    err_d = abs(aggregate(series.values, series.timestamps, "daily")[0].sum()
                - series.values.sum())
    err_m = abs(aggregate(series.values, series.timestamps, "monthly")[0].sum()
                - series.values.sum())
    sums_ok = err_d < 1e-9 and err_m < 1e-9

    ok = rho_ok and dry_ok and hand_ok and sums_ok
    _verdict(7, "rank autocorrelation, dry spells and aggregation match "
                "hand oracles", ok,
             f"100 series max rank-corr |diff| {worst:.2e}, daily/monthly "
             f"conservation error {max(err_d, err_m):.2e}")


# ---------------------------------------------------------------------------
# 8. ordering constraints hold for every retained draw
# ---------------------------------------------------------------------------

def test_08_every_retained_draw_satisfies_constraints(recovery):
    layout = recovery["layout"]
    n_draws = violations = 0
    for fit in recovery["fits"]:
        for vec in fit.pooled():
            trans, emit, _ = layout.unpack(vec)
            n_draws += 1
            if not constraints_ok(trans.iota, emit.eta, emit.gamma):
                violations += 1

    # a separate short run at the default state-space shape
    rng = np.random.default_rng(108)
    ts = hourly("2001-01-01T00:00:00", 3000)
    _, bases = make_bases(3000)
    space = StateSpace(3, 2)
    series = random_series(rng, ts)
    fit = run_mcmc(series, PriorSpec(), space, bases,
                   MCMCSettings(n_chains=2, n_iter=400, burn_in=200, thin=2,
                                seed=108))
    small_layout = ParameterLayout.create(space, bases)
    for vec in fit.pooled():
        trans, emit, _ = small_layout.unpack(vec)
        n_draws += 1
        if not constraints_ok(trans.iota, emit.eta, emit.gamma):
            violations += 1

    ok = violations == 0 and n_draws > 10_000
    _verdict(8, "all retained draws satisfy the ordering constraints", ok,
             f"{violations} violations in {n_draws} draws")


# ---------------------------------------------------------------------------
# 9. forward-pass wall time at full scale
# ---------------------------------------------------------------------------

def test_09_forward_pass_fast_at_full_scale():
    rng = np.random.default_rng(109)
    space = StateSpace(3, 2)
    t_len = 70_128
    ts = hourly("2001-01-01T00:00:00", t_len)
    _, bases = make_bases(t_len, seasonal_knots=6, overall_knots=8)
    trans = random_transition(rng, space, bases, spline_scale=0.2)
    emit = random_emission(rng, space, bases, spline_scale=0.1)
    series = random_series(rng, ts)

    pdt = persistence_probs(trans, bases)
    emis = emission_matrix(series.values, emit, bases)
    forward_loglik_from_caches(pdt, emis, trans)     # warm-up

    times = []
    for _ in range(5):
        t0 = time.perf_counter()
        ll = forward_loglik_from_caches(pdt, emis, trans)
        times.append(time.perf_counter() - t0)
    best = min(times)
    ok = best < 0.1 and np.isfinite(ll)
    _verdict(9, "forward pass at 70128 hours, 5 states stays under 100 ms",
             ok, f"best of 5: {best * 1000:.2f} ms")


# ---------------------------------------------------------------------------
# 10. optional workstation workflow on the registered station record
# ---------------------------------------------------------------------------

def test_10_station_record_workflow():
    pytest.skip("needs the registration-gated Exeter hourly record; the "
                "extended workflow (zero fraction near 88%, 99% wet "
                "quantile 5.2 mm inside predictive envelopes) runs outside "
                "CI on a workstation")
