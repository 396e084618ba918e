"""Fit the model to data simulated from a known truth and compare.

A short adaptive-Metropolis run on a two-clone, one-wet-state model; with
only a few thousand iterations this is a demonstration, not a converged
posterior, but the intercepts and mixture weights already land close to
the generating values.
"""

import time

import numpy as np

from rainhmm import (
    EmissionModel,
    MCMCSettings,
    PriorSpec,
    StateSpace,
    TransitionModel,
    BasisSet,
    build_time_covariates,
    psrf_table,
    run_mcmc,
    simulate_series,
)

rng = np.random.default_rng(1)

# ---------------------------------------------------------------------------
# Truth: two dry clones (one sticky, one brief), one wet state, a mild
# seasonal cycle on persistence and on the zero probability.
# ---------------------------------------------------------------------------

t_len = 6000
timestamps = np.datetime64("2001-01-01T00:00:00") + \
    np.arange(t_len).astype("timedelta64[h]")
cov = build_time_covariates(timestamps)
bases = BasisSet.build(cov, seasonal_knots=6, overall_knots=4)
ks, ko = bases.seasonal.n_coef, bases.overall.n_coef
space = StateSpace(n_dry=2, n_wet=1)

truth_trans = TransitionModel(
    iota=np.array([2.4, 0.4]),
    a1=np.array([0.5, -0.3, 0.2, -0.1, 0.1]), a2=np.zeros(ko),
    q=np.array([1.0]),
    v=np.array([0.6, 0.4]),
    r=np.array([[0.45, 0.55]]),
    p0=np.array([0.5, 0.3, 0.2]))
truth_emit = EmissionModel(
    eta=np.array([3.0, -0.2]),
    b1=np.vstack([[0.4, -0.2, 0.2, 0.0, -0.1], np.zeros(ks)]),
    b2=np.zeros((2, ko)),
    alpha=np.array([-0.3, 0.4]),
    c1=np.zeros((2, ks)), c2=np.zeros((2, ko)),
    gamma=np.array([0.05, 0.15]),
    d1=np.zeros((2, ks)), d2=np.zeros((2, ko)))

series = simulate_series(truth_trans, truth_emit, space, bases, timestamps,
                         rng)
print(f"simulated {t_len} hours: {(series.values == 0).mean():.1%} zeros, "
      f"max {series.values.max():.1f} mm")

# ---------------------------------------------------------------------------
# Fit.  Two chains so the scale-reduction diagnostic means something;
# proposal scales and covariances adapt during burn-in and freeze after.
# ---------------------------------------------------------------------------

settings = MCMCSettings(n_chains=2, n_iter=1500, burn_in=750, thin=3, seed=7)
t0 = time.perf_counter()
fit = run_mcmc(series, PriorSpec(), space, bases, settings)
print(f"\nfit: {settings.n_chains} chains x {settings.n_iter} iterations "
      f"in {time.perf_counter() - t0:.0f} s "
      f"({fit.n_retained} retained draws per chain)")

acc = fit.acceptance[0]
print(f"acceptance rates (chain 0): min {min(acc.values()):.2f}, "
      f"median {np.median(list(acc.values())):.2f}, "
      f"max {max(acc.values()):.2f}")

# ---------------------------------------------------------------------------
# Compare posterior medians with the truth for the interpretable
# parameters.  A run this short will not satisfy PSRF < 1.05 everywhere;
# the full-length defaults in MCMCSettings() are sized for that.  Expect
# the emission side to pin down quickly while the split between the two
# dry clones (iota_1, v_0) stays vague: the clones share an emission
# model, so only run-length patterns inform them.
# ---------------------------------------------------------------------------

names, values, _ = psrf_table(fit)
print(f"PSRF: median {np.median(values):.3f}, "
      f"worst {values.max():.3f} ({names[int(np.argmax(values))]})")

targets = [
    ("iota_0", truth_trans.iota[0]), ("iota_1", truth_trans.iota[1]),
    ("v_0", truth_trans.v[0]), ("r_0_0", truth_trans.r[0, 0]),
    ("eta_dry", truth_emit.eta[0]), ("eta_wet1", truth_emit.eta[1]),
    ("alpha_wet1", truth_emit.alpha[1]), ("gamma_wet1", truth_emit.gamma[1]),
]
print("\nparameter        truth   posterior median [5%, 95%]")
for name, true_val in targets:
    draws = fit.parameter(name).ravel()
    lo, med, hi = np.percentile(draws, [5, 50, 95])
    print(f"  {name:12s} {true_val:+.3f}   {med:+.3f} [{lo:+.3f}, {hi:+.3f}]")
