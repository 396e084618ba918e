"""Posterior-predictive checking: envelopes flag the wrong model.

Simulate an "observed" year from a two-clone model, then check it against
two candidate generators: the true one and a single-clone simplification.
Each check compares the observed statistic with the 2.5%..97.5% band of
the statistic over an ensemble of simulated series.  The correct model
sits inside its envelopes; the single-clone model misses the long
dry spells it cannot produce.
"""

import numpy as np

from rainhmm import (
    EmissionModel,
    StateSpace,
    TransitionModel,
    BasisSet,
    build_time_covariates,
    EnsembleStats,
    dry_period_lengths,
    simulate_series,
)

# ---------------------------------------------------------------------------
# The generating model: a sticky clone plus a brief clone gives both long
# droughts and scattered single dry hours.
# ---------------------------------------------------------------------------

t_len = 2 * 8760
timestamps = np.datetime64("2001-01-01T00:00:00") + \
    np.arange(t_len).astype("timedelta64[h]")
cov = build_time_covariates(timestamps)
bases = BasisSet.build(cov, seasonal_knots=6, overall_knots=4)
ks, ko = bases.seasonal.n_coef, bases.overall.n_coef


def two_clone_model():
    space = StateSpace(n_dry=2, n_wet=1)
    trans = TransitionModel(
        iota=np.array([2.8, 0.2]),
        a1=np.array([0.6, -0.4, 0.3, -0.1, 0.0]), a2=np.zeros(ko),
        q=np.array([1.0]), v=np.array([0.45, 0.55]),
        r=np.array([[0.5, 0.5]]), p0=np.array([0.4, 0.3, 0.3]))
    emit = EmissionModel(
        eta=np.array([3.5, -0.1]),
        b1=np.zeros((2, ks)), b2=np.zeros((2, ko)),
        alpha=np.array([-0.4, 0.3]),
        c1=np.zeros((2, ks)), c2=np.zeros((2, ko)),
        gamma=np.array([0.0, 0.12]),
        d1=np.zeros((2, ks)), d2=np.zeros((2, ko)))
    return space, trans, emit


def one_clone_model():
    """Single dry state matched to the same overall dry fraction."""
    space = StateSpace(n_dry=1, n_wet=1)
    trans = TransitionModel(
        iota=np.array([1.9]),          # one persistence for all dry spells
        a1=np.array([0.6, -0.4, 0.3, -0.1, 0.0]), a2=np.zeros(ko),
        q=np.array([1.0]), v=np.array([1.0]),
        r=np.array([[0.5, 0.5]]), p0=np.array([0.6, 0.4]))
    _, _, emit2 = two_clone_model()
    emit = EmissionModel(
        eta=emit2.eta.copy(), b1=emit2.b1.copy(), b2=emit2.b2.copy(),
        alpha=emit2.alpha.copy(), c1=emit2.c1.copy(), c2=emit2.c2.copy(),
        gamma=emit2.gamma.copy(), d1=emit2.d1.copy(), d2=emit2.d2.copy())
    return space, trans, emit


space2, trans2, emit2 = two_clone_model()
observed = simulate_series(trans2, emit2, space2, bases, timestamps,
                           np.random.default_rng(30))
print(f"observed series: {(observed.values == 0).mean():.1%} zeros, "
      f"longest dry spell {dry_period_lengths(observed.values)[0]} h")

# ---------------------------------------------------------------------------
# Check against each candidate with a 60-series ensemble.
# ---------------------------------------------------------------------------

for label, (space, trans, emit) in (("two-clone (true)", two_clone_model()),
                                    ("one-clone", one_clone_model())):
    rng = np.random.default_rng(31)
    acc = EnsembleStats(observed, top_k=300)
    for _ in range(60):
        acc.add(simulate_series(trans, emit, space, bases, timestamps, rng))
    print(f"\ncandidate: {label}")
    print(f"  {'check':28s} {'outside':>8s} / coords")
    for rep in acc.finalize():
        print(f"  {rep.name:28s} {rep.n_outside:8d} / {len(rep.labels)}")
