"""Walk through the model pieces: states, transitions, emissions, likelihood.

The latent chain has n_dry "clone" dry states sharing one emission
distribution plus n_wet wet states with their own distributions.  Clones
differ only in how sticky they are, which turns the dry-spell length
distribution into a mixture of geometrics without leaving ordinary HMM
territory.
"""

import numpy as np

from rainhmm import (
    EmissionModel,
    RainfallSeries,
    StateSpace,
    TransitionModel,
    BasisSet,
    build_time_covariates,
    emission_grid_masses,
    forward_loglik,
    persistence_probs,
    transition_matrix,
)

rng = np.random.default_rng(0)

# ---------------------------------------------------------------------------
# A three-year hourly calendar and the spline bases living on it.  The
# seasonal basis is cyclic over the year; the overall basis is a natural
# cubic spline over the whole record.
# ---------------------------------------------------------------------------

timestamps = np.datetime64("2001-01-01T00:00:00") + \
    np.arange(3 * 8760).astype("timedelta64[h]")
cov = build_time_covariates(timestamps)
bases = BasisSet.build(cov, seasonal_knots=6, overall_knots=4)
print(f"{cov.n_hours} hours, seasonal basis {bases.seasonal.n_coef} coefs, "
      f"overall basis {bases.overall.n_coef} coefs")

# ---------------------------------------------------------------------------
# A 5-state model: 3 dry clones, 2 wet states.  Persistence intercepts are
# ordered (stickiest clone first); the seasonal coefficients a1 shift every
# clone's persistence through the year.
# ---------------------------------------------------------------------------

space = StateSpace(n_dry=3, n_wet=2)
trans = TransitionModel(
    iota=np.array([3.0, 1.5, 0.0]),
    a1=np.array([0.8, -0.5, 0.3, -0.2, 0.1]),   # seasonal persistence shift
    a2=np.zeros(bases.overall.n_coef),
    q=np.array([0.7, 0.3]),            # dry block exits split over wet states
    v=np.array([0.5, 0.3, 0.2]),       # wet-to-dry entries split over clones
    r=np.array([[0.40, 0.45, 0.15],    # wet rows: [to dry, to wet1, to wet2]
                [0.30, 0.25, 0.45]]),
    p0=np.full(5, 0.2))

emit = EmissionModel(
    eta=np.array([4.0, 0.5, -0.5]),    # zero-rain log-odds per group
    b1=np.zeros((3, 5)), b2=np.zeros((3, 3)),
    alpha=np.array([-0.7, -0.2, 0.6]),  # log scale per group
    c1=np.zeros((3, 5)), c2=np.zeros((3, 3)),
    gamma=np.array([0.0, -0.05, 0.3]),  # tail shape per group
    d1=np.zeros((3, 5)), d2=np.zeros((3, 3)))

# ---------------------------------------------------------------------------
# The transition matrix is time-varying.  Clone-to-clone moves are
# structurally impossible: the dry block is diagonal.
# ---------------------------------------------------------------------------

jan = 15 * 24
jul = 196 * 24
for label, t in (("mid January", jan), ("mid July", jul)):
    mat = transition_matrix(t, trans, space, bases)
    print(f"\ntransition matrix at {label} (rows sum to "
          f"{mat.sum(axis=1).min():.15f}..{mat.sum(axis=1).max():.15f}):")
    print(np.array_str(mat, precision=3, suppress_small=False))
print("\ndry-block off-diagonals are exactly zero:",
      bool(np.all(mat[:3, :3][~np.eye(3, dtype=bool)] == 0.0)))

# ---------------------------------------------------------------------------
# Seasonal persistence: the same spline shifts every clone's logit, so the
# clones move up and down together but never cross.
# ---------------------------------------------------------------------------

p = persistence_probs(trans, bases)
print("\nmean persistence per clone, winter (DJF) vs summer (JJA):")
month = timestamps.astype("datetime64[M]").astype(int) % 12
djf = np.isin(month, [11, 0, 1])
jja = np.isin(month, [5, 6, 7])
for d in range(3):
    print(f"  clone {d}: DJF {p[djf, d].mean():.3f}   "
          f"JJA {p[jja, d].mean():.3f}")

# ---------------------------------------------------------------------------
# Emissions: a point mass at zero, then masses on the 0.2 mm grid from an
# interval-censored zero-truncated generalized Pareto.  Masses plus the
# analytic tail always total one.
# ---------------------------------------------------------------------------

pi, sigma, xi = 0.4, 1.0, 0.3
masses = emission_grid_masses(8, pi, sigma, xi)
print("\nwet-state emission masses (pi=0.4, sigma=1, xi=0.3):")
for k, m in enumerate(masses):
    bar = "#" * int(200 * m)
    print(f"  {0.2 * k:4.1f} mm  {m:.4f} {bar}")
print(f"  first 8 masses cover {masses.sum():.4f} of the distribution")

# ---------------------------------------------------------------------------
# The forward algorithm gives the exact marginal likelihood of a series,
# summing over all latent paths in O(states^2 * T).  The spline bases are
# tied to a record's calendar, so a shorter series gets its own bases.
# ---------------------------------------------------------------------------

values = np.where(rng.random(500) < 0.8, 0.0, 0.2 * rng.integers(1, 20, 500))
series = RainfallSeries.create(values, timestamps[:500])
toy_bases = BasisSet.build(build_time_covariates(timestamps[:500]),
                           seasonal_knots=6, overall_knots=4)
ll = forward_loglik(series, trans, emit, space, toy_bases)
print(f"\nlog-likelihood of a 500-hour toy series: {ll:.2f}")
print(f"per-hour average: {ll / 500:.3f}")
