import numpy as np
import pytest

from factorial_causal import Science, build_design, read_observed_csv
from factorial_causal.cli import bundled_path


@pytest.fixture(scope="session")
def design2():
    return build_design(2)


@pytest.fixture(scope="session")
def table2():
    """The bundled 2x2, r=5 observed dataset."""
    return read_observed_csv(bundled_path("table2.csv"))


def exact_cov_science(design, n_units, mean, cov, seed) -> Science:
    """Science whose empirical (divisor N-1) covariance equals ``cov`` exactly.

    Columns of a centered random matrix are orthonormalized and rescaled,
    then pushed through the Cholesky factor, so the sample covariance hits
    the target up to float rounding. Needs n_units > J.
    """
    rng = np.random.default_rng(seed)
    n_arms = design.n_combinations
    x = rng.standard_normal((n_units, n_arms))
    x -= x.mean(axis=0)
    q, _ = np.linalg.qr(x)
    z = q * np.sqrt(n_units - 1)
    factor = np.linalg.cholesky(np.asarray(cov, dtype=float))
    return Science(n_factors=design.n_factors, outcomes=mean + z @ factor.T)


def additive_science(design, n_units, seed, arm_shift=None) -> Science:
    """Unit level plus arm shift: strictly additive by construction."""
    rng = np.random.default_rng(seed)
    u = rng.standard_normal(n_units)
    if arm_shift is None:
        arm_shift = rng.uniform(-5, 5, design.n_combinations)
    return Science(
        n_factors=design.n_factors,
        outcomes=u[:, None] + np.asarray(arm_shift, dtype=float)[None, :],
    )
