"""Repeated-sampling estimation of factorial effects from observed data.

Point estimates are scaled contrasts of the per-arm observed means. The
variance machinery has two faces: estimators computable from observed
data alone (conservative, since the unit-level effect heterogeneity term
is unobservable), and exact sampling-moment oracles computable when the
full potential-outcomes table is known, used to quantify that
conservativeness in simulation studies.
"""

from __future__ import annotations

from dataclasses import dataclass, replace

import numpy as np
from scipy import stats

from .assignment import ObservedExperiment, assignment_draws
from .design import Design
from .errors import DataError
from .science import Science, population_moments
from . import _kernels

# Condition-number guard above which the covariance estimate is dropped
# from the quadratic test statistic in favor of its diagonal.
_COND_LIMIT = 1e12


@dataclass(frozen=True)
class NeymanEstimate:
    """Point estimates plus, once filled in, the variance machinery.

    ``var_estimates`` shares one value across effects (the estimator is
    the same sum of arm sample variances for every contrast); fields that
    need r >= 2 stay None on singly-replicated data.
    """

    effect_names: tuple[str, ...]
    effects: np.ndarray
    arm_means: np.ndarray
    arm_sample_variances: np.ndarray | None
    n_units: int
    reps: int
    var_estimates: np.ndarray | None = None
    cov_estimates: np.ndarray | None = None
    alpha: float | None = None
    intervals: np.ndarray | None = None
    t_statistic: float | None = None
    t_df: int | None = None
    p_chi2: float | None = None
    p_f: float | None = None
    notes: tuple[str, ...] = ()


def estimate(obs: ObservedExperiment, design: Design) -> NeymanEstimate:
    """Arm means and effect point estimates; arm variances when r >= 2."""
    if obs.n_factors != design.n_factors:
        raise DataError("observed data and design disagree on factor count")
    n_arms = design.n_combinations
    arm_means = np.array([obs.arm_values(z).mean() for z in range(n_arms)])
    scale = 2.0 ** (design.n_factors - 1)
    effects = design.effect_contrasts.T @ arm_means / scale
    if obs.reps >= 2:
        arm_vars = np.array([obs.arm_values(z).var(ddof=1) for z in range(n_arms)])
        notes = ()
    else:
        arm_vars = None
        notes = ("variance estimation unavailable: one replication per arm",)
    return NeymanEstimate(
        effect_names=design.effect_names,
        effects=effects,
        arm_means=arm_means,
        arm_sample_variances=arm_vars,
        n_units=obs.n_units,
        reps=obs.reps,
        notes=notes,
    )


def variance_estimates(
    est: NeymanEstimate, design: Design, alpha: float = 0.05
) -> NeymanEstimate:
    """Fill in variance/covariance estimates, intervals and the joint test.

    The common per-effect variance estimate is the scaled sum of arm
    sample variances; the covariance estimate is the signed four-block
    sum over the partition overlaps, which cancels exactly when all arm
    variances are equal. Intervals use the normal quantile (no t
    correction). The quadratic statistic is reported with both a
    chi-square tail and an F tail on its per-effect mean.
    """
    if est.arm_sample_variances is None:
        raise DataError("variance estimation needs at least two replications per arm")
    if not 0.0 < alpha < 1.0:
        raise DataError(f"alpha must be in (0, 1), got {alpha}")
    n_eff = len(est.effects)
    scale = 4.0 ** (design.n_factors - 1) * est.reps
    var_common = est.arm_sample_variances.sum() / scale
    var_estimates = np.full(n_eff, var_common)

    signs = design.effect_contrasts
    cov = (signs.T * est.arm_sample_variances) @ signs / scale
    np.fill_diagonal(cov, var_common)

    z = stats.norm.ppf(1.0 - alpha / 2.0)
    half = z * np.sqrt(var_common)
    intervals = np.column_stack([est.effects - half, est.effects + half])

    notes = list(est.notes)
    t_stat = None
    if var_common > 0:
        sigma = cov
        cond = np.linalg.cond(sigma)
        if not np.isfinite(cond) or cond > _COND_LIMIT:
            sigma = np.diag(var_estimates)
            notes.append(
                "covariance estimate ill-conditioned: quadratic statistic "
                "uses the diagonal only"
            )
        t_stat = float(est.effects @ np.linalg.solve(sigma, est.effects))
    else:
        notes.append("all arm sample variances are zero: joint test undefined")

    df = n_eff
    df_resid = est.n_units - design.n_combinations
    p_chi2 = float(stats.chi2.sf(t_stat, df)) if t_stat is not None else None
    p_f = (
        float(stats.f.sf(t_stat / df, df, df_resid))
        if t_stat is not None and df_resid > 0
        else None
    )
    return replace(
        est,
        var_estimates=var_estimates,
        cov_estimates=cov,
        alpha=alpha,
        intervals=intervals,
        t_statistic=t_stat,
        t_df=df,
        p_chi2=p_chi2,
        p_f=p_f,
        notes=tuple(notes),
    )


def analyze(
    obs: ObservedExperiment, design: Design, alpha: float = 0.05
) -> NeymanEstimate:
    """Convenience wrapper: estimate, then fill variances when possible."""
    est = estimate(obs, design)
    if est.arm_sample_variances is None:
        return est
    return variance_estimates(est, design, alpha=alpha)


# ---------------------------------------------------------------------------
# Exact sampling oracles (require the full science)
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class SamplingOracle:
    """Exact randomization moments of the effect estimator.

    ``estimator_expectation`` is the exact mean of the variance estimator;
    it exceeds the true variance by ``bias_terms`` (the unit-level effect
    variance over N), which is zero exactly under strict additivity.
    """

    true_effects: np.ndarray
    true_variances: np.ndarray
    true_covariances: np.ndarray
    bias_terms: np.ndarray
    estimator_expectation: float


def sampling_oracle(science: Science, design: Design) -> SamplingOracle:
    """Exact mean/variance/covariance of the estimator over all assignments.

    Computed in closed form from the population moments: the variance is
    the scaled sum of arm variances minus the effect-heterogeneity
    penalty; covariances take signed arm-variance blocks minus the
    corresponding effect-covariance penalty.
    """
    moments = population_moments(science, design)
    n_units = science.n_units
    reps = science.reps
    scale = 4.0 ** (design.n_factors - 1) * reps
    first_term = moments.arm_variances.sum() / scale

    signs = design.effect_contrasts
    signed_blocks = (signs.T * moments.arm_variances) @ signs / scale
    true_cov = signed_blocks - moments.effect_covariance / n_units
    np.fill_diagonal(
        true_cov, first_term - moments.effect_variances / n_units
    )

    eff_scale = 2.0 ** (design.n_factors - 1)
    true_effects = signs.T @ moments.arm_means / eff_scale
    return SamplingOracle(
        true_effects=true_effects,
        true_variances=np.diag(true_cov).copy(),
        true_covariances=true_cov,
        bias_terms=moments.effect_variances / n_units,
        estimator_expectation=float(first_term),
    )


@dataclass(frozen=True)
class ConservativenessReport:
    """Monte Carlo view of how much the variance estimator overshoots."""

    oracle_variances: np.ndarray
    mean_var_estimate: float
    expected_gap: np.ndarray
    observed_gap: np.ndarray
    half_width_known: np.ndarray
    half_width_naive: float
    half_width_ratio: np.ndarray
    n_draws: int


def conservativeness_report(
    science: Science,
    design: Design,
    n_draws: int,
    seed,
    alpha: float = 0.05,
) -> ConservativenessReport:
    """Simulate assignments and compare the variance estimator to the oracle.

    Also emits interval half-widths under perfect knowledge of the
    outcome correlation structure next to the naive ones computed as if
    effects were strictly additive, the ratio being the attainable
    interval shrinkage.
    """
    oracle = sampling_oracle(science, design)
    moments = population_moments(science, design)
    draws = assignment_draws(science.n_units, design, n_draws, seed)

    reps = science.reps
    n_arms = design.n_combinations
    var_sum = 0.0
    outcomes = science.outcomes
    for d in range(n_draws):
        arms = draws[d]
        picked = outcomes[np.arange(science.n_units), arms]
        arm_vars = np.array(
            [picked[arms == z].var(ddof=1) for z in range(n_arms)]
        )
        var_sum += arm_vars.sum() / (4.0 ** (design.n_factors - 1) * reps)
    mean_var = var_sum / n_draws

    z = stats.norm.ppf(1.0 - alpha / 2.0)
    hw_known = z * np.sqrt(oracle.true_variances)
    naive_var = 4.0 / science.n_units * moments.arm_variances.mean()
    hw_naive = float(z * np.sqrt(naive_var))
    return ConservativenessReport(
        oracle_variances=oracle.true_variances,
        mean_var_estimate=float(mean_var),
        expected_gap=oracle.bias_terms,
        observed_gap=mean_var - oracle.true_variances,
        half_width_known=hw_known,
        half_width_naive=hw_naive,
        half_width_ratio=hw_known / hw_naive,
        n_draws=n_draws,
    )


def effect_estimates_for_draws(
    science: Science, design: Design, draws: np.ndarray
) -> np.ndarray:
    """Effect estimates for each assignment row of ``draws`` (kernel path)."""
    scale = 2.0 ** (design.n_factors - 1) * science.reps
    return _kernels.randomization_effects(
        np.ascontiguousarray(science.outcomes, dtype=np.float64),
        np.ascontiguousarray(draws, dtype=np.int64),
        np.ascontiguousarray(design.effect_contrasts / scale, dtype=np.float64),
    )
