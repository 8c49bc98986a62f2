"""Conjugate Bayesian inference for the equicorrelated Gaussian model.

Rows of the potential-outcomes table are modeled as i.i.d. J-variate
Gaussians with a common mean vector, a single known intra-row
correlation, a Gaussian prior on the mean (prior sample size r0) and an
inverse-gamma prior (shape-rate) on the variance. Because each unit
reveals exactly one coordinate, the observed-data posterior is a
standard normal-inverse-gamma update per arm; the finite-population
effect posterior then has closed-form mean and variance, with Monte
Carlo imputation of the missing cells available as an independent route
to the same distribution.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy import stats

from .assignment import ObservedExperiment
from .design import Design
from .errors import ConfigError, NumericError
from .science import _psd_factor
from .seeds import as_rng

_CHUNK = 512


def equicorrelation_factor(rho: float, n_arms: int) -> float:
    """k(rho) = (1 - rho) (J - 1 + rho), the residual-spread factor.

    The expanded form is (1 - rho^2)(J - 1) - 2 rho (1 - rho)(J/2 - 1);
    the factored version is used everywhere because it makes
    nonnegativity over the admissible range obvious.
    """
    return (1.0 - rho) * (n_arms - 1.0 + rho)


@dataclass(frozen=True)
class GaussianPrior:
    """Prior block: mean vector, prior sample size, variance shape/rate, rho.

    ``mu0`` broadcasts from a scalar. ``rho`` is the known common
    correlation among each unit's potential outcomes and must exceed
    -1/(J-1) for the row covariance to be positive definite.
    """

    mu0: float | np.ndarray
    r0: float
    alpha: float
    beta: float
    rho: float

    def __post_init__(self):
        if self.r0 <= 0:
            raise ConfigError(f"prior sample size r0 must be positive, got {self.r0}")
        if self.alpha <= 0:
            raise ConfigError(f"shape alpha must be positive, got {self.alpha}")
        if self.beta < 0:
            raise ConfigError(f"rate beta must be nonnegative, got {self.beta}")
        if not -1.0 < self.rho <= 1.0:
            raise ConfigError(f"rho must lie in (-1, 1], got {self.rho}")

    def mean_vector(self, n_arms: int) -> np.ndarray:
        return np.broadcast_to(np.asarray(self.mu0, dtype=float), (n_arms,)).copy()

    def check_admissible(self, n_arms: int) -> None:
        if self.rho <= -1.0 / (n_arms - 1):
            raise NumericError(
                f"rho={self.rho} makes the equicorrelated covariance "
                f"indefinite for {n_arms} arms (needs rho > {-1.0/(n_arms-1):.4g})"
            )


@dataclass(frozen=True)
class PosteriorSummary:
    """Closed-form posterior of the model and of the population effects."""

    m: np.ndarray
    shape: float
    rate: float
    V: float
    k_rho: float
    effect_means: np.ndarray
    effect_variances: np.ndarray
    intervals: np.ndarray
    df: float
    alpha_level: float


def _arm_stats(obs: ObservedExperiment):
    n_arms = obs.n_arms
    means = np.array([obs.arm_values(z).mean() for z in range(n_arms)])
    if obs.reps >= 2:
        svars = np.array([obs.arm_values(z).var(ddof=1) for z in range(n_arms)])
    else:
        svars = np.zeros(n_arms)
    return means, svars


def posterior_closed_form(
    obs: ObservedExperiment,
    design: Design,
    prior: GaussianPrior,
    alpha_level: float = 0.05,
) -> PosteriorSummary:
    """Exact posterior mean and variance of every finite-population effect.

    The effect posterior marginalized over the variance is a scaled,
    shifted t with 2 * shape degrees of freedom; intervals come from its
    quantiles.
    """
    n_arms = design.n_combinations
    prior.check_admissible(n_arms)
    reps = obs.reps
    r0 = prior.r0
    mu0 = prior.mean_vector(n_arms)
    ybar, svars = _arm_stats(obs)

    m = (reps * ybar + r0 * mu0) / (reps + r0)
    shape = prior.alpha + obs.n_units / 2.0
    rate = (
        prior.beta
        + 0.5 * (reps - 1) * svars.sum()
        + 0.5 * (reps * r0 / (reps + r0)) * ((ybar - mu0) ** 2).sum()
    )
    if shape <= 1.0:
        raise NumericError(
            f"posterior shape {shape:.4g} <= 1: the variance posterior has no mean"
        )
    V = rate / (shape - 1.0)

    rho = prior.rho
    k_rho = equicorrelation_factor(rho, n_arms)
    shrink = 1.0 - (1.0 - rho) / n_arms
    eff_scale = 2.0 ** (design.n_factors - 1)
    contrast_means = design.effect_contrasts.T @ m / eff_scale
    point_estimates = design.effect_contrasts.T @ ybar / eff_scale
    effect_means = shrink * contrast_means + ((1.0 - rho) / n_arms) * point_estimates

    var_unit = (1.0 / eff_scale**2) * (
        k_rho / obs.n_units + (n_arms / (reps + r0)) * shrink**2
    )
    effect_variances = np.full(design.n_effects, V * var_unit)

    df = 2.0 * shape
    t_scale = np.sqrt(rate * var_unit / shape)
    q = stats.t.ppf(1.0 - alpha_level / 2.0, df)
    intervals = np.column_stack(
        [effect_means - q * t_scale, effect_means + q * t_scale]
    )
    return PosteriorSummary(
        m=m,
        shape=float(shape),
        rate=float(rate),
        V=float(V),
        k_rho=float(k_rho),
        effect_means=effect_means,
        effect_variances=effect_variances,
        intervals=intervals,
        df=df,
        alpha_level=alpha_level,
    )


@dataclass(frozen=True)
class MonteCarloPosterior:
    """Imputation-based posterior sample of the finite-population effects."""

    draws: np.ndarray
    means: np.ndarray
    variances: np.ndarray
    intervals: np.ndarray
    alpha_level: float
    sciences: tuple | None = None


def posterior_monte_carlo(
    obs: ObservedExperiment,
    design: Design,
    prior: GaussianPrior,
    n_draws: int = 10000,
    seed=None,
    alpha_level: float = 0.05,
    keep_sciences: int = 0,
) -> MonteCarloPosterior:
    """Posterior sample of the effects via missing-outcome imputation.

    Per draw: variance from its inverse-gamma posterior, arm means from
    their Gaussian posterior, then every missing cell from the row-wise
    Gaussian full conditional (per-cell variance sigma^2 (1 - rho^2),
    within-row covariance sigma^2 rho (1 - rho)), and finally the effect
    contrasts of the completed table. Observed cells are never redrawn.

    ``keep_sciences`` retains that many completed outcome tables for
    inspection (tests); leave at 0 for production runs.
    """
    n_arms = design.n_combinations
    prior.check_admissible(n_arms)
    if n_draws < 1:
        raise ConfigError(f"n_draws must be positive, got {n_draws}")
    closed = posterior_closed_form(obs, design, prior, alpha_level)
    rng = as_rng(seed)
    reps, r0, rho = obs.reps, prior.r0, prior.rho
    n_units = obs.n_units

    sigma2 = closed.rate / rng.gamma(closed.shape, 1.0, size=n_draws)
    mu = closed.m + rng.standard_normal((n_draws, n_arms)) * np.sqrt(
        sigma2 / (reps + r0)
    )[:, None]

    # Unit-scale factor of the missing-cell conditional covariance:
    # (1 - rho) (I + rho 11') over the J-1 hidden coordinates.
    cond = (1.0 - rho) * (
        np.eye(n_arms - 1) + rho * np.ones((n_arms - 1, n_arms - 1))
    )
    chol = _psd_factor(cond)

    arms = obs.arms
    unit_idx = np.arange(n_units)
    missing_cols = np.array(
        [np.delete(np.arange(n_arms), a) for a in arms]
    )

    eff_scale = 2.0 ** (design.n_factors - 1)
    contrasts = design.effect_contrasts / eff_scale
    draws = np.empty((n_draws, design.n_effects))
    kept = []
    done = 0
    while done < n_draws:
        take = min(_CHUNK, n_draws - done)
        mu_c = mu[done : done + take]
        sig_c = np.sqrt(sigma2[done : done + take])
        base = mu_c[:, None, :] + rho * (
            obs.y[None, :, None] - mu_c[:, arms][:, :, None]
        )
        eps = rng.standard_normal((take, n_units, n_arms - 1)) @ chol.T
        completed = base
        completed[:, unit_idx[:, None], missing_cols] += (
            eps * sig_c[:, None, None]
        )
        completed[:, unit_idx, arms] = obs.y
        draws[done : done + take] = completed.mean(axis=1) @ contrasts
        for k in range(take):
            if len(kept) >= keep_sciences:
                break
            kept.append(completed[k].copy())
        done += take

    lo = np.quantile(draws, alpha_level / 2.0, axis=0)
    hi = np.quantile(draws, 1.0 - alpha_level / 2.0, axis=0)
    return MonteCarloPosterior(
        draws=draws,
        means=draws.mean(axis=0),
        variances=draws.var(axis=0, ddof=1),
        intervals=np.column_stack([lo, hi]),
        alpha_level=alpha_level,
        sciences=tuple(kept) if kept else None,
    )


@dataclass(frozen=True)
class FiniteVsSuperReport:
    """Finite-population next to super-population posterior summaries."""

    finite_means: np.ndarray
    finite_variances: np.ndarray
    finite_intervals: np.ndarray
    super_means: np.ndarray
    super_variances: np.ndarray
    super_intervals: np.ndarray
    variance_ratio: np.ndarray
    df: float


def finite_vs_super_report(
    obs: ObservedExperiment,
    design: Design,
    prior: GaussianPrior,
    alpha_level: float = 0.05,
) -> FiniteVsSuperReport:
    """Compare effect posteriors for the N units versus the model limit.

    The super-population effect is the contrast of the posterior arm
    means alone; its variance lacks the finite-sample averaging term, so
    the ratio of finite to super variance is reported per effect.
    """
    closed = posterior_closed_form(obs, design, prior, alpha_level)
    n_arms = design.n_combinations
    eff_scale = 2.0 ** (design.n_factors - 1)
    sp_means = design.effect_contrasts.T @ closed.m / eff_scale
    c_sp = n_arms / ((obs.reps + prior.r0) * eff_scale**2)
    sp_vars = np.full(design.n_effects, closed.V * c_sp)
    q = stats.t.ppf(1.0 - alpha_level / 2.0, closed.df)
    sp_scale = np.sqrt(closed.rate * c_sp / closed.shape)
    sp_intervals = np.column_stack(
        [sp_means - q * sp_scale, sp_means + q * sp_scale]
    )
    return FiniteVsSuperReport(
        finite_means=closed.effect_means,
        finite_variances=closed.effect_variances,
        finite_intervals=closed.intervals,
        super_means=sp_means,
        super_variances=sp_vars,
        super_intervals=sp_intervals,
        variance_ratio=closed.effect_variances / sp_vars,
        df=closed.df,
    )
