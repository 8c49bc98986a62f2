"""Sharp-null randomization tests and test-inversion intervals.

A sharp null pins every unit's whole effect vector to one constant
vector, which determines all missing potential outcomes from the
observed ones. Re-randomizing the completed table gives the exact (or
Monte Carlo) null distribution of the effect estimates, hence p-values;
scanning the hypothesized value and inverting the monotone one-sided
p-curve gives an interval of values not rejected at level alpha.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import _kernels
from .assignment import (
    ObservedExperiment,
    assignment_draws,
    enumerated_effect_estimates,
)
from .design import Design
from .errors import BracketError, ConfigError, DataError
from .neyman import analyze
from .science import Science
from .seeds import as_rng

LOW_DRAWS_WARNING = 100


@dataclass(frozen=True)
class SharpNull:
    """Hypothesized constant unit-level effect vector."""

    eta: np.ndarray

    def __post_init__(self):
        eta = np.asarray(self.eta, dtype=float)
        if eta.ndim != 1 or not np.isfinite(eta).all():
            raise DataError("sharp null must be a finite vector")
        object.__setattr__(self, "eta", eta)


def impute_science(
    obs: ObservedExperiment, design: Design, null: SharpNull
) -> Science:
    """Complete the potential-outcomes table under a sharp null.

    Each unit's mean level is backed out of its observed cell, then the
    rest of its row follows from the hypothesized effects. Observed cells
    are copied through bit-for-bit; every row's extracted effect vector
    equals the null vector.
    """
    eta = null.eta
    if eta.shape != (design.n_effects,):
        raise DataError(
            f"sharp null needs {design.n_effects} components, got {eta.shape}"
        )
    half = design.effect_contrasts @ (eta / 2.0)
    baseline = obs.y - half[obs.arms]
    outcomes = baseline[:, None] + half[None, :]
    outcomes[np.arange(obs.n_units), obs.arms] = obs.y
    return Science(n_factors=design.n_factors, outcomes=outcomes)


def _observed_effects(obs: ObservedExperiment, design: Design) -> np.ndarray:
    """Point estimates via the same kernel arithmetic used for the draws."""
    science = impute_science(
        obs, design, SharpNull(np.zeros(design.n_effects))
    )
    return effect_draws(science, design, obs.arms[None, :])[0]


def effect_draws(
    science: Science, design: Design, arm_rows: np.ndarray
) -> np.ndarray:
    """Estimates of all effects for each assignment row (kernel dispatch)."""
    scale = 2.0 ** (design.n_factors - 1) * science.reps
    return _kernels.randomization_effects(
        np.ascontiguousarray(science.outcomes, dtype=np.float64),
        np.ascontiguousarray(arm_rows, dtype=np.int64),
        np.ascontiguousarray(design.effect_contrasts / scale, dtype=np.float64),
    )


@dataclass(frozen=True)
class RandomizationResult:
    """Null distribution draws and the three tail conventions.

    ``p_two_sided`` counts symmetric deviations around the hypothesized
    value; ``p_greater``/``p_less`` are the one-sided tails used by the
    interval inversion. In Monte Carlo mode the observed assignment
    joins the reference set, so no p-value can be exactly zero.
    """

    eta: np.ndarray
    observed: np.ndarray
    draws: np.ndarray
    p_two_sided: np.ndarray
    p_greater: np.ndarray
    p_less: np.ndarray
    mode: str
    n_draws: int
    flags: tuple[str, ...] = ()


def _tail_pvalues(draws, observed, eta, extra: int):
    n = draws.shape[0] + extra
    greater = (np.sum(draws >= observed, axis=0) + extra) / n
    less = (np.sum(draws <= observed, axis=0) + extra) / n
    two = (np.sum(np.abs(draws - eta) >= np.abs(observed - eta), axis=0) + extra) / n
    return two, greater, less


def randomization_pvalues(
    obs: ObservedExperiment,
    design: Design,
    null: SharpNull,
    n_draws: int = 1000,
    seed=None,
    mode: str = "monte_carlo",
) -> RandomizationResult:
    """Randomization p-values for every effect under one sharp null.

    ``mode="exact"`` sweeps every balanced assignment (the observed one is
    a member of that set); ``mode="monte_carlo"`` samples ``n_draws``
    fresh assignments and adds the observed assignment to the reference
    set.
    """
    science = impute_science(obs, design, null)
    observed = effect_draws(science, design, obs.arms[None, :])[0]
    flags: list[str] = []
    if mode == "exact":
        draws = enumerated_effect_estimates(science, design)
        extra = 0
    elif mode == "monte_carlo":
        if n_draws < 1:
            raise ConfigError(f"n_draws must be positive, got {n_draws}")
        if n_draws < LOW_DRAWS_WARNING:
            flags.append(
                f"only {n_draws} draws: p-value resolution is poor"
            )
        rows = assignment_draws(obs.n_units, design, n_draws, as_rng(seed))
        draws = effect_draws(science, design, rows)
        extra = 1
    else:
        raise ConfigError(f"mode must be 'exact' or 'monte_carlo', got {mode!r}")

    two, greater, less = _tail_pvalues(draws, observed, null.eta, extra)
    return RandomizationResult(
        eta=null.eta,
        observed=observed,
        draws=draws,
        p_two_sided=two,
        p_greater=greater,
        p_less=less,
        mode=mode,
        n_draws=draws.shape[0],
        flags=tuple(flags),
    )


# ---------------------------------------------------------------------------
# Interval inversion
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class GridConfig:
    """Search window for the 1-D inversion scan.

    When ``lo``/``hi`` are omitted the window defaults to the point
    estimate plus/minus ``span`` standard errors. The coarse scan uses
    ``points`` evaluations, then each bound is bisected down to ``tol``.
    """

    lo: float | None = None
    hi: float | None = None
    points: int = 21
    tol: float = 0.05
    span: float = 8.0


@dataclass(frozen=True)
class FiducialInterval:
    """Inverted-test interval for one effect plus its evaluated p-curve."""

    effect_index: int
    effect_name: str
    alpha: float
    lower: float
    upper: float
    point: float
    curve: np.ndarray
    n_draws: int
    mode: str


def fiducial_interval(
    obs: ObservedExperiment,
    design: Design,
    j: int,
    alpha: float = 0.05,
    grid: GridConfig = GridConfig(),
    n_draws: int = 1000,
    seed=None,
) -> FiducialInterval:
    """Invert the one-sided p-curve for effect ``j`` (1-based position).

    The other effect components are held at their point estimates while
    component ``j`` sweeps the grid. One set of assignment draws is
    shared across all grid points (common random numbers), which makes
    the empirical p-curve exactly nondecreasing, so bisection on each
    bound is well posed: the lower bound is the largest swept value whose
    upper-tail p stays at or below alpha/2, the upper bound the smallest
    value whose p reaches 1 - alpha/2.
    """
    if not 1 <= j <= design.n_effects:
        raise ConfigError(f"effect position must be in [1, {design.n_effects}]")
    if not 0.0 < alpha < 1.0:
        raise ConfigError(f"alpha must be in (0, 1), got {alpha}")
    est = analyze(obs, design, alpha=alpha)
    base_eta = est.effects.copy()
    point = float(base_eta[j - 1])

    lo, hi = grid.lo, grid.hi
    if lo is None or hi is None:
        if est.var_estimates is None:
            raise ConfigError(
                "grid bounds must be given explicitly when variance "
                "estimation is unavailable"
            )
        se = float(np.sqrt(est.var_estimates[j - 1]))
        width = grid.span * se if se > 0 else max(1.0, abs(point))
        lo = point - width if lo is None else lo
        hi = point + width if hi is None else hi
    if not lo < point < hi:
        raise BracketError(
            f"grid [{lo}, {hi}] does not bracket the point estimate {point:.4g}"
        )

    rows = assignment_draws(obs.n_units, design, n_draws, as_rng(seed))
    observed = _observed_effects(obs, design)[j - 1]
    evaluated: dict[float, float] = {}

    def p_at(value: float) -> float:
        if value not in evaluated:
            eta = base_eta.copy()
            eta[j - 1] = value
            science = impute_science(obs, design, SharpNull(eta))
            draws = effect_draws(science, design, rows)[:, j - 1]
            evaluated[value] = (1 + int(np.sum(draws >= observed))) / (n_draws + 1)
        return evaluated[value]

    coarse = np.linspace(lo, hi, grid.points)
    pvals = np.array([p_at(v) for v in coarse])

    lower = _invert_bound(
        coarse, pvals, p_at, level=alpha / 2.0, side="lower", tol=grid.tol
    )
    upper = _invert_bound(
        coarse, pvals, p_at, level=1.0 - alpha / 2.0, side="upper", tol=grid.tol
    )
    curve = np.array(sorted(evaluated.items()))
    return FiducialInterval(
        effect_index=j,
        effect_name=design.effect_names[j - 1],
        alpha=alpha,
        lower=lower,
        upper=upper,
        point=point,
        curve=curve,
        n_draws=n_draws,
        mode="scan",
    )


def _invert_bound(coarse, pvals, p_at, level, side, tol):
    """Bisect the monotone p-curve to the requested crossing."""
    if side == "lower":
        qualifying = pvals <= level
        if not qualifying.any():
            raise BracketError(
                f"no grid point has p <= {level:.4g}; widen the grid downward"
            )
        if qualifying.all():
            raise BracketError(
                "entire grid sits below the rejection level; widen the grid upward"
            )
        k = int(np.max(np.nonzero(qualifying)))
        a, b = coarse[k], coarse[k + 1]
        while b - a > tol:
            mid = 0.5 * (a + b)
            if p_at(mid) <= level:
                a = mid
            else:
                b = mid
        return float(a)
    qualifying = pvals >= level
    if not qualifying.any():
        raise BracketError(
            f"no grid point has p >= {level:.4g}; widen the grid upward"
        )
    if qualifying.all():
        raise BracketError(
            "entire grid sits above the acceptance level; widen the grid downward"
        )
    k = int(np.min(np.nonzero(qualifying)))
    a, b = coarse[k - 1], coarse[k]
    while b - a > tol:
        mid = 0.5 * (a + b)
        if p_at(mid) >= level:
            b = mid
        else:
            a = mid
    return float(b)


def fiducial_intervals_random_eta(
    obs: ObservedExperiment,
    design: Design,
    alpha: float = 0.05,
    n_eta: int = 100,
    n_draws: int = 1000,
    seed=None,
    region: tuple[float, float] = (-6.0, 6.0),
):
    """Scatter-style inversion over uniformly sampled sharp-null vectors.

    Draws ``n_eta`` whole effect vectors uniformly from ``region`` raised
    to the effect count, computes every effect's one-sided p under each,
    and reads each bound off the scatter: the largest component value
    with p at or below alpha/2 and the smallest with p at or above
    1 - alpha/2. Off-component mismatch inflates the null spread, so
    these intervals run wider than the 1-D scan; this mode exists to
    reproduce scatter-based analyses rather than to replace the scan.
    """
    if not 0.0 < alpha < 1.0:
        raise ConfigError(f"alpha must be in (0, 1), got {alpha}")
    rng = as_rng(seed)
    n_eff = design.n_effects
    lo, hi = region
    if not lo < hi:
        raise ConfigError(f"region must be an increasing pair, got {region}")
    etas = rng.uniform(lo, hi, size=(n_eta, n_eff))
    rows = assignment_draws(obs.n_units, design, n_eta * n_draws, rng).reshape(
        n_eta, n_draws, obs.n_units
    )
    observed = _observed_effects(obs, design)

    p_matrix = np.empty((n_eta, n_eff))
    for k in range(n_eta):
        science = impute_science(obs, design, SharpNull(etas[k]))
        draws = effect_draws(science, design, rows[k])
        p_matrix[k] = (1 + np.sum(draws >= observed, axis=0)) / (n_draws + 1)

    intervals = []
    for j in range(1, n_eff + 1):
        comp = etas[:, j - 1]
        pj = p_matrix[:, j - 1]
        low_mask = pj <= alpha / 2.0
        high_mask = pj >= 1.0 - alpha / 2.0
        if not low_mask.any() or not high_mask.any():
            raise BracketError(
                f"effect {j}: sampled nulls never cross the rejection levels; "
                "increase n_eta or widen the region"
            )
        order = np.argsort(comp)
        curve = np.column_stack([comp[order], pj[order]])
        intervals.append(
            FiducialInterval(
                effect_index=j,
                effect_name=design.effect_names[j - 1],
                alpha=alpha,
                lower=float(comp[low_mask].max()),
                upper=float(comp[high_mask].min()),
                point=float(observed[j - 1]),
                curve=curve,
                n_draws=n_draws,
                mode="random_eta",
            )
        )
    return intervals
