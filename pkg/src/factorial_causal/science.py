"""The complete potential-outcomes table and its population summaries.

A "science" is the N x J matrix holding every unit's outcome under every
treatment combination. Real experiments only ever reveal one cell per
row; this module works with the full table, which makes it the source of
exact estimands, exact sampling moments, and synthetic data for
simulation studies.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .design import Design, build_design
from .errors import ConfigError, DataError, NumericError
from .seeds import as_rng as _as_rng

# Relative tolerance for the internal agreement check between the two
# routes to the effect variance/covariance matrix.
_MOMENT_CHECK_TOL = 1e-10


@dataclass(frozen=True)
class Science:
    """N x J potential-outcomes matrix, columns in Yates combination order."""

    n_factors: int
    outcomes: np.ndarray

    def __post_init__(self):
        n_arms = 2 ** self.n_factors
        if self.outcomes.ndim != 2 or self.outcomes.shape[1] != n_arms:
            raise DataError(
                f"outcome matrix must have {n_arms} columns, got shape "
                f"{self.outcomes.shape}"
            )
        n = self.outcomes.shape[0]
        if n == 0 or n % n_arms != 0:
            raise DataError(
                f"unit count {n} is not a positive multiple of {n_arms} arms"
            )
        if not np.isfinite(self.outcomes).all():
            raise DataError("potential outcomes must all be finite")
        self.outcomes.setflags(write=False)

    @property
    def n_units(self) -> int:
        return self.outcomes.shape[0]

    @property
    def n_arms(self) -> int:
        return self.outcomes.shape[1]

    @property
    def reps(self) -> int:
        """Replications per arm under balanced assignment."""
        return self.n_units // self.n_arms


def unit_effects(science: Science, design: Design) -> np.ndarray:
    """Per-unit factorial effects, one row per unit, one column per effect.

    Row i holds the scaled contrasts of unit i's outcome vector: column j
    is ``contrast_j . Y_i / 2**(K-1)``.
    """
    _check_match(science, design)
    scale = 2.0 ** (design.n_factors - 1)
    return science.outcomes @ design.effect_contrasts / scale


def finite_population_effects(science: Science, design: Design) -> np.ndarray:
    """Population-level effects: contrasts of the per-arm outcome means."""
    _check_match(science, design)
    scale = 2.0 ** (design.n_factors - 1)
    return design.effect_contrasts.T @ science.outcomes.mean(axis=0) / scale


@dataclass(frozen=True)
class PopulationMoments:
    """Divisor-(N-1) population moments of a science.

    ``arm_covariance[z, z]`` equals ``arm_variances[z]``; the effect
    moments are the variance/covariance of the per-unit effect rows.
    """

    arm_means: np.ndarray
    arm_variances: np.ndarray
    arm_covariance: np.ndarray
    effect_variances: np.ndarray
    effect_covariance: np.ndarray


def population_moments(science: Science, design: Design) -> PopulationMoments:
    """Exact finite-population moments (divisor N-1 throughout).

    The effect variances are computed twice, directly from the unit-level
    effects and as the contrast quadratic form of the arm covariance
    matrix; the two routes must agree to float precision or the data is
    inconsistent.
    """
    _check_match(science, design)
    if science.n_units < 2:
        raise DataError("population moments need at least two units")
    y = science.outcomes
    arm_cov = np.atleast_2d(np.cov(y, rowvar=False, ddof=1))
    eff = unit_effects(science, design)
    eff_cov = np.atleast_2d(np.cov(eff, rowvar=False, ddof=1))

    scale = 4.0 ** (design.n_factors - 1)
    contrasts = design.effect_contrasts
    quad = contrasts.T @ arm_cov @ contrasts / scale
    denom = max(1.0, float(np.abs(eff_cov).max()))
    if np.abs(quad - eff_cov).max() > _MOMENT_CHECK_TOL * denom:
        raise NumericError(
            "effect moments disagree between the direct and contrast routes"
        )

    return PopulationMoments(
        arm_means=y.mean(axis=0),
        arm_variances=np.diag(arm_cov).copy(),
        arm_covariance=arm_cov,
        effect_variances=np.diag(eff_cov).copy(),
        effect_covariance=eff_cov,
    )


# ---------------------------------------------------------------------------
# Correlation structures for the Gaussian generator
# ---------------------------------------------------------------------------

CORRELATION_KINDS = (
    "strict_additive",
    "compound_symmetry",
    "within_factor_block",
    "two_parameter",
    "explicit",
)


@dataclass(frozen=True)
class Correlation:
    """Named correlation structure among the J potential outcomes.

    Kinds
    -----
    strict_additive
        All pairwise correlations are 1 (rank-one structure).
    compound_symmetry
        Single common correlation ``rho``; positive definite sampling
        needs ``rho > -1/(J-1)``.
    within_factor_block
        K=2 only: outcomes correlate (``rho``) only within a fixed level
        of factor 1.
    two_parameter
        K=2 only: ``rho`` within factor-1 level, ``rho2`` within factor-2
        level; positive definite iff ``|rho| + |rho2| < 1``.
    explicit
        Caller-supplied J x J matrix.
    """

    kind: str
    rho: float | None = None
    rho2: float | None = None
    matrix: np.ndarray | None = None

    def __post_init__(self):
        if self.kind not in CORRELATION_KINDS:
            raise ConfigError(
                f"unknown correlation kind {self.kind!r}; expected one of "
                f"{CORRELATION_KINDS}"
            )
        if self.kind in ("compound_symmetry", "within_factor_block"):
            if self.rho is None or not -1.0 <= self.rho <= 1.0:
                raise ConfigError(f"{self.kind} needs rho in [-1, 1], got {self.rho}")
        if self.kind == "two_parameter":
            if self.rho is None or self.rho2 is None:
                raise ConfigError("two_parameter needs both rho and rho2")
            if abs(self.rho) + abs(self.rho2) >= 1.0:
                raise ConfigError(
                    "two_parameter needs |rho| + |rho2| < 1 for positive "
                    f"definiteness, got rho={self.rho}, rho2={self.rho2}"
                )
        if self.kind == "explicit" and self.matrix is None:
            raise ConfigError("explicit correlation needs a matrix")

    def matrix_for(self, design: Design) -> np.ndarray:
        n_arms = design.n_combinations
        if self.kind == "strict_additive":
            return np.ones((n_arms, n_arms))
        if self.kind == "compound_symmetry":
            out = np.full((n_arms, n_arms), float(self.rho))
            np.fill_diagonal(out, 1.0)
            return out
        if self.kind == "within_factor_block":
            if design.n_factors != 2:
                raise ConfigError("within_factor_block is defined for K=2 only")
            r = float(self.rho)
            return np.array(
                [
                    [1.0, r, 0.0, 0.0],
                    [r, 1.0, 0.0, 0.0],
                    [0.0, 0.0, 1.0, r],
                    [0.0, 0.0, r, 1.0],
                ]
            )
        if self.kind == "two_parameter":
            if design.n_factors != 2:
                raise ConfigError("two_parameter is defined for K=2 only")
            r1, r2 = float(self.rho), float(self.rho2)
            return np.array(
                [
                    [1.0, r1, r2, 0.0],
                    [r1, 1.0, 0.0, r2],
                    [r2, 0.0, 1.0, r1],
                    [0.0, r2, r1, 1.0],
                ]
            )
        mat = np.asarray(self.matrix, dtype=float)
        if mat.shape != (n_arms, n_arms):
            raise ConfigError(
                f"explicit correlation must be {n_arms} x {n_arms}, got {mat.shape}"
            )
        if not np.allclose(mat, mat.T, atol=1e-12):
            raise ConfigError("explicit correlation must be symmetric")
        if not np.allclose(np.diag(mat), 1.0, atol=1e-12):
            raise ConfigError("explicit correlation must have unit diagonal")
        return mat


def _psd_factor(cov: np.ndarray) -> np.ndarray:
    """Factor L with L L' = cov, tolerating tiny negative eigenvalues."""
    eigvals, eigvecs = np.linalg.eigh(cov)
    floor = -1e-10 * max(1.0, float(eigvals.max(initial=0.0)))
    if eigvals.min() < floor:
        raise NumericError(
            f"covariance is not positive semidefinite (min eigenvalue "
            f"{eigvals.min():.3e})"
        )
    return eigvecs * np.sqrt(np.clip(eigvals, 0.0, None))


def simulate_gaussian_science(
    design: Design,
    n_units: int,
    mean,
    sd,
    correlation: Correlation,
    seed,
) -> Science:
    """Draw N i.i.d. rows from a J-variate Gaussian science model.

    ``mean`` and ``sd`` broadcast from scalars to per-combination vectors;
    the row covariance is ``outer(sd, sd) * R``. Deterministic for a
    fixed seed.
    """
    n_arms = design.n_combinations
    if n_units <= 0 or n_units % n_arms != 0:
        raise DataError(
            f"unit count {n_units} is not a positive multiple of {n_arms} arms"
        )
    mean = np.broadcast_to(np.asarray(mean, dtype=float), (n_arms,))
    sd = np.broadcast_to(np.asarray(sd, dtype=float), (n_arms,))
    if (sd < 0).any():
        raise ConfigError("per-combination scales must be nonnegative")
    cov = np.outer(sd, sd) * correlation.matrix_for(design)
    factor = _psd_factor(cov)
    rng = _as_rng(seed)
    rows = mean + rng.standard_normal((n_units, n_arms)) @ factor.T
    return Science(n_factors=design.n_factors, outcomes=rows)


def simulate_bernoulli_science(
    design: Design,
    reps: int,
    probabilities,
    seed,
) -> Science:
    """Independent 0/1 outcomes with per-combination success probabilities."""
    n_arms = design.n_combinations
    probs = np.broadcast_to(np.asarray(probabilities, dtype=float), (n_arms,))
    if ((probs < 0) | (probs > 1)).any():
        raise ConfigError("success probabilities must lie in [0, 1]")
    if reps <= 0:
        raise DataError(f"replication count must be positive, got {reps}")
    rng = _as_rng(seed)
    draws = rng.random((reps * n_arms, n_arms)) < probs
    return Science(n_factors=design.n_factors, outcomes=draws.astype(float))


# ---------------------------------------------------------------------------
# CSV round trip
# ---------------------------------------------------------------------------

def write_science_csv(science: Science, path) -> None:
    """Write the outcome table; header row carries the combination tokens."""
    design = build_design(science.n_factors)
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(design.combination_labels())
        for row in science.outcomes:
            writer.writerow([format(v, ".17g") for v in row])


def read_science_csv(path) -> Science:
    """Read a science table written by :func:`write_science_csv`."""
    path = Path(path)
    if not path.is_file():
        raise DataError(f"science file not found: {path}")
    with open(path, newline="") as fh:
        reader = csv.reader(fh)
        try:
            header = next(reader)
        except StopIteration:
            raise DataError(f"{path}: empty science file") from None
        n_factors = len(header[0].split(","))
        design = build_design(n_factors)
        expected = list(design.combination_labels())
        if [h.strip() for h in header] != expected:
            raise DataError(
                f"{path}: header does not match Yates combination order for "
                f"K={n_factors}"
            )
        rows = []
        for lineno, row in enumerate(reader, start=2):
            if not row:
                continue
            if len(row) != len(expected):
                raise DataError(
                    f"{path}: line {lineno}: expected {len(expected)} values, "
                    f"got {len(row)}"
                )
            try:
                rows.append([float(v) for v in row])
            except ValueError as exc:
                raise DataError(f"{path}: line {lineno}: {exc}") from None
    return Science(n_factors=n_factors, outcomes=np.array(rows, dtype=float))


def _check_match(science: Science, design: Design) -> None:
    if science.n_factors != design.n_factors:
        raise DataError(
            f"science has {science.n_factors} factors but design has "
            f"{design.n_factors}"
        )
