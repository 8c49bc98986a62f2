"""Balanced completely randomized assignment and observed-data extraction.

The assignment mechanism allocates exactly r = N / J units to every
treatment combination, uniformly over all N! / (r!)^J balanced
arrangements. Uniformity comes for free from shuffling the multiset of
arm labels, with no rejection step. For small N the full arrangement set
can be enumerated exactly, which is the brute-force oracle behind the
repeated-sampling theory tests.
"""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from . import _kernels
from .design import Design, build_design
from .errors import DataError, EnumerationTooLargeError
from .science import Science, _check_match
from .seeds import as_rng

DEFAULT_ENUMERATION_CAP = 10_000_000


@dataclass(frozen=True)
class Assignment:
    """Map unit index -> arm index (0..J-1), exactly r units per arm."""

    n_factors: int
    arms: np.ndarray

    def __post_init__(self):
        n_arms = 2 ** self.n_factors
        arms = self.arms
        if arms.ndim != 1 or arms.size == 0:
            raise DataError("assignment must be a nonempty vector of arm indices")
        counts = np.bincount(arms, minlength=n_arms)
        reps = arms.size // n_arms
        if arms.size % n_arms != 0 or (counts != reps).any():
            bad = int(np.argmax(counts != reps))
            raise DataError(
                f"assignment is unbalanced: arm {bad} has {counts[bad]} units, "
                f"expected {reps}"
            )
        arms.setflags(write=False)

    @property
    def n_units(self) -> int:
        return self.arms.size

    @property
    def reps(self) -> int:
        return self.arms.size // (2 ** self.n_factors)


def base_labels(design: Design, n_units: int) -> np.ndarray:
    """Sorted balanced label vector: r copies of each arm index."""
    n_arms = design.n_combinations
    if n_units <= 0 or n_units % n_arms != 0:
        raise DataError(
            f"unit count {n_units} is not a positive multiple of {n_arms} arms"
        )
    return np.repeat(np.arange(n_arms, dtype=np.int64), n_units // n_arms)


def randomize(n_units: int, design: Design, seed) -> Assignment:
    """Uniform draw over all balanced assignments (multiset shuffle)."""
    rng = as_rng(seed)
    labels = rng.permutation(base_labels(design, n_units))
    return Assignment(n_factors=design.n_factors, arms=labels)


def count_assignments(n_units: int, design: Design) -> int:
    """Exact number of balanced assignments: N! / (r!)^J."""
    n_arms = design.n_combinations
    reps = n_units // n_arms
    if n_units <= 0 or n_units % n_arms != 0:
        raise DataError(
            f"unit count {n_units} is not a positive multiple of {n_arms} arms"
        )
    return math.factorial(n_units) // (math.factorial(reps) ** n_arms)


def enumerate_assignments(
    n_units: int, design: Design, cap: int = DEFAULT_ENUMERATION_CAP
):
    """Iterate every balanced assignment exactly once, lexicographic order.

    Raises :class:`EnumerationTooLargeError` up front when the count
    exceeds ``cap``; Monte Carlo over :func:`randomize` is the fallback.
    """
    total = count_assignments(n_units, design)
    if total > cap:
        raise EnumerationTooLargeError(
            f"{total} balanced assignments exceed the cap of {cap}; "
            "use Monte Carlo draws instead"
        )

    def _iter():
        labels = base_labels(design, n_units)
        while True:
            yield Assignment(n_factors=design.n_factors, arms=labels.copy())
            if not _kernels.next_permutation(labels):
                return

    return _iter()


def assignment_draws(n_units: int, design: Design, n_draws: int, seed) -> np.ndarray:
    """(n_draws, N) matrix of independent balanced assignments.

    All rows are drawn in one vectorized shuffle, so the result depends
    only on the seed, never on how callers later parallelize over rows.
    """
    rng = as_rng(seed)
    tiled = np.tile(base_labels(design, n_units), (n_draws, 1))
    return rng.permuted(tiled, axis=1)


# ---------------------------------------------------------------------------
# Observation
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class ObservedExperiment:
    """Per-unit assigned combination and observed outcome, balanced."""

    n_factors: int
    arms: np.ndarray
    y: np.ndarray
    unit_ids: np.ndarray

    def __post_init__(self):
        n = self.arms.size
        if self.y.shape != (n,) or self.unit_ids.shape != (n,):
            raise DataError("observed fields must share one length")
        n_arms = 2 ** self.n_factors
        counts = np.bincount(self.arms, minlength=n_arms)
        expected = n / n_arms
        if n % n_arms != 0 or (counts != int(expected)).any():
            design = build_design(self.n_factors)
            bad = int(np.argmax(np.abs(counts - expected)))
            label = design.combination_labels()[bad]
            raise DataError(
                f"observed data is unbalanced: arm ({label}) has {counts[bad]} "
                f"records, expected {expected:g} per arm"
            )
        if not np.isfinite(self.y).all():
            raise DataError("observed outcomes must all be finite")
        for arr in (self.arms, self.y, self.unit_ids):
            arr.setflags(write=False)

    @property
    def n_units(self) -> int:
        return self.arms.size

    @property
    def n_arms(self) -> int:
        return 2 ** self.n_factors

    @property
    def reps(self) -> int:
        return self.n_units // self.n_arms

    def arm_values(self, z: int) -> np.ndarray:
        """Observed outcomes for one arm, in unit order."""
        return self.y[self.arms == z]


def observe(science: Science, assignment: Assignment, design: Design) -> ObservedExperiment:
    """Reveal one potential outcome per unit; all other cells stay hidden."""
    _check_match(science, design)
    if assignment.n_units != science.n_units:
        raise DataError(
            f"assignment covers {assignment.n_units} units, science has "
            f"{science.n_units}"
        )
    idx = np.arange(science.n_units)
    return ObservedExperiment(
        n_factors=design.n_factors,
        arms=assignment.arms.copy(),
        y=science.outcomes[idx, assignment.arms].copy(),
        unit_ids=idx + 1,
    )


def write_observed_csv(obs: ObservedExperiment, path) -> None:
    """Columns: unit_id, one -1/1 column per factor, y_obs."""
    design = build_design(obs.n_factors)
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        header = ["unit_id"] + [f"f{k}" for k in range(1, obs.n_factors + 1)]
        writer.writerow(header + ["y_obs"])
        for uid, arm, y in zip(obs.unit_ids, obs.arms, obs.y):
            levels = [int(v) for v in design.combinations[arm]]
            writer.writerow([int(uid), *levels, format(y, ".17g")])


def read_observed_csv(path) -> ObservedExperiment:
    """Ingest an observed-data CSV, rejecting ragged or unbalanced files."""
    path = Path(path)
    if not path.is_file():
        raise DataError(f"observed-data file not found: {path}")
    with open(path, newline="") as fh:
        reader = csv.reader(fh)
        try:
            header = [h.strip() for h in next(reader)]
        except StopIteration:
            raise DataError(f"{path}: empty observed-data file") from None
        if len(header) < 3 or header[0] != "unit_id" or header[-1] != "y_obs":
            raise DataError(
                f"{path}: expected header unit_id, f1..fK, y_obs; got {header}"
            )
        n_factors = len(header) - 2
        design = build_design(n_factors)
        unit_ids, arms, ys = [], [], []
        for lineno, row in enumerate(reader, start=2):
            if not row:
                continue
            if len(row) != len(header):
                raise DataError(
                    f"{path}: line {lineno}: expected {len(header)} fields, "
                    f"got {len(row)}"
                )
            try:
                unit_ids.append(int(row[0]))
                levels = [int(v) for v in row[1 : 1 + n_factors]]
                ys.append(float(row[-1]))
            except ValueError as exc:
                raise DataError(f"{path}: line {lineno}: {exc}") from None
            if any(v not in (-1, 1) for v in levels):
                raise DataError(
                    f"{path}: line {lineno}: factor levels must be -1 or 1, "
                    f"got {levels}"
                )
            arms.append(design.combination_index(levels))
    return ObservedExperiment(
        n_factors=n_factors,
        arms=np.array(arms, dtype=np.int64),
        y=np.array(ys, dtype=float),
        unit_ids=np.array(unit_ids, dtype=np.int64),
    )


# ---------------------------------------------------------------------------
# Brute-force oracles
# ---------------------------------------------------------------------------

def enumerated_effect_estimates(
    science: Science, design: Design, cap: int = DEFAULT_ENUMERATION_CAP
) -> np.ndarray:
    """Effect estimates under every balanced assignment of a known science.

    Returns a (count, J-1) matrix in lexicographic assignment order. The
    row mean and covariance are the exact sampling moments of the
    estimator over the randomization distribution.
    """
    _check_match(science, design)
    total = count_assignments(science.n_units, design)
    if total > cap:
        raise EnumerationTooLargeError(
            f"{total} balanced assignments exceed the cap of {cap}"
        )
    scale = 2.0 ** (design.n_factors - 1) * science.reps
    contrast_scaled = design.effect_contrasts / scale
    return _kernels.enumerated_effects(
        np.ascontiguousarray(science.outcomes, dtype=np.float64),
        np.ascontiguousarray(contrast_scaled, dtype=np.float64),
        total,
    )


@dataclass(frozen=True)
class IndicatorMomentReport:
    """Exhaustive check of the centered assignment-indicator moments.

    ``empirical`` and ``theoretical`` hold the four moment classes in the
    order: same unit same arm, different units same arm, same unit
    different arms, different units different arms.
    """

    empirical: np.ndarray
    theoretical: np.ndarray
    max_abs_deviation: float


def indicator_moment_report(
    n_units: int, design: Design, cap: int = DEFAULT_ENUMERATION_CAP
) -> IndicatorMomentReport:
    """Compare enumerated indicator moments against their closed forms.

    The centered indicator is D_i(z) = W_i(z) - r/N. Its exact second
    moments over the uniform balanced randomization are r(N-r)/N^2 on the
    diagonal, -r(N-r)/(N^2 (N-1)) across units within an arm, -r^2/N^2
    across arms within a unit, and r^2/(N^2 (N-1)) across both.
    """
    n_arms = design.n_combinations
    reps = n_units // n_arms
    accum = np.zeros((n_units * n_arms, n_units * n_arms))
    total = 0
    for assignment in enumerate_assignments(n_units, design, cap=cap):
        w = np.zeros((n_units, n_arms))
        w[np.arange(n_units), assignment.arms] = 1.0
        d = (w - reps / n_units).ravel()
        accum += np.outer(d, d)
        total += 1
    accum /= total

    moments = accum.reshape(n_units, n_arms, n_units, n_arms)
    unit_eye = np.eye(n_units, dtype=bool)
    arm_eye = np.eye(n_arms, dtype=bool)
    same_unit = unit_eye[:, None, :, None]
    same_arm = arm_eye[None, :, None, :]

    n, r = float(n_units), float(reps)
    theory = {
        "same_unit_same_arm": r * (n - r) / n**2,
        "diff_unit_same_arm": -r * (n - r) / (n**2 * (n - 1)),
        "same_unit_diff_arm": -(r**2) / n**2,
        "diff_unit_diff_arm": r**2 / (n**2 * (n - 1)),
    }
    masks = {
        "same_unit_same_arm": same_unit & same_arm,
        "diff_unit_same_arm": ~same_unit & same_arm,
        "same_unit_diff_arm": same_unit & ~same_arm,
        "diff_unit_diff_arm": ~same_unit & ~same_arm,
    }
    empirical = []
    deviations = []
    for key in theory:
        vals = moments[np.broadcast_to(masks[key], moments.shape)]
        empirical.append(vals.mean())
        deviations.append(np.abs(vals - theory[key]).max())
    return IndicatorMomentReport(
        empirical=np.array(empirical),
        theoretical=np.array(list(theory.values())),
        max_abs_deviation=float(max(deviations)),
    )
