"""Contrast algebra for two-level factorial designs.

A design on K factors has J = 2**K treatment combinations, kept in Yates
order: lexicographic over the levels with the *last* factor varying
fastest. Under that ordering the contrast column of the k-th main effect
is literally the k-th column of the combination table, and every
interaction contrast is the elementwise product of the main-effect
columns of its factors. The full J x J contrast matrix (all-ones column
first) is orthogonal up to a factor of J.
"""

from __future__ import annotations

import itertools
import string
from dataclasses import dataclass
from functools import cached_property

import numpy as np

from .errors import ConfigError, DataError

MAX_FACTORS = 20

# Square matrices (J x J) are only materialized below this element count;
# larger designs must use per-effect columns.
_DENSE_LIMIT = 1 << 24


def effect_subsets(n_factors: int) -> tuple[tuple[int, ...], ...]:
    """Nonempty factor subsets (1-based) in Yates effect order.

    Singletons first in factor order, then pairs in lexicographic order,
    then triples, ..., ending with the full set.
    """
    subsets = []
    for size in range(1, n_factors + 1):
        subsets.extend(itertools.combinations(range(1, n_factors + 1), size))
    return tuple(subsets)


def effect_name(factors: tuple[int, ...]) -> str:
    """Letter label for an effect: factor 1 -> "A", subset (1, 3) -> "AC"."""
    return "".join(string.ascii_uppercase[f - 1] for f in factors)


@dataclass(frozen=True)
class Design:
    """Immutable contrast structure of a 2**K factorial design.

    Attributes
    ----------
    n_factors : int
        Number of two-level factors, K.
    combinations : ndarray of shape (J, K)
        All treatment combinations in Yates order, entries in {-1, +1}.
    """

    n_factors: int
    combinations: np.ndarray

    def __post_init__(self):
        if not 1 <= self.n_factors <= MAX_FACTORS:
            raise ConfigError(
                f"factor count must be in [1, {MAX_FACTORS}], got {self.n_factors}"
            )
        expected = 2 ** self.n_factors
        if self.combinations.shape != (expected, self.n_factors):
            raise ConfigError("combination table shape does not match factor count")
        self.combinations.setflags(write=False)

    @property
    def n_combinations(self) -> int:
        """J = 2**K."""
        return self.combinations.shape[0]

    @property
    def n_effects(self) -> int:
        """J - 1 factorial effects (main effects and all interactions)."""
        return self.n_combinations - 1

    @cached_property
    def effects(self) -> tuple[tuple[int, ...], ...]:
        """Factor subsets per effect position (position j maps to effects[j-1])."""
        return effect_subsets(self.n_factors)

    @cached_property
    def effect_names(self) -> tuple[str, ...]:
        return tuple(effect_name(f) for f in self.effects)

    def effect_position(self, factors) -> int:
        """Yates position (1..J-1) of the effect on the given factor subset."""
        key = tuple(sorted(factors))
        try:
            return self.effects.index(key) + 1
        except ValueError:
            raise ConfigError(f"no effect on factor subset {factors!r}") from None

    def contrast_column(self, j: int) -> np.ndarray:
        """Contrast vector for position ``j``; ``j=0`` is the all-ones column."""
        if not 0 <= j <= self.n_effects:
            raise ConfigError(f"effect position must be in [0, {self.n_effects}], got {j}")
        if j == 0:
            return np.ones(self.n_combinations)
        cols = [self.combinations[:, f - 1] for f in self.effects[j - 1]]
        out = cols[0].astype(float)
        for c in cols[1:]:
            out = out * c
        return out

    @cached_property
    def effect_contrasts(self) -> np.ndarray:
        """(J, J-1) matrix whose columns are the effect contrasts, Yates order."""
        j = self.n_combinations
        if j * (j - 1) > _DENSE_LIMIT:
            raise ConfigError(
                f"dense contrast matrix for K={self.n_factors} exceeds the memory "
                "guard; use contrast_column(j) for per-effect access"
            )
        out = np.column_stack([self.contrast_column(p) for p in range(1, j)])
        out.setflags(write=False)
        return out

    @cached_property
    def contrast_matrix(self) -> np.ndarray:
        """(J, J) matrix with the all-ones column prepended; C'C = J * I."""
        out = np.column_stack([np.ones(self.n_combinations), self.effect_contrasts])
        out.setflags(write=False)
        return out

    def partition_mask(self, j: int) -> np.ndarray:
        """Boolean mask of combinations on the +1 side of effect ``j``."""
        if not 1 <= j <= self.n_effects:
            raise ConfigError(f"effect position must be in [1, {self.n_effects}], got {j}")
        return self.contrast_column(j) > 0

    def partition(self, j: int):
        """Split the combinations by the sign of contrast ``j``.

        Returns ``(plus, minus)``, each a tuple of level tuples; both halves
        have exactly 2**(K-1) members.
        """
        mask = self.partition_mask(j)
        combos = [tuple(int(v) for v in row) for row in self.combinations]
        plus = tuple(c for c, m in zip(combos, mask) if m)
        minus = tuple(c for c, m in zip(combos, mask) if not m)
        return plus, minus

    def reconstruct(self, baseline: float, effects) -> np.ndarray:
        """Outcome vector with the given per-unit mean and effect vector.

        Inverts effect extraction: the returned length-J vector has mean
        ``baseline`` and factorial effects exactly ``effects`` (each effect
        contributes half its amplitude per contrast sign).
        """
        effects = np.asarray(effects, dtype=float)
        if effects.shape != (self.n_effects,):
            raise DataError(
                f"expected {self.n_effects} effects, got shape {effects.shape}"
            )
        if not (np.isfinite(effects).all() and np.isfinite(baseline)):
            raise DataError("reconstruction inputs must be finite")
        return float(baseline) + self.effect_contrasts @ (effects / 2.0)

    def combination_labels(self) -> tuple[str, ...]:
        """Serialized combination tokens, e.g. ``"-1,1"`` for (-1, +1)."""
        return tuple(
            ",".join(str(int(v)) for v in row) for row in self.combinations
        )

    @cached_property
    def _combo_index(self) -> dict:
        return {
            tuple(int(v) for v in row): i for i, row in enumerate(self.combinations)
        }

    def combination_index(self, levels) -> int:
        """Position of a treatment combination in Yates order."""
        key = tuple(int(v) for v in levels)
        try:
            return self._combo_index[key]
        except KeyError:
            raise DataError(f"unknown treatment combination {key!r}") from None


def build_design(n_factors: int) -> Design:
    """Construct the Yates-ordered design for ``n_factors`` two-level factors."""
    if not isinstance(n_factors, (int, np.integer)) or isinstance(n_factors, bool):
        raise ConfigError(f"factor count must be an integer, got {n_factors!r}")
    if not 1 <= n_factors <= MAX_FACTORS:
        raise ConfigError(
            f"factor count must be in [1, {MAX_FACTORS}], got {n_factors}"
        )
    combos = np.array(
        list(itertools.product((-1, 1), repeat=n_factors)), dtype=np.int8
    )
    return Design(n_factors=int(n_factors), combinations=combos)
