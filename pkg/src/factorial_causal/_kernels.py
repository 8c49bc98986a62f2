"""Hot numeric kernels, JIT-compiled when numba is available.

Three inner loops dominate the package's runtime: re-estimating effects
over thousands of randomized assignments, sweeping every balanced
assignment in the exact enumeration, and stepping a random-walk
Metropolis chain. Each has a numba ``@njit`` implementation and a pure
numpy fallback with identical semantics.

Backend selection: set ``FACTORIAL_CAUSAL_BACKEND=numpy`` (or ``numba``)
in the environment before import; the default is numba when it imports
cleanly. All kernels consume pre-drawn random inputs, so a fixed seed
gives reproducible output on either backend (floating-point summation
order may differ between backends in the last ulps, never within one).
"""

from __future__ import annotations

import os

import numpy as np

_ENV_VAR = "FACTORIAL_CAUSAL_BACKEND"

try:
    from numba import njit

    _HAVE_NUMBA = True
except ImportError:  # pragma: no cover - exercised only without numba
    _HAVE_NUMBA = False


def _select_backend() -> str:
    choice = os.environ.get(_ENV_VAR, "").strip().lower()
    if choice == "numpy":
        return "numpy"
    if choice == "numba":
        if not _HAVE_NUMBA:
            raise ImportError(
                f"{_ENV_VAR}=numba requested but numba is not importable"
            )
        return "numba"
    return "numba" if _HAVE_NUMBA else "numpy"


BACKEND = _select_backend()


# ---------------------------------------------------------------------------
# Randomized re-estimation: effect estimates under many assignments
# ---------------------------------------------------------------------------

def randomization_effects_numpy(outcomes, arm_draws, contrast_scaled):
    """Effect estimates for each assignment row in ``arm_draws``.

    Parameters
    ----------
    outcomes : (N, J) float64
        Complete outcome table; column z holds every unit's outcome under
        combination z.
    arm_draws : (n_draws, N) int64
        One balanced assignment per row (values 0..J-1).
    contrast_scaled : (J, J-1) float64
        Effect contrast columns pre-divided by ``2**(K-1) * r`` so that
        ``arm_sums @ contrast_scaled`` is the estimate vector.
    """
    n_units, n_arms = outcomes.shape
    picked = outcomes[np.arange(n_units)[None, :], arm_draws]
    sums = np.empty((arm_draws.shape[0], n_arms))
    for z in range(n_arms):
        sums[:, z] = np.where(arm_draws == z, picked, 0.0).sum(axis=1)
    return sums @ contrast_scaled


def _randomization_effects_py(outcomes, arm_draws, contrast_scaled):
    # Reference loop shared verbatim with the numba build below.
    n_draws, n_units = arm_draws.shape
    n_arms = outcomes.shape[1]
    n_eff = contrast_scaled.shape[1]
    out = np.empty((n_draws, n_eff))
    sums = np.empty(n_arms)
    for d in range(n_draws):
        sums[:] = 0.0
        for i in range(n_units):
            a = arm_draws[d, i]
            sums[a] += outcomes[i, a]
        for j in range(n_eff):
            acc = 0.0
            for z in range(n_arms):
                acc += sums[z] * contrast_scaled[z, j]
            out[d, j] = acc
    return out


# ---------------------------------------------------------------------------
# Exact enumeration: all balanced assignments in lexicographic order
# ---------------------------------------------------------------------------

def next_permutation(a) -> bool:
    """Advance ``a`` in place to its next lexicographic permutation.

    Standard multiset next-permutation step; returns False once ``a`` is
    the final (descending) arrangement.
    """
    n = a.shape[0]
    i = n - 2
    while i >= 0 and a[i] >= a[i + 1]:
        i -= 1
    if i < 0:
        return False
    j = n - 1
    while a[j] <= a[i]:
        j -= 1
    a[i], a[j] = a[j], a[i]
    lo, hi = i + 1, n - 1
    while lo < hi:
        a[lo], a[hi] = a[hi], a[lo]
        lo += 1
        hi -= 1
    return True


def enumerated_effects_numpy(outcomes, contrast_scaled, count):
    """Effect estimates for every balanced assignment, lexicographic order.

    ``count`` must equal the exact multiset-permutation count for the
    balanced label vector (r copies of each arm index, ascending start).
    """
    n_units, n_arms = outcomes.shape
    reps = n_units // n_arms
    labels = np.repeat(np.arange(n_arms, dtype=np.int64), reps)
    batch = 1 << 14
    out = np.empty((count, contrast_scaled.shape[1]))
    done = 0
    while done < count:
        take = min(batch, count - done)
        rows = np.empty((take, n_units), dtype=np.int64)
        for k in range(take):
            rows[k] = labels
            if done + k + 1 < count and not next_permutation(labels):
                raise RuntimeError("enumeration exhausted before count")
        out[done : done + take] = randomization_effects_numpy(
            outcomes, rows, contrast_scaled
        )
        done += take
    return out


def _enumerated_effects_py(outcomes, contrast_scaled, count):
    n_units, n_arms = outcomes.shape
    reps = n_units // n_arms
    n_eff = contrast_scaled.shape[1]
    labels = np.empty(n_units, dtype=np.int64)
    for z in range(n_arms):
        for t in range(reps):
            labels[z * reps + t] = z
    out = np.empty((count, n_eff))
    sums = np.empty(n_arms)
    for d in range(count):
        sums[:] = 0.0
        for i in range(n_units):
            a = labels[i]
            sums[a] += outcomes[i, a]
        for j in range(n_eff):
            acc = 0.0
            for z in range(n_arms):
                acc += sums[z] * contrast_scaled[z, j]
            out[d, j] = acc
        if d + 1 < count:
            # inline next_permutation so the whole sweep stays jittable
            i = n_units - 2
            while i >= 0 and labels[i] >= labels[i + 1]:
                i -= 1
            if i < 0:
                raise RuntimeError("enumeration exhausted before count")
            j2 = n_units - 1
            while labels[j2] <= labels[i]:
                j2 -= 1
            labels[i], labels[j2] = labels[j2], labels[i]
            lo, hi = i + 1, n_units - 1
            while lo < hi:
                labels[lo], labels[hi] = labels[hi], labels[lo]
                lo += 1
                hi -= 1
    return out


# ---------------------------------------------------------------------------
# Random-walk Metropolis for the logistic-link binary model
# ---------------------------------------------------------------------------

def _log_sigmoid(u: float) -> float:
    # min(u, 0) - log1p(exp(-|u|)) is stable for both tails
    if u >= 0.0:
        return -np.log1p(np.exp(-u))
    return u - np.log1p(np.exp(u))


def _logistic_mh_chain_py(
    theta0,
    step_scale,
    normals,
    log_unifs,
    successes,
    failures,
    predictors,
    prior_mean,
    prior_precision,
):
    """Metropolis chain targeting Gaussian prior x product-binomial likelihood.

    ``normals`` (n_steps, p) and ``log_unifs`` (n_steps,) are pre-drawn so
    the chain is a pure function of its inputs. Returns the chain states
    after each step and the acceptance indicator per step.
    """
    n_steps, n_par = normals.shape
    n_arms = predictors.shape[0]
    chain = np.empty((n_steps, n_par))
    accepted = np.zeros(n_steps, dtype=np.bool_)
    cur = theta0.copy()

    def log_post(theta):
        d = theta - prior_mean
        lp = -0.5 * (d @ (prior_precision @ d))
        for z in range(n_arms):
            u = 0.0
            for k in range(n_par):
                u += predictors[z, k] * theta[k]
            lp += successes[z] * _log_sigmoid(u) + failures[z] * _log_sigmoid(-u)
        return lp

    cur_lp = log_post(cur)
    for t in range(n_steps):
        prop = cur + step_scale * normals[t]
        prop_lp = log_post(prop)
        if prop_lp - cur_lp >= log_unifs[t]:
            cur = prop
            cur_lp = prop_lp
            accepted[t] = True
        chain[t] = cur
    return chain, accepted


if _HAVE_NUMBA:
    _randomization_effects_numba = njit(cache=True)(_randomization_effects_py)
    _enumerated_effects_numba = njit(cache=True)(_enumerated_effects_py)

    @njit(cache=True)
    def _log_sigmoid_nb(u):
        if u >= 0.0:
            return -np.log1p(np.exp(-u))
        return u - np.log1p(np.exp(u))

    @njit(cache=True)
    def _logistic_mh_chain_numba(
        theta0,
        step_scale,
        normals,
        log_unifs,
        successes,
        failures,
        predictors,
        prior_mean,
        prior_precision,
    ):
        n_steps, n_par = normals.shape
        n_arms = predictors.shape[0]
        chain = np.empty((n_steps, n_par))
        accepted = np.zeros(n_steps, dtype=np.bool_)
        cur = theta0.copy()

        d = cur - prior_mean
        cur_lp = -0.5 * (d @ (prior_precision @ d))
        for z in range(n_arms):
            u = 0.0
            for k in range(n_par):
                u += predictors[z, k] * cur[k]
            cur_lp += successes[z] * _log_sigmoid_nb(u)
            cur_lp += failures[z] * _log_sigmoid_nb(-u)

        for t in range(n_steps):
            prop = cur + step_scale * normals[t]
            d = prop - prior_mean
            prop_lp = -0.5 * (d @ (prior_precision @ d))
            for z in range(n_arms):
                u = 0.0
                for k in range(n_par):
                    u += predictors[z, k] * prop[k]
                prop_lp += successes[z] * _log_sigmoid_nb(u)
                prop_lp += failures[z] * _log_sigmoid_nb(-u)
            if prop_lp - cur_lp >= log_unifs[t]:
                cur = prop
                cur_lp = prop_lp
                accepted[t] = True
            chain[t] = cur
        return chain, accepted


def _dispatch():
    if BACKEND == "numba":
        return (
            _randomization_effects_numba,
            _enumerated_effects_numba,
            _logistic_mh_chain_numba,
        )
    return (
        randomization_effects_numpy,
        enumerated_effects_numpy,
        _logistic_mh_chain_py,
    )


randomization_effects, enumerated_effects, logistic_mh_chain = _dispatch()

# Explicit handles for equivalence tests and the benchmark script.
IMPLEMENTATIONS = {
    "numpy": {
        "randomization_effects": randomization_effects_numpy,
        "enumerated_effects": enumerated_effects_numpy,
        "logistic_mh_chain": _logistic_mh_chain_py,
    }
}
if _HAVE_NUMBA:
    IMPLEMENTATIONS["numba"] = {
        "randomization_effects": _randomization_effects_numba,
        "enumerated_effects": _enumerated_effects_numba,
        "logistic_mh_chain": _logistic_mh_chain_numba,
    }
