import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from numpy.testing import assert_allclose

from factorial_causal import (
    ConfigError,
    Correlation,
    DataError,
    NumericError,
    Science,
    build_design,
    finite_population_effects,
    population_moments,
    read_science_csv,
    simulate_bernoulli_science,
    simulate_gaussian_science,
    unit_effects,
    write_science_csv,
)
from factorial_causal.bayes import equicorrelation_factor

from conftest import additive_science, exact_cov_science

SPRING_PROBS = (0.67, 0.79, 0.61, 0.75, 0.59, 0.90, 0.52, 0.87)


def test_unit_effects_single_row(design2):
    sci = Science(n_factors=2, outcomes=np.array([[10.0, 12, 13, 15]] * 4))
    assert_allclose(unit_effects(sci, design2)[0], [3, 2, 0], atol=1e-14)


def test_unit_effects_constant_row(design2):
    sci = Science(n_factors=2, outcomes=np.full((4, 4), 7.5))
    assert_allclose(unit_effects(sci, design2), 0.0, atol=1e-14)


def test_unit_effects_contrast_as_outcomes(design2):
    row = design2.contrast_column(1)
    sci = Science(n_factors=2, outcomes=np.tile(row, (4, 1)))
    assert_allclose(unit_effects(sci, design2)[0], [2, 0, 0], atol=1e-14)


def test_population_effects_identical_rows(design2):
    sci = Science(n_factors=2, outcomes=np.array([[10.0, 12, 13, 15]] * 8))
    assert_allclose(finite_population_effects(sci, design2), [3, 2, 0], atol=1e-14)


def test_population_effects_equal_unit_effect_mean(design2):
    rng = np.random.default_rng(3)
    sci = Science(n_factors=2, outcomes=rng.normal(size=(12, 4)))
    assert_allclose(
        finite_population_effects(sci, design2),
        unit_effects(sci, design2).mean(axis=0),
        atol=1e-14,
    )


def test_moments_hand_case():
    d = build_design(1)
    sci = Science(n_factors=1, outcomes=np.array([[0.0, 0.0], [2.0, 2.0]]))
    mom = population_moments(sci, d)
    assert_allclose(mom.arm_variances, [2.0, 2.0])
    assert_allclose(mom.arm_covariance[0, 1], 2.0)
    assert_allclose(mom.effect_variances, [0.0], atol=1e-14)


def test_moments_additive_science(design2):
    sci = additive_science(design2, 16, seed=5)
    mom = population_moments(sci, design2)
    assert_allclose(mom.effect_variances, 0.0, atol=1e-12)


def test_moments_compound_symmetry_formula(design2):
    s2, rho = 1.7, 0.35
    cov = s2 * Correlation("compound_symmetry", rho=rho).matrix_for(design2)
    sci = exact_cov_science(design2, 20, 3.0, cov, seed=6)
    mom = population_moments(sci, design2)
    assert_allclose(mom.effect_variances, (1 - rho) * s2 / 2 ** (2 - 2), atol=1e-10)


def test_moments_need_two_units():
    # a one-row table is rejected at construction (N must be a positive
    # multiple of J), so the moments path always sees N >= 2
    with pytest.raises(DataError):
        Science(n_factors=1, outcomes=np.array([[1.0, 2.0]]))


@settings(max_examples=25, deadline=None)
@given(k=st.integers(1, 4), seed=st.integers(0, 10_000))
def test_effect_variance_two_routes_agree(k, seed):
    # direct unit-effect covariance vs contrast quadratic form of arm
    # covariance; population_moments raises if they drift apart
    design = build_design(k)
    rng = np.random.default_rng(seed)
    n = 3 * design.n_combinations
    sci = Science(n_factors=k, outcomes=rng.normal(scale=4.0, size=(n, 2**k)))
    mom = population_moments(sci, design)
    quad = (
        design.effect_contrasts.T @ mom.arm_covariance @ design.effect_contrasts
        / 4.0 ** (k - 1)
    )
    assert_allclose(quad, mom.effect_covariance, rtol=1e-10, atol=1e-12)


@settings(max_examples=50, deadline=None)
@given(
    k=st.integers(1, 6),
    rho=st.floats(min_value=-0.99, max_value=0.99, allow_nan=False),
)
def test_equicorrelation_factor_factorization(k, rho):
    j = 2**k
    expanded = (1 - rho**2) * (j - 1) - 2 * rho * (1 - rho) * (j // 2 - 1)
    assert abs(equicorrelation_factor(rho, j) - expanded) <= 1e-12 * max(1, j)


class TestGaussianSimulation:
    def test_seed_determinism(self, design2):
        corr = Correlation("compound_symmetry", rho=0.5)
        a = simulate_gaussian_science(design2, 20, [10, 12, 13, 15], 1.0, corr, 9)
        b = simulate_gaussian_science(design2, 20, [10, 12, 13, 15], 1.0, corr, 9)
        assert np.array_equal(a.outcomes, b.outcomes)

    def test_mean_recovery(self, design2):
        corr = Correlation("compound_symmetry", rho=0.5)
        sci = simulate_gaussian_science(
            design2, 2000, [10, 12, 13, 15], 1.0, corr, 11
        )
        # estimator SD per effect ~ sqrt(Var(tau-hat across draws of N rows))
        effects = finite_population_effects(sci, design2)
        assert_allclose(effects, [3, 2, 0], atol=0.12)

    def test_perfect_correlation_is_additive(self, design2):
        corr = Correlation("strict_additive")
        sci = simulate_gaussian_science(design2, 24, 0.0, 2.0, corr, 13)
        mom = population_moments(sci, design2)
        assert_allclose(mom.effect_variances, 0.0, atol=1e-12)

    def test_non_psd_rejected(self, design2):
        corr = Correlation("compound_symmetry", rho=-0.9)
        with pytest.raises(NumericError):
            simulate_gaussian_science(design2, 20, 0.0, 1.0, corr, 1)

    def test_unbalanced_unit_count_rejected(self, design2):
        corr = Correlation("strict_additive")
        with pytest.raises(DataError):
            simulate_gaussian_science(design2, 18, 0.0, 1.0, corr, 1)


class TestBernoulliSimulation:
    def test_spring_probability_means(self):
        d = build_design(3)
        sci = simulate_bernoulli_science(d, 100, SPRING_PROBS, seed=21)
        probs = np.asarray(SPRING_PROBS)
        margin = 3 * np.sqrt(probs * (1 - probs) / 100)
        assert (np.abs(sci.outcomes.mean(axis=0) - probs) <= margin).all()

    def test_degenerate_probabilities(self, design2):
        sci = simulate_bernoulli_science(design2, 10, 1.0, seed=2)
        assert np.array_equal(sci.outcomes, np.ones((40, 4)))
        assert_allclose(finite_population_effects(sci, design2), 0.0, atol=1e-14)

    def test_half_probability_effects_near_zero(self, design2):
        sci = simulate_bernoulli_science(design2, 10_000, 0.5, seed=3)
        effects = finite_population_effects(sci, design2)
        assert np.abs(effects).max() <= 0.02

    def test_probability_bounds(self, design2):
        with pytest.raises(ConfigError):
            simulate_bernoulli_science(design2, 10, 1.3, seed=1)


class TestCorrelationStructures:
    def test_kind_validation(self):
        with pytest.raises(ConfigError):
            Correlation("diagonalish")
        with pytest.raises(ConfigError):
            Correlation("compound_symmetry", rho=1.5)
        with pytest.raises(ConfigError):
            Correlation("two_parameter", rho=0.6, rho2=0.5)

    def test_block_structures_require_two_factors(self):
        d3 = build_design(3)
        with pytest.raises(ConfigError):
            Correlation("within_factor_block", rho=0.5).matrix_for(d3)
        with pytest.raises(ConfigError):
            Correlation("two_parameter", rho=0.2, rho2=0.2).matrix_for(d3)

    def test_explicit_matrix_validation(self, design2):
        bad = np.eye(4)
        bad[0, 1] = 0.5
        with pytest.raises(ConfigError):
            Correlation("explicit", matrix=bad).matrix_for(design2)

    def test_two_parameter_layout(self, design2):
        m = Correlation("two_parameter", rho=0.2, rho2=0.3).matrix_for(design2)
        assert m[0, 1] == m[2, 3] == 0.2
        assert m[0, 2] == m[1, 3] == 0.3
        assert m[0, 3] == m[1, 2] == 0.0


def test_oracle_variance_within_closed_form_bounds(design2):
    # compound-symmetric sciences stay inside the open/closed bound pair
    from factorial_causal import sampling_oracle

    for rho in (-0.3, 0.0, 0.4, 0.9):
        cov = 2.0 * Correlation("compound_symmetry", rho=rho).matrix_for(design2)
        sci = exact_cov_science(design2, 20, 0.0, cov, seed=int(10 * rho) + 5)
        oracle = sampling_oracle(sci, design2)
        lower = 4.0 / 20 * (1 - 1 / 3) * 2.0
        upper = 4.0 / 20 * 2.0
        assert (oracle.true_variances > lower - 1e-12).all()
        assert (oracle.true_variances <= upper + 1e-12).all()


def test_science_csv_round_trip(tmp_path, design2):
    rng = np.random.default_rng(17)
    sci = Science(n_factors=2, outcomes=rng.normal(size=(8, 4)) * 1e3)
    path = tmp_path / "science.csv"
    write_science_csv(sci, path)
    back = read_science_csv(path)
    assert back.n_factors == 2
    assert np.array_equal(back.outcomes, sci.outcomes)


def test_science_csv_rejects_bad_header(tmp_path):
    path = tmp_path / "bad.csv"
    path.write_text('"1,1","-1,1","1,-1","-1,-1"\n1,2,3,4\n')
    with pytest.raises(DataError):
        read_science_csv(path)


def test_science_validation():
    with pytest.raises(DataError):
        Science(n_factors=2, outcomes=np.ones((5, 4)))
    with pytest.raises(DataError):
        Science(n_factors=2, outcomes=np.array([[1.0, 2, 3, np.nan]] * 4))
