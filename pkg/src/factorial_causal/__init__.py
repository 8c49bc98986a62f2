"""Randomization-based causal inference for two-level factorial experiments.

The package treats the full potential-outcomes table as the object of
inference: contrast algebra for 2**K designs, balanced completely
randomized assignment with exact enumeration oracles, repeated-sampling
(Neymanian) estimation with conservativeness diagnostics, sharp-null
randomization tests inverted into fiducial-style intervals, conjugate
Bayesian inference under an equicorrelated Gaussian model, and a
probability-scale pipeline for binary outcomes. A CLI
(``factorial-causal``) wires the pieces into seeded, reproducible runs.
"""

from .assignment import (
    Assignment,
    ObservedExperiment,
    count_assignments,
    enumerate_assignments,
    enumerated_effect_estimates,
    indicator_moment_report,
    observe,
    randomize,
    read_observed_csv,
    write_observed_csv,
)
from .bayes import (
    FiniteVsSuperReport,
    GaussianPrior,
    MonteCarloPosterior,
    PosteriorSummary,
    equicorrelation_factor,
    finite_vs_super_report,
    posterior_closed_form,
    posterior_monte_carlo,
)
from .binary import (
    BinaryPosterior,
    BinaryStudyConfig,
    FinitePopulationBinary,
    PluginEstimates,
    finite_population_binary,
    plugin_estimates,
    sample_binary_posterior,
)
from .design import Design, build_design, effect_name, effect_subsets
from .errors import (
    BracketError,
    ConfigError,
    DataError,
    EnumerationTooLargeError,
    FactorialCausalError,
    NumericError,
)
from .fisher import (
    FiducialInterval,
    GridConfig,
    RandomizationResult,
    SharpNull,
    fiducial_interval,
    fiducial_intervals_random_eta,
    impute_science,
    randomization_pvalues,
)
from .neyman import (
    ConservativenessReport,
    NeymanEstimate,
    SamplingOracle,
    analyze,
    conservativeness_report,
    estimate,
    sampling_oracle,
    variance_estimates,
)
from .science import (
    Correlation,
    PopulationMoments,
    Science,
    finite_population_effects,
    population_moments,
    read_science_csv,
    simulate_bernoulli_science,
    simulate_gaussian_science,
    unit_effects,
    write_science_csv,
)

__version__ = "0.1.0"
