"""Command-line front end: reproducible pipelines over the library.

Subcommands: simulate | assign | analyze | oracle | binary-demo. Every
stochastic command takes one master seed (``--seed``, else the config
key ``seed``, else fresh entropy that gets recorded in the report); all
internal randomness is derived from it per task label, so re-running a
report's embedded config reproduces it byte-for-byte apart from timing.

Exit codes: 0 ok, 2 configuration error, 3 data error, 4 numeric error.
"""

from __future__ import annotations

import argparse
import sys
import time
from importlib import resources
from pathlib import Path

import numpy as np

from .assignment import (
    count_assignments,
    enumerated_effect_estimates,
    observe,
    randomize,
    read_observed_csv,
    write_observed_csv,
)
from .bayes import GaussianPrior, posterior_closed_form, posterior_monte_carlo
from .binary import (
    DEFAULT_SELECTED_EFFECTS,
    BinaryStudyConfig,
    finite_population_binary,
    plugin_estimates,
    sample_binary_posterior,
)
from .config import Config
from .design import build_design
from .errors import (
    ConfigError,
    DataError,
    FactorialCausalError,
    NumericError,
)
from .fisher import (
    GridConfig,
    SharpNull,
    fiducial_interval,
    fiducial_intervals_random_eta,
    randomization_pvalues,
)
from .neyman import analyze as neyman_analyze
from .neyman import effect_estimates_for_draws, sampling_oracle
from .neyman import estimate as neyman_estimate
from .reports import (
    EffectReport,
    EffectRow,
    run_meta,
    write_curve_csv,
    write_histogram_csv,
    write_json,
)
from .science import (
    Correlation,
    finite_population_effects,
    population_moments,
    read_science_csv,
    simulate_gaussian_science,
    simulate_bernoulli_science,
    write_science_csv,
)
from .seeds import derive_rng

_MASK64 = (1 << 64) - 1


def bundled_path(name: str):
    """Path to a data file shipped inside the package."""
    return resources.files("factorial_causal").joinpath("data").joinpath(name)


def _load_config(args) -> Config:
    cfg = Config()
    if getattr(args, "config", None):
        cfg = Config.from_file(args.config)
    overrides = {}
    for pair in getattr(args, "set", None) or []:
        if "=" not in pair:
            raise ConfigError(f"--set expects KEY=VALUE, got {pair!r}")
        key, value = pair.split("=", 1)
        overrides[key.strip()] = value.strip()
    return cfg.merged_with(overrides)


def _resolve_seed(args, cfg: Config):
    if getattr(args, "seed", None) is not None:
        return int(args.seed) & _MASK64, False
    if "seed" in cfg:
        return cfg.get_int("seed") & _MASK64, False
    fresh = int(np.random.SeedSequence().entropy) & _MASK64
    return fresh, True


def _out_dir(args) -> Path:
    out = Path(getattr(args, "out_dir", None) or ".")
    out.mkdir(parents=True, exist_ok=True)
    return out


def _alpha(args, cfg: Config) -> float:
    if getattr(args, "alpha", None) is not None:
        alpha = float(args.alpha)
    else:
        alpha = cfg.get_float("alpha", 0.05)
    if not 0.0 < alpha < 1.0:
        raise ConfigError(f"alpha must be in (0, 1), got {alpha}")
    return alpha


# ---------------------------------------------------------------------------
# simulate
# ---------------------------------------------------------------------------

def cmd_simulate(args) -> int:
    t0 = time.perf_counter()
    cfg = _load_config(args)
    seed, generated = _resolve_seed(args, cfg)
    out = _out_dir(args)

    n_factors = cfg.get_int("design.k")
    design = build_design(n_factors)
    n_units = cfg.get_int("simulate.units")
    mean = cfg.get_floats("simulate.mean", default=[0.0])
    if mean.size == 1:
        mean = np.full(design.n_combinations, mean[0])
    sd = cfg.get_floats("simulate.sd", default=[1.0])
    if sd.size == 1:
        sd = np.full(design.n_combinations, sd[0])
    kind = cfg.get_str("simulate.structure", "compound_symmetry")
    correlation = _correlation_from_config(cfg, kind)

    science = simulate_gaussian_science(
        design, n_units, mean, sd, correlation, derive_rng(seed, "simulate.science")
    )
    write_science_csv(science, out / "science.csv")

    moments = population_moments(science, design)
    oracle = sampling_oracle(science, design)
    truth = {
        "effects": dict(
            zip(design.effect_names, finite_population_effects(science, design))
        ),
        "arm_means": moments.arm_means,
        "arm_variances": moments.arm_variances,
        "effect_variances": moments.effect_variances,
        "estimator_true_variances": oracle.true_variances,
        "meta": run_meta(
            seed,
            cfg,
            {
                "seed_generated": generated,
                "wall_time_s": time.perf_counter() - t0,
            },
        ),
    }
    write_json(truth, out / "truth.json")
    print(f"wrote {out / 'science.csv'} and {out / 'truth.json'}")
    return 0


def _correlation_from_config(cfg: Config, kind: str) -> Correlation:
    if kind == "explicit":
        return Correlation(kind=kind, matrix=cfg.get_matrix("simulate.matrix"))
    if kind == "two_parameter":
        return Correlation(
            kind=kind,
            rho=cfg.get_float("simulate.rho"),
            rho2=cfg.get_float("simulate.rho2"),
        )
    if kind == "strict_additive":
        return Correlation(kind=kind)
    return Correlation(kind=kind, rho=cfg.get_float("simulate.rho", 0.0))


# ---------------------------------------------------------------------------
# assign
# ---------------------------------------------------------------------------

def cmd_assign(args) -> int:
    cfg = _load_config(args)
    seed, generated = _resolve_seed(args, cfg)
    out = _out_dir(args)
    science = read_science_csv(args.science)
    design = build_design(science.n_factors)
    assignment = randomize(science.n_units, design, derive_rng(seed, "assign"))
    obs = observe(science, assignment, design)
    write_observed_csv(obs, out / "observed.csv")
    write_json(
        {"meta": run_meta(seed, cfg, {"seed_generated": generated})},
        out / "assign_meta.json",
    )
    print(f"wrote {out / 'observed.csv'}")
    return 0


# ---------------------------------------------------------------------------
# analyze
# ---------------------------------------------------------------------------

def cmd_analyze(args) -> int:
    t0 = time.perf_counter()
    cfg = _load_config(args)
    seed, generated = _resolve_seed(args, cfg)
    out = _out_dir(args)
    alpha = _alpha(args, cfg)
    methods = [
        m.strip()
        for m in (args.methods or cfg.get_str("analyze.methods", "neyman")).split(",")
        if m.strip()
    ]
    unknown = set(methods) - {"neyman", "fisher", "bayes"}
    if unknown:
        raise ConfigError(f"unknown analysis methods: {sorted(unknown)}")

    obs = read_observed_csv(args.data)
    design = build_design(obs.n_factors)
    est = neyman_analyze(obs, design, alpha=alpha)

    rows = [
        EffectRow(name=name, point=float(est.effects[i]))
        for i, name in enumerate(design.effect_names)
    ]
    report = EffectReport(effects=rows)
    notes = list(est.notes)

    if "neyman" in methods and est.intervals is not None:
        for i, row in enumerate(rows):
            row.neyman_ci = [est.intervals[i, 0], est.intervals[i, 1]]
            row.diagnostics["var_ney"] = est.var_estimates[i]
        report.t_statistic = est.t_statistic
        report.t_df = est.t_df
        report.p_chi2 = est.p_chi2
        report.p_f = est.p_f
    elif "neyman" in methods:
        for row in rows:
            row.diagnostics["var_ney"] = None
            row.diagnostics["neyman_unavailable"] = est.notes[0]

    n_draws = cfg.get_int("fisher.n_draws", 1000)
    if "fisher" in methods:
        _run_fisher(cfg, obs, design, alpha, seed, n_draws, rows, out)

    if "bayes" in methods:
        _run_bayes(cfg, obs, design, alpha, seed, rows)

    report.meta = run_meta(
        seed,
        cfg,
        {
            "seed_generated": generated,
            "alpha": alpha,
            "methods": methods,
            "n_draws": n_draws if "fisher" in methods else None,
            "notes": notes,
            "data": str(args.data),
            "wall_time_s": time.perf_counter() - t0,
        },
    )
    report.write_json(out / "report.json")
    report.write_csv(out / "report.csv")
    print(f"wrote {out / 'report.json'}")
    return 0


def _run_fisher(cfg, obs, design, alpha, seed, n_draws, rows, out) -> None:
    mode = cfg.get_str("fisher.mode", "scan")
    if mode == "random_eta":
        region = cfg.get_floats("fisher.region", default=[-6.0, 6.0])
        intervals = fiducial_intervals_random_eta(
            obs,
            design,
            alpha=alpha,
            n_eta=cfg.get_int("fisher.n_eta", 100),
            n_draws=n_draws,
            seed=derive_rng(seed, "fisher.random_eta"),
            region=(float(region[0]), float(region[1])),
        )
    elif mode == "scan":
        grid = GridConfig(
            points=cfg.get_int("fisher.points", 21),
            tol=cfg.get_float("fisher.tol", 0.05),
            span=cfg.get_float("fisher.span", 8.0),
        )
        intervals = [
            fiducial_interval(
                obs,
                design,
                j,
                alpha=alpha,
                grid=grid,
                n_draws=n_draws,
                seed=derive_rng(seed, f"fisher.scan.{j}"),
            )
            for j in range(1, design.n_effects + 1)
        ]
    else:
        raise ConfigError(f"fisher.mode must be 'scan' or 'random_eta', got {mode!r}")

    for interval, row in zip(intervals, rows):
        row.fisher_ci = [interval.lower, interval.upper]
        row.diagnostics["fisher"] = {
            "alpha": alpha,
            "n_draws": interval.n_draws,
            "mode": interval.mode,
        }
        write_curve_csv(
            interval.curve, out / f"fisher_pcurve_{interval.effect_name}.csv"
        )

    if "fisher.eta" in cfg:
        null = SharpNull(cfg.get_floats("fisher.eta"))
    else:
        null = SharpNull(neyman_estimate(obs, design).effects)
    result = randomization_pvalues(
        obs,
        design,
        null,
        n_draws=n_draws,
        seed=derive_rng(seed, "fisher.pvalues"),
        mode=cfg.get_str("fisher.pvalue_mode", "monte_carlo"),
    )
    for i, row in enumerate(rows):
        row.diagnostics["fisher"]["eta"] = float(null.eta[i])
        row.diagnostics["fisher"]["p_two_sided"] = result.p_two_sided[i]
        row.diagnostics["fisher"]["p_greater"] = result.p_greater[i]
        write_histogram_csv(
            result.draws[:, i], out / f"fisher_hist_{design.effect_names[i]}.csv"
        )


def _run_bayes(cfg, obs, design, alpha, seed, rows) -> None:
    mu0 = cfg.get_floats("bayes.mu0", default=[0.0])
    prior = GaussianPrior(
        mu0=mu0 if mu0.size > 1 else float(mu0[0]),
        r0=cfg.get_float("bayes.r0", 1e-9),
        alpha=cfg.get_float("bayes.alpha", 1.0),
        beta=cfg.get_float("bayes.beta", 1e-12),
        rho=cfg.get_float("bayes.rho", 0.0),
    )
    method = cfg.get_str("bayes.method", "closed")
    if method == "closed":
        summary = posterior_closed_form(obs, design, prior, alpha_level=alpha)
        means, variances, intervals = (
            summary.effect_means,
            summary.effect_variances,
            summary.intervals,
        )
    elif method == "mc":
        mc = posterior_monte_carlo(
            obs,
            design,
            prior,
            n_draws=cfg.get_int("bayes.n_draws", 10000),
            seed=derive_rng(seed, "bayes.mc"),
            alpha_level=alpha,
        )
        means, variances, intervals = mc.means, mc.variances, mc.intervals
    else:
        raise ConfigError(f"bayes.method must be 'closed' or 'mc', got {method!r}")
    for i, row in enumerate(rows):
        row.bayes_ci = [intervals[i, 0], intervals[i, 1]]
        row.diagnostics["bayes"] = {
            "posterior_mean": means[i],
            "posterior_var": variances[i],
            "method": method,
            "rho": prior.rho,
        }


# ---------------------------------------------------------------------------
# oracle
# ---------------------------------------------------------------------------

def cmd_oracle(args) -> int:
    t0 = time.perf_counter()
    cfg = _load_config(args)
    seed, generated = _resolve_seed(args, cfg)
    out = _out_dir(args)

    science = read_science_csv(args.science)
    design = build_design(science.n_factors)
    oracle = sampling_oracle(science, design)
    mode = cfg.get_str("oracle.mode", "exact")
    if mode == "exact":
        cap = cfg.get_int("oracle.cap", 10_000_000)
        draws = enumerated_effect_estimates(science, design, cap=cap)
        n_used = count_assignments(science.n_units, design)
        ddof = 0
    elif mode == "monte_carlo":
        from .assignment import assignment_draws

        n_used = cfg.get_int("oracle.n_draws", 10000)
        rows = assignment_draws(
            science.n_units, design, n_used, derive_rng(seed, "oracle.draws")
        )
        draws = effect_estimates_for_draws(science, design, rows)
        ddof = 1
    else:
        raise ConfigError(f"oracle.mode must be 'exact' or 'monte_carlo', got {mode!r}")

    emp_mean = draws.mean(axis=0)
    emp_cov = np.atleast_2d(np.cov(draws, rowvar=False, ddof=ddof))
    payload = {
        "mode": mode,
        "n_assignments": n_used,
        "effects": [
            {
                "name": name,
                "true_effect": oracle.true_effects[i],
                "empirical_mean": emp_mean[i],
                "oracle_variance": oracle.true_variances[i],
                "empirical_variance": emp_cov[i, i],
                "conservativeness_gap": oracle.bias_terms[i],
                "estimator_expectation": oracle.estimator_expectation,
            }
            for i, name in enumerate(design.effect_names)
        ],
        "max_mean_deviation": float(np.abs(emp_mean - oracle.true_effects).max()),
        "max_variance_deviation": float(
            np.abs(np.diag(emp_cov) - oracle.true_variances).max()
        ),
        "meta": run_meta(
            seed,
            cfg,
            {"seed_generated": generated, "wall_time_s": time.perf_counter() - t0},
        ),
    }
    write_json(payload, out / "oracle.json")
    print(f"wrote {out / 'oracle.json'}")
    return 0


# ---------------------------------------------------------------------------
# binary-demo
# ---------------------------------------------------------------------------

def cmd_binary_demo(args) -> int:
    t0 = time.perf_counter()
    if getattr(args, "config", None) is None:
        args.config = str(bundled_path("table5.cfg"))
    cfg = _load_config(args)
    seed, generated = _resolve_seed(args, cfg)
    out = _out_dir(args)
    alpha = _alpha(args, cfg)

    study = BinaryStudyConfig(
        n_factors=cfg.get_int("design.k", 3),
        reps=cfg.get_int("binary.r", 100),
        probabilities=tuple(cfg.get_floats("binary.probabilities")),
        selected_effects=cfg.get_ints(
            "binary.selected_effects", DEFAULT_SELECTED_EFFECTS
        ),
        prior_mean=tuple(cfg.get_floats("binary.prior_mean")),
        prior_cov=tuple(map(tuple, cfg.get_matrix("binary.prior_cov"))),
    )
    design = study.design()
    science = simulate_bernoulli_science(
        design, study.reps, study.probabilities, derive_rng(seed, "binary.science")
    )
    assignment = randomize(
        science.n_units, design, derive_rng(seed, "binary.assign")
    )
    obs = observe(science, assignment, design)

    plugin = plugin_estimates(obs, design)
    posterior = sample_binary_posterior(
        obs,
        study,
        n_draws=cfg.get_int("binary.n_draws", 10000),
        burn_in=cfg.get_int("binary.burn_in", 2000),
        seed=derive_rng(seed, "binary.chain"),
    )
    finite = finite_population_binary(
        posterior, obs, study, seed=derive_rng(seed, "binary.imputation"),
        alpha_level=alpha,
    )
    sp_means, sp_intervals = posterior.sp_summary(alpha)

    true_effects = finite_population_effects(science, design)
    records = []
    for idx, j in enumerate(study.selected_effects):
        records.append(
            {
                "effect": design.effect_names[j - 1],
                "position": j,
                "finite_truth": true_effects[j - 1],
                "plugin_estimate": plugin.effects[j - 1],
                "plugin_se": plugin.se,
                "sp_mean": sp_means[idx],
                "sp_ci": sp_intervals[idx],
                "fp_mean": finite.means[idx],
                "fp_ci": finite.intervals[idx],
            }
        )
    payload = {
        "alpha": alpha,
        "effects": records,
        "acceptance_rate": posterior.acceptance_rate,
        "diagnostics": list(posterior.flags),
        "meta": run_meta(
            seed,
            cfg,
            {"seed_generated": generated, "wall_time_s": time.perf_counter() - t0},
        ),
    }
    write_json(payload, out / "binary_report.json")
    _write_binary_csv(records, out / "binary_report.csv")
    print(f"wrote {out / 'binary_report.json'}")
    return 0


def _write_binary_csv(records, path) -> None:
    import csv

    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(
            [
                "effect", "plugin_estimate", "plugin_se",
                "sp_mean", "sp_lo", "sp_hi", "fp_mean", "fp_lo", "fp_hi",
            ]
        )
        for rec in records:
            writer.writerow(
                [
                    rec["effect"],
                    f"{rec['plugin_estimate']:.17g}",
                    f"{rec['plugin_se']:.17g}",
                    f"{rec['sp_mean']:.17g}",
                    f"{rec['sp_ci'][0]:.17g}",
                    f"{rec['sp_ci'][1]:.17g}",
                    f"{rec['fp_mean']:.17g}",
                    f"{rec['fp_ci'][0]:.17g}",
                    f"{rec['fp_ci'][1]:.17g}",
                ]
            )


# ---------------------------------------------------------------------------
# Parser
# ---------------------------------------------------------------------------

def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="factorial-causal",
        description=(
            "Randomization-based causal inference for two-level factorial "
            "experiments"
        ),
    )
    sub = parser.add_subparsers(dest="command", required=True)

    def common(p):
        p.add_argument("--seed", type=int, default=None, help="master seed")
        p.add_argument("--alpha", type=float, default=None, help="significance level")
        p.add_argument("--out-dir", default=None, help="output directory")
        p.add_argument("--config", default=None, help="config file path")
        p.add_argument(
            "--set",
            action="append",
            metavar="KEY=VALUE",
            help="override a dotted config key (repeatable)",
        )

    p = sub.add_parser("simulate", help="generate a Gaussian science + truth file")
    common(p)
    p.set_defaults(func=cmd_simulate)

    p = sub.add_parser("assign", help="randomize and observe a stored science")
    common(p)
    p.add_argument("--science", required=True, help="science CSV path")
    p.set_defaults(func=cmd_assign)

    p = sub.add_parser("analyze", help="analyze observed data")
    common(p)
    p.add_argument("--data", required=True, help="observed-data CSV path")
    p.add_argument(
        "--methods", default=None, help="comma list: neyman,fisher,bayes"
    )
    p.set_defaults(func=cmd_analyze)

    p = sub.add_parser("oracle", help="check estimator moments against theory")
    common(p)
    p.add_argument("--science", required=True, help="science CSV path")
    p.set_defaults(func=cmd_oracle)

    p = sub.add_parser("binary-demo", help="run the binary spring-study pipeline")
    common(p)
    p.set_defaults(func=cmd_binary_demo)

    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return 2
    except DataError as exc:
        print(f"data error: {exc}", file=sys.stderr)
        return 3
    except NumericError as exc:
        print(f"numeric error: {exc}", file=sys.stderr)
        return 4
    except FactorialCausalError as exc:  # pragma: no cover - safety net
        print(f"error: {exc}", file=sys.stderr)
        return 4


if __name__ == "__main__":
    sys.exit(main())
