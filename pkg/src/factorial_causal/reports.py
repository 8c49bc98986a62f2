"""Report assembly and emission: JSON primary, CSV secondary.

Reports embed the resolved configuration and the master seed so any run
can be reproduced byte-for-byte; the wall-time field is the only one
excluded from that contract.
"""

from __future__ import annotations

import csv
import json
from dataclasses import dataclass, field
from importlib import metadata

import numpy as np


def _package_versions() -> dict:
    versions = {"numpy": np.__version__}
    for name in ("factorial-causal", "scipy", "numba"):
        try:
            versions[name] = metadata.version(name)
        except metadata.PackageNotFoundError:
            pass
    return versions


def _pyify(value):
    """Recursively convert numpy scalars/arrays for JSON emission."""
    if isinstance(value, np.ndarray):
        return [_pyify(v) for v in value.tolist()]
    if isinstance(value, (np.floating, np.integer)):
        return value.item()
    if isinstance(value, float) and not np.isfinite(value):
        return None
    if isinstance(value, dict):
        return {k: _pyify(v) for k, v in value.items()}
    if isinstance(value, (list, tuple)):
        return [_pyify(v) for v in value]
    return value


@dataclass
class EffectRow:
    """Per-effect summary; absent methods stay as explicit nulls."""

    name: str
    point: float
    neyman_ci: list | None = None
    fisher_ci: list | None = None
    bayes_ci: list | None = None
    diagnostics: dict = field(default_factory=dict)


@dataclass
class EffectReport:
    effects: list
    t_statistic: float | None = None
    t_df: int | None = None
    p_chi2: float | None = None
    p_f: float | None = None
    meta: dict = field(default_factory=dict)

    def to_dict(self) -> dict:
        return _pyify(
            {
                "effects": [
                    {
                        "name": row.name,
                        "point": row.point,
                        "neyman_ci": row.neyman_ci,
                        "fisher_ci": row.fisher_ci,
                        "bayes_ci": row.bayes_ci,
                        "diagnostics": row.diagnostics,
                    }
                    for row in self.effects
                ],
                "t_statistic": self.t_statistic,
                "t_df": self.t_df,
                "p_chi2": self.p_chi2,
                "p_f": self.p_f,
                "meta": self.meta,
            }
        )

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=2, sort_keys=True)

    def write_json(self, path) -> None:
        with open(path, "w") as fh:
            fh.write(self.to_json())
            fh.write("\n")

    def write_csv(self, path) -> None:
        with open(path, "w", newline="") as fh:
            writer = csv.writer(fh)
            writer.writerow(
                [
                    "effect", "point",
                    "neyman_lo", "neyman_hi",
                    "fisher_lo", "fisher_hi",
                    "bayes_lo", "bayes_hi",
                ]
            )
            for row in self.effects:
                cells = [row.name, _fmt(row.point)]
                for ci in (row.neyman_ci, row.fisher_ci, row.bayes_ci):
                    if ci is None:
                        cells += ["", ""]
                    else:
                        cells += [_fmt(ci[0]), _fmt(ci[1])]
                writer.writerow(cells)


def _fmt(value) -> str:
    return format(float(value), ".17g")


def run_meta(seed, config, extra: dict | None = None) -> dict:
    meta = {
        "seed": int(seed),
        "versions": _package_versions(),
        "config": config.resolved() if hasattr(config, "resolved") else dict(config),
    }
    if extra:
        meta.update(extra)
    return meta


def write_json(payload: dict, path) -> None:
    with open(path, "w") as fh:
        json.dump(_pyify(payload), fh, indent=2, sort_keys=True)
        fh.write("\n")


def write_histogram_csv(values, path, column: str = "estimate") -> None:
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow([column])
        for v in np.asarray(values).ravel():
            writer.writerow([_fmt(v)])


def write_curve_csv(curve, path, columns=("eta", "p")) -> None:
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(list(columns))
        for row in np.asarray(curve):
            writer.writerow([_fmt(v) for v in row])
