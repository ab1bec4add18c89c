"""Loading and grouping of result directories.

The results.csv schema is validated on load; columns beyond the known set
are preserved untouched. ROC files are discovered by glob anywhere under
the directory.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
import pandas as pd

REQUIRED_COLUMNS = [
    "experiment_id", "dataset", "classes", "mode", "eps_i", "eps", "z", "clip",
    "repeat", "seed", "attack", "train_acc", "test_acc", "auc", "phi",
    "wall_clock_s",
]

_NUMERIC = ["classes", "eps_i", "eps", "z", "clip", "repeat", "seed",
            "train_acc", "test_acc", "auc", "phi", "wall_clock_s"]


class SchemaError(ValueError):
    pass


@dataclass
class ResultFrame:
    table: pd.DataFrame
    roc_files: list[Path] = field(default_factory=list)
    results_dir: Path | None = None

    def grouped(self) -> pd.DataFrame:
        """Mean/stddev per (mode, eps, attack) configuration point."""

        def std(s):
            # identical repeats must report exactly 0, not summation dust
            if len(s) < 2 or s.nunique() == 1:
                return 0.0
            return s.std(ddof=1)

        g = self.table.groupby(["mode", "eps", "attack"], dropna=False)
        out = g.agg(
            test_acc_mean=("test_acc", "mean"),
            test_acc_std=("test_acc", std),
            auc_mean=("auc", "mean"),
            auc_std=("auc", std),
            phi=("phi", "mean"),
            eps_i=("eps_i", "mean"),
            z=("z", "mean"),
            repeats=("repeat", "count"),
        ).reset_index()
        return out.sort_values(["attack", "mode", "eps"]).reset_index(drop=True)


def load_results(results_dir) -> ResultFrame:
    """Parse a result directory; raises SchemaError naming any missing column."""
    results_dir = Path(results_dir)
    path = results_dir / "results.csv"
    if not path.exists():
        raise SchemaError(f"no results.csv in {results_dir}")
    table = pd.read_csv(path, dtype=str, keep_default_na=False)
    for col in REQUIRED_COLUMNS:
        if col not in table.columns:
            raise SchemaError(f"results.csv missing column {col!r}")
    for col in _NUMERIC:
        table[col] = pd.to_numeric(table[col].replace({"n/a": None, "inf": np.inf}),
                                   errors="coerce")
    roc_files = sorted(results_dir.rglob("roc_*_*.csv"))
    return ResultFrame(table=table, roc_files=roc_files, results_dir=results_dir)


def parse_roc_file(path) -> tuple[str, float, pd.DataFrame]:
    """(attack kind, eps, rows) from a roc_<attack>_<eps>.csv file."""
    stem = Path(path).stem
    _, kind, eps_label = stem.split("_", 2)
    eps = float(eps_label)
    rows = pd.read_csv(path)
    return kind, eps, rows
