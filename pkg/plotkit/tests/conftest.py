import csv
from pathlib import Path

import numpy as np
import pytest

COLUMNS = [
    "experiment_id", "dataset", "classes", "mode", "eps_i", "eps", "z", "clip",
    "repeat", "seed", "attack", "train_acc", "test_acc", "auc", "phi",
    "wall_clock_s",
]


def write_fixture_dir(root: Path, repeats=3, identical=False):
    """Hand-written result directory: a reference point plus one LDP point,
    two attacks, with a diagonal reference ROC (AUC exactly 0.5)."""
    rows = []
    rng = np.random.default_rng(0)
    for attack in ("bb", "wb"):
        for r in range(repeats):
            jitter = 0.0 if identical else float(rng.normal(0, 0.01))
            rows.append(["exp", "carts", "4", "none", "n/a", "inf", "n/a", "n/a",
                         str(r), str(r), attack, "1.0", f"{0.7 + jitter:.6f}",
                         "0.5", "n/a", "1.0"])
            rows.append(["exp", "carts", "4", "ldp", "1", "40", "n/a", "n/a",
                         str(r), str(r), attack, "0.9", f"{0.55 + jitter:.6f}",
                         f"{0.52 + jitter:.6f}", "1.25", "1.0"])
    root.mkdir(parents=True, exist_ok=True)
    with (root / "results.csv").open("w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(COLUMNS)
        writer.writerows(rows)

    roc_dir = root / "roc" / "exp"
    roc_dir.mkdir(parents=True)
    grid = np.linspace(0, 1, 101)
    for attack in ("bb", "wb"):
        for eps_label, bend in (("inf", 0.0), ("40", 0.02)):
            with (roc_dir / f"roc_{attack}_{eps_label}.csv").open("w", newline="") as fh:
                writer = csv.writer(fh)
                writer.writerow(["repeat", "fpr", "tpr"])
                for r in range(repeats):
                    for f in grid:
                        writer.writerow([r, f"{f:.6f}", f"{min(1.0, f + bend):.6f}"])
                for f in grid:
                    writer.writerow(["mean", f"{f:.6f}", f"{min(1.0, f + bend):.6f}"])
    return root


@pytest.fixture
def fixture_dir(tmp_path):
    return write_fixture_dir(tmp_path / "results")
