"""ROC construction, AUC, mean-ROC interpolation, and the trade-off ratio phi.

AUC is computed from integer tp/fp counts with a single final division, which
makes it exactly the Mann-Whitney statistic (ties credited 1/2). phi compares
the relative drop in attack AUC against the relative drop in test accuracy,
bounded to [0, 2].
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

DEFAULT_FPR_GRID = np.linspace(0.0, 1.0, 101)


@dataclass
class RocCurve:
    """Threshold-sweep curve including (0,0) and (1,1), ties grouped.

    fpr/tpr are the normalized points; fp/tp hold the raw cumulative counts
    when the curve came from scores (mean curves only have fpr/tpr).
    """

    fpr: np.ndarray
    tpr: np.ndarray
    fp: np.ndarray | None = None
    tp: np.ndarray | None = None
    n_pos: int = 0
    n_neg: int = 0


def roc_curve(scores, flags) -> RocCurve:
    """ROC over thresholds at every distinct score, descending.

    flags are membership ground truth (1 = member/positive). Records sharing
    a score move together.
    """
    scores = np.asarray(scores, dtype=np.float64)
    flags = np.asarray(flags, dtype=np.int64)
    if scores.shape != flags.shape or scores.ndim != 1:
        raise ValueError("scores and flags must be equal-length vectors")
    n_pos = int((flags == 1).sum())
    n_neg = int((flags == 0).sum())
    if n_pos == 0 or n_neg == 0:
        raise ValueError("need at least one member and one non-member")

    order = np.argsort(-scores, kind="stable")
    s_sorted = scores[order]
    f_sorted = flags[order]
    # last index of each tie group
    distinct = np.nonzero(np.diff(s_sorted))[0]
    bounds = np.concatenate([distinct, [len(s_sorted) - 1]])
    tp = np.concatenate([[0], np.cumsum(f_sorted)[bounds]])
    fp = np.concatenate([[0], np.cumsum(1 - f_sorted)[bounds]])
    return RocCurve(fpr=fp / n_neg, tpr=tp / n_pos, fp=fp, tp=tp,
                    n_pos=n_pos, n_neg=n_neg)


def auc(curve: RocCurve) -> float:
    """Trapezoidal area; exact Mann-Whitney when counts are available."""
    if curve.fp is not None and curve.tp is not None:
        # sum of dfp * (tp_i + tp_{i+1}) is an exact integer
        num = float(np.sum(np.diff(curve.fp) * (curve.tp[:-1] + curve.tp[1:])))
        return num / (2.0 * curve.n_pos * curve.n_neg)
    return float(np.trapezoid(curve.tpr, curve.fpr))


def mann_whitney_auc(scores, flags) -> float:
    """Direct pairwise AUC: P[member > non-member] + 1/2 P[tie]."""
    scores = np.asarray(scores, dtype=np.float64)
    flags = np.asarray(flags, dtype=np.int64)
    pos = scores[flags == 1]
    neg = scores[flags == 0]
    if len(pos) == 0 or len(neg) == 0:
        raise ValueError("need at least one member and one non-member")
    wins = (pos[:, None] > neg[None, :]).sum()
    ties = (pos[:, None] == neg[None, :]).sum()
    return float(2 * wins + ties) / (2.0 * len(pos) * len(neg))


def mean_roc(curves, fpr_grid=None) -> RocCurve:
    """Pointwise-mean curve: linear interpolation of TPR onto a shared grid."""
    curves = list(curves)
    if not curves:
        raise ValueError("no curves to average")
    grid = DEFAULT_FPR_GRID if fpr_grid is None else np.asarray(fpr_grid, dtype=np.float64)
    if grid.min() < 0 or grid.max() > 1:
        raise ValueError("fpr grid must lie in [0, 1]")
    tprs = np.empty((len(curves), len(grid)))
    for i, c in enumerate(curves):
        # collapse vertical segments to their top so interp sees a function
        fpr_unique, idx = np.unique(c.fpr, return_index=True)
        tpr_top = np.maximum.reduceat(c.tpr, idx)
        tprs[i] = np.interp(grid, fpr_unique, tpr_top)
    return RocCurve(fpr=grid.copy(), tpr=tprs.mean(axis=0))


PHI_CAP = 2.0


def phi(auc_orig: float, auc_eps: float, acc_orig: float, acc_eps: float,
        n_classes: int) -> float | None:
    """Bounded relative privacy-accuracy trade-off.

    Ratio of the relative AUC drop (over the 0.5 baseline) to the relative
    accuracy drop (over the 1/classes baseline), capped at 2. A zero
    denominator (accuracy did not drop) yields the cap; a zero numerator with
    a positive denominator yields 0. Returns None ("not applicable") when the
    non-private attack was no better than guessing, i.e. auc_orig <= 0.5 or
    acc_orig <= 1/classes.
    """
    for name, v in (("auc_orig", auc_orig), ("auc_eps", auc_eps),
                    ("acc_orig", acc_orig), ("acc_eps", acc_eps)):
        if not 0.0 <= v <= 1.0:
            raise ValueError(f"{name} must be in [0, 1], got {v}")
    if n_classes < 2:
        raise ValueError(f"need at least 2 classes, got {n_classes}")
    acc_base = 1.0 / n_classes
    auc_base = 0.5
    if auc_orig <= auc_base or acc_orig <= acc_base:
        return None
    num = max(0.0, auc_orig - auc_eps) * (acc_orig - acc_base)
    den = max(0.0, acc_orig - acc_eps) * (auc_orig - auc_base)
    if den == 0.0:
        return PHI_CAP
    if num == 0.0:
        return 0.0
    return min(PHI_CAP, num / den)
