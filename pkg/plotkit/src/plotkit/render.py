"""Figure rendering. One SVG per requested panel family.

Reference (non-private) points carry eps = inf; log axes cannot host them,
so they are drawn at the right edge past an axis-break marker. Output is
deterministic: SVG ids are salted, date metadata is disabled, and text is
kept as text so annotations stay greppable.
"""

from __future__ import annotations

from pathlib import Path

import matplotlib
import numpy as np

matplotlib.use("Agg")
import matplotlib.pyplot as plt  # noqa: E402

from .frames import ResultFrame, parse_roc_file  # noqa: E402

PANELS = ("acc", "auc", "phi", "roc", "scatter")

matplotlib.rcParams["svg.hashsalt"] = "plotkit"
matplotlib.rcParams["svg.fonttype"] = "none"

_MODE_MARKERS = {"ldp": "o", "cdp": "s", "none": "*"}
_MODE_COLORS = {"ldp": "tab:blue", "cdp": "tab:orange", "none": "tab:gray"}


class RenderError(ValueError):
    pass


def _edge_position(finite_eps) -> float:
    """x position standing in for eps = inf on a log axis."""
    top = max(finite_eps) if len(finite_eps) else 1.0
    return top * 10.0


def _save(fig, path: Path) -> None:
    fig.savefig(path, format="svg", metadata={"Date": None})
    plt.close(fig)


def _split_reference(grouped, attack):
    rows = grouped[grouped["attack"] == attack]
    ref = rows[~np.isfinite(rows["eps"])]
    finite = rows[np.isfinite(rows["eps"])]
    return ref, finite


def _mark_infinity(ax, edge):
    ax.axvline(edge / 1.9, color="gray", linestyle=":", linewidth=0.8)
    ax.text(edge / 1.9, 0.02, "//", transform=ax.get_xaxis_transform(),
            ha="center", fontsize=8, color="gray")
    ax.text(edge, -0.06, "inf", transform=ax.get_xaxis_transform(),
            ha="center", fontsize=8, color="gray")


def _metric_over_eps(frame: ResultFrame, metric: str, err: str | None,
                     title: str, ylabel: str, baseline: float | None = None):
    grouped = frame.grouped()
    attacks = sorted(grouped["attack"].unique())
    fig, axes = plt.subplots(1, len(attacks), figsize=(5 * len(attacks), 3.6),
                             squeeze=False)
    for ax, attack in zip(axes[0], attacks):
        ref, finite = _split_reference(grouped, attack)
        if len(finite) == 0:
            continue
        edge = _edge_position(finite["eps"])
        for mode, rows in finite.groupby("mode"):
            rows = rows.sort_values("eps")
            yerr = rows[err] if err else None
            ax.errorbar(rows["eps"], rows[metric], yerr=yerr,
                        marker=_MODE_MARKERS.get(mode, "x"),
                        color=_MODE_COLORS.get(mode), capsize=2, label=mode)
        for _, row in ref.iterrows():
            yerr = [[row[err]], [row[err]]] if err else None
            ax.errorbar([edge], [row[metric]], yerr=yerr, marker="*",
                        color=_MODE_COLORS["none"], markersize=10,
                        label="no privacy")
            _mark_infinity(ax, edge)
        if baseline is not None:
            ax.axhline(baseline, color="black", linewidth=0.7, linestyle="--")
        ax.set_xscale("log")
        ax.set_xlabel("eps")
        ax.set_ylabel(ylabel)
        ax.set_title(f"{title} ({attack})")
        ax.legend(fontsize=7)
    fig.tight_layout()
    return fig


def _panel_acc(frame: ResultFrame, out: Path):
    fig = _metric_over_eps(frame, "test_acc_mean", "test_acc_std",
                           "test accuracy over privacy budget", "test accuracy")
    _save(fig, out / "acc.svg")


def _panel_auc(frame: ResultFrame, out: Path):
    fig = _metric_over_eps(frame, "auc_mean", "auc_std",
                           "membership-inference AUC", "attack AUC",
                           baseline=0.5)
    _save(fig, out / "auc.svg")


def _panel_phi(frame: ResultFrame, out: Path):
    fig = _metric_over_eps(frame, "phi", None,
                           "relative privacy-accuracy trade-off", "phi")
    for ax in fig.axes:
        ax.set_ylim(-0.05, 2.1)
    _save(fig, out / "phi.svg")


def _panel_roc(frame: ResultFrame, out: Path):
    if not frame.roc_files:
        raise RenderError("no roc_*.csv files found")
    grouped = frame.grouped()
    curves = []
    for path in frame.roc_files:
        kind, eps, rows = parse_roc_file(path)
        mean_rows = rows[rows["repeat"] == "mean"]
        curves.append((kind, eps, mean_rows))
    kinds = sorted({c[0] for c in curves})
    fig, axes = plt.subplots(1, len(kinds), figsize=(4.6 * len(kinds), 4.2),
                             squeeze=False)
    for ax, kind in zip(axes[0], kinds):
        ax.plot([0, 1], [0, 1], "k--", linewidth=0.8, label="chance (AUC=0.50)")
        for c_kind, eps, rows in curves:
            if c_kind != kind:
                continue
            match = grouped[(grouped["attack"] == kind)
                            & (np.isclose(grouped["eps"], eps, rtol=1e-6)
                               | (~np.isfinite(grouped["eps"]) & np.isinf(eps)))]
            auc_label = f", AUC={match['auc_mean'].iloc[0]:.2f}" if len(match) else ""
            eps_label = "inf" if np.isinf(eps) else f"{eps:g}"
            ax.plot(rows["fpr"], rows["tpr"], label=f"eps={eps_label}{auc_label}")
        ax.set_xlabel("false positive rate")
        ax.set_ylabel("true positive rate")
        ax.set_title(f"mean ROC ({kind})")
        ax.legend(fontsize=7, loc="lower right")
    fig.tight_layout()
    _save(fig, out / "roc.svg")


def _panel_scatter(frame: ResultFrame, out: Path):
    grouped = frame.grouped()
    attacks = sorted(grouped["attack"].unique())
    fig, axes = plt.subplots(1, len(attacks), figsize=(4.6 * len(attacks), 4.0),
                             squeeze=False)
    finite_eps = grouped["eps"][np.isfinite(grouped["eps"])]
    edge = _edge_position(finite_eps)
    color_norm = matplotlib.colors.LogNorm(
        vmin=max(finite_eps.min(), 1e-3) if len(finite_eps) else 0.1, vmax=edge)
    for ax, attack in zip(axes[0], attacks):
        rows = grouped[grouped["attack"] == attack].copy()
        rows["eps_draw"] = rows["eps"].replace(np.inf, edge)
        for mode, sub in rows.groupby("mode"):
            label = "no privacy" if mode == "none" else mode
            sc = ax.scatter(sub["test_acc_mean"], sub["auc_mean"],
                            c=sub["eps_draw"], norm=color_norm, cmap="viridis",
                            marker=_MODE_MARKERS.get(mode, "x"), s=60,
                            edgecolors="black", linewidths=0.4, label=label)
        ax.axhline(0.5, color="black", linewidth=0.7, linestyle="--")
        ax.set_xlabel("test accuracy")
        ax.set_ylabel("attack AUC")
        ax.set_title(f"privacy-accuracy trade-off ({attack})")
        ax.legend(fontsize=7)
    fig.colorbar(sc, ax=axes[0], label="eps (inf at top)", shrink=0.85)
    _save(fig, out / "scatter.svg")


_RENDERERS = {
    "acc": _panel_acc,
    "auc": _panel_auc,
    "phi": _panel_phi,
    "roc": _panel_roc,
    "scatter": _panel_scatter,
}


def render_figures(frame: ResultFrame, out_dir, panels=PANELS) -> list[Path]:
    """Render the requested panel families; returns the written files."""
    panels = list(panels)
    if not panels:
        raise RenderError("no panels requested")
    unknown = [p for p in panels if p not in _RENDERERS]
    if unknown:
        raise RenderError(f"unknown panels: {unknown}; valid: {list(PANELS)}")
    if len(frame.table) == 0:
        raise RenderError("result frame is empty")
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    written = []
    for p in panels:
        _RENDERERS[p](frame, out)
        written.append(out / f"{p}.svg")
    return written
