"""Config-driven orchestration: data, target, shadows, attacks, metrics, files.

A job is one (config, repeat) pipeline run; a sweep runs the non-private
reference plus each grid point over all repeats, then derives the trade-off
ratio from repeat means. Every random choice is derived from
(base seed + repeat) through named SeedSequence streams, so outputs are
byte-for-byte reproducible except for wall-clock columns. Splits depend only
on (seed, repeat), never on the privacy point, which isolates the mechanism
as the only variable across a sweep.
"""

from __future__ import annotations

import csv
import json
import math
import time
from dataclasses import dataclass, field, replace
from pathlib import Path

import numpy as np

from . import attacks, datasets, dpsgd, mechanisms, metrics, nn


class ConfigError(ValueError):
    pass


@dataclass
class PrivacySpec:
    """Mechanism selection: none, local randomizer, or central DP optimizer."""

    mode: str = "none"
    # ldp
    eps_i: float | None = None
    pixel_m: float | None = None  # image neighborhood; defaults to the image side
    pixel_b: int = 1
    # cdp
    z: float | None = None
    clip: float | None = None
    lot_size: int | None = None
    delta: float | None = None

    def validate(self) -> None:
        if self.mode not in ("none", "ldp", "cdp"):
            raise ConfigError(f"privacy mode must be none/ldp/cdp, got {self.mode!r}")
        if self.mode == "ldp":
            if self.eps_i is None or self.eps_i < 0:
                raise ConfigError("ldp mode needs eps_i >= 0")
        if self.mode == "cdp":
            if self.z is None or self.z < 0:
                raise ConfigError("cdp mode needs a noise multiplier z >= 0")
            if self.z > 0 and (self.clip is None or self.clip <= 0):
                raise ConfigError("cdp mode with z > 0 needs a positive clipping norm")


@dataclass
class ExperimentConfig:
    name: str
    dataset: dict
    hidden: list[int]
    fit: nn.FitConfig
    privacy: PrivacySpec
    attack_kinds: list[str]
    split_n: int
    shadows: int = 10
    shadow_size: int | None = None
    stratified: bool = False
    known_fraction: float = 0.5
    attack_training: attacks.AttackTrainConfig = field(
        default_factory=attacks.AttackTrainConfig)
    repeats: int = 5
    seed: int = 0
    sweep_axis: str | None = None  # "eps_i" | "z"
    sweep_values: list[float] = field(default_factory=list)
    raw: dict = field(default_factory=dict)


_GENERATORS = ("unbalanced_carts", "skewed_purchases", "gray_images")


def load_config(source) -> ExperimentConfig:
    """Parse and validate a config dict or JSON file path."""
    if isinstance(source, (str, Path)):
        try:
            raw = json.loads(Path(source).read_text())
        except FileNotFoundError:
            raise ConfigError(f"config file not found: {source}") from None
        except json.JSONDecodeError as e:
            raise ConfigError(f"config is not valid JSON: {e}") from None
    else:
        raw = source
    return parse_config(raw)


def parse_config(raw: dict) -> ExperimentConfig:
    def need(key, typ=None):
        if key not in raw:
            raise ConfigError(f"config missing required key {key!r}")
        v = raw[key]
        if typ is not None and not isinstance(v, typ):
            raise ConfigError(f"config key {key!r} has wrong type")
        return v

    name = need("name", str)
    dset = need("dataset", dict)
    if "generator" in dset:
        if dset["generator"] not in _GENERATORS:
            raise ConfigError(f"unknown generator {dset['generator']!r}")
    elif "csv" in dset:
        for key in ("csv", "test_csv"):
            if key in dset and not Path(dset[key]).exists():
                raise ConfigError(f"dataset file not found: {dset[key]}")
    else:
        raise ConfigError("dataset needs either a 'generator' or a 'csv' entry")

    model = raw.get("model", {})
    hidden = list(model.get("hidden", [128]))

    tr = raw.get("training", {})
    fit = nn.FitConfig(
        epochs=int(tr.get("epochs", 200)),
        batch_size=int(tr.get("batch_size", 128)),
        optimizer=tr.get("optimizer", "adam"),
        learning_rate=float(tr.get("learning_rate", 0.001)),
        early_stop=bool(tr.get("early_stop", True)),
        patience=int(tr.get("patience", 10)),
        tolerance=float(tr.get("tolerance", 1e-4)))
    if fit.optimizer not in ("sgd", "adam"):
        raise ConfigError(f"unknown optimizer {fit.optimizer!r}")

    pr = raw.get("privacy", {"mode": "none"})
    privacy = PrivacySpec(
        mode=pr.get("mode", "none"),
        eps_i=pr.get("eps_i"),
        pixel_m=pr.get("pixel_m"),
        pixel_b=int(pr.get("pixel_b", 1)),
        z=pr.get("z"),
        clip=pr.get("clip", 4.0),
        lot_size=pr.get("lot_size"),
        delta=pr.get("delta"))
    privacy.validate()

    kinds = raw.get("attacks", ["bb", "wb"])
    for k in kinds:
        if k not in ("bb", "wb"):
            raise ConfigError(f"unknown attack kind {k!r}")

    split = raw.get("split", {})
    if "n" not in split:
        raise ConfigError("config missing split.n (target train/test size)")

    at = raw.get("attack_training", {})
    attack_cfg = attacks.AttackTrainConfig(
        hidden=int(at.get("hidden", 64)),
        epochs=int(at.get("epochs", 150)),
        learning_rate=float(at.get("learning_rate", 0.001)),
        batch_size=int(at.get("batch_size", 64)),
        holdout=float(at.get("holdout", 0.2)),
        patience=int(at.get("patience", 10)))

    repeats = int(raw.get("repeats", 5))
    if repeats < 1:
        raise ConfigError("repeats must be >= 1")

    sweep_axis, sweep_values = None, []
    if "sweep" in raw:
        sw = raw["sweep"]
        axes = [k for k in ("eps_i", "z") if k in sw]
        if len(axes) != 1:
            raise ConfigError("sweep must grid over exactly one of eps_i or z")
        sweep_axis = axes[0]
        sweep_values = [float(v) for v in sw[sweep_axis]]
        if not sweep_values:
            raise ConfigError("sweep grid is empty")

    return ExperimentConfig(
        name=name, dataset=dset, hidden=hidden, fit=fit, privacy=privacy,
        attack_kinds=list(kinds), split_n=int(split["n"]),
        shadows=int(raw.get("shadows", 10)),
        shadow_size=split.get("shadow_size"),
        stratified=bool(split.get("stratified", False)),
        known_fraction=float(raw.get("known_fraction", 0.5)),
        attack_training=attack_cfg, repeats=repeats, seed=int(raw.get("seed", 0)),
        sweep_axis=sweep_axis, sweep_values=sweep_values, raw=raw)


def build_dataset(cfg: ExperimentConfig) -> tuple[datasets.Dataset, int | None]:
    """Materialize the config's data source.

    Returns (dataset, boundary); boundary marks the train/test pool border of
    pre-split sources (records before it are train-pool), None when single-pool.
    """
    d = cfg.dataset
    if "csv" in d:
        ds = datasets.load_csv_dataset(d["csv"], d.get("label_column", "label"),
                                       d.get("kind", "binary"))
        if "test_csv" in d:
            test = datasets.load_csv_dataset(d["test_csv"], d.get("label_column", "label"),
                                             d.get("kind", "binary"))
            return _concat(ds, test), len(ds)
        return ds, None
    gen = d["generator"]
    params = dict(d.get("params", {}))
    params.setdefault("seed", cfg.seed)
    if gen == "unbalanced_carts":
        return datasets.gen_unbalanced_carts(
            n_classes=int(params.get("n_classes", 10)),
            n=int(params.get("n", 1000)),
            width=int(params.get("width", 100)),
            gamma=float(params.get("gamma", 1.0)),
            pattern_strength=float(params.get("pattern_strength", 0.85)),
            seed=int(params["seed"])), None
    if gen == "skewed_purchases":
        spec = datasets.SkewSpec(
            n_classes=int(params.get("n_classes", 10)),
            records=int(params.get("records", 10000)),
            width=int(params.get("width", 600)),
            p_ind=float(params.get("p_ind", 0.8)),
            p_noise_train=float(params.get("p_noise_train", 0.2)),
            p_noise_test=float(params.get("p_noise_test", 0.5)),
            seed=int(params["seed"]))
        train, test = datasets.gen_skewed_purchases(spec)
        return _concat(train, test), len(train)
    if gen == "gray_images":
        return datasets.gen_gray_images(
            count=int(params.get("count", 400)),
            side=int(params.get("side", 16)),
            seed=int(params["seed"])), None
    raise ConfigError(f"unknown generator {gen!r}")


def _concat(a: datasets.Dataset, b: datasets.Dataset) -> datasets.Dataset:
    if a.width != b.width or a.kind != b.kind:
        raise ConfigError("train/test pools disagree in shape or kind")
    return datasets.Dataset(
        np.concatenate([a.features, b.features]),
        np.concatenate([a.labels, b.labels]),
        a.kind, max(a.n_classes, b.n_classes), side=a.side)


def _partition(cfg: ExperimentConfig, dataset: datasets.Dataset,
               boundary: int | None, seed: int) -> attacks.AttackLayout:
    n = cfg.split_n
    if boundary is None:
        return attacks.partition_attack_data(
            dataset, n, cfg.shadows, seed,
            shadow_size=cfg.shadow_size, stratified=cfg.stratified)
    # pre-split pools: target/shadow train from pool A, test from pool B
    rng = np.random.default_rng(seed)
    pool_a = np.arange(boundary)
    pool_b = np.arange(boundary, len(dataset))
    if len(pool_a) < n or len(pool_b) < n:
        raise ValueError("pools too small for the requested target size")
    target_train = rng.choice(pool_a, n, replace=False)
    target_test = rng.choice(pool_b, n, replace=False)
    rem_a = np.setdiff1d(pool_a, target_train)
    rem_b = np.setdiff1d(pool_b, target_test)
    pairs = []
    if cfg.shadows > 0:
        size = cfg.shadow_size or min(n, len(rem_a), len(rem_b))
        if size < 1 or len(rem_a) < size or len(rem_b) < size:
            raise ValueError("shadow pools too small")
        for _ in range(cfg.shadows):
            pairs.append((rng.choice(rem_a, size, replace=False),
                          rng.choice(rem_b, size, replace=False)))
    return attacks.AttackLayout(target_train, target_test, pairs)


def perturb_dataset(ds: datasets.Dataset, privacy: PrivacySpec,
                    rng: np.random.Generator) -> tuple[datasets.Dataset, float]:
    """Apply the local randomizer to every record; returns (data, per-record eps)."""
    if privacy.mode != "ldp":
        raise ValueError("perturb_dataset is for ldp mode")
    if ds.kind == "binary":
        rho = mechanisms.rr_retention(privacy.eps_i)
        out = mechanisms.ldp_perturb_matrix(ds.features, rho, rng)
        eps = mechanisms.compose_local_budget([privacy.eps_i] * ds.width)
        return ds.replace_features(out), eps
    if ds.kind == "image":
        side = ds.side
        m = privacy.pixel_m if privacy.pixel_m is not None else float(side)
        b = privacy.pixel_b
        out = np.empty_like(ds.features)
        for i, row in enumerate(ds.features):
            out[i] = mechanisms.pixelate_image(
                row.reshape(side, side), m, b, privacy.eps_i, rng).ravel()
        cells = (side // b) * (side // b)
        return ds.replace_features(out), privacy.eps_i * cells
    raise ConfigError(f"no local randomizer for feature kind {ds.kind!r}")


def train_private_model(train_ds, test_ds, hidden, fit_cfg: nn.FitConfig,
                        privacy: PrivacySpec, seed: int):
    """Train one model under the given privacy mode.

    Returns (net, report, eps): eps is inf for mode none, the composed
    per-record budget for ldp, and the accounted budget for cdp.
    """
    ss = np.random.SeedSequence(seed)
    init_ss, train_ss, perturb_ss = ss.spawn(3)
    sizes = [train_ds.width] + list(hidden) + [train_ds.n_classes]
    net = nn.build_network(sizes, np.random.default_rng(init_ss))
    train_rng = np.random.default_rng(train_ss)

    if privacy.mode == "ldp":
        train_ds, eps = perturb_dataset(train_ds, privacy, np.random.default_rng(perturb_ss))
        report = nn.fit(net, train_ds, test_ds, fit_cfg, train_rng)
        return net, report, eps
    if privacy.mode == "cdp":
        n = len(train_ds)
        params = dpsgd.CdpParams(
            clip=privacy.clip, z=privacy.z,
            lot_size=privacy.lot_size or min(fit_cfg.batch_size, n),
            delta=privacy.delta)
        report, eps = dpsgd.dp_fit(net, train_ds, test_ds, params, fit_cfg, train_rng)
        return net, report, eps
    report = nn.fit(net, train_ds, test_ds, fit_cfg, train_rng)
    return net, report, math.inf


@dataclass
class JobResult:
    rows: list[dict]
    rocs: dict[str, metrics.RocCurve]
    feature_sets: dict[str, attacks.FeatureSet]  # evaluation features per attack
    digests: dict[str, dict]
    report: nn.TrainReport
    eps: float


# stream ids under (seed + repeat): fixed so adding grid points never shifts them
_S_SPLIT, _S_TARGET, _S_ATTACK_BB, _S_ATTACK_WB, _S_SHADOWS = 0, 1, 2, 3, 4


def _stream_seed(base: int, repeat: int, stream: int) -> int:
    return int(np.random.SeedSequence((base, repeat, stream)).generate_state(1)[0])


def run_job(cfg: ExperimentConfig, repeat: int,
            prepared: tuple[datasets.Dataset, int | None] | None = None) -> JobResult:
    """One end-to-end pipeline run for a single repeat."""
    t0 = time.perf_counter()
    dataset, boundary = prepared if prepared is not None else build_dataset(cfg)
    base = cfg.seed
    layout = _partition(cfg, dataset, boundary, _stream_seed(base, repeat, _S_SPLIT))

    train_ds = dataset.subset(layout.target_train)
    test_ds = dataset.subset(layout.target_test)
    net, report, eps = train_private_model(
        train_ds, test_ds, cfg.hidden, cfg.fit, cfg.privacy,
        _stream_seed(base, repeat, _S_TARGET))
    train_acc = report.train_acc[-1]
    test_acc = report.test_acc[-1]

    rows, rocs, feature_sets, digests = [], {}, {}, {}
    for kind in cfg.attack_kinds:
        if kind == "bb":
            scores, flags, fs, digest = _run_bb(cfg, dataset, layout, net, base, repeat)
        else:
            scores, flags, fs, digest = _run_wb(cfg, dataset, layout, net, base, repeat)
        curve = metrics.roc_curve(scores, flags)
        rocs[kind] = curve
        feature_sets[kind] = fs
        digests[kind] = digest
        rows.append({
            "experiment_id": cfg.name,
            "dataset": _dataset_name(cfg),
            "classes": dataset.n_classes,
            "mode": cfg.privacy.mode,
            "eps_i": cfg.privacy.eps_i if cfg.privacy.mode == "ldp" else None,
            "eps": eps,
            "z": cfg.privacy.z if cfg.privacy.mode == "cdp" else None,
            "clip": cfg.privacy.clip if cfg.privacy.mode == "cdp" else None,
            "repeat": repeat,
            "seed": base + repeat,
            "attack": kind,
            "train_acc": train_acc,
            "test_acc": test_acc,
            "auc": metrics.auc(curve),
            "phi": None,
            "wall_clock_s": time.perf_counter() - t0,
        })
    return JobResult(rows, rocs, feature_sets, digests, report, eps)


def _dataset_name(cfg: ExperimentConfig) -> str:
    d = cfg.dataset
    return d.get("generator") or Path(d["csv"]).stem


def _run_bb(cfg, dataset, layout, target_net, base, repeat):
    shadow_seeds = [_stream_seed(base, repeat, _S_SHADOWS + i) for i in range(cfg.shadows)]
    nets = attacks.train_shadows(dataset, layout, cfg.hidden, cfg.fit,
                                 cfg.privacy, shadow_seeds)
    parts = []
    shadow_records = []
    for net_i, (tr, te) in zip(nets, layout.shadow_pairs):
        raw_tr, raw_te = dataset.subset(tr), dataset.subset(te)
        parts.append(attacks.extract_bb_features(net_i, raw_tr, 1))
        parts.append(attacks.extract_bb_features(net_i, raw_te, 0))
        shadow_records.extend([raw_tr, raw_te])
    train_features = attacks.FeatureSet.concat(parts)
    rng = np.random.default_rng(_stream_seed(base, repeat, _S_ATTACK_BB))
    model = attacks.train_attack_model(train_features, "bb", dataset.n_classes,
                                       cfg.attack_training, rng)

    eval_in = dataset.subset(layout.target_train)
    eval_out = dataset.subset(layout.target_test)
    eval_features = attacks.FeatureSet.concat([
        attacks.extract_bb_features(target_net, eval_in, 1),
        attacks.extract_bb_features(target_net, eval_out, 0)])
    scores, flags = attacks.score_membership(model, eval_features)
    digest = {
        "shadow_inputs": _multi_digest(shadow_records),
        "eval_inputs": _multi_digest([eval_in, eval_out]),
    }
    return scores, flags, eval_features, digest


def _run_wb(cfg, dataset, layout, target_net, base, repeat):
    n = len(layout.target_train)
    known = int(n * cfg.known_fraction)
    if not 0 < known < n:
        raise ConfigError("known_fraction leaves an empty known or unknown half")
    known_in = dataset.subset(layout.target_train[:known])
    known_out = dataset.subset(layout.target_test[:known])
    unknown_in = dataset.subset(layout.target_train[known:])
    unknown_out = dataset.subset(layout.target_test[known:])

    train_features = attacks.FeatureSet.concat([
        attacks.extract_wb_features(target_net, known_in, 1),
        attacks.extract_wb_features(target_net, known_out, 0)])
    rng = np.random.default_rng(_stream_seed(base, repeat, _S_ATTACK_WB))
    model = attacks.train_attack_model(train_features, "wb", dataset.n_classes,
                                       cfg.attack_training, rng)
    eval_features = attacks.FeatureSet.concat([
        attacks.extract_wb_features(target_net, unknown_in, 1),
        attacks.extract_wb_features(target_net, unknown_out, 0)])
    scores, flags = attacks.score_membership(model, eval_features)
    digest = {
        "train_inputs": _multi_digest([known_in, known_out]),
        "eval_inputs": _multi_digest([unknown_in, unknown_out]),
    }
    return scores, flags, eval_features, digest


def _multi_digest(record_sets) -> str:
    import hashlib

    h = hashlib.sha256()
    for rs in record_sets:
        h.update(attacks.records_digest(rs).encode())
    return h.hexdigest()


@dataclass
class SweepPoint:
    label: str  # "reference" or e.g. "eps_i=0.5" / "z=16"
    privacy: PrivacySpec
    results: list[JobResult] = field(default_factory=list)


@dataclass
class SweepResult:
    config: ExperimentConfig
    points: list[SweepPoint]
    tradeoffs: list[dict] = field(default_factory=list)


def _grid_privacy(cfg: ExperimentConfig, value: float) -> PrivacySpec:
    if cfg.sweep_axis == "eps_i":
        return replace(cfg.privacy, mode="ldp", eps_i=value)
    return replace(cfg.privacy, mode="cdp", z=value,
                   clip=cfg.privacy.clip if cfg.privacy.clip else 4.0)


def sweep(cfg: ExperimentConfig, jobs: int = 1) -> SweepResult:
    """Reference run plus every grid point, all repeats, plus trade-offs."""
    if cfg.sweep_axis is None:
        raise ConfigError("config has no sweep grid")
    points = [SweepPoint("reference", replace(cfg.privacy, mode="none"))]
    for v in cfg.sweep_values:
        points.append(SweepPoint(f"{cfg.sweep_axis}={v:g}", _grid_privacy(cfg, v)))

    tasks = [(pi, r) for pi in range(len(points)) for r in range(cfg.repeats)]
    if jobs > 1:
        results = _run_parallel(cfg, points, tasks, jobs)
    else:
        prepared = build_dataset(cfg)
        results = {}
        for pi, r in tasks:
            variant = replace(cfg, privacy=points[pi].privacy)
            results[(pi, r)] = run_job(variant, r, prepared)
    for (pi, r), res in sorted(results.items()):
        points[pi].results.append(res)

    out = SweepResult(cfg, points)
    ref = points[0]
    for kind in cfg.attack_kinds:
        acc_orig = _mean(ref, "test_acc", kind)
        auc_orig = _mean(ref, "auc", kind)
        n_classes = ref.results[0].rows[0]["classes"]
        for point in points[1:]:
            acc_eps = _mean(point, "test_acc", kind)
            auc_eps = _mean(point, "auc", kind)
            value = metrics.phi(_clip01(auc_orig), _clip01(auc_eps),
                                _clip01(acc_orig), _clip01(acc_eps), n_classes)
            for res in point.results:
                for row in res.rows:
                    if row["attack"] == kind:
                        row["phi"] = value
            out.tradeoffs.append({
                "experiment_id": cfg.name,
                "dataset": _dataset_name(cfg),
                "classes": n_classes,
                "mode": point.privacy.mode,
                "point": point.label,
                "eps_i": point.privacy.eps_i if point.privacy.mode == "ldp" else None,
                "eps": _mean(point, "eps", kind),
                "z": point.privacy.z if point.privacy.mode == "cdp" else None,
                "attack": kind,
                "acc_orig": acc_orig,
                "auc_orig": auc_orig,
                "acc_eps": acc_eps,
                "auc_eps": auc_eps,
                "phi": value,
            })
    return out


def _run_parallel(cfg, points, tasks, jobs):
    from concurrent.futures import ProcessPoolExecutor

    futures = {}
    results = {}
    with ProcessPoolExecutor(max_workers=jobs) as pool:
        for pi, r in tasks:
            variant = replace(cfg, privacy=points[pi].privacy)
            futures[(pi, r)] = pool.submit(run_job, variant, r)
        for key, fut in futures.items():
            results[key] = fut.result()
    return results


def _mean(point: SweepPoint, field_name: str, kind: str) -> float:
    vals = [row[field_name] for res in point.results for row in res.rows
            if row["attack"] == kind]
    return float(np.mean(vals))


def _clip01(x: float) -> float:
    return min(max(x, 0.0), 1.0)


# ---------------------------------------------------------------- persistence

RESULT_COLUMNS = [
    "experiment_id", "dataset", "classes", "mode", "eps_i", "eps", "z", "clip",
    "repeat", "seed", "attack", "train_acc", "test_acc", "auc", "phi",
    "wall_clock_s",
]

TRADEOFF_COLUMNS = [
    "experiment_id", "dataset", "classes", "mode", "point", "eps_i", "eps", "z",
    "attack", "acc_orig", "auc_orig", "acc_eps", "auc_eps", "phi",
]


def format_cell(v) -> str:
    if v is None:
        return "n/a"
    if isinstance(v, float):
        if math.isinf(v):
            return "inf"
        if v == int(v) and abs(v) < 1e15:
            return str(int(v))
        return f"{v:.12g}"
    return str(v)


class PersistError(RuntimeError):
    pass


def persist_results(out_dir, sweep_result: SweepResult, force: bool = False) -> list[Path]:
    """Write results.csv, tradeoff.csv, per-point ROC files, feature dumps and
    a config snapshot; refuses a duplicate experiment id unless forced."""
    out = Path(out_dir)
    try:
        out.mkdir(parents=True, exist_ok=True)
    except OSError as e:
        raise PersistError(f"cannot create output dir {out}: {e}") from None
    cfg = sweep_result.config
    rows = [row for p in sweep_result.points for res in p.results for row in res.rows]

    results_path = out / "results.csv"
    existing = []
    if results_path.exists():
        with results_path.open(newline="") as fh:
            existing = list(csv.DictReader(fh))
        ids = {r["experiment_id"] for r in existing}
        if cfg.name in ids:
            if not force:
                raise PersistError(
                    f"experiment id {cfg.name!r} already present in {results_path}; "
                    "use --force to replace")
            existing = [r for r in existing if r["experiment_id"] != cfg.name]

    written = []
    with results_path.open("w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(RESULT_COLUMNS)
        for r in existing:
            writer.writerow([r[c] for c in RESULT_COLUMNS])
        for row in rows:
            writer.writerow([format_cell(row[c]) for c in RESULT_COLUMNS])
    written.append(results_path)

    tradeoff_path = out / "tradeoff.csv"
    with tradeoff_path.open("w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(TRADEOFF_COLUMNS)
        for t in sweep_result.tradeoffs:
            writer.writerow([format_cell(t[c]) for c in TRADEOFF_COLUMNS])
    written.append(tradeoff_path)

    roc_dir = out / "roc" / cfg.name
    roc_dir.mkdir(parents=True, exist_ok=True)
    grid = metrics.DEFAULT_FPR_GRID
    for point in sweep_result.points:
        for kind in cfg.attack_kinds:
            curves = [res.rocs[kind] for res in point.results]
            eps_label = format_cell(_mean(point, "eps", kind))
            path = roc_dir / f"roc_{kind}_{eps_label}.csv"
            mean_curve = metrics.mean_roc(curves, grid)
            with path.open("w", newline="") as fh:
                writer = csv.writer(fh)
                writer.writerow(["repeat", "fpr", "tpr"])
                for r, curve in enumerate(curves):
                    resampled = metrics.mean_roc([curve], grid)
                    for f, t in zip(resampled.fpr, resampled.tpr):
                        writer.writerow([r, format_cell(float(f)), format_cell(float(t))])
                for f, t in zip(mean_curve.fpr, mean_curve.tpr):
                    writer.writerow(["mean", format_cell(float(f)), format_cell(float(t))])
            written.append(path)

    feat_dir = out / "features" / cfg.name
    feat_dir.mkdir(parents=True, exist_ok=True)
    for point in sweep_result.points:
        tag = point.label.replace("=", "_")
        for r, res in enumerate(point.results):
            for kind, fs in res.feature_sets.items():
                path = feat_dir / f"features_{kind}_{tag}_r{r}.csv"
                with path.open("w", newline="") as fh:
                    writer = csv.writer(fh)
                    width = fs.features.shape[1]
                    writer.writerow(["record_id", "class", "flag"]
                                    + [f"f{i}" for i in range(width)])
                    for i in range(len(fs)):
                        writer.writerow(
                            [i, int(fs.labels[i]), int(fs.flags[i])]
                            + [format_cell(float(v)) for v in fs.features[i]])
                written.append(path)

    snapshot = out / "config.json"
    snapshot.write_text(json.dumps(cfg.raw, indent=2, sort_keys=True))
    written.append(snapshot)
    return written


def report_summary(results_dir) -> str:
    """Aggregate results.csv into a per-configuration text table."""
    path = Path(results_dir) / "results.csv"
    if not path.exists():
        return "no data"
    with path.open(newline="") as fh:
        rows = list(csv.DictReader(fh))
    if not rows:
        return "no data"
    for required in RESULT_COLUMNS:
        if required not in rows[0]:
            raise PersistError(f"results.csv missing column {required!r}")

    def fnum(s):
        return None if s == "n/a" else float(s)

    groups: dict[tuple, list[dict]] = {}
    for r in rows:
        key = (r["experiment_id"], r["dataset"], r["mode"], r["eps_i"], r["z"],
               r["eps"], r["attack"])
        groups.setdefault(key, []).append(r)

    # reference AUC per (experiment, attack) decides the "attack ineffective" flag
    ref_auc: dict[tuple, float] = {}
    for key, g in groups.items():
        if key[2] == "none":
            ref_auc[(key[0], key[6])] = float(np.mean([fnum(r["auc"]) for r in g]))

    header = ["experiment", "dataset", "mode", "eps_i", "eps", "attack",
              "test_acc", "auc", "phi", "note"]
    lines = []
    for key in sorted(groups):
        g = groups[key]
        accs = [fnum(r["test_acc"]) for r in g]
        aucs = [fnum(r["auc"]) for r in g]
        phis = [fnum(r["phi"]) for r in g if r["phi"] != "n/a"]
        note = ""
        ref = ref_auc.get((key[0], key[6]))
        if ref is not None and ref <= 0.5:
            note = "attack ineffective"
        lines.append([
            key[0], key[1], key[2], key[3], key[5], key[6],
            f"{np.mean(accs):.4f}±{np.std(accs, ddof=1) if len(accs) > 1 else 0:.4f}",
            f"{np.mean(aucs):.4f}±{np.std(aucs, ddof=1) if len(aucs) > 1 else 0:.4f}",
            f"{np.mean(phis):.4f}" if phis else "n/a",
            note,
        ])
    widths = [max(len(str(row[i])) for row in [header] + lines) for i in range(len(header))]
    fmt = "  ".join(f"{{:<{w}}}" for w in widths)
    text = [fmt.format(*header)]
    text += [fmt.format(*(str(c) for c in row)) for row in lines]
    return "\n".join(text)
