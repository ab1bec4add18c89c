"""Black-box shadow-model and white-box feature-based membership inference.

The black-box attack trains shadow copies of the target, collects (softmax,
label, in/out) triples from them, and fits one small binary classifier per
class. The white-box attack assumes half of the target's train and test
records are known, fits one classifier on (one-hot label, softmax, loss,
last-layer gradient norms), and is evaluated on the unknown halves.

Feature extraction always consumes unperturbed records; under LDP the
shadow/target models were trained on perturbed data, but the membership
signal is read off the raw records (learning the perturbation itself would
only separate two distributions, not members).
"""

from __future__ import annotations

import hashlib
from dataclasses import dataclass, field

import numpy as np

from . import nn


@dataclass
class AttackLayout:
    """Index sets for one experiment: disjoint target train/test plus shadow
    train/test pairs drawn (with replacement across shadows) from the rest."""

    target_train: np.ndarray
    target_test: np.ndarray
    shadow_pairs: list[tuple[np.ndarray, np.ndarray]] = field(default_factory=list)

    def as_dict(self) -> dict:
        d = {"target_train": self.target_train, "target_test": self.target_test}
        for i, (tr, te) in enumerate(self.shadow_pairs):
            d[f"shadow_{i}_train"] = tr
            d[f"shadow_{i}_test"] = te
        return d


def partition_attack_data(dataset, n: int, k_shadows: int, seed: int,
                          shadow_size: int | None = None,
                          stratified: bool = False) -> AttackLayout:
    """Split a dataset into target train/test of size n each and k shadow pairs.

    Shadow pairs are disjoint within a shadow and never touch the target
    train set; different shadows may overlap each other.
    """
    total = len(dataset)
    if total < 2 * n:
        raise ValueError(f"dataset of {total} records cannot hold 2 x {n} target records")
    rng = np.random.default_rng(seed)
    if stratified:
        target_train, target_test = _stratified_halves(dataset.labels, n, rng)
        target = np.concatenate([target_train, target_test])
    else:
        target = rng.choice(total, size=2 * n, replace=False)
        target_train = target[:n]
        target_test = target[n:]
    pool = np.setdiff1d(np.arange(total), target, assume_unique=False)

    if k_shadows > 0:
        size = shadow_size if shadow_size is not None else min(n, len(pool) // 2)
        if size < 1 or len(pool) < 2 * size:
            raise ValueError(
                f"shadow pool of {len(pool)} records cannot hold 2 x {size} per shadow")
    pairs = []
    for _ in range(k_shadows):
        pick = rng.choice(len(pool), size=2 * size, replace=False)
        pairs.append((pool[pick[:size]], pool[pick[size:]]))
    return AttackLayout(target_train, target_test, pairs)


def _stratified_halves(labels: np.ndarray, n: int,
                       rng: np.random.Generator) -> tuple[np.ndarray, np.ndarray]:
    """Two disjoint size-n index sets, each mirroring the pool's class mix."""
    classes, class_counts = np.unique(labels, return_counts=True)
    take = np.floor(n * class_counts / len(labels)).astype(np.int64)
    for i in np.argsort(-(n * class_counts / len(labels) - take)):
        if take.sum() >= n:
            break
        take[i] += 1
    train_parts, test_parts = [], []
    for c, t in zip(classes, take):
        idx = np.flatnonzero(labels == c)
        pick = rng.choice(idx, size=min(2 * t, len(idx)), replace=False)
        train_parts.append(pick[:t])
        test_parts.append(pick[t:2 * t])
    train = np.concatenate(train_parts)
    test = np.concatenate(test_parts)
    rng.shuffle(train)
    rng.shuffle(test)
    return train[:n], test[:n]


@dataclass
class FeatureSet:
    """Attack-model rows: features never contain the membership flag; the
    flag rides alongside from split bookkeeping."""

    features: np.ndarray  # (n, width)
    labels: np.ndarray  # true class per record
    flags: np.ndarray  # 1 = member, 0 = non-member

    def __len__(self) -> int:
        return len(self.flags)

    @staticmethod
    def concat(sets: list["FeatureSet"]) -> "FeatureSet":
        return FeatureSet(np.concatenate([s.features for s in sets]),
                          np.concatenate([s.labels for s in sets]),
                          np.concatenate([s.flags for s in sets]))


def records_digest(records) -> str:
    """Hash of the exact records a feature extraction consumes."""
    h = hashlib.sha256()
    h.update(np.ascontiguousarray(records.features).tobytes())
    h.update(np.ascontiguousarray(records.labels).tobytes())
    return h.hexdigest()


def _bb_feature_matrix(net: nn.Network, records) -> np.ndarray:
    _, probs = nn.forward(net, nn.Batch(records.features, records.labels))
    return probs


def extract_bb_features(net: nn.Network, records, member_flag: int) -> FeatureSet:
    """Softmax vectors on raw records; flag copied from bookkeeping."""
    probs = _bb_feature_matrix(net, records)
    flags = np.full(len(records.labels), member_flag, dtype=np.int64)
    return FeatureSet(probs, records.labels.copy(), flags)


def _wb_feature_matrix(net: nn.Network, records) -> np.ndarray:
    batch = nn.Batch(records.features, records.labels)
    _, probs = nn.forward(net, batch)
    peg = nn.per_example_grads(net, batch)
    dw, db = peg.grads[-1]  # final dense layer only
    row_sq = (dw * dw).sum(axis=2) + db * db  # (n, out_rows)
    overall = np.sqrt(row_sq.sum(axis=1, keepdims=True))
    onehot = np.zeros_like(probs)
    onehot[np.arange(len(records.labels)), records.labels] = 1.0
    return np.concatenate(
        [onehot, probs, peg.losses[:, None], overall, np.sqrt(row_sq)], axis=1)


def extract_wb_features(net: nn.Network, records, member_flag: int) -> FeatureSet:
    """One-hot label, softmax, loss, and last-layer gradient norms per record."""
    feats = _wb_feature_matrix(net, records)
    flags = np.full(len(records.labels), member_flag, dtype=np.int64)
    return FeatureSet(feats, records.labels.copy(), flags)


@dataclass
class _BinaryClassifier:
    net: nn.Network | None  # None -> constant 0.5 fallback
    mean: np.ndarray | None = None
    std: np.ndarray | None = None
    log_from: int | None = None  # log1p-compress columns >= this before scaling

    def _prep(self, feats: np.ndarray) -> np.ndarray:
        if self.log_from is not None:
            feats = feats.copy()
            feats[:, self.log_from:] = np.log1p(feats[:, self.log_from:])
        return (feats - self.mean) / self.std

    def score(self, feats: np.ndarray) -> np.ndarray:
        if self.net is None:
            return np.full(len(feats), 0.5)
        x = self._prep(feats)
        _, probs = nn.forward(self.net, nn.Batch(x, np.zeros(len(x), dtype=np.int64)))
        return probs[:, 1]


@dataclass
class _ScoreEnsemble:
    members: list[_BinaryClassifier]

    def score(self, feats: np.ndarray) -> np.ndarray:
        return np.mean([m.score(feats) for m in self.members], axis=0)


@dataclass
class AttackModel:
    kind: str  # "bb" | "wb"
    classifiers: dict  # bb: class -> scorer; wb: {-1: scorer}
    fallback_classes: list[int] = field(default_factory=list)


@dataclass
class AttackTrainConfig:
    hidden: int = 64
    epochs: int = 300
    learning_rate: float = 0.001
    batch_size: int = 64
    holdout: float = 0.2  # early-stopping fraction
    patience: int = 30
    wb_ensemble: int = 7  # wb scores averaged over this many holdout resamples


def _balance(flags: np.ndarray, rng: np.random.Generator) -> np.ndarray:
    """Indices with members downsampled to match non-members (or vice versa)."""
    members = np.flatnonzero(flags == 1)
    outs = np.flatnonzero(flags == 0)
    m = min(len(members), len(outs))
    keep = np.concatenate([rng.choice(members, m, replace=False),
                           rng.choice(outs, m, replace=False)])
    rng.shuffle(keep)
    return keep


def _fit_binary(feats: np.ndarray, flags: np.ndarray, cfg: AttackTrainConfig,
                rng: np.random.Generator, log_from: int | None = None) -> _BinaryClassifier:
    if log_from is not None:
        feats = feats.copy()
        feats[:, log_from:] = np.log1p(feats[:, log_from:])
    mean = feats.mean(axis=0)
    std = feats.std(axis=0)
    std[std < 1e-9] = 1.0
    x = (feats - mean) / std

    order = rng.permutation(len(x))
    n_hold = max(int(len(x) * cfg.holdout), 2)
    hold, tr = order[:n_hold], order[n_hold:]
    if len(tr) < 2 or len(np.unique(flags[tr])) < 2 or len(np.unique(flags[hold])) < 2:
        tr = hold = order  # too small to hold out; stop on training loss instead
    train = _ArrayData(x[tr], flags[tr])
    test = _ArrayData(x[hold], flags[hold])

    net = nn.build_network([x.shape[1], cfg.hidden, 2], rng)
    fit_cfg = nn.FitConfig(epochs=cfg.epochs, batch_size=cfg.batch_size,
                           optimizer="adam", learning_rate=cfg.learning_rate,
                           early_stop=True, patience=cfg.patience)
    nn.fit(net, train, test, fit_cfg, rng)
    return _BinaryClassifier(net, mean, std, log_from)


@dataclass
class _ArrayData:
    features: np.ndarray
    labels: np.ndarray


def train_attack_model(features: FeatureSet, kind: str, n_classes: int,
                       cfg: AttackTrainConfig, rng: np.random.Generator) -> AttackModel:
    """Fit the attack classifier(s).

    bb: one binary classifier per class, each trained on that class's rows
    with in/out balanced by downsampling; a class with no usable rows falls
    back to a constant 0.5 score. wb: a single classifier over all rows.
    """
    if kind == "wb":
        keep = _balance(features.flags, rng)
        # loss and gradient-norm columns are heavy-tailed; compress before scaling.
        # The known halves are small, so scores are averaged over an ensemble of
        # classifiers differing in init and holdout split.
        members = [
            _fit_binary(features.features[keep], features.flags[keep], cfg, rng,
                        log_from=2 * n_classes)
            for _ in range(max(cfg.wb_ensemble, 1))
        ]
        return AttackModel("wb", {-1: _ScoreEnsemble(members)})
    if kind != "bb":
        raise ValueError(f"unknown attack kind {kind!r}")

    classifiers = {}
    fallback = []
    for c in range(n_classes):
        rows = np.flatnonzero(features.labels == c)
        flags_c = features.flags[rows]
        if len(rows) == 0 or len(np.unique(flags_c)) < 2:
            classifiers[c] = _BinaryClassifier(None)
            fallback.append(c)
            continue
        keep = rows[_balance(flags_c, rng)]
        classifiers[c] = _fit_binary(features.features[keep], features.flags[keep],
                                     cfg, rng)
    return AttackModel("bb", classifiers, fallback)


def score_membership(attack: AttackModel, features: FeatureSet) -> tuple[np.ndarray, np.ndarray]:
    """Membership scores in [0, 1] plus ground-truth flags for ROC building.

    The evaluation set must be balanced (equal members and non-members).
    """
    n_in = int((features.flags == 1).sum())
    n_out = int((features.flags == 0).sum())
    if n_in != n_out:
        raise ValueError(f"unbalanced evaluation set: {n_in} members vs {n_out} non-members")
    scores = np.empty(len(features))
    if attack.kind == "wb":
        scores[:] = attack.classifiers[-1].score(features.features)
    else:
        for c, clf in attack.classifiers.items():
            rows = np.flatnonzero(features.labels == c)
            if len(rows):
                scores[rows] = clf.score(features.features[rows])
    return scores, features.flags.copy()


def train_shadows(dataset, layout: AttackLayout, layer_sizes, fit_config,
                  privacy, seeds) -> list[nn.Network]:
    """Train one model per shadow pair, mirroring the target's privacy mode.

    privacy is a runner PrivacySpec (mode none/ldp/cdp); each shadow gets its
    own seed. LDP shadows train on freshly perturbed copies of their train
    split; CDP shadows use the same optimizer parameters as the target.
    """
    from . import runner  # runner owns PrivacySpec and the single-model trainer

    if len(seeds) != len(layout.shadow_pairs):
        raise ValueError("need one seed per shadow")
    nets = []
    for (train_idx, test_idx), seed in zip(layout.shadow_pairs, seeds):
        net, _, _ = runner.train_private_model(
            dataset.subset(train_idx), dataset.subset(test_idx),
            layer_sizes, fit_config, privacy, seed)
        nets.append(net)
    return nets
