import numpy as np
import pytest

from dpmi import attacks, datasets, metrics, nn, runner
from conftest import tiny_net


@pytest.fixture(scope="module")
def pool():
    return datasets.gen_unbalanced_carts(4, 400, 30, gamma=0.5, seed=21)


class TestPartition:
    def test_capacity_boundary_single_shadow(self, pool):
        # dataset of exactly 4n: the shadow pair fills the 2n remainder
        ds = pool.subset(range(200))
        layout = attacks.partition_attack_data(ds, 50, 1, seed=1)
        tr, te = layout.shadow_pairs[0]
        used = np.concatenate([layout.target_train, layout.target_test, tr, te])
        assert len(np.unique(used)) == 200

    def test_shadow_never_touches_target_train(self, pool):
        layout = attacks.partition_attack_data(pool, 100, 5, seed=2)
        target = set(layout.target_train) | set(layout.target_test)
        for tr, te in layout.shadow_pairs:
            assert not target & set(tr)
            assert not target & set(te)
            assert not set(tr) & set(te)  # disjoint within a shadow
            assert len(tr) == len(te)

    def test_deterministic(self, pool):
        a = attacks.partition_attack_data(pool, 80, 3, seed=9)
        b = attacks.partition_attack_data(pool, 80, 3, seed=9)
        assert np.array_equal(a.target_train, b.target_train)
        for (x, y), (u, v) in zip(a.shadow_pairs, b.shadow_pairs):
            assert np.array_equal(x, u) and np.array_equal(y, v)

    def test_capacity_error(self, pool):
        with pytest.raises(ValueError):
            attacks.partition_attack_data(pool, 300, 0, seed=0)


def _fit_quick(train, test, seed, privacy=None):
    cfg = nn.FitConfig(epochs=40, batch_size=32, learning_rate=0.01, early_stop=False)
    spec = privacy or runner.PrivacySpec(mode="none")
    return runner.train_private_model(train, test, [16], cfg, spec, seed)


@pytest.fixture(scope="module")
def trained(pool):
    layout = attacks.partition_attack_data(pool, 100, 2, seed=3)
    train = pool.subset(layout.target_train)
    test = pool.subset(layout.target_test)
    net, report, eps = _fit_quick(train, test, seed=7)
    return layout, train, test, net


class TestTrainShadows:
    def test_zero_shadows(self, pool):
        layout = attacks.partition_attack_data(pool, 100, 0, seed=3)
        cfg = nn.FitConfig(epochs=5, batch_size=32)
        nets = attacks.train_shadows(pool, layout, [16], cfg,
                                     runner.PrivacySpec(mode="none"), [])
        assert nets == []

    def test_cdp_shadows_share_target_epsilon(self, pool):
        layout = attacks.partition_attack_data(pool, 60, 2, seed=4,
                                               shadow_size=60)
        privacy = runner.PrivacySpec(mode="cdp", z=2.0, clip=4.0, lot_size=30)
        train = pool.subset(layout.target_train)
        test = pool.subset(layout.target_test)
        _, _, target_eps = _fit_quick(train, test, seed=1, privacy=privacy)
        for pair, seed in zip(layout.shadow_pairs, (11, 12)):
            str_, ste = pool.subset(pair[0]), pool.subset(pair[1])
            _, _, eps = _fit_quick(str_, ste, seed=seed, privacy=privacy)
            assert eps == pytest.approx(target_eps, rel=1e-12)

    def test_ldp_shadow_trains_on_perturbed_data(self, pool):
        privacy = runner.PrivacySpec(mode="ldp", eps_i=0.5)
        rng = np.random.default_rng(0)
        perturbed, eps = runner.perturb_dataset(pool, privacy, rng)
        hamming = (perturbed.features != pool.features).mean()
        assert hamming > 0.0
        assert eps == pytest.approx(0.5 * pool.width)

        # and the trained weights actually differ from a raw-data run
        layout = attacks.partition_attack_data(pool, 60, 1, seed=5)
        tr = pool.subset(layout.shadow_pairs[0][0])
        te = pool.subset(layout.shadow_pairs[0][1])
        net_ldp, _, _ = _fit_quick(tr, te, seed=2, privacy=privacy)
        net_raw, _, _ = _fit_quick(tr, te, seed=2)
        assert not np.allclose(net_ldp.layers[0].weights, net_raw.layers[0].weights)

    def test_seed_count_mismatch(self, pool):
        layout = attacks.partition_attack_data(pool, 60, 2, seed=5)
        with pytest.raises(ValueError):
            attacks.train_shadows(pool, layout, [16], nn.FitConfig(),
                                  runner.PrivacySpec(mode="none"), [1])


class TestExtractFeatures:
    def test_bb_flags_and_width(self, trained):
        layout, train, test, net = trained
        fin = attacks.extract_bb_features(net, train, 1)
        fout = attacks.extract_bb_features(net, test, 0)
        assert fin.features.shape == (100, 4)  # width = class count
        assert (fin.flags == 1).all() and (fout.flags == 0).all()
        assert np.array_equal(fin.labels, train.labels)

    def test_bb_features_ignore_flag_argument(self, trained):
        _, train, _, net = trained
        a = attacks.extract_bb_features(net, train, 1)
        b = attacks.extract_bb_features(net, train, 0)
        assert np.array_equal(a.features, b.features)

    def test_wb_loss_feature_matches_per_example_grads(self, trained):
        _, train, _, net = trained
        fs = attacks.extract_wb_features(net, train, 1)
        peg = nn.per_example_grads(net, nn.Batch(train.features, train.labels))
        n_classes = train.n_classes
        assert np.array_equal(fs.features[:, 2 * n_classes], peg.losses)

    def test_wb_width_constant(self, trained):
        _, train, test, net = trained
        a = attacks.extract_wb_features(net, train, 1)
        b = attacks.extract_wb_features(net, test, 0)
        # one-hot C + softmax C + loss + overall norm + C row norms
        assert a.features.shape[1] == b.features.shape[1] == 3 * 4 + 2

    def test_wb_memorized_member_has_tiny_loss(self, pool):
        layout = attacks.partition_attack_data(pool, 30, 0, seed=8)
        train = pool.subset(layout.target_train)
        test = pool.subset(layout.target_test)
        cfg = nn.FitConfig(epochs=300, batch_size=30, learning_rate=0.01,
                           early_stop=False)
        net = tiny_net([30, 32, 4], seed=3)
        nn.fit(net, train, test, cfg, np.random.default_rng(1))
        fs = attacks.extract_wb_features(net, train, 1)
        losses = fs.features[:, 2 * 4]
        grads = fs.features[:, 2 * 4 + 1]
        assert np.median(losses) < 1e-2
        assert np.median(grads) < 1e-2

    def test_raw_record_rule_digest(self, pool):
        # LDP mode: extraction inputs hash equal to the raw split's hash
        d = {
            "name": "t", "dataset": {"generator": "unbalanced_carts",
                                     "params": {"n_classes": 4, "n": 240, "width": 30,
                                                "gamma": 0.5}},
            "model": {"hidden": [16]},
            "training": {"epochs": 10, "batch_size": 32, "early_stop": False},
            "privacy": {"mode": "ldp", "eps_i": attacks_eps_for_rho_09()},
            "attacks": ["bb"], "split": {"n": 60}, "shadows": 2,
            "repeats": 1, "seed": 21,
        }
        cfg = runner.parse_config(d)
        dataset, boundary = runner.build_dataset(cfg)
        res = runner.run_job(cfg, 0, (dataset, boundary))
        layout = runner._partition(cfg, dataset, boundary,
                                   runner._stream_seed(cfg.seed, 0, runner._S_SPLIT))
        expect = runner._multi_digest([dataset.subset(layout.target_train),
                                       dataset.subset(layout.target_test)])
        assert res.digests["bb"]["eval_inputs"] == expect


def attacks_eps_for_rho_09():
    from dpmi import mechanisms
    return mechanisms.rr_budget(0.9)


def _synthetic_features(n, sep, seed, n_classes=3):
    """Member rows drawn above non-member rows by sep, plus labels."""
    rng = np.random.default_rng(seed)
    flags = np.repeat([1, 0], n // 2)
    feats = rng.normal(size=(n, 4))
    feats[flags == 1, 0] += sep
    labels = rng.integers(n_classes, size=n)
    return attacks.FeatureSet(feats, labels, flags)


class TestAttackModel:
    def test_separable_features_reach_auc_one(self):
        fs = _synthetic_features(200, sep=8.0, seed=0)
        cfg = attacks.AttackTrainConfig(epochs=120, wb_ensemble=1)
        model = attacks.train_attack_model(fs, "wb", 3, cfg, np.random.default_rng(1))
        scores, flags = attacks.score_membership(model, fs)
        assert metrics.auc(metrics.roc_curve(scores, flags)) == 1.0

    def test_label_shuffled_features_give_chance_auc(self):
        rng = np.random.default_rng(2)
        fs = _synthetic_features(400, sep=0.0, seed=3)  # no signal at all
        cfg = attacks.AttackTrainConfig(epochs=60, wb_ensemble=1)
        model = attacks.train_attack_model(fs, "wb", 3, cfg, rng)
        hold = _synthetic_features(400, sep=0.0, seed=4)
        scores, flags = attacks.score_membership(model, hold)
        assert metrics.auc(metrics.roc_curve(scores, flags)) == pytest.approx(0.5, abs=0.05)

    def test_bb_missing_class_falls_back_to_half(self):
        fs = _synthetic_features(100, sep=4.0, seed=5, n_classes=2)
        cfg = attacks.AttackTrainConfig(epochs=50)
        model = attacks.train_attack_model(fs, "bb", 3, cfg, np.random.default_rng(6))
        assert 2 in model.fallback_classes
        probe = attacks.FeatureSet(np.zeros((2, 4)), np.array([2, 2]),
                                   np.array([1, 0]))
        scores, _ = attacks.score_membership(model, probe)
        assert np.all(scores == 0.5)

    def test_deterministic_given_rng(self):
        fs = _synthetic_features(120, sep=1.0, seed=7)
        cfg = attacks.AttackTrainConfig(epochs=40)
        runs = []
        for _ in range(2):
            model = attacks.train_attack_model(fs, "bb", 3, cfg,
                                               np.random.default_rng(8))
            scores, _ = attacks.score_membership(model, fs)
            runs.append(scores)
        assert np.array_equal(runs[0], runs[1])


class TestScoreMembership:
    def test_constant_attack_gives_half_auc(self):
        model = attacks.AttackModel("bb", {c: attacks._BinaryClassifier(None)
                                           for c in range(3)})
        fs = _synthetic_features(60, sep=2.0, seed=9)
        scores, flags = attacks.score_membership(model, fs)
        curve = metrics.roc_curve(scores, flags)
        assert metrics.auc(curve) == 0.5

    def test_oracle_scores_give_auc_one(self):
        fs = _synthetic_features(60, sep=0.0, seed=10)
        curve = metrics.roc_curve(fs.flags.astype(float), fs.flags)
        assert metrics.auc(curve) == 1.0

    def test_unbalanced_evaluation_rejected(self):
        model = attacks.AttackModel("bb", {0: attacks._BinaryClassifier(None)})
        fs = attacks.FeatureSet(np.zeros((3, 2)), np.zeros(3, np.int64),
                                np.array([1, 1, 0]))
        with pytest.raises(ValueError):
            attacks.score_membership(model, fs)

    def test_scores_in_unit_interval(self):
        fs = _synthetic_features(100, sep=2.0, seed=11)
        cfg = attacks.AttackTrainConfig(epochs=60)
        model = attacks.train_attack_model(fs, "bb", 3, cfg, np.random.default_rng(12))
        scores, _ = attacks.score_membership(model, fs)
        assert scores.min() >= 0.0 and scores.max() <= 1.0
