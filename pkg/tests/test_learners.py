import csv
from pathlib import Path

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from pipeforge.learners import (
    DegenerateLabelsWarning,
    ModelKind,
    TrainingSet,
    gini_importance,
    kfold,
    logistic_loss_and_grad,
    train,
)

FIXTURES = Path(__file__).parent / "fixtures"


def load_gini_fixture():
    with open(FIXTURES / "gini_fixture.csv", newline="") as fh:
        rows = list(csv.DictReader(fh))
    X = np.array([[float(r["f0"]), float(r["f1"]), float(r["f2"])] for r in rows])
    y = np.array([float(r["y"]) for r in rows])
    return TrainingSet(X=X, y=y, feature_names=("f0", "f1", "f2"))


def replay_importance(tree, X, y):
    """Independent accounting: re-derive every node's impurity decrease by
    replaying the partitions on the raw training data."""

    def variance(values):
        return float(np.mean(values**2) - np.mean(values) ** 2)

    totals = {}
    n_root = len(y)

    def walk(node, rows):
        if tree.feature[node] < 0:
            return
        f = int(tree.feature[node])
        thr = float(tree.threshold[node])
        left_rows = rows[X[rows, f] <= thr]
        right_rows = rows[X[rows, f] > thr]
        n, nl, nr = len(rows), len(left_rows), len(right_rows)
        decrease = (
            variance(y[rows])
            - (nl / n) * variance(y[left_rows])
            - (nr / n) * variance(y[right_rows])
        )
        totals[f] = totals.get(f, 0.0) + (n / n_root) * decrease
        walk(int(tree.left[node]), left_rows)
        walk(int(tree.right[node]), right_rows)

    walk(0, np.arange(len(y)))
    return totals


class TestGiniImportance:
    def test_fixture_matches_hand_accounting(self):
        ts = load_gini_fixture()
        model = train(ModelKind.DECISION_TREE, ts, None, seed=0)
        importance = gini_importance(model)
        # hand-derived: root split on f0 (decrease 0.140625), each f1 child
        # split contributes (4/8)*0.015625; normalized 0.9 / 0.1 / 0
        assert importance["f0"] == pytest.approx(0.9, abs=1e-9)
        assert importance["f1"] == pytest.approx(0.1, abs=1e-9)
        assert importance["f2"] == pytest.approx(0.0, abs=1e-9)
        assert sum(importance.values()) == pytest.approx(1.0, abs=1e-9)

    def test_fixture_matches_replay_oracle(self):
        ts = load_gini_fixture()
        model = train(ModelKind.DECISION_TREE, ts, None, seed=0)
        importance = gini_importance(model)
        scaled = model.scaler.transform(ts.X)
        raw = replay_importance(model.trees[0], scaled, ts.y)
        total = sum(raw.values())
        for i, name in enumerate(ts.feature_names):
            assert importance[name] == pytest.approx(
                raw.get(i, 0.0) / total, abs=1e-9
            )

    def test_single_split_importance_is_one(self):
        X = np.array([[0.0], [0.0], [1.0], [1.0]])
        y = np.array([0.0, 0.0, 1.0, 1.0])
        ts = TrainingSet(X=X, y=y, feature_names=("only",))
        model = train(ModelKind.DECISION_TREE, ts, None, seed=0)
        assert gini_importance(model) == {"only": 1.0}

    def test_constant_feature_has_zero_importance(self):
        X = np.column_stack([np.array([0.0, 0.0, 1.0, 1.0]), np.ones(4)])
        y = np.array([0.0, 0.0, 1.0, 1.0])
        ts = TrainingSet(X=X, y=y, feature_names=("a", "b"))
        model = train(ModelKind.DECISION_TREE, ts, None, seed=0)
        importance = gini_importance(model)
        assert importance == {"a": 1.0, "b": 0.0}

    def test_sums_to_one_on_forests(self):
        rng = np.random.default_rng(0)
        X = rng.random((60, 5))
        y = rng.random(60)
        ts = TrainingSet(X=X, y=y, feature_names=tuple("abcde"))
        for kind in (
            ModelKind.RANDOM_FOREST,
            ModelKind.EXTREMELY_RANDOMIZED_TREES,
            ModelKind.GRADIENT_BOOSTED_TREES,
        ):
            model = train(kind, ts, {"n_trees": 10}, seed=1)
            importance = gini_importance(model)
            assert sum(importance.values()) == pytest.approx(1.0, abs=1e-9)
            assert all(v >= 0.0 for v in importance.values())

    def test_all_leaf_ensemble_is_an_error(self):
        X = np.random.default_rng(0).random((10, 2))
        y = np.full(10, 0.5)  # pure root, never splits
        ts = TrainingSet(X=X, y=y, feature_names=("a", "b"))
        model = train(ModelKind.DECISION_TREE, ts, None, seed=0)
        with pytest.raises(ValueError, match="no internal node"):
            gini_importance(model)

    def test_non_tree_kind_rejected(self):
        X = np.random.default_rng(0).random((10, 2))
        y = (X[:, 0] > 0.5).astype(float)
        ts = TrainingSet(X=X, y=y, feature_names=("a", "b"))
        model = train(ModelKind.LOGISTIC_REGRESSION, ts, None, seed=0)
        with pytest.raises(ValueError):
            gini_importance(model)


class TestTrainScore:
    def test_degenerate_labels_warn_and_score_prior(self):
        X = np.random.default_rng(0).random((8, 2))
        ts = TrainingSet(X=X, y=np.zeros(8), feature_names=("a", "b"))
        for kind in (ModelKind.LOGISTIC_REGRESSION, ModelKind.GAUSSIAN_NAIVE_BAYES):
            with pytest.warns(DegenerateLabelsWarning):
                model = train(kind, ts, None, seed=0)
            scores = model.score_rows(X)
            assert np.allclose(scores, 1.0 / 10.0)  # Laplace prior of 0/8

    def test_score_requires_matching_names(self, india_question):
        from pipeforge.features import ConfigVariant, FeatureConfig, extract

        X = np.random.default_rng(0).random((10, 28))
        y = (X[:, 0] > 0.5).astype(float)
        from pipeforge.features import feature_names

        names = feature_names(FeatureConfig(ConfigVariant.CF1))
        ts = TrainingSet(X=X, y=y, feature_names=names)
        model = train(ModelKind.DECISION_TREE, ts, None, seed=0)
        vec = extract(india_question, FeatureConfig(ConfigVariant.CF1))
        assert 0.0 <= model.score(vec) <= 1.0
        with pytest.raises(ValueError, match="feature names"):
            model.score(vec.project(("qt_what",)))

    def test_tree_memorization_scores_training_labels(self):
        X = np.array([[0.2], [0.4], [0.6], [0.8]])
        y = np.array([0.1, 0.9, 0.3, 0.7])
        ts = TrainingSet(X=X, y=y, feature_names=("f",))
        model = train(ModelKind.DECISION_TREE, ts, {"min_samples_leaf": 1}, seed=0)
        assert np.allclose(model.score_rows(X), y)

    def test_forest_of_identical_trees_equals_tree(self):
        X = np.array([[0.2], [0.4], [0.6], [0.8]])
        y = np.array([0.1, 0.9, 0.3, 0.7])
        ts = TrainingSet(X=X, y=y, feature_names=("f",))
        forest = train(
            ModelKind.RANDOM_FOREST,
            ts,
            {"n_trees": 5, "bootstrap": False, "min_samples_leaf": 1},
            seed=0,
        )
        tree = train(ModelKind.DECISION_TREE, ts, {"min_samples_leaf": 1}, seed=0)
        assert np.allclose(forest.score_rows(X), tree.score_rows(X))

    def test_gaussian_nb_separates(self):
        rng = np.random.default_rng(0)
        X = np.vstack([rng.normal(0, 0.1, (30, 2)), rng.normal(1, 0.1, (30, 2))])
        y = np.array([0.0] * 30 + [1.0] * 30)
        ts = TrainingSet(X=X, y=y, feature_names=("a", "b"))
        model = train(ModelKind.GAUSSIAN_NAIVE_BAYES, ts, None, seed=0)
        acc = np.mean((model.score_rows(X) > 0.5) == (y > 0.5))
        assert acc > 0.95


class TestGradientCheck:
    def test_analytic_matches_central_differences(self):
        rng = np.random.default_rng(12)
        step = 1e-5
        for _ in range(20):
            n = int(rng.integers(5, 30))
            d = int(rng.integers(1, 6))
            X = np.hstack([rng.random((n, d)), np.ones((n, 1))])
            y = (rng.random(n) > 0.5).astype(float)
            if y.min() == y.max():
                y[0] = 1.0 - y[0]
            w = rng.normal(size=d + 1)
            _, grad = logistic_loss_and_grad(w, X, y, 1e-3)
            numeric = np.zeros_like(w)
            for i in range(d + 1):
                e = np.zeros_like(w)
                e[i] = step
                up, _ = logistic_loss_and_grad(w + e, X, y, 1e-3)
                down, _ = logistic_loss_and_grad(w - e, X, y, 1e-3)
                numeric[i] = (up - down) / (2 * step)
            rel = np.abs(grad - numeric) / np.maximum(1e-8, np.abs(numeric))
            assert rel.max() < 1e-4


class TestKFold:
    def test_each_fold_single_item(self):
        plan = kfold([f"q{i}" for i in range(10)], 10, seed=0)
        assert plan.fold_sizes() == [1] * 10

    def test_uneven_ten_fold_split(self):
        plan = kfold([f"q{i}" for i in range(3253)], 10, seed=0)
        sizes = plan.fold_sizes()
        assert set(sizes) == {325, 326}
        assert sum(sizes) / 10 == pytest.approx(325.3)

    def test_determinism(self):
        ids = [f"q{i}" for i in range(57)]
        assert kfold(ids, 5, seed=3) == kfold(ids, 5, seed=3)
        assert kfold(ids, 5, seed=3) != kfold(ids, 5, seed=4)

    def test_too_few_items(self):
        with pytest.raises(ValueError):
            kfold(["a", "b"], 3)
        with pytest.raises(ValueError):
            kfold(["a", "b"], 1)

    @given(
        n=st.integers(min_value=5, max_value=200),
        k=st.integers(min_value=2, max_value=5),
        seed=st.integers(min_value=0, max_value=1000),
    )
    @settings(max_examples=40, deadline=None)
    def test_partition_properties(self, n, k, seed):
        ids = [f"q{i}" for i in range(n)]
        plan = kfold(ids, k, seed=seed)
        assert sorted(plan.assignments) == sorted(ids)
        sizes = plan.fold_sizes()
        assert max(sizes) - min(sizes) <= 1
        for fold in range(k):
            test = set(plan.test_ids(fold))
            trainset = set(plan.train_ids(fold))
            assert test | trainset == set(ids)
            assert not (test & trainset)


def test_training_set_validation():
    with pytest.raises(ValueError):
        TrainingSet(X=np.zeros((2, 2)), y=np.zeros(3), feature_names=("a", "b"))
    with pytest.raises(ValueError):
        TrainingSet(X=np.zeros((2, 2)), y=np.array([0.0, 1.5]), feature_names=("a", "b"))
    with pytest.raises(ValueError):
        TrainingSet(X=np.zeros((0, 2)), y=np.zeros(0), feature_names=("a", "b"))
