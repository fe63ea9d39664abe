import numpy as np
import pytest

from mdgcn import (
    EvalReport,
    MultiDimGraph,
    TrainConfig,
    auc_score,
    f1_scores,
    generate_synthetic,
    hadamard_features,
    link_prediction_eval,
    logreg_predict,
    logreg_scores,
    named_stream,
    node_classification_eval,
    train_logreg,
)
from mdgcn.evaluation import sample_noneighbor_pairs


def brute_force_auc(scores, labels):
    """Independent oracle: count positive-negative pairs directly."""
    scores = np.asarray(scores, dtype=float)
    pos = scores[np.asarray(labels) == 1]
    neg = scores[np.asarray(labels) == 0]
    wins = (pos[:, None] > neg[None, :]).sum()
    ties = (pos[:, None] == neg[None, :]).sum()
    return (wins + 0.5 * ties) / (len(pos) * len(neg))


class TestAuc:
    def test_perfect_ranking(self):
        assert auc_score([0.9, 0.1], [1, 0]) == 1.0

    def test_all_ties_give_half(self):
        assert auc_score([0.3, 0.3, 0.3, 0.3], [1, 0, 1, 0]) == 0.5

    def test_mixed_example(self):
        scores = np.array([0.8, 0.6, 0.4])
        labels = np.array([1, 0, 1])
        expected = brute_force_auc(scores, labels)  # one win, one loss -> 0.5
        assert expected == 0.5
        assert auc_score(scores, labels) == expected

    def test_matches_brute_force_on_random_sets(self):
        rng = np.random.default_rng(0)
        for _ in range(40):
            n = int(rng.integers(2, 400))
            labels = rng.integers(0, 2, size=n)
            if labels.min() == labels.max():
                labels[0] = 1 - labels[0]
            scores = np.round(rng.normal(size=n), 2)  # rounding forces ties
            assert auc_score(scores, labels) == pytest.approx(
                brute_force_auc(scores, labels), abs=1e-12
            )

    def test_monotone_transform_invariance(self):
        rng = np.random.default_rng(1)
        scores = rng.normal(size=200)
        labels = rng.integers(0, 2, size=200)
        labels[0], labels[1] = 0, 1
        base = auc_score(scores, labels)
        for f in (lambda s: 2 * s + 1, np.exp, np.arctan):
            assert auc_score(f(scores), labels) == base

    def test_single_class_rejected(self):
        with pytest.raises(ValueError):
            auc_score([0.1, 0.2], [1, 1])


class TestHadamard:
    def test_all_ones(self):
        rep = np.ones((3, 2))
        assert np.array_equal(hadamard_features(rep, [(0, 1)]), np.ones((1, 3)))

    def test_zero_column(self):
        rep = np.array([[0.0, 5.0], [0.0, 7.0]])
        assert np.all(hadamard_features(rep, [(0, 1)]) == 0)

    def test_elementwise_product(self):
        rep = np.array([[1.0, 3.0], [2.0, 4.0]])
        assert hadamard_features(rep, [(0, 1)]).tolist() == [[3.0, 8.0]]

    def test_index_out_of_range(self):
        with pytest.raises(ValueError):
            hadamard_features(np.ones((2, 2)), [(0, 5)])


class TestLogreg:
    def test_linearly_separable(self):
        rng = np.random.default_rng(0)
        X = np.concatenate([rng.normal(-2, 0.3, size=(40, 2)), rng.normal(2, 0.3, size=(40, 2))])
        y = np.array([0] * 40 + [1] * 40)
        weights = train_logreg(X, y)
        assert (logreg_predict(weights, X) == y).all()

    def test_all_zero_features_learn_biases_only(self):
        X = np.zeros((40, 3))
        y = np.array([0, 1] * 20)
        W, b, mean, scale = train_logreg(X, y)
        assert np.all(W == 0.0)
        probs = logreg_scores((W, b, mean, scale), X)
        assert np.allclose(probs[:, 0], probs[:, 1])

    def test_duplicated_dataset_identical_weights(self):
        rng = np.random.default_rng(2)
        X = rng.normal(size=(30, 4))
        y = rng.integers(0, 3, size=30)
        y[:3] = [0, 1, 2]
        w1 = train_logreg(X, y)
        w2 = train_logreg(np.tile(X, (2, 1)), np.tile(y, 2))
        assert np.allclose(w1[0], w2[0], atol=1e-12)
        assert np.allclose(w1[1], w2[1], atol=1e-12)

    def test_single_class_rejected(self):
        with pytest.raises(ValueError):
            train_logreg(np.ones((5, 2)), np.zeros(5, dtype=int))

    def test_nonfinite_rejected(self):
        X = np.ones((4, 2))
        X[0, 0] = np.nan
        with pytest.raises(ValueError):
            train_logreg(X, np.array([0, 1, 0, 1]))


class TestF1:
    def test_perfect(self):
        assert f1_scores([0, 1, 2], [0, 1, 2]) == (1.0, 1.0)

    def test_degenerate_predictions(self):
        pred = [0, 0, 0, 0]
        truth = [0, 0, 1, 1]
        macro, micro = f1_scores(pred, truth)
        assert micro == pytest.approx(0.5)
        assert macro == pytest.approx((2.0 / 3.0) / 2.0)  # (F1_0 + 0) / 2

    def test_single_correct_example(self):
        assert f1_scores([3], [3]) == (1.0, 1.0)

    def test_micro_equals_accuracy(self):
        rng = np.random.default_rng(3)
        for _ in range(10):
            truth = rng.integers(0, 4, size=50)
            pred = rng.integers(0, 4, size=50)
            _, micro = f1_scores(pred, truth)
            assert micro == pytest.approx((pred == truth).mean())

    def test_empty_rejected(self):
        with pytest.raises(ValueError):
            f1_scores([], [])


class SpyGraph(MultiDimGraph):
    """Records every pair observable through neighbor and edge reads."""

    def __init__(self, graph):
        super().__init__(graph.num_nodes, graph.indptr, graph.indices,
                         labels=graph.labels, label_names=graph.label_names,
                         directed=graph.directed)
        self.seen = set()

    def _record(self, pairs):
        for i, j in pairs:
            self.seen.add((min(int(i), int(j)), max(int(i), int(j))))

    def neighbors(self, dim, node):
        out = super().neighbors(dim, node)
        self._record((node, j) for j in out)
        return out

    def edges(self, dim):
        out = super().edges(dim)
        self._record(map(tuple, out.tolist()))
        return out

    def edge_keys(self, dim):
        out = super().edge_keys(dim)
        self._record(zip(out // self.num_nodes, out % self.num_nodes))
        return out


def lp_config(**kw):
    base = dict(embed_width=8, epochs=2, batch_size=256, seed=0)
    base.update(kw)
    return TrainConfig(**base)


class TestLinkPredictionEval:
    def test_truth_oracle_scorer_gives_perfect_auc(self):
        g = generate_synthetic(60, 2, 2, 0.4, 0.05, 0.2, 0)
        oracle = lambda train_X, train_y, test_X, test_y: np.asarray(test_y, float)
        report = link_prediction_eval(g, 0, 0.3, lp_config(), named_stream(0, "lp"),
                                      scorer=oracle)
        assert report.value("auc", dim=0) == 1.0

    def test_untrained_random_embedding_is_chance_level(self):
        g = generate_synthetic(150, 2, 3, 0.15, 0.02, 0.3, 1)
        report = link_prediction_eval(g, 0, 0.2, lp_config(epochs=0), named_stream(1, "lp"))
        assert abs(report.value("auc", dim=0) - 0.5) <= 0.1

    def test_training_never_reads_removed_pairs(self, monkeypatch):
        import mdgcn.evaluation as ev

        g = generate_synthetic(50, 2, 2, 0.4, 0.05, 0.2, 2)
        captured = {}
        original = ev.split_links

        def spying_split(graph, dim, fraction, rng):
            split = original(graph, dim, fraction, rng)
            spy = SpyGraph(split.train_graph)
            captured["spy"] = spy
            captured["removed"] = {tuple(sorted(p)) for p in split.test_positives.tolist()}
            split.train_graph = spy
            return split

        monkeypatch.setattr(ev, "split_links", spying_split)
        link_prediction_eval(g, 0, 0.3, lp_config(), named_stream(2, "lp"))
        assert captured["spy"].seen  # training really read the graph
        assert not (captured["spy"].seen & captured["removed"])

    def test_report_is_machine_readable(self):
        g = generate_synthetic(60, 2, 2, 0.4, 0.05, 0.2, 3)
        report = link_prediction_eval(g, 1, 0.25, lp_config(), named_stream(3, "lp"))
        (line,) = report.kv_lines()
        task, dim, ratio, split, metric, value = line.split()
        assert (task, dim, ratio, metric) == ("link_prediction", "1", "0.25", "auc")
        assert 0.0 <= float(value) <= 1.0


class TestNodeClassificationEval:
    def test_separable_labels_classified_perfectly(self):
        rng = np.random.default_rng(0)
        labels = rng.integers(0, 2, size=90)
        labels[:2] = [0, 1]
        Z = rng.normal(size=(6, 90)) * 0.01
        Z[0] = labels * 10.0 - 5.0  # one coordinate determines the label
        report = node_classification_eval(Z, labels, ratios=(0.3, 0.7), splits=4,
                                          rng=named_stream(0, "nc"))
        for ratio in (0.3, 0.7):
            assert report.value("f1_micro", ratio=ratio, split="mean") >= 0.99

    def test_random_labels_score_at_chance(self):
        rng = np.random.default_rng(1)
        labels = np.repeat(np.arange(3), 60)
        rng.shuffle(labels)
        Z = rng.normal(size=(8, 180))
        report = node_classification_eval(Z, labels, ratios=(0.5,), splits=6,
                                          rng=named_stream(1, "nc"))
        micro = report.value("f1_micro", ratio=0.5, split="mean")
        assert abs(micro - 1.0 / 3.0) <= 0.1

    def test_single_cell_report_shape(self):
        rng = np.random.default_rng(2)
        labels = np.array([0, 1] * 20)
        Z = rng.normal(size=(4, 40))
        report = node_classification_eval(Z, labels, ratios=(0.5,), splits=1,
                                          rng=named_stream(2, "nc"))
        cells = {(r["ratio"], r["split"], r["metric"]) for r in report.rows}
        assert cells == {(0.5, 0, "f1_macro"), (0.5, 0, "f1_micro"),
                         (0.5, "mean", "f1_macro"), (0.5, "mean", "f1_micro")}

    def test_unlabeled_nodes_excluded(self):
        labels = np.array([0, 1, 0, 1, -1, -1, 0, 1, 0, 1])
        Z = np.random.default_rng(3).normal(size=(3, 10))
        report = node_classification_eval(Z, labels, ratios=(0.5,), splits=2,
                                          rng=named_stream(3, "nc"))
        assert report.rows  # runs on the 8 labeled nodes

    def test_single_class_rejected(self):
        Z = np.zeros((2, 6))
        with pytest.raises(ValueError):
            node_classification_eval(Z, np.zeros(6, dtype=int), rng=named_stream(4, "nc"))


class TestSampleNonNeighborPairs:
    def test_pairs_avoid_edges_and_self(self):
        g = generate_synthetic(30, 1, 2, 0.5, 0.1, 0.0, 0)
        pairs = sample_noneighbor_pairs(g, 0, 50, named_stream(5, "neg"))
        for i, j in pairs:
            assert i != j and not g.has_edge(0, i, j)


class TestEvalReport:
    def test_metric_range_enforced(self):
        report = EvalReport(task="x")
        with pytest.raises(ValueError):
            report.add("auc", 1.5)

    def test_table_contains_meta(self):
        report = EvalReport(task="demo", meta={"seed": 3})
        report.add("auc", 0.75, dim=0, ratio=0.2, split=0)
        text = report.table()
        assert "seed: 3" in text and "0.7500" in text
