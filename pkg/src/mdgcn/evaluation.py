"""Evaluation protocols: link prediction with pair features, node classification.

Metrics and the classifier are implemented in-house: rank-based AUC with
midrank tie handling, macro/micro F1, and one-vs-rest logistic regression
trained by full-batch gradient descent from a zero initialization (so results
are deterministic). Evaluations over ratios, splits and dimensions are
independent; each consumes its own seeded generator.
"""

from dataclasses import dataclass, field

import numpy as np

from .graph import split_links
from .model import dimension_representation
from .seeding import ensure_generator
from .training import train
from .validation import check_dim, check_positive_int

__all__ = [
    "EvalReport",
    "auc_score",
    "hadamard_features",
    "train_logreg",
    "logreg_scores",
    "logreg_predict",
    "f1_scores",
    "sample_noneighbor_pairs",
    "link_prediction_eval",
    "node_classification_eval",
]

LOGREG_L2 = 1e-4
LOGREG_LR = 0.1
LOGREG_ITERS = 500


@dataclass
class EvalReport:
    """Metric rows for one evaluation task plus its setting descriptors.

    Each row is a dict with keys task, dim, ratio, split, metric, value; dim
    and split may be None where not applicable. ``meta`` records seeds and
    fixed hyper-parameters of the protocol.
    """

    task: str
    rows: list = field(default_factory=list)
    meta: dict = field(default_factory=dict)

    def add(self, metric, value, dim=None, ratio=None, split=None):
        value = float(value)
        if not 0.0 <= value <= 1.0:
            raise ValueError(f"metric {metric} out of [0, 1]: {value}")
        self.rows.append({
            "task": self.task, "dim": dim, "ratio": ratio,
            "split": split, "metric": metric, "value": value,
        })

    def value(self, metric, **keys):
        """Single value for ``metric`` among rows matching ``keys``."""
        hits = [r["value"] for r in self.rows
                if r["metric"] == metric and all(r[k] == v for k, v in keys.items())]
        if len(hits) != 1:
            raise KeyError(f"{len(hits)} rows match metric={metric} {keys}")
        return hits[0]

    def kv_lines(self):
        """Machine-readable lines: 'task dim ratio split metric value'."""
        def fmt(x):
            if x is None:
                return "-"
            if isinstance(x, float):
                return f"{x:g}"
            return str(x)

        return [
            f"{r['task']} {fmt(r['dim'])} {fmt(r['ratio'])} {fmt(r['split'])} "
            f"{r['metric']} {r['value']:.6f}"
            for r in self.rows
        ]

    def table(self):
        """Aligned human-readable table with a meta header."""
        lines = [f"task: {self.task}"]
        for key in sorted(self.meta):
            lines.append(f"  {key}: {self.meta[key]}")
        header = f"{'dim':>5} {'ratio':>7} {'split':>6} {'metric':>10} {'value':>9}"
        lines.append(header)
        lines.append("-" * len(header))
        for r in self.rows:
            dim = "-" if r["dim"] is None else r["dim"]
            ratio = "-" if r["ratio"] is None else f"{r['ratio']:g}"
            split = "-" if r["split"] is None else r["split"]
            lines.append(
                f"{dim!s:>5} {ratio:>7} {split!s:>6} {r['metric']:>10} {r['value']:>9.4f}"
            )
        return "\n".join(lines)


def auc_score(scores, labels):
    """Probability that a random positive outranks a random negative.

    Ties count one half (rank-sum with midranks). Both classes must be
    present.
    """
    scores = np.asarray(scores, dtype=np.float64)
    labels = np.asarray(labels)
    if scores.shape != labels.shape or scores.ndim != 1:
        raise ValueError("scores and labels must be equal-length 1-d arrays")
    pos = labels == 1
    n_pos = int(pos.sum())
    n_neg = len(labels) - n_pos
    if n_pos == 0 or n_neg == 0:
        raise ValueError("both classes must be present to compute AUC")
    _, inverse, counts = np.unique(scores, return_inverse=True, return_counts=True)
    ends = np.cumsum(counts)
    midranks = ends - (counts - 1) / 2.0  # 1-based average rank per distinct value
    ranks = midranks[inverse]
    return float((ranks[pos].sum() - n_pos * (n_pos + 1) / 2.0) / (n_pos * n_neg))


def hadamard_features(rep, pairs):
    """Pair features: row per pair, the elementwise product of the two columns."""
    pairs = np.asarray(pairs, dtype=np.int64).reshape(-1, 2)
    if len(pairs) and pairs.max() >= rep.shape[1]:
        raise ValueError("pair index out of range")
    return (rep[:, pairs[:, 0]] * rep[:, pairs[:, 1]]).T


def train_logreg(features, labels, l2=LOGREG_L2, iters=LOGREG_ITERS, lr=LOGREG_LR):
    """One-vs-rest logistic regression by full-batch gradient descent.

    Features are standardized to the training set's per-column mean and
    standard deviation (constant columns pass through unchanged), making the
    fixed step size scale-free. Weights and intercepts start at zero, so
    training is deterministic. The loss is the mean logistic loss per class
    plus an L2 penalty on the weights (not the intercepts); duplicating the
    dataset therefore leaves the fit unchanged. Returns a (weights,
    intercepts, mean, scale) tuple consumed by ``logreg_scores``.
    """
    X = np.asarray(features, dtype=np.float64)
    y = np.asarray(labels, dtype=np.int64)
    if X.ndim != 2 or len(X) != len(y):
        raise ValueError("features must be 2-d with one row per label")
    if not np.isfinite(X).all():
        raise ValueError("features must be finite")
    classes = int(y.max()) + 1 if len(y) else 0
    if len(np.unique(y)) < 2:
        raise ValueError("need at least two classes to train a classifier")
    mean = X.mean(axis=0)
    scale = X.std(axis=0)
    keep = scale > 0
    mean = np.where(keep, mean, 0.0)
    scale = np.where(keep, scale, 1.0)
    X = (X - mean) / scale
    n = len(y)
    W = np.zeros((classes, X.shape[1]))
    b = np.zeros(classes)
    targets = (y[None, :] == np.arange(classes)[:, None]).astype(np.float64)
    for _ in range(iters):
        logits = W @ X.T + b[:, None]
        p = 1.0 / (1.0 + np.exp(-np.clip(logits, -30.0, 30.0)))
        err = p - targets
        W -= lr * (err @ X / n + l2 * W)
        b -= lr * err.mean(axis=1)
    return W, b, mean, scale


def logreg_scores(weights, features):
    """Per-class one-vs-rest probabilities, shape (n, C)."""
    W, b, mean, scale = weights
    X = (np.asarray(features, dtype=np.float64) - mean) / scale
    logits = X @ W.T + b
    return 1.0 / (1.0 + np.exp(-np.clip(logits, -30.0, 30.0)))


def logreg_predict(weights, features):
    return logreg_scores(weights, features).argmax(axis=1)


def f1_scores(pred, truth):
    """(macro, micro) F1 over single-label multiclass predictions.

    Macro averages per-class F1 over the union of classes seen in truth or
    predictions, scoring absent classes 0; micro uses global counts and equals
    accuracy for single-label input.
    """
    pred = np.asarray(pred, dtype=np.int64)
    truth = np.asarray(truth, dtype=np.int64)
    if pred.shape != truth.shape or pred.ndim != 1:
        raise ValueError("pred and truth must be equal-length 1-d arrays")
    if len(pred) == 0:
        raise ValueError("need at least one prediction")
    classes = np.unique(np.concatenate([truth, pred]))
    f1s = []
    tp_all = fp_all = fn_all = 0
    for c in classes:
        tp = int(((pred == c) & (truth == c)).sum())
        fp = int(((pred == c) & (truth != c)).sum())
        fn = int(((pred != c) & (truth == c)).sum())
        denom = 2 * tp + fp + fn
        f1s.append(2 * tp / denom if denom else 0.0)
        tp_all += tp
        fp_all += fp
        fn_all += fn
    macro = float(np.mean(f1s))
    micro = 2 * tp_all / (2 * tp_all + fp_all + fn_all)
    return macro, float(micro)


def sample_noneighbor_pairs(graph, dim, count, rng):
    """Uniform random node pairs with no link in ``dim`` (and i != j).

    Rejection runs against the given graph, so passing the original
    (pre-removal) graph keeps held-out positives out of the negatives.
    """
    rng = ensure_generator(rng)
    if graph.num_nodes < 2:
        raise ValueError("need at least 2 nodes")
    out = np.empty((count, 2), dtype=np.int64)
    filled = 0
    while filled < count:
        i, j = rng.integers(0, graph.num_nodes, size=2)
        if i == j or graph.has_edge(dim, int(i), int(j)):
            continue
        out[filled] = (i, j)
        filled += 1
    return out


def link_prediction_eval(graph, dim, removed_fraction, config, rng, scorer=None,
                         split_index=0):
    """Held-out link prediction on one dimension, scored by AUC.

    A fraction of the dimension's links is removed (mirrored across
    dimensions), a model is trained on the remaining graph, and a binary
    classifier over elementwise-product pair features separates remaining
    links from random non-connected pairs. The test set pairs the removed
    links with an equal number of fresh non-connected pairs; negatives are
    rejected against the original graph so no held-out link re-enters as a
    negative.

    ``scorer(train_X, train_y, test_X, test_y)`` replaces the internal
    logistic regression when given (a hook for pipeline sanity checks; the
    default ignores ``test_y``).
    """
    check_dim(graph, dim)
    rng = ensure_generator(rng)
    split = split_links(graph, dim, removed_fraction, rng)
    params, Z = train(split.train_graph, None, config)
    rep_dim = dim if config.variant != "gcn_baseline" else 0
    rep = dimension_representation(params, Z, rep_dim)

    train_pos = split.train_graph.edges(dim)
    train_neg = sample_noneighbor_pairs(graph, dim, len(train_pos), rng)
    test_pos = split.test_positives
    test_neg = sample_noneighbor_pairs(graph, dim, len(test_pos), rng)

    train_X = hadamard_features(rep, np.concatenate([train_pos, train_neg]))
    train_y = np.concatenate([np.ones(len(train_pos), dtype=np.int64),
                              np.zeros(len(train_neg), dtype=np.int64)])
    test_X = hadamard_features(rep, np.concatenate([test_pos, test_neg]))
    test_y = np.concatenate([np.ones(len(test_pos), dtype=np.int64),
                             np.zeros(len(test_neg), dtype=np.int64)])

    if scorer is None:
        weights = train_logreg(train_X, train_y)
        scores = logreg_scores(weights, test_X)[:, 1]
    else:
        scores = np.asarray(scorer(train_X, train_y, test_X, test_y), dtype=np.float64)

    report = EvalReport(
        task="link_prediction",
        meta={
            "variant": config.variant, "train_seed": config.seed,
            "logreg_l2": LOGREG_L2, "logreg_lr": LOGREG_LR, "logreg_iters": LOGREG_ITERS,
        },
    )
    report.add("auc", auc_score(scores, test_y), dim=dim,
               ratio=removed_fraction, split=split_index)
    return report


def node_classification_eval(Z, labels, ratios=(0.1, 0.3, 0.5, 0.7, 0.9), splits=10,
                             rng=None):
    """Classify nodes from their representations at several training ratios.

    For each ratio, ``splits`` uniform random (stratification-free) splits are
    drawn; a logistic regression is trained on the labeled fraction using the
    columns of Z as features, and macro/micro F1 on the held-out nodes are
    reported per split together with their means (split "mean").
    """
    check_positive_int("splits", splits)
    rng = ensure_generator(rng)
    labels = np.asarray(labels, dtype=np.int64)
    keep = np.flatnonzero(labels >= 0)
    if len(np.unique(labels[keep])) < 2:
        raise ValueError("labels must cover at least two classes")
    F = np.asarray(Z, dtype=np.float64)[:, keep].T
    y = labels[keep]

    report = EvalReport(
        task="node_classification",
        meta={"splits": splits,
              "logreg_l2": LOGREG_L2, "logreg_lr": LOGREG_LR, "logreg_iters": LOGREG_ITERS},
    )
    for ratio in ratios:
        if not 0.0 < ratio < 1.0:
            raise ValueError(f"training ratio must lie in (0, 1), got {ratio}")
        k = int(ratio * len(y))
        if k < 1 or k >= len(y):
            raise ValueError(f"ratio {ratio} leaves an empty train or test side")
        macros, micros = [], []
        for split in range(splits):
            order = rng.permutation(len(y))
            tr, te = order[:k], order[k:]
            weights = train_logreg(F[tr], y[tr])
            macro, micro = f1_scores(logreg_predict(weights, F[te]), y[te])
            report.add("f1_macro", macro, ratio=ratio, split=split)
            report.add("f1_micro", micro, ratio=ratio, split=split)
            macros.append(macro)
            micros.append(micro)
        report.add("f1_macro", float(np.mean(macros)), ratio=ratio, split="mean")
        report.add("f1_micro", float(np.mean(micros)), ratio=ratio, split="mean")
    return report
