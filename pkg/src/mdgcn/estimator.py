"""Scikit-learn style estimator wrapping graph training.

The estimator treats a :class:`~mdgcn.graph.MultiDimGraph` as the input ``X``
of ``fit`` and exposes the learned node embeddings through ``transform``, so
the model composes with pipelines, ``clone`` and parameter search utilities.
"""

import numpy as np
from sklearn.base import BaseEstimator, TransformerMixin

from .graph import MultiDimGraph
from .model import link_probability, sigmoid
from .training import TrainConfig, train

__all__ = ["MultiDimGCN"]


class MultiDimGCN(BaseEstimator, TransformerMixin):
    """Node-embedding model for graphs with several relation types.

    Each layer projects a shared per-node representation into every relation
    dimension, averages over graph neighborhoods within each dimension and
    over dimensions with learned attention weights, and recombines the
    results. Training maximizes the likelihood of observed links against
    sampled non-links.

    Parameters
    ----------
    embed_width : int, default 64
        Width of the learned representations.
    alpha : float, default 0.5
        Blend between within-dimension (0) and across-dimension (1)
        aggregation.
    negatives : int, default 2
        Negative samples per positive link.
    sample_size : int, default 10
        Neighbors sampled per node and dimension during training.
    layers : int, default 1
        Number of convolution layers.
    learning_rate, beta1, beta2, epsilon : float
        Adam hyper-parameters.
    batch_size : int, default 512
        Positive links per minibatch.
    epochs : int, default 10
        Passes over the positive links.
    seed : int, default 0
        Master seed; fixes initialization, feature draws and sampling.
    variant : {"mgcn", "mgcn_noa", "gcn_baseline"}, default "mgcn"
        "mgcn_noa" replaces attention with uniform 1/D weights;
        "gcn_baseline" trains a single-dimension model on the union of all
        relation types.
    activation : {"relu", "tanh", "sigmoid", "identity"}, default "tanh"
    features : {"random", "spectral"}, default "random"
        Internally generated input representation: uniform random entries, or
        an eigenvalue-weighted spectral embedding of the aggregated graph.
    input_width : int or None
        Width of the internally generated input features (defaults to
        ``embed_width``); ignored when ``fit`` receives explicit features.

    Attributes
    ----------
    params_ : ModelParams
        Learned weights.
    embedding_ : ndarray of shape (n_nodes, embed_width)
        Final node representations, one row per node.
    loss_history_ : list of float
        Mean per-triplet loss per epoch.
    """

    def __init__(self, embed_width=64, alpha=0.5, negatives=2, sample_size=10,
                 layers=1, learning_rate=0.01, beta1=0.9, beta2=0.999, epsilon=1e-8,
                 batch_size=512, epochs=10, seed=0, variant="mgcn",
                 activation="tanh", features="random", input_width=None):
        self.embed_width = embed_width
        self.alpha = alpha
        self.negatives = negatives
        self.sample_size = sample_size
        self.layers = layers
        self.learning_rate = learning_rate
        self.beta1 = beta1
        self.beta2 = beta2
        self.epsilon = epsilon
        self.batch_size = batch_size
        self.epochs = epochs
        self.seed = seed
        self.variant = variant
        self.activation = activation
        self.features = features
        self.input_width = input_width

    def _config(self):
        return TrainConfig(
            embed_width=self.embed_width, alpha=self.alpha, negatives=self.negatives,
            sample_size=self.sample_size, layers=self.layers,
            learning_rate=self.learning_rate, beta1=self.beta1, beta2=self.beta2,
            epsilon=self.epsilon, batch_size=self.batch_size, epochs=self.epochs,
            seed=self.seed, variant=self.variant, activation=self.activation,
            features=self.features, input_width=self.input_width,
        ).validate()

    def fit(self, X, y=None, node_features=None):
        """Train on a graph.

        Parameters
        ----------
        X : MultiDimGraph
            The graph to embed.
        y : ignored
            Present for pipeline compatibility.
        node_features : ndarray of shape (width, n_nodes), optional
            Frozen input representation; generated per ``features`` when
            omitted.
        """
        if not isinstance(X, MultiDimGraph):
            raise TypeError(f"X must be a MultiDimGraph, got {type(X).__name__}")
        history = []
        params, Z = train(X, node_features, self._config(),
                          epoch_callback=lambda _, loss: history.append(loss))
        self.graph_ = X
        self.params_ = params
        self.loss_history_ = history
        self.embedding_ = Z.T.copy()
        return self

    def _check_fitted(self):
        if not hasattr(self, "embedding_"):
            raise RuntimeError("estimator is not fitted; call fit first")

    def transform(self, X=None):
        """Node embeddings of the fitted graph, shape (n_nodes, embed_width)."""
        self._check_fitted()
        if X is not None and X is not self.graph_:
            if not isinstance(X, MultiDimGraph) or X != self.graph_:
                raise ValueError("transform expects the graph seen during fit")
        return self.embedding_

    def predict_link_proba(self, pairs, dim):
        """Link probabilities for (i, j) pairs in one dimension."""
        self._check_fitted()
        pairs = np.asarray(pairs, dtype=np.int64).reshape(-1, 2)
        Z = self.embedding_.T
        rep = self.params_.out_proj[dim] @ Z
        scores = np.einsum("wp,wp->p", rep[:, pairs[:, 0]], rep[:, pairs[:, 1]])
        return sigmoid(scores)

    def link_probability(self, i, j, dim):
        self._check_fitted()
        return link_probability(self.embedding_.T, i, j, dim, self.params_)

    def dimension_embedding(self, dim):
        """Representations projected into one dimension's link space, row per node."""
        self._check_fitted()
        return (self.params_.out_proj[dim] @ self.embedding_.T).T
