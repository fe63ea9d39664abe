"""Model parameters and the forward pass for multi-dimensional graph convolutions.

Node representations are dense float64 matrices with one column per node. Each
layer projects the shared ("general") representation into one space per
dimension, aggregates within each dimension over graph neighbors and across
dimensions with attention weights over the projection matrices, blends the two
aggregates, and recombines the per-dimension results into the next shared
representation. A final per-dimension projection scores node pairs for link
likelihood.

The forward pass is a pure function of (parameters, inputs): parameters are
read-only during evaluation and disjoint node batches may run concurrently.
"""

from dataclasses import dataclass, field

import numpy as np

from .graph import normalize_adjacency, sample_neighbors
from .seeding import ensure_generator
from .validation import check_positive_int, check_unit_interval

__all__ = [
    "LayerParams",
    "ModelParams",
    "init_params",
    "project_to_dimensions",
    "attention_weights",
    "within_dim_aggregate",
    "within_dim_aggregate_sampled",
    "across_dim_aggregate",
    "blend",
    "combine_dimensions",
    "forward",
    "link_probability",
    "dimension_representation",
    "sigmoid",
    "SCORE_CLIP",
]

SCORE_CLIP = 30.0  # pair scores are clipped to +-SCORE_CLIP before the sigmoid

def _sigmoid_raw(x):
    return 1.0 / (1.0 + np.exp(-x))


def _sigmoid_grad(pre):
    s = _sigmoid_raw(pre)
    return s * (1.0 - s)


ACTIVATIONS = {
    "relu": (lambda x: np.maximum(x, 0.0), lambda pre: (pre > 0.0).astype(np.float64)),
    "tanh": (np.tanh, lambda pre: 1.0 - np.tanh(pre) ** 2),
    "sigmoid": (_sigmoid_raw, _sigmoid_grad),
    "identity": (lambda x: x, np.ones_like),
}


def activation_fn(name):
    try:
        return ACTIVATIONS[name][0]
    except KeyError:
        raise ValueError(f"unknown activation '{name}'") from None


def activation_grad(name):
    return ACTIVATIONS[name][1]


def sigmoid(x):
    """Logistic function with the argument clipped to +-SCORE_CLIP."""
    return 1.0 / (1.0 + np.exp(-np.clip(x, -SCORE_CLIP, SCORE_CLIP)))


@dataclass
class LayerParams:
    """Weights of one convolution layer.

    ``proj`` holds the D per-dimension projection matrices stacked as
    (D, q, l); ``combine`` maps the concatenated per-dimension results back to
    the next shared width as (l_out, D*q); ``attn`` is the (q, q) bilinear form
    scoring projection-matrix similarity between dimensions.
    """

    proj: np.ndarray
    combine: np.ndarray
    attn: np.ndarray

    def __post_init__(self):
        d, q, l = self.proj.shape
        if self.combine.shape[1] != d * q:
            raise ValueError(
                f"combine expects {d * q} input rows, got {self.combine.shape[1]}"
            )
        if self.attn.shape != (q, q):
            raise ValueError(f"attn must be ({q}, {q}), got {self.attn.shape}")

    @property
    def num_dims(self):
        return self.proj.shape[0]

    @property
    def proj_width(self):
        return self.proj.shape[1]

    @property
    def in_width(self):
        return self.proj.shape[2]

    @property
    def out_width(self):
        return self.combine.shape[0]


@dataclass
class ModelParams:
    """Full parameter set: K layers plus per-dimension output projections.

    ``out_proj`` stacks D square (w, w) matrices applied to the final shared
    representation when scoring links in a given dimension. ``alpha`` weighs
    across-dimension against within-dimension aggregation; ``attention_mode``
    "uniform" fixes every across-dimension weight to 1/D instead of learning
    them (the no-attention variant).
    """

    layers: list = field(default_factory=list)
    out_proj: np.ndarray = None
    alpha: float = 0.5
    activation: str = "tanh"
    attention_mode: str = "bilinear"

    def __post_init__(self):
        if not self.layers:
            raise ValueError("need at least one layer")
        check_unit_interval("alpha", self.alpha)
        if self.activation not in ACTIVATIONS:
            raise ValueError(f"unknown activation '{self.activation}'")
        if self.attention_mode not in ("bilinear", "uniform"):
            raise ValueError(f"unknown attention mode '{self.attention_mode}'")
        d = self.layers[0].num_dims
        w = self.layers[-1].out_width
        if self.out_proj.shape != (d, w, w):
            raise ValueError(f"out_proj must be ({d}, {w}, {w}), got {self.out_proj.shape}")

    @property
    def num_dims(self):
        return self.layers[0].num_dims

    @property
    def num_layers(self):
        return len(self.layers)

    @property
    def embed_width(self):
        return self.layers[-1].out_width

    @property
    def in_width(self):
        return self.layers[0].in_width

    def tensors(self):
        """Yield (name, array) for every trainable tensor, in a fixed order."""
        for k, layer in enumerate(self.layers):
            for d in range(layer.num_dims):
                yield f"layers.{k}.proj.{d}", layer.proj[d]
            yield f"layers.{k}.combine", layer.combine
            yield f"layers.{k}.attn", layer.attn
        for d in range(self.num_dims):
            yield f"out.{d}", self.out_proj[d]

    def copy(self):
        layers = [
            LayerParams(l.proj.copy(), l.combine.copy(), l.attn.copy()) for l in self.layers
        ]
        return ModelParams(layers, self.out_proj.copy(), self.alpha,
                           self.activation, self.attention_mode)


def _glorot(rng, shape, fan_in, fan_out):
    limit = np.sqrt(6.0 / (fan_in + fan_out))
    return rng.uniform(-limit, limit, size=shape)


def init_params(num_dims, layer_widths, proj_widths, alpha, rng,
                activation="tanh", attention_mode="bilinear"):
    """Initialize parameters for ``len(proj_widths)`` layers.

    ``layer_widths`` lists the shared-representation widths [l_0, ..., l_K]
    and ``proj_widths`` the per-dimension widths [q_0, ..., q_{K-1}]. Weight
    matrices draw from the uniform +-sqrt(6 / (fan_in + fan_out)) range; the
    bilinear attention form starts at identity scaled by 1/q so initial
    attention reflects raw projection similarity without saturating.
    """
    if len(layer_widths) != len(proj_widths) + 1:
        raise ValueError("layer_widths must have one more entry than proj_widths")
    rng = ensure_generator(rng)
    layers = []
    for l_in, q, l_out in zip(layer_widths[:-1], proj_widths, layer_widths[1:]):
        proj = _glorot(rng, (num_dims, q, l_in), l_in, q)
        combine = _glorot(rng, (l_out, num_dims * q), num_dims * q, l_out)
        # identity / q keeps initial trace scores O(1); a plain identity makes
        # the self-trace ~q, saturating the softmax and freezing attention
        layers.append(LayerParams(proj, combine, np.eye(q) / q))
    w = layer_widths[-1]
    out_proj = _glorot(rng, (num_dims, w, w), w, w)
    return ModelParams(layers, out_proj, alpha, activation, attention_mode)


def project_to_dimensions(H, layer, activation="tanh"):
    """Project the shared representation into each dimension: act(W_d H).

    Returns the D per-dimension representations stacked as (D, q, n).
    """
    H = np.asarray(H, dtype=np.float64)
    if H.shape[0] != layer.in_width:
        raise ValueError(f"representation width {H.shape[0]} != layer input width {layer.in_width}")
    act = activation_fn(activation)
    return act(np.einsum("dql,ln->dqn", layer.proj, H))


def attention_weights(layer, mode="bilinear"):
    """Across-dimension weight matrix b with columns summing to 1.

    In bilinear mode the raw score of source dimension g for target dimension
    d is trace(W_g^T A W_d) with A the layer's attention form, normalized by a
    softmax over g per target column. Uniform mode returns 1/D everywhere.
    """
    d = layer.num_dims
    if mode == "uniform":
        return np.full((d, d), 1.0 / d)
    if mode != "bilinear":
        raise ValueError(f"unknown attention mode '{mode}'")
    mw = layer.attn @ layer.proj
    scores = np.tensordot(layer.proj, mw, axes=([1, 2], [1, 2]))
    scores = scores - scores.max(axis=0, keepdims=True)
    e = np.exp(scores)
    return e / e.sum(axis=0, keepdims=True)


def within_dim_aggregate(E, adj):
    """Neighborhood average for one dimension under a row-normalized adjacency.

    Column i of the result is sum_j adj[i, j] * E[:, j]; rows of ``adj`` sum
    to 1, so constant representations are preserved exactly.
    """
    if adj.shape[0] != E.shape[1]:
        raise ValueError(f"adjacency is {adj.shape[0]} nodes, representation has {E.shape[1]} columns")
    return (adj @ E.T).T


def _mean_over_samples(E, sample_idx):
    """Average sampled columns: out[:, r] = mean_t E[:, sample_idx[r, t]]."""
    return E[:, sample_idx].mean(axis=2)


def within_dim_aggregate_sampled(E, graph, dim, s, rng):
    """Neighborhood average estimated from ``s`` sampled pool members per node.

    Equals the full aggregation in expectation when a node's normalized row is
    uniform over its pool. Deterministic under a fixed generator state.
    """
    check_positive_int("s", s)
    rng = ensure_generator(rng)
    n = graph.num_nodes
    if E.shape[1] != n:
        raise ValueError(f"representation has {E.shape[1]} columns, graph has {n} nodes")
    idx = np.empty((n, s), dtype=np.int64)
    for node in range(n):
        idx[node] = sample_neighbors(graph, node, dim, s, rng)
    return _mean_over_samples(E, idx)


def across_dim_aggregate(E_all, b):
    """Weighted average over dimensions: result_d = sum_g b[g, d] * E_g.

    The sum runs over every source dimension including g = d.
    """
    E_all = np.asarray(E_all)
    if E_all.ndim != 3:
        raise ValueError("expected per-dimension representations stacked as (D, q, n)")
    if b.shape != (E_all.shape[0], E_all.shape[0]):
        raise ValueError(f"weight matrix must be ({E_all.shape[0]}, {E_all.shape[0]}), got {b.shape}")
    return np.einsum("gd,gqn->dqn", b, E_all)


def blend(Hw, Ha, alpha):
    """Convex combination (1 - alpha) * within + alpha * across.

    alpha = 0 and alpha = 1 return the corresponding input exactly.
    """
    check_unit_interval("alpha", alpha)
    if Hw.shape != Ha.shape:
        raise ValueError(f"shape mismatch {Hw.shape} vs {Ha.shape}")
    if alpha == 0.0:
        return Hw.copy()
    if alpha == 1.0:
        return Ha.copy()
    return (1.0 - alpha) * Hw + alpha * Ha


def combine_dimensions(H_all, layer, activation="tanh"):
    """Recombine per-dimension results: act(W . concat_d H_d).

    Concatenation is vertical in dimension order 0..D-1.
    """
    H_all = np.asarray(H_all)
    d, q, n = H_all.shape
    if (d, q) != (layer.num_dims, layer.proj_width):
        raise ValueError(
            f"expected ({layer.num_dims}, {layer.proj_width}, n) inputs, got {H_all.shape}"
        )
    act = activation_fn(activation)
    return act(layer.combine @ H_all.reshape(d * q, n))


def forward(model, X, graph, sample_size=None, rng=None):
    """Run the full layer stack and return the final representation Z.

    With ``sample_size`` unset every layer aggregates over the exact
    normalized neighborhoods; otherwise each node averages ``sample_size``
    sampled pool members per dimension (a training-time economy).
    """
    X = np.asarray(X, dtype=np.float64)
    if X.shape != (model.in_width, graph.num_nodes):
        raise ValueError(
            f"input must be ({model.in_width}, {graph.num_nodes}), got {X.shape}"
        )
    if sample_size is not None:
        rng = ensure_generator(rng)
    else:
        adjs = [normalize_adjacency(graph, d) for d in range(graph.num_dims)]
    H = X
    for layer in model.layers:
        E = project_to_dimensions(H, layer, model.activation)
        b = attention_weights(layer, model.attention_mode)
        if sample_size is None:
            Hw = np.stack([within_dim_aggregate(E[d], adjs[d]) for d in range(model.num_dims)])
        else:
            Hw = np.stack([
                within_dim_aggregate_sampled(E[d], graph, d, sample_size, rng)
                for d in range(model.num_dims)
            ])
        Ha = across_dim_aggregate(E, b)
        Hd = blend(Hw, Ha, model.alpha)
        H = combine_dimensions(Hd, layer, model.activation)
    return H


def dimension_representation(model, Z, dim):
    """Project the final representation into one dimension's link space."""
    if not 0 <= dim < model.num_dims:
        raise ValueError(f"dimension {dim} out of range")
    return model.out_proj[dim] @ Z


def link_probability(Z, i, j, dim, model):
    """Probability of a link between nodes i and j in ``dim``.

    The score is the inner product of the two projected columns, squashed by
    the logistic function; it is symmetric in (i, j).
    """
    if not (0 <= i < Z.shape[1] and 0 <= j < Z.shape[1]):
        raise ValueError("node index out of range")
    if not 0 <= dim < model.num_dims:
        raise ValueError(f"dimension {dim} out of range")
    u = model.out_proj[dim] @ Z[:, [i, j]]
    return float(sigmoid(u[:, 0] @ u[:, 1]))
