"""Negative-sampled link-likelihood training over sampled neighborhoods.

Positive samples are the stored links as (i, j, dim) triplets; each positive
contributes ``n`` negatives drawn for the same (i, dim). Minibatches carry a
plan of per-layer sampled neighbor sets restricted to the involved nodes, so a
batch forward touches only the nodes reachable from the batch endpoints within
K sampling rounds. Gradients are exact analytic derivatives of the batch loss,
computed by a hand-written reverse pass; parameters update with mini-batch
Adam. The single-threaded loop is the reference mode and is bit-reproducible
for a fixed seed.

The aggregated-graph baseline variant collapses all dimensions into one and
runs the same layer stack with the across-dimension blend disabled.
"""

from dataclasses import dataclass, field

import numpy as np
from scipy import sparse

from .graph import aggregate_dimensions, normalize_adjacency
from .model import (
    SCORE_CLIP,
    activation_fn,
    activation_grad,
    attention_weights,
    forward,
    init_params,
)
from .seeding import ensure_generator, named_stream
from .validation import check_positive_int

__all__ = [
    "Triplet",
    "TrainConfig",
    "AdamState",
    "MiniBatch",
    "sample_negatives",
    "build_minibatch",
    "batch_forward",
    "compute_loss",
    "compute_gradients",
    "finite_difference_gradients",
    "adam_step",
    "train",
]

PROB_CLIP = 1e-12  # probabilities are clamped this far from {0, 1} before log

VARIANTS = ("mgcn", "mgcn_noa", "gcn_baseline")


@dataclass(frozen=True)
class Triplet:
    """A (node i, node j, dimension, label) training or evaluation sample."""

    i: int
    j: int
    d: int
    label: int


@dataclass
class TrainConfig:
    """Training hyper-parameters.

    ``negatives`` is the number of negative samples per positive link,
    ``sample_size`` the number of neighbors sampled per node and dimension in
    each aggregation round, ``layers`` the depth of the stack. ``features``
    picks the internally generated input representation ("random" entries in
    +-0.1, or "spectral" for an eigenvalue-weighted spectral embedding of the
    aggregated graph, mirroring the protocol of feeding a pretrained network
    embedding as the input); ``input_width`` defaults to ``embed_width`` and
    only matters for internally generated features.
    """

    embed_width: int = 64
    alpha: float = 0.5
    negatives: int = 2
    sample_size: int = 10
    layers: int = 1
    learning_rate: float = 0.01
    beta1: float = 0.9
    beta2: float = 0.999
    epsilon: float = 1e-8
    batch_size: int = 512
    epochs: int = 10
    seed: int = 0
    variant: str = "mgcn"
    activation: str = "tanh"
    features: str = "random"
    input_width: int | None = None

    def validate(self):
        check_positive_int("embed_width", self.embed_width)
        check_positive_int("negatives", self.negatives)
        check_positive_int("sample_size", self.sample_size)
        check_positive_int("layers", self.layers)
        check_positive_int("batch_size", self.batch_size)
        if self.epochs < 0:
            raise ValueError(f"epochs must be nonnegative, got {self.epochs}")
        if not 0.0 <= self.alpha <= 1.0:
            raise ValueError(f"alpha must lie in [0, 1], got {self.alpha}")
        if self.variant not in VARIANTS:
            raise ValueError(f"variant must be one of {VARIANTS}, got '{self.variant}'")
        if self.features not in ("random", "spectral"):
            raise ValueError(f"features must be 'random' or 'spectral', got '{self.features}'")
        if self.input_width is not None:
            check_positive_int("input_width", self.input_width)
        return self

    @property
    def effective_input_width(self):
        return self.embed_width if self.input_width is None else self.input_width


@dataclass
class AdamState:
    """Per-tensor first and second moment accumulators plus the step counter."""

    m: dict
    v: dict
    t: int = 0

    @classmethod
    def initialize(cls, params):
        m = {name: np.zeros_like(arr) for name, arr in params.tensors()}
        v = {name: np.zeros_like(arr) for name, arr in params.tensors()}
        return cls(m, v, 0)


@dataclass
class MiniBatch:
    """Triplets plus the sampled-neighborhood plan needed to evaluate them.

    ``levels[k]`` lists the node ids whose representations layer k consumes;
    ``levels[k+1]`` is always a prefix of ``levels[k]``. ``samples[k][d]`` maps
    each row (a node of ``levels[k+1]``) to the positions of its s sampled
    pool members inside ``levels[k]``. ``pi``/``pj`` are the triplet endpoint
    columns in the final level.
    """

    i: np.ndarray
    j: np.ndarray
    d: np.ndarray
    label: np.ndarray
    levels: list
    samples: list
    pi: np.ndarray = field(repr=False, default=None)
    pj: np.ndarray = field(repr=False, default=None)

    def __len__(self):
        return len(self.i)

    def triplets(self):
        return [Triplet(int(a), int(b), int(c), int(y))
                for a, b, c, y in zip(self.i, self.j, self.d, self.label)]

    def averaging_op(self, k, d):
        """Sparse (|level k+1|, |level k|) operator averaging sampled columns."""
        cache = getattr(self, "_avg_ops", None)
        if cache is None:
            cache = self._avg_ops = {}
        if (k, d) not in cache:
            idx = self.samples[k][d]
            m_out, s = idx.shape
            op = sparse.csr_array(
                (np.full(idx.size, 1.0 / s),
                 (np.repeat(np.arange(m_out), s), idx.ravel())),
                shape=(m_out, len(self.levels[k])),
            )
            cache[(k, d)] = (op, op.T.tocsr())
        return cache[(k, d)]


def sample_negatives(graph, positive, n, rng):
    """Draw ``n`` label-0 triplets for a positive, fixing its (i, dim).

    Candidates are uniform over nodes, rejecting the anchor itself and its
    neighbors in the positive's dimension. After 100 rejections per sample any
    node other than the anchor is accepted (a documented false-negative
    tolerance for near-complete neighborhoods).
    """
    check_positive_int("n", n)
    if graph.num_nodes < 2:
        raise ValueError("need at least 2 nodes to sample negatives")
    rng = ensure_generator(rng)
    i, d = positive.i, positive.d
    out = []
    for _ in range(n):
        cand = None
        for _ in range(100):
            c = int(rng.integers(0, graph.num_nodes))
            if c != i and not graph.has_edge(d, i, c):
                cand = c
                break
        if cand is None:
            while True:
                c = int(rng.integers(0, graph.num_nodes))
                if c != i:
                    cand = c
                    break
        out.append(Triplet(i, cand, d, 0))
    return out


def _bulk_negative_nodes(graph, anchors, dims, rng):
    """Vectorized negative draws, one per (anchor, dim) row.

    Matches the per-sample policy of ``sample_negatives``: uniform candidates,
    rejecting the anchor and its neighbors in the row's dimension, with any
    non-anchor accepted after 100 rejections.
    """
    n_nodes = graph.num_nodes
    out = np.empty(len(anchors), dtype=np.int64)
    pending = np.arange(len(anchors))
    for _ in range(100):
        if not len(pending):
            break
        cand = rng.integers(0, n_nodes, size=len(pending))
        bad = cand == anchors[pending]
        for d in np.unique(dims[pending]):
            table = graph.edge_keys(d)
            if len(table) == 0:
                continue
            sel = dims[pending] == d
            keys = anchors[pending[sel]] * n_nodes + cand[sel]
            pos = np.searchsorted(table, keys)
            hit = (pos < len(table)) & (table[np.minimum(pos, len(table) - 1)] == keys)
            bad[sel] |= hit
        out[pending[~bad]] = cand[~bad]
        pending = pending[bad]
    while len(pending):
        cand = rng.integers(0, n_nodes, size=len(pending))
        ok = cand != anchors[pending]
        out[pending[ok]] = cand[ok]
        pending = pending[~ok]
    return out


def _sample_pool_members(graph, nodes, dim, s, rng):
    """Vectorized pool sampling: (len(nodes), s) global ids per node.

    Per-node policy matches ``sample_neighbors``: the pool is the node's
    neighbors plus itself, without replacement when the pool is large enough.
    """
    indptr, indices = graph.indptr[dim], graph.indices[dim]
    nodes = np.asarray(nodes, dtype=np.int64)
    lo = indptr[nodes]
    deg = indptr[nodes + 1] - lo
    pool = deg + 1
    out = np.empty((len(nodes), s), dtype=np.int64)

    def gather(offsets):
        if len(indices) == 0:
            return np.zeros_like(offsets)
        return indices[np.minimum(offsets, len(indices) - 1)]

    small = pool < s
    if small.any():
        draws = (rng.random((int(small.sum()), s)) * pool[small, None]).astype(np.int64)
        out[small] = np.where(draws < deg[small, None],
                              gather(lo[small, None] + draws),
                              nodes[small, None])
    big = ~small
    if big.any():
        # uniform without-replacement subsets via random-key selection;
        # the dense key matrix is fine for moderate-degree graphs
        width = int(pool[big].max())
        keys = rng.random((int(big.sum()), width))
        keys[np.arange(width)[None, :] >= pool[big, None]] = np.inf
        picks = np.argpartition(keys, s - 1, axis=1)[:, :s]
        out[big] = np.where(picks < deg[big, None],
                            gather(lo[big, None] + picks),
                            nodes[big, None])
    return out


def _as_triplet_arrays(triplets):
    if isinstance(triplets, np.ndarray):
        arr = np.asarray(triplets, dtype=np.int64)
        labels = arr[:, 3] if arr.shape[1] > 3 else np.ones(len(arr), dtype=np.int64)
        return arr[:, 0], arr[:, 1], arr[:, 2], labels
    ti = np.array([t.i for t in triplets], dtype=np.int64)
    tj = np.array([t.j for t in triplets], dtype=np.int64)
    td = np.array([t.d for t in triplets], dtype=np.int64)
    ty = np.array([t.label for t in triplets], dtype=np.int64)
    return ti, tj, td, ty


def build_minibatch(positives, graph, s, K, n, rng):
    """Assemble a batch plan: positives, fresh negatives, and sampling levels.

    ``positives`` is a sequence of label-1 triplets or an (m, >=3) integer
    array of (i, j, dim) rows. The involved node set is the batch endpoints
    closed under K rounds of sampled neighbor expansion across all dimensions.
    """
    check_positive_int("s", s)
    check_positive_int("K", K)
    check_positive_int("n", n)
    if graph.num_nodes < 2:
        raise ValueError("need at least 2 nodes to sample negatives")
    rng = ensure_generator(rng)
    pi_, pj_, pd_, _ = _as_triplet_arrays(positives)
    if len(pi_) == 0:
        raise ValueError("positives must be nonempty")

    anchors = np.repeat(pi_, n)
    neg_d = np.repeat(pd_, n)
    neg_j = _bulk_negative_nodes(graph, anchors, neg_d, rng)
    ti = np.concatenate([pi_, anchors])
    tj = np.concatenate([pj_, neg_j])
    td = np.concatenate([pd_, neg_d])
    ty = np.concatenate([np.ones(len(pi_), dtype=np.int64),
                         np.zeros(len(anchors), dtype=np.int64)])

    endpoints = np.unique(np.concatenate([ti, tj]))
    levels = [None] * (K + 1)
    samples = [None] * K
    levels[K] = endpoints
    pos_of = np.full(graph.num_nodes, -1, dtype=np.int64)
    for k in range(K - 1, -1, -1):
        upper = levels[k + 1]
        drawn = [_sample_pool_members(graph, upper, d, s, rng)
                 for d in range(graph.num_dims)]
        new = np.setdiff1d(np.unique(np.concatenate([m.ravel() for m in drawn])), upper)
        level_nodes = np.concatenate([upper, new])
        pos_of[level_nodes] = np.arange(len(level_nodes))
        samples[k] = [pos_of[m] for m in drawn]
        levels[k] = level_nodes

    pos_of[endpoints] = np.arange(len(endpoints))
    return MiniBatch(ti, tj, td, ty, levels, samples, pos_of[ti], pos_of[tj])


def _pair_losses(x, y):
    """Per-pair negative log-likelihood and its derivative w.r.t. the raw score.

    The score is clipped to +-SCORE_CLIP before the sigmoid and the resulting
    probability clamped away from {0, 1} by PROB_CLIP before the log; the
    derivative is zero wherever a clamp is active.
    """
    xc = np.clip(x, -SCORE_CLIP, SCORE_CLIP)
    p_raw = 1.0 / (1.0 + np.exp(-xc))
    p = np.clip(p_raw, PROB_CLIP, 1.0 - PROB_CLIP)
    losses = -(y * np.log(p) + (1 - y) * np.log(1.0 - p))
    active = (np.abs(x) < SCORE_CLIP) & (p_raw > PROB_CLIP) & (p_raw < 1.0 - PROB_CLIP)
    dx = np.where(active, p_raw - y, 0.0)
    return losses, dx


def _score_pairs(model, Z, pi, pj, td):
    """Raw pair scores u_i . u_j per triplet, plus per-dimension caches."""
    x = np.empty(len(td), dtype=np.float64)
    per_dim = {}
    for d in np.unique(td):
        sel = np.flatnonzero(td == d)
        U = model.out_proj[d] @ Z
        x[sel] = np.einsum("wp,wp->p", U[:, pi[sel]], U[:, pj[sel]])
        per_dim[int(d)] = (sel, U)
    return x, per_dim


def compute_loss(model, Z, batch, column_of=None):
    """Negative log-likelihood of a batch of triplets under representation Z.

    ``batch`` may be a MiniBatch (whose endpoint columns are used directly) or
    a sequence of triplets; in the latter case ``column_of`` maps node ids to
    columns of Z and defaults to the identity.
    """
    if isinstance(batch, MiniBatch):
        pi, pj, td, ty = batch.pi, batch.pj, batch.d, batch.label
    else:
        ti, tj, td, ty = _as_triplet_arrays(batch)
        if column_of is None:
            pi, pj = ti, tj
        else:
            pi = np.array([column_of[int(a)] for a in ti], dtype=np.int64)
            pj = np.array([column_of[int(b)] for b in tj], dtype=np.int64)
    x, _ = _score_pairs(model, Z, pi, pj, td)
    losses, _ = _pair_losses(x, ty)
    return float(losses.sum())


def _batch_forward_cached(model, X, batch, keep_cache):
    levels = batch.levels
    act = activation_fn(model.activation)
    H = np.asarray(X, dtype=np.float64)[:, levels[0]]
    caches = []
    for k, layer in enumerate(model.layers):
        m_out = len(levels[k + 1])
        P = layer.proj @ H
        E = act(P)
        b = attention_weights(layer, model.attention_mode)
        Hw = np.stack([(batch.averaging_op(k, d)[0] @ E[d].T).T
                       for d in range(model.num_dims)])
        Ha = np.tensordot(b, E[:, :, :m_out], axes=([0], [0]))
        alpha = model.alpha
        if alpha == 0.0:
            Hd = Hw
        elif alpha == 1.0:
            Hd = Ha
        else:
            Hd = (1.0 - alpha) * Hw + alpha * Ha
        C = Hd.reshape(model.num_dims * layer.proj_width, m_out)
        S = layer.combine @ C
        if keep_cache:
            caches.append((H, P, E, b, C, S))
        H = act(S)
    return H, caches


def batch_forward(model, X, batch):
    """Forward pass over a batch plan; returns Z for the batch endpoints."""
    Z, _ = _batch_forward_cached(model, X, batch, keep_cache=False)
    return Z


def compute_gradients(model, X, batch):
    """Batch loss and its exact analytic gradients for every parameter tensor.

    Returns (loss, grads) with one gradient array per tensor name from
    ``model.tensors()``. Input features are constants and receive no gradient.
    """
    Z, caches = _batch_forward_cached(model, X, batch, keep_cache=True)
    grads = {name: np.zeros_like(arr) for name, arr in model.tensors()}

    x, per_dim = _score_pairs(model, Z, batch.pi, batch.pj, batch.d)
    losses, dx = _pair_losses(x, batch.label)
    loss = float(losses.sum())

    dZ = np.zeros_like(Z)
    for d, (sel, U) in per_dim.items():
        g = dx[sel]
        pi, pj = batch.pi[sel], batch.pj[sel]
        dU = np.zeros_like(U)
        np.add.at(dU.T, pi, g[:, None] * U[:, pj].T)
        np.add.at(dU.T, pj, g[:, None] * U[:, pi].T)
        grads[f"out.{d}"] += dU @ Z.T
        dZ += model.out_proj[d].T @ dU

    dgrad = activation_grad(model.activation)
    dH = dZ
    for k in range(model.num_layers - 1, -1, -1):
        layer = model.layers[k]
        H_in, P, E, b, C, S = caches[k]
        D, q = model.num_dims, layer.proj_width
        m_out = C.shape[1]
        alpha = model.alpha

        dS = dH * dgrad(S)
        grads[f"layers.{k}.combine"] += dS @ C.T
        dHd = (layer.combine.T @ dS).reshape(D, q, m_out)

        dE = np.zeros_like(E)
        db = None
        if alpha < 1.0:
            scale = 1.0 if alpha == 0.0 else 1.0 - alpha
            dHw = scale * dHd
            for d in range(D):
                back = batch.averaging_op(k, d)[1]
                dE[d] += (back @ dHw[d].T).T
        if alpha > 0.0:
            dHa = dHd if alpha == 1.0 else alpha * dHd
            dE[:, :, :m_out] += np.tensordot(b, dHa, axes=([1], [0]))
            db = np.tensordot(E[:, :, :m_out], dHa, axes=([1, 2], [1, 2]))

        if db is not None and model.attention_mode == "bilinear":
            dp = b * (db - (b * db).sum(axis=0, keepdims=True))
            W, A = layer.proj, layer.attn
            mw = A @ W
            mtw = A.T @ W
            tmp = np.tensordot(dp, W, axes=([0], [0]))
            grads[f"layers.{k}.attn"] += np.matmul(tmp, W.transpose(0, 2, 1)).sum(axis=0)
            att_w = (np.tensordot(dp, mw, axes=([1], [0]))
                     + np.tensordot(dp, mtw, axes=([0], [0])))
        else:
            att_w = None

        dP = dE * dgrad(P)
        dProj = dP @ H_in.T
        for d in range(D):
            grads[f"layers.{k}.proj.{d}"] += dProj[d]
            if att_w is not None:
                grads[f"layers.{k}.proj.{d}"] += att_w[d]
        dH = np.matmul(layer.proj.transpose(0, 2, 1), dP).sum(axis=0)

    return loss, grads


def finite_difference_gradients(model, X, batch, epsilon=1e-5):
    """Central finite-difference gradients of the batch loss, per tensor.

    Perturbs every parameter entry in place by +-epsilon and re-evaluates the
    loss on the fixed batch plan. Serves as the independent oracle for
    ``compute_gradients``.
    """

    def loss_now():
        return compute_loss(model, batch_forward(model, X, batch), batch)

    grads = {}
    for name, arr in model.tensors():
        g = np.zeros_like(arr)
        flat, gflat = arr.ravel(), g.ravel()
        for idx in range(flat.size):
            orig = flat[idx]
            flat[idx] = orig + epsilon
            up = loss_now()
            flat[idx] = orig - epsilon
            down = loss_now()
            flat[idx] = orig
            gflat[idx] = (up - down) / (2.0 * epsilon)
        grads[name] = g
    return grads


def adam_step(params, grads, state, config):
    """One Adam update with bias correction; mutates params and state in place."""
    state.t += 1
    t = state.t
    b1, b2 = config.beta1, config.beta2
    for name, arr in params.tensors():
        g = grads[name]
        m, v = state.m[name], state.v[name]
        m *= b1
        m += (1.0 - b1) * g
        v *= b2
        v += (1.0 - b2) * (g * g)
        m_hat = m / (1.0 - b1**t)
        v_hat = v / (1.0 - b2**t)
        arr -= config.learning_rate * m_hat / (np.sqrt(v_hat) + config.epsilon)
    return params, state


def _all_positives(graph):
    parts = []
    for d in range(graph.num_dims):
        pairs = graph.edges(d)
        if len(pairs):
            parts.append(np.column_stack([pairs, np.full(len(pairs), d, dtype=np.int64)]))
    if not parts:
        raise ValueError("graph has no edges to train on")
    return np.concatenate(parts)


def spectral_features(graph, width):
    """Eigenvalue-weighted spectral embedding of the aggregated graph.

    Rows are the leading eigenvectors (by eigenvalue magnitude) of the
    symmetrized normalized adjacency of the dimension union, each scaled by
    its squared eigenvalue so weakly informative components are suppressed.
    Deterministic: eigenvector signs are fixed by making each vector's
    largest-magnitude coordinate positive.
    """
    agg = aggregate_dimensions(graph) if graph.num_dims > 1 else graph
    adj = normalize_adjacency(agg, 0)
    sym = 0.5 * (adj + adj.T)
    n = graph.num_nodes
    if n <= 1024 or width >= n - 1:
        vals, vecs = np.linalg.eigh(sym.toarray())
        k = min(width, n)
    else:
        # fixed start vector keeps the iterative solver deterministic
        k = min(width, n - 1)
        vals, vecs = sparse.linalg.eigsh(sym, k=k, which="LM", v0=np.ones(n))
    order = np.argsort(-np.abs(vals))[:k]
    vals, vecs = vals[order], vecs[:, order]
    flip = vecs[np.abs(vecs).argmax(axis=0), np.arange(vecs.shape[1])] < 0
    vecs[:, flip] = -vecs[:, flip]
    X = np.zeros((width, graph.num_nodes))
    X[:k] = (vecs * vals**2).T
    return X


def resolve_variant(graph, config):
    """Apply the variant to (graph, alpha, attention mode).

    The baseline collapses the graph to its dimension union, disables the
    across-dimension blend, and uses uniform weights; the no-attention variant
    keeps the blend but fixes weights to 1/D.
    """
    if config.variant == "gcn_baseline":
        return aggregate_dimensions(graph), 0.0, "uniform"
    if config.variant == "mgcn_noa":
        return graph, config.alpha, "uniform"
    return graph, config.alpha, "bilinear"


def train(graph, X, config, epoch_callback=None):
    """Train on all links of ``graph`` and return (params, Z).

    ``X`` is the frozen input representation, one column per node; ``None``
    generates it per ``config.features``. Every epoch shuffles the positives,
    samples fresh negatives, and performs one Adam step per minibatch.
    ``epoch_callback(epoch, mean_loss)`` receives the mean per-triplet loss.
    The returned Z uses full (unsampled) aggregation for deterministic
    inference.
    """
    config.validate()
    work_graph, alpha, attention_mode = resolve_variant(graph, config)

    n = work_graph.num_nodes
    if X is None:
        if config.features == "spectral":
            X = spectral_features(work_graph, config.effective_input_width)
        else:
            X = named_stream(config.seed, "features").uniform(
                -0.1, 0.1, size=(config.effective_input_width, n)
            )
    else:
        X = np.asarray(X, dtype=np.float64)
        if X.shape[1] != n:
            raise ValueError(f"X must have one column per node ({n}), got {X.shape}")

    widths = [X.shape[0]] + [config.embed_width] * config.layers
    proj_widths = [config.embed_width] * config.layers
    params = init_params(
        work_graph.num_dims, widths, proj_widths, alpha,
        named_stream(config.seed, "init"),
        activation=config.activation, attention_mode=attention_mode,
    )
    state = AdamState.initialize(params)

    positives = _all_positives(work_graph)
    rng = named_stream(config.seed, "train")
    for epoch in range(config.epochs):
        order = rng.permutation(len(positives))
        total, count = 0.0, 0
        for start in range(0, len(order), config.batch_size):
            chunk = positives[order[start : start + config.batch_size]]
            batch = build_minibatch(
                chunk, work_graph, config.sample_size, config.layers, config.negatives, rng
            )
            loss, grads = compute_gradients(params, X, batch)
            adam_step(params, grads, state, config)
            total += loss
            count += len(batch)
        if epoch_callback is not None:
            epoch_callback(epoch, total / count)

    Z = forward(params, X, work_graph)
    return params, Z
