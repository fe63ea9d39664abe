"""Multi-dimensional graph storage, ingestion, normalization, sampling and splits.

A multi-dimensional graph keeps one shared node set and one edge set per
relation type (a "dimension"). Adjacency is stored per dimension in a
compressed row layout with sorted, deduplicated neighbor ids. Graphs are
immutable after construction and safe for concurrent reads; construction and
splitting are single-threaded.
"""

import re
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
from scipy import sparse

from .seeding import ensure_generator
from .validation import (
    check_dim,
    check_open_fraction,
    check_positive_int,
    check_probability,
    check_unit_interval,
)

__all__ = [
    "MultiDimGraph",
    "LinkSplit",
    "normalize_adjacency",
    "sample_neighbors",
    "split_links",
    "aggregate_dimensions",
    "generate_synthetic",
    "load_edge_lists",
    "load_edge_file",
    "load_labels",
    "save_edge_lists",
    "save_edge_file",
    "save_labels",
]

_PRAGMA_NODES = re.compile(r"#\s*nodes\s+(\d+)")
_PRAGMA_DIMS = re.compile(r"#\s*dims\s+(\d+)")


class MultiDimGraph:
    """N nodes sharing D per-dimension edge sets.

    Parameters
    ----------
    num_nodes : int
        Node count; node ids are dense integers in [0, num_nodes).
    indptr, indices : list of arrays
        One CSR (indptr, sorted neighbor ids) pair per dimension.
    labels : array or None
        Optional per-node class ids, -1 marking unlabeled nodes.
    label_names : list of str or None
        Original label strings, indexed by class id.
    directed : bool
        Whether edges were ingested as directed (no symmetrization).
    """

    def __init__(self, num_nodes, indptr, indices, labels=None, label_names=None, directed=False):
        if len(indptr) != len(indices) or len(indptr) < 1:
            raise ValueError("need one (indptr, indices) pair per dimension, at least one")
        self.num_nodes = int(num_nodes)
        self.indptr = [np.asarray(p, dtype=np.int64) for p in indptr]
        self.indices = [np.asarray(ix, dtype=np.int64) for ix in indices]
        self.labels = None if labels is None else np.asarray(labels, dtype=np.int64)
        self.label_names = list(label_names) if label_names is not None else None
        self.directed = bool(directed)
        self._edge_keys = [None] * len(self.indptr)
        for d, (p, ix) in enumerate(zip(self.indptr, self.indices)):
            if len(p) != self.num_nodes + 1:
                raise ValueError(f"dimension {d}: indptr length must be num_nodes + 1")
            if len(ix) and (ix.min() < 0 or ix.max() >= self.num_nodes):
                raise ValueError(f"dimension {d}: neighbor id out of range")

    @property
    def num_dims(self):
        return len(self.indptr)

    @classmethod
    def from_edges(cls, num_nodes, edge_lists, directed=False, labels=None, label_names=None):
        """Build a graph from per-dimension (m, 2) integer edge arrays.

        Duplicate edges are collapsed, self-loops dropped, and undirected
        inputs symmetrized.
        """
        num_nodes = int(num_nodes)
        indptr, indices = [], []
        for pairs in edge_lists:
            pairs = np.asarray(pairs, dtype=np.int64).reshape(-1, 2)
            if len(pairs) and (pairs.min() < 0 or pairs.max() >= num_nodes):
                raise ValueError("edge endpoint out of range")
            pairs = pairs[pairs[:, 0] != pairs[:, 1]]
            if not directed and len(pairs):
                pairs = np.concatenate([pairs, pairs[:, ::-1]])
            if len(pairs):
                keys = pairs[:, 0] * num_nodes + pairs[:, 1]
                keys = np.unique(keys)
                src, dst = keys // num_nodes, keys % num_nodes
            else:
                src = dst = np.empty(0, dtype=np.int64)
            counts = np.bincount(src, minlength=num_nodes)
            indptr.append(np.concatenate([[0], np.cumsum(counts)]))
            indices.append(dst)
        return cls(num_nodes, indptr, indices, labels=labels, label_names=label_names, directed=directed)

    def neighbors(self, dim, node):
        """Sorted neighbor ids of ``node`` in ``dim`` (read-only view)."""
        p = self.indptr[dim]
        return self.indices[dim][p[node] : p[node + 1]]

    def degree(self, dim, node):
        p = self.indptr[dim]
        return int(p[node + 1] - p[node])

    def degrees(self, dim):
        return np.diff(self.indptr[dim])

    def has_edge(self, dim, i, j):
        nbrs = self.neighbors(dim, i)
        k = np.searchsorted(nbrs, j)
        return k < len(nbrs) and nbrs[k] == j

    def edge_keys(self, dim):
        """Sorted int64 keys i * num_nodes + j of stored adjacency entries.

        Cached per dimension; supports vectorized edge-membership queries.
        """
        if self._edge_keys[dim] is None:
            src = np.repeat(np.arange(self.num_nodes), self.degrees(dim))
            self._edge_keys[dim] = src * self.num_nodes + self.indices[dim]
        return self._edge_keys[dim]

    def edges(self, dim):
        """Edge pairs of ``dim`` as an (m, 2) array.

        Undirected graphs report each edge once in canonical (i < j) order;
        directed graphs report stored pairs.
        """
        src = np.repeat(np.arange(self.num_nodes), self.degrees(dim))
        pairs = np.column_stack([src, self.indices[dim]])
        if not self.directed:
            pairs = pairs[pairs[:, 0] < pairs[:, 1]]
        return pairs

    def num_edges(self, dim):
        return len(self.edges(dim))

    def __eq__(self, other):
        if not isinstance(other, MultiDimGraph):
            return NotImplemented
        if self.num_nodes != other.num_nodes or self.num_dims != other.num_dims:
            return False
        if self.directed != other.directed:
            return False
        for d in range(self.num_dims):
            if not np.array_equal(self.indptr[d], other.indptr[d]):
                return False
            if not np.array_equal(self.indices[d], other.indices[d]):
                return False
        if (self.labels is None) != (other.labels is None):
            return False
        if self.labels is not None and not np.array_equal(self.labels, other.labels):
            return False
        return True

    def __repr__(self):
        edges = sum(len(ix) for ix in self.indices)
        return f"MultiDimGraph(nodes={self.num_nodes}, dims={self.num_dims}, stored_edges={edges})"


@dataclass
class LinkSplit:
    """A train graph plus held-out positive links for one evaluation dimension.

    The held-out pairs are absent from ``train_graph`` in every dimension
    (mirrored removal), and re-adding them to ``eval_dim`` reproduces the
    original edge set of that dimension.
    """

    train_graph: MultiDimGraph
    eval_dim: int
    test_positives: np.ndarray = field(repr=False)
    removed_fraction: float = 0.0


def normalize_adjacency(graph, dim):
    """Row-normalized adjacency of ``dim`` with self-loops, as a sparse CSR array.

    Row i holds weight 1 / (degree(i) + 1) on each neighbor and on i itself,
    so every row sums to 1 and isolated nodes keep a unit self-weight.
    """
    check_dim(graph, dim)
    n = graph.num_nodes
    deg = graph.degrees(dim)
    src = np.repeat(np.arange(n), deg)
    rows = np.concatenate([src, np.arange(n)])
    cols = np.concatenate([graph.indices[dim], np.arange(n)])
    mat = sparse.csr_array(
        (np.ones(len(rows)), (rows, cols)), shape=(n, n), dtype=np.float64
    )
    mat.sort_indices()
    mat.data = np.repeat(1.0 / (deg + 1.0), deg + 1)
    return mat


def sample_neighbors(graph, node, dim, s, rng):
    """Draw exactly ``s`` ids from the node's neighbor pool in ``dim``.

    The pool is the within-dimension neighbors plus the node itself. Draws are
    without replacement when the pool has at least ``s`` members and with
    replacement otherwise, so isolated nodes repeat themselves.
    """
    check_positive_int("s", s)
    pool = np.concatenate([graph.neighbors(dim, node), [node]])
    return rng.choice(pool, size=s, replace=len(pool) < s)


def split_links(graph, dim, fraction, rng):
    """Hold out floor(fraction * m) links of ``dim`` uniformly at random.

    Every removed pair is also removed from the other dimensions where it
    appears, so held-out links never leak into the training graph through a
    parallel dimension.
    """
    check_dim(graph, dim)
    check_open_fraction("fraction", fraction)
    rng = ensure_generator(rng)
    edges = graph.edges(dim)
    k = int(fraction * len(edges))
    if k < 1:
        raise ValueError(
            f"fraction {fraction} removes no links from dimension {dim} ({len(edges)} edges)"
        )
    chosen = np.sort(rng.choice(len(edges), size=k, replace=False))
    test_positives = edges[chosen]

    n = graph.num_nodes
    removed_keys = test_positives[:, 0] * n + test_positives[:, 1]
    kept_lists = []
    for d in range(graph.num_dims):
        pairs = graph.edges(d)
        keys = pairs[:, 0] * n + pairs[:, 1]
        kept_lists.append(pairs[~np.isin(keys, removed_keys)])
    train_graph = MultiDimGraph.from_edges(
        n, kept_lists, directed=graph.directed,
        labels=graph.labels, label_names=graph.label_names,
    )
    return LinkSplit(train_graph, int(dim), test_positives, float(fraction))


def aggregate_dimensions(graph):
    """Collapse all dimensions into a single-dimension graph (edge union)."""
    pairs = np.concatenate([graph.edges(d) for d in range(graph.num_dims)])
    return MultiDimGraph.from_edges(
        graph.num_nodes, [pairs], directed=graph.directed,
        labels=graph.labels, label_names=graph.label_names,
    )


def generate_synthetic(num_nodes, num_dims, num_communities, intra_prob, inter_prob,
                       dim_noise, rng):
    """Planted-partition multi-dimensional graph with community labels.

    One base edge set is drawn with probability ``intra_prob`` inside a
    community and ``inter_prob`` across communities. Each dimension then
    independently rewires a ``dim_noise`` fraction of the base edges,
    redrawing replacements from the same planted-partition distribution, so
    every dimension remains a clean planted partition while dimensions stay
    correlated but distinct.
    """
    check_positive_int("num_nodes", num_nodes)
    check_positive_int("num_dims", num_dims)
    check_positive_int("num_communities", num_communities)
    check_probability("intra_prob", intra_prob)
    check_probability("inter_prob", inter_prob)
    if not 0.0 <= inter_prob < intra_prob <= 1.0:
        raise ValueError("need 0 <= inter_prob < intra_prob <= 1")
    check_unit_interval("dim_noise", dim_noise)
    rng = ensure_generator(rng)

    labels = (np.arange(num_nodes) * num_communities) // num_nodes
    iu, ju = np.triu_indices(num_nodes, k=1)
    p = np.where(labels[iu] == labels[ju], intra_prob, inter_prob)
    base = np.column_stack([iu, ju])[rng.random(len(iu)) < p]

    edge_lists = []
    for _ in range(num_dims):
        pairs = base.copy()
        r = int(dim_noise * len(pairs))
        if r:
            present = {(int(i), int(j)) for i, j in pairs}
            rewire = rng.choice(len(pairs), size=r, replace=False)
            for idx in rewire:
                present.discard((int(pairs[idx, 0]), int(pairs[idx, 1])))
                while True:
                    a, b = rng.integers(0, num_nodes, size=2)
                    if a == b:
                        continue
                    key = (int(min(a, b)), int(max(a, b)))
                    if key in present:
                        continue
                    # accept with the planted probability ratio so replacement
                    # edges follow the same intra/inter distribution
                    p = intra_prob if labels[a] == labels[b] else inter_prob
                    if rng.random() < p / intra_prob:
                        break
                present.add(key)
                pairs[idx] = key
        edge_lists.append(pairs)
    names = [str(c) for c in range(num_communities)]
    return MultiDimGraph.from_edges(num_nodes, edge_lists, labels=labels, label_names=names)


def _parse_int(token, path, lineno, what):
    try:
        value = int(token)
    except ValueError:
        raise ValueError(f"{path}:{lineno}: {what} '{token}' is not an integer") from None
    if value < 0:
        raise ValueError(f"{path}:{lineno}: {what} must be nonnegative, got {value}")
    return value


def _read_pair_file(path):
    """Parse one 'src dst' pair per line; returns (pairs, nodes-pragma hint)."""
    pairs = []
    hint = 0
    with open(path, "r", encoding="utf-8") as fh:
        for lineno, raw in enumerate(fh, start=1):
            line = raw.strip()
            if not line:
                continue
            if line.startswith("#"):
                m = _PRAGMA_NODES.match(line)
                if m:
                    hint = max(hint, int(m.group(1)))
                continue
            tokens = line.split()
            if len(tokens) != 2:
                raise ValueError(f"{path}:{lineno}: expected 'src dst', got {len(tokens)} fields")
            pairs.append((_parse_int(tokens[0], path, lineno, "node id"),
                          _parse_int(tokens[1], path, lineno, "node id")))
    return np.array(pairs, dtype=np.int64).reshape(-1, 2), hint


def load_edge_lists(paths, directed=False):
    """Load a graph from one edge-list file per dimension ('src dst' lines).

    Dimension order follows the order of ``paths``. Lines starting with '#'
    are ignored, except a '# nodes N' pragma (written by the exporters) which
    preserves trailing isolated nodes. The node count is otherwise one plus
    the largest node id seen.
    """
    paths = [Path(p) for p in paths]
    if not paths:
        raise ValueError("need at least one edge-list file")
    per_dim, hint = [], 0
    for path in paths:
        pairs, file_hint = _read_pair_file(path)
        per_dim.append(pairs)
        hint = max(hint, file_hint)
    seen = max((int(p.max()) + 1 for p in per_dim if len(p)), default=0)
    return MultiDimGraph.from_edges(max(seen, hint), per_dim, directed=directed)


def load_edge_file(path, directed=False, num_dims=None):
    """Load a graph from a single 'dim src dst' triple-per-line file.

    ``num_dims`` caps the dimension ids when given; otherwise the dimension
    count is inferred as one plus the largest id seen (at least one).
    """
    path = Path(path)
    rows = []
    node_hint = dim_hint = 0
    with open(path, "r", encoding="utf-8") as fh:
        for lineno, raw in enumerate(fh, start=1):
            line = raw.strip()
            if not line:
                continue
            if line.startswith("#"):
                m = _PRAGMA_NODES.match(line)
                if m:
                    node_hint = max(node_hint, int(m.group(1)))
                m = _PRAGMA_DIMS.match(line)
                if m:
                    dim_hint = max(dim_hint, int(m.group(1)))
                continue
            tokens = line.split()
            if len(tokens) != 3:
                raise ValueError(f"{path}:{lineno}: expected 'dim src dst', got {len(tokens)} fields")
            d = _parse_int(tokens[0], path, lineno, "dimension id")
            if num_dims is not None and d >= num_dims:
                raise ValueError(f"{path}:{lineno}: dimension id {d} out of range (< {num_dims})")
            rows.append((d, _parse_int(tokens[1], path, lineno, "node id"),
                         _parse_int(tokens[2], path, lineno, "node id")))
    rows = np.array(rows, dtype=np.int64).reshape(-1, 3)
    if num_dims is None:
        num_dims = max(int(rows[:, 0].max()) + 1 if len(rows) else 1, dim_hint, 1)
    num_nodes = max(int(rows[:, 1:].max()) + 1 if len(rows) else 0, node_hint)
    per_dim = [rows[rows[:, 0] == d, 1:] for d in range(num_dims)]
    return MultiDimGraph.from_edges(num_nodes, per_dim, directed=directed)


def load_labels(path, num_nodes):
    """Load a 'node label' file; label strings are mapped to dense class ids.

    Returns (labels, names) where ``labels`` has one entry per node with -1
    for nodes absent from the file and ``names[c]`` is the string for class c.
    """
    path = Path(path)
    labels = np.full(num_nodes, -1, dtype=np.int64)
    names = []
    lookup = {}
    with open(path, "r", encoding="utf-8") as fh:
        for lineno, raw in enumerate(fh, start=1):
            line = raw.strip()
            if not line or line.startswith("#"):
                continue
            tokens = line.split()
            if len(tokens) != 2:
                raise ValueError(f"{path}:{lineno}: expected 'node label', got {len(tokens)} fields")
            node = _parse_int(tokens[0], path, lineno, "node id")
            if node >= num_nodes:
                raise ValueError(f"{path}:{lineno}: node id {node} out of range (< {num_nodes})")
            name = tokens[1]
            if name not in lookup:
                lookup[name] = len(names)
                names.append(name)
            labels[node] = lookup[name]
    return labels, names


def save_edge_lists(graph, paths):
    """Write one edge-list file per dimension ('src dst', canonical order)."""
    if len(paths) != graph.num_dims:
        raise ValueError(f"need {graph.num_dims} paths, got {len(paths)}")
    for d, path in enumerate(paths):
        with open(path, "w", encoding="utf-8") as fh:
            fh.write(f"# nodes {graph.num_nodes}\n")
            for i, j in graph.edges(d):
                fh.write(f"{i} {j}\n")


def save_edge_file(graph, path):
    """Write the whole graph as 'dim src dst' triples in one file."""
    with open(path, "w", encoding="utf-8") as fh:
        fh.write(f"# nodes {graph.num_nodes}\n")
        fh.write(f"# dims {graph.num_dims}\n")
        for d in range(graph.num_dims):
            for i, j in graph.edges(d):
                fh.write(f"{d} {i} {j}\n")


def save_labels(graph, path):
    if graph.labels is None:
        raise ValueError("graph has no labels to save")
    names = graph.label_names or [str(c) for c in range(int(graph.labels.max()) + 1)]
    with open(path, "w", encoding="utf-8") as fh:
        for node, c in enumerate(graph.labels):
            if c >= 0:
                fh.write(f"{node} {names[c]}\n")
