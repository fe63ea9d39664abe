"""Text serialization for embeddings and parameter checkpoints.

Both formats are plain text with full-precision decimals ('%.17g', which
round-trips float64 exactly), so identical runs produce byte-identical files.

Embedding file::

    N width
    node v_1 ... v_width        (one row per node)

Checkpoint file (version 1)::

    mdgcn-checkpoint 1
    config <single-line JSON of the effective configuration>
    alpha <value>
    activation <name>
    attention_mode <name>
    tensor <name> <rows> <cols>
    <rows lines of cols values each>
    ...
    end
"""

import json

import numpy as np

from .model import LayerParams, ModelParams

__all__ = ["save_embedding", "load_embedding", "save_checkpoint", "load_checkpoint"]

CHECKPOINT_VERSION = 1


def _fmt(values):
    return " ".join("%.17g" % v for v in values)


def save_embedding(Z, path):
    """Write a (width, N) representation matrix, one node per row."""
    Z = np.asarray(Z, dtype=np.float64)
    width, n = Z.shape
    with open(path, "w", encoding="utf-8") as fh:
        fh.write(f"{n} {width}\n")
        for node in range(n):
            fh.write(f"{node} {_fmt(Z[:, node])}\n")


def load_embedding(path):
    """Read an embedding file back into a (width, N) matrix."""
    with open(path, "r", encoding="utf-8") as fh:
        n, width = map(int, fh.readline().split())
        Z = np.empty((width, n))
        for line in fh:
            parts = line.split()
            Z[:, int(parts[0])] = [float(v) for v in parts[1:]]
    return Z


def save_checkpoint(params, config, path):
    """Dump all parameter tensors plus a configuration echo."""
    with open(path, "w", encoding="utf-8") as fh:
        fh.write(f"mdgcn-checkpoint {CHECKPOINT_VERSION}\n")
        fh.write("config " + json.dumps(config, sort_keys=True) + "\n")
        fh.write("alpha %.17g\n" % params.alpha)
        fh.write(f"activation {params.activation}\n")
        fh.write(f"attention_mode {params.attention_mode}\n")
        for name, arr in params.tensors():
            fh.write(f"tensor {name} {arr.shape[0]} {arr.shape[1]}\n")
            for row in arr:
                fh.write(_fmt(row) + "\n")
        fh.write("end\n")


def load_checkpoint(path):
    """Rebuild (ModelParams, config) from a checkpoint file."""
    with open(path, "r", encoding="utf-8") as fh:
        magic = fh.readline().split()
        if magic[:1] != ["mdgcn-checkpoint"] or int(magic[1]) != CHECKPOINT_VERSION:
            raise ValueError(f"{path}: not a version-{CHECKPOINT_VERSION} checkpoint")
        config = json.loads(fh.readline().split(" ", 1)[1])
        alpha = float(fh.readline().split()[1])
        activation = fh.readline().split()[1]
        attention_mode = fh.readline().split()[1]
        tensors = {}
        while True:
            header = fh.readline().split()
            if header[0] == "end":
                break
            _, name, rows, cols = header
            rows, cols = int(rows), int(cols)
            arr = np.empty((rows, cols))
            for r in range(rows):
                arr[r] = [float(v) for v in fh.readline().split()]
            tensors[name] = arr

    layers = []
    k = 0
    while f"layers.{k}.combine" in tensors:
        proj = []
        d = 0
        while f"layers.{k}.proj.{d}" in tensors:
            proj.append(tensors[f"layers.{k}.proj.{d}"])
            d += 1
        layers.append(LayerParams(np.stack(proj), tensors[f"layers.{k}.combine"],
                                  tensors[f"layers.{k}.attn"]))
        k += 1
    out = []
    d = 0
    while f"out.{d}" in tensors:
        out.append(tensors[f"out.{d}"])
        d += 1
    params = ModelParams(layers, np.stack(out), alpha, activation, attention_mode)
    return params, config
