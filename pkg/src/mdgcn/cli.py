"""Command-line entry points.

Commands: train, link-predict, node-classify, synth, grad-check. Every
command reads an optional flat JSON config file; command-line flags override
file values, and the effective configuration is echoed next to the outputs so
a run can be reproduced from its echo alone. All randomness flows from the
single --seed through named sub-streams.
"""

import argparse
import json
import sys
from pathlib import Path

import numpy as np

from .evaluation import EvalReport, link_prediction_eval, node_classification_eval
from .graph import (
    MultiDimGraph,
    generate_synthetic,
    load_edge_file,
    load_edge_lists,
    load_labels,
    save_edge_lists,
    save_labels,
)
from .model import init_params
from .seeding import derive_seed, named_stream
from .serialize import save_checkpoint, save_embedding
from .training import (
    TrainConfig,
    build_minibatch,
    compute_gradients,
    finite_difference_gradients,
    resolve_variant,
    train,
)

__all__ = ["main"]

DEFAULTS = {
    "task": None,
    "seed": 0,
    "variant": "mgcn",
    "embed_width": 64,
    "alpha": 0.5,
    "negatives": 2,
    "sample_size": 10,
    "layers": 1,
    "learning_rate": 0.01,
    "beta1": 0.9,
    "beta2": 0.999,
    "epsilon": 1e-8,
    "batch_size": 512,
    "epochs": 10,
    "activation": "tanh",
    "features": "random",
    "input_width": None,
    "directed": False,
    "dim_files": None,
    "edge_file": None,
    "labels_file": None,
    "out": "run",
    "dims": None,
    "fractions": [0.2],
    "ratios": [0.1, 0.3, 0.5, 0.7, 0.9],
    "splits": 10,
    "variants": None,
    "alphas": None,
    "synth_nodes": 300,
    "synth_dims": 3,
    "synth_communities": 3,
    "intra_prob": 0.1,
    "inter_prob": 0.01,
    "dim_noise": 0.3,
    "gc_nodes": 6,
    "gc_dims": 2,
    "gc_width": 3,
    "gc_epsilon": 1e-5,
    "gc_tolerance": 1e-4,
    "corrupt": None,
}

VARIANT_FLAGS = {"mgcn": "mgcn", "mgcn-noa": "mgcn_noa", "gcn": "gcn_baseline"}


def build_config(args, task):
    """Merge defaults, config file and explicit flags into one flat dict."""
    cfg = dict(DEFAULTS)
    cfg["task"] = task
    if args.config:
        with open(args.config, "r", encoding="utf-8") as fh:
            loaded = json.load(fh)
        unknown = sorted(set(loaded) - set(DEFAULTS))
        if unknown:
            raise ValueError(f"unknown config keys: {', '.join(unknown)}")
        cfg.update(loaded)
        cfg["task"] = task
    for key, value in vars(args).items():
        if key in ("config", "command") or value is None:
            continue
        cfg[key] = value
    return cfg


def _train_config(cfg, alpha=None, variant=None, seed=None):
    return TrainConfig(
        embed_width=cfg["embed_width"],
        alpha=cfg["alpha"] if alpha is None else alpha,
        negatives=cfg["negatives"],
        sample_size=cfg["sample_size"],
        layers=cfg["layers"],
        learning_rate=cfg["learning_rate"],
        beta1=cfg["beta1"],
        beta2=cfg["beta2"],
        epsilon=cfg["epsilon"],
        batch_size=cfg["batch_size"],
        epochs=cfg["epochs"],
        seed=cfg["seed"] if seed is None else seed,
        variant=cfg["variant"] if variant is None else variant,
        activation=cfg["activation"],
        features=cfg["features"],
        input_width=cfg["input_width"],
    ).validate()


def _load_graph(cfg, require_labels=False):
    if cfg["edge_file"]:
        graph = load_edge_file(cfg["edge_file"], directed=cfg["directed"])
    elif cfg["dim_files"]:
        graph = load_edge_lists(cfg["dim_files"], directed=cfg["directed"])
    else:
        raise ValueError("no input graph: pass --dim-files or --edge-file")
    if cfg["labels_file"]:
        labels, names = load_labels(cfg["labels_file"], graph.num_nodes)
        graph = MultiDimGraph(graph.num_nodes, graph.indptr, graph.indices,
                              labels=labels, label_names=names, directed=graph.directed)
    elif require_labels:
        raise ValueError("this command needs node labels: pass --labels")
    return graph


def _echo_config(cfg, out):
    path = Path(str(out) + ".config.json")
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(cfg, fh, indent=2, sort_keys=True)
        fh.write("\n")
    return path


def _write_reports(reports, out):
    txt = Path(str(out) + ".report.txt")
    kv = Path(str(out) + ".report.kv")
    with open(txt, "w", encoding="utf-8") as fh:
        fh.write("\n\n".join(r.table() for r in reports) + "\n")
    with open(kv, "w", encoding="utf-8") as fh:
        for r in reports:
            for line in r.kv_lines():
                fh.write(line + "\n")
    return txt, kv


def cmd_train(cfg):
    graph = _load_graph(cfg)
    config = _train_config(cfg)

    def report(epoch, loss):
        print(f"epoch {epoch} loss {loss:.6f}")

    params, Z = train(graph, None, config, epoch_callback=report)
    out = cfg["out"]
    save_checkpoint(params, cfg, str(out) + ".ckpt")
    save_embedding(Z, str(out) + ".emb")
    _echo_config(cfg, out)
    print(f"wrote {out}.ckpt {out}.emb {out}.config.json")
    return 0


def cmd_link_predict(cfg):
    graph = _load_graph(cfg)
    dims = cfg["dims"] if cfg["dims"] is not None else list(range(graph.num_dims))
    for d in dims:
        if not 0 <= d < graph.num_dims:
            raise ValueError(f"dimension {d} out of range (graph has {graph.num_dims})")
    variants = cfg["variants"] if cfg["variants"] is not None else [cfg["variant"]]
    reports = []
    for variant in variants:
        merged = EvalReport(task=f"link_prediction.{variant}",
                            meta={"variant": variant, "seed": cfg["seed"]})
        for fraction in cfg["fractions"]:
            for dim in dims:
                config = _train_config(
                    cfg, variant=variant,
                    seed=derive_seed(cfg["seed"], "lp-train", variant, dim, fraction),
                )
                single = link_prediction_eval(
                    graph, dim, fraction, config,
                    named_stream(cfg["seed"], "lp-eval", variant, dim, fraction),
                )
                for row in single.rows:
                    merged.add(row["metric"], row["value"], dim=row["dim"],
                               ratio=row["ratio"], split=row["split"])
                merged.meta.update(
                    {k: v for k, v in single.meta.items() if k.startswith("logreg")}
                )
        reports.append(merged)
    txt, kv = _write_reports(reports, cfg["out"])
    _echo_config(cfg, cfg["out"])
    print(txt.read_text(encoding="utf-8").rstrip())
    print(f"wrote {txt} {kv}")
    return 0


def cmd_node_classify(cfg):
    graph = _load_graph(cfg, require_labels=True)
    alphas = cfg["alphas"] if cfg["alphas"] is not None else [cfg["alpha"]]
    sweep = len(alphas) > 1
    written = []
    for alpha in alphas:
        config = _train_config(cfg, alpha=alpha)
        params, Z = train(graph, None, config)
        report = node_classification_eval(
            Z, graph.labels, ratios=cfg["ratios"], splits=cfg["splits"],
            rng=named_stream(cfg["seed"], "nc-splits", alpha),
        )
        report.meta.update({"alpha": alpha, "variant": cfg["variant"], "seed": cfg["seed"]})
        out = f"{cfg['out']}.alpha_{alpha:g}" if sweep else cfg["out"]
        txt, kv = _write_reports([report], out)
        written.extend([txt, kv])
        print(report.table())
    _echo_config(cfg, cfg["out"])
    print("wrote " + " ".join(str(p) for p in written))
    return 0


def cmd_synth(cfg):
    graph = generate_synthetic(
        cfg["synth_nodes"], cfg["synth_dims"], cfg["synth_communities"],
        cfg["intra_prob"], cfg["inter_prob"], cfg["dim_noise"],
        named_stream(cfg["seed"], "synth"),
    )
    out = cfg["out"]
    paths = [f"{out}.dim{d}.edges" for d in range(graph.num_dims)]
    save_edge_lists(graph, paths)
    save_labels(graph, f"{out}.labels")
    _echo_config(cfg, out)
    edges = sum(graph.num_edges(d) for d in range(graph.num_dims))
    print(f"generated {graph.num_nodes} nodes, {graph.num_dims} dimensions, {edges} edges")
    print("wrote " + " ".join(paths) + f" {out}.labels")
    return 0


def cmd_grad_check(cfg):
    rng = named_stream(cfg["seed"], "gc-graph")
    graph = generate_synthetic(cfg["gc_nodes"], cfg["gc_dims"], 2, 0.9, 0.5, 0.2, rng)
    config = _train_config(cfg)
    work_graph, alpha, attention_mode = resolve_variant(graph, config)

    width = cfg["gc_width"]
    params = init_params(
        work_graph.num_dims, [width] * (config.layers + 1), [width] * config.layers,
        alpha, named_stream(cfg["seed"], "gc-init"),
        activation=config.activation, attention_mode=attention_mode,
    )
    X = named_stream(cfg["seed"], "gc-features").uniform(
        -0.5, 0.5, size=(width, work_graph.num_nodes)
    )
    positives = np.concatenate([
        np.column_stack([work_graph.edges(d), np.full(work_graph.num_edges(d), d)])
        for d in range(work_graph.num_dims)
    ])
    batch = build_minibatch(positives, work_graph, 3, config.layers,
                            config.negatives, named_stream(cfg["seed"], "gc-batch"))

    _, analytic = compute_gradients(params, X, batch)
    numeric = finite_difference_gradients(params, X, batch, epsilon=cfg["gc_epsilon"])
    if cfg["corrupt"]:
        if cfg["corrupt"] not in analytic:
            raise ValueError(f"no parameter tensor named '{cfg['corrupt']}'")
        analytic[cfg["corrupt"]] = analytic[cfg["corrupt"]] + 1.0

    worst_name, worst = None, -1.0
    for name in analytic:
        scale = max(np.abs(analytic[name]).max(), np.abs(numeric[name]).max(), 1e-8)
        err = np.abs(analytic[name] - numeric[name]).max() / scale
        print(f"{name:24s} max relative error {err:.3e}")
        if err > worst:
            worst_name, worst = name, err
    ok = worst <= cfg["gc_tolerance"]
    print(f"{'PASS' if ok else 'FAIL'} worst {worst_name} at {worst:.3e} "
          f"(tolerance {cfg['gc_tolerance']:g})")
    return 0 if ok else 1


def _add_shared(parser, multi_alpha=False, multi_variant=False):
    parser.add_argument("--config", help="flat JSON config file; flags override it")
    parser.add_argument("--seed", type=int, help="master seed for all randomness")
    if multi_variant:
        parser.add_argument("--variant", nargs="+", dest="variants",
                            type=lambda v: VARIANT_FLAGS[v],
                            choices=list(VARIANT_FLAGS.values()),
                            metavar="{mgcn,mgcn-noa,gcn}")
    else:
        parser.add_argument("--variant", type=lambda v: VARIANT_FLAGS.get(v, v),
                            choices=list(VARIANT_FLAGS.values()),
                            metavar="{mgcn,mgcn-noa,gcn}")
    if multi_alpha:
        parser.add_argument("--alpha", nargs="+", dest="alphas", type=float,
                            metavar="ALPHA")
    else:
        parser.add_argument("--alpha", type=float)
    parser.add_argument("--neg", type=int, dest="negatives",
                        help="negative samples per positive link")
    parser.add_argument("--sample", type=int, dest="sample_size",
                        help="sampled neighbors per node and dimension")
    parser.add_argument("--layers", type=int)
    parser.add_argument("--embed", type=int, dest="embed_width")
    parser.add_argument("--epochs", type=int)
    parser.add_argument("--batch", type=int, dest="batch_size")
    parser.add_argument("--lr", type=float, dest="learning_rate")
    parser.add_argument("--activation", choices=["relu", "tanh", "sigmoid", "identity"])
    parser.add_argument("--features", choices=["random", "spectral"],
                        help="internally generated input representation")
    parser.add_argument("--input-width", type=int, dest="input_width")
    parser.add_argument("--dim-files", nargs="+", dest="dim_files",
                        help="one edge-list file per dimension ('src dst' lines)")
    parser.add_argument("--edge-file", dest="edge_file",
                        help="single 'dim src dst' edge file")
    parser.add_argument("--labels", dest="labels_file", help="'node label' file")
    parser.add_argument("--directed", action="store_const", const=True)
    parser.add_argument("--out", help="output path prefix")


def _build_parser():
    parser = argparse.ArgumentParser(
        prog="mdgcn",
        description="Graph convolutional embeddings for multi-dimensional graphs.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("train", help="train a model and export its embedding")
    _add_shared(p)

    p = sub.add_parser("link-predict", help="held-out link prediction, AUC per dimension")
    _add_shared(p, multi_variant=True)
    p.add_argument("--dims", nargs="+", type=int, help="dimensions to evaluate (default all)")
    p.add_argument("--fraction", nargs="+", type=float, dest="fractions",
                   help="fractions of links to remove")

    p = sub.add_parser("node-classify", help="node classification over training ratios")
    _add_shared(p, multi_alpha=True)
    p.add_argument("--ratios", nargs="+", type=float)
    p.add_argument("--splits", type=int)

    p = sub.add_parser("synth", help="generate a planted-partition synthetic graph")
    _add_shared(p)
    p.add_argument("--nodes", type=int, dest="synth_nodes")
    p.add_argument("--num-dims", type=int, dest="synth_dims")
    p.add_argument("--communities", type=int, dest="synth_communities")
    p.add_argument("--intra", type=float, dest="intra_prob")
    p.add_argument("--inter", type=float, dest="inter_prob")
    p.add_argument("--noise", type=float, dest="dim_noise")

    p = sub.add_parser("grad-check", help="analytic vs finite-difference gradients")
    _add_shared(p)
    p.add_argument("--gc-nodes", type=int, dest="gc_nodes")
    p.add_argument("--gc-dims", type=int, dest="gc_dims")
    p.add_argument("--gc-width", type=int, dest="gc_width")
    p.add_argument("--gc-eps", type=float, dest="gc_epsilon")
    p.add_argument("--gc-tol", type=float, dest="gc_tolerance")
    p.add_argument("--corrupt", help="testing aid: corrupt this tensor's gradient")

    return parser


COMMANDS = {
    "train": cmd_train,
    "link-predict": cmd_link_predict,
    "node-classify": cmd_node_classify,
    "synth": cmd_synth,
    "grad-check": cmd_grad_check,
}


def main(argv=None):
    args = _build_parser().parse_args(argv)
    try:
        cfg = build_config(args, args.command)
        return COMMANDS[args.command](cfg)
    except (ValueError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
