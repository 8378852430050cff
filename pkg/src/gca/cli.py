"""Command-line interface: train, eval, centrality, augment-stats,
sweep, and verify subcommands.

Every subcommand taking --seed is bit-reproducible. GCA_THREADS caps the
number of concurrent sweep cells.
"""

from __future__ import annotations

import argparse
import concurrent.futures
import dataclasses
import os
import sys

import numpy as np

from gca import augment, centrality, objective, oracle, probe, trainer
from gca.encoder import load_checkpoint, save_checkpoint
from gca.graph import DatasetError, Graph, load_dataset
from gca.trainer import TrainConfig, VARIANTS, parse_config

CHECKPOINT_NAME = "model.ckpt"
LOSS_CSV_NAME = "loss.csv"


def _fail(message: str, code: int = 1) -> int:
    print(f"error: {message}", file=sys.stderr)
    return code


def _load_graph(path: str) -> tuple[Graph, list | None]:
    if not os.path.isdir(path):
        raise FileNotFoundError(path)
    return load_dataset(path)


def _read_config(path: str | None, seed: int | None, variant: str | None) -> TrainConfig:
    if path is None:
        config = TrainConfig()
    else:
        with open(path) as fh:
            config = parse_config(fh.read())
    if seed is not None:
        config = dataclasses.replace(config, seed=seed)
    if variant is not None:
        config = config.with_variant(variant)
    return config


def cmd_train(args: argparse.Namespace) -> int:
    try:
        g, _ = _load_graph(args.dataset)
    except FileNotFoundError as exc:
        return _fail(f"dataset directory not found: {exc}", 2)
    except DatasetError as exc:
        return _fail(str(exc))
    try:
        config = _read_config(args.config, args.seed, args.variant)
    except (OSError, ValueError) as exc:
        return _fail(f"bad config: {exc}")
    try:
        params, history = trainer.train(g, config)
    except (trainer.TrainingDivergedError, ValueError) as exc:
        return _fail(str(exc))
    os.makedirs(args.out, exist_ok=True)
    save_checkpoint(params, os.path.join(args.out, CHECKPOINT_NAME))
    trainer.write_loss_csv(history, os.path.join(args.out, LOSS_CSV_NAME))
    with open(os.path.join(args.out, "config.txt"), "w") as fh:
        fh.write(trainer.format_config(config))
    print(
        f"trained {config.epochs} epochs; loss {history[0]:.6f} -> {history[-1]:.6f}; "
        f"checkpoint in {args.out}"
    )
    return 0


def cmd_eval(args: argparse.Namespace) -> int:
    try:
        g, splits = _load_graph(args.dataset)
    except FileNotFoundError as exc:
        return _fail(f"dataset directory not found: {exc}", 2)
    except DatasetError as exc:
        return _fail(str(exc))
    if g.labels is None:
        return _fail("dataset has no labels; nothing to evaluate")
    try:
        params = load_checkpoint(args.checkpoint)
    except (OSError, ValueError) as exc:
        return _fail(f"cannot load checkpoint: {exc}")
    embeddings = trainer.embed(params, g)
    result = probe.evaluate(
        embeddings, g.labels, n_runs=args.runs, split_seed_base=args.seed, splits=splits
    )
    print("run\tseed\tl2\taccuracy")
    for run in range(len(result.accuracies)):
        print(
            f"{run}\t{result.seeds[run]}\t{result.l2_values[run]:g}"
            f"\t{result.accuracies[run]:.6f}"
        )
    print(f"# mean {result.summary()}")
    if args.out:
        probe.write_probe_tsv(result, args.out)
    return 0


def _edge_rows(g: Graph, weights: np.ndarray) -> list[tuple[int, int, float]]:
    """One row per undirected pair (or per arc when directed)."""
    src, dst = g.arcs()
    rows = []
    for a in range(len(src)):
        u, v = int(src[a]), int(dst[a])
        if not g.directed and u > v:
            continue
        rows.append((u, v, float(weights[a])))
    return rows


def cmd_centrality(args: argparse.Namespace) -> int:
    try:
        g, _ = _load_graph(args.dataset)
    except FileNotFoundError as exc:
        return _fail(f"dataset directory not found: {exc}", 2)
    except DatasetError as exc:
        return _fail(str(exc))
    try:
        nc = centrality.compute_centrality(g, args.measure)
    except centrality.ConvergenceError as exc:
        return _fail(str(exc))
    ew = centrality.edge_centrality(g, nc)
    node_lines = ["node_id\tscore"] + [
        f"{i}\t{nc.scores[i]:.10g}" for i in range(g.num_nodes)
    ]
    edge_lines = ["src\tdst\tweight"] + [
        f"{u}\t{v}\t{w:.10g}" for u, v, w in _edge_rows(g, ew.values)
    ]
    if args.out:
        os.makedirs(args.out, exist_ok=True)
        with open(os.path.join(args.out, "nodes.tsv"), "w") as fh:
            fh.write("\n".join(node_lines) + "\n")
        with open(os.path.join(args.out, "edges.tsv"), "w") as fh:
            fh.write("\n".join(edge_lines) + "\n")
        print(f"wrote {g.num_nodes} node scores and {len(edge_lines) - 1} edge rows to {args.out}")
    else:
        print("\n".join(node_lines))
        print()
        print("\n".join(edge_lines))
    return 0


def cmd_augment_stats(args: argparse.Namespace) -> int:
    try:
        g, _ = _load_graph(args.dataset)
    except FileNotFoundError as exc:
        return _fail(f"dataset directory not found: {exc}", 2)
    except DatasetError as exc:
        return _fail(str(exc))
    try:
        config = _read_config(args.config, args.seed, args.variant)
    except (OSError, ValueError) as exc:
        return _fail(f"bad config: {exc}")
    plan, _ = trainer.build_view_plans(g, config)
    rng = np.random.default_rng(config.seed)
    src, dst = g.arcs()
    keys = src * g.num_nodes + dst
    dropped = np.zeros(g.num_arcs)
    for _ in range(args.samples):
        view = augment.sample_view(g, plan, rng)
        vsrc, vdst = view.arcs()
        dropped += ~np.isin(keys, vsrc * g.num_nodes + vdst)
    freq = dropped / args.samples
    print("src\tdst\tdrop_prob\tempirical_drop")
    for a in range(g.num_arcs):
        u, v = int(src[a]), int(dst[a])
        if not g.directed and u > v:
            continue
        print(f"{u}\t{v}\t{plan.edge_drop_probs[a]:.6f}\t{freq[a]:.6f}")
    return 0


def _parse_grid(spec_str: str) -> list[float]:
    parts = spec_str.split(":")
    if len(parts) != 3:
        raise ValueError(f"grid must be START:STOP:STEP, got {spec_str!r}")
    start, stop, step = (float(p) for p in parts)
    if step <= 0.0 or stop < start:
        raise ValueError(f"bad grid range {spec_str!r}")
    values = []
    v = start
    while v <= stop + 1e-9:
        values.append(round(v, 10))
        v += step
    return values


def _sweep_cell(g: Graph, config: TrainConfig, p_e: float, p_f: float, runs: int) -> float:
    cell_config = dataclasses.replace(config, p_e1=p_e, p_e2=p_e, p_f1=p_f, p_f2=p_f)
    try:
        params, _ = trainer.train(g, cell_config)
    except trainer.TrainingDivergedError:
        return float("nan")  # mark the cell, keep the rest of the sweep alive
    embeddings = trainer.embed(params, g)
    result = probe.evaluate(
        embeddings, g.labels, n_runs=runs, split_seed_base=cell_config.seed
    )
    return result.mean


def cmd_sweep(args: argparse.Namespace) -> int:
    try:
        g, _ = _load_graph(args.dataset)
    except FileNotFoundError as exc:
        return _fail(f"dataset directory not found: {exc}", 2)
    except DatasetError as exc:
        return _fail(str(exc))
    if g.labels is None:
        return _fail("dataset has no labels; sweep needs probe accuracy")
    try:
        config = _read_config(args.config, args.seed, args.variant)
        grid = _parse_grid(args.grid)
    except (OSError, ValueError) as exc:
        return _fail(str(exc))

    cells = [(p_e, p_f) for p_e in grid for p_f in grid]
    workers = max(1, int(os.environ.get("GCA_THREADS", "1")))
    if workers == 1:
        means = [_sweep_cell(g, config, p_e, p_f, args.runs) for p_e, p_f in cells]
    else:
        with concurrent.futures.ThreadPoolExecutor(max_workers=workers) as pool:
            means = list(
                pool.map(lambda c: _sweep_cell(g, config, c[0], c[1], args.runs), cells)
            )
    lines = ["p_e\\p_f\t" + "\t".join(f"{p_f:g}" for p_f in grid)]
    it = iter(means)
    for p_e in grid:
        row = [f"{p_e:g}"] + [f"{next(it):.6f}" for _ in grid]
        lines.append("\t".join(row))
    text = "\n".join(lines) + "\n"
    if args.out:
        with open(args.out, "w") as fh:
            fh.write(text)
        print(f"wrote {len(grid)}x{len(grid)} accuracy matrix to {args.out}")
    else:
        print(text, end="")
    return 0


def cmd_verify(args: argparse.Namespace) -> int:
    rng = np.random.default_rng(args.seed)
    failures = 0

    def check(name: str, ok: bool, detail: str = "") -> None:
        nonlocal failures
        status = "PASS" if ok else "FAIL"
        suffix = f" ({detail})" if detail else ""
        print(f"{status} {name}{suffix}")
        if not ok:
            failures += 1

    point = rng.normal(size=6)
    fd = oracle.finite_diff(lambda x: 0.5 * float(np.sum(x * x)), point)
    check(
        "finite differences on a quadratic",
        bool(np.max(np.abs(fd - point)) < 1e-9),
        f"max err {np.max(np.abs(fd - point)):.2e}",
    )

    z_u = rng.normal(size=(12, 5))
    z_v = rng.normal(size=(12, 5))
    report = objective.contrastive_objective(z_u, z_v, 0.5)
    naive = oracle.naive_loss(z_u, z_v, 0.5)
    check(
        "vectorized loss equals the naive double loop",
        abs(report.J - naive) < 1e-10,
        f"diff {abs(report.J - naive):.2e}",
    )

    flat = np.concatenate([z_u.ravel(), z_v.ravel()])

    def loss_of(vec: np.ndarray) -> float:
        a = vec[: z_u.size].reshape(z_u.shape)
        b = vec[z_u.size :].reshape(z_v.shape)
        return objective.contrastive_objective(a, b, 0.5).J

    fd_grad = oracle.finite_diff(loss_of, flat)
    analytic = np.concatenate([report.grad_U.ravel(), report.grad_V.ravel()])
    rel = np.max(np.abs(fd_grad - analytic)) / max(np.max(np.abs(analytic)), 1e-12)
    check("loss gradient matches finite differences", bool(rel < 1e-6), f"rel err {rel:.2e}")

    sym = rng.normal(size=(8, 8))
    sym = (sym + sym.T) / 2.0
    lam, vec = oracle.dense_eigen(sym)
    resid = float(np.max(np.abs(sym @ vec - lam * vec)))
    check("dense eigensolver self-residual", resid < 1e-8, f"residual {resid:.2e}")

    ok_bound = True
    worst = -np.inf
    for _ in range(20):
        a = rng.normal(size=(10, 4))
        b = rng.normal(size=(10, 4))
        j = objective.contrastive_objective(a, b, 0.4).J
        bound = objective.infonce_estimate(a, b, 0.4) + objective.infonce_estimate(b, a, 0.4)
        worst = max(worst, 2.0 * j - bound)
        if 2.0 * j > bound + 1e-9:
            ok_bound = False
    check("objective bounded by the density-ratio estimates", ok_bound, f"max gap {worst:.2e}")

    if args.out:
        os.makedirs(args.out, exist_ok=True)
        s_uv, s_uu, s_vv = objective.similarity_matrices(z_u, z_v)
        for name, mat in (("sim_uv", s_uv), ("sim_uu", s_uu), ("sim_vv", s_vv)):
            np.savetxt(os.path.join(args.out, f"{name}.tsv"), mat, delimiter="\t")
        print(f"wrote similarity matrices to {args.out}")

    return 1 if failures else 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="gca",
        description="Contrastive graph representation learning with "
        "centrality-adaptive augmentation.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p_train = sub.add_parser("train", help="train an encoder and save a checkpoint")
    p_train.add_argument("--config", help="key = value hyperparameter file")
    p_train.add_argument("--dataset", required=True, help="portable dataset directory")
    p_train.add_argument("--out", required=True, help="output directory")
    p_train.add_argument("--seed", type=int, default=None, help="override config seed")
    p_train.add_argument("--variant", choices=sorted(VARIANTS), default=None)
    p_train.set_defaults(func=cmd_train)

    p_eval = sub.add_parser("eval", help="linear-probe a saved checkpoint")
    p_eval.add_argument("checkpoint", help="checkpoint file from train")
    p_eval.add_argument("--dataset", required=True)
    p_eval.add_argument("--runs", type=int, default=20, help="probe repetitions")
    p_eval.add_argument("--seed", type=int, default=0, help="split seed base")
    p_eval.add_argument("--out", help="also write the TSV here")
    p_eval.set_defaults(func=cmd_eval)

    p_cent = sub.add_parser("centrality", help="export node and edge centrality TSVs")
    p_cent.add_argument("--dataset", required=True)
    p_cent.add_argument("--measure", choices=centrality.MEASURES, required=True)
    p_cent.add_argument("--out", help="directory for nodes.tsv / edges.tsv")
    p_cent.set_defaults(func=cmd_centrality)

    p_aug = sub.add_parser(
        "augment-stats", help="per-edge removal probabilities and observed frequencies"
    )
    p_aug.add_argument("--dataset", required=True)
    p_aug.add_argument("--config", help="config supplying budgets (view 1)")
    p_aug.add_argument("--seed", type=int, default=None)
    p_aug.add_argument("--variant", choices=sorted(VARIANTS), default=None)
    p_aug.add_argument("--samples", type=int, default=1000)
    p_aug.set_defaults(func=cmd_augment_stats)

    p_sweep = sub.add_parser("sweep", help="accuracy over a (p_e, p_f) grid")
    p_sweep.add_argument("--dataset", required=True)
    p_sweep.add_argument("--config", help="base hyperparameters")
    p_sweep.add_argument("--grid", required=True, help="START:STOP:STEP, inclusive")
    p_sweep.add_argument("--runs", type=int, default=20)
    p_sweep.add_argument("--seed", type=int, default=None)
    p_sweep.add_argument("--variant", choices=sorted(VARIANTS), default=None)
    p_sweep.add_argument("--out", help="matrix TSV path")
    p_sweep.set_defaults(func=cmd_sweep)

    p_verify = sub.add_parser("verify", help="run the built-in numerical cross-checks")
    p_verify.add_argument("--seed", type=int, default=0)
    p_verify.add_argument("--out", help="directory for similarity-matrix dumps")
    p_verify.set_defaults(func=cmd_verify)

    return parser


def main(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    return args.func(args)


if __name__ == "__main__":
    sys.exit(main())
