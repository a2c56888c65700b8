"""Loss, noise injection, training loop, evaluation, hyperparameter search.

Engines train on one-step transitions with teacher forcing: engine 1 on the
ten stress-release transitions, engine 2 on the creep transition.  Inputs
get noise proportional to the cumulative update (G_t - G_0), which hardens
the rollout against its own accumulated error; the loss adds a junction
dislocation penalty to plain feature regression.
"""

from __future__ import annotations

import time
from dataclasses import dataclass, field, replace

import numpy as np

from . import grid as gridmod
from . import nn
from .dataset import Dataset, dataset_stats, fit_normalizers, percentile_nearest_rank, split_dataset
from .errors import NonFiniteGradient
from .grid import ContiguityPairs, GridGraph, Trajectory, contiguity_pairs, grid_dimension
from .model import (
    SurrogateModel,
    build_model,
    concat_tables,
    engine_forward,
    gather_pairs,
    transform_adjacency,
    transform_feature_arrays,
)
from .nn import Tensor

# paper-reported accuracy of the original system, kept in reports for context
REFERENCE_POINTS = {
    "paper_mean_mm": 2.89,
    "paper_mean_relative_pct": 3.03,
    "paper_p97_mm": 6.93,
    "paper_p97_relative_pct": 4.13,
}


@dataclass(frozen=True)
class Hyperparams:
    a: float = 1.0  # dislocation penalty strength
    gamma: float = 0.1  # noise strength
    dataset_size: int | None = None  # cap on training trajectories
    learning_rate: float = 3e-4
    batch_size: int = 16
    epochs: int = 30
    creep_epochs: int | None = None  # defaults to epochs
    seed: int = 0
    latent: int = 32
    hidden: tuple[int, ...] = (256, 128, 64, 32, 16)
    cutoff: float = 0.98
    augment: bool = True
    val_fraction: float = 0.1

    def validate(self) -> None:
        if self.a < 0 or self.gamma < 0:
            raise ValueError("a and gamma must be non-negative")

    def to_dict(self) -> dict:
        return {
            "a": self.a,
            "gamma": self.gamma,
            "dataset_size": self.dataset_size,
            "learning_rate": self.learning_rate,
            "batch_size": self.batch_size,
            "epochs": self.epochs,
            "creep_epochs": self.creep_epochs,
            "seed": self.seed,
            "latent": self.latent,
            "hidden": list(self.hidden),
            "cutoff": self.cutoff,
            "augment": self.augment,
            "val_fraction": self.val_fraction,
        }


# -- loss ---------------------------------------------------------------------


def loss(
    pred: GridGraph, truth: GridGraph, pairs: ContiguityPairs, a: float
) -> tuple[float, dict]:
    """Regression loss plus weighted junction dislocation.

    The regression term sums each element's mean squared channel error over
    all nodes and edges; the dislocation term sums the Euclidean distances
    between the predicted positions of each supposedly coincident vertex
    pair.
    """
    reg = float(
        ((pred.nodes - truth.nodes) ** 2).sum() / pred.nodes.shape[1]
        + ((pred.edges - truth.edges) ** 2).sum() / pred.edges.shape[1]
    )
    disloc = float(pairs.distances(pred).sum())
    return reg + a * disloc, {"reg": reg, "disloc": disloc, "a": a}


def inject_noise(
    g_t: GridGraph, g_0: GridGraph, gamma: float, rng: np.random.Generator
) -> GridGraph:
    """Add noise proportional to the cumulative update G_t - G_0.

    Each geometry and stress channel gets an independent N(0, gamma^2)
    factor; design channels (fixed flag, actuator) are left untouched.
    """
    out = g_t.copy()
    if gamma == 0.0:
        return out
    dn = g_t.nodes - g_0.nodes
    de = g_t.edges - g_0.edges
    noise_n = dn * rng.normal(0.0, gamma, dn.shape)
    noise_e = de * rng.normal(0.0, gamma, de.shape)
    noise_n[:, gridmod.NODE_DESIGN_COLS] = 0.0
    noise_e[:, gridmod.EDGE_DESIGN_COLS] = 0.0
    out.nodes = g_t.nodes + noise_n
    out.edges = g_t.edges + noise_e
    return out


# -- training ------------------------------------------------------------------


class _SampleBank:
    """Per-trajectory frame arrays plus cached augmented views."""

    def __init__(self, trajectories: list[Trajectory]):
        self.nodes = [np.stack([f.nodes for f in t.frames]).astype(np.float64) for t in trajectories]
        self.edges = [np.stack([f.edges for f in t.frames]).astype(np.float64) for t in trajectories]
        self.adjacency = [t.frames[0].adjacency for t in trajectories]
        self._aug_cache: dict = {}
        self.n = len(trajectories)

    def frames(self, i: int, k: int, mirror: bool):
        """(nodes, edges, adjacency, pairs) of trajectory i under an isometry."""
        key = (i, k, mirror)
        hit = self._aug_cache.get(key)
        if hit is not None:
            return hit
        nodes, edges = self.nodes[i], self.edges[i]
        if (k, mirror) != (0, False):
            n2, e2 = transform_feature_arrays(
                nodes.reshape(-1, gridmod.NODE_FEAT), edges.reshape(-1, gridmod.EDGE_FEAT), k, mirror
            )
            nodes = n2.reshape(nodes.shape)
            edges = e2.reshape(edges.shape)
        adj = transform_adjacency(self.adjacency[i], k, mirror)
        g0 = GridGraph(adjacency=adj, nodes=nodes[0], edges=edges[0])
        pairs = contiguity_pairs(g0)
        out = (nodes, edges, adj, pairs)
        self._aug_cache[key] = out
        return out


def _batch_loss_tensors(
    engine,
    normalizers,
    in_nodes: np.ndarray,
    in_edges: np.ndarray,
    truth_nodes: np.ndarray,
    truth_edges: np.ndarray,
    tables,
    pair_index: np.ndarray,
    n_graphs: int,
    a: float,
):
    dn, de = engine_forward(engine, normalizers, in_nodes, in_edges, tables)
    pred_nodes = nn.add(dn, Tensor(in_nodes.astype(dn.data.dtype)))
    pred_edges = nn.add(de, Tensor(in_edges.astype(de.data.dtype)))

    # per-element channel means summed over elements, averaged over the batch
    node_w = 1.0 / (in_nodes.shape[1] * n_graphs)
    edge_w = 1.0 / (in_edges.shape[1] * n_graphs)
    reg = nn.add(
        nn.mul_const(
            nn.sum_all(nn.square(nn.sub(pred_nodes, Tensor(truth_nodes.astype(dn.data.dtype))))),
            node_w,
        ),
        nn.mul_const(
            nn.sum_all(nn.square(nn.sub(pred_edges, Tensor(truth_edges.astype(de.data.dtype))))),
            edge_w,
        ),
    )
    if a > 0.0 and len(pair_index):
        nv = nn.reshape(nn.slice_cols(pred_nodes, 0, 24), (-1, 3))
        ev = nn.reshape(nn.slice_cols(pred_edges, 0, 36), (-1, 3))
        verts = nn.concat([nv, ev], axis=0)
        d = nn.norm_rows(
            nn.sub(nn.gather_rows(verts, pair_index[:, 0]), nn.gather_rows(verts, pair_index[:, 1]))
        )
        disloc = nn.mul_const(nn.sum_all(d), 1.0 / n_graphs)
        total = nn.add(reg, nn.mul_const(disloc, a))
    else:
        disloc = None
        total = reg
    return total, reg, disloc


def _flat_pair_index(pairs_list: list[ContiguityPairs], n_graphs: int) -> np.ndarray:
    """Stack per-graph vertex-pair slots into batch-flat row indices.

    Predicted vertices are stacked node corners (72 per graph) followed by
    edge corners (144 per graph).
    """
    out = []
    node_total = 72 * n_graphs
    for g, pairs in enumerate(pairs_list):
        p = pairs.pairs.astype(np.int64).copy()
        node_side = p[:, 0] + g * 72
        edge_side = node_total + g * 144 + (p[:, 1] - 72)
        out.append(np.stack([node_side, edge_side], axis=1))
    return np.concatenate(out) if out else np.zeros((0, 2), dtype=np.int64)


def train(
    dataset: Dataset,
    hp: Hyperparams,
    normalizers=None,
    log=None,
) -> tuple[SurrogateModel, list[dict]]:
    """Train both engines; returns the best-validation model and history.

    Fully deterministic for a given dataset and hyperparams: sample order,
    augmentation draws, and noise all come from one seeded generator.
    """
    hp.validate()
    say = log or (lambda msg: None)
    trajectories = dataset.trajectories
    if hp.dataset_size is not None:
        trajectories = trajectories[: hp.dataset_size]
    if not trajectories:
        raise ValueError("no training trajectories")

    n_val = max(int(len(trajectories) * hp.val_fraction), 1) if len(trajectories) > 1 else 0
    val_trajs = trajectories[:n_val]
    train_trajs = trajectories[n_val:]

    if normalizers is None:
        say("fitting normalizers")
        normalizers = fit_normalizers(
            Dataset(train_trajs, dataset.meta), cutoff=hp.cutoff, augment_all=hp.augment
        )
    model = build_model(
        normalizers,
        latent=hp.latent,
        hidden=hp.hidden,
        seed=hp.seed,
        meta={"hyperparams": hp.to_dict(), "dataset": dataset.meta},
    )

    bank = _SampleBank(train_trajs)
    val_bank = _SampleBank(val_trajs) if val_trajs else None
    rng = np.random.default_rng(hp.seed)
    history: list[dict] = []

    stages = [
        ("release", model.engine1, list(range(0, 10)), hp.epochs),
        ("creep", model.engine2, [10], hp.creep_epochs or hp.epochs),
    ]
    for stage, engine, steps, n_epochs in stages:
        samples = [(i, t) for i in range(bank.n) for t in steps]
        params = engine.parameters()
        opt = nn.Adam(params, lr=hp.learning_rate)
        best_val = np.inf
        best_params = [p.data.copy() for p in params]
        for epoch in range(n_epochs):
            order = rng.permutation(len(samples))
            total, count = 0.0, 0
            for lo in range(0, len(order), hp.batch_size):
                batch = [samples[j] for j in order[lo : lo + hp.batch_size]]
                arrays = _make_batch(bank, batch, rng, hp)
                if arrays is None:
                    continue
                in_n, in_e, tr_n, tr_e, tables, pair_index = arrays
                opt.zero_grad()
                total_t, reg_t, _ = _batch_loss_tensors(
                    engine, normalizers, in_n, in_e, tr_n, tr_e, tables, pair_index, len(batch), hp.a
                )
                total_t.backward()
                try:
                    opt.step()
                except NonFiniteGradient:
                    say(f"{stage}: non-finite gradient at epoch {epoch}; aborting stage")
                    for p, saved in zip(params, best_params):
                        p.data = saved.copy()
                    history.append({"stage": stage, "epoch": epoch, "aborted": True})
                    break
                total += float(total_t.data)
                count += 1
            train_loss = total / max(count, 1)
            val_loss = (
                _eval_one_step(engine, normalizers, val_bank, steps, hp) if val_bank else train_loss
            )
            history.append(
                {"stage": stage, "epoch": epoch, "train_loss": train_loss, "val_loss": val_loss}
            )
            say(f"{stage} epoch {epoch}: train {train_loss:.5f} val {val_loss:.5f}")
            if val_loss < best_val:
                best_val = val_loss
                best_params = [p.data.copy() for p in params]
        for p, saved in zip(params, best_params):
            p.data = saved.copy()

    model.meta["history_len"] = len(history)
    return model, history


def _make_batch(bank: _SampleBank, batch, rng, hp: Hyperparams):
    in_n, in_e, tr_n, tr_e, adjs, pairs_list = [], [], [], [], [], []
    for i, t in batch:
        if hp.augment:
            k = int(rng.integers(0, 4))
            mirror = bool(rng.integers(0, 2))
        else:
            k, mirror = 0, False
        nodes, edges, adj, pairs = bank.frames(i, k, mirror)
        g_t_nodes, g_t_edges = nodes[t], edges[t]
        if hp.gamma > 0.0 and t > 0:
            dn = (g_t_nodes - nodes[0]) * rng.normal(0.0, hp.gamma, g_t_nodes.shape)
            de = (g_t_edges - edges[0]) * rng.normal(0.0, hp.gamma, g_t_edges.shape)
            dn[:, gridmod.NODE_DESIGN_COLS] = 0.0
            de[:, gridmod.EDGE_DESIGN_COLS] = 0.0
            g_t_nodes = g_t_nodes + dn
            g_t_edges = g_t_edges + de
        in_n.append(g_t_nodes.astype(np.float32))
        in_e.append(g_t_edges.astype(np.float32))
        tr_n.append(nodes[t + 1].astype(np.float32))
        tr_e.append(edges[t + 1].astype(np.float32))
        adjs.append(adj)
        pairs_list.append(pairs)
    if not in_n:
        return None
    tables = concat_tables([gather_pairs(a) for a in adjs])
    pair_index = _flat_pair_index(pairs_list, len(batch))
    return (
        np.concatenate(in_n),
        np.concatenate(in_e),
        np.concatenate(tr_n),
        np.concatenate(tr_e),
        tables,
        pair_index,
    )


def _eval_one_step(engine, normalizers, bank: _SampleBank, steps, hp: Hyperparams) -> float:
    """Noise-free one-step loss over a validation bank."""
    total, count = 0.0, 0
    for i in range(bank.n):
        nodes, edges, adj, pairs = bank.frames(i, 0, False)
        batch = [(nodes[t], edges[t], nodes[t + 1], edges[t + 1]) for t in steps]
        in_n = np.concatenate([b[0] for b in batch]).astype(np.float32)
        in_e = np.concatenate([b[1] for b in batch]).astype(np.float32)
        tr_n = np.concatenate([b[2] for b in batch]).astype(np.float32)
        tr_e = np.concatenate([b[3] for b in batch]).astype(np.float32)
        tables = concat_tables([gather_pairs(adj)] * len(steps))
        pair_index = _flat_pair_index([pairs] * len(steps), len(steps))
        total_t, _, _ = _batch_loss_tensors(
            engine, normalizers, in_n, in_e, tr_n, tr_e, tables, pair_index, len(steps), hp.a
        )
        total += float(total_t.data)
        count += 1
    return total / max(count, 1)


# -- evaluation ----------------------------------------------------------------


@dataclass
class EvalReport:
    """Held-out rollout accuracy, dislocation, and timing."""

    n_trajectories: int
    mean_vertex_error_mm: float
    p97_vertex_error_mm: float
    mean_relative_error: float
    p97_relative_error: float
    mean_dislocation_mm: float
    per_frame_error_mm: list[float]
    rollout_ms_single: float
    rollout_ms_batch: float
    baseline_mean_error_mm: float
    baseline_mean_relative: float
    reference_points: dict = field(default_factory=lambda: dict(REFERENCE_POINTS))
    extra: dict = field(default_factory=dict)

    def to_dict(self) -> dict:
        return {
            "n_trajectories": self.n_trajectories,
            "mean_vertex_error_mm": self.mean_vertex_error_mm,
            "p97_vertex_error_mm": self.p97_vertex_error_mm,
            "mean_relative_error": self.mean_relative_error,
            "p97_relative_error": self.p97_relative_error,
            "mean_dislocation_mm": self.mean_dislocation_mm,
            "per_frame_error_mm": self.per_frame_error_mm,
            "rollout_ms_single": self.rollout_ms_single,
            "rollout_ms_batch": self.rollout_ms_batch,
            "baseline_mean_error_mm": self.baseline_mean_error_mm,
            "baseline_mean_relative": self.baseline_mean_relative,
            "reference_points": self.reference_points,
            "extra": self.extra,
        }


def _vertex_errors(pred: GridGraph, truth: GridGraph) -> np.ndarray:
    return np.linalg.norm(pred.all_vertices() - truth.all_vertices(), axis=1)


def evaluate(model: SurrogateModel, test: Dataset, timing_rollouts: int = 100) -> EvalReport:
    """Roll out every test trajectory and compare to the oracle frames."""
    trajs = test.trajectories
    if not trajs:
        raise ValueError("empty test set")
    preds: list[Trajectory] = []
    chunk = 100
    for lo in range(0, len(trajs), chunk):
        batch = trajs[lo : lo + chunk]
        preds.extend(
            model.rollout_batch(
                [t.frames[0] for t in batch], [t.design for t in batch], dtype=np.float32
            )
        )

    final_errors, rel_errors, dislocs, base_errors, base_rel = [], [], [], [], []
    frame_acc = np.zeros(12)
    for pred, truth in zip(preds, trajs):
        dim = grid_dimension(truth.frames[0])
        pairs = contiguity_pairs(truth.frames[0])
        for t in range(12):
            frame_acc[t] += _vertex_errors(pred.frames[t], truth.frames[t]).mean()
        e_final = _vertex_errors(pred.frames[11], truth.frames[11])
        final_errors.append(e_final)
        rel_errors.append(e_final / dim)
        dislocs.append(pairs.distances(pred.frames[11]).mean())
        e_base = _vertex_errors(truth.frames[0], truth.frames[11])
        base_errors.append(e_base.mean())
        base_rel.append(e_base.mean() / dim)

    final_errors = np.concatenate(final_errors)
    rel_errors = np.concatenate(rel_errors)

    # timing: single-graph rollouts (float64 path) and one bulk batch (float32)
    n_time = min(timing_rollouts, len(trajs))
    g0s = [t.frames[0] for t in trajs[:n_time]]
    t0 = time.perf_counter()
    for g in g0s[: max(n_time // 10, 3)]:
        model.rollout(g)
    single_ms = (time.perf_counter() - t0) / max(n_time // 10, 3) * 1000.0
    t0 = time.perf_counter()
    model.rollout_batch(g0s, dtype=np.float32)
    batch_ms = (time.perf_counter() - t0) / len(g0s) * 1000.0

    return EvalReport(
        n_trajectories=len(trajs),
        mean_vertex_error_mm=float(final_errors.mean()),
        p97_vertex_error_mm=percentile_nearest_rank(final_errors, 97),
        mean_relative_error=float(rel_errors.mean()),
        p97_relative_error=percentile_nearest_rank(rel_errors, 97),
        mean_dislocation_mm=float(np.mean(dislocs)),
        per_frame_error_mm=(frame_acc / len(trajs)).tolist(),
        rollout_ms_single=single_ms,
        rollout_ms_batch=batch_ms,
        baseline_mean_error_mm=float(np.mean(base_errors)),
        baseline_mean_relative=float(np.mean(base_rel)),
    )


# -- hyperparameter search -------------------------------------------------------


def grid_search(
    dataset: Dataset,
    a_values: list[float],
    gamma_values: list[float],
    sizes: list[int] | None = None,
    base_hp: Hyperparams | None = None,
    log=None,
) -> list[dict]:
    """Train one model per (a, gamma, size) cell and rank by dislocation.

    Cell failures are recorded and the search continues; the best cell is
    flagged by mean dislocation first, vertex error second.
    """
    say = log or (lambda msg: None)
    base_hp = base_hp or Hyperparams()
    sizes = sizes or [None]
    train_set, test_set = split_dataset(dataset, test_fraction=0.2)
    rows: list[dict] = []
    for size in sizes:
        for a in a_values:
            for gamma in gamma_values:
                hp = replace(base_hp, a=a, gamma=gamma, dataset_size=size)
                cell = {"a": a, "gamma": gamma, "size": size}
                say(f"cell {cell}")
                try:
                    model, _ = train(train_set, hp, log=log)
                    report = evaluate(model, test_set)
                    cell.update(
                        {
                            "mean_vertex_error_mm": report.mean_vertex_error_mm,
                            "mean_relative_error": report.mean_relative_error,
                            "mean_dislocation_mm": report.mean_dislocation_mm,
                        }
                    )
                except Exception as exc:  # noqa: BLE001 - cell failures are data
                    cell["error"] = f"{type(exc).__name__}: {exc}"
                rows.append(cell)
    ranked = [r for r in rows if "error" not in r]
    ranked.sort(key=lambda r: (r["mean_dislocation_mm"], r["mean_vertex_error_mm"]))
    for r in rows:
        r["best"] = bool(ranked and r is ranked[0])
    return rows
