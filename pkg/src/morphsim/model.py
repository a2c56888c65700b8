"""The learned surrogate: interaction networks, engines, and the rollout.

An engine chains two interaction networks: the first emits a latent graph
describing aggregate influences, the second consumes the raw graph
concatenated with the latent graph and emits a residual update added to all
physical channels (design channels and adjacency pass through).  Engine 1 is
applied ten times for the stress-release stage, engine 2 once for creep.

Inference runs in float64 and, by default, averages the engine update over
the eight in-plane isometries, which makes rollouts exactly equivariant up
to float rounding.
"""

from __future__ import annotations

import io
import json
import struct
from dataclasses import dataclass, field

import numpy as np

from . import grid, nn
from .errors import RolloutDiverged, ShapeError
from .grid import GridGraph, Trajectory
from .normalize import ROLE_LAYOUTS, NormalizerSet
from .nn import Mlp, MlpSpec, Tensor

CKPT_MAGIC = b"MSIMCKP1"
CKPT_VERSION = 1

ROLES = ("nen", "ene", "node", "edge")

# residual updates never touch the design channels
_NODE_MASK = np.ones(grid.NODE_FEAT)
_NODE_MASK[grid.NODE_FIXED_COL] = 0.0
_EDGE_MASK = np.ones(grid.EDGE_FEAT)
_EDGE_MASK[grid.EDGE_ACTUATOR_COL] = 0.0


@dataclass
class PairTables:
    """Index/code tables for one or more stacked graphs.

    nen pairs interact node -> edge -> node and are aggregated on the
    receiver node; ene pairs edge -> node -> edge aggregate on the receiver
    edge.  Ordering is (receiver, sender, conduit), ascending.
    """

    nen_sender: np.ndarray
    nen_conduit: np.ndarray
    nen_receiver: np.ndarray
    nen_codes: np.ndarray  # (P, 2) float: code at sender side, receiver side
    ene_sender: np.ndarray
    ene_conduit: np.ndarray
    ene_receiver: np.ndarray
    ene_codes: np.ndarray
    n_nodes: int
    n_edges: int


_pair_cache: dict[bytes, PairTables] = {}


def gather_pairs(adjacency: np.ndarray) -> PairTables:
    """Enumerate interaction pairs of one graph from its adjacency table."""
    key = adjacency.tobytes()
    hit = _pair_cache.get(key)
    if hit is not None:
        return hit
    n_edges, n_nodes = adjacency.shape
    nen, ene = [], []
    for j in range(n_edges):  # conduit edge joins exactly its two nodes
        nodes = np.nonzero(adjacency[j])[0]
        for i in nodes:
            for k in nodes:
                if i != k:
                    nen.append((k, i, j, adjacency[j, i], adjacency[j, k]))
    for j in range(n_nodes):  # conduit node joins its incident edges
        edges = np.nonzero(adjacency[:, j])[0]
        for i in edges:
            for k in edges:
                if i != k:
                    ene.append((k, i, j, adjacency[i, j], adjacency[k, j]))
    nen.sort()
    ene.sort()
    nen_arr = np.array(nen, dtype=np.float64).reshape(-1, 5)
    ene_arr = np.array(ene, dtype=np.float64).reshape(-1, 5)
    tables = PairTables(
        nen_sender=nen_arr[:, 1].astype(np.intp),
        nen_conduit=nen_arr[:, 2].astype(np.intp),
        nen_receiver=nen_arr[:, 0].astype(np.intp),
        nen_codes=nen_arr[:, 3:5].copy(),
        ene_sender=ene_arr[:, 1].astype(np.intp),
        ene_conduit=ene_arr[:, 2].astype(np.intp),
        ene_receiver=ene_arr[:, 0].astype(np.intp),
        ene_codes=ene_arr[:, 3:5].copy(),
        n_nodes=n_nodes,
        n_edges=n_edges,
    )
    _pair_cache[key] = tables
    return tables


def concat_tables(tables: list[PairTables]) -> PairTables:
    """Stack per-graph tables with node/edge index offsets."""
    if len(tables) == 1:
        return tables[0]
    parts = {k: [] for k in ("ns", "nc", "nr", "ncode", "es", "ec", "er", "ecode")}
    node_off = edge_off = 0
    for t in tables:
        parts["ns"].append(t.nen_sender + node_off)
        parts["nc"].append(t.nen_conduit + edge_off)
        parts["nr"].append(t.nen_receiver + node_off)
        parts["ncode"].append(t.nen_codes)
        parts["es"].append(t.ene_sender + edge_off)
        parts["ec"].append(t.ene_conduit + node_off)
        parts["er"].append(t.ene_receiver + edge_off)
        parts["ecode"].append(t.ene_codes)
        node_off += t.n_nodes
        edge_off += t.n_edges
    return PairTables(
        nen_sender=np.concatenate(parts["ns"]),
        nen_conduit=np.concatenate(parts["nc"]),
        nen_receiver=np.concatenate(parts["nr"]),
        nen_codes=np.concatenate(parts["ncode"]),
        ene_sender=np.concatenate(parts["es"]),
        ene_conduit=np.concatenate(parts["ec"]),
        ene_receiver=np.concatenate(parts["er"]),
        ene_codes=np.concatenate(parts["ecode"]),
        n_nodes=node_off,
        n_edges=edge_off,
    )


def assemble_pair_inputs(nodes: np.ndarray, edges: np.ndarray, tables: PairTables):
    """Raw (un-normalized) nen/ene pair matrices for stacked graphs."""
    dtype = nodes.dtype
    nen = np.concatenate(
        [
            nodes[tables.nen_sender],
            edges[tables.nen_conduit],
            nodes[tables.nen_receiver],
            tables.nen_codes.astype(dtype, copy=False),
        ],
        axis=1,
    )
    ene = np.concatenate(
        [
            edges[tables.ene_sender],
            nodes[tables.ene_conduit],
            edges[tables.ene_receiver],
            tables.ene_codes.astype(dtype, copy=False),
        ],
        axis=1,
    )
    return nen, ene


# -- networks ---------------------------------------------------------------


@dataclass
class InteractionNetwork:
    """Four MLPs: two pairwise interaction maps and two element updates."""

    phi_nen: Mlp
    phi_ene: Mlp
    phi_node: Mlp
    phi_edge: Mlp
    latent: int

    def mlps(self) -> dict[str, Mlp]:
        return {
            "nen": self.phi_nen,
            "ene": self.phi_ene,
            "node": self.phi_node,
            "edge": self.phi_edge,
        }

    def parameters(self) -> list[Tensor]:
        out = []
        for m in self.mlps().values():
            out.extend(m.parameters())
        return out


@dataclass
class Engine:
    """Two sequential interaction networks producing a residual update."""

    in1: InteractionNetwork
    in2: InteractionNetwork

    def parameters(self) -> list[Tensor]:
        return self.in1.parameters() + self.in2.parameters()


def default_hidden(scale: str = "desk") -> tuple[int, ...]:
    return (256, 128, 64, 32, 16) if scale == "desk" else (2048, 1024, 512, 256, 128)


def build_engine(
    normalizers: NormalizerSet,
    latent: int = 32,
    hidden: tuple[int, ...] = (256, 128, 64, 32, 16),
    seed: int = 0,
) -> Engine:
    """Size an engine's MLPs from the fitted normalizers."""
    r = normalizers.retained_dims()
    L = latent

    def mlp(idx, in_w, out_w):
        return Mlp(MlpSpec(in_w, tuple(hidden), out_w, seed=seed * 1000 + idx))

    in1 = InteractionNetwork(
        phi_nen=mlp(0, r["nen"], L),
        phi_ene=mlp(1, r["ene"], L),
        phi_node=mlp(2, r["node"] + L, L),
        phi_edge=mlp(3, r["edge"] + L, L),
        latent=L,
    )
    in2 = InteractionNetwork(
        phi_nen=mlp(4, r["nen"] + 3 * L, L),
        phi_ene=mlp(5, r["ene"] + 3 * L, L),
        phi_node=mlp(6, r["node"] + 2 * L, r["node_out"]),
        phi_edge=mlp(7, r["edge"] + 2 * L, r["edge_out"]),
        latent=L,
    )
    return Engine(in1=in1, in2=in2)


def engine_forward(
    engine: Engine,
    normalizers: NormalizerSet,
    nodes: np.ndarray,
    edges: np.ndarray,
    tables: PairTables,
) -> tuple[Tensor, Tensor]:
    """Residual updates (delta nodes, delta edges) for stacked graphs.

    Differentiable in the MLP parameters; graph features enter as constants.
    """
    nen_raw, ene_raw = assemble_pair_inputs(nodes, edges, tables)
    dtype = engine.in1.phi_nen.dtype if nodes.dtype == np.float32 else nodes.dtype
    z_nen = Tensor(normalizers["nen"].transform(nen_raw).astype(dtype))
    z_ene = Tensor(normalizers["ene"].transform(ene_raw).astype(dtype))
    z_node = Tensor(normalizers["node"].transform(nodes).astype(dtype))
    z_edge = Tensor(normalizers["edge"].transform(edges).astype(dtype))

    # IN1: latent graph
    i_n1 = engine.in1.phi_nen(z_nen)
    i_e1 = engine.in1.phi_ene(z_ene)
    agg_n1 = nn.segment_sum(i_n1, tables.nen_receiver, tables.n_nodes)
    agg_e1 = nn.segment_sum(i_e1, tables.ene_receiver, tables.n_edges)
    lat_n = engine.in1.phi_node(nn.concat([z_node, agg_n1]))
    lat_e = engine.in1.phi_edge(nn.concat([z_edge, agg_e1]))

    # IN2: consumes raw (normalized) plus latent graph
    nen2 = nn.concat(
        [
            z_nen,
            nn.gather_rows(lat_n, tables.nen_sender),
            nn.gather_rows(lat_e, tables.nen_conduit),
            nn.gather_rows(lat_n, tables.nen_receiver),
        ]
    )
    ene2 = nn.concat(
        [
            z_ene,
            nn.gather_rows(lat_e, tables.ene_sender),
            nn.gather_rows(lat_n, tables.ene_conduit),
            nn.gather_rows(lat_e, tables.ene_receiver),
        ]
    )
    i_n2 = engine.in2.phi_nen(nen2)
    i_e2 = engine.in2.phi_ene(ene2)
    agg_n2 = nn.segment_sum(i_n2, tables.nen_receiver, tables.n_nodes)
    agg_e2 = nn.segment_sum(i_e2, tables.ene_receiver, tables.n_edges)
    out_n = engine.in2.phi_node(nn.concat([z_node, lat_n, agg_n2]))
    out_e = engine.in2.phi_edge(nn.concat([z_edge, lat_e, agg_e2]))

    # denormalize targets back to feature space, mask design channels
    dn = _denormalize(out_n, normalizers["node_out"], dtype)
    de = _denormalize(out_e, normalizers["edge_out"], dtype)
    dn = nn.mul(dn, _NODE_MASK.astype(dtype))
    de = nn.mul(de, _EDGE_MASK.astype(dtype))
    return dn, de


def _denormalize(z: Tensor, normalizer, dtype) -> Tensor:
    _, _, D, e = normalizer.fused()
    return nn.add(nn.matmul(z, Tensor(D.astype(dtype))), Tensor(e.astype(dtype)))


def engine_forward_array(
    engine: Engine,
    normalizers: NormalizerSet,
    nodes: np.ndarray,
    edges: np.ndarray,
    tables: PairTables,
) -> tuple[np.ndarray, np.ndarray]:
    """Tape-free twin of engine_forward for inference."""
    from .normalize import center_coords

    dtype = nodes.dtype
    nen_raw, ene_raw = assemble_pair_inputs(nodes, edges, tables)

    def norm(role, X, inplace=False):
        n = normalizers[role]
        M, c, _, _ = n.fused(dtype)
        return center_coords(X, n.layout, inplace=inplace) @ M + c

    z_nen = norm("nen", nen_raw, inplace=True)
    z_ene = norm("ene", ene_raw, inplace=True)
    z_node = norm("node", nodes)
    z_edge = norm("edge", edges)
    segsum = nn.segment_sum_array

    i_n1 = engine.in1.phi_nen.forward_array(z_nen)
    i_e1 = engine.in1.phi_ene.forward_array(z_ene)
    agg_n1 = segsum(i_n1, tables.nen_receiver, tables.n_nodes)
    agg_e1 = segsum(i_e1, tables.ene_receiver, tables.n_edges)
    lat_n = engine.in1.phi_node.forward_array(np.concatenate([z_node, agg_n1], axis=1))
    lat_e = engine.in1.phi_edge.forward_array(np.concatenate([z_edge, agg_e1], axis=1))

    nen2 = np.concatenate(
        [z_nen, lat_n[tables.nen_sender], lat_e[tables.nen_conduit], lat_n[tables.nen_receiver]],
        axis=1,
    )
    ene2 = np.concatenate(
        [z_ene, lat_e[tables.ene_sender], lat_n[tables.ene_conduit], lat_e[tables.ene_receiver]],
        axis=1,
    )
    i_n2 = engine.in2.phi_nen.forward_array(nen2)
    i_e2 = engine.in2.phi_ene.forward_array(ene2)
    agg_n2 = segsum(i_n2, tables.nen_receiver, tables.n_nodes)
    agg_e2 = segsum(i_e2, tables.ene_receiver, tables.n_edges)
    out_n = engine.in2.phi_node.forward_array(np.concatenate([z_node, lat_n, agg_n2], axis=1))
    out_e = engine.in2.phi_edge.forward_array(np.concatenate([z_edge, lat_e, agg_e2], axis=1))

    _, _, Dn, en = normalizers["node_out"].fused(dtype)
    _, _, De, ee = normalizers["edge_out"].fused(dtype)
    dn = (out_n @ Dn + en) * _NODE_MASK.astype(dtype)
    de = (out_e @ De + ee) * _EDGE_MASK.astype(dtype)
    return dn, de


# -- single-IN view (latent graph of one grid) ------------------------------


@dataclass
class FeatureGraph:
    """Adjacency plus arbitrary-width node/edge feature matrices."""

    adjacency: np.ndarray
    nodes: np.ndarray
    edges: np.ndarray


def in_forward(net: InteractionNetwork, graph: GridGraph, normalizers: NormalizerSet) -> FeatureGraph:
    """Apply one interaction network to a graph.

    Pairs are normalized, interaction vectors summed per receiver (zero when
    an element receives none), and element MLPs map (element, aggregate) to
    the replacement features.  Adjacency is unchanged.
    """
    tables = gather_pairs(graph.adjacency)
    nen_raw, ene_raw = assemble_pair_inputs(graph.nodes, graph.edges, tables)
    i_n = net.phi_nen(Tensor(normalizers["nen"].transform(nen_raw)))
    i_e = net.phi_ene(Tensor(normalizers["ene"].transform(ene_raw)))
    agg_n = nn.segment_sum(i_n, tables.nen_receiver, tables.n_nodes)
    agg_e = nn.segment_sum(i_e, tables.ene_receiver, tables.n_edges)
    out_n = net.phi_node(nn.concat([Tensor(normalizers["node"].transform(graph.nodes)), agg_n]))
    out_e = net.phi_edge(nn.concat([Tensor(normalizers["edge"].transform(graph.edges)), agg_e]))
    return FeatureGraph(adjacency=graph.adjacency.copy(), nodes=out_n.data, edges=out_e.data)


# -- isometry helpers on stacked arrays --------------------------------------

_iso_cache: dict[tuple[int, bool], dict] = {}


def _iso_data(k: int, mirror: bool) -> dict:
    key = (k % 4, mirror)
    if key not in _iso_cache:
        g = grid.isometry_matrix(k, mirror)
        _iso_cache[key] = {
            "g": g,
            "sigma": grid._corner_permutation(g),
            "flip": mirror,
            "face_lut": np.array(
                [grid._face_permutation(g).get(c, 0) for c in range(5)], dtype=np.int8
            ),
        }
    return _iso_cache[key]


def transform_feature_arrays(
    nodes: np.ndarray, edges: np.ndarray, k: int, mirror: bool
) -> tuple[np.ndarray, np.ndarray]:
    """grid.transform_graph on stacked (N,28)/(E,52) arrays (no adjacency)."""
    iso = _iso_data(k, mirror)
    g, sigma = iso["g"], iso["sigma"]
    out_n = nodes.copy()
    out_e = edges.copy()
    nv = nodes[:, grid.NODE_VERT_SLICE].reshape(-1, 8, 3)[:, sigma] @ g.T
    out_n[:, grid.NODE_VERT_SLICE] = nv.reshape(len(nodes), -1)
    out_n[:, grid.NODE_CENTER_SLICE] = nodes[:, grid.NODE_CENTER_SLICE] @ g.T
    ev = edges[:, grid.EDGE_VERT_SLICE].reshape(-1, 3, 4, 3)
    stress = edges[:, grid.EDGE_STRESS_SLICE].reshape(-1, 3, 4)
    if iso["flip"]:
        ev = ev[:, :, grid._SECTION_FLIP]
        stress = stress[:, :, grid._SECTION_FLIP]
    out_e[:, grid.EDGE_VERT_SLICE] = (ev @ g.T).reshape(len(edges), -1)
    out_e[:, grid.EDGE_STRESS_SLICE] = stress.reshape(len(edges), -1)
    out_e[:, grid.EDGE_CENTER_SLICE] = edges[:, grid.EDGE_CENTER_SLICE] @ g.T
    return out_n, out_e


def transform_adjacency(adjacency: np.ndarray, k: int, mirror: bool) -> np.ndarray:
    return _iso_data(k, mirror)["face_lut"][adjacency]


ISOMETRIES = tuple((k, m) for m in (False, True) for k in range(4))

_feature_mats: dict | None = None


def _feature_matrices() -> dict:
    """Stacked linear maps of the 8 isometries on feature rows.

    transform_feature_arrays is linear, so each isometry is a matrix acting
    on the right of (N, 28)/(E, 52) feature blocks.
    """
    global _feature_mats
    if _feature_mats is None:
        fn, fe, bn, be = [], [], [], []
        for k, m in ISOMETRIES:
            an, ae = transform_feature_arrays(np.eye(grid.NODE_FEAT), np.eye(grid.EDGE_FEAT), k, m)
            ki, mi = grid.inverse_isometry(k, m)
            ani, aei = transform_feature_arrays(np.eye(grid.NODE_FEAT), np.eye(grid.EDGE_FEAT), ki, mi)
            fn.append(an)
            fe.append(ae)
            bn.append(ani)
            be.append(aei)
        _feature_mats = {
            "fwd_n": np.stack(fn),
            "fwd_e": np.stack(fe),
            "inv_n": np.stack(bn),
            "inv_e": np.stack(be),
        }
    return _feature_mats


# -- surrogate model ---------------------------------------------------------


@dataclass
class SurrogateModel:
    """Two engines, fitted normalizers, and the layout fingerprint."""

    engine1: Engine
    engine2: Engine
    normalizers: NormalizerSet
    latent: int
    hidden: tuple[int, ...]
    feature_layout: str = field(default_factory=grid.layout_hash)
    symmetrize: bool = True
    meta: dict = field(default_factory=dict)

    def parameters(self) -> list[Tensor]:
        return self.engine1.parameters() + self.engine2.parameters()

    def _step_arrays(
        self, engine: Engine, nodes: np.ndarray, edges: np.ndarray, tables: PairTables
    ) -> tuple[np.ndarray, np.ndarray]:
        """One engine update on stacked f64 arrays, optionally symmetrized.

        With symmetrization the eight isometry images run as one fused batch
        and the inverse-mapped updates are averaged, which makes the step
        exactly equivariant up to float rounding.
        """
        if not self.symmetrize:
            return engine_forward_array(engine, self.normalizers, nodes, edges, tables)
        mats = _feature_matrices()
        dtype = nodes.dtype
        fwd_n = mats["fwd_n"].astype(dtype, copy=False)
        fwd_e = mats["fwd_e"].astype(dtype, copy=False)
        inv_n = mats["inv_n"].astype(dtype, copy=False)
        inv_e = mats["inv_e"].astype(dtype, copy=False)
        N, E = len(nodes), len(edges)
        big_n = np.einsum("nf,kfg->kng", nodes, fwd_n).reshape(8 * N, grid.NODE_FEAT)
        big_e = np.einsum("ef,kfg->keg", edges, fwd_e).reshape(8 * E, grid.EDGE_FEAT)
        dn, de = engine_forward_array(engine, self.normalizers, big_n, big_e, tables)
        acc_n = np.einsum("kng,kgf->nf", dn.reshape(8, N, grid.NODE_FEAT), inv_n)
        acc_e = np.einsum("keg,kgf->ef", de.reshape(8, E, grid.EDGE_FEAT), inv_e)
        return acc_n / 8.0, acc_e / 8.0

    def _tables_for(self, adjacencies: list[np.ndarray]) -> PairTables:
        if not self.symmetrize:
            return concat_tables([gather_pairs(a) for a in adjacencies])
        per_iso = [
            concat_tables([gather_pairs(transform_adjacency(a, k, m)) for a in adjacencies])
            for k, m in ISOMETRIES
        ]
        return concat_tables(per_iso)

    def rollout_batch(
        self, graphs: list[GridGraph], designs: list | None = None, dtype=np.float64
    ) -> list[Trajectory]:
        """12-frame trajectories for a batch of t=0 graphs.

        dtype float64 keeps rollouts exactly reproducible under relabeling;
        float32 roughly doubles throughput for bulk evaluation and ranking.
        """
        for g in graphs:
            if g.nodes.shape[1] != grid.NODE_FEAT or g.edges.shape[1] != grid.EDGE_FEAT:
                raise ShapeError("graph feature widths do not match the layout")
        nodes = np.concatenate([g.nodes for g in graphs]).astype(dtype)
        edges = np.concatenate([g.edges for g in graphs]).astype(dtype)
        tables = self._tables_for([g.adjacency for g in graphs])

        frames_per = [[g.copy()] for g in graphs]

        def snapshot(nodes, edges, frame_idx):
            for i, g in enumerate(graphs):
                frames_per[i].append(
                    GridGraph(
                        adjacency=g.adjacency.copy(),
                        nodes=nodes[i * grid.N_JOINTS : (i + 1) * grid.N_JOINTS].astype(np.float64),
                        edges=edges[i * grid.N_BEAMS : (i + 1) * grid.N_BEAMS].astype(np.float64),
                        fixed_origin=g.fixed_origin.copy(),
                    )
                )

        for t in range(1, 12):
            engine = self.engine1 if t <= 10 else self.engine2
            dn, de = self._step_arrays(engine, nodes, edges, tables)
            nodes = nodes + dn
            edges = edges + de
            if not (np.all(np.isfinite(nodes)) and np.all(np.isfinite(edges))):
                raise RolloutDiverged(f"non-finite features at frame {t}", frame=t)
            snapshot(nodes, edges, t)

        designs = designs or [None] * len(graphs)
        return [
            Trajectory(design=d, frames=frames, source="surrogate", meta={"model": self.meta.get("name", "")})
            for d, frames in zip(designs, frames_per)
        ]

    def rollout(self, graph: GridGraph, design=None) -> Trajectory:
        return self.rollout_batch([graph], [design])[0]

    def engine_step(self, engine: Engine, graph: GridGraph) -> GridGraph:
        """G_{t+1} = G_t + masked residual; adjacency and design channels pass."""
        tables = self._tables_for([graph.adjacency])
        dn, de = self._step_arrays(engine, graph.nodes.astype(np.float64), graph.edges.astype(np.float64), tables)
        out = graph.copy()
        out.nodes = graph.nodes + dn
        out.edges = graph.edges + de
        return out


def build_model(
    normalizers: NormalizerSet,
    latent: int = 32,
    hidden: tuple[int, ...] = (256, 128, 64, 32, 16),
    seed: int = 0,
    meta: dict | None = None,
) -> SurrogateModel:
    return SurrogateModel(
        engine1=build_engine(normalizers, latent, hidden, seed=seed * 2 + 1),
        engine2=build_engine(normalizers, latent, hidden, seed=seed * 2 + 2),
        normalizers=normalizers,
        latent=latent,
        hidden=tuple(hidden),
        meta=meta or {},
    )


# -- checkpoint io -----------------------------------------------------------


def _model_arrays(model: SurrogateModel) -> list[tuple[str, np.ndarray]]:
    out = []
    for ei, engine in (("e1", model.engine1), ("e2", model.engine2)):
        for part, net in (("in1", engine.in1), ("in2", engine.in2)):
            for role, mlp in net.mlps().items():
                for li, p in enumerate(mlp.parameters()):
                    out.append((f"{ei}.{part}.{role}.{li}", p.data.astype(np.float32)))
    for role in sorted(model.normalizers.normalizers):
        for name, arr in model.normalizers[role].to_arrays().items():
            out.append((f"norm.{role}.{name}", np.asarray(arr, dtype=np.float64)))
    return out


def save_model(model: SurrogateModel, path) -> dict:
    """Versioned binary checkpoint plus a JSON manifest twin."""
    specs = {}
    for ei, engine in (("e1", model.engine1), ("e2", model.engine2)):
        for part, net in (("in1", engine.in1), ("in2", engine.in2)):
            for role, mlp in net.mlps().items():
                specs[f"{ei}.{part}.{role}"] = mlp.spec.to_dict()
    arrays = _model_arrays(model)
    manifest = {
        "format": "morphsim-checkpoint",
        "version": CKPT_VERSION,
        "feature_layout": model.feature_layout,
        "latent": model.latent,
        "hidden": list(model.hidden),
        "symmetrize": model.symmetrize,
        "specs": specs,
        "normalizers": model.normalizers.summary(),
        "arrays": [
            {"name": n, "shape": list(a.shape), "dtype": str(a.dtype)} for n, a in arrays
        ],
        "meta": model.meta,
    }
    blob = json.dumps(manifest, sort_keys=True).encode()
    with open(path, "wb") as f:
        f.write(CKPT_MAGIC)
        f.write(struct.pack("<II", CKPT_VERSION, len(blob)))
        f.write(blob)
        for _, arr in arrays:
            raw = np.ascontiguousarray(arr).tobytes()
            f.write(struct.pack("<I", len(raw)))
            f.write(raw)
    with open(str(path) + ".json", "w") as f:
        json.dump(manifest, f, indent=2, sort_keys=True)
    return manifest


def load_model(path) -> SurrogateModel:
    from .normalize import Normalizer  # local to avoid import noise at top

    with open(path, "rb") as f:
        magic = f.read(8)
        if magic != CKPT_MAGIC:
            raise ShapeError(f"not a morphsim checkpoint: bad magic {magic!r}")
        version, mlen = struct.unpack("<II", f.read(8))
        if version != CKPT_VERSION:
            raise ShapeError(f"unsupported checkpoint version {version}")
        manifest = json.loads(f.read(mlen))
        arrays = {}
        for desc in manifest["arrays"]:
            (nbytes,) = struct.unpack("<I", f.read(4))
            raw = f.read(nbytes)
            arrays[desc["name"]] = np.frombuffer(raw, dtype=desc["dtype"]).reshape(
                desc["shape"]
            ).copy()

    norm_roles = {}
    for role in manifest["normalizers"]["retained"]:
        norm_roles[role] = Normalizer.from_arrays(
            role,
            {
                n: arrays[f"norm.{role}.{n}"]
                for n in ("mean", "raw_std", "basis", "dim_mean", "dim_std", "explained")
            },
        )
    normalizers = NormalizerSet(
        normalizers=norm_roles, cutoff=manifest["normalizers"]["cutoff"]
    )

    def make_net(ei, part, latent):
        mlps = {}
        for role in ROLES:
            spec = MlpSpec.from_dict(manifest["specs"][f"{ei}.{part}.{role}"])
            n_params = 2 * (len(spec.hidden) + 1)
            params = [arrays[f"{ei}.{part}.{role}.{li}"] for li in range(n_params)]
            mlps[role] = Mlp(spec, dtype=np.float32, params=params)
        return InteractionNetwork(
            phi_nen=mlps["nen"],
            phi_ene=mlps["ene"],
            phi_node=mlps["node"],
            phi_edge=mlps["edge"],
            latent=latent,
        )

    latent = manifest["latent"]
    model = SurrogateModel(
        engine1=Engine(in1=make_net("e1", "in1", latent), in2=make_net("e1", "in2", latent)),
        engine2=Engine(in1=make_net("e2", "in1", latent), in2=make_net("e2", "in2", latent)),
        normalizers=normalizers,
        latent=latent,
        hidden=tuple(manifest["hidden"]),
        feature_layout=manifest["feature_layout"],
        symmetrize=manifest.get("symmetrize", True),
        meta=manifest.get("meta", {}),
    )
    return model
