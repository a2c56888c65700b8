"""Design sampling, trajectory dataset generation, stats, and normalizer fits.

Datasets are generated deterministically from a seed: designs come from one
rng stream (rejection sampling keeps only buildable, non-crossing grids),
the oracle simulates them in fixed batches, and any diverged run is replaced
by further draws from the same stream, so regenerating with the same inputs
reproduces the file byte for byte.
"""

from __future__ import annotations

import hashlib
import json
import struct
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from . import grid as gridmod
from .errors import InvalidDesign, SamplerExhausted
from .grid import BeamSpec, GridDesign, GridGraph, JointSpec, Trajectory, regular_grid
from .model import assemble_pair_inputs, concat_tables, gather_pairs, transform_adjacency, transform_feature_arrays
from .normalize import ROLE_LAYOUTS, MomentAccumulator, Normalizer, NormalizerSet, center_coords
from .oracle import ORACLE_VERSION, OracleConfig, simulate_oracle_batch

ACTUATOR_LEVELS = (0.0, 0.25, 0.5, 0.75, 1.0)

DATASET_MAGIC = b"MSIMTRJ1"
DATASET_VERSION = 1

MIN_FACE_GAP = 15.0  # mm between attachment faces; matches the validator's
# minimum actuated beam length and keeps the solver well-conditioned


@dataclass(frozen=True)
class SamplerConfig:
    """Random grid generator: regular lattice plus in-plane jitter.

    Defaults reproduce the reference dataset statistics (mean beam length
    about 51 mm, mean grid dimension about 94 mm).
    """

    spacing: float = 52.0
    jitter: float = 24.0
    actuator_probs: tuple[float, ...] = (0.2, 0.2, 0.2, 0.2, 0.2)
    seed: int = 0

    def validate(self) -> None:
        if self.spacing <= 0:
            raise ValueError("spacing must be positive")
        if not 0 <= self.jitter < self.spacing / 2:
            raise ValueError("jitter must satisfy 0 <= jitter < spacing/2")
        if len(self.actuator_probs) != len(ACTUATOR_LEVELS):
            raise ValueError(f"actuator_probs needs {len(ACTUATOR_LEVELS)} entries")
        if abs(sum(self.actuator_probs) - 1.0) > 1e-9:
            raise ValueError("actuator_probs must sum to 1")

    def to_dict(self) -> dict:
        return {
            "spacing": self.spacing,
            "jitter": self.jitter,
            "actuator_probs": list(self.actuator_probs),
            "seed": self.seed,
        }


def _segments_cross(p1, p2, p3, p4) -> bool:
    """Proper 2D segment intersection (shared endpoints not counted)."""

    def orient(a, b, c):
        return (b[0] - a[0]) * (c[1] - a[1]) - (b[1] - a[1]) * (c[0] - a[0])

    d1 = orient(p3, p4, p1)
    d2 = orient(p3, p4, p2)
    d3 = orient(p1, p2, p3)
    d4 = orient(p1, p2, p4)
    return ((d1 > 0) != (d2 > 0)) and ((d3 > 0) != (d4 > 0))


def _has_crossing(design: GridDesign) -> bool:
    pos = design.positions()[:, :2]
    beams = design.beams
    for i in range(len(beams)):
        a1, b1 = beams[i].a, beams[i].b
        for j in range(i + 1, len(beams)):
            a2, b2 = beams[j].a, beams[j].b
            if {a1, b1} & {a2, b2}:
                continue
            if _segments_cross(pos[a1], pos[b1], pos[a2], pos[b2]):
                return True
    return False


def sample_design(rng: np.random.Generator, config: SamplerConfig) -> GridDesign:
    """One random valid design; rejection-samples crossing/degenerate grids."""
    config.validate()
    base = regular_grid(config.spacing)
    levels = np.array(ACTUATOR_LEVELS)
    for _ in range(100):
        # uniform-in-disk jitter per joint
        ang = rng.uniform(0.0, 2.0 * np.pi, gridmod.N_JOINTS)
        rad = config.jitter * np.sqrt(rng.uniform(0.0, 1.0, gridmod.N_JOINTS))
        dx, dy = rad * np.cos(ang), rad * np.sin(ang)
        act = rng.choice(levels, size=gridmod.N_BEAMS, p=config.actuator_probs)
        joints = tuple(
            JointSpec(j.id, j.row, j.col, j.x + dx[j.id], j.y + dy[j.id], j.fixed)
            for j in base.joints
        )
        beams = tuple(
            BeamSpec(b.id, b.a, b.b, float(act[b.id])) for b in base.beams
        )
        design = GridDesign(joints=joints, beams=beams)
        try:
            design.validate()
            faces, starts, ends = gridmod.beam_section_geometry(design)
        except InvalidDesign:
            continue
        if np.any(np.linalg.norm(ends - starts, axis=1) < MIN_FACE_GAP):
            continue
        if _has_crossing(design):
            continue
        return design
    raise SamplerExhausted("no valid design after 100 tries")


@dataclass
class Dataset:
    """Trajectories plus the provenance needed to regenerate them."""

    trajectories: list[Trajectory]
    meta: dict = field(default_factory=dict)

    def __len__(self) -> int:
        return len(self.trajectories)

    def save(self, path) -> None:
        save_dataset(self, path)

    @staticmethod
    def load(path) -> "Dataset":
        return load_dataset(path)


def _simulate_chunk(args):
    designs_json, oracle_dict = args
    designs = [GridDesign.from_dict(d) for d in designs_json]
    cfg = OracleConfig(**{**oracle_dict, "gravity": tuple(oracle_dict["gravity"])})
    trajs, failures = simulate_oracle_batch(designs, cfg)
    return trajs, failures


def generate_dataset(
    n: int,
    seed: int = 0,
    sampler: SamplerConfig | None = None,
    oracle: OracleConfig | None = None,
    batch_size: int = 32,
    workers: int = 1,
    log=None,
) -> Dataset:
    """Exactly n oracle trajectories; diverged runs are logged and resampled."""
    if n < 1:
        raise ValueError("n must be >= 1")
    sampler = sampler or SamplerConfig(seed=seed)
    oracle = oracle or OracleConfig()
    rng = np.random.default_rng(seed)
    trajectories: list[Trajectory] = []
    resampled = 0
    say = log or (lambda msg: None)
    retry_budget = max(2 * n, 50)

    while len(trajectories) < n:
        if resampled > retry_budget:
            raise SamplerExhausted(
                f"{resampled} resampled oracle runs exceeded the retry budget"
            )
        want = n - len(trajectories)
        designs = [sample_design(rng, sampler) for _ in range(want)]
        chunks = [designs[i : i + batch_size] for i in range(0, len(designs), batch_size)]
        args = [([d.to_dict() for d in c], oracle.to_dict()) for c in chunks]
        if workers > 1 and len(chunks) > 1:
            with ProcessPoolExecutor(max_workers=workers) as pool:
                results = list(pool.map(_simulate_chunk, args))
        else:
            results = [_simulate_chunk(a) for a in args]
        for chunk_idx, (trajs, failures) in enumerate(results):
            for local_idx, frame in failures:
                resampled += 1
                say(f"oracle diverged at frame {frame}; resampling (chunk {chunk_idx})")
            trajectories.extend(t for t in trajs if t is not None)

    meta = {
        "n": n,
        "seed": seed,
        "sampler": sampler.to_dict(),
        "oracle": oracle.to_dict(),
        "oracle_version": ORACLE_VERSION,
        "resampled": resampled,
    }
    return Dataset(trajectories=trajectories[:n], meta=meta)


# -- serialization -----------------------------------------------------------


def graph_to_dict(g: GridGraph) -> dict:
    return {
        "adjacency": g.adjacency.tolist(),
        "nodes": g.nodes.tolist(),
        "edges": g.edges.tolist(),
        "fixed_origin": g.fixed_origin.tolist(),
    }


def graph_from_dict(d: dict) -> GridGraph:
    return GridGraph(
        adjacency=np.array(d["adjacency"], dtype=np.int8),
        nodes=np.array(d["nodes"], dtype=np.float64),
        edges=np.array(d["edges"], dtype=np.float64),
        fixed_origin=np.array(d["fixed_origin"], dtype=np.float64),
    )


def trajectory_to_dict(t: Trajectory) -> dict:
    return {
        "design": t.design.to_dict() if t.design is not None else None,
        "source": t.source,
        "meta": t.meta,
        "frames": [graph_to_dict(f) for f in t.frames],
    }


def trajectory_from_dict(d: dict) -> Trajectory:
    return Trajectory(
        design=GridDesign.from_dict(d["design"]) if d.get("design") else None,
        frames=[graph_from_dict(f) for f in d["frames"]],
        source=d.get("source", "oracle"),
        meta=d.get("meta", {}),
    )


def save_trajectories_jsonl(trajectories: list[Trajectory], path) -> None:
    with open(path, "w") as f:
        for t in trajectories:
            f.write(json.dumps(trajectory_to_dict(t)) + "\n")


def load_trajectories_jsonl(path) -> list[Trajectory]:
    out = []
    with open(path) as f:
        for line in f:
            if line.strip():
                out.append(trajectory_from_dict(json.loads(line)))
    return out


_SOURCE_TAGS = {"oracle": 0, "surrogate": 1}
_SOURCE_NAMES = {v: k for k, v in _SOURCE_TAGS.items()}


def save_dataset(dataset: Dataset, path) -> None:
    """Binary bulk format: 16-byte magic/version header, meta, f32 records."""
    with open(path, "wb") as f:
        f.write(DATASET_MAGIC)
        f.write(struct.pack("<II", DATASET_VERSION, len(dataset.trajectories)))
        meta_blob = json.dumps(dataset.meta, sort_keys=True).encode()
        f.write(struct.pack("<I", len(meta_blob)))
        f.write(meta_blob)
        for t in dataset.trajectories:
            design_blob = json.dumps(t.design.to_dict(), sort_keys=True).encode()
            f.write(struct.pack("<I", len(design_blob)))
            f.write(design_blob)
            f.write(struct.pack("<B", _SOURCE_TAGS.get(t.source, 0)))
            f.write(np.asarray(t.frames[0].fixed_origin, dtype="<f4").tobytes())
            f.write(np.ascontiguousarray(t.frames[0].adjacency, dtype=np.int8).tobytes())
            f.write(struct.pack("<I", len(t.frames)))
            for fr in t.frames:
                f.write(np.ascontiguousarray(fr.nodes, dtype="<f4").tobytes())
                f.write(np.ascontiguousarray(fr.edges, dtype="<f4").tobytes())


def load_dataset(path) -> Dataset:
    with open(path, "rb") as f:
        if f.read(8) != DATASET_MAGIC:
            raise ValueError("not a morphsim dataset file")
        version, count = struct.unpack("<II", f.read(8))
        if version != DATASET_VERSION:
            raise ValueError(f"unsupported dataset version {version}")
        (mlen,) = struct.unpack("<I", f.read(4))
        meta = json.loads(f.read(mlen))
        nodes_bytes = gridmod.N_JOINTS * gridmod.NODE_FEAT * 4
        edges_bytes = gridmod.N_BEAMS * gridmod.EDGE_FEAT * 4
        trajectories = []
        for _ in range(count):
            (dlen,) = struct.unpack("<I", f.read(4))
            design = GridDesign.from_dict(json.loads(f.read(dlen)))
            (tag,) = struct.unpack("<B", f.read(1))
            origin = np.frombuffer(f.read(12), dtype="<f4").astype(np.float64)
            adjacency = np.frombuffer(
                f.read(gridmod.N_BEAMS * gridmod.N_JOINTS), dtype=np.int8
            ).reshape(gridmod.N_BEAMS, gridmod.N_JOINTS).copy()
            (n_frames,) = struct.unpack("<I", f.read(4))
            frames = []
            for _ in range(n_frames):
                nodes = np.frombuffer(f.read(nodes_bytes), dtype="<f4").astype(np.float64)
                edges = np.frombuffer(f.read(edges_bytes), dtype="<f4").astype(np.float64)
                frames.append(
                    GridGraph(
                        adjacency=adjacency.copy(),
                        nodes=nodes.reshape(gridmod.N_JOINTS, gridmod.NODE_FEAT),
                        edges=edges.reshape(gridmod.N_BEAMS, gridmod.EDGE_FEAT),
                        fixed_origin=origin.copy(),
                    )
                )
            trajectories.append(
                Trajectory(design=design, frames=frames, source=_SOURCE_NAMES.get(tag, "oracle"))
            )
    return Dataset(trajectories=trajectories, meta=meta)


# -- splits ------------------------------------------------------------------


def stable_hash(text: str) -> int:
    return int(hashlib.sha256(text.encode()).hexdigest()[:16], 16)


def split_dataset(
    dataset: Dataset, test_fraction: float = 0.2, test_count: int | None = None
) -> tuple[Dataset, Dataset]:
    """Deterministic, disjoint train/test split keyed on design content.

    With ``test_count`` the items with the smallest design hashes form the
    test set (exact sizes); otherwise a hash threshold assigns membership so
    growing the dataset never moves old items across the split.
    """
    keyed = [(stable_hash(t.design.design_id()), i) for i, t in enumerate(dataset.trajectories)]
    test_idx: set[int]
    if test_count is not None:
        keyed.sort()
        test_idx = {i for _, i in keyed[:test_count]}
    else:
        bound = test_fraction * float(2**64)
        test_idx = {i for h, i in keyed if h < bound}
    train = [t for i, t in enumerate(dataset.trajectories) if i not in test_idx]
    test = [t for i, t in enumerate(dataset.trajectories) if i in test_idx]
    return (
        Dataset(train, {**dataset.meta, "split": "train"}),
        Dataset(test, {**dataset.meta, "split": "test"}),
    )


# -- statistics ---------------------------------------------------------------


def percentile_nearest_rank(values, p: float) -> float:
    """p-th percentile by the nearest-rank rule on sorted values."""
    arr = np.sort(np.asarray(values, dtype=np.float64))
    if len(arr) == 0:
        raise ValueError("empty input")
    k = max(int(np.ceil(p / 100.0 * len(arr))), 1) - 1
    return float(arr[min(k, len(arr) - 1)])


def beam_lengths(design: GridDesign) -> np.ndarray:
    """Joint-center-to-center lengths of the 12 beams."""
    pos = design.positions()
    return np.array([np.linalg.norm(pos[b.b] - pos[b.a]) for b in design.beams])


def design_dimension(design: GridDesign) -> float:
    """Largest joint-center distance from the fixed joint at design time."""
    pos = design.positions()
    fixed = design.fixed_joint().id
    return float(np.linalg.norm(pos - pos[fixed], axis=1).max())


@dataclass
class StatsReport:
    """Dataset geometry statistics consumed by design validation."""

    n_designs: int
    beam_length: dict
    grid_dimension: dict

    def to_dict(self) -> dict:
        return {
            "n_designs": self.n_designs,
            "beam_length": self.beam_length,
            "grid_dimension": self.grid_dimension,
        }

    @staticmethod
    def from_dict(d: dict) -> "StatsReport":
        return StatsReport(
            n_designs=int(d["n_designs"]),
            beam_length=dict(d["beam_length"]),
            grid_dimension=dict(d["grid_dimension"]),
        )

    def save(self, path) -> None:
        with open(path, "w") as f:
            json.dump(self.to_dict(), f, indent=2, sort_keys=True)

    @staticmethod
    def load(path) -> "StatsReport":
        with open(path) as f:
            return StatsReport.from_dict(json.load(f))


def dataset_stats(dataset: Dataset) -> StatsReport:
    """Beam-length and grid-dimension percentiles of a dataset's designs."""
    if not len(dataset.trajectories):
        raise ValueError("empty dataset")
    lengths = np.concatenate([beam_lengths(t.design) for t in dataset.trajectories])
    dims = np.array([design_dimension(t.design) for t in dataset.trajectories])

    def pack(values):
        return {
            "mean": float(np.mean(values)),
            "p3": percentile_nearest_rank(values, 3),
            "p50": percentile_nearest_rank(values, 50),
            "p97": percentile_nearest_rank(values, 97),
        }

    return StatsReport(
        n_designs=len(dataset.trajectories),
        beam_length=pack(lengths),
        grid_dimension=pack(dims),
    )


# -- normalizer fitting --------------------------------------------------------

N_SOURCE_FRAMES = 11  # frames 0..10 feed the engines; frame 11 is target-only


def fit_normalizers(
    dataset: Dataset, cutoff: float = 0.98, augment_all: bool = True
) -> NormalizerSet:
    """Fit one normalizer per MLP role on (augmented) training data.

    Raw inputs are gathered across all source frames and interaction pairs,
    coordinate channels centered on the receiver element, and targets taken
    as per-transition feature deltas; each trajectory contributes its eight
    in-plane isometry images when augment_all is set.
    """
    if not len(dataset.trajectories):
        raise ValueError("empty dataset")
    accs = {role: MomentAccumulator(layout.width) for role, layout in ROLE_LAYOUTS.items()}
    pend = {role: [] for role in ROLE_LAYOUTS}
    pend_rows = 0

    def flush():
        nonlocal pend_rows
        for role, chunks in pend.items():
            if chunks:
                accs[role].add(np.concatenate(chunks))
                pend[role] = []
        pend_rows = 0

    isometries = [(k, m) for m in (False, True) for k in range(4)] if augment_all else [(0, False)]

    for traj in dataset.trajectories:
        nodes = np.stack([f.nodes for f in traj.frames])  # (12, 9, 28)
        edges = np.stack([f.edges for f in traj.frames])
        adj = traj.frames[0].adjacency
        for k, m in isometries:
            tn, te = transform_feature_arrays(
                nodes.reshape(-1, gridmod.NODE_FEAT), edges.reshape(-1, gridmod.EDGE_FEAT), k, m
            )
            tn = tn.reshape(nodes.shape)
            te = te.reshape(edges.shape)
            tadj = transform_adjacency(adj, k, m)
            tables = concat_tables([gather_pairs(tadj)] * N_SOURCE_FRAMES)
            src_n = tn[:N_SOURCE_FRAMES].reshape(-1, gridmod.NODE_FEAT)
            src_e = te[:N_SOURCE_FRAMES].reshape(-1, gridmod.EDGE_FEAT)
            nen_raw, ene_raw = assemble_pair_inputs(src_n, src_e, tables)
            pend["nen"].append(center_coords(nen_raw, ROLE_LAYOUTS["nen"]))
            pend["ene"].append(center_coords(ene_raw, ROLE_LAYOUTS["ene"]))
            pend["node"].append(center_coords(src_n, ROLE_LAYOUTS["node"]))
            pend["edge"].append(center_coords(src_e, ROLE_LAYOUTS["edge"]))
            pend["node_out"].append((tn[1:] - tn[:-1]).reshape(-1, gridmod.NODE_FEAT))
            pend["edge_out"].append((te[1:] - te[:-1]).reshape(-1, gridmod.EDGE_FEAT))
        pend_rows += 1
        if pend_rows >= 64:
            flush()
    flush()

    normalizers = {
        role: Normalizer.fit_from_moments(ROLE_LAYOUTS[role], accs[role], cutoff)
        for role in ROLE_LAYOUTS
    }
    meta = {"samples": {role: accs[role].n for role in accs}, "augmented": augment_all}
    return NormalizerSet(normalizers=normalizers, cutoff=cutoff, meta=meta)
