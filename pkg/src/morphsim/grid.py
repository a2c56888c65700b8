"""Grid designs and their graph representation.

A grid is a 3x3 joint lattice joined by 12 beams.  At every timestep it is
encoded as a graph: a 12x9 adjacency table of face codes, one 28-channel
feature vector per joint (8 cuboid corners, center point, fixed flag) and one
52-channel vector per beam (3 cross-sections x 4 corners, 12 residual stress
slots, actuator fraction, center point).  All coordinates are millimetres,
relative to the fixed joint's center.
"""

from __future__ import annotations

import hashlib
import json
from dataclasses import dataclass, field, replace

import numpy as np

from .errors import ContiguityFailure, InvalidDesign

# Material system constants (mm, deg/mm).
BEAM_WIDTH = 7.2
BEAM_THICKNESS = 4.0
KAPPA_MAX = 1.95  # measured maximum rest curvature, deg/mm
JOINT_HALF_SIDE = BEAM_WIDTH / 2.0  # joints are width x width x thickness cuboids
JOINT_HALF_THICK = BEAM_THICKNESS / 2.0
EPS_CONTIG = 0.1  # mm; matching tolerance for coincident junction corners

N_JOINTS = 9
N_BEAMS = 12
N_NODE_VERTS = 8
N_SECTIONS = 3  # start / center / end
N_SECTION_CORNERS = 4
N_EDGE_VERTS = N_SECTIONS * N_SECTION_CORNERS

NODE_FEAT = 28
EDGE_FEAT = 52

NODE_VERT_SLICE = slice(0, 24)
NODE_CENTER_SLICE = slice(24, 27)
NODE_FIXED_COL = 27
EDGE_VERT_SLICE = slice(0, 36)
EDGE_STRESS_SLICE = slice(36, 48)
EDGE_ACTUATOR_COL = 48
EDGE_CENTER_SLICE = slice(49, 52)

# Channel index lists used by noise injection / normalization.
NODE_COORD_COLS = np.arange(0, 27)
NODE_DESIGN_COLS = np.array([NODE_FIXED_COL])
EDGE_COORD_COLS = np.concatenate([np.arange(0, 36), np.arange(49, 52)])
EDGE_STRESS_COLS = np.arange(36, 48)
EDGE_DESIGN_COLS = np.array([EDGE_ACTUATOR_COL])

# Face codes: 1..4 map to the joint cuboid's in-plane faces +x, -x, +y, -y.
FACE_NORMALS = {
    1: np.array([1.0, 0.0, 0.0]),
    2: np.array([-1.0, 0.0, 0.0]),
    3: np.array([0.0, 1.0, 0.0]),
    4: np.array([0.0, -1.0, 0.0]),
}

_Z = np.array([0.0, 0.0, 1.0])

# Cuboid corner k has sign bits (bx, by, bz) with k = 4*bx + 2*by + bz.
def _corner_offsets() -> np.ndarray:
    out = np.zeros((8, 3))
    for k in range(8):
        sx = 1.0 if (k >> 2) & 1 else -1.0
        sy = 1.0 if (k >> 1) & 1 else -1.0
        sz = 1.0 if k & 1 else -1.0
        out[k] = (sx * JOINT_HALF_SIDE, sy * JOINT_HALF_SIDE, sz * JOINT_HALF_THICK)
    return out


CORNER_OFFSETS = _corner_offsets()

# Cross-section corner order in the local (width, thickness) frame.
SECTION_CORNER_SIGNS = np.array([(-1, -1), (1, -1), (1, 1), (-1, 1)], dtype=float)


def _face_frames():
    """Per-face width axis (n x z) and corner offsets in joint-local coords."""
    widths, offsets, corner_idx = {}, {}, {}
    for code, n in FACE_NORMALS.items():
        w = np.cross(n, _Z)
        widths[code] = w
        pts = (
            JOINT_HALF_SIDE * n
            + SECTION_CORNER_SIGNS[:, :1] * JOINT_HALF_SIDE * w
            + SECTION_CORNER_SIGNS[:, 1:] * JOINT_HALF_THICK * _Z
        )
        offsets[code] = pts
        idx = []
        for p in pts:
            matches = np.where(np.all(np.abs(CORNER_OFFSETS - p) < 1e-9, axis=1))[0]
            assert len(matches) == 1
            idx.append(int(matches[0]))
        corner_idx[code] = np.array(idx)
    return widths, offsets, corner_idx


FACE_WIDTH_AXIS, FACE_CORNER_OFFSETS, FACE_CORNER_INDEX = _face_frames()


@dataclass(frozen=True)
class JointSpec:
    id: int
    row: int
    col: int
    x: float
    y: float
    fixed: bool = False


@dataclass(frozen=True)
class BeamSpec:
    id: int
    a: int
    b: int
    actuator: float = 0.0


@dataclass(frozen=True)
class GridDesign:
    """Parametric description of a 2x2 morphing grid."""

    joints: tuple[JointSpec, ...]
    beams: tuple[BeamSpec, ...]

    def joint_by_id(self) -> dict[int, JointSpec]:
        return {j.id: j for j in self.joints}

    def fixed_joint(self) -> JointSpec:
        fixed = [j for j in self.joints if j.fixed]
        if len(fixed) != 1:
            raise InvalidDesign(f"expected exactly 1 fixed joint, found {len(fixed)}")
        return fixed[0]

    def positions(self) -> np.ndarray:
        """(9, 3) joint centers indexed by joint id, z = 0."""
        pos = np.zeros((N_JOINTS, 3))
        for j in self.joints:
            pos[j.id, 0] = j.x
            pos[j.id, 1] = j.y
        return pos

    def actuators(self) -> np.ndarray:
        act = np.zeros(N_BEAMS)
        for b in self.beams:
            act[b.id] = b.actuator
        return act

    def validate(self) -> None:
        """Raise InvalidDesign on any topology violation."""
        if len(self.joints) != N_JOINTS:
            raise InvalidDesign(f"expected {N_JOINTS} joints, got {len(self.joints)}")
        if len(self.beams) != N_BEAMS:
            raise InvalidDesign(f"expected {N_BEAMS} beams, got {len(self.beams)}")
        if sorted(j.id for j in self.joints) != list(range(N_JOINTS)):
            raise InvalidDesign("joint ids must be 0..8")
        if sorted(b.id for b in self.beams) != list(range(N_BEAMS)):
            raise InvalidDesign("beam ids must be 0..11")
        cells = {(j.row, j.col) for j in self.joints}
        if cells != {(r, c) for r in range(3) for c in range(3)}:
            raise InvalidDesign("joints must cover the 3x3 lattice exactly once")
        self.fixed_joint()

        by_id = self.joint_by_id()
        pos = {(round(j.x, 9), round(j.y, 9)) for j in self.joints}
        if len(pos) != N_JOINTS:
            raise InvalidDesign("joint positions must be distinct")

        seen = set()
        for b in self.beams:
            if b.a not in by_id or b.b not in by_id:
                raise InvalidDesign(f"beam {b.id} references unknown joint")
            ja, jb = by_id[b.a], by_id[b.b]
            if abs(ja.row - jb.row) + abs(ja.col - jb.col) != 1:
                raise InvalidDesign(f"beam {b.id} does not join lattice neighbors")
            key = frozenset((b.a, b.b))
            if key in seen:
                raise InvalidDesign(f"beam {b.id} duplicates an existing beam")
            seen.add(key)
            if not 0.0 <= b.actuator <= 1.0:
                raise InvalidDesign(f"beam {b.id} actuator outside [0, 1]")

    def to_dict(self) -> dict:
        return {
            "schema_version": 1,
            "units": "mm",
            "joints": [
                {"id": j.id, "row": j.row, "col": j.col, "x": j.x, "y": j.y, "fixed": j.fixed}
                for j in self.joints
            ],
            "beams": [
                {"id": b.id, "a": b.a, "b": b.b, "actuator": b.actuator} for b in self.beams
            ],
        }

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=2)

    @staticmethod
    def from_dict(data: dict) -> "GridDesign":
        if data.get("schema_version") != 1:
            raise InvalidDesign(f"unsupported schema_version {data.get('schema_version')!r}")
        joints = tuple(
            JointSpec(
                id=int(j["id"]),
                row=int(j["row"]),
                col=int(j["col"]),
                x=float(j["x"]),
                y=float(j["y"]),
                fixed=bool(j.get("fixed", False)),
            )
            for j in data["joints"]
        )
        beams = tuple(
            BeamSpec(
                id=int(b["id"]),
                a=int(b["a"]),
                b=int(b["b"]),
                actuator=float(b.get("actuator", 0.0)),
            )
            for b in data["beams"]
        )
        return GridDesign(joints=joints, beams=beams)

    @staticmethod
    def from_json(text: str) -> "GridDesign":
        return GridDesign.from_dict(json.loads(text))

    def design_id(self) -> str:
        """Stable content hash used for dataset splits and persistence."""
        blob = json.dumps(self.to_dict(), sort_keys=True).encode()
        return hashlib.sha256(blob).hexdigest()[:16]


def regular_grid(spacing: float = 52.0, actuators: float | list[float] = 0.0) -> GridDesign:
    """Regular 3x3 lattice centered on the fixed joint at the origin."""
    joints = []
    for r in range(3):
        for c in range(3):
            jid = r * 3 + c
            joints.append(
                JointSpec(
                    id=jid,
                    row=r,
                    col=c,
                    x=(c - 1) * spacing,
                    y=(r - 1) * spacing,
                    fixed=(r == 1 and c == 1),
                )
            )
    if np.isscalar(actuators):
        act = [float(actuators)] * N_BEAMS
    else:
        act = list(actuators)
    beams = []
    bid = 0
    for r in range(3):
        for c in range(2):  # along +x
            beams.append(BeamSpec(id=bid, a=r * 3 + c, b=r * 3 + c + 1, actuator=act[bid]))
            bid += 1
    for r in range(2):
        for c in range(3):  # along +y
            beams.append(BeamSpec(id=bid, a=r * 3 + c, b=(r + 1) * 3 + c, actuator=act[bid]))
            bid += 1
    return GridDesign(joints=tuple(joints), beams=tuple(beams))


@dataclass
class GridGraph:
    """One timestep of a grid: adjacency codes plus numeric features."""

    adjacency: np.ndarray  # (12, 9) int8, 0 = not adjacent, 1..4 = face code
    nodes: np.ndarray  # (9, 28) float64
    edges: np.ndarray  # (12, 52) float64
    fixed_origin: np.ndarray = field(default_factory=lambda: np.zeros(3))

    def copy(self) -> "GridGraph":
        return GridGraph(
            adjacency=self.adjacency.copy(),
            nodes=self.nodes.copy(),
            edges=self.edges.copy(),
            fixed_origin=self.fixed_origin.copy(),
        )

    def node_verts(self) -> np.ndarray:
        return self.nodes[:, NODE_VERT_SLICE].reshape(N_JOINTS, N_NODE_VERTS, 3)

    def edge_verts(self) -> np.ndarray:
        return self.edges[:, EDGE_VERT_SLICE].reshape(N_BEAMS, N_EDGE_VERTS, 3)

    def all_vertices(self) -> np.ndarray:
        """(216, 3) stack of node corners then edge corners, in slot order."""
        return np.concatenate(
            [self.node_verts().reshape(-1, 3), self.edge_verts().reshape(-1, 3)]
        )


@dataclass
class Trajectory:
    """Ordered 12-frame sequence: t=0, ten release frames, one creep frame."""

    design: GridDesign
    frames: list[GridGraph]
    source: str = "oracle"
    meta: dict = field(default_factory=dict)

    def __len__(self) -> int:
        return len(self.frames)


def assign_faces(design: GridDesign) -> np.ndarray:
    """(12, 2) face codes at each beam's (a, b) joints, chosen geometrically.

    The attachment face is the in-plane cuboid face most aligned with the
    beam's design-time direction; two beams may never claim the same face of
    one joint.
    """
    pos = design.positions()
    codes = np.zeros((N_BEAMS, 2), dtype=np.int8)
    used: dict[tuple[int, int], int] = {}
    for beam in design.beams:
        d = pos[beam.b] - pos[beam.a]
        norm = np.linalg.norm(d)
        if norm < 1e-9:
            raise InvalidDesign(f"beam {beam.id} has coincident endpoints")
        d = d / norm
        fa = max(FACE_NORMALS, key=lambda f: float(FACE_NORMALS[f] @ d))
        fb = max(FACE_NORMALS, key=lambda f: float(FACE_NORMALS[f] @ -d))
        for joint, face in ((beam.a, fa), (beam.b, fb)):
            key = (joint, face)
            if key in used:
                raise InvalidDesign(
                    f"beams {used[key]} and {beam.id} share face {face} of joint {joint}"
                )
            used[key] = beam.id
        codes[beam.id, 0] = fa
        codes[beam.id, 1] = fb
    return codes


def beam_section_geometry(design: GridDesign):
    """Design-time attachment geometry per beam.

    Returns (faces (12,2), start centers (12,3), end centers (12,3)) in
    absolute coordinates.
    """
    pos = design.positions()
    faces = assign_faces(design)
    starts = np.zeros((N_BEAMS, 3))
    ends = np.zeros((N_BEAMS, 3))
    for beam in design.beams:
        fa, fb = faces[beam.id]
        starts[beam.id] = pos[beam.a] + JOINT_HALF_SIDE * FACE_NORMALS[fa]
        ends[beam.id] = pos[beam.b] + JOINT_HALF_SIDE * FACE_NORMALS[fb]
        if np.linalg.norm(ends[beam.id] - starts[beam.id]) < 1.0:
            raise InvalidDesign(f"beam {beam.id} is too short for its joints")
    return faces, starts, ends


def center_section_corners(mid: np.ndarray, tangent: np.ndarray, width_axis: np.ndarray) -> np.ndarray:
    """Corner points of beam center cross-sections, (..., 4, 3).

    Sections are spanned by the width axis and thickness axis
    (width x tangent); corners follow SECTION_CORNER_SIGNS order.
    """
    v = np.cross(width_axis, tangent)
    sw = SECTION_CORNER_SIGNS[:, 0].reshape((4,) + (1,))
    sv = SECTION_CORNER_SIGNS[:, 1].reshape((4,) + (1,))
    return (
        mid[..., None, :]
        + sw * JOINT_HALF_SIDE * width_axis[..., None, :]
        + sv * JOINT_HALF_THICK * v[..., None, :]
    )


def build_graph(design: GridDesign) -> GridGraph:
    """Extract the t=0 graph of a design.

    Joint cuboids sit centered on joint positions with identity orientation;
    beam start/end sections coincide with the attached joint faces; initial
    stress is actuator * KAPPA_MAX per cross-section.
    """
    design.validate()
    pos = design.positions()
    origin = pos[design.fixed_joint().id].copy()
    faces, starts, ends = beam_section_geometry(design)

    adjacency = np.zeros((N_BEAMS, N_JOINTS), dtype=np.int8)
    nodes = np.zeros((N_JOINTS, NODE_FEAT))
    edges = np.zeros((N_BEAMS, EDGE_FEAT))

    for j in design.joints:
        verts = pos[j.id] + CORNER_OFFSETS - origin
        nodes[j.id, NODE_VERT_SLICE] = verts.ravel()
        nodes[j.id, NODE_CENTER_SLICE] = verts.mean(axis=0)
        nodes[j.id, NODE_FIXED_COL] = 1.0 if j.fixed else 0.0

    for beam in design.beams:
        fa, fb = faces[beam.id]
        adjacency[beam.id, beam.a] = fa
        adjacency[beam.id, beam.b] = fb
        s0 = pos[beam.a] + FACE_CORNER_OFFSETS[fa] - origin
        s2 = pos[beam.b] + FACE_CORNER_OFFSETS[fb] - origin
        chord = ends[beam.id] - starts[beam.id]
        tangent = chord / np.linalg.norm(chord)
        width = np.cross(tangent, _Z)
        width = width / np.linalg.norm(width)
        mid = 0.5 * (starts[beam.id] + ends[beam.id]) - origin
        s1 = center_section_corners(mid, tangent, width)
        verts = np.concatenate([s0, s1, s2])
        edges[beam.id, EDGE_VERT_SLICE] = verts.ravel()
        edges[beam.id, EDGE_CENTER_SLICE] = verts.mean(axis=0)
        edges[beam.id, EDGE_STRESS_SLICE] = beam.actuator * KAPPA_MAX
        edges[beam.id, EDGE_ACTUATOR_COL] = beam.actuator

    return GridGraph(adjacency=adjacency, nodes=nodes, edges=edges, fixed_origin=origin)


@dataclass(frozen=True)
class ContiguityPairs:
    """Pairs of flat vertex slots that must stay coincident at junctions.

    Slots index GridGraph.all_vertices(): node corners occupy 0..71
    (joint * 8 + corner), edge corners 72..215 (72 + beam * 12 + corner).
    """

    pairs: np.ndarray  # (P, 2) int32, [node slot, edge slot]

    def __len__(self) -> int:
        return len(self.pairs)

    def distances(self, graph_or_vertices) -> np.ndarray:
        verts = (
            graph_or_vertices.all_vertices()
            if isinstance(graph_or_vertices, GridGraph)
            else graph_or_vertices
        )
        a = verts[self.pairs[:, 0]]
        b = verts[self.pairs[:, 1]]
        return np.linalg.norm(a - b, axis=1)


def contiguity_pairs(graph: GridGraph) -> ContiguityPairs:
    """Match beam end-section corners to coincident joint corners at t=0."""
    node_verts = graph.node_verts().reshape(-1, 3)
    edge_verts = graph.edge_verts()
    pairs = []
    for e in range(N_BEAMS):
        for corner in list(range(0, 4)) + list(range(8, 12)):
            p = edge_verts[e, corner]
            d = np.linalg.norm(node_verts - p, axis=1)
            k = int(np.argmin(d))
            if d[k] > EPS_CONTIG:
                raise ContiguityFailure(
                    f"beam {e} corner {corner} has no joint corner within "
                    f"{EPS_CONTIG} mm (nearest {d[k]:.3f} mm)"
                )
            pairs.append((k, 72 + e * N_EDGE_VERTS + corner))
    pairs.sort()
    return ContiguityPairs(pairs=np.array(pairs, dtype=np.int32))


def grid_dimension(graph: GridGraph) -> float:
    """Largest distance from the fixed joint center to any joint center."""
    centers = graph.nodes[:, NODE_CENTER_SLICE]
    return float(np.linalg.norm(centers, axis=1).max())


def _rotz90(k: int) -> np.ndarray:
    r = np.array([[0.0, -1.0, 0.0], [1.0, 0.0, 0.0], [0.0, 0.0, 1.0]])
    out = np.eye(3)
    for _ in range(k % 4):
        out = r @ out
    return out


def isometry_matrix(k: int, mirror: bool) -> np.ndarray:
    """In-plane isometry: optional x-mirror followed by k quarter turns."""
    m = np.diag([-1.0, 1.0, 1.0]) if mirror else np.eye(3)
    return _rotz90(k) @ m


def _corner_permutation(g: np.ndarray) -> np.ndarray:
    """sigma with new_verts[k] = g @ old_verts[sigma[k]] for cuboid corners."""
    ginv = g.T  # orthogonal
    sigma = np.zeros(8, dtype=int)
    for k in range(8):
        target = ginv @ CORNER_OFFSETS[k]
        match = np.where(np.all(np.abs(CORNER_OFFSETS - target) < 1e-9, axis=1))[0]
        assert len(match) == 1
        sigma[k] = match[0]
    return sigma


def _face_permutation(g: np.ndarray) -> dict[int, int]:
    """new face code for each old code under isometry g."""
    out = {0: 0}
    for code, n in FACE_NORMALS.items():
        rotated = g @ n
        for code2, n2 in FACE_NORMALS.items():
            if np.all(np.abs(rotated - n2) < 1e-9):
                out[code] = code2
                break
    assert len(out) == 5
    return out


_SECTION_FLIP = np.array([1, 0, 3, 2])  # width-sign flip within a cross-section


def transform_graph(graph: GridGraph, k: int, mirror: bool) -> GridGraph:
    """Apply an in-plane isometry to a graph.

    Coordinates rotate/reflect about the fixed joint; corner slots are
    permuted so the result is exactly the graph the extractor would produce
    for the transformed structure; adjacency codes follow the face
    permutation.  Stress, actuator, and fixed channels are untouched.
    """
    g = isometry_matrix(k, mirror)
    sigma = _corner_permutation(g)
    face_map = _face_permutation(g)

    out = graph.copy()

    nv = graph.node_verts()[:, sigma] @ g.T
    out.nodes[:, NODE_VERT_SLICE] = nv.reshape(N_JOINTS, -1)
    out.nodes[:, NODE_CENTER_SLICE] = graph.nodes[:, NODE_CENTER_SLICE] @ g.T

    ev = graph.edge_verts().reshape(N_BEAMS, N_SECTIONS, N_SECTION_CORNERS, 3)
    stress = graph.edges[:, EDGE_STRESS_SLICE].reshape(N_BEAMS, N_SECTIONS, N_SECTION_CORNERS)
    if mirror:
        ev = ev[:, :, _SECTION_FLIP]
        stress = stress[:, :, _SECTION_FLIP]
    ev = ev @ g.T
    out.edges[:, EDGE_VERT_SLICE] = ev.reshape(N_BEAMS, -1)
    out.edges[:, EDGE_STRESS_SLICE] = stress.reshape(N_BEAMS, -1)
    out.edges[:, EDGE_CENTER_SLICE] = graph.edges[:, EDGE_CENTER_SLICE] @ g.T

    remap = np.zeros(5, dtype=np.int8)
    for old, new in face_map.items():
        remap[old] = new
    out.adjacency = remap[graph.adjacency]
    return out


def augment(trajectory: Trajectory, k: int, mirror: bool) -> Trajectory:
    """Rotate/mirror a whole trajectory in-plane.

    Every frame gets the same isometry; the augmented trajectory is exactly
    what the oracle would produce for the transformed design.
    """
    frames = [transform_graph(f, k, mirror) for f in trajectory.frames]
    meta = dict(trajectory.meta)
    meta["augment"] = {"k": k, "mirror": mirror}
    return Trajectory(design=trajectory.design, frames=frames, source=trajectory.source, meta=meta)


def transform_design(design: GridDesign, k: int, mirror: bool) -> GridDesign:
    """Rotate/mirror a design's joint positions about its fixed joint."""
    g = isometry_matrix(k, mirror)[:2, :2]
    fixed = design.fixed_joint()
    anchor = np.array([fixed.x, fixed.y])
    joints = []
    for j in design.joints:
        p = g @ (np.array([j.x, j.y]) - anchor) + anchor
        joints.append(replace(j, x=float(p[0]), y=float(p[1])))
    return GridDesign(joints=tuple(joints), beams=design.beams)


def inverse_isometry(k: int, mirror: bool) -> tuple[int, bool]:
    """Parameters undoing (k, mirror); mirrored isometries are involutions."""
    if mirror:
        return k, True
    return (4 - k) % 4, False


def layout_hash() -> str:
    """Stable fingerprint of the feature layout; stored in checkpoints."""
    desc = {
        "node_feat": NODE_FEAT,
        "edge_feat": EDGE_FEAT,
        "node_verts": N_NODE_VERTS,
        "sections": N_SECTIONS,
        "section_corners": N_SECTION_CORNERS,
        "beam_width": BEAM_WIDTH,
        "beam_thickness": BEAM_THICKNESS,
        "kappa_max": KAPPA_MAX,
        "faces": {c: FACE_NORMALS[c].tolist() for c in sorted(FACE_NORMALS)},
        "eps_contig": EPS_CONTIG,
    }
    blob = json.dumps(desc, sort_keys=True).encode()
    return hashlib.sha256(blob).hexdigest()[:16]
