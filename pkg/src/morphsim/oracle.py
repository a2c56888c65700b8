"""Deterministic reference physics for grid trajectories.

The generator is a position-based beam network: each beam is a centerline of
equal segments with stretch and rest-curvature (bend) constraints, and each
joint is a rigid cuboid coupled to its beams by shape matching.  Stage 1
releases the actuators' rest curvature in ten equal increments with a fixed
number of projection iterations per frame; stage 2 runs one gravity-creep
relaxation with softened bend stiffness.  Everything is fixed-order numpy,
so identical inputs give identical trajectories.

Many designs can be solved in one batch: their networks are disconnected, so
stacking them into one constraint system changes per-design results only at
float rounding level while amortizing the per-iteration overhead.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from . import grid
from .errors import OracleDiverged
from .grid import GridDesign, GridGraph, Trajectory

ORACLE_VERSION = "pbd-1"

N_STAGE1_FRAMES = 10  # equal 10% releases of the rest curvature


@dataclass(frozen=True)
class OracleConfig:
    segments_per_beam: int = 8
    projection_iterations: int = 200
    stretch_stiffness: float = 1.0
    bend_stiffness: float = 0.9
    joint_rigidity: float = 0.9
    creep_compliance_scale: float = 4.0
    gravity: tuple[float, float, float] = (0.0, 0.0, -9810.0)  # mm/s^2
    gravity_dt: float = 0.004  # pseudo time step for quasi-static creep
    creep_substeps: int = 10  # gravity kicks per creep pass, settled in between
    kappa_max: float = grid.KAPPA_MAX  # deg/mm, fixed by the material system

    def validate(self) -> None:
        if self.segments_per_beam < 2 or self.segments_per_beam % 2:
            raise ValueError("segments_per_beam must be an even integer >= 2")
        for name in ("stretch_stiffness", "bend_stiffness", "joint_rigidity"):
            v = getattr(self, name)
            if not 0.0 < v <= 1.0:
                raise ValueError(f"{name} must be in (0, 1]")
        if self.creep_compliance_scale < 1.0:
            raise ValueError("creep_compliance_scale must be >= 1")

    def to_dict(self) -> dict:
        return {
            "segments_per_beam": self.segments_per_beam,
            "projection_iterations": self.projection_iterations,
            "stretch_stiffness": self.stretch_stiffness,
            "bend_stiffness": self.bend_stiffness,
            "joint_rigidity": self.joint_rigidity,
            "creep_compliance_scale": self.creep_compliance_scale,
            "gravity": list(self.gravity),
            "gravity_dt": self.gravity_dt,
            "creep_substeps": self.creep_substeps,
            "kappa_max": self.kappa_max,
        }


@dataclass
class OracleState:
    """Mutable solver state: centerline nodes plus joint poses."""

    positions: np.ndarray  # (n_beams, S+1, 3)
    joint_rot: np.ndarray  # (n_joints, 3, 3)
    joint_pos: np.ndarray  # (n_joints, 3)
    start_width: np.ndarray  # (n_beams, 3) world width axis at the beam start
    released: float = 0.0

    def copy(self) -> "OracleState":
        return OracleState(
            positions=self.positions.copy(),
            joint_rot=self.joint_rot.copy(),
            joint_pos=self.joint_pos.copy(),
            start_width=self.start_width.copy(),
            released=self.released,
        )


def _cross(a: np.ndarray, b: np.ndarray) -> np.ndarray:
    """Cross product over the last axis, cheaper than np.cross on small arrays."""
    out = np.empty(np.broadcast_shapes(a.shape, b.shape))
    out[..., 0] = a[..., 1] * b[..., 2] - a[..., 2] * b[..., 1]
    out[..., 1] = a[..., 2] * b[..., 0] - a[..., 0] * b[..., 2]
    out[..., 2] = a[..., 0] * b[..., 1] - a[..., 1] * b[..., 0]
    return out


def _normalize(v: np.ndarray) -> np.ndarray:
    n = np.sqrt((v * v).sum(axis=-1, keepdims=True))
    return v / np.maximum(n, 1e-12)


class BeamNetwork:
    """Rest geometry and constraint tables for a batch of designs.

    Passing ``free_beam=(length, actuator)`` instead of designs builds a
    single unjointed beam, the harness used for analytic bend checks.
    """

    def __init__(
        self,
        designs: list[GridDesign] | GridDesign | None,
        config: OracleConfig | None = None,
        *,
        free_beam: tuple[float, float] | None = None,
    ):
        config = config or OracleConfig()
        config.validate()
        self.config = config
        S = config.segments_per_beam
        self.S = S

        if designs is not None:
            if isinstance(designs, GridDesign):
                designs = [designs]
            self.designs = designs
            B = len(designs)
            self.n_designs = B
            self.n_beams = grid.N_BEAMS * B
            self.n_joints = grid.N_JOINTS * B

            faces = np.zeros((self.n_beams, 2), dtype=np.int8)
            starts = np.zeros((self.n_beams, 3))
            ends = np.zeros((self.n_beams, 3))
            actuators = np.zeros(self.n_beams)
            joint_pos0 = np.zeros((self.n_joints, 3))
            fixed_flag = np.zeros(self.n_joints)
            start_joint = np.zeros(self.n_beams, dtype=np.intp)
            end_joint = np.zeros(self.n_beams, dtype=np.intp)
            origins = np.zeros((B, 3))
            fixed_global = np.zeros(B, dtype=np.intp)

            for i, design in enumerate(designs):
                design.validate()
                f, s, e = grid.beam_section_geometry(design)
                be, jo = i * grid.N_BEAMS, i * grid.N_JOINTS
                faces[be : be + grid.N_BEAMS] = f
                starts[be : be + grid.N_BEAMS] = s
                ends[be : be + grid.N_BEAMS] = e
                pos = design.positions()
                joint_pos0[jo : jo + grid.N_JOINTS] = pos
                fj = design.fixed_joint().id
                fixed_global[i] = jo + fj
                fixed_flag[jo + fj] = 1.0
                origins[i] = pos[fj]
                for beam in design.beams:
                    actuators[be + beam.id] = beam.actuator
                    start_joint[be + beam.id] = jo + beam.a
                    end_joint[be + beam.id] = jo + beam.b

            self.faces = faces
            self.origins = origins
            self.actuators = actuators
            self.joint_pos0 = joint_pos0
            self.fixed_flag = fixed_flag
            self.fixed_global = fixed_global
            self.start_joint = start_joint
            self.end_joint = end_joint
        else:
            length, actuator = free_beam
            self.designs = None
            self.n_designs = 0
            self.n_beams = 1
            self.n_joints = 0
            starts = np.array([[0.0, 0.0, 0.0]])
            ends = np.array([[length, 0.0, 0.0]])
            actuators = np.array([float(actuator)])
            self.faces = np.zeros((1, 2), dtype=np.int8)
            self.origins = np.zeros((1, 3))
            self.actuators = actuators

        self.starts = starts
        self.ends = ends
        chord = ends - starts
        self.rest_len = np.sqrt((chord * chord).sum(axis=1))
        self.tangent0 = chord / self.rest_len[:, None]
        self.ds = self.rest_len / S
        # total rest turning per beam (radians), spread over the S-1 interior
        # vertices so the end-to-end tangent turn matches kappa * a * L
        self.kappa_total = self.actuators * math.radians(config.kappa_max) * self.rest_len
        self.width0 = _normalize(_cross(self.tangent0, grid._Z[None, :]))

        interior = np.arange(1, S)
        self._bend_colors = [
            interior[interior % 3 == c] for c in (0, 1, 2) if len(interior[interior % 3 == c])
        ]
        self._build_joint_tables()

    def _build_joint_tables(self) -> None:
        """Flat member tables for vectorized joint shape matching.

        Members of a joint are, per attached beam end, the end node (on the
        joint face) and its neighbor; rest offsets come from the design-time
        geometry so a flat grid is exactly at rest.
        """
        if not self.n_joints:
            self.member_beam = np.zeros(0, dtype=np.intp)
            return
        S = self.S
        mb, mn, mj, rest = [], [], [], []
        for e in range(self.n_beams):
            d = self.tangent0[e]
            for joint, node0, node1, face_pt in (
                (self.start_joint[e], 0, 1, self.starts[e]),
                (self.end_joint[e], S, S - 1, self.ends[e]),
            ):
                step = d * self.ds[e] if node1 > node0 else -d * self.ds[e]
                for node, p in ((node0, face_pt), (node1, face_pt + step)):
                    mb.append(e)
                    mn.append(node)
                    mj.append(joint)
                    rest.append(p - self.joint_pos0[joint])
        self.member_beam = np.array(mb, dtype=np.intp)
        self.member_node = np.array(mn, dtype=np.intp)
        self.member_joint = np.array(mj, dtype=np.intp)
        self.member_rest = np.array(rest).reshape(-1, 3)
        counts = np.bincount(self.member_joint, minlength=self.n_joints)
        self.joint_count = counts
        rbar = np.zeros((self.n_joints, 3))
        np.add.at(rbar, self.member_joint, self.member_rest)
        self.joint_rest_mean = rbar / counts[:, None]
        pin_mask = self.fixed_flag[self.member_joint] == 1.0
        self.pin_beam = self.member_beam[pin_mask]
        self.pin_node = self.member_node[pin_mask]
        self.pin_world = self.member_rest[pin_mask] + self.joint_pos0[self.member_joint[pin_mask]]

    def init_state(self) -> OracleState:
        S = self.S
        frac = (np.arange(S + 1) / S)[None, :, None]
        X = self.starts[:, None, :] + frac * (self.ends - self.starts)[:, None, :]
        n = self.n_joints
        return OracleState(
            positions=X,
            joint_rot=np.broadcast_to(np.eye(3), (n, 3, 3)).copy(),
            joint_pos=self.joint_pos0.copy() if n else np.zeros((0, 3)),
            start_width=self.width0.copy(),
            released=0.0,
        )

    # -- constraint passes ------------------------------------------------
    # Constraints are projected Gauss-Seidel style in colored groups:
    # constraints within a color touch disjoint nodes, so each vectorized
    # color applies at full strength in a fixed, deterministic order.

    def _stretch_pass(self, X: np.ndarray) -> None:
        k = self.config.stretch_stiffness
        ds = self.ds[:, None, None]
        for parity in (0, 1):
            d = X[:, 1 + parity :: 2] - X[:, parity:-1:2]
            length = np.sqrt((d * d).sum(axis=2, keepdims=True))
            corr = (0.5 * k) * (1.0 - ds / np.maximum(length, 1e-12)) * d
            X[:, parity:-1:2] += corr
            X[:, 1 + parity :: 2] -= corr

    def _transport_width(self, X: np.ndarray, start_width: np.ndarray) -> np.ndarray:
        """Material width axis per segment via projection transport."""
        t = _normalize(X[:, 1:] - X[:, :-1])
        w = np.empty_like(t)
        cur = start_width
        for s in range(self.S):
            ts = t[:, s]
            cur = cur - np.sum(cur * ts, axis=1, keepdims=True) * ts
            cur = _normalize(cur)
            w[:, s] = cur
        return w

    def _current_start_width(self, state: OracleState) -> np.ndarray:
        if self.n_joints:
            # welded: the start frame rotates with the start joint
            return np.einsum("jab,jb->ja", state.joint_rot[self.start_joint], self.width0)
        return state.start_width

    def _bend_pass(self, X: np.ndarray, width_seg: np.ndarray, theta: np.ndarray, stiffness: float) -> None:
        # interior vertices i = 1..S-1 between segments i-1 and i, three
        # colors so windows within a color are node-disjoint
        ds = self.ds[:, None, None]
        half = 0.5 * theta[:, None]
        cos_h = np.cos(half)[..., None]
        sin_h = np.sin(half)[..., None]
        for idx in self._bend_colors:
            p0 = X[:, idx - 1]
            p1 = X[:, idx]
            p2 = X[:, idx + 1]
            d1 = _normalize(p1 - p0)
            d2 = _normalize(p2 - p1)
            m = d1 + d2
            mn = np.sqrt((m * m).sum(axis=2, keepdims=True))
            ok = mn[..., 0] > 1e-8
            m = m / np.maximum(mn, 1e-12)
            axis = width_seg[:, idx - 1]
            axis = axis - np.sum(axis * m, axis=2, keepdims=True) * m
            axis = _normalize(axis)
            # Rodrigues for +-half shares all terms but the sign of the cross
            even = m * cos_h + axis * np.sum(axis * m, axis=2, keepdims=True) * (1 - cos_h)
            odd = _cross(axis, m) * sin_h
            q0 = p1 - ds * (even - odd)
            q2 = p1 + ds * (even + odd)
            shift = ((p0 + p1 + p2) - (q0 + p1 + q2)) / 3.0
            c0 = (q0 + shift - p0) * stiffness
            c1 = shift * stiffness
            c2 = (q2 + shift - p2) * stiffness
            c0[~ok] = 0.0
            c1[~ok] = 0.0
            c2[~ok] = 0.0
            X[:, idx - 1] += c0
            X[:, idx] += c1
            X[:, idx + 1] += c2

    def _joint_pass(self, state: OracleState) -> None:
        if not self.n_joints:
            return
        X = state.positions
        x = X[self.member_beam, self.member_node]
        xbar = np.zeros((self.n_joints, 3))
        np.add.at(xbar, self.member_joint, x)
        xbar /= self.joint_count[:, None]
        rc = self.member_rest - self.joint_rest_mean[self.member_joint]
        xc = x - xbar[self.member_joint]
        H = np.zeros((self.n_joints, 3, 3))
        np.add.at(H, self.member_joint, rc[:, :, None] * xc[:, None, :])
        U, _, Vt = np.linalg.svd(H)
        V = np.transpose(Vt, (0, 2, 1))
        Ut = np.transpose(U, (0, 2, 1))
        det = np.linalg.det(V @ Ut)
        D = np.broadcast_to(np.eye(3), (self.n_joints, 3, 3)).copy()
        D[:, 2, 2] = det
        R = V @ D @ Ut
        p = xbar - np.einsum("jab,jb->ja", R, self.joint_rest_mean)
        state.joint_rot = R
        state.joint_pos = p
        target = np.einsum("jab,jb->ja", R[self.member_joint], self.member_rest) + p[self.member_joint]
        X[self.member_beam, self.member_node] += self.config.joint_rigidity * (target - x)

    def _pin_fixed(self, state: OracleState) -> None:
        if not self.n_joints:
            return
        state.positions[self.pin_beam, self.pin_node] = self.pin_world
        state.joint_rot[self.fixed_global] = np.eye(3)
        state.joint_pos[self.fixed_global] = self.joint_pos0[self.fixed_global]

    def project(
        self,
        state: OracleState,
        released: float,
        iterations: int,
        *,
        bend_scale: float = 1.0,
        gravity: bool = False,
    ) -> OracleState:
        """Run fixed-count constraint projection toward the released rest shape."""
        state = state.copy()
        state.released = released
        theta = released * self.kappa_total / max(self.S - 1, 1)
        bend_k = self.config.bend_stiffness / bend_scale
        g_step = np.array(self.config.gravity) * self.config.gravity_dt**2
        # gravity kicks stop at 40%: the long settle tail keeps the creep
        # equilibrium bend-stiffness-limited (sag monotone in compliance)
        # and pulls the hard stretch constraint back under tolerance
        kick_phase = int(iterations * 0.4)
        kick_every = max(kick_phase // self.config.creep_substeps, 1)
        for it in range(iterations):
            if gravity and it < kick_phase and it % kick_every == 0:
                state.positions += g_step
            self._stretch_pass(state.positions)
            w = self._transport_width(state.positions, self._current_start_width(state))
            self._bend_pass(state.positions, w, theta, bend_k)
            self._joint_pass(state)
            self._stretch_pass(state.positions)
            self._pin_fixed(state)
        state.start_width = self._transport_width(
            state.positions, self._current_start_width(state)
        )[:, 0]
        return state

    def rediscretize(self, state: OracleState) -> OracleState:
        """Rebuild the solver state from graph-observable quantities only.

        Joint poses and the beam mid-points are exactly what the extracted
        features encode; interiors are re-laid as quadratic curves through
        the attachment faces and the midpoint.  Running this between frames
        makes each frame an exact function of the previous frame's graph, so
        the trajectory carries no hidden solver state.
        """
        if not self.n_joints:
            return state.copy()
        S = self.S
        R_a = state.joint_rot[self.start_joint]
        R_b = state.joint_rot[self.end_joint]
        p_a = state.joint_pos[self.start_joint]
        p_b = state.joint_pos[self.end_joint]
        rest_start = self.starts - self.joint_pos0[self.start_joint]
        rest_end = self.ends - self.joint_pos0[self.end_joint]
        s0 = np.einsum("eab,eb->ea", R_a, rest_start) + p_a
        s2 = np.einsum("eab,eb->ea", R_b, rest_end) + p_b
        mid = state.positions[:, S // 2]
        control = 2.0 * mid - 0.5 * (s0 + s2)

        # sample the quadratic densely, then place nodes at equal arc-length
        # fractions so curled beams do not come back with shortened segments
        M = 8 * S
        u = (np.arange(M + 1) / M)[None, :, None]
        dense = (1 - u) ** 2 * s0[:, None, :] + 2 * u * (1 - u) * control[:, None, :] + u**2 * s2[:, None, :]
        seg = np.sqrt(((dense[:, 1:] - dense[:, :-1]) ** 2).sum(axis=2))
        cum = np.concatenate([np.zeros((len(seg), 1)), np.cumsum(seg, axis=1)], axis=1)
        want = cum[:, -1:] * (np.arange(S + 1) / S)[None, :]
        idx = (cum[:, None, :-1] <= want[:, :, None]).sum(axis=2) - 1
        idx = np.clip(idx, 0, M - 1)
        rows = np.arange(len(seg))[:, None]
        lo = cum[rows, idx]
        span = np.maximum(cum[rows, idx + 1] - lo, 1e-12)
        frac = ((want - lo) / span)[:, :, None]
        X = dense[rows, idx] * (1 - frac) + dense[rows, idx + 1] * frac
        out = state.copy()
        out.positions = X
        out.start_width = self._current_start_width(state)
        return out

    def stretch_violation(self, state: OracleState) -> np.ndarray:
        """Per-design max relative segment length violation."""
        d = state.positions[:, 1:] - state.positions[:, :-1]
        length = np.sqrt((d * d).sum(axis=2))
        v = np.abs(length / self.ds[:, None] - 1.0)
        v = np.where(np.isfinite(v), v, np.inf)
        if self.designs is None:
            return np.array([v.max()])
        return v.reshape(self.n_designs, -1).max(axis=1)

    def reset_design(self, state: OracleState, index: int) -> None:
        """Return one design's slice of the batch to its rest state."""
        be = index * grid.N_BEAMS
        jo = index * grid.N_JOINTS
        frac = (np.arange(self.S + 1) / self.S)[None, :, None]
        sl = slice(be, be + grid.N_BEAMS)
        state.positions[sl] = (
            self.starts[sl, None, :] + frac * (self.ends[sl] - self.starts[sl])[:, None, :]
        )
        state.joint_rot[jo : jo + grid.N_JOINTS] = np.eye(3)
        state.joint_pos[jo : jo + grid.N_JOINTS] = self.joint_pos0[jo : jo + grid.N_JOINTS]
        state.start_width[sl] = self.width0[sl]

    # -- feature extraction ------------------------------------------------

    def extract_all(self, state: OracleState, remaining_fraction: float) -> list[GridGraph]:
        """Read the deformed geometry of every design back into graph features."""
        corners = (
            np.einsum("jab,kb->jka", state.joint_rot, grid.CORNER_OFFSETS)
            + state.joint_pos[:, None, :]
        )
        S = self.S
        mid = state.positions[:, S // 2]
        tan = _normalize(state.positions[:, S // 2 + 1] - state.positions[:, S // 2 - 1])
        w_seg = self._transport_width(state.positions, self._current_start_width(state))
        w_mid = w_seg[:, S // 2]
        w_mid = _normalize(w_mid - np.sum(w_mid * tan, axis=1, keepdims=True) * tan)

        graphs = []
        for i, design in enumerate(self.designs):
            be, jo = i * grid.N_BEAMS, i * grid.N_JOINTS
            origin = self.origins[i]
            adjacency = np.zeros((grid.N_BEAMS, grid.N_JOINTS), dtype=np.int8)
            nodes = np.zeros((grid.N_JOINTS, grid.NODE_FEAT))
            edges = np.zeros((grid.N_BEAMS, grid.EDGE_FEAT))

            rel = corners[jo : jo + grid.N_JOINTS] - origin
            nodes[:, grid.NODE_VERT_SLICE] = rel.reshape(grid.N_JOINTS, -1)
            nodes[:, grid.NODE_CENTER_SLICE] = rel.mean(axis=1)
            nodes[:, grid.NODE_FIXED_COL] = self.fixed_flag[jo : jo + grid.N_JOINTS]

            s1 = grid.center_section_corners(mid[be : be + grid.N_BEAMS] - origin, tan[be : be + grid.N_BEAMS], w_mid[be : be + grid.N_BEAMS])
            for beam in design.beams:
                e = beam.id
                fa, fb = self.faces[be + e]
                adjacency[e, beam.a] = fa
                adjacency[e, beam.b] = fb
                s0 = rel[beam.a][grid.FACE_CORNER_INDEX[fa]]
                s2 = rel[beam.b][grid.FACE_CORNER_INDEX[fb]]
                verts = np.concatenate([s0, s1[e], s2])
                edges[e, grid.EDGE_VERT_SLICE] = verts.ravel()
                edges[e, grid.EDGE_CENTER_SLICE] = verts.mean(axis=0)
                edges[e, grid.EDGE_STRESS_SLICE] = (
                    remaining_fraction * beam.actuator * self.config.kappa_max
                )
                edges[e, grid.EDGE_ACTUATOR_COL] = beam.actuator
            graphs.append(
                GridGraph(adjacency=adjacency, nodes=nodes, edges=edges, fixed_origin=origin.copy())
            )
        return graphs


def simulate_oracle_batch(
    designs: list[GridDesign], config: OracleConfig | None = None
) -> tuple[list[Trajectory | None], list[tuple[int, int]]]:
    """Simulate a batch of designs in one constraint system.

    Returns (trajectories, failures); a diverged design yields None and a
    (design index, frame index) entry, and is frozen at rest so it cannot
    poison the rest of the batch.
    """
    config = config or OracleConfig()
    net = BeamNetwork(designs, config)
    state = net.init_state()
    frame_lists: list[list[GridGraph]] = [[g] for g in net.extract_all(state, 1.0)]
    failed: dict[int, int] = {}

    def step(state, released, **kw):
        return net.project(state, released, config.projection_iterations, **kw)

    for t in range(1, N_STAGE1_FRAMES + 2):
        # each frame starts from a state rebuilt off the previous frame's
        # graph, so the emitted trajectory is Markov in the features
        state = net.rediscretize(state)
        if t <= N_STAGE1_FRAMES:
            state = step(state, t / N_STAGE1_FRAMES)
            remaining = 1.0 - t / N_STAGE1_FRAMES
        else:
            if np.linalg.norm(config.gravity):
                state = step(state, 1.0, bend_scale=config.creep_compliance_scale, gravity=True)
            remaining = 0.0
        violations = net.stretch_violation(state)
        for i in np.nonzero(violations > 0.05)[0]:
            if int(i) not in failed:
                failed[int(i)] = t
                net.reset_design(state, int(i))
        for i, g in enumerate(net.extract_all(state, remaining)):
            frame_lists[i].append(g)

    trajectories: list[Trajectory | None] = []
    for i, design in enumerate(designs):
        if i in failed:
            trajectories.append(None)
        else:
            trajectories.append(
                Trajectory(
                    design=design,
                    frames=frame_lists[i],
                    source="oracle",
                    meta={"oracle_version": ORACLE_VERSION, "config": config.to_dict()},
                )
            )
    return trajectories, sorted(failed.items())


def simulate_oracle(design: GridDesign, config: OracleConfig | None = None) -> Trajectory:
    """Generate the 12-frame ground-truth trajectory of a design.

    Frames: the flat t=0 state, ten stage-1 frames at 10%..100% curvature
    release, and one stage-2 gravity-creep frame.  Remaining-stress channels
    follow (1 - t/10) * actuator * kappa_max, reaching 0 after creep.
    """
    trajectories, failures = simulate_oracle_batch([design], config)
    if failures:
        raise OracleDiverged(
            f"segment length violation above 5% at frame {failures[0][1]}",
            frame=failures[0][1],
        )
    return trajectories[0]


def stage2_creep(
    state: OracleState,
    config: OracleConfig,
    *,
    net: BeamNetwork | None = None,
    design: GridDesign | None = None,
) -> OracleState:
    """One gravity relaxation pass with softened bend compliance.

    The input must be the stage-1 terminal state.  Zero gravity is a no-op.
    """
    if not np.linalg.norm(config.gravity):
        return state.copy()
    net = net or BeamNetwork(design, config)
    return net.project(
        state,
        1.0,
        config.projection_iterations,
        bend_scale=config.creep_compliance_scale,
        gravity=True,
    )


# -- free beam harness (analytic checks) -----------------------------------


def free_beam_network(length: float, actuator: float, config: OracleConfig | None = None) -> BeamNetwork:
    """Single unjointed beam; used to check the bend model analytically."""
    return BeamNetwork(None, config, free_beam=(length, actuator))


def run_stage1(net: BeamNetwork, state: OracleState | None = None) -> OracleState:
    """Apply the ten stage-1 release frames and return the terminal state."""
    state = state or net.init_state()
    for t in range(1, N_STAGE1_FRAMES + 1):
        state = net.project(state, t / N_STAGE1_FRAMES, net.config.projection_iterations)
    return state


def end_to_end_angle(state: OracleState, beam: int = 0) -> float:
    """Angle in degrees between the first and last segment directions."""
    X = state.positions[beam]
    d0 = X[1] - X[0]
    d1 = X[-1] - X[-2]
    c = float(np.dot(d0, d1) / (np.linalg.norm(d0) * np.linalg.norm(d1)))
    return math.degrees(math.acos(np.clip(c, -1.0, 1.0)))
