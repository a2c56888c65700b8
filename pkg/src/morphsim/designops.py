"""Design validation and the brute-force inverse/hybrid optimization loop.

Validation raises nothing: it returns a report whose errors block simulation
while warnings only advise.  The optimizer enumerates a design's one-step
neighborhood (actuator quarter-steps and compass joint moves), batch-rolls
every candidate through the surrogate, and ranks by mean distance to the
user's target points; the current design always competes, so greedy
adoption never worsens the score.
"""

from __future__ import annotations

from dataclasses import dataclass, field, replace

import numpy as np

from . import grid as gridmod
from .dataset import StatsReport, beam_lengths, design_dimension
from .errors import InvalidDesign, RolloutDiverged
from .grid import GridDesign, build_graph
from .model import SurrogateModel

MIN_ACTUATED_LENGTH = 15.0  # mm; shorter actuated beams cannot be printed reliably
JOINT_MOVE_DIRECTIONS = tuple(
    (np.cos(k * np.pi / 4.0), np.sin(k * np.pi / 4.0)) for k in range(8)
)


@dataclass
class ValidationIssue:
    code: str
    element: str
    message: str

    def to_dict(self) -> dict:
        return {"code": self.code, "element": self.element, "message": self.message}


@dataclass
class ValidationReport:
    errors: list[ValidationIssue] = field(default_factory=list)
    warnings: list[ValidationIssue] = field(default_factory=list)

    @property
    def ok(self) -> bool:
        return not self.errors

    def to_dict(self) -> dict:
        return {
            "ok": self.ok,
            "errors": [e.to_dict() for e in self.errors],
            "warnings": [w.to_dict() for w in self.warnings],
        }


def validate(design: GridDesign, stats: StatsReport | None = None) -> ValidationReport:
    """Check a design against topology rules and the training data coverage.

    Errors (JOINT_CONFIG_ERROR, ACTUATOR_LENGTH_ERROR) block simulation;
    warnings (BEAM_LENGTH_WARNING, GRID_SIZE_WARNING) flag geometry outside
    the dataset's 3rd..97th percentile bands.
    """
    report = ValidationReport()
    try:
        design.validate()
        gridmod.assign_faces(design)
    except InvalidDesign as exc:
        report.errors.append(
            ValidationIssue(code="JOINT_CONFIG_ERROR", element="design", message=str(exc))
        )
        return report

    lengths = beam_lengths(design)
    for beam in design.beams:
        if beam.actuator > 0.0 and lengths[beam.id] < MIN_ACTUATED_LENGTH:
            report.errors.append(
                ValidationIssue(
                    code="ACTUATOR_LENGTH_ERROR",
                    element=f"beam:{beam.id}",
                    message=(
                        f"actuated beam {beam.id} is {lengths[beam.id]:.1f} mm, "
                        f"below the {MIN_ACTUATED_LENGTH:.0f} mm minimum"
                    ),
                )
            )

    if stats is not None:
        lo, hi = stats.beam_length["p3"], stats.beam_length["p97"]
        for beam in design.beams:
            if not lo <= lengths[beam.id] <= hi:
                report.warnings.append(
                    ValidationIssue(
                        code="BEAM_LENGTH_WARNING",
                        element=f"beam:{beam.id}",
                        message=(
                            f"beam {beam.id} length {lengths[beam.id]:.1f} mm outside "
                            f"the training range [{lo:.1f}, {hi:.1f}]"
                        ),
                    )
                )
        dim = design_dimension(design)
        dlo, dhi = stats.grid_dimension["p3"], stats.grid_dimension["p97"]
        if not dlo <= dim <= dhi:
            report.warnings.append(
                ValidationIssue(
                    code="GRID_SIZE_WARNING",
                    element="design",
                    message=(
                        f"grid dimension {dim:.1f} mm outside the training range "
                        f"[{dlo:.1f}, {dhi:.1f}]"
                    ),
                )
            )
    return report


# -- targets -------------------------------------------------------------------


@dataclass(frozen=True)
class TargetSpec:
    """Joint ids paired with world-frame target points (mm)."""

    targets: tuple[tuple[int, tuple[float, float, float]], ...]

    def __post_init__(self):
        if not self.targets:
            raise ValueError("at least one target required")

    @staticmethod
    def from_list(items: list[dict]) -> "TargetSpec":
        return TargetSpec(
            targets=tuple(
                (int(it["joint"]), (float(it["x"]), float(it["y"]), float(it["z"])))
                for it in items
            )
        )

    def to_list(self) -> list[dict]:
        return [
            {"joint": j, "x": p[0], "y": p[1], "z": p[2]} for j, p in self.targets
        ]

    def validate_against(self, design: GridDesign) -> None:
        ids = {j.id for j in design.joints}
        for j, _ in self.targets:
            if j not in ids:
                raise InvalidDesign(f"target references unknown joint {j}")


# -- candidate generation --------------------------------------------------------


@dataclass
class Candidate:
    design: GridDesign
    descriptor: str


@dataclass
class RankedCandidate:
    design: GridDesign
    descriptor: str
    score: float
    final_frame: object  # GridGraph of the predicted final state

    def to_dict(self, include_frame=False) -> dict:
        from .dataset import graph_to_dict

        out = {
            "descriptor": self.descriptor,
            "score": self.score,
            "design": self.design.to_dict(),
        }
        if include_frame:
            out["final_frame"] = graph_to_dict(self.final_frame)
        return out


@dataclass
class CandidateRanking:
    ranked: list[RankedCandidate]
    dropped: list[dict] = field(default_factory=list)

    def __len__(self) -> int:
        return len(self.ranked)

    def best(self) -> RankedCandidate:
        return self.ranked[0]


def _design_key(design: GridDesign) -> str:
    return design.design_id()


def neighborhood(
    design: GridDesign, joint_step: float = 2.0, stats: StatsReport | None = None
) -> list[Candidate]:
    """The current design plus all one-step modifications.

    Actuators move by +-0.25 (clamped to [0, 1], duplicates dropped); every
    non-fixed joint moves by joint_step along the eight compass directions.
    Candidates failing validation errors are dropped.
    """
    pool: list[Candidate] = [Candidate(design=design, descriptor="current")]
    seen = {_design_key(design)}

    for beam in design.beams:
        for delta in (0.25, -0.25):
            new_val = min(max(beam.actuator + delta, 0.0), 1.0)
            if new_val == beam.actuator:
                continue
            beams = tuple(
                replace(b, actuator=new_val) if b.id == beam.id else b for b in design.beams
            )
            cand = GridDesign(joints=design.joints, beams=beams)
            key = _design_key(cand)
            if key in seen:
                continue
            seen.add(key)
            sign = "+" if delta > 0 else "-"
            pool.append(
                Candidate(cand, descriptor=f"actuator beam {beam.id} {sign}0.25 -> {new_val:.2f}")
            )

    for joint in design.joints:
        if joint.fixed:
            continue
        for k, (dx, dy) in enumerate(JOINT_MOVE_DIRECTIONS):
            joints = tuple(
                replace(j, x=j.x + joint_step * dx, y=j.y + joint_step * dy)
                if j.id == joint.id
                else j
                for j in design.joints
            )
            cand = GridDesign(joints=joints, beams=design.beams)
            key = _design_key(cand)
            if key in seen:
                continue
            seen.add(key)
            pool.append(
                Candidate(cand, descriptor=f"move joint {joint.id} {k * 45}deg by {joint_step:g} mm")
            )

    return [c for c in pool if validate(c.design, stats).ok]


def rank_candidates(
    model: SurrogateModel,
    candidates: list[Candidate],
    targets: TargetSpec,
    batch_size: int = 100,
) -> CandidateRanking:
    """Batch-simulate candidates and rank by mean target distance.

    Score is the average over target pairs of the distance between the
    predicted final joint center and the target point; ties break on the
    descriptor for determinism.  Diverged candidates are excluded.
    """
    scored: list[RankedCandidate] = []
    dropped: list[dict] = []
    for lo in range(0, len(candidates), batch_size):
        chunk = candidates[lo : lo + batch_size]
        graphs = [build_graph(c.design) for c in chunk]
        try:
            trajectories = model.rollout_batch(graphs, dtype=np.float32)
            per_chunk = list(zip(chunk, trajectories))
        except RolloutDiverged:
            # retry one by one so a single bad candidate cannot sink the chunk
            per_chunk = []
            for cand, graph in zip(chunk, graphs):
                try:
                    per_chunk.append((cand, model.rollout(graph)))
                except RolloutDiverged as exc:
                    dropped.append({"descriptor": cand.descriptor, "reason": str(exc)})
        for cand, traj in per_chunk:
            final = traj.frames[-1]
            centers = final.nodes[:, gridmod.NODE_CENTER_SLICE] + final.fixed_origin
            dists = [
                float(np.linalg.norm(centers[j] - np.asarray(p))) for j, p in targets.targets
            ]
            scored.append(
                RankedCandidate(
                    design=cand.design,
                    descriptor=cand.descriptor,
                    score=float(np.mean(dists)),
                    final_frame=final,
                )
            )
    scored.sort(key=lambda r: (r.score, r.descriptor))
    return CandidateRanking(ranked=scored, dropped=dropped)


def hybrid_step(
    model: SurrogateModel,
    design: GridDesign,
    targets: TargetSpec,
    k: int = 5,
    joint_step: float = 2.0,
    stats: StatsReport | None = None,
) -> CandidateRanking:
    """Top-k ranked modifications for the user to choose from."""
    if k < 1:
        raise ValueError("k must be >= 1")
    targets.validate_against(design)
    ranking = rank_candidates(model, neighborhood(design, joint_step, stats), targets)
    return CandidateRanking(ranked=ranking.ranked[:k], dropped=ranking.dropped)


def inverse_optimize(
    model: SurrogateModel,
    design: GridDesign,
    targets: TargetSpec,
    epochs: int = 22,
    joint_step: float = 2.0,
    stats: StatsReport | None = None,
    log=None,
    on_epoch=None,
) -> tuple[GridDesign, list[dict]]:
    """Greedy descent: adopt the best-ranked modification each epoch.

    The candidate pool always contains the current design, so the score
    history is non-increasing.  Returns the final design and the per-epoch
    history (score, adopted descriptor, pool size).
    """
    if epochs < 1:
        raise ValueError("epochs must be >= 1")
    targets.validate_against(design)
    say = log or (lambda msg: None)
    history: list[dict] = []
    current = design
    for epoch in range(epochs):
        ranking = rank_candidates(model, neighborhood(current, joint_step, stats), targets)
        best = ranking.best()
        current = best.design
        row = {
            "epoch": epoch,
            "score": best.score,
            "adopted": best.descriptor,
            "pool": len(ranking),
        }
        history.append(row)
        say(f"epoch {epoch}: score {best.score:.3f} ({best.descriptor})")
        if on_epoch is not None:
            on_epoch(row)
    return current, history
