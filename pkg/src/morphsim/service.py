"""HTTP service hosting the design studio workflows.

The app loads one checkpoint at startup (refusing on a feature-layout
mismatch), keeps it immutable, and serves validation, simulation, inverse
search, design persistence, and model metadata.  Long inverse runs stream
one JSON line per epoch so clients can render progress live.
"""

from __future__ import annotations

import json
from pathlib import Path

from fastapi import Body, FastAPI, HTTPException
from fastapi.responses import JSONResponse, StreamingResponse
from fastapi.staticfiles import StaticFiles

from . import grid as gridmod
from .dataset import StatsReport, graph_to_dict, trajectory_to_dict
from .designops import TargetSpec, hybrid_step, neighborhood, rank_candidates, validate
from .errors import InvalidDesign, MorphsimError
from .grid import GridDesign, build_graph
from .model import load_model
from .oracle import OracleConfig, simulate_oracle
from .workspace import Workspace


def _parse_design(payload: dict) -> GridDesign:
    try:
        return GridDesign.from_dict(payload)
    except (KeyError, TypeError, ValueError, InvalidDesign) as exc:
        raise HTTPException(status_code=422, detail=f"malformed design: {exc}") from exc


def create_app(
    checkpoint: str,
    stats: str | None = None,
    workspace_root: str | None = None,
    studio_dir: str | None = None,
) -> FastAPI:
    model = load_model(checkpoint)
    if model.feature_layout != gridmod.layout_hash():
        raise MorphsimError(
            f"checkpoint layout {model.feature_layout} does not match this "
            f"build's extractor {gridmod.layout_hash()}; refusing to serve"
        )
    if stats is not None:
        stats_report = StatsReport.load(stats)
    elif "dataset_stats" in model.meta:
        stats_report = StatsReport.from_dict(model.meta["dataset_stats"])
    else:
        stats_report = None
    workspace = Workspace(workspace_root)

    with open(str(checkpoint) + ".json") as f:
        manifest = json.load(f)

    app = FastAPI(title="morphsim design service")

    @app.get("/api/model/info")
    def model_info():
        return {
            "feature_layout": model.feature_layout,
            "latent": model.latent,
            "hidden": list(model.hidden),
            "symmetrize": model.symmetrize,
            "meta": model.meta,
            "normalizers": manifest["normalizers"],
            "specs": manifest["specs"],
            "dataset_stats": stats_report.to_dict() if stats_report else None,
        }

    @app.post("/api/validate")
    def validate_design(payload: dict = Body(...)):
        design = _parse_design(payload)
        return validate(design, stats_report).to_dict()

    @app.post("/api/simulate")
    def simulate(payload: dict = Body(...)):
        body = payload if "design" in payload else {"design": payload}
        design = _parse_design(body["design"])
        report = validate(design, stats_report)
        if not report.ok:
            return JSONResponse(status_code=422, content={"validation": report.to_dict()})
        trajectory = model.rollout(build_graph(design), design)
        out = trajectory_to_dict(trajectory)
        out["validation"] = report.to_dict()
        if body.get("with_oracle"):
            out["oracle_frames"] = [
                graph_to_dict(f) for f in simulate_oracle(design, OracleConfig()).frames
            ]
        return out

    @app.post("/api/inverse/step")
    def inverse_step(payload: dict = Body(...)):
        design = _parse_design(payload["design"])
        report = validate(design, stats_report)
        if not report.ok:
            return JSONResponse(status_code=422, content={"validation": report.to_dict()})
        try:
            targets = TargetSpec.from_list(payload["targets"])
            targets.validate_against(design)
        except (KeyError, TypeError, ValueError, InvalidDesign) as exc:
            raise HTTPException(status_code=422, detail=f"malformed targets: {exc}") from exc
        k = int(payload.get("topk", 5))
        step = float(payload.get("step", 2.0))
        ranking = hybrid_step(model, design, targets, k=k, joint_step=step, stats=stats_report)
        return {
            "candidates": [r.to_dict(include_frame=True) for r in ranking.ranked],
            "dropped": ranking.dropped,
        }

    @app.post("/api/inverse/run")
    def inverse_run(payload: dict = Body(...)):
        design = _parse_design(payload["design"])
        report = validate(design, stats_report)
        if not report.ok:
            return JSONResponse(status_code=422, content={"validation": report.to_dict()})
        try:
            targets = TargetSpec.from_list(payload["targets"])
            targets.validate_against(design)
        except (KeyError, TypeError, ValueError, InvalidDesign) as exc:
            raise HTTPException(status_code=422, detail=f"malformed targets: {exc}") from exc
        epochs = int(payload.get("epochs", 22))
        step = float(payload.get("step", 2.0))

        def run():
            current = design
            history = []
            for epoch in range(epochs):
                ranking = rank_candidates(
                    model, neighborhood(current, step, stats_report), targets
                )
                best = ranking.best()
                current = best.design
                row = {"epoch": epoch, "score": best.score, "adopted": best.descriptor}
                history.append(row)
                yield json.dumps(row) + "\n"
            yield json.dumps(
                {"done": True, "design": current.to_dict(), "history": history}
            ) + "\n"

        return StreamingResponse(run(), media_type="application/jsonl")

    @app.get("/api/designs/{design_id}")
    def get_design(design_id: str):
        name = f"{design_id}.json"
        if not workspace.exists("designs", name):
            raise HTTPException(status_code=404, detail=f"design {design_id} not found")
        return json.loads(workspace.read_text("designs", name))

    @app.put("/api/designs/{design_id}")
    def put_design(design_id: str, payload: dict = Body(...)):
        design = _parse_design(payload)
        workspace.write_text("designs", f"{design_id}.json", design.to_json())
        return {"stored": design_id}

    studio = Path(studio_dir) if studio_dir else Path(__file__).resolve().parents[2] / "frontend" / "dist"
    if studio.is_dir():
        app.mount("/", StaticFiles(directory=str(studio), html=True), name="studio")

    return app
