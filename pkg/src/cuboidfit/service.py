"""Stateless HTTP facade over the solver for interactive annotation UIs.

POST /solve takes one vehicle's annotations plus camera and config
overrides and returns the pose, the projected wireframe, per-point pixel
residuals, and the DoF verdict.  Under-constrained inputs are a normal
200 response carrying only the DoF report, so a UI can poll per click;
hard solver failures (cheirality) are 422; schema violations are 400
with JSON-pointer paths.

Responses are rendered through the canonical JSON writer, so identical
request bodies yield byte-identical responses.
"""

from __future__ import annotations

import os

import numpy as np
from fastapi import FastAPI, Request, Response
from fastapi.middleware.cors import CORSMiddleware

from .annotations import compile_constraints, dof_report
from .camera import CUBOID_EDGES, CameraIntrinsics, cuboid_corners, project
from .io import SchemaError, canonical_json, validate_solve_request
from .priors import PriorTable
from .solver import SolverConfig, SolverError, UnderConstrainedError, solve
from .io import _vehicle_from_dict

__all__ = ["create_app"]


def _json_response(payload: dict, status_code: int = 200) -> Response:
    return Response(
        content=canonical_json(payload),
        status_code=status_code,
        media_type="application/json",
    )


def _wireframe(pose, cam: CameraIntrinsics):
    corners = cuboid_corners(pose)
    if np.any(corners[:, 2] <= 1e-6):
        return None
    return {
        "corners": [list(project(c, cam)) for c in corners],
        "edges": [list(e) for e in CUBOID_EDGES],
    }


def create_app(priors: PriorTable | None = None) -> FastAPI:
    app = FastAPI(title="cuboidfit solve service")
    origins = os.environ.get("CUBOIDFIT_CORS_ORIGINS", "*").split(",")
    app.add_middleware(
        CORSMiddleware,
        allow_origins=origins,
        allow_methods=["*"],
        allow_headers=["*"],
    )
    app.state.priors = priors or PriorTable.default()

    @app.get("/health")
    def health() -> Response:
        return _json_response({"status": "ok"})

    @app.get("/priors")
    def list_priors() -> Response:
        table: PriorTable = app.state.priors
        classes = [
            {"name": name, "mu": table.lookup(name).mu.tolist()}
            for name in table.class_names()
        ]
        return _json_response({"classes": classes})

    @app.post("/priors/reload")
    async def reload_priors(request: Request) -> Response:
        body = await request.json()
        path = body.get("path") if isinstance(body, dict) else None
        try:
            table = PriorTable.load(path) if path else PriorTable.default()
        except (OSError, ValueError, KeyError) as exc:
            return _json_response({"detail": f"cannot load prior table: {exc}"}, 400)
        app.state.priors = table  # atomic swap; requests in flight keep the old one
        return _json_response({"classes": table.class_names()})

    @app.post("/solve")
    async def solve_endpoint(request: Request) -> Response:
        try:
            body = await request.json()
        except Exception:
            return _json_response({"detail": "body is not valid JSON"}, 400)
        try:
            validate_solve_request(body)
        except SchemaError as exc:
            return _json_response({"detail": "schema violation", "errors": exc.errors}, 400)

        cam = CameraIntrinsics.from_dict(body["camera"])
        vehicle = _vehicle_from_dict(body["vehicle"])
        overrides = body.get("config", {})
        gauge = overrides.get("gauge") or ("prior" if vehicle.prototype_class else "fix_dz_to_1")
        config = SolverConfig(
            gauge=gauge,
            lambda_prior=float(overrides.get("lambda_prior", 1.0)),
            lambda_pixel=float(overrides.get("lambda_pixel", 1.0)),
            finetune=bool(overrides.get("finetune", True)),
        )

        if not vehicle.annotations:
            return _json_response({"detail": "vehicle has no annotations"}, 400)
        try:
            sys_ = compile_constraints(vehicle.annotations, cam)
        except ValueError as exc:
            return _json_response({"detail": str(exc)}, 400)
        report = dof_report(sys_, prior_active=(config.gauge == "prior"))
        if report.status == "under-constrained":
            return _json_response({"dof": report.to_dict(), "converged": False})

        try:
            result = solve(
                vehicle.annotations,
                cam,
                prototype_class=vehicle.prototype_class,
                config=config,
                priors=app.state.priors,
                feature_scale=vehicle.feature_scale,
            )
        except UnderConstrainedError as exc:
            rep = exc.report.to_dict() if exc.report else report.to_dict()
            return _json_response({"dof": rep, "converged": False})
        except SolverError as exc:
            return _json_response({"detail": str(exc), "dof": report.to_dict()}, 422)

        payload = {
            "pose": result.pose.to_dict(),
            "projected_wireframe_px": _wireframe(result.pose, cam),
            "per_point_residuals_px": result.per_point_residuals_px.tolist(),
            "dof": report.to_dict(),
            "cost_pixel": result.cost_pixel,
            "converged": result.converged,
        }
        return _json_response(payload)

    return app
