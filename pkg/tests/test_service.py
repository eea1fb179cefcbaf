import json

import numpy as np
import pytest
from fastapi.testclient import TestClient

from cuboidfit.priors import PriorTable
from cuboidfit.service import create_app
from cuboidfit.synth import SceneSpec, generate_scene


@pytest.fixture(scope="module")
def client():
    return TestClient(create_app())


def solve_body(seed=0, noise=0.0, prototype_class=None, config=None):
    scene = generate_scene(SceneSpec(seed=seed, noise_sigma_px=noise))
    vehicle = {
        "id": "v0",
        "annotations": [
            {"label": a.label.value, "points": [list(map(float, p)) for p in a.points]}
            for a in scene.annotations
        ],
    }
    if prototype_class:
        vehicle["prototype_class"] = prototype_class
    body = {"camera": scene.cam.to_dict(), "vehicle": vehicle}
    if config:
        body["config"] = config
    return body, scene


class TestHealthPriors:
    def test_health(self, client):
        r = client.get("/health")
        assert r.status_code == 200
        assert r.json() == {"status": "ok"}

    def test_priors_listing(self, client):
        r = client.get("/priors")
        assert r.status_code == 200
        classes = r.json()["classes"]
        assert len(classes) >= 1
        assert all({"name", "mu"} <= set(c) for c in classes)

    def test_priors_reload(self, tmp_path):
        app = create_app()
        local = TestClient(app)
        from cuboidfit.priors import fit_prior

        rng = np.random.default_rng(0)
        table = PriorTable([fit_prior("toy-class", np.abs(rng.normal([4, 2, 1.5], 0.1, (6, 3))))])
        path = tmp_path / "table.json"
        table.save(str(path))
        r = local.post("/priors/reload", json={"path": str(path)})
        assert r.status_code == 200
        assert r.json()["classes"] == ["toy-class"]
        names = [c["name"] for c in local.get("/priors").json()["classes"]]
        assert names == ["toy-class"]

    def test_priors_reload_bad_path(self, client):
        r = client.post("/priors/reload", json={"path": "/nonexistent/file.json"})
        assert r.status_code == 400


class TestSolveEndpoint:
    def test_dof_sufficient_returns_pose(self, client):
        body, scene = solve_body(seed=1)
        r = client.post("/solve", json=body)
        assert r.status_code == 200
        payload = r.json()
        assert payload["converged"] is True
        assert payload["dof"]["status"] in ("solvable", "gauge-only-deficient")
        pose = payload["pose"]
        assert np.asarray(pose["rotation"]).shape == (3, 3)
        wf = payload["projected_wireframe_px"]
        assert len(wf["corners"]) == 8
        assert len(wf["edges"]) == 12
        n_points = sum(len(a["points"]) for a in body["vehicle"]["annotations"])
        assert len(payload["per_point_residuals_px"]) == n_points

    def test_under_constrained_is_soft_200(self, client):
        body = {
            "camera": {"fx": 1000.0, "fy": 1000.0, "cx": 960.0, "cy": 540.0},
            "vehicle": {
                "id": "v",
                "annotations": [
                    {"label": "corner-top-rear-left", "points": [[10.0, 10.0]]}
                ],
            },
        }
        r = client.post("/solve", json=body)
        assert r.status_code == 200
        payload = r.json()
        assert payload["dof"]["status"] == "under-constrained"
        assert "pose" not in payload

    def test_schema_violation_400(self, client):
        body, _ = solve_body(seed=2)
        body["vehicle"]["annotations"][0]["label"] = "nonsense"
        r = client.post("/solve", json=body)
        assert r.status_code == 400
        assert any("nonsense" in e for e in r.json()["errors"])

    def test_not_json_400(self, client):
        r = client.post(
            "/solve", content=b"not json", headers={"content-type": "application/json"}
        )
        assert r.status_code == 400

    def test_identical_pixels_soft_dof_response(self, client):
        # every point at the same pixel: compiles but is rank-deficient,
        # which is a soft under-constrained outcome, not a 5xx
        body = {
            "camera": {"fx": 1000.0, "fy": 1000.0, "cx": 960.0, "cy": 540.0},
            "vehicle": {
                "id": "v",
                "annotations": [
                    {"label": lab, "points": [[500.0, 500.0]]}
                    for lab in (
                        "wheel-front-left", "wheel-front-right",
                        "wheel-rear-left", "wheel-rear-right",
                    )
                ]
                + [{"label": "symmetry-back", "points": [[500.0, 500.0], [500.0, 500.0]]},
                   {"label": "center-front", "points": [[500.0, 500.0]]}],
            },
        }
        r = client.post("/solve", json=body)
        assert r.status_code == 200
        assert "pose" not in r.json()

    def test_solver_hard_failure_maps_to_422(self, monkeypatch):
        import cuboidfit.service as service_mod
        from cuboidfit.solver import CheiralityError

        def boom(*args, **kwargs):
            raise CheiralityError("all rotation candidates failed cheirality")

        monkeypatch.setattr(service_mod, "solve", boom)
        local = TestClient(create_app())
        body, _ = solve_body(seed=11)
        r = local.post("/solve", json=body)
        assert r.status_code == 422
        assert "cheirality" in r.json()["detail"]

    def test_statelessness_byte_equality(self, client):
        body, _ = solve_body(seed=3)
        r1 = client.post("/solve", json=body)
        r2 = client.post("/solve", json=body)
        assert r1.content == r2.content

    def test_prior_class_flows_through(self, client):
        body, scene = solve_body(seed=4, noise=0.5, prototype_class="sedan")
        r = client.post("/solve", json=body)
        assert r.status_code == 200
        dims = r.json()["pose"]["dimensions"]
        assert 3.0 < dims[0] < 6.5  # metric-scale length from the prior

    def test_config_overrides(self, client):
        body, _ = solve_body(seed=5)
        body["config"] = {"gauge": "homogeneous_svd", "finetune": False}
        r = client.post("/solve", json=body)
        assert r.status_code == 200
        p = r.json()["pose"]
        # unit-norm gauge: dimensions are a fraction of the parameter norm
        assert np.asarray(p["dimensions"]).max() < 2.0

    def test_wireframe_matches_projection(self, client):
        body, scene = solve_body(seed=6)
        r = client.post("/solve", json=body)
        payload = r.json()
        from cuboidfit.camera import CuboidPose, cuboid_corners, project

        pose = CuboidPose.from_dict(payload["pose"])
        corners = cuboid_corners(pose)
        for px, corner in zip(payload["projected_wireframe_px"]["corners"], corners):
            np.testing.assert_allclose(px, project(corner, scene.cam), atol=1e-6)
