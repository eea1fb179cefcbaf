"""Command-line surface: solve, evaluate, fit-priors, synth, serve.

Flags can also come from environment variables prefixed CUBOIDFIT_
(e.g. CUBOIDFIT_GAUGE=prior); explicit flags win.  All JSON outputs are
canonical (sorted keys, 9 significant digits), so identical runs produce
byte-identical files.  Exit code 2 signals per-vehicle failures; the run
still completes and reports the rest.
"""

from __future__ import annotations

import argparse
import csv
import os
import sys
import time

import numpy as np

from . import io as cio
from .camera import CameraIntrinsics
from .metrics import MetricsReport, evaluate_pair
from .priors import PriorTable, fit_prior
from .solver import SolverConfig, SolverError, solve
from .synth import DEFAULT_RECIPE, REAR_VIEW_RECIPE, SceneSpec, generate_scene

ENV_PREFIX = "CUBOIDFIT_"


def _env(name: str, default=None):
    return os.environ.get(ENV_PREFIX + name, default)


def _add_solver_flags(p: argparse.ArgumentParser) -> None:
    p.add_argument("--gauge", choices=["fix_dz_to_1", "homogeneous_svd", "prior"],
                   default=_env("GAUGE"), help="scale gauge (default: prior when a class is set)")
    p.add_argument("--lambda", dest="lambda_prior", type=float,
                   default=float(_env("LAMBDA", 1.0)), help="size-prior weight in the 3D cost")
    p.add_argument("--lambda-pixel", type=float, default=float(_env("LAMBDA_PIXEL", 1.0)),
                   help="size-prior weight in the pixel cost")
    p.add_argument("--no-finetune", action="store_true", help="skip pixel-domain refinement")
    p.add_argument("--priors", default=_env("PRIORS"), help="prior table JSON (default: bundled)")
    p.add_argument("--seed", type=int, default=int(_env("SEED", 0)))


def _load_priors(path) -> PriorTable:
    return PriorTable.load(path) if path else PriorTable.default()


def _vehicle_config(args, vehicle) -> SolverConfig:
    gauge = args.gauge or ("prior" if vehicle.prototype_class else "fix_dz_to_1")
    return SolverConfig(
        gauge=gauge,
        lambda_prior=args.lambda_prior,
        lambda_pixel=args.lambda_pixel,
        finetune=not args.no_finetune,
    )


def cmd_solve(args) -> int:
    doc = cio.load_annotations(args.annotations)
    priors = _load_priors(args.priors)
    records = []
    failures = []
    for veh in doc.vehicles:
        config = _vehicle_config(args, veh)
        t0 = time.perf_counter()
        try:
            result = solve(
                veh.annotations,
                doc.camera,
                prototype_class=veh.prototype_class,
                config=config,
                priors=priors,
                feature_scale=veh.feature_scale,
            )
        except (SolverError, ValueError) as exc:
            failures.append((veh.id, str(exc)))
            records.append({"id": veh.id, "error": str(exc)})
            continue
        ms = (time.perf_counter() - t0) * 1e3
        rec = result.to_dict()
        rec["id"] = veh.id
        if args.timing:
            # wall-clock values break byte-identical reruns; opt-in only
            rec["solve_ms"] = ms
        records.append(rec)
    cio.save_poses(records, args.out)
    for vid, msg in failures:
        print(f"FAILED {vid}: {msg}", file=sys.stderr)
    print(f"solved {len(records) - len(failures)}/{len(records)} vehicles -> {args.out}")
    return 2 if failures else 0


def cmd_evaluate(args) -> int:
    est = cio.load_poses(args.poses)
    gt = cio.load_poses(args.gt)
    report = MetricsReport()
    failures = []
    for vid in sorted(gt):
        gt_pose = gt[vid]["pose"]
        if gt_pose is None:
            continue
        # occlusion is annotation metadata if present; no computation here
        if args.max_occlusion is not None and gt[vid].get("occlusion", 0.0) > args.max_occlusion:
            continue
        entry = est.get(vid)
        if entry is None or entry.get("pose") is None:
            failures.append((vid, entry.get("error", "missing") if entry else "missing"))
            continue
        report.add(
            evaluate_pair(
                entry["pose"],
                gt_pose,
                vehicle_id=vid,
                solve_ms=float(entry.get("solve_ms", float("nan"))),
                converged=bool(entry.get("converged", True)),
            )
        )
    if args.csv:
        with open(args.csv, "w") as f:
            f.write(report.to_csv())
    if args.json:
        with open(args.json, "w") as f:
            f.write(cio.canonical_json(report.to_dict()))
    agg = report.aggregate()
    if agg:
        print(
            f"n={agg['n_vehicles']} IoU={agg['iou']:.3f} sIoU={agg['siou']:.3f} "
            f"E_R={agg['e_rot_deg']:.2f}deg E_t={agg['e_trans']:.3f} "
            f"E_d={agg['e_dim']:.3f} E_comb={agg['e_comb']:.4f}"
        )
    for vid, msg in failures:
        print(f"FAILED {vid}: {msg}", file=sys.stderr)
    return 2 if failures else 0


def cmd_fit_priors(args) -> int:
    by_class: dict = {}
    with open(args.dims) as f:
        for row in csv.DictReader(f):
            by_class.setdefault(row["class"], []).append(
                [float(row["d_x"]), float(row["d_y"]), float(row["d_z"])]
            )
    priors = []
    for name in sorted(by_class):
        samples = by_class[name]
        if len(samples) < 4:
            print(f"skipping {name}: only {len(samples)} samples (need 4)", file=sys.stderr)
            continue
        priors.append(fit_prior(name, np.asarray(samples)))
    if not priors:
        print("no class had enough samples", file=sys.stderr)
        return 2
    PriorTable(priors).save(args.out)
    print(f"fitted {len(priors)} classes -> {args.out}")
    return 0


def cmd_synth(args) -> int:
    recipe = REAR_VIEW_RECIPE if args.rear_view else DEFAULT_RECIPE
    if args.recipe:
        recipe = tuple(args.recipe.split(","))
    vehicles = []
    gt_records = []
    cam = None
    for k in range(args.n):
        spec = SceneSpec(recipe=recipe, noise_sigma_px=args.noise, seed=args.seed + k)
        if args.rear_view:
            spec = SceneSpec(
                recipe=recipe, noise_sigma_px=args.noise, seed=args.seed + k,
                yaw_range=(-0.2, 0.2), distance_range=(8.0, 25.0),
            )
        scene = generate_scene(spec)
        cam = scene.cam
        vid = f"synth-{k:03d}"
        vehicles.append(scene.to_vehicle_record(vid, args.vehicle_class))
        gt_records.append({"id": vid, "pose": scene.gt_pose.to_dict()})
    doc = {"camera": cam.to_dict(), "vehicles": vehicles}
    with open(args.out, "w") as f:
        f.write(cio.canonical_json(doc))
    if args.gt_out:
        cio.save_poses(gt_records, args.gt_out)
    print(f"generated {args.n} scenes -> {args.out}")
    return 0


def cmd_serve(args) -> int:
    import uvicorn

    from .service import create_app

    app = create_app(priors=_load_priors(args.priors))
    uvicorn.run(app, host=args.host, port=args.port, log_level="warning")
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="cuboidfit", description=__doc__)
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("solve", help="estimate cuboids for an annotation document")
    p.add_argument("--annotations", required=True)
    p.add_argument("--out", required=True, help="poses JSON output")
    p.add_argument("--timing", action="store_true",
                   help="record per-vehicle solve_ms (not byte-reproducible)")
    _add_solver_flags(p)
    p.set_defaults(func=cmd_solve)

    p = sub.add_parser("evaluate", help="compare pose files against ground truth")
    p.add_argument("--poses", required=True)
    p.add_argument("--gt", required=True)
    p.add_argument("--csv")
    p.add_argument("--json")
    p.add_argument("--max-occlusion", type=float, default=None,
                   help="skip gt vehicles whose recorded occlusion fraction exceeds this")
    p.set_defaults(func=cmd_evaluate)

    p = sub.add_parser("fit-priors", help="fit robust size priors from a dimensions CSV")
    p.add_argument("--dims", required=True, help="CSV with columns class,d_x,d_y,d_z")
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_fit_priors)

    p = sub.add_parser("synth", help="generate synthetic annotated scenes")
    p.add_argument("--n", type=int, default=10)
    p.add_argument("--seed", type=int, default=int(_env("SEED", 0)))
    p.add_argument("--noise", type=float, default=0.0, help="pixel noise sigma")
    p.add_argument("--recipe", help="comma-separated label list")
    p.add_argument("--rear-view", action="store_true")
    p.add_argument("--vehicle-class", default=None)
    p.add_argument("--out", required=True, help="annotation document (with gt blocks)")
    p.add_argument("--gt-out", help="ground-truth poses JSON")
    p.set_defaults(func=cmd_synth)

    p = sub.add_parser("serve", help="run the solve service")
    p.add_argument("--host", default=_env("HOST", "127.0.0.1"))
    p.add_argument("--port", type=int, default=int(_env("PORT", 8711)))
    p.add_argument("--priors", default=_env("PRIORS"))
    p.set_defaults(func=cmd_serve)

    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    return args.func(args)


if __name__ == "__main__":
    sys.exit(main())
