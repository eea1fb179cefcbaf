"""Why direction arrows matter: near-rear views with weak yaw evidence.

Features on the back face alone barely constrain the yaw (and never the
length).  A single forward arrow drawn on the ground contributes an image
line whose vehicle-frame direction is known, which pins the yaw; the
length still comes from the class prior.
"""

import numpy as np

from cuboidfit import SizePrior, SolverConfig, iou3d, rotation_error_deg, solve
from cuboidfit.synth import (
    REAR_STUDY_MU,
    REAR_STUDY_SIGMA,
    generate_rear_study_scene,
)

prior = SizePrior("rear-demo", mu=REAR_STUDY_MU, sigma=REAR_STUDY_SIGMA, n_samples=1)
cfg = SolverConfig(gauge="prior")

rows = []
for seed in range(12):
    sc_no = generate_rear_study_scene(seed, with_direction=False)
    sc_dir = generate_rear_study_scene(seed, with_direction=True)
    r_no = solve(sc_no.annotations, sc_no.cam, config=cfg, prior=prior)
    r_dir = solve(sc_dir.annotations, sc_dir.cam, config=cfg, prior=prior)
    rows.append(
        (
            iou3d(r_no.pose, sc_no.gt_pose),
            iou3d(r_dir.pose, sc_dir.gt_pose),
            rotation_error_deg(r_no.pose.rotation, sc_no.gt_pose.rotation),
            rotation_error_deg(r_dir.pose.rotation, sc_dir.gt_pose.rotation),
        )
    )

print("seed | IoU w/o arrow | IoU with | yaw err w/o | with")
for i, (i_no, i_dir, e_no, e_dir) in enumerate(rows):
    print(f"{i:4d} | {i_no:13.3f} | {i_dir:8.3f} | {e_no:10.1f}d | {e_dir:5.1f}d")

arr = np.asarray(rows)
print("\nmedian IoU without arrow:", round(float(np.median(arr[:, 0])), 3))
print("median IoU with arrow:   ", round(float(np.median(arr[:, 1])), 3))
print("median improvement:      ", round(float(np.median(arr[:, 1] - arr[:, 0])), 3))
print("\n(The arrow feeds the initializer a line with known vehicle-frame")
print(" direction; without it the orientation rests on a noise-dominated")
print(" symmetry pair and the box often locks in rotated.)")
