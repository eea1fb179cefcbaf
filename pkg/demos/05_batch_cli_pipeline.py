"""The batch surface: synth -> solve -> evaluate, exactly as the CLI runs it.

Outputs are canonical JSON (sorted keys, 9 significant digits), so
re-running a command byte-reproduces its files.
"""

import json
import pathlib
import tempfile

from cuboidfit.cli import main

workdir = pathlib.Path(tempfile.mkdtemp(prefix="cuboidfit-demo-"))
scenes = workdir / "scenes.json"
gt = workdir / "gt.json"
poses = workdir / "poses.json"
report_csv = workdir / "report.csv"
report_json = workdir / "report.json"

print("workdir:", workdir)

rc = main(["synth", "--n", "8", "--seed", "1", "--noise", "0.75",
           "--vehicle-class", "sedan", "--out", str(scenes), "--gt-out", str(gt)])
assert rc == 0

rc = main(["solve", "--annotations", str(scenes), "--out", str(poses), "--gauge", "prior"])
assert rc == 0

rc = main(["evaluate", "--poses", str(poses), "--gt", str(gt),
           "--csv", str(report_csv), "--json", str(report_json)])
assert rc == 0

print("\nreport.csv:")
print(report_csv.read_text())

agg = json.loads(report_json.read_text())["aggregate"]
print("aggregate:", json.dumps(agg, indent=2, sort_keys=True))

print("Determinism check: re-running solve writes identical bytes...")
poses2 = workdir / "poses2.json"
main(["solve", "--annotations", str(scenes), "--out", str(poses2), "--gauge", "prior"])
print("byte-identical:", poses.read_bytes() == poses2.read_bytes())
