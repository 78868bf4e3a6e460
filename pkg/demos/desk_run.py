"""A full offline run over the bundled two-community fixture.

Every stage is invoked through the CLI entry point, exactly as from a shell,
and the demo then walks the run directory it produced.

Run: python demos/desk_run.py [run_dir]
"""

from __future__ import annotations

import csv
import json
import sys
import tempfile
from pathlib import Path

from valuescope.cli import main

ROOT = Path(__file__).resolve().parents[1]
STAGES = ("ingest", "sample", "label", "simulate", "filter", "winrate",
          "score-preference", "rpm", "dynamics", "synthbench", "report")

run_dir = Path(sys.argv[1]) if len(sys.argv) > 1 else Path(tempfile.mkdtemp(prefix="valuescope-")) / "desk"
config = ROOT / "configs" / "desk.yaml"

for stage in STAGES:
    code = main([stage, "--config", str(config), "--run-dir", str(run_dir)])
    print(f"{stage:<17} exit {code}")
    if code:
        sys.exit(code)

stats = json.loads((run_dir / "corpus" / "stats.json").read_text())
print(f"\nrun directory: {run_dir}")
print("corpus stats:", json.dumps(stats, sort_keys=True)[:300])

print("\nreturn-potential summary:")
with open(run_dir / "report" / "rpm_summary.csv", newline="") as fh:
    for row in csv.DictReader(fh):
        print("  " + ", ".join(f"{k}={v}" for k, v in row.items()))

print("\nregression table:")
with open(run_dir / "report" / "table2.csv", newline="") as fh:
    for row in csv.reader(fh):
        print("  " + " | ".join(row))

print("\n" + (run_dir / "synthbench" / "summary.txt").read_text().strip())
