"""Run the whole pipeline on the bundled planted-capacity mock roster.

Eight perfect trackers with capacities 2..9 plus two pathological mocks go
through probe generation, trials under three wrappers, the agent battery,
scoring and the analysis register. A second call finds every stage up to
date and makes no endpoint calls.

Run: python3 demos/02_planted_pipeline.py [run root]
"""
import os
import sys
import tempfile

from wmfam.pipeline import bundled_path, pipeline

root = sys.argv[1] if len(sys.argv) > 1 else tempfile.mkdtemp(prefix="wmfam-demo-")
os.environ["RUN_DIR"] = root

first = pipeline(bundled_path("mock_pipeline.json"))
print(f"run directory {first.run_dir}  ({first.calls} endpoint calls)\n")
print(first.artifact("report.txt").read_text())

again = pipeline(bundled_path("mock_pipeline.json"))
print("second run:", ", ".join(f"{s.stage}={'skipped' if s.skipped else 'ran'}" for s in again.stages),
      f"({again.calls} calls)")
