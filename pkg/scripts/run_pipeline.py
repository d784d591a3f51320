#!/usr/bin/env python3
"""End-to-end pipeline run: generate demos, segment, learn, evaluate.

Writes all artifacts under ./artifacts (override with --root) and prints the
replay metrics of the first demonstration through the live engine.
"""

import argparse
import json
import sys
from pathlib import Path

from opguide.cli import main as opguide


def run(root: Path, seed: int, noise: float) -> int:
    demos = root / "demos"
    segments = root / "segments"
    model = root / "model"
    steps = [
        ["gen-demo", "--out", str(demos), "--demos", "6", "--cycles", "5",
         "--noise", str(noise), "--seed", str(seed)],
        ["segment", "--demos", str(demos), "--out", str(segments),
         "--seed", str(seed)],
        ["learn", "--segments", str(segments),
         "--task", str(demos / "task.json"), "--out", str(model)],
        ["eval", "--replay", str(demos / "demo_0.jsonl"),
         "--model", str(model / "policy.json"),
         "--task", str(demos / "task.json"),
         "--out", str(root / "metrics.json")],
        ["bench", "--sizes", "10000,20000,40000",
         "--out", str(root / "bench.csv"), "--seed", str(seed)],
        ["bench", "bnirl", "--out", str(root / "bnirl_report.json"),
         "--seed", str(seed)],
    ]
    for argv in steps:
        rc = opguide(argv)
        if rc != 0:
            return rc
    metrics = json.loads((root / "metrics.json").read_text())
    print("\nreplay metrics:")
    for key, values in metrics.items():
        print(f"  {key}: {values}")
    return 0


if __name__ == "__main__":
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--root", default="artifacts")
    ap.add_argument("--seed", type=int, default=0)
    ap.add_argument("--noise", type=float, default=0.02)
    args = ap.parse_args()
    sys.exit(run(Path(args.root), args.seed, args.noise))
