"""Recovering a planted preference peak.

A synthetic community prefers comments whose formality sits near 0.7. The
demo plants that world, runs the full measurement chain with noisy oracle
backends and checks how much of the truth comes back, then repeats with a
noisier judge.

Run: python demos/planted_world.py [n]
"""

from __future__ import annotations

import sys
import time

from valuescope.rpm import pmr
from valuescope.synthbench import SynthConfig, run_synthbench

n = int(sys.argv[1]) if len(sys.argv) > 1 else 5000

start = time.perf_counter()
report, run = run_synthbench(SynthConfig(n=n))
print(f"n = {n}, {time.perf_counter() - start:.1f}s")
print(report.summary())

print("\nreturn-potential curve (normness change -> mean preference change):")
best = pmr(run.curve)
for b in run.curve.bins:
    bar = "#" * max(0, int(round(20 * b.mean))) if b.reliable else ""
    mark = "  <- max" if b.index == best.index else ""
    flag = "" if b.reliable else "  (too few points)"
    print(f"  [{b.lo:+.1f}, {b.hi:+.1f})  {b.mean:+.3f}  n={b.count:<5d}{bar}{mark}{flag}")

print("\njudge error sweep:")
for error in (0.0, 0.1, 0.2, 0.3):
    r, _ = run_synthbench(SynthConfig(n=min(n, 2000), error=error))
    print(f"  error {error:.1f}: spearman {r.spearman:.3f}, PMR bin error {r.pmr_bin_error}, PRD sign match {r.prd_sign_match}")
