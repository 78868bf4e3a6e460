"""Normness from pairwise verdicts, worked by hand on five comments.

Run: python demos/walkthrough_winrate.py
"""

from __future__ import annotations

from valuescope.dynamics import ols_fit, paired_ttest
from valuescope.normness import ComparisonGraph, PairwiseLabel, fleiss_kappa, verbosity_scale, win_rate

comments = {
    "c1": "lol ya gonna be fine dude",
    "c2": "yeah that works tbh",
    "c3": "That seems reasonable to me.",
    "c4": "I appreciate the detailed answer, thank you.",
    "c5": "Furthermore, the proposal is indeed consistent with the regulations; kind regards.",
}

# Each tuple is (i, j, beta); beta = 1 says j reads as more formal than i.
verdicts = [
    ("c1", "c2", 1), ("c1", "c3", 1), ("c2", "c3", 1), ("c3", "c4", 1),
    ("c4", "c5", 1), ("c2", "c5", 1), ("c1", "c4", 1), ("c5", "c3", 0),
    ("c4", "c2", 0), ("c3", "c1", 0),
]
graph = ComparisonGraph("formality", frozenset(comments), [PairwiseLabel(i, j, "formality", b) for i, j, b in verdicts])

print("formality win-rates (wins / comparisons):")
for s in sorted(win_rate(graph, min_comparisons=3), key=lambda s: s.value):
    print(f"  {s.comment_id}  {s.value:.3f}  over {s.comparisons} comparisons  {comments[s.comment_id]!r}")

print("\nverbosity needs no judge: every text is compared by length with every other, ties count half")
for s in sorted(verbosity_scale(comments), key=lambda s: s.value):
    print(f"  {s.comment_id}  {s.value:.3f}  ({len(comments[s.comment_id])} chars)")

# Three raters, two categories; rows are items, columns count raters per category.
table = [(2, 1), (1, 2), (3, 0), (0, 3)]
print(f"\nFleiss kappa for {table}: {fleiss_kappa(table):.4f}")

t = paired_ttest([1.0, 2.0, 3.0])
print(f"paired t-test on shifts 1, 2, 3: t = {t.t:.4f}, df = {t.df}, p = {t.p:.4f}")

ni = [0.1, 0.4, -0.2, 0.8, 0.3, -0.5]
cr = [1.0, 2.0, 0.5, 1.5, 3.0, 0.8]
change = [0.3 * a - 0.1 * b for a, b in zip(ni, cr)]
fit = ols_fit([[a, b] for a, b in zip(ni, cr)], change, ["NI", "CR"])
print(f"noiseless regression recovers NI {fit.coef('NI'):+.3f} and CR {fit.coef('CR'):+.3f}")
