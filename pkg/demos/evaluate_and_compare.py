"""Evaluate two runs against graded judgments and print the delta table.

A weak baseline run and a stronger candidate run are scored with nDCG@k
and Recall@k, then compared; unchanged metrics render as N/A in the delta
column, matching the reporting convention of the comparison tables.
"""

from fusekit import Cutoffs, Qrels, RunSet, ScoredList, delta_report, evaluate
from fusekit.metrics import render_delta, render_report

qrels = Qrels(
    {
        ("q1", "v01"): 3, ("q1", "v02"): 1, ("q1", "v07"): 2,
        ("q2", "v03"): 2, ("q2", "v04"): 0, ("q2", "v05"): 1,
    }
)

weak = RunSet(
    lists={
        "q1": ScoredList((("v09", 0.9), ("v02", 0.8), ("v01", 0.7), ("v07", 0.6))),
        "q2": ScoredList((("v04", 0.9), ("v05", 0.8), ("v03", 0.7))),
    },
    tag="baseline",
)
strong = RunSet(
    lists={
        "q1": ScoredList((("v01", 0.9), ("v07", 0.8), ("v02", 0.7), ("v09", 0.6))),
        "q2": ScoredList((("v03", 0.9), ("v05", 0.8), ("v04", 0.7))),
    },
    tag="improved",
)

cutoffs = Cutoffs((3, 10))
base_report = evaluate(weak, qrels, cutoffs)
cand_report = evaluate(strong, qrels, cutoffs)

print(render_report(base_report))
print()
print(render_report(cand_report))
print()
print(render_delta(delta_report(base_report, cand_report)))
print()
print("R@10 is already 1.0 in both runs, so its delta renders as N/A.")
