"""Walk through the five rank-fusion strategies on a toy example.

Three sub-queries of one information need each return a short ranked list
over the same tiny corpus. We fuse them five ways and look at how the
strategies disagree about the winner.
"""

from fusekit import FusionInput, FusionStrategy, ScoredList, fuse

# Three sub-query result lists. "v_broad" shows up everywhere with decent
# scores; "v_spike" is a spectacular match for exactly one sub-query.
sub_lists = (
    ScoredList((("v_spike", 0.97), ("v_broad", 0.62), ("v_noise1", 0.40))),
    ScoredList((("v_broad", 0.71), ("v_noise2", 0.33))),
    ScoredList((("v_broad", 0.58), ("v_noise1", 0.44), ("v_noise3", 0.21))),
)
inp = FusionInput("demo-query", sub_lists)

strategies = [
    FusionStrategy("rrf", 10),
    FusionStrategy("rrf", 60),
    FusionStrategy("rrf", 100),
    FusionStrategy("weighted_rrf", 10),
    FusionStrategy("sum_sim"),
    FusionStrategy("max_sim"),
    FusionStrategy("mean_sim"),
]

print("input lists:")
for i, sub in enumerate(sub_lists):
    print(f"  sub-query {i}: " + ", ".join(f"{d}={s:.2f}" for d, s in sub))
print()

for strategy in strategies:
    fused = fuse(inp, strategy)
    cells = ", ".join(f"{doc}={score:.4f}" for doc, score in fused.entries[:4])
    print(f"{strategy.label():<16} {cells}")

print()
print("Things to notice:")
print(" - max_sim puts v_spike first: one excellent sub-query match is enough.")
print(" - rrf and sum_sim prefer v_broad: consistent presence across lists wins.")
print(" - mean_sim divides by ALL three lists, so sparse appearances are diluted.")
print(" - growing K flattens rank differences; compare rrf-k10 with rrf-k100.")
