"""A controller session against the five-slot memory bank.

Mimics the rhythm of an iterative evidence-gathering loop: record facts
per video, tag and search, resolve a conflict by removing a stale fact,
select the best facts for writing, and snapshot memory each iteration.
"""

from fusekit import FactEntry, MemoryBank

bank = MemoryBank()

# iteration 1: first video processed, facts recorded
bank.mark_processed("zaFtBz84Kyk", "caption", caption="election night broadcast")
bank.add_fact("zaFtBz84Kyk", FactEntry(
    fact="seat counts shown: party A 120, party B 87",
    source_tool="caption", timestamp="220-230s",
))
bank.add_keyword("zaFtBz84Kyk", "election")
print(bank.memory_summary())
print("---")

# iteration 2: a second source disagrees; keep both, note the conflict
bank.mark_processed("r2P6c5tzvM8", "transcribe")
bank.add_fact("r2P6c5tzvM8", FactEntry(
    fact="transcript: party A holds 152 seats before dissolution",
    source_tool="transcribe", confidence=0.9,
))
bank.set_findings(["CONFLICT: seat counts 120 vs 152 across sources"])
print(bank.memory_summary())
print("---")

# iteration 3: follow-up reveals the 120 figure was a live projection
bank.add_fact("zaFtBz84Kyk", FactEntry(
    fact="banner confirms count updated to 124 after final declaration",
    source_tool="video_qa", timestamp="8-15s", confidence=1.0,
))
bank.set_findings(["resolved: 120 was a live projection; final figure 124"])
bank.remove_fact("zaFtBz84Kyk", 0)  # drop the stale projection

hits = bank.search_by_keyword("election")
print(f"search 'election': videos {list(hits.videos)}")
hits = bank.search_by_keyword("seats")
print(f"search 'seats': {[(v, i) for v, i, _ in hits.facts]} fact hits")

# pick the facts the report will cite, in citation order
bank.select_facts([("zaFtBz84Kyk", 0), ("r2P6c5tzvM8", 0)])
print(f"selected for the report: {bank.selected_facts}")
print("---")
print("flat fact view (video id ascending, then index):")
for position, (vid, idx, entry) in enumerate(bank.flat_facts()):
    print(f"  F#{position} = {vid}:{idx} {entry.fact!r}")
print("---")
print(bank.dump().decode(), end="")
