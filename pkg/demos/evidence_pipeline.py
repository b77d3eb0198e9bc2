"""Evidence records end to end: validate, calibrate, attach, filter.

Takes a handful of extracted notes/claims, joins model-produced support
probabilities onto them (by id, then by (video_id, text) fallback), and
threshold-filters the result, keeping an audit trail of what dropped.
"""

import json

from fusekit import Prediction, attach, filter_by_threshold, parse_answer_tag, validate
from fusekit.evidence import serialize_calibrated

records = [
    validate(
        {
            "claim_id": "qc-10-storm-000",
            "query_id": "10",
            "video_id": "storm_footage_01",
            "topic": "coastal_storm",
            "claim": "More than 50 people have been rescued.",
            "confidence": 0.95,
            "source": "video_text",
            "timestamp": [0.0, 3.0],
        }
    ),
    validate(
        {
            "note_id": "gn-storm-000",
            "video_id": "storm_footage_01",
            "topic": "coastal_storm",
            "text": "A helicopter hovers above a flooded street.",
            "modality": "visual",
            "timestamp": "10s-15s",
        }
    ),
    validate(
        {
            "claim_id": "qc-10-storm-001",
            "query_id": "10",
            "video_id": "storm_footage_02",
            "topic": "coastal_storm",
            "claim": "The mayor declared a state of emergency.",
            "source": "transcript",
        }
    ),
]
print(f"validated {len(records)} records")

# calibration responses arrive as constrained model text; parse the tags
raw_outputs = {
    "qc-10-storm-000": "<answer>0.95</answer>",
    "gn-storm-000": "<answer>0.88</answer>",
}
predictions = [
    Prediction(prob=parse_answer_tag(raw), artifact_id=aid, raw_output=raw)
    for aid, raw in raw_outputs.items()
]
# one prediction lost its id upstream: it must fall back to (video_id, text)
predictions.append(
    Prediction(
        prob=0.31,
        video_id="storm_footage_02",
        text="The mayor declared a state of emergency.",
    )
)

calibrated, report = attach(records, predictions)
print(f"attached {len(calibrated)}, unmatched {len(report.unmatched_artifacts)}, "
      f"orphans {len(report.orphan_predictions)}")

kept, dropped = filter_by_threshold(calibrated, threshold=0.5)
print(f"threshold 0.5 -> kept {len(kept)}, dropped {len(dropped)}")
for item in dropped:
    body = item.artifact.body_text
    print(f"  dropped (prob {item.prob}): {body!r}")

print("\nfirst kept record on the wire:")
print(json.dumps(json.loads(serialize_calibrated(kept[0])), indent=2))
