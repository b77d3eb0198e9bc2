from __future__ import annotations

import json
import random

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from fusekit import (
    AnswerTagError,
    CalibratedArtifact,
    CalibrationPayload,
    ClaimRecord,
    NoteRecord,
    Prediction,
    ValidationError,
    attach,
    filter_by_threshold,
    parse_answer_tag,
    validate,
)
from fusekit.evidence import (
    calibrated_to_dict,
    load_calibrated,
    load_evidence,
    load_predictions,
    parse_calibrated,
    serialize,
    serialize_calibrated,
)

# The documented example records, field for field.
CLAIM_FIXTURE = {
    "claim_id": "qc-10-1978302738418032640-000",
    "query_id": "10",
    "video_id": "1978302738418032640",
    "topic": "2025_Alaska_Typhoon",
    "claim": "More than 50 people have been rescued in Western Alaska.",
    "confidence": 0.95,
    "evidence": "Text overlay in the video states 'More than 50 people have been rescued in Western Alaska.'",
    "source": "video_text",
    "timestamp": [0.0, 3.0],
}

NOTE_FIXTURE = {
    "note_id": "gn1a-hol6y3QwX2Y-000",
    "video_id": "hol6y3QwX2Y",
    "topic": "2025_Canadian_Federal_Election",
    "text": "A woman with short blonde hair and a beige jacket is speaking.",
    "modality": "visual",
    "timestamp": [0.0, 6.0],
}


# ---------------------------------------------------------------------------
# validate
# ---------------------------------------------------------------------------


def test_validate_claim_fixture():
    record = validate(json.dumps(CLAIM_FIXTURE))
    assert isinstance(record, ClaimRecord)
    assert record.confidence == 0.95
    assert record.source == "video_text"
    assert record.timestamp == (0.0, 3.0)
    assert record.query_id == "10"


def test_validate_note_fixture():
    record = validate(json.dumps(NOTE_FIXTURE))
    assert isinstance(record, NoteRecord)
    assert record.modality == "visual"
    assert record.timestamp == (0.0, 6.0)


def test_note_without_timestamp_is_valid():
    data = {k: v for k, v in NOTE_FIXTURE.items() if k != "timestamp"}
    assert validate(data).timestamp is None


def test_confidence_out_of_range_rejected():
    with pytest.raises(ValidationError) as excinfo:
        validate({**CLAIM_FIXTURE, "confidence": 1.2})
    assert "confidence" in str(excinfo.value)


def test_unknown_modality_rejected():
    with pytest.raises(ValidationError) as excinfo:
        validate({**NOTE_FIXTURE, "modality": "smell"})
    assert "modality" in str(excinfo.value)


def test_unknown_source_rejected():
    with pytest.raises(ValidationError) as excinfo:
        validate({**CLAIM_FIXTURE, "source": "wikipedia"})
    assert "source" in str(excinfo.value)


def test_inverted_timestamp_rejected():
    with pytest.raises(ValidationError) as excinfo:
        validate({**NOTE_FIXTURE, "timestamp": [6.0, 2.0]})
    assert "timestamp" in str(excinfo.value)


def test_negative_timestamp_rejected():
    with pytest.raises(ValidationError):
        validate({**NOTE_FIXTURE, "timestamp": [-1.0, 2.0]})


def test_missing_required_field_rejected():
    data = {k: v for k, v in CLAIM_FIXTURE.items() if k != "query_id"}
    with pytest.raises(ValidationError) as excinfo:
        validate(data)
    assert "query_id" in str(excinfo.value)


def test_record_without_any_id_rejected():
    with pytest.raises(ValidationError):
        validate({"video_id": "v1", "text": "x"})


def test_empty_text_rejected():
    with pytest.raises(ValidationError):
        validate({**NOTE_FIXTURE, "text": ""})


@pytest.mark.parametrize(
    "span,expected",
    [("10s-15s", (10.0, 15.0)), ("8-15s", (8.0, 15.0)), ("0.5s-2.25s", (0.5, 2.25))],
)
def test_span_string_timestamps(span, expected):
    record = validate({**NOTE_FIXTURE, "timestamp": span})
    assert record.timestamp == expected


def test_unparseable_span_rejected():
    with pytest.raises(ValidationError):
        validate({**NOTE_FIXTURE, "timestamp": "around the middle"})


def test_load_evidence_reports_line_numbers():
    lines = json.dumps(NOTE_FIXTURE) + "\n" + json.dumps({**NOTE_FIXTURE, "modality": "x"}) + "\n"
    from fusekit import ParseError

    with pytest.raises(ParseError) as excinfo:
        load_evidence(lines)
    assert excinfo.value.line == 2


# ---------------------------------------------------------------------------
# serialize round-trip
# ---------------------------------------------------------------------------


def test_validate_serialize_identity_on_fixtures():
    for fixture in (CLAIM_FIXTURE, NOTE_FIXTURE):
        record = validate(dict(fixture))
        assert validate(serialize(record)) == record


token = st.from_regex(r"[A-Za-z0-9_\-]{1,12}", fullmatch=True)
free_text = st.text(min_size=1, max_size=40).filter(lambda s: s.strip())
maybe_ts = st.one_of(
    st.none(),
    st.tuples(st.floats(0, 100, allow_nan=False), st.floats(0, 100, allow_nan=False)).map(
        lambda t: (min(t), max(t))
    ),
)


@settings(max_examples=120)
@given(
    kind=st.sampled_from(["note", "claim"]),
    ident=token,
    vid=token,
    topic=free_text,
    body=free_text,
    modality=st.sampled_from(["visual", "ocr", "audio"]),
    source=st.one_of(st.none(), st.sampled_from(["video_visual", "video_text", "transcript"])),
    confidence=st.one_of(st.none(), st.floats(0, 1, allow_nan=False)),
    ts=maybe_ts,
)
def test_validate_serialize_identity_random(kind, ident, vid, topic, body, modality, source, confidence, ts):
    if kind == "note":
        record = NoteRecord(
            note_id=ident, video_id=vid, topic=topic, text=body, modality=modality, timestamp=ts
        )
    else:
        record = ClaimRecord(
            claim_id=ident,
            query_id="q1",
            video_id=vid,
            topic=topic,
            claim=body,
            confidence=confidence,
            source=source,
            timestamp=ts,
        )
    assert validate(serialize(record)) == record


# ---------------------------------------------------------------------------
# answer tags
# ---------------------------------------------------------------------------


def test_answer_tag_documented_value():
    assert parse_answer_tag("<answer>0.95</answer>") == 0.95


def test_answer_tag_boundary_zero():
    assert parse_answer_tag("<answer>0</answer>") == 0.0


def test_answer_tag_with_padding_and_prose():
    assert parse_answer_tag("thinking... <answer> 0.73 </answer> done") == 0.73


def test_answer_tag_takes_first_tag():
    assert parse_answer_tag("<answer>0.2</answer><answer>0.9</answer>") == 0.2


def test_answer_tag_missing():
    with pytest.raises(AnswerTagError) as excinfo:
        parse_answer_tag("score: 0.7")
    assert excinfo.value.reason == "missing"


def test_answer_tag_non_numeric():
    with pytest.raises(AnswerTagError) as excinfo:
        parse_answer_tag("<answer>high</answer>")
    assert excinfo.value.reason == "non_numeric"


def test_answer_tag_out_of_range_is_error_not_clamp():
    with pytest.raises(AnswerTagError) as excinfo:
        parse_answer_tag("<answer>1.7</answer>")
    assert excinfo.value.reason == "out_of_range"


# ---------------------------------------------------------------------------
# attach
# ---------------------------------------------------------------------------


def _claim(cid: str, vid: str = "v1", text: str = "water is rising") -> ClaimRecord:
    return ClaimRecord(claim_id=cid, query_id="q1", video_id=vid, topic="t", claim=text)


def test_attach_by_id():
    artifact = _claim("c1")
    calibrated, report = attach([artifact], [Prediction(prob=0.8, artifact_id="c1")])
    assert len(calibrated) == 1
    assert calibrated[0].prob == 0.8
    assert calibrated[0].artifact == artifact
    assert not report.unmatched_artifacts
    assert not report.orphan_predictions


def test_attach_fallback_on_video_and_text():
    artifact = _claim("c1", vid="v9", text="bridge closed")
    pred = Prediction(prob=0.6, artifact_id="stale-id", video_id="v9", text="  bridge closed  ")
    calibrated, report = attach([artifact], [pred])
    assert len(calibrated) == 1
    assert calibrated[0].prob == 0.6
    assert not report.orphan_predictions


def test_attach_orphan_prediction_is_not_an_error():
    calibrated, report = attach([_claim("c1")], [Prediction(prob=0.5, artifact_id="nope")])
    assert calibrated == []
    assert len(report.orphan_predictions) == 1
    assert len(report.unmatched_artifacts) == 1


def test_attach_conflicting_predictions_error():
    preds = [Prediction(prob=0.5, artifact_id="c1"), Prediction(prob=0.6, artifact_id="c1")]
    with pytest.raises(ValidationError) as excinfo:
        attach([_claim("c1")], preds)
    assert "c1" in str(excinfo.value)


def test_attach_conflict_via_fallback_also_detected():
    artifact = _claim("c1", vid="v1", text="road flooded")
    preds = [
        Prediction(prob=0.5, artifact_id="c1"),
        Prediction(prob=0.6, video_id="v1", text="road flooded"),
    ]
    with pytest.raises(ValidationError):
        attach([artifact], preds)


def test_attach_id_wins_over_fallback():
    # the prediction's id resolves, so its (video_id, text) pointing at a
    # different artifact must be ignored
    a = _claim("c1", vid="v1", text="alpha")
    b = _claim("c2", vid="v2", text="beta")
    pred = Prediction(prob=0.9, artifact_id="c1", video_id="v2", text="beta")
    calibrated, _ = attach([a, b], [pred])
    assert [c.artifact.claim_id for c in calibrated] == ["c1"]


def test_attach_ambiguous_fallback_is_orphan():
    a = _claim("c1", vid="v1", text="same words")
    b = _claim("c2", vid="v1", text="same words")
    calibrated, report = attach([a, b], [Prediction(prob=0.7, video_id="v1", text="same words")])
    assert calibrated == []
    assert len(report.orphan_predictions) == 1


def test_attach_never_mutates_artifacts():
    artifact = _claim("c1")
    before = serialize(artifact)
    calibrated, _ = attach([artifact], [Prediction(prob=0.8, artifact_id="c1")])
    assert serialize(calibrated[0].artifact) == before


def test_attach_duplicate_artifact_ids_rejected():
    with pytest.raises(ValidationError):
        attach([_claim("c1"), _claim("c1")], [])


def test_load_predictions_requires_key():
    with pytest.raises(Exception):
        load_predictions(json.dumps({"prob": 0.5}))
    preds = load_predictions(json.dumps({"prob": 0.5, "artifact_id": "a"}))
    assert preds[0].backend == "unli"


# ---------------------------------------------------------------------------
# filter
# ---------------------------------------------------------------------------


def _calibrated(prob: float, cid: str = "c1") -> CalibratedArtifact:
    return CalibratedArtifact(artifact=_claim(cid), calibration=CalibrationPayload(prob=prob))


def test_filter_documented_threshold_keeps_example():
    kept, dropped = filter_by_threshold([_calibrated(0.95)], 0.5)
    assert len(kept) == 1 and not dropped


def test_filter_boundary_is_inclusive():
    kept, dropped = filter_by_threshold([_calibrated(0.5)], 0.5)
    assert len(kept) == 1 and not dropped


def test_filter_threshold_zero_keeps_everything():
    items = [_calibrated(p, cid=f"c{i}") for i, p in enumerate([0.0, 0.3, 1.0])]
    kept, dropped = filter_by_threshold(items, 0.0)
    assert len(kept) == 3 and not dropped


def test_filter_partitions_input():
    rng = random.Random(3)
    items = [_calibrated(rng.random(), cid=f"c{i}") for i in range(50)]
    kept, dropped = filter_by_threshold(items, 0.4)
    assert len(kept) + len(dropped) == 50
    assert all(c.prob >= 0.4 for c in kept)
    assert all(c.prob < 0.4 for c in dropped)


def test_filter_monotone_in_threshold():
    rng = random.Random(4)
    items = [_calibrated(rng.random(), cid=f"c{i}") for i in range(80)]
    t1, t2 = sorted((rng.random(), rng.random()))
    kept1, _ = filter_by_threshold(items, t1)
    kept2, _ = filter_by_threshold(items, t2)
    ids1 = {c.artifact.claim_id for c in kept1}
    ids2 = {c.artifact.claim_id for c in kept2}
    assert ids2 <= ids1


def test_filter_rejects_bad_threshold():
    with pytest.raises(ValueError):
        filter_by_threshold([], 1.5)


# ---------------------------------------------------------------------------
# calibrated serialization (backend nesting)
# ---------------------------------------------------------------------------


def test_calibrated_serialization_nests_backend():
    artifact = validate(dict(CLAIM_FIXTURE))
    item = CalibratedArtifact(
        artifact=artifact,
        calibration=CalibrationPayload(prob=0.95, backend="unli", raw_output="<answer>0.95</answer>"),
    )
    data = calibrated_to_dict(item)
    assert data["calibration"] == {
        "unli": {"prob": 0.95, "raw": {"raw_output": "<answer>0.95</answer>"}}
    }
    assert data["claim_id"] == CLAIM_FIXTURE["claim_id"]
    assert parse_calibrated(serialize_calibrated(item)) == item


def test_parse_calibrated_unknown_backend_errors():
    artifact = validate(dict(CLAIM_FIXTURE))
    item = CalibratedArtifact(artifact=artifact, calibration=CalibrationPayload(prob=0.4))
    with pytest.raises(ValidationError):
        parse_calibrated(serialize_calibrated(item), backend="other")


def test_load_calibrated_round_trip():
    items = [
        CalibratedArtifact(
            artifact=_claim(f"c{i}"), calibration=CalibrationPayload(prob=i / 10)
        )
        for i in range(5)
    ]
    data = "".join(serialize_calibrated(c).decode() + "\n" for c in items)
    assert load_calibrated(data) == items
