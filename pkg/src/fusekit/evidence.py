"""Extracted-evidence records: schemas, calibration attachment, filtering.

Two record shapes exist. A note is query-agnostic:

  {"note_id", "video_id", "topic", "text", "modality", "timestamp"?}

and a claim is query-conditioned:

  {"claim_id", "query_id", "video_id", "topic", "claim",
   "confidence"?, "evidence"?, "source"?, "timestamp"?}

Timestamps may arrive as a two-element [start, end] array of seconds or
as a span string like "10s-15s"; both normalize to (start, end) floats.

Calibration predictions attach to records by artifact id first, falling
back to exact (video_id, text) match; the original record is never
altered. The calibrated serialization nests the payload under its backend
label so several backends can coexist:

  {... record fields ..., "calibration": {"<backend>": {"prob": p,
      "raw": {"raw_output": "..."}}}}
"""

from __future__ import annotations

import json
import re
from dataclasses import dataclass
from typing import Iterable, Union

from .core import DocId, QueryId, _check_token
from .errors import AnswerTagError, ParseError, ValidationError

MODALITIES = ("visual", "ocr", "audio")
CLAIM_SOURCES = ("video_visual", "video_text", "transcript")
DEFAULT_BACKEND = "unli"

_SPAN_RE = re.compile(r"^\s*(\d+(?:\.\d+)?)\s*s?\s*-\s*(\d+(?:\.\d+)?)\s*s?\s*$")
_ANSWER_RE = re.compile(r"<answer>(.*?)</answer>", re.DOTALL)


def _normalize_timestamp(value, what: str) -> tuple[float, float]:
    if isinstance(value, str):
        match = _SPAN_RE.match(value)
        if not match:
            raise ValidationError(f"{what}: unparseable timestamp span {value!r}")
        start, end = float(match.group(1)), float(match.group(2))
    elif isinstance(value, (list, tuple)) and len(value) == 2:
        try:
            start, end = float(value[0]), float(value[1])
        except (TypeError, ValueError):
            raise ValidationError(f"{what}: timestamp entries must be numbers: {value!r}") from None
    else:
        raise ValidationError(f"{what}: timestamp must be [start, end] or a span string, got {value!r}")
    if start < 0 or start > end:
        raise ValidationError(f"{what}: timestamp must satisfy 0 <= start <= end, got ({start}, {end})")
    return (start, end)


def _check_confidence(value, what: str) -> float:
    try:
        conf = float(value)
    except (TypeError, ValueError):
        raise ValidationError(f"{what}: confidence must be a number, got {value!r}") from None
    if not 0.0 <= conf <= 1.0:
        raise ValidationError(f"{what}: confidence {conf} outside [0, 1]")
    return conf


@dataclass(frozen=True)
class NoteRecord:
    note_id: str
    video_id: DocId
    topic: str
    text: str
    modality: str
    timestamp: tuple[float, float] | None = None

    def __post_init__(self):
        if not self.note_id:
            raise ValidationError("note_id must be non-empty")
        _check_token(self.video_id, "video_id")
        if not isinstance(self.text, str) or not self.text:
            raise ValidationError(f"note {self.note_id}: text must be non-empty")
        if self.modality not in MODALITIES:
            raise ValidationError(
                f"note {self.note_id}: unknown modality {self.modality!r}; expected one of {MODALITIES}"
            )
        if self.timestamp is not None:
            object.__setattr__(
                self, "timestamp", _normalize_timestamp(self.timestamp, f"note {self.note_id}")
            )

    @property
    def artifact_id(self) -> str:
        return self.note_id

    @property
    def body_text(self) -> str:
        return self.text


@dataclass(frozen=True)
class ClaimRecord:
    claim_id: str
    query_id: QueryId
    video_id: DocId
    topic: str
    claim: str
    confidence: float | None = None
    evidence: str | None = None
    source: str | None = None
    timestamp: tuple[float, float] | None = None

    def __post_init__(self):
        if not self.claim_id:
            raise ValidationError("claim_id must be non-empty")
        _check_token(self.query_id, "query_id")
        _check_token(self.video_id, "video_id")
        if not isinstance(self.claim, str) or not self.claim:
            raise ValidationError(f"claim {self.claim_id}: claim text must be non-empty")
        if self.confidence is not None:
            object.__setattr__(
                self, "confidence", _check_confidence(self.confidence, f"claim {self.claim_id}")
            )
        if self.source is not None and self.source not in CLAIM_SOURCES:
            raise ValidationError(
                f"claim {self.claim_id}: unknown source {self.source!r}; expected one of {CLAIM_SOURCES}"
            )
        if self.timestamp is not None:
            object.__setattr__(
                self, "timestamp", _normalize_timestamp(self.timestamp, f"claim {self.claim_id}")
            )

    @property
    def artifact_id(self) -> str:
        return self.claim_id

    @property
    def body_text(self) -> str:
        return self.claim


EvidenceRecord = Union[NoteRecord, ClaimRecord]

_NOTE_REQUIRED = ("note_id", "video_id", "topic", "text", "modality")
_CLAIM_REQUIRED = ("claim_id", "query_id", "video_id", "topic", "claim")


def validate(record: bytes | str | dict) -> EvidenceRecord:
    """Type and check one evidence record; accepts JSON bytes/text or a dict."""
    if isinstance(record, (bytes, str)):
        if isinstance(record, bytes):
            record = record.decode("utf-8")
        try:
            record = json.loads(record)
        except json.JSONDecodeError as e:
            raise ParseError(f"invalid JSON: {e.msg}") from None
    if not isinstance(record, dict):
        raise ValidationError(f"evidence record must be a JSON object, got {type(record).__name__}")
    if "note_id" in record:
        required = _NOTE_REQUIRED
    elif "claim_id" in record:
        required = _CLAIM_REQUIRED
    else:
        raise ValidationError("record has neither 'note_id' nor 'claim_id'")
    missing = [name for name in required if name not in record]
    if missing:
        raise ValidationError(f"record is missing required fields: {', '.join(missing)}")
    if required is _NOTE_REQUIRED:
        return NoteRecord(
            note_id=record["note_id"],
            video_id=record["video_id"],
            topic=record["topic"],
            text=record["text"],
            modality=record["modality"],
            timestamp=record.get("timestamp"),
        )
    return ClaimRecord(
        claim_id=record["claim_id"],
        query_id=record["query_id"],
        video_id=record["video_id"],
        topic=record["topic"],
        claim=record["claim"],
        confidence=record.get("confidence"),
        evidence=record.get("evidence"),
        source=record.get("source"),
        timestamp=record.get("timestamp"),
    )


def record_to_dict(record: EvidenceRecord) -> dict:
    if isinstance(record, NoteRecord):
        out = {
            "note_id": record.note_id,
            "video_id": record.video_id,
            "topic": record.topic,
            "text": record.text,
            "modality": record.modality,
        }
    else:
        out = {
            "claim_id": record.claim_id,
            "query_id": record.query_id,
            "video_id": record.video_id,
            "topic": record.topic,
            "claim": record.claim,
        }
        if record.confidence is not None:
            out["confidence"] = record.confidence
        if record.evidence is not None:
            out["evidence"] = record.evidence
        if record.source is not None:
            out["source"] = record.source
    if record.timestamp is not None:
        out["timestamp"] = list(record.timestamp)
    return out


def serialize(record: EvidenceRecord) -> bytes:
    return json.dumps(record_to_dict(record), ensure_ascii=False).encode("utf-8")


def load_evidence(data: bytes | str) -> list[EvidenceRecord]:
    """Parse a JSON-lines evidence file."""
    if isinstance(data, bytes):
        data = data.decode("utf-8")
    records = []
    for line_no, raw in enumerate(data.splitlines(), start=1):
        line = raw.strip()
        if not line:
            continue
        try:
            records.append(validate(line))
        except (ParseError, ValidationError) as e:
            raise ParseError(str(e), line=line_no) from None
    return records


def parse_answer_tag(text: str) -> float:
    """Extract the probability from the first ``<answer>...</answer>`` tag.

    Raises AnswerTagError with reason "missing", "non_numeric" or
    "out_of_range" so callers can choose the matching retry prompt.
    """
    match = _ANSWER_RE.search(text)
    if match is None:
        raise AnswerTagError("no <answer>...</answer> tag found", reason="missing")
    content = match.group(1).strip()
    try:
        value = float(content)
    except ValueError:
        raise AnswerTagError(
            f"answer tag content {content!r} is not a number", reason="non_numeric"
        ) from None
    if not 0.0 <= value <= 1.0:
        raise AnswerTagError(f"answer value {value} outside [0, 1]", reason="out_of_range")
    return value


@dataclass(frozen=True)
class CalibrationPayload:
    prob: float
    backend: str = DEFAULT_BACKEND
    raw_output: str | None = None

    def __post_init__(self):
        object.__setattr__(self, "prob", _check_confidence(self.prob, "calibration"))
        if not self.backend:
            raise ValidationError("calibration backend label must be non-empty")


@dataclass(frozen=True)
class CalibratedArtifact:
    """An evidence record plus its support probability; the record is untouched."""

    artifact: EvidenceRecord
    calibration: CalibrationPayload

    @property
    def prob(self) -> float:
        return self.calibration.prob


@dataclass(frozen=True)
class Prediction:
    """One calibration output to be joined onto an artifact.

    Keyed by ``artifact_id`` when present, else by (video_id, text).
    """

    prob: float
    backend: str = DEFAULT_BACKEND
    artifact_id: str | None = None
    video_id: str | None = None
    text: str | None = None
    raw_output: str | None = None

    def __post_init__(self):
        object.__setattr__(self, "prob", _check_confidence(self.prob, "prediction"))
        if self.artifact_id is None and (self.video_id is None or self.text is None):
            raise ValidationError(
                "prediction needs an artifact_id or both video_id and text"
            )


def load_predictions(data: bytes | str) -> list[Prediction]:
    """Parse a JSON-lines prediction file (fields prob, backend, artifact_id, video_id, text, raw_output)."""
    if isinstance(data, bytes):
        data = data.decode("utf-8")
    predictions = []
    for line_no, raw in enumerate(data.splitlines(), start=1):
        line = raw.strip()
        if not line:
            continue
        try:
            record = json.loads(line)
        except json.JSONDecodeError as e:
            raise ParseError(f"invalid JSON: {e.msg}", line=line_no) from None
        if not isinstance(record, dict) or "prob" not in record:
            raise ParseError("prediction must be an object with a 'prob' field", line=line_no)
        try:
            predictions.append(
                Prediction(
                    prob=record["prob"],
                    backend=record.get("backend", DEFAULT_BACKEND),
                    artifact_id=record.get("artifact_id"),
                    video_id=record.get("video_id"),
                    text=record.get("text"),
                    raw_output=record.get("raw_output"),
                )
            )
        except ValidationError as e:
            raise ParseError(str(e), line=line_no) from None
    return predictions


@dataclass(frozen=True)
class AttachReport:
    """Artifacts left without a prediction, and predictions matching nothing."""

    unmatched_artifacts: tuple[EvidenceRecord, ...] = ()
    orphan_predictions: tuple[Prediction, ...] = ()


def attach(
    artifacts: Iterable[EvidenceRecord],
    predictions: Iterable[Prediction],
) -> tuple[list[CalibratedArtifact], AttachReport]:
    """Join predictions onto artifacts.

    Primary join by artifact id; when that fails the prediction falls back
    to an exact (video_id, whitespace-trimmed text) match, provided it is
    unambiguous. Two predictions resolving to one artifact is an error;
    predictions matching nothing are reported as orphans.
    """
    artifacts = list(artifacts)
    by_id: dict[str, EvidenceRecord] = {}
    by_key: dict[tuple[str, str], list[EvidenceRecord]] = {}
    for artifact in artifacts:
        if artifact.artifact_id in by_id:
            raise ValidationError(f"duplicate artifact id {artifact.artifact_id!r}")
        by_id[artifact.artifact_id] = artifact
        by_key.setdefault((artifact.video_id, artifact.body_text.strip()), []).append(artifact)

    assigned: dict[str, Prediction] = {}
    orphans: list[Prediction] = []
    for pred in predictions:
        target = None
        if pred.artifact_id is not None:
            target = by_id.get(pred.artifact_id)
        if target is None and pred.video_id is not None and pred.text is not None:
            candidates = by_key.get((pred.video_id, pred.text.strip()), [])
            if len(candidates) == 1:
                target = candidates[0]
        if target is None:
            orphans.append(pred)
            continue
        if target.artifact_id in assigned:
            raise ValidationError(
                f"two predictions claim artifact {target.artifact_id!r}"
            )
        assigned[target.artifact_id] = pred

    calibrated = []
    unmatched = []
    for artifact in artifacts:
        pred = assigned.get(artifact.artifact_id)
        if pred is None:
            unmatched.append(artifact)
            continue
        payload = CalibrationPayload(
            prob=pred.prob, backend=pred.backend, raw_output=pred.raw_output
        )
        calibrated.append(CalibratedArtifact(artifact=artifact, calibration=payload))
    return calibrated, AttachReport(
        unmatched_artifacts=tuple(unmatched), orphan_predictions=tuple(orphans)
    )


def filter_by_threshold(
    calibrated: Iterable[CalibratedArtifact], threshold: float
) -> tuple[list[CalibratedArtifact], list[CalibratedArtifact]]:
    """Split into (kept, dropped); prob >= threshold is kept (inclusive)."""
    if not 0.0 <= threshold <= 1.0:
        raise ValueError(f"threshold must be in [0, 1], got {threshold}")
    kept, dropped = [], []
    for item in calibrated:
        (kept if item.prob >= threshold else dropped).append(item)
    return kept, dropped


def calibrated_to_dict(item: CalibratedArtifact) -> dict:
    payload: dict = {"prob": item.calibration.prob}
    if item.calibration.raw_output is not None:
        payload["raw"] = {"raw_output": item.calibration.raw_output}
    out = record_to_dict(item.artifact)
    out["calibration"] = {item.calibration.backend: payload}
    return out


def serialize_calibrated(item: CalibratedArtifact) -> bytes:
    return json.dumps(calibrated_to_dict(item), ensure_ascii=False).encode("utf-8")


def parse_calibrated(data: bytes | str | dict, backend: str = DEFAULT_BACKEND) -> CalibratedArtifact:
    """Inverse of serialize_calibrated, reading the configured backend's payload."""
    if isinstance(data, (bytes, str)):
        if isinstance(data, bytes):
            data = data.decode("utf-8")
        try:
            data = json.loads(data)
        except json.JSONDecodeError as e:
            raise ParseError(f"invalid JSON: {e.msg}") from None
    if not isinstance(data, dict) or "calibration" not in data:
        raise ValidationError("calibrated record must be an object with a 'calibration' key")
    calibration = data["calibration"]
    if backend not in calibration:
        raise ValidationError(
            f"no calibration payload for backend {backend!r}; present: {sorted(calibration)}"
        )
    payload = calibration[backend]
    if not isinstance(payload, dict) or "prob" not in payload:
        raise ValidationError(f"backend {backend!r} payload must contain 'prob'")
    raw_output = None
    raw = payload.get("raw")
    if isinstance(raw, dict):
        raw_output = raw.get("raw_output")
    artifact_fields = {k: v for k, v in data.items() if k != "calibration"}
    return CalibratedArtifact(
        artifact=validate(artifact_fields),
        calibration=CalibrationPayload(
            prob=payload["prob"], backend=backend, raw_output=raw_output
        ),
    )


def load_calibrated(data: bytes | str, backend: str = DEFAULT_BACKEND) -> list[CalibratedArtifact]:
    if isinstance(data, bytes):
        data = data.decode("utf-8")
    items = []
    for line_no, raw in enumerate(data.splitlines(), start=1):
        line = raw.strip()
        if not line:
            continue
        try:
            items.append(parse_calibrated(line, backend=backend))
        except (ParseError, ValidationError) as e:
            raise ParseError(str(e), line=line_no) from None
    return items
