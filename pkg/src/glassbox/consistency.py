"""Consistency analysis over human (or oracle) judgments of the inference.

Two questions are asked per sample: does the highlighted region matter for
the image (PCR), and do the named attributes belong to the predicted class
(LCR). Four-point Likert answers collapse to agree/disagree; the agreement
fraction over workers is the ratio. ICR is the model's own confidence, the
maximum softmax entry.

The synthetic dataset's ground truth gives automated stand-ins for both
human questions, so correct/incorrect populations can be contrasted without
a crowd.
"""

import csv
import json
from dataclasses import dataclass

import numpy as np

from .errors import MissingDataError, ResponseError

QUESTIONS = ("PCR", "LCR")
_MERGE = {
    "strongly_agree": "agree",
    "agree": "agree",
    "disagree": "disagree",
    "strongly_disagree": "disagree",
}
RESPONSE_HEADER = ["task_id", "sample_id", "question", "worker_id", "answer"]

SUGGEST_FEATURE_EXTRACTION = (
    "deepen/retrain feature-extraction layers (before conv_final)"
)
SUGGEST_DECISION_MAKING = (
    "deepen/retrain decision-making layers (after conv_final)"
)
SUGGEST_DATA_COLLECTION = (
    "insufficient training data for confusable classes / review ground truth"
)


@dataclass(frozen=True)
class WorkerResponse:
    task_id: str
    sample_id: str
    question: str
    worker_id: str
    answer: str


@dataclass(frozen=True)
class ConsistencyRecord:
    sample_id: str
    pcr: float
    lcr: float
    icr: float
    correct: bool

    def __post_init__(self):
        for name in ("pcr", "lcr", "icr"):
            v = getattr(self, name)
            if not 0.0 <= v <= 1.0:
                raise ValueError(f"{name} {v} outside [0, 1]")

    def to_json_dict(self):
        return {
            "sample_id": self.sample_id,
            "pcr": round(self.pcr, 9),
            "lcr": round(self.lcr, 9),
            "icr": round(self.icr, 9),
            "correct": self.correct,
        }


@dataclass
class JointDistribution:
    bins: np.ndarray     # (B, B) counts, rows = pcr bin, cols = lcr bin
    population: str      # "correct" or "incorrect"

    @property
    def total(self):
        return int(self.bins.sum())

    def normalized(self):
        t = self.total
        return self.bins / t if t else self.bins.astype(float)

    def to_json_dict(self):
        return {
            "population": self.population,
            "total": self.total,
            "counts": [[int(v) for v in row] for row in self.bins],
            "probabilities": [
                [round(float(v), 9) for v in row] for row in self.normalized()
            ],
        }


def merge_likert(answer, row=None):
    """strongly_agree/agree -> agree; disagree/strongly_disagree -> disagree."""
    try:
        return _MERGE[answer]
    except KeyError:
        raise ResponseError(f"unknown answer token {answer!r}", row=row) from None


def ratio(answers, sample_id="?", question="?"):
    """Agreement fraction of one sample's answers to one question."""
    answers = list(answers)
    if not answers:
        raise MissingDataError(
            f"no {question} responses for sample {sample_id}"
        )
    agree = sum(1 for a in answers if merge_likert(a) == "agree")
    return agree / len(answers)


def icr(softmax):
    """The model's own confidence: the maximum softmax probability."""
    probs = np.asarray(softmax, dtype=np.float64)
    if probs.ndim != 1 or probs.size == 0:
        raise ValueError("softmax must be a non-empty vector")
    return float(probs.max())


def read_responses(path):
    """Parse the response CSV, enforcing header, tokens, and uniqueness."""
    responses = []
    seen = set()
    with open(path, newline="") as fh:
        reader = csv.reader(fh)
        try:
            header = next(reader)
        except StopIteration:
            raise ResponseError("empty response file") from None
        if header != RESPONSE_HEADER:
            raise ResponseError(
                f"bad header {header!r}, expected {RESPONSE_HEADER!r}", row=1
            )
        for row_num, row in enumerate(reader, start=2):
            if not row:
                continue
            if len(row) != 5:
                raise ResponseError(f"expected 5 fields, got {len(row)}", row=row_num)
            task_id, sample_id, question, worker_id, answer = (v.strip() for v in row)
            if question not in QUESTIONS:
                raise ResponseError(f"unknown question {question!r}", row=row_num)
            merge_likert(answer, row=row_num)
            key = (sample_id, question, worker_id)
            if key in seen:
                raise ResponseError(
                    f"duplicate response for sample {sample_id!r} "
                    f"question {question} worker {worker_id!r}",
                    row=row_num,
                )
            seen.add(key)
            responses.append(WorkerResponse(task_id, sample_id, question,
                                            worker_id, answer))
    return responses


def append_response(path, response, existing_keys=None):
    """Append one response row, creating the file with its header if needed."""
    import os

    is_new = not os.path.exists(path) or os.path.getsize(path) == 0
    with open(path, "a", newline="") as fh:
        writer = csv.writer(fh)
        if is_new:
            writer.writerow(RESPONSE_HEADER)
        writer.writerow([response.task_id, response.sample_id,
                         response.question, response.worker_id,
                         response.answer])


def build_records(analyses, responses, ground_truth):
    """One ConsistencyRecord per analyzed sample.

    Every sample needs at least one response to both questions; gaps raise a
    missing-data error listing the offenders. Responses for samples outside
    the analyses are ignored.
    """
    by_key = {}
    for r in responses:
        by_key.setdefault((r.sample_id, r.question), []).append(r.answer)

    missing = []
    for a in analyses:
        for question in QUESTIONS:
            if not by_key.get((a.sample_id, question)):
                missing.append(f"{a.sample_id}/{question}")
    if missing:
        raise MissingDataError(
            "no responses for: " + ", ".join(sorted(missing))
        )

    records = []
    for a in analyses:
        records.append(ConsistencyRecord(
            sample_id=a.sample_id,
            pcr=ratio(by_key[(a.sample_id, "PCR")], a.sample_id, "PCR"),
            lcr=ratio(by_key[(a.sample_id, "LCR")], a.sample_id, "LCR"),
            icr=a.icr,
            correct=(a.predicted_label == ground_truth[a.sample_id]),
        ))
    return records


def _bin_index(value, B):
    # bin j covers [j/B, (j+1)/B); the last bin is closed at 1.0
    return min(int(value * B), B - 1)


def joint_distribution(records, B=5, population="correct"):
    if B < 1:
        raise ValueError("B must be >= 1")
    if population not in ("correct", "incorrect"):
        raise ValueError(f"population must be correct or incorrect, not {population!r}")
    want = population == "correct"
    bins = np.zeros((B, B), dtype=np.int64)
    for r in records:
        if r.correct == want:
            bins[_bin_index(r.pcr, B), _bin_index(r.lcr, B)] += 1
    return JointDistribution(bins=bins, population=population)


def oracle_pcr(rf_masks, attribute_masks, overlap_fraction=0.25):
    """Automated stand-in for the region question.

    A top feature counts as relevant when its receptive-field mask overlaps
    some ground-truth attribute mask by at least overlap_fraction of the RF
    area. The ratio is the relevant fraction; no top features means 0.
    """
    rf_masks = list(rf_masks)
    if not rf_masks:
        return 0.0
    attribute_masks = [np.asarray(m, dtype=bool) for m in attribute_masks]
    hits = 0
    for rf in rf_masks:
        rf = np.asarray(rf, dtype=bool)
        area = int(rf.sum())
        if area == 0:
            continue
        for am in attribute_masks:
            if int((rf & am).sum()) >= overlap_fraction * area:
                hits += 1
                break
    return hits / len(rf_masks)


def oracle_lcr(feature_attrs, e, class_attrs):
    """Automated stand-in for the attribute question.

    attrs(e) is the union of auto-annotation attributes over every feature
    in e; the ratio is the fraction of those attributes that belong to the
    looked-up class. Empty attrs(e) means 0.
    """
    e = np.asarray(e)
    attrs = set()
    for f in np.flatnonzero(e):
        attrs |= set(feature_attrs.get(int(f), ()))
    if not attrs:
        return 0.0
    return len(attrs & set(class_attrs)) / len(attrs)


def diagnose(record, low=0.5):
    """Which part of the pipeline a weak record points at.

    Every rule that fires is returned, in a fixed order: region mismatch
    blames the layers before conv_final, attribute mismatch blames the
    layers after it, and a confident-but-wrong record with both ratios high
    points at the training data or its ground truth.
    """
    suggestions = []
    if record.pcr < low:
        suggestions.append(SUGGEST_FEATURE_EXTRACTION)
    if record.lcr < low:
        suggestions.append(SUGGEST_DECISION_MAKING)
    if not record.correct and record.pcr >= low and record.lcr >= low:
        suggestions.append(SUGGEST_DATA_COLLECTION)
    return suggestions


def save_records_jsonl(path, records):
    with open(path, "w") as fh:
        for r in records:
            fh.write(json.dumps(r.to_json_dict(), sort_keys=True))
            fh.write("\n")


def load_records_jsonl(path):
    records = []
    with open(path) as fh:
        for line in fh:
            line = line.strip()
            if not line:
                continue
            d = json.loads(line)
            records.append(ConsistencyRecord(
                sample_id=d["sample_id"], pcr=d["pcr"], lcr=d["lcr"],
                icr=d["icr"], correct=d["correct"],
            ))
    return records
