"""End-to-end acceptance bar for the package.

One test per criterion, so `pytest -v` prints one pass/fail line each:

1. training reaches 90% test accuracy within the time budget
2. deleting a class's frequent maps hurts it far more than random deletion
3. oracle PCR/LCR separate correct from incorrect predictions
4. Likert aggregation arithmetic is exact
5. structural feature math matches naive recomputation
6. back-projected receptive fields cover all influential pixels
7. the whole pipeline is byte-deterministic
8. diagnosis rules fire on their canonical inputs

These train several small models from scratch; the module takes a few
minutes. Deselect with `-m "not acceptance"` during development.
"""

import hashlib
import os
import time
from dataclasses import dataclass

import numpy as np
import pytest

from glassbox import pipeline as P
from glassbox.analysis import (
    binarize,
    class_frequent,
    inference_feature,
    normalize,
)
from glassbox.config import PipelineConfig, read_json_artifact
from glassbox.consistency import (
    SUGGEST_DATA_COLLECTION,
    SUGGEST_DECISION_MAKING,
    SUGGEST_FEATURE_EXTRACTION,
    ConsistencyRecord,
    build_records,
    diagnose,
    load_records_jsonl,
    merge_likert,
    read_responses,
)
from glassbox.data.dataset_io import load_dataset, save_dataset
from glassbox.nn.model import forward
from glassbox.receptive_field import (
    backproject,
    build_masked_feature,
    disk_offsets,
    influence_oracle,
)
from glassbox.report import generate_report

pytestmark = pytest.mark.acceptance

FIXTURE_CSV = os.path.join(os.path.dirname(__file__), "data",
                           "responses_fixture.csv")


# --- fixtures: three pipelines at different operating points ---------------

@pytest.fixture(scope="module")
def default_run(tmp_path_factory):
    """Stock configuration: the dataset and network everything defaults to."""
    cfg = PipelineConfig()
    home = str(tmp_path_factory.mktemp("accept_default"))
    P.cmd_gen_data(cfg, home)
    t0 = time.monotonic()
    metrics = P.cmd_train(cfg, home)
    train_seconds = time.monotonic() - t0
    P.cmd_analyze(cfg, home)
    return {"cfg": cfg, "home": home, "metrics": metrics,
            "train_seconds": train_seconds}


@pytest.fixture(scope="module")
def ablation_run(tmp_path_factory):
    """Operating point where frequent maps carry the class evidence.

    Five classes over the 10-attribute pool leaves nearly every class with
    unique attributes, and planted distractor attributes force the network
    to weigh its own attribute detectors instead of leaning on redundancy.
    gamma=1.25 keeps the frequent tables of weakly-activating classes
    meaningful. trials/max_deleted make the ablate artifact measure exactly
    the 5-deletion point this criterion reads.
    """
    cfg = PipelineConfig(
        num_classes=5, attributes_per_class=2, distractor_probability=0.6,
        epochs=30, seed=6, gamma=1.25,
        ablation_max_deleted=5, ablation_trials=10,
    )
    home = str(tmp_path_factory.mktemp("accept_ablation"))
    t0 = time.monotonic()
    P.cmd_gen_data(cfg, home)
    metrics = P.cmd_train(cfg, home)
    P.cmd_analyze(cfg, home)
    P.cmd_ablate(cfg, home)
    elapsed = time.monotonic() - t0
    return {"cfg": cfg, "home": home, "metrics": metrics, "elapsed": elapsed}


@pytest.fixture(scope="module")
def noise_run(tmp_path_factory):
    """Default dataset with 5% corrupted training labels.

    The corruption guarantees misclassifications (needed to measure a
    correct-vs-incorrect contrast) while keeping test accuracy in the
    90-97% band. pcr_overlap is set where region overlap measures
    alignment rather than receptive-field size: back-projected masks are
    several times larger than attribute masks, so a fully-contained
    attribute tops out near 0.2 of the mask area.
    """
    cfg = PipelineConfig(epochs=12, pcr_overlap=0.15)
    home = str(tmp_path_factory.mktemp("accept_noise"))
    P.cmd_gen_data(cfg, home)

    spec, train, test, classes = load_dataset(P.path_in(home, P.DATASET))
    rng = np.random.default_rng((0, 999))
    flip = rng.choice(len(train), size=int(round(0.05 * len(train))),
                      replace=False)
    for i in flip:
        new = int(rng.integers(0, spec.num_classes - 1))
        if new >= train[i].label:
            new += 1
        train[i].label = new
    save_dataset(P.path_in(home, P.DATASET), spec, train, test, classes)

    metrics = P.cmd_train(cfg, home)
    P.cmd_auto_annotate(cfg, home)
    P.cmd_consistency(cfg, home, oracle=True)
    return {"cfg": cfg, "home": home, "metrics": metrics}


# --- 1: training ------------------------------------------------------------

def test_training_reaches_90_percent_within_budget(default_run):
    acc = default_run["metrics"]["test_accuracy"]
    seconds = default_run["train_seconds"]
    assert acc >= 0.90, f"test accuracy {acc:.3f} below 0.90"
    assert seconds <= 300, f"training took {seconds:.0f}s, budget is 300s"


# --- 2: frequent-map deletion hurts where it should -------------------------

def test_frequent_deletion_beats_random_by_30_points(ablation_run):
    doc = read_json_artifact(P.path_in(ablation_run["home"], P.ABLATION))
    contrasts = {
        c: entry["random"][5] - entry["frequent"][5]
        for c, entry in doc["classes"].items()
    }
    bad = {c: round(v, 3) for c, v in contrasts.items() if v < 0.30}
    assert not bad, (
        f"classes under the 30-point bar: {bad} (all: "
        f"{ {c: round(v, 3) for c, v in sorted(contrasts.items())} })"
    )
    assert ablation_run["elapsed"] <= 120, (
        f"fixture took {ablation_run['elapsed']:.0f}s, budget is 120s"
    )


# --- 3: oracle consistency separates correct from incorrect -----------------

def test_oracle_ratios_separate_correct_from_incorrect(noise_run):
    acc = noise_run["metrics"]["test_accuracy"]
    assert 0.90 <= acc <= 0.97, (
        f"noise fixture accuracy {acc:.3f} outside the 90-97% band the "
        "contrast is calibrated for"
    )
    records = load_records_jsonl(
        P.path_in(noise_run["home"], P.RECORDS_ORACLE))
    correct = [r for r in records if r.correct]
    incorrect = [r for r in records if not r.correct]
    assert correct and incorrect, "need both populations to compare"
    pcr_gap = (np.mean([r.pcr for r in correct])
               - np.mean([r.pcr for r in incorrect]))
    lcr_gap = (np.mean([r.lcr for r in correct])
               - np.mean([r.lcr for r in incorrect]))
    assert pcr_gap > 0.10, f"PCR contrast {pcr_gap:.3f} not above 0.10"
    assert lcr_gap > 0.10, f"LCR contrast {lcr_gap:.3f} not above 0.10"


# --- 4: aggregation arithmetic is exact --------------------------------------

def test_likert_aggregation_is_exact():
    assert merge_likert("strongly_agree") == "agree"
    assert merge_likert("agree") == "agree"
    assert merge_likert("disagree") == "disagree"
    assert merge_likert("strongly_disagree") == "disagree"

    @dataclass
    class Stub:
        sample_id: str
        icr: float = 0.9
        predicted_label: int = 0

    responses = read_responses(FIXTURE_CSV)
    truth = {"s-a": 0, "s-b": 0, "s-c": 1}
    records = {
        r.sample_id: r
        for r in build_records([Stub(s) for s in sorted(truth)],
                               responses, truth)
    }
    assert records["s-a"].pcr == 0.75
    assert records["s-b"].pcr == 0.0
    assert records["s-c"].pcr == 1.0


# --- 5: structural feature math matches naive recomputation -----------------

def test_structural_math_matches_naive_oracles(default_run):
    cfg, home = default_run["cfg"], default_run["home"]
    ctx = P.build_context(cfg, home)
    a = binarize(normalize(ctx.z_train, ctx.stats), cfg.gamma)
    ytr = ctx.ytr
    D = ctx.model.feature_dim

    # frequent tables against a plain-Python recount, every class
    for c in range(cfg.num_classes):
        counts = [0] * D
        for row, label in zip(a, ytr):
            if int(label) == c:
                for d in range(D):
                    counts[d] += int(row[d])
        assert counts == [int(x) for x in ctx.frequent.counts[c]], (
            f"class {c} counts disagree with recount"
        )
        top = sorted(range(D), key=lambda d: (-counts[d], d))[:cfg.k]
        assert sorted(top) == [int(i) for i in
                               np.flatnonzero(ctx.frequent.q_for(c))]
        assert int(ctx.frequent.q_for(c).sum()) == cfg.k

    # e = a AND q on random pairs at full width
    rng = np.random.default_rng((20259,))
    for _ in range(1000):
        av = rng.integers(0, 2, size=D).astype(np.uint8)
        qv = rng.integers(0, 2, size=D).astype(np.uint8)
        expected = [int(bool(x) and bool(y)) for x, y in zip(av, qv)]
        assert [int(v) for v in inference_feature(av, qv)] == expected

    # the worked micro-example: 4 samples, 5 features, k=3
    micro = np.array([
        [1, 0, 1, 0, 1],
        [1, 1, 1, 0, 1],
        [1, 0, 1, 1, 1],
        [1, 0, 1, 0, 1],
    ], dtype=np.uint8)
    table = class_frequent(micro, np.zeros(4, dtype=np.int64), k=3,
                           num_classes=1)
    assert [int(v) for v in table.q_for(0)] == [1, 0, 1, 0, 1]


# --- 6: receptive fields cover every influential pixel ----------------------

def test_receptive_fields_cover_influential_pixels(tiny_cfg, tiny_ctx):
    analyses = tiny_ctx.test_analyses()[:20]
    assert len(analyses) == 20
    total_flagged = 0
    checked = 0
    for rec in analyses:
        sample = next(s for s in tiny_ctx.test
                      if s.sample_id == rec.sample_id)
        trace = forward(tiny_ctx.model, sample.image)
        for fid in np.flatnonzero(rec.e):
            fid = int(fid)
            masked = build_masked_feature(trace, fid, tiny_ctx.stats,
                                          tiny_cfg.gamma)
            magnitude = backproject(tiny_ctx.model, trace, masked)
            support = {tuple(p) for p in np.argwhere(magnitude > 0)}
            flagged = influence_oracle(tiny_ctx.model, sample.image, fid,
                                       tiny_ctx.stats, tiny_cfg.gamma,
                                       batch_size=2048)
            assert flagged <= support, (
                f"{rec.sample_id}/feature {fid}: influential pixels outside "
                f"the back-projected support: {sorted(flagged - support)[:5]}"
            )
            total_flagged += len(flagged)
            checked += 1
    assert checked, "fixture produced no activated frequent features"
    assert total_flagged, "influence oracle never fired; the check is vacuous"

    # reverse-pass linearity on the first sample with two active features
    for rec in analyses:
        fids = [int(f) for f in np.flatnonzero(rec.e)]
        if len(fids) < 2:
            continue
        sample = next(s for s in tiny_ctx.test
                      if s.sample_id == rec.sample_id)
        trace = forward(tiny_ctx.model, sample.image)
        m1 = build_masked_feature(trace, fids[0], tiny_ctx.stats,
                                  tiny_cfg.gamma)
        m2 = build_masked_feature(trace, fids[1], tiny_ctx.stats,
                                  tiny_cfg.gamma)
        r1 = backproject(tiny_ctx.model, trace, m1, reduce=False)
        r2 = backproject(tiny_ctx.model, trace, m2, reduce=False)
        r12 = backproject(tiny_ctx.model, trace, m1 + m2, reduce=False)
        assert np.max(np.abs(r12 - (r1 + r2))) <= 1e-5
        break
    else:
        pytest.fail("no sample with two activated frequent features")

    assert sorted(disk_offsets(2)) == sorted([
        (0, 0), (0, 1), (0, -1), (1, 0), (-1, 0),
        (1, 1), (1, -1), (-1, 1), (-1, -1),
        (0, 2), (0, -2), (2, 0), (-2, 0),
    ])


# --- 7: byte determinism ------------------------------------------------------

def test_pipeline_runs_are_byte_identical(tmp_path_factory, tiny_cfg,
                                          tiny_home):
    def digests(home):
        out = {}
        for root, _, files in os.walk(home):
            for name in files:
                if not name.endswith((".json", ".jsonl", ".gbox")):
                    continue
                path = os.path.join(root, name)
                rel = os.path.relpath(path, home)
                with open(path, "rb") as fh:
                    out[rel] = hashlib.sha256(fh.read()).hexdigest()
        return out

    rerun = str(tmp_path_factory.mktemp("accept_rerun"))
    P.cmd_gen_data(tiny_cfg, rerun)
    P.cmd_train(tiny_cfg, rerun)
    P.cmd_analyze(tiny_cfg, rerun)
    P.cmd_rf(tiny_cfg, rerun)
    P.cmd_ablate(tiny_cfg, rerun)
    P.cmd_annotate_export(tiny_cfg, rerun)
    P.cmd_auto_annotate(tiny_cfg, rerun)
    P.cmd_consistency(tiny_cfg, rerun, oracle=True)
    generate_report(tiny_cfg, rerun)

    first, second = digests(tiny_home), digests(rerun)
    assert first.keys() == second.keys()
    differing = [rel for rel in first if first[rel] != second[rel]]
    assert not differing, f"artifacts differ between runs: {differing}"
    assert len(first) >= 15  # the comparison actually covered the pipeline


# --- 8: diagnosis rules --------------------------------------------------------

def test_diagnosis_rules_fire_on_canonical_records():
    def record(pcr, lcr, correct):
        return ConsistencyRecord(sample_id="s", pcr=pcr, lcr=lcr, icr=0.9,
                                 correct=correct)

    assert diagnose(record(0.2, 0.9, True)) == [SUGGEST_FEATURE_EXTRACTION]
    assert diagnose(record(0.9, 0.2, True)) == [SUGGEST_DECISION_MAKING]
    assert diagnose(record(0.9, 0.9, False)) == [SUGGEST_DATA_COLLECTION]
