"""Pipeline stages behind the CLI commands.

Every stage reads persisted artifacts from the home directory, does its
work, and writes new artifacts with embedded provenance. Stages recompute
cheap intermediate state (activations, statistics) from the binary
artifacts instead of round-tripping floats through JSON, which keeps reruns
byte-identical and stages restartable in any valid order.
"""

import os
from dataclasses import dataclass

import numpy as np

from .analysis import (
    analyze_sample,
    binarize,
    class_frequent,
    compute_feature_stats,
    normalize,
    select_statistics_set,
    ablation_curve,
)
from .annotation import (
    apply_auto_annotations,
    load_store,
    new_store,
    sample_annotation_images,
    save_store,
)
from .config import provenance, write_json_artifact
from .consistency import (
    ConsistencyRecord,
    build_records,
    diagnose,
    icr,
    joint_distribution,
    oracle_lcr,
    oracle_pcr,
    read_responses,
    save_records_jsonl,
)
from .data.attributes import ATTRIBUTES_BY_ID
from .data.dataset_io import export_pngs, load_dataset, save_dataset
from .data.synth import generate, stack_images, stack_labels
from .errors import MissingArtifactError
from .nn.model import forward, forward_batch, init_model, reference_layers, small_layers
from .nn.model_io import load_model, save_model, save_traces
from .nn.train import train_sgd
from .receptive_field import (
    RFParams,
    compute_receptive_field,
    overlay_filename,
    overlay_png_bytes,
)

DATASET = "dataset.gbox"
MODEL = "model.gbox"
TRACES = "traces.gbox"
CONFIG = "config.json"
METRICS = "metrics.json"
STATS = "stats.json"
FREQUENT = "frequent.json"
ANALYSES_TEST = "analyses_test.json"
ANALYSES_ANNOT = "analyses_annotation.json"
RF_INDEX = "rf_index.json"
ABLATION = "ablation.json"
ANNOT_IMAGES = "annotation_images.json"
FEATURE_ATTRS = "feature_attrs.json"
ANNOTATION = "annotation.json"
RESPONSES = "responses.csv"
RECORDS = "records.jsonl"
RECORDS_ORACLE = "records_oracle.jsonl"
DIAGNOSIS = "diagnosis.json"
TASKS = "tasks.json"
IMAGES_DIR = "images"
OVERLAYS_DIR = "overlays"
REPORT_DIR = "report"

_PRODUCERS = {
    DATASET: "gen-data",
    MODEL: "train",
    TRACES: "analyze",
    FEATURE_ATTRS: "auto-annotate",
    ANNOTATION: "annotate-export",
    TASKS: "consistency",
    RECORDS_ORACLE: "consistency --oracle",
    RESPONSES: "serve",
}


def path_in(home, name):
    return os.path.join(home, name)


def require(home, name):
    p = path_in(home, name)
    if not os.path.exists(p):
        raise MissingArtifactError(name, _PRODUCERS.get(name, "the producing command"))
    return p


def _write_config(cfg, home):
    write_json_artifact(path_in(home, CONFIG), cfg, [], {})


def cmd_gen_data(cfg, home):
    """Generate the dataset, persist it, and export per-sample PNGs."""
    os.makedirs(home, exist_ok=True)
    _write_config(cfg, home)
    spec = cfg.dataset_spec()
    train, test, classes = generate(spec)
    save_dataset(
        path_in(home, DATASET), spec, train, test, classes,
        extra_manifest={"provenance": provenance(cfg, [])},
    )
    img_dir = path_in(home, IMAGES_DIR)
    export_pngs(train, img_dir)
    export_pngs(test, img_dir)
    return {"train": len(train), "test": len(test), "classes": len(classes)}


def cmd_train(cfg, home):
    """Train the classifier on the persisted dataset."""
    _write_config(cfg, home)
    ds_path = require(home, DATASET)
    spec, train, test, classes = load_dataset(ds_path)
    Xtr, ytr = stack_images(train), stack_labels(train)
    Xte, yte = stack_images(test), stack_labels(test)
    layer_fn = reference_layers if cfg.architecture == "reference" else small_layers
    model = init_model(layer_fn(), (3, 32, 32), spec.num_classes, cfg.seed)
    result = train_sgd(
        model, Xtr, ytr, epochs=cfg.epochs, batch_size=cfg.batch_size,
        learning_rate=cfg.learning_rate, seed=cfg.seed,
    )
    preds = _predict(result.model, Xte)
    test_accuracy = float(np.mean(preds == yte)) if len(yte) else 0.0
    save_model(
        path_in(home, MODEL), result.model,
        extra_manifest={"provenance": provenance(cfg, [ds_path])},
    )
    write_json_artifact(path_in(home, METRICS), cfg, [ds_path], {
        "epoch_losses": [round(float(l), 9) for l in result.epoch_losses],
        "train_accuracy": round(result.final_accuracy, 9),
        "test_accuracy": round(test_accuracy, 9),
    })
    return {"train_accuracy": result.final_accuracy,
            "test_accuracy": test_accuracy}


def _predict(model, X, batch_size=128):
    if len(X) == 0:
        return np.zeros(0, dtype=np.int64)
    preds = []
    for s in range(0, len(X), batch_size):
        preds.append(forward_batch(model, X[s:s + batch_size])["predictions"])
    return np.concatenate(preds)


def _z_probs(model, X, batch_size=128):
    zs, ps = [], []
    for s in range(0, len(X), batch_size):
        out = forward_batch(model, X[s:s + batch_size])
        zs.append(out["conv_final"].max(axis=(2, 3)))
        ps.append(out["softmax"])
    if not zs:
        D = model.feature_dim
        return np.zeros((0, D), np.float32), np.zeros((0, model.num_classes))
    return np.concatenate(zs), np.concatenate(ps)


@dataclass
class Context:
    """Everything the analysis stages share, rebuilt from binary artifacts."""

    cfg: object
    spec: object
    train: list
    test: list
    classes: list
    model: object
    z_train: np.ndarray
    probs_train: np.ndarray
    z_test: np.ndarray
    probs_test: np.ndarray
    stats: object
    frequent: object
    selection: np.ndarray    # train indices of the statistics set

    @property
    def ytr(self):
        return stack_labels(self.train)

    @property
    def yte(self):
        return stack_labels(self.test)

    def annotation_analyses(self):
        """Ground-truth-mode analyses over the statistics selection set."""
        ytr = self.ytr
        out = []
        for i in self.selection:
            i = int(i)
            out.append(analyze_sample(
                self.train[i].sample_id, self.z_train[i], self.probs_train[i],
                self.stats, self.frequent, self.cfg.gamma, self.cfg.l,
                lookup_label=int(ytr[i]),
            ))
        return out

    def test_analyses(self):
        """Prediction-mode analyses over the test set."""
        return [
            analyze_sample(
                self.test[i].sample_id, self.z_test[i], self.probs_test[i],
                self.stats, self.frequent, self.cfg.gamma, self.cfg.l,
            )
            for i in range(len(self.test))
        ]


def build_context(cfg, home):
    ds_path = require(home, DATASET)
    model_path = require(home, MODEL)
    spec, train, test, classes = load_dataset(ds_path)
    model = load_model(model_path)
    Xtr = stack_images(train)
    Xte = stack_images(test)
    ytr = stack_labels(train)
    z_train, probs_train = _z_probs(model, Xtr)
    z_test, probs_test = _z_probs(model, Xte)
    true_probs = probs_train[np.arange(len(ytr)), ytr]
    stats = compute_feature_stats(
        z_train, ytr, true_probs, top_n=cfg.stats_top_n,
        num_classes=spec.num_classes,
    )
    selection = select_statistics_set(ytr, true_probs, cfg.stats_top_n)
    a = binarize(normalize(z_train, stats), cfg.gamma)
    frequent = class_frequent(a, ytr, cfg.k, spec.num_classes)
    return Context(
        cfg=cfg, spec=spec, train=train, test=test, classes=classes,
        model=model, z_train=z_train, probs_train=probs_train,
        z_test=z_test, probs_test=probs_test,
        stats=stats, frequent=frequent, selection=selection,
    )


def cmd_analyze(cfg, home):
    """Write statistics, the frequent table, per-sample analyses, traces."""
    _write_config(cfg, home)
    ctx = build_context(cfg, home)
    inputs = [path_in(home, DATASET), path_in(home, MODEL)]

    write_json_artifact(path_in(home, STATS), cfg, inputs, {
        "mu": [round(float(v), 9) for v in ctx.stats.mu],
        "sample_count": ctx.stats.sample_count,
        "selection": [ctx.train[int(i)].sample_id for i in ctx.selection],
    })
    write_json_artifact(path_in(home, FREQUENT), cfg, inputs,
                        ctx.frequent.to_json_dict())
    write_json_artifact(path_in(home, ANALYSES_TEST), cfg, inputs, {
        "mode": "prediction",
        "samples": [a.to_json_dict() for a in ctx.test_analyses()],
    })
    write_json_artifact(path_in(home, ANALYSES_ANNOT), cfg, inputs, {
        "mode": "ground_truth",
        "samples": [a.to_json_dict() for a in ctx.annotation_analyses()],
    })
    save_traces(
        path_in(home, TRACES),
        [
            (ctx.test[i].sample_id,
             forward_batch(ctx.model, ctx.test[i].image[None],
                           upto_conv_final=True)["conv_final"][0],
             ctx.probs_test[i])
            for i in range(len(ctx.test))
        ],
        extra_manifest={"provenance": provenance(cfg, inputs)},
    )
    return {"analyses": len(ctx.test), "annotation_set": len(ctx.selection)}


def _rf_pairs(ctx):
    """(sample object, [feature ids]) pairs needing receptive fields."""
    per_sample = {}
    sample_by_id = {s.sample_id: s for s in ctx.train + ctx.test}

    annot = ctx.annotation_analyses()
    D = ctx.model.feature_dim
    for f in range(D):
        image_set = sample_annotation_images(annot, f, ctx.cfg.images_per_feature)
        for item in image_set.items:
            per_sample.setdefault(item["sample_id"], set()).add(f)
    for a in ctx.test_analyses():
        for fid, _ in a.top_features:
            per_sample.setdefault(a.sample_id, set()).add(fid)
    return [
        (sample_by_id[sid], sorted(fs)) for sid, fs in sorted(per_sample.items())
    ]


def cmd_rf(cfg, home):
    """Export receptive-field overlay PNGs for annotation and task payloads."""
    _write_config(cfg, home)
    ctx = build_context(cfg, home)
    inputs = [path_in(home, DATASET), path_in(home, MODEL)]
    params = RFParams(tau=cfg.rf_tau, radius=cfg.rf_radius)
    out_dir = path_in(home, OVERLAYS_DIR)
    os.makedirs(out_dir, exist_ok=True)
    index = []
    for sample, feature_ids in _rf_pairs(ctx):
        trace = forward(ctx.model, sample.image)
        for fid in feature_ids:
            rf = compute_receptive_field(
                ctx.model, trace, fid, ctx.stats, cfg.gamma, params,
                sample_id=sample.sample_id,
            )
            fname = overlay_filename(sample.sample_id, fid)
            with open(os.path.join(out_dir, fname), "wb") as fh:
                fh.write(overlay_png_bytes(sample.image, rf.mask))
            index.append({
                "sample_id": sample.sample_id,
                "feature": fid,
                "path": f"{OVERLAYS_DIR}/{fname}",
                "mask_pixels": int(rf.mask.sum()),
            })
    write_json_artifact(path_in(home, RF_INDEX), cfg, inputs, {"overlays": index})
    return {"overlays": len(index)}


def cmd_ablate(cfg, home):
    """Accuracy-vs-deletion curves per class, frequent and random modes."""
    _write_config(cfg, home)
    ctx = build_context(cfg, home)
    inputs = [path_in(home, DATASET), path_in(home, MODEL)]
    Xte, yte = stack_images(ctx.test), ctx.yte
    max_deleted = min(cfg.ablation_max_deleted, ctx.model.feature_dim)
    curves = {}
    for c in range(ctx.spec.num_classes):
        frequent = ablation_curve(
            ctx.model, Xte, yte, c, "frequent", max_deleted,
            frequent=ctx.frequent,
        )
        random = ablation_curve(
            ctx.model, Xte, yte, c, "random", max_deleted,
            trials=cfg.ablation_trials, seed=cfg.seed,
        )
        curves[str(c)] = {
            "frequent": [round(v, 9) for v in frequent],
            "random": [round(v, 9) for v in random],
        }
    write_json_artifact(path_in(home, ABLATION), cfg, inputs, {
        "max_deleted": max_deleted,
        "trials": cfg.ablation_trials,
        "classes": curves,
    })
    return {"classes": len(curves), "max_deleted": max_deleted}


def cmd_annotate_export(cfg, home):
    """Write per-feature annotation image sets; create the store if absent."""
    _write_config(cfg, home)
    ctx = build_context(cfg, home)
    inputs = [path_in(home, DATASET), path_in(home, MODEL)]
    annot = ctx.annotation_analyses()
    D = ctx.model.feature_dim
    features = []
    for f in range(D):
        image_set = sample_annotation_images(
            annot, f, ctx.cfg.images_per_feature,
            image_dir=IMAGES_DIR, overlay_dir=OVERLAYS_DIR,
        )
        features.append({"feature": f, "items": image_set.items})
    write_json_artifact(path_in(home, ANNOT_IMAGES), cfg, inputs,
                        {"features": features})
    store_path = path_in(home, ANNOTATION)
    if not os.path.exists(store_path):
        save_store(new_store(D), store_path)
    return {"features": D}


def cmd_auto_annotate(cfg, home):
    """Label features from ground-truth co-occurrence; update the store."""
    from .annotation import auto_annotate

    _write_config(cfg, home)
    ctx = build_context(cfg, home)
    inputs = [path_in(home, DATASET), path_in(home, MODEL)]
    sel = [int(i) for i in ctx.selection]
    a = binarize(normalize(ctx.z_train[sel], ctx.stats), cfg.gamma)
    sample_attrs = [set(ctx.train[i].attribute_masks) for i in sel]
    assignments, precision = auto_annotate(a, sample_attrs, cfg.auto_threshold)
    attr_names = {i: ATTRIBUTES_BY_ID[i].name for i in range(ctx.spec.pool_size)}
    write_json_artifact(path_in(home, FEATURE_ATTRS), cfg, inputs, {
        "threshold": cfg.auto_threshold,
        "attribute_names": {str(k): v for k, v in attr_names.items()},
        "assignments": {
            str(f): sorted(v) for f, v in sorted(assignments.items())
        },
        "precision": {
            str(f): {str(t): round(p, 9) for t, p in sorted(prec.items())}
            for f, prec in sorted(precision.items())
        },
    })
    store_path = path_in(home, ANNOTATION)
    store = (load_store(store_path) if os.path.exists(store_path)
             else new_store(ctx.model.feature_dim))
    apply_auto_annotations(store, assignments, attr_names)
    save_store(store, store_path)
    return {"labeled_features": sum(1 for v in assignments.values() if v)}


def _feature_texts(store, feature_ids):
    """Display text per feature: assigned label names or a placeholder."""
    texts = []
    for fid in feature_ids:
        ids = store.assignments.get(fid, []) if store else []
        if ids:
            names = [store.label_name(i) for i in sorted(ids)]
            texts.append({"feature": fid, "text": ", ".join(names)})
        else:
            texts.append({"feature": fid, "text": f"(unlabeled feature {fid})"})
    return texts


def build_tasks(ctx, store):
    """Blinded task payloads for the two questions, one pair per test sample.

    PCR payloads carry the image and overlays but never the label; LCR
    payloads carry the label but never an image path.
    """
    tasks = []
    class_names = {c.class_id: c.name for c in ctx.classes}
    for a in ctx.test_analyses():
        fids = [fid for fid, _ in a.top_features]
        texts = _feature_texts(store, fids)
        overlays = [
            f"{OVERLAYS_DIR}/{overlay_filename(a.sample_id, fid)}" for fid in fids
        ]
        tasks.append({
            "task_id": f"pcr-{a.sample_id}",
            "sample_id": a.sample_id,
            "question": "PCR",
            "payload": {
                "prompt": "Is the highlighted feature relevant to the whole "
                          "or parts of the image?",
                "image": f"{IMAGES_DIR}/{a.sample_id}.png",
                "overlays": overlays,
                "features": texts,
            },
        })
        tasks.append({
            "task_id": f"lcr-{a.sample_id}",
            "sample_id": a.sample_id,
            "question": "LCR",
            "payload": {
                "prompt": "If an object shows these features, is it an "
                          "object of this class?",
                "label": class_names[a.predicted_label],
                "features": texts,
            },
        })
    return tasks


def cmd_consistency(cfg, home, oracle=False):
    """Build task payloads, and either oracle records or human records."""
    _write_config(cfg, home)
    ctx = build_context(cfg, home)
    inputs = [path_in(home, DATASET), path_in(home, MODEL)]

    store_path = path_in(home, ANNOTATION)
    store = load_store(store_path) if os.path.exists(store_path) else None
    tasks = build_tasks(ctx, store)
    write_json_artifact(path_in(home, TASKS), cfg, inputs, {
        "workers_per_question": cfg.workers_per_question,
        "tasks": tasks,
    })

    analyses = ctx.test_analyses()
    truth = {s.sample_id: s.label for s in ctx.test}

    if oracle:
        attrs_path = require(home, FEATURE_ATTRS)
        from .config import read_json_artifact

        fa = read_json_artifact(attrs_path)
        feature_attrs = {
            int(f): set(v) for f, v in fa["assignments"].items()
        }
        class_attrs = {c.class_id: set(c.attributes) for c in ctx.classes}
        params = RFParams(tau=cfg.rf_tau, radius=cfg.rf_radius)
        sample_by_id = {s.sample_id: s for s in ctx.test}
        records = []
        for a in analyses:
            sample = sample_by_id[a.sample_id]
            trace = forward(ctx.model, sample.image)
            rf_masks = [
                compute_receptive_field(
                    ctx.model, trace, fid, ctx.stats, cfg.gamma, params,
                    sample_id=a.sample_id,
                ).mask
                for fid, _ in a.top_features
            ]
            pcr = oracle_pcr(rf_masks, sample.attribute_masks.values(),
                             overlap_fraction=cfg.pcr_overlap)
            lcr = oracle_lcr(feature_attrs, a.e,
                             class_attrs[a.predicted_label])
            records.append(ConsistencyRecord(
                sample_id=a.sample_id, pcr=pcr, lcr=lcr, icr=a.icr,
                correct=(a.predicted_label == truth[a.sample_id]),
            ))
        out_name = RECORDS_ORACLE
    else:
        responses_path = require(home, RESPONSES)
        responses = read_responses(responses_path)
        records = build_records(analyses, responses, truth)
        out_name = RECORDS

    save_records_jsonl(path_in(home, out_name), records)
    suggestions = {}
    per_record = []
    for r in records:
        s = diagnose(r, low=cfg.diagnose_low)
        per_record.append({"sample_id": r.sample_id, "suggestions": s})
        for item in s:
            suggestions[item] = suggestions.get(item, 0) + 1
    write_json_artifact(path_in(home, DIAGNOSIS), cfg, inputs, {
        "source": out_name,
        "low_threshold": cfg.diagnose_low,
        "records": per_record,
        "summary": {k: suggestions[k] for k in sorted(suggestions)},
    })
    correct = [r for r in records if r.correct]
    incorrect = [r for r in records if not r.correct]
    return {
        "records": len(records),
        "correct": len(correct),
        "incorrect": len(incorrect),
        "mean_pcr_correct": (
            float(np.mean([r.pcr for r in correct])) if correct else None
        ),
        "mean_pcr_incorrect": (
            float(np.mean([r.pcr for r in incorrect])) if incorrect else None
        ),
    }


def joint_views(records, B):
    return (
        joint_distribution(records, B=B, population="correct"),
        joint_distribution(records, B=B, population="incorrect"),
    )
