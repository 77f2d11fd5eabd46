"""Feature annotation: free-text collection, label organization, closed labeling.

The process is a strict phase machine

    open -> organize -> closed -> organize -> closed -> ...

Open phase collects free descriptions per feature. Organize phase edits the
label vocabulary (merge, split, rename, add, delete) as atomic batches: a
failed batch leaves the store untouched. Closed phase assigns vocabulary
labels to features, several per feature and several features per label.

Merged-away label ids live on as aliases so re-applying a merge is a no-op
instead of a dangling-id error. Every successful mutation appends to an
append-only history; nothing in the store carries wall-clock time, so stores
are byte-reproducible.

auto_annotate replaces the human: it labels a feature with an attribute when
the feature's activations co-occur with the attribute often enough, which is
measurable here because the dataset carries ground truth.
"""

import json
import os
from copy import deepcopy
from dataclasses import dataclass, field

import numpy as np

from .errors import AnnotationError, EditError, PhaseError

PHASES = ("open", "organize", "closed")
_NEXT_PHASE = {"open": ("organize",), "organize": ("closed",), "closed": ("organize",)}


@dataclass
class AnnotationStore:
    feature_count: int
    phase: str = "open"
    round: int = 1
    next_label_id: int = 0
    vocabulary: dict = field(default_factory=dict)   # label_id -> entry dict
    aliases: dict = field(default_factory=dict)      # merged id -> surviving id
    open_texts: dict = field(default_factory=dict)   # feature_id -> [str]
    assignments: dict = field(default_factory=dict)  # feature_id -> sorted [label_id]
    history: list = field(default_factory=list)

    def _log(self, op, **kw):
        self.history.append({"op": op, **kw})

    def _check_feature(self, feature_id):
        if not 0 <= feature_id < self.feature_count:
            raise AnnotationError(
                f"feature {feature_id} out of range [0, {self.feature_count})"
            )

    def resolve(self, label_id):
        """Follow merge aliases to the surviving label id."""
        seen = set()
        while label_id in self.aliases:
            if label_id in seen:
                raise EditError(f"alias cycle at label {label_id}")
            seen.add(label_id)
            label_id = self.aliases[label_id]
        return label_id

    def label_name(self, label_id):
        return self.vocabulary[label_id]["name"]

    def labels_for(self, feature_id):
        return list(self.assignments.get(feature_id, []))

    def features_for(self, label_id):
        return sorted(
            f for f, ids in self.assignments.items() if label_id in ids
        )


def new_store(feature_count):
    if feature_count < 1:
        raise AnnotationError("feature_count must be >= 1")
    return AnnotationStore(feature_count=feature_count)


def advance_phase(store, to):
    if to not in PHASES:
        raise PhaseError(f"unknown phase {to!r}")
    if to not in _NEXT_PHASE[store.phase]:
        raise PhaseError(f"cannot go from {store.phase!r} to {to!r}")
    prev = store.phase
    store.phase = to
    if prev == "organize" and to == "closed":
        store.round += 1
    store._log("phase", **{"from": prev, "to": to})
    return store


def open_annotate(store, feature_id, text):
    if store.phase != "open":
        raise PhaseError(f"open annotation requires phase open, not {store.phase!r}")
    store._check_feature(feature_id)
    if not isinstance(text, str) or not text.strip():
        raise AnnotationError("open annotation text must be non-empty")
    store.open_texts.setdefault(feature_id, []).append(text)
    store._log("open_annotate", feature=feature_id, text=text)
    return store


def _live_names(store):
    return {e["name"] for e in store.vocabulary.values()}


def _add_label(store, name, description=""):
    if not name or not name.strip():
        raise EditError("label name must be non-empty")
    if name in _live_names(store):
        raise EditError(f"label name {name!r} already exists")
    lid = store.next_label_id
    store.next_label_id += 1
    store.vocabulary[lid] = {
        "name": name,
        "description": description,
        "created_in_round": store.round,
    }
    return lid


def _apply_edit(store, edit):
    op = edit.get("op")
    if op == "add":
        lid = _add_label(store, edit.get("name"), edit.get("description", ""))
        return {"op": "add", "label_id": lid, "name": edit["name"]}
    if op == "rename":
        lid = edit.get("label_id")
        if lid not in store.vocabulary:
            raise EditError(f"rename: unknown label {lid}")
        name = edit.get("name")
        if not name or not name.strip():
            raise EditError("rename: label name must be non-empty")
        if name != store.vocabulary[lid]["name"] and name in _live_names(store):
            raise EditError(f"rename: label name {name!r} already exists")
        store.vocabulary[lid]["name"] = name
        return {"op": "rename", "label_id": lid, "name": name}
    if op == "delete":
        lid = edit.get("label_id")
        if lid not in store.vocabulary:
            raise EditError(f"delete: unknown label {lid}")
        del store.vocabulary[lid]
        for f in list(store.assignments):
            ids = [i for i in store.assignments[f] if i != lid]
            store.assignments[f] = ids
        return {"op": "delete", "label_id": lid}
    if op == "merge":
        sources = list(edit.get("sources", []))
        target = edit.get("target")
        target = store.resolve(target) if target in store.aliases else target
        if target not in store.vocabulary:
            raise EditError(f"merge: unknown target label {target}")
        merged = []
        for src in sources:
            if src == target:
                continue
            if src in store.vocabulary:
                del store.vocabulary[src]
                store.aliases[src] = target
                for f in list(store.assignments):
                    ids = store.assignments[f]
                    if src in ids:
                        ids = sorted(set(i for i in ids if i != src) | {target})
                        store.assignments[f] = ids
                merged.append(src)
            elif src in store.aliases:
                if store.resolve(src) != target:
                    raise EditError(
                        f"merge: label {src} was already merged into "
                        f"{store.resolve(src)}, not {target}"
                    )
                # already merged into this target: no-op
            else:
                raise EditError(f"merge: unknown source label {src}")
        return {"op": "merge", "sources": sources, "target": target,
                "applied": merged}
    if op == "split":
        lid = edit.get("label_id")
        names = list(edit.get("names", []))
        if lid not in store.vocabulary:
            raise EditError(f"split: unknown label {lid}")
        if len(names) < 2:
            raise EditError("split needs at least two new names")
        new_ids = [_add_label(store, n) for n in names]
        for f in list(store.assignments):
            ids = store.assignments[f]
            if lid in ids:
                ids = sorted(set(i for i in ids if i != lid) | set(new_ids))
                store.assignments[f] = ids
        del store.vocabulary[lid]
        return {"op": "split", "label_id": lid, "new_ids": new_ids,
                "names": names}
    raise EditError(f"unknown edit op {op!r}")


def organize_labels(store, edits):
    """Apply a batch of vocabulary edits atomically.

    Any invalid edit aborts the whole batch and the store is left exactly
    as it was.
    """
    if store.phase != "organize":
        raise PhaseError(f"label edits require phase organize, not {store.phase!r}")
    staged = deepcopy(store)
    applied = [_apply_edit(staged, e) for e in edits]
    staged._log("organize", edits=applied)
    # commit: move the staged state back onto the caller's store object
    store.__dict__.update(staged.__dict__)
    return store


def closed_annotate(store, feature_id, label_ids):
    if store.phase != "closed":
        raise PhaseError(
            f"closed annotation requires phase closed, not {store.phase!r}"
        )
    store._check_feature(feature_id)
    resolved = []
    for lid in label_ids:
        live = store.resolve(lid)
        if live not in store.vocabulary:
            raise AnnotationError(f"unknown label {lid}")
        resolved.append(live)
    store.assignments[feature_id] = sorted(set(resolved))
    store._log("closed_annotate", feature=feature_id,
               labels=sorted(set(resolved)))
    return store


@dataclass
class AnnotationImageSet:
    feature_id: int
    items: list   # [{"sample_id", "image", "overlay"}], zhat descending


def sample_annotation_images(analyses, feature_id, n,
                             image_dir="images", overlay_dir="overlays"):
    """Pick up to n samples whose ground-truth inference feature includes
    feature_id, strongest activation first.

    The analyses must have been computed with the ground-truth lookup label;
    a feature that never makes it into any e simply yields an empty set.
    """
    if n < 0:
        raise AnnotationError("n must be >= 0")
    hits = [a for a in analyses if a.e[feature_id]]
    hits.sort(key=lambda a: (-a.zhat[feature_id], a.sample_id))
    items = [
        {
            "sample_id": a.sample_id,
            "image": os.path.join(image_dir, f"{a.sample_id}.png"),
            "overlay": os.path.join(
                overlay_dir, f"rf_{a.sample_id}_{feature_id}.png"
            ),
        }
        for a in hits[:n]
    ]
    return AnnotationImageSet(feature_id=feature_id, items=items)


def auto_annotate(a_matrix, sample_attributes, threshold=0.8):
    """attribute labels per feature from activation/attribute co-occurrence.

    A feature gets an attribute when, among samples where the feature is
    activated, the attribute is present in at least `threshold` of them.
    Never-activated features get nothing. Returns (assignments, precision)
    keyed by feature id; precision holds every observed co-occurrence rate,
    assigned or not.
    """
    if not 0.0 < threshold <= 1.0:
        raise AnnotationError("threshold must be in (0, 1]")
    a_matrix = np.asarray(a_matrix)
    n, D = a_matrix.shape
    if len(sample_attributes) != n:
        raise AnnotationError(
            f"{n} activation rows but {len(sample_attributes)} attribute sets"
        )
    assignments = {}
    precision = {}
    for f in range(D):
        rows = np.flatnonzero(a_matrix[:, f])
        if rows.size == 0:
            assignments[f] = set()
            precision[f] = {}
            continue
        tally = {}
        for i in rows:
            for attr in sample_attributes[i]:
                tally[attr] = tally.get(attr, 0) + 1
        prec = {attr: cnt / rows.size for attr, cnt in tally.items()}
        assignments[f] = {attr for attr, p in prec.items() if p >= threshold}
        precision[f] = prec
    return assignments, precision


def apply_auto_annotations(store, assignments, attribute_names):
    """Drive the phase machine with oracle labels instead of a human.

    Adds one vocabulary label per attribute (in organize phase), then
    assigns them (in closed phase). The store must be fresh (open) or
    already past open.
    """
    if store.phase == "open":
        advance_phase(store, "organize")
    elif store.phase == "closed":
        advance_phase(store, "organize")
    name_to_id = {e["name"]: lid for lid, e in store.vocabulary.items()}
    edits = []
    for attr_id in sorted(attribute_names):
        name = attribute_names[attr_id]
        if name not in name_to_id:
            edits.append({"op": "add", "name": name})
    if edits:
        organize_labels(store, edits)
        name_to_id = {e["name"]: lid for lid, e in store.vocabulary.items()}
    advance_phase(store, "closed")
    for f in sorted(assignments):
        label_ids = sorted(
            name_to_id[attribute_names[attr]] for attr in assignments[f]
        )
        closed_annotate(store, f, label_ids)
    return store


def describe(analysis, store):
    """Label names for each top feature of one analyzed sample.

    Returns [(feature_id, text)] in top-feature order; a feature with no
    assigned labels reads "(unlabeled feature <id>)".
    """
    if store.phase != "closed":
        raise PhaseError(f"describe requires phase closed, not {store.phase!r}")
    out = []
    for fid, _zhat in analysis.top_features:
        ids = store.assignments.get(fid, [])
        if ids:
            names = [store.label_name(i) for i in sorted(ids)]
            out.append((fid, ", ".join(names)))
        else:
            out.append((fid, f"(unlabeled feature {fid})"))
    return out


def save_store(store, path):
    doc = {
        "feature_count": store.feature_count,
        "phase": store.phase,
        "round": store.round,
        "next_label_id": store.next_label_id,
        "vocabulary": {str(k): v for k, v in store.vocabulary.items()},
        "aliases": {str(k): v for k, v in store.aliases.items()},
        "open_texts": {str(k): v for k, v in store.open_texts.items()},
        "assignments": {str(k): v for k, v in store.assignments.items()},
        "history": store.history,
    }
    with open(path, "w") as fh:
        json.dump(doc, fh, sort_keys=True, indent=2)
        fh.write("\n")


def load_store(path):
    with open(path) as fh:
        doc = json.load(fh)
    return AnnotationStore(
        feature_count=int(doc["feature_count"]),
        phase=doc["phase"],
        round=int(doc["round"]),
        next_label_id=int(doc["next_label_id"]),
        vocabulary={int(k): v for k, v in doc["vocabulary"].items()},
        aliases={int(k): v for k, v in doc["aliases"].items()},
        open_texts={int(k): v for k, v in doc["open_texts"].items()},
        assignments={int(k): v for k, v in doc["assignments"].items()},
        history=doc["history"],
    )
