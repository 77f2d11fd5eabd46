"""Structural feature analysis.

Reduces conv-final activations to per-sample binary feature vectors and
class-level frequent-feature tables:

    z     global max pool of the conv-final tensor
    zhat  z normalized by per-feature means over a statistics set
    a     zhat thresholded at gamma (the activated features)
    q     the k most frequently activated features of a class
    e     a AND q, with q looked up by the predicted label
    top-l the strongest entries of e by zhat

plus the two dataset-level views used to sanity-check the reduction:
per-feature activation histograms and accuracy-vs-deletion ablation curves.
"""

import json
from dataclasses import dataclass

import numpy as np

from .errors import StatsError
from .nn.model import AblationMask, forward_batch
from .validation import check_tensor


@dataclass(frozen=True)
class FeatureStats:
    """Per-feature mean activation over the statistics set."""

    mu: np.ndarray
    sample_count: int

    def __post_init__(self):
        if self.sample_count <= 0:
            raise StatsError("statistics need at least one sample")
        if np.any(self.mu < 0):
            raise StatsError("negative feature mean; expected post-relu values")


@dataclass(frozen=True)
class FrequentTable:
    """Per-class activation counts and top-k membership vectors."""

    k: int
    counts: dict     # class_id -> (D,) int64 counts
    q: dict          # class_id -> (D,) uint8, popcount == k

    def q_for(self, class_id):
        return self.q[int(class_id)]

    def feature_ids_for(self, class_id):
        """Frequent feature ids in count order (ties by lower id)."""
        counts = self.counts[int(class_id)]
        order = np.argsort(-counts, kind="stable")
        return [int(i) for i in order[:self.k]]

    def deletion_order(self, class_id):
        """All feature ids by descending activation count (ties by lower id)."""
        counts = self.counts[int(class_id)]
        return [int(i) for i in np.argsort(-counts, kind="stable")]

    def to_json_dict(self):
        return {
            "k": self.k,
            "classes": {
                str(c): {
                    "features": self.feature_ids_for(c),
                    "counts": [int(x) for x in self.counts[c]],
                }
                for c in sorted(self.counts)
            },
        }

    @classmethod
    def from_json_dict(cls, d):
        k = int(d["k"])
        counts = {}
        q = {}
        for key, entry in d["classes"].items():
            c = int(key)
            cnt = np.asarray(entry["counts"], dtype=np.int64)
            counts[c] = cnt
            vec = np.zeros(cnt.shape[0], dtype=np.uint8)
            vec[np.asarray(entry["features"], dtype=np.int64)] = 1
            q[c] = vec
        return cls(k=k, counts=counts, q=q)

    def save(self, path):
        with open(path, "w") as fh:
            json.dump(self.to_json_dict(), fh, sort_keys=True, indent=2)
            fh.write("\n")

    @classmethod
    def load(cls, path):
        with open(path) as fh:
            return cls.from_json_dict(json.load(fh))


@dataclass
class InferenceAnalysis:
    """One sample's inference, reduced to checkable structure."""

    sample_id: str
    predicted_label: int
    lookup_label: int           # class whose q was applied (prediction at test
                                # time, ground truth at annotation time)
    icr: float                  # max softmax, the model's own confidence
    zhat: np.ndarray
    a: np.ndarray
    q: np.ndarray
    e: np.ndarray
    top_features: list          # [(feature_id, zhat value)] zhat descending

    def to_json_dict(self):
        return {
            "sample_id": self.sample_id,
            "predicted_label": self.predicted_label,
            "lookup_label": self.lookup_label,
            "icr": round(self.icr, 9),
            "e_support": [int(i) for i in np.flatnonzero(self.e)],
            "top_features": [
                {"feature": fid, "zhat": round(float(v), 9)}
                for fid, v in self.top_features
            ],
        }


def global_max_pool(conv_final):
    """(D, H', W') -> (D,) per-map spatial maxima."""
    x = check_tensor(conv_final, ndim=3, name="conv_final")
    return x.max(axis=(1, 2))


def select_statistics_set(labels, true_class_probs, top_n):
    """Indices of the top-n samples per class by true-class softmax.

    top_n None takes every sample. Ties and the per-class cap are resolved
    by (probability descending, index ascending) for reproducibility.
    """
    labels = np.asarray(labels)
    probs = np.asarray(true_class_probs, dtype=np.float64)
    selected = []
    for c in sorted(set(int(v) for v in labels)):
        idx = np.flatnonzero(labels == c)
        order = idx[np.lexsort((idx, -probs[idx]))]
        if top_n is not None:
            order = order[:top_n]
        selected.extend(int(i) for i in order)
    return np.array(sorted(selected), dtype=np.int64)


def compute_feature_stats(z, labels, true_class_probs, top_n=100, num_classes=None):
    """Mean activation per feature over the top-n-per-class statistics set."""
    z = np.asarray(z, dtype=np.float64)
    labels = np.asarray(labels)
    if z.ndim != 2 or z.shape[0] != labels.shape[0]:
        raise StatsError(f"need (N, D) activations matching {labels.shape[0]} labels")
    if num_classes is not None:
        present = set(int(v) for v in labels)
        for c in range(num_classes):
            if c not in present:
                raise StatsError(f"class {c} has no samples in the statistics set")
    if z.shape[0] == 0:
        raise StatsError("statistics need at least one sample")
    sel = select_statistics_set(labels, true_class_probs, top_n)
    mu = z[sel].mean(axis=0)
    return FeatureStats(mu=mu.astype(np.float64), sample_count=int(sel.shape[0]))


def normalize(z, stats):
    """zhat_j = z_j / mu_j; dead features (mu_j = 0) stay 0."""
    z = np.asarray(z, dtype=np.float64)
    mu = stats.mu
    with np.errstate(divide="ignore", invalid="ignore"):
        zhat = np.where(mu > 0, z / mu, 0.0)
    return zhat


def binarize(zhat, gamma):
    """a_j = 1 iff zhat_j >= gamma."""
    if gamma <= 0:
        raise ValueError("gamma must be > 0")
    return (np.asarray(zhat) >= gamma).astype(np.uint8)


def class_frequent(a_matrix, labels, k, num_classes):
    """Per-class top-k activation-count membership vectors.

    Counts are plain column sums of the class's a vectors; the k largest
    counts win, ties to the lower feature index.
    """
    a_matrix = np.asarray(a_matrix)
    labels = np.asarray(labels)
    D = a_matrix.shape[1]
    if not 1 <= k <= D:
        raise ValueError(f"k must be in [1, {D}]")
    counts = {}
    q = {}
    for c in range(num_classes):
        rows = a_matrix[labels == c]
        if rows.shape[0] == 0:
            raise StatsError(f"class {c} has no samples to count")
        cnt = rows.sum(axis=0).astype(np.int64)
        order = np.argsort(-cnt, kind="stable")
        vec = np.zeros(D, dtype=np.uint8)
        vec[order[:k]] = 1
        counts[c] = cnt
        q[c] = vec
    return FrequentTable(k=k, counts=counts, q=q)


def inference_feature(a, q):
    """e = a AND q, elementwise."""
    a = np.asarray(a, dtype=np.uint8)
    q = np.asarray(q, dtype=np.uint8)
    if a.shape != q.shape:
        raise ValueError(f"a shape {a.shape} != q shape {q.shape}")
    return a * q


def top_l(e, zhat, l):
    """Feature ids with e_j = 1, by zhat descending (ties to lower id), first l."""
    if l < 1:
        raise ValueError("l must be >= 1")
    e = np.asarray(e)
    zhat = np.asarray(zhat, dtype=np.float64)
    ids = np.flatnonzero(e)
    order = ids[np.lexsort((ids, -zhat[ids]))]
    return [(int(i), float(zhat[i])) for i in order[:l]]


def activation_histogram(z, feature_id, bins=20, value_range=None):
    """Histogram of one feature's z over samples; counts sum to sample count."""
    z = np.asarray(z, dtype=np.float64)
    if bins < 1:
        raise ValueError("bins must be >= 1")
    col = z[:, feature_id]
    counts, edges = np.histogram(col, bins=bins, range=value_range)
    return counts, edges


def analyze_sample(sample_id, z, probs, stats, frequent, gamma, l,
                   lookup_label=None):
    """Full structural reduction of one sample's inference.

    lookup_label picks whose frequent features gate e: None uses the
    prediction (test time); passing the ground-truth label gives the
    annotation-time view.
    """
    zhat = normalize(z, stats)
    a = binarize(zhat, gamma)
    predicted = int(np.argmax(probs))
    lookup = predicted if lookup_label is None else int(lookup_label)
    q = frequent.q_for(lookup)
    e = inference_feature(a, q)
    return InferenceAnalysis(
        sample_id=sample_id,
        predicted_label=predicted,
        lookup_label=lookup,
        icr=float(np.max(probs)),
        zhat=zhat,
        a=a,
        q=q,
        e=e,
        top_features=top_l(e, zhat, l),
    )


def ablation_curve(model, images, labels, class_id, mode, max_deleted,
                   frequent=None, trials=10, seed=0, batch_size=128):
    """Accuracy on class_id's samples as conv-final maps are zeroed.

    mode "frequent" deletes that class's maps in descending activation-count
    order (needs a FrequentTable); mode "random" averages `trials` seeded
    draws of deletion sets. Returns a list of max_deleted + 1 accuracies.
    """
    D = model.feature_dim
    if max_deleted > D:
        raise ValueError(f"max_deleted {max_deleted} > feature dim {D}")
    if mode not in ("random", "frequent"):
        raise ValueError(f"mode must be random or frequent, not {mode!r}")
    labels = np.asarray(labels)
    X = np.asarray(images)[labels == class_id]
    if X.shape[0] == 0:
        raise StatsError(f"class {class_id} has no evaluation samples")

    def accuracy(mask):
        hits = 0
        for start in range(0, X.shape[0], batch_size):
            out = forward_batch(model, X[start:start + batch_size], mask=mask)
            hits += int(np.sum(out["predictions"] == class_id))
        return hits / X.shape[0]

    if mode == "frequent":
        if frequent is None:
            raise ValueError("frequent mode needs a FrequentTable")
        order = frequent.deletion_order(class_id)
        return [
            accuracy(AblationMask(order[:d]) if d else None)
            for d in range(max_deleted + 1)
        ]

    curve = []
    for d in range(max_deleted + 1):
        if d == 0:
            curve.append(accuracy(None))
            continue
        acc = 0.0
        for t in range(trials):
            rng = np.random.default_rng((seed, t, d))
            picked = rng.choice(D, size=d, replace=False)
            acc += accuracy(AblationMask(picked))
        curve.append(acc / trials)
    return curve


def export_analyses(path, analyses):
    """InferenceAnalysis list -> one stable JSON document."""
    doc = {"samples": [a.to_json_dict() for a in analyses]}
    with open(path, "w") as fh:
        json.dump(doc, fh, sort_keys=True, indent=2)
        fh.write("\n")
