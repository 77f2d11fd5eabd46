"""Estimator-style wrappers around the engine and the feature analysis.

ConvNetClassifier and FeatureAnalyzer follow the fit/predict/transform
idiom so the pipeline composes like any other estimator stack: the
classifier turns images into a trained model, the analyzer turns images
into binary inference-feature vectors.
"""

import numpy as np
from sklearn.base import BaseEstimator, ClassifierMixin, TransformerMixin

from .analysis import (
    analyze_sample,
    binarize,
    class_frequent,
    compute_feature_stats,
    inference_feature,
    normalize,
)
from .nn.model import forward_batch, init_model, reference_layers, small_layers
from .nn.train import train_sgd
from .validation import check_image_batch, check_is_fitted, check_labels

_ARCHITECTURES = {"reference": reference_layers, "small": small_layers}


class ConvNetClassifier(BaseEstimator, ClassifierMixin):
    """Toy CNN classifier trained with plain seeded SGD.

    Parameters mirror the training knobs; fit stores the trained Model as
    model_ and exposes the usual predict/predict_proba surface.
    """

    def __init__(self, architecture="reference", epochs=20, batch_size=32,
                 learning_rate=0.02, seed=0, input_shape=(3, 32, 32)):
        self.architecture = architecture
        self.epochs = epochs
        self.batch_size = batch_size
        self.learning_rate = learning_rate
        self.seed = seed
        self.input_shape = input_shape

    def fit(self, X, y):
        if self.architecture not in _ARCHITECTURES:
            raise ValueError(
                f"architecture must be one of {sorted(_ARCHITECTURES)}"
            )
        X = check_image_batch(X, self.input_shape, name="X")
        y = np.asarray(y)
        self.classes_ = np.unique(y)
        num_classes = int(self.classes_.max()) + 1
        y = check_labels(y, num_classes)
        model = init_model(
            _ARCHITECTURES[self.architecture](), self.input_shape,
            num_classes, self.seed,
        )
        result = train_sgd(
            model, X, y, epochs=self.epochs, batch_size=self.batch_size,
            learning_rate=self.learning_rate, seed=self.seed,
        )
        self.model_ = result.model
        self.epoch_losses_ = result.epoch_losses
        self.train_accuracy_ = result.final_accuracy
        return self

    def _batched(self, X, key, batch_size=128):
        X = check_image_batch(X, self.input_shape, name="X")
        outs = []
        for start in range(0, X.shape[0], batch_size):
            outs.append(forward_batch(self.model_, X[start:start + batch_size])[key])
        return np.concatenate(outs)

    def predict(self, X):
        check_is_fitted(self, "model_")
        return self._batched(X, "predictions")

    def predict_proba(self, X):
        check_is_fitted(self, "model_")
        return self._batched(X, "softmax")

    def conv_final_features(self, X, batch_size=128):
        """Pooled conv-final activations z as an (N, D) matrix."""
        check_is_fitted(self, "model_")
        X = check_image_batch(X, self.input_shape, name="X")
        outs = []
        for start in range(0, X.shape[0], batch_size):
            cf = forward_batch(
                self.model_, X[start:start + batch_size], upto_conv_final=True
            )["conv_final"]
            outs.append(cf.max(axis=(2, 3)))
        return np.concatenate(outs)


class FeatureAnalyzer(BaseEstimator, TransformerMixin):
    """Reduces images to binary inference-feature vectors.

    fit learns the per-feature means (over the top-n-per-class statistics
    set) and the class frequent-feature table from labeled data; transform
    maps images to e vectors gated by the model's own predictions.
    """

    def __init__(self, classifier=None, gamma=2.0, k=5, l=3, stats_top_n=100):
        self.classifier = classifier
        self.gamma = gamma
        self.k = k
        self.l = l
        self.stats_top_n = stats_top_n

    def _z_probs(self, X):
        clf = self.classifier
        check_is_fitted(clf, "model_")
        return clf.conv_final_features(X), clf.predict_proba(X)

    def fit(self, X, y):
        if self.classifier is None:
            raise ValueError("FeatureAnalyzer needs a fitted classifier")
        y = np.asarray(y)
        z, probs = self._z_probs(X)
        true_probs = probs[np.arange(len(y)), y]
        num_classes = self.classifier.model_.num_classes
        self.stats_ = compute_feature_stats(
            z, y, true_probs, top_n=self.stats_top_n, num_classes=num_classes,
        )
        a = binarize(normalize(z, self.stats_), self.gamma)
        self.frequent_ = class_frequent(a, y, self.k, num_classes)
        return self

    def transform(self, X):
        """(N, D) uint8 matrix of e vectors, q looked up by prediction."""
        check_is_fitted(self, "stats_")
        z, probs = self._z_probs(X)
        zhat = normalize(z, self.stats_)
        a = binarize(zhat, self.gamma)
        preds = probs.argmax(axis=1)
        e = np.zeros_like(a)
        for i, p in enumerate(preds):
            e[i] = inference_feature(a[i], self.frequent_.q_for(int(p)))
        return e

    def analyze(self, X, sample_ids=None, lookup_labels=None):
        """Per-sample InferenceAnalysis list.

        lookup_labels None gives the test-time view (q from predictions);
        passing ground-truth labels gives the annotation-time view.
        """
        check_is_fitted(self, "stats_")
        z, probs = self._z_probs(X)
        n = z.shape[0]
        if sample_ids is None:
            sample_ids = [f"sample-{i:04d}" for i in range(n)]
        out = []
        for i in range(n):
            lookup = None if lookup_labels is None else int(lookup_labels[i])
            out.append(analyze_sample(
                sample_ids[i], z[i], probs[i], self.stats_, self.frequent_,
                self.gamma, self.l, lookup_label=lookup,
            ))
        return out
