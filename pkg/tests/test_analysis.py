"""Structural feature analysis, validated by independent recounts."""

import json

import numpy as np
import pytest

from glassbox.analysis import (
    FrequentTable,
    ablation_curve,
    activation_histogram,
    analyze_sample,
    binarize,
    class_frequent,
    compute_feature_stats,
    inference_feature,
    normalize,
    select_statistics_set,
    top_l,
)
from glassbox.errors import StatsError

rng = np.random.default_rng(21)


def brute_frequent_counts(a_matrix, labels, num_classes):
    """Count, per class, how many samples activate each feature."""
    D = a_matrix.shape[1]
    counts = np.zeros((num_classes, D), dtype=int)
    for row, label in zip(a_matrix, labels):
        for f in range(D):
            if row[f]:
                counts[label, f] += 1
    return counts


def test_mu_is_mean_over_statistics_set():
    z = rng.random((30, 6))
    labels = rng.integers(0, 3, size=30)
    probs = rng.random(30)
    stats = compute_feature_stats(z, labels, probs, top_n=None, num_classes=3)
    np.testing.assert_allclose(stats.mu, z.mean(axis=0), atol=1e-12)
    assert stats.sample_count == 30


def test_top_n_selection_prefers_confident_samples():
    z = rng.random((12, 4))
    labels = np.array([0, 0, 0, 0, 1, 1, 1, 1, 2, 2, 2, 2])
    probs = np.array([.9, .1, .8, .2, .5, .6, .7, .4, .99, .98, .97, .96])
    sel = select_statistics_set(labels, probs, top_n=2)
    # brute force: two most confident per class
    want = set()
    for c in range(3):
        idx = [i for i in range(12) if labels[i] == c]
        idx.sort(key=lambda i: -probs[i])
        want.update(idx[:2])
    assert set(int(i) for i in sel) == want


def test_stats_require_every_class():
    z = rng.random((4, 3))
    labels = np.array([0, 0, 1, 1])
    with pytest.raises(StatsError):
        compute_feature_stats(z, labels, np.ones(4), top_n=None, num_classes=3)


def test_normalize_divides_by_mu_and_zeroes_dead_features():
    z = np.array([[2.0, 5.0, 1.0], [4.0, 0.0, 1.0]])
    stats = compute_feature_stats(z, np.zeros(2, dtype=int), np.ones(2),
                                  top_n=None, num_classes=1)
    zhat = normalize(z, stats)
    np.testing.assert_allclose(zhat[:, 0], z[:, 0] / 3.0)
    # feature 2 has mu == 1 -> unchanged; a dead feature (mu == 0) maps to 0
    dead = np.zeros((2, 2))
    dead_stats = compute_feature_stats(dead, np.zeros(2, dtype=int),
                                       np.ones(2), top_n=None, num_classes=1)
    np.testing.assert_array_equal(normalize(dead, dead_stats), dead)


def test_binarize_is_a_closed_threshold():
    zhat = np.array([[2.0, 1.999999, 0.0, 7.3]])
    a = binarize(zhat, gamma=2.0)
    np.testing.assert_array_equal(a, [[1, 0, 0, 1]])
    with pytest.raises(ValueError):
        binarize(zhat, gamma=0.0)


def test_binarization_is_invariant_to_feature_rescaling():
    # z -> c * z rescales mu by c, so zhat and a are unchanged (c > 0)
    z = rng.random((40, 5)) * 3
    labels = rng.integers(0, 2, size=40)
    scale = np.array([0.1, 1.0, 10.0, 100.0, 7.0])
    s1 = compute_feature_stats(z, labels, np.ones(40), top_n=None,
                               num_classes=2)
    s2 = compute_feature_stats(z * scale, labels, np.ones(40), top_n=None,
                               num_classes=2)
    a1 = binarize(normalize(z, s1), 2.0)
    a2 = binarize(normalize(z * scale, s2), 2.0)
    np.testing.assert_array_equal(a1, a2)


def test_class_frequent_matches_brute_counts():
    a = rng.integers(0, 2, size=(60, 9)).astype(np.uint8)
    labels = rng.integers(0, 4, size=60)
    table = class_frequent(a, labels, k=3, num_classes=4)
    counts = brute_frequent_counts(a, labels, 4)
    for c in range(4):
        np.testing.assert_array_equal(table.counts[c], counts[c])
        assert table.q[c].sum() == 3
        picked = table.feature_ids_for(c)
        # every picked feature counts at least as much as every skipped one
        floor = counts[c][picked].min()
        skipped = [f for f in range(9) if f not in picked]
        assert all(counts[c][f] <= floor for f in skipped)


def test_class_frequent_breaks_ties_toward_lower_ids():
    a = np.ones((4, 5), dtype=np.uint8)  # all counts equal
    labels = np.zeros(4, dtype=int)
    table = class_frequent(a, labels, k=2, num_classes=1)
    assert table.feature_ids_for(0) == [0, 1]
    np.testing.assert_array_equal(table.q[0], [1, 1, 0, 0, 0])


def test_worked_frequency_example():
    # five features; class activates features 0, 2, 4 most often; k=3
    a = np.array([
        [1, 0, 1, 0, 1],
        [1, 1, 1, 0, 1],
        [1, 0, 1, 1, 1],
        [1, 0, 1, 0, 1],
    ], dtype=np.uint8)
    table = class_frequent(a, np.zeros(4, dtype=int), k=3, num_classes=1)
    np.testing.assert_array_equal(table.q_for(0), [1, 0, 1, 0, 1])


def test_inference_feature_is_elementwise_and():
    for _ in range(1000):
        a = rng.integers(0, 2, size=64).astype(np.uint8)
        q = rng.integers(0, 2, size=64).astype(np.uint8)
        e = inference_feature(a, q)
        np.testing.assert_array_equal(e, a & q)
        assert e.sum() <= min(a.sum(), q.sum())


def test_top_l_orders_by_zhat_then_id():
    e = np.array([1, 1, 0, 1, 1], dtype=np.uint8)
    zhat = np.array([3.0, 5.0, 9.0, 5.0, 0.5])
    assert top_l(e, zhat, 3) == [(1, 5.0), (3, 5.0), (0, 3.0)]
    assert top_l(e, zhat, 10) == [(1, 5.0), (3, 5.0), (0, 3.0), (4, 0.5)]
    assert top_l(np.zeros(5, dtype=np.uint8), zhat, 3) == []


def test_activation_histogram_counts_every_sample():
    z = rng.random((50, 3))
    counts, edges = activation_histogram(z, 1, bins=8)
    assert counts.sum() == 50
    assert len(edges) == 9
    recount, _ = np.histogram(z[:, 1], bins=8)
    np.testing.assert_array_equal(counts, recount)


def test_frequent_table_round_trip(tmp_path):
    a = rng.integers(0, 2, size=(30, 7)).astype(np.uint8)
    labels = rng.integers(0, 3, size=30)
    table = class_frequent(a, labels, k=4, num_classes=3)
    p = tmp_path / "frequent.json"
    table.save(str(p))
    loaded = FrequentTable.load(str(p))
    assert loaded.k == table.k
    for c in range(3):
        np.testing.assert_array_equal(loaded.counts[c], table.counts[c])
        np.testing.assert_array_equal(loaded.q[c], table.q[c])
        assert loaded.deletion_order(c) == table.deletion_order(c)
    # file content is stable
    table.save(str(tmp_path / "again.json"))
    assert (tmp_path / "frequent.json").read_bytes() == \
        (tmp_path / "again.json").read_bytes()


def test_analyze_sample_uses_prediction_unless_told_otherwise():
    z = np.array([4.0, 0.1, 6.0, 3.0])
    mu = np.ones(4)
    stats = compute_feature_stats(
        np.tile(mu, (4, 1)), np.arange(2).repeat(2), np.ones(4),
        top_n=None, num_classes=2,
    )
    a = np.array([[1, 0, 1, 0], [1, 0, 1, 0],
                  [0, 0, 1, 1], [0, 0, 1, 1]], dtype=np.uint8)
    table = class_frequent(a, np.arange(2).repeat(2), k=2, num_classes=2)
    probs = np.array([0.2, 0.8])

    got = analyze_sample("s1", z, probs, stats, table, gamma=2.0, l=2)
    assert got.predicted_label == 1 and got.lookup_label == 1
    assert got.icr == pytest.approx(0.8)
    np.testing.assert_array_equal(got.q, table.q_for(1))
    np.testing.assert_array_equal(got.e, got.a & got.q)

    forced = analyze_sample("s1", z, probs, stats, table, gamma=2.0, l=2,
                            lookup_label=0)
    assert forced.predicted_label == 1 and forced.lookup_label == 0
    np.testing.assert_array_equal(forced.q, table.q_for(0))


def test_analysis_json_is_stable_and_complete():
    z = np.array([4.0, 0.1, 6.0, 3.0])
    stats = compute_feature_stats(np.ones((2, 4)), np.arange(2), np.ones(2),
                                  top_n=None, num_classes=2)
    table = class_frequent(np.ones((2, 4), dtype=np.uint8), np.arange(2),
                           k=2, num_classes=2)
    got = analyze_sample("s9", z, np.array([0.7, 0.3]), stats, table,
                         gamma=2.0, l=2)
    d = got.to_json_dict()
    assert d["sample_id"] == "s9"
    assert json.dumps(d, sort_keys=True) == json.dumps(
        got.to_json_dict(), sort_keys=True)
    assert set(d["e_support"]) == {i for i, v in enumerate(got.e) if v}


def test_frequent_ablation_curve_matches_manual_masking(tiny_ctx):
    from glassbox.data.synth import stack_images
    from glassbox.nn import AblationMask, forward_batch

    model, table = tiny_ctx.model, tiny_ctx.frequent
    X = stack_images(tiny_ctx.test)
    y = tiny_ctx.yte
    cls = 0
    curve = ablation_curve(model, X, y, cls, "frequent", max_deleted=3,
                           frequent=table)
    assert len(curve) == 4
    order = table.deletion_order(cls)
    members = y == cls
    for d, got in enumerate(curve):
        mask = AblationMask(frozenset(order[:d]))
        probs = forward_batch(model, X[members], mask=mask)["softmax"]
        want = float((probs.argmax(axis=1) == cls).mean())
        assert got == pytest.approx(want)


def test_random_ablation_curve_is_seeded(tiny_ctx):
    from glassbox.data.synth import stack_images

    X = stack_images(tiny_ctx.test)
    y = tiny_ctx.yte
    a = ablation_curve(tiny_ctx.model, X, y, 1, "random", max_deleted=3,
                       trials=2, seed=5)
    b = ablation_curve(tiny_ctx.model, X, y, 1, "random", max_deleted=3,
                       trials=2, seed=5)
    c = ablation_curve(tiny_ctx.model, X, y, 1, "random", max_deleted=3,
                       trials=2, seed=6)
    assert a == b
    assert a[0] == c[0]  # zero deletions share the unmasked model
    assert all(0.0 <= v <= 1.0 for v in a)


def test_ablation_curve_rejects_overdeep_deletion(tiny_ctx):
    from glassbox.data.synth import stack_images

    X = stack_images(tiny_ctx.test)
    with pytest.raises(ValueError):
        ablation_curve(tiny_ctx.model, X, tiny_ctx.yte, 0, "frequent",
                       max_deleted=tiny_ctx.model.feature_dim + 1,
                       frequent=tiny_ctx.frequent)
