"""Geometry features and k-NN graph construction."""

import numpy as np
import pytest

from refground.errors import SchemaError, ValidationError
from refground.imagegraph import (
    ImageSemanticGraph,
    ObjectRecord,
    build_graph,
    class_anchor,
    parse_objects_payload,
    rel_spatial_feature,
    spatial_feature,
    synth_features,
)
from oracles import knn_edges_bruteforce


def obj(i, x, y, w=0.1, h=0.1, cls="thing", attrs=()):
    return ObjectRecord(i, (x, y, w, h), cls, tuple(attrs))


def test_spatial_feature_values():
    got = spatial_feature((0.0, 0.0, 0.01, 0.01))
    assert np.allclose(got, [0.0, 0.0, 0.01, 0.01, 0.0001])


def test_spatial_feature_from_pixel_payload():
    payload = {
        "boxes_normalized": False,
        "width": 100,
        "height": 100,
        "objects": [{"id": 0, "box": [0, 0, 1, 1], "class": "dot"}],
    }
    objects = parse_objects_payload(payload)
    assert np.allclose(spatial_feature(objects[0].box), [0, 0, 0.01, 0.01, 0.0001])


def test_rel_spatial_feature_identical_boxes():
    box = (0.2, 0.3, 0.4, 0.2)
    got = rel_spatial_feature(box, box)
    assert np.allclose(got, [-0.5, -0.5, 0.5, 0.5, 1.0])


def test_rel_spatial_feature_translation():
    a = (0.0, 0.0, 0.2, 0.2)
    b = (0.2, 0.0, 0.2, 0.2)  # same size, directly to the right
    got = rel_spatial_feature(a, b)
    assert np.allclose(got, [0.5, -0.5, 1.5, 0.5, 1.0])


def test_build_graph_collinear_matches_bruteforce():
    objects = [obj(i, 0.1 * i, 0.5) for i in range(6)]
    g = build_graph(objects, k=5)
    want = knn_edges_bruteforce([(0.1 * i + 0.05, 0.55) for i in range(6)], list(range(6)), 5)
    assert set(g.edges) == want
    assert len(g.edges) == 6 * 5


def test_build_graph_random_matches_bruteforce():
    rng = np.random.default_rng(17)
    for trial in range(25):
        n = int(rng.integers(1, 10))
        k = int(rng.integers(0, 7))
        objects = [
            obj(i, float(rng.uniform(0, 0.9)), float(rng.uniform(0, 0.9)))
            for i in range(n)
        ]
        g = build_graph(objects, k=k)
        centers = [(o.box[0] + 0.05, o.box[1] + 0.05) for o in objects]
        assert set(g.edges) == knn_edges_bruteforce(centers, list(range(n)), k)


def test_build_graph_indegree_and_no_self_edges():
    rng = np.random.default_rng(4)
    for _ in range(20):
        n = int(rng.integers(2, 12))
        objects = [
            obj(i, float(rng.uniform(0, 0.9)), float(rng.uniform(0, 0.9)))
            for i in range(n)
        ]
        g = build_graph(objects, k=5)
        indeg = {i: 0 for i in range(n)}
        for i, j in g.edges:
            assert i != j
            indeg[i] += 1
        assert all(v == min(5, n - 1) for v in indeg.values())


def test_build_graph_tie_breaks_by_smaller_id():
    # two candidates exactly equidistant from the receiver
    objects = [
        ObjectRecord(10, (0.4, 0.4, 0.2, 0.2), "c"),
        ObjectRecord(7, (0.0, 0.4, 0.2, 0.2), "l"),
        ObjectRecord(9, (0.8, 0.4, 0.2, 0.2), "r"),
    ]
    g = build_graph(objects, k=1)
    picked = [j for i, j in g.edges if i == 0]
    assert picked == [1]  # id 7 beats id 9 at equal distance


def test_build_graph_permutation_covariance():
    rng = np.random.default_rng(23)
    objects = [
        obj(i, float(rng.uniform(0, 0.85)), float(rng.uniform(0, 0.85)))
        for i in range(8)
    ]
    g = build_graph(objects, k=3)
    perm = list(rng.permutation(8))
    relabeled = [
        ObjectRecord(pos, objects[j].box, objects[j].class_label)
        for pos, j in enumerate(perm)
    ]
    g2 = build_graph(relabeled, k=3)
    inv = {j: pos for pos, j in enumerate(perm)}
    assert set(g2.edges) == {(inv[i], inv[j]) for i, j in g.edges}


def test_build_graph_single_object_and_empty():
    g = build_graph([obj(0, 0.1, 0.1)], k=5)
    assert g.edges == []
    assert g.edge_geometry.shape == (0, 5)
    with pytest.raises(ValidationError):
        build_graph([], k=5)


def test_edge_geometry_matches_formula():
    objects = [obj(0, 0.1, 0.2, 0.2, 0.2), obj(1, 0.5, 0.1, 0.1, 0.3)]
    g = build_graph(objects, k=1)
    for (i, j), row in zip(g.edges, g.edge_geometry):
        assert np.allclose(row, rel_spatial_feature(objects[i].box, objects[j].box))


def test_synth_features_deterministic_and_class_anchored():
    objects = [obj(0, 0.1, 0.1, cls="cup"), obj(1, 0.5, 0.5, cls="cup"),
               obj(2, 0.7, 0.2, cls="lamp")]
    a = synth_features(objects, dim=16, noise=0.1, seed=5)
    b = synth_features(objects, dim=16, noise=0.1, seed=5)
    for x, y in zip(a, b):
        assert np.array_equal(x.feature, y.feature)
    anchor = class_anchor("cup", 16, seed=5)
    assert np.linalg.norm(anchor) == pytest.approx(1.0)
    # same class, different objects: same anchor, different noise
    assert np.linalg.norm(a[0].feature - anchor) < 0.1 * 16
    assert not np.array_equal(a[0].feature, a[1].feature)
    clean = synth_features(objects, dim=16, noise=0.0, seed=5)
    assert np.array_equal(clean[0].feature, clean[1].feature)
    assert not np.array_equal(clean[0].feature, clean[2].feature)


def test_synth_features_seed_changes_noise():
    objects = [obj(0, 0.1, 0.1, cls="cup")]
    a = synth_features(objects, dim=8, noise=0.1, seed=1)[0]
    b = synth_features(objects, dim=8, noise=0.1, seed=2)[0]
    assert not np.array_equal(a.feature, b.feature)


def test_payload_validation_errors():
    with pytest.raises(ValidationError):
        parse_objects_payload({"objects": []})
    with pytest.raises(ValidationError):
        parse_objects_payload(
            {"objects": [{"id": 0, "box": [0, 0, 0.0, 0.1], "class": "x"}]}
        )
    with pytest.raises(ValidationError):
        parse_objects_payload(
            {
                "objects": [
                    {"id": 0, "box": [0, 0, 0.1, 0.1], "class": "x"},
                    {"id": 0, "box": [0.2, 0, 0.1, 0.1], "class": "y"},
                ]
            }
        )
    with pytest.raises(SchemaError):
        parse_objects_payload({"objects": [{"box": [0, 0, 0.1, 0.1]}]})
    with pytest.raises(ValidationError):
        parse_objects_payload(
            {"objects": [{"id": 0, "box": [0.95, 0, 0.2, 0.1], "class": "x"}]}
        )


def test_feature_matrix_requires_features():
    g = build_graph([obj(0, 0.1, 0.1), obj(1, 0.3, 0.3)], k=1)
    with pytest.raises(ValidationError):
        g.feature_matrix()
    g2 = build_graph(synth_features(g.objects, 8, 0.0, 3), k=1)
    assert g2.feature_matrix().shape == (2, 8)
    assert g2.sender_feature_matrix().shape == (len(g2.edges), 8)
