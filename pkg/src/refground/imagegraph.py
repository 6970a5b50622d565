"""Object lists, box geometry features, and the k-NN image graph.

Boxes are [x, y, w, h] in normalized coordinates (fractions of image size) with
the origin at the top-left corner. Files may carry pixel boxes; they are
normalized at load time using the recorded image size.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field, replace

import numpy as np

from .errors import SchemaError, ValidationError
from .util import derive_seed

DEFAULT_NEIGHBORS = 5


@dataclass
class ObjectRecord:
    """One detected or synthesized object in a scene."""

    id: int
    box: tuple
    class_label: str
    attributes: tuple = ()
    feature: np.ndarray | None = None

    def to_dict(self):
        out = {
            "id": self.id,
            "box": [float(v) for v in self.box],
            "class": self.class_label,
            "attributes": list(self.attributes),
        }
        if self.feature is not None:
            out["feature"] = [float(v) for v in self.feature]
        return out


def _check_box(box, where, normalized):
    if len(box) != 4:
        raise ValidationError(f"{where}: box must have 4 entries")
    x, y, w, h = (float(v) for v in box)
    if w <= 0.0 or h <= 0.0:
        raise ValidationError(f"{where}: box width and height must be positive")
    if normalized and not (
        -1e-9 <= x and -1e-9 <= y and x + w <= 1.0 + 1e-6 and y + h <= 1.0 + 1e-6
    ):
        raise ValidationError(f"{where}: normalized box out of the unit square")
    return (x, y, w, h)


def object_from_dict(entry, where="object", normalized=True, image_size=None):
    if not isinstance(entry, dict):
        raise SchemaError(f"{where}: expected a mapping")
    try:
        oid = int(entry["id"])
        box = list(entry["box"])
        cls = str(entry["class"])
    except (KeyError, TypeError, ValueError) as exc:
        raise SchemaError(f"{where}: missing or malformed field ({exc})")
    if not normalized:
        if not image_size:
            raise SchemaError(f"{where}: pixel boxes need an image size")
        width, height = image_size
        box = [box[0] / width, box[1] / height, box[2] / width, box[3] / height]
    box = _check_box(box, where, normalized=True)
    attributes = tuple(str(a) for a in entry.get("attributes", ()))
    feature = entry.get("feature")
    if feature is not None:
        feature = np.asarray(feature, dtype=np.float64)
        if feature.ndim != 1:
            raise ValidationError(f"{where}: feature must be a flat vector")
    return ObjectRecord(oid, box, cls, attributes, feature)


def parse_objects_payload(payload, where="objects file"):
    """Validate the objects-file mapping and return its ObjectRecords."""
    if not isinstance(payload, dict):
        raise SchemaError(f"{where}: expected a JSON object")
    entries = payload.get("objects")
    if not isinstance(entries, list) or not entries:
        raise ValidationError(f"{where}: 'objects' must be a non-empty list")
    normalized = bool(payload.get("boxes_normalized", True))
    image_size = None
    if not normalized:
        try:
            image_size = (float(payload["width"]), float(payload["height"]))
        except (KeyError, TypeError, ValueError):
            raise SchemaError(f"{where}: pixel boxes need numeric width/height")
    objects = []
    seen = set()
    for idx, entry in enumerate(entries):
        rec = object_from_dict(entry, f"{where}, objects[{idx}]", normalized, image_size)
        if rec.id in seen:
            raise ValidationError(f"{where}: duplicate object id {rec.id}")
        seen.add(rec.id)
        objects.append(rec)
    return objects


def load_objects(path):
    try:
        with open(path, "r", encoding="utf-8") as fh:
            payload = json.load(fh)
    except FileNotFoundError:
        raise SchemaError(f"objects file not found: {path}")
    except json.JSONDecodeError as exc:
        raise SchemaError(f"objects file is not valid JSON: {exc}")
    return parse_objects_payload(payload, where=str(path))


def spatial_feature(box):
    """[x, y, w, h, w*h] for a normalized box."""
    x, y, w, h = (float(v) for v in box)
    return np.array([x, y, w, h, w * h])


def rel_spatial_feature(box_i, box_j):
    """Geometry of box j expressed in the frame of box i.

    Offsets of j's corners from i's center, scaled by i's size, plus the area
    ratio. Identical boxes give [-1/2, -1/2, 1/2, 1/2, 1].
    """
    xi, yi, wi, hi = (float(v) for v in box_i)
    xj, yj, wj, hj = (float(v) for v in box_j)
    cx = xi + wi / 2.0
    cy = yi + hi / 2.0
    return np.array(
        [
            (xj - cx) / wi,
            (yj - cy) / hi,
            (xj + wj - cx) / wi,
            (yj + hj - cy) / hi,
            (wj * hj) / (wi * hi),
        ]
    )


def box_center(box):
    x, y, w, h = (float(v) for v in box)
    return np.array([x + w / 2.0, y + h / 2.0])


@dataclass
class ImageSemanticGraph:
    """Objects plus directed neighbor edges; edge (i, j) points from j to i."""

    objects: list
    edges: list
    receivers: np.ndarray = field(repr=False)
    senders: np.ndarray = field(repr=False)
    edge_geometry: np.ndarray = field(repr=False)

    def __len__(self):
        return len(self.objects)

    def spatial_matrix(self):
        return np.stack([spatial_feature(o.box) for o in self.objects])

    def feature_matrix(self):
        feats = []
        for o in self.objects:
            if o.feature is None:
                raise ValidationError(f"object {o.id} has no feature vector")
            feats.append(o.feature)
        width = len(feats[0])
        for o, f in zip(self.objects, feats):
            if len(f) != width:
                raise ValidationError(f"object {o.id}: feature width {len(f)} != {width}")
        return np.stack(feats)

    def sender_feature_matrix(self):
        feats = self.feature_matrix()
        return feats[self.senders] if len(self.senders) else feats[:0]


def build_graph(objects, k=DEFAULT_NEIGHBORS):
    """Connect every object to its min(k, N-1) nearest others by center distance.

    Candidate order is (distance, object id), so equidistant neighbors resolve
    to the smaller id. Edges are emitted grouped by receiver in input order.
    """
    if not objects:
        raise ValidationError("build_graph needs at least one object")
    if k < 0:
        raise ValidationError("neighbor count k must be non-negative")
    centers = np.stack([box_center(o.box) for o in objects])
    ids = [o.id for o in objects]
    n = len(objects)
    edges = []
    for i in range(n):
        cands = []
        for j in range(n):
            if j == i:
                continue
            d = float(np.hypot(*(centers[i] - centers[j])))
            cands.append((d, ids[j], j))
        cands.sort()
        for _, _, j in cands[: min(k, n - 1)]:
            edges.append((i, j))
    receivers = np.array([e[0] for e in edges], dtype=np.intp)
    senders = np.array([e[1] for e in edges], dtype=np.intp)
    if edges:
        geometry = np.stack(
            [rel_spatial_feature(objects[i].box, objects[j].box) for i, j in edges]
        )
    else:
        geometry = np.zeros((0, 5))
    return ImageSemanticGraph(list(objects), edges, receivers, senders, geometry)


def class_anchor(class_label, dim, seed):
    """Fixed unit-sphere direction for a class, stable across processes."""
    rng = np.random.default_rng(derive_seed("class-anchor", seed, class_label))
    v = rng.standard_normal(dim)
    return v / np.linalg.norm(v)


def synth_features(objects, dim, noise, seed):
    """Class anchor plus Gaussian noise per object; deterministic given seed."""
    if dim <= 0:
        raise ValidationError("feature dim must be positive")
    out = []
    for index, obj in enumerate(objects):
        rng = np.random.default_rng(derive_seed("synth-noise", seed, index, obj.id))
        feature = class_anchor(obj.class_label, dim, seed) + noise * rng.standard_normal(dim)
        out.append(replace(obj, feature=feature))
    return out
