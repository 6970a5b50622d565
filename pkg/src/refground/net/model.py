"""The grounding network: five differentiable modules driven by the language
graph, evaluated bottom-up over the image graph.

Leaf nodes attend objects from their own phrase. Nodes with modifiers are
processed once per incoming edge from a full subject-relation-object word
sequence; the modifier's attention map rides along attended image edges
(Transfer), the per-edge maps are combined (Merge), and maps are rescaled into
[-1, 1] (Norm) wherever enabled.
"""

from __future__ import annotations

import heapq
import json
from dataclasses import dataclass

import numpy as np

from .. import kernel as K
from ..errors import SchemaError, StructureError, UsageError
from ..util import atomic_write_text, derive_seed
from .config import ModelConfig
from .trace import ReasoningTrace
from .vocab import Vocabulary


def init_params(config, vocab_size, seed):
    """Register every trainable tensor in a fixed order under one seeded RNG."""
    config.validate()
    if vocab_size < 1:
        raise UsageError("vocabulary must contain at least the unknown token")
    rng = np.random.default_rng(derive_seed("model-init", seed))
    store = K.ParamStore()
    e, h, m = config.embedding_dim, config.lstm_hidden, config.mlp_hidden
    store.add("embed", K.uniform_init(rng, (vocab_size, e), 1.0 / np.sqrt(e)))
    K.init_bilstm(store, "lstm", e, h, rng)
    kc = 1.0 / np.sqrt(2 * h)
    for head in ("look", "loc", "rel"):
        store.add(f"attn.{head}", K.uniform_init(rng, (2 * h,), kc))
    for gate in ("look", "loc", "rel"):
        store.add(f"gate.{gate}.w", K.uniform_init(rng, (2 * h,), kc))
        store.add(f"gate.{gate}.b", K.uniform_init(rng, (), kc))
    store.add("geom.proj", K.uniform_init(rng, (5, config.geometry_proj), 1.0 / np.sqrt(5)))
    K.init_mlp(store, "mlp.obj", [config.feature_dim, m, m], rng)
    K.init_mlp(store, "mlp.look", [e, m, m], rng)
    K.init_mlp(store, "mlp.spatial", [5, m, m], rng)
    K.init_mlp(store, "mlp.loc", [e, m, m], rng)
    K.init_mlp(store, "mlp.edge", [config.geometry_proj + config.feature_dim, m, m], rng)
    K.init_mlp(store, "mlp.rel", [e, m, m], rng)
    return store


@dataclass
class PhraseEncoding:
    """Bi-LSTM contexts stacked as a matrix plus embeddings stacked as columns."""

    contexts: K.Tensor  # [T, 2h]
    summary: K.Tensor  # [2h]
    emb_cols: K.Tensor  # [e, T]


def encode_phrase(store, vocab, words):
    if not words:
        raise UsageError("cannot encode an empty phrase")
    embs = [K.row(store["embed"], vocab.encode(w)) for w in words]
    contexts, summary = K.bilstm_encode(store, "lstm", embs)
    return PhraseEncoding(K.stack_rows(contexts), summary, K.stack_cols(embs))


def word_attention(store, head, enc):
    """Softmax head over contexts; returns (weights, attended embedding)."""
    scores = K.matmul(enc.contexts, store[f"attn.{head}"])
    alpha = K.softmax(scores)
    return alpha, K.matmul(enc.emb_cols, alpha)


def gate_value(store, name, summary):
    z = K.add(K.dot(store[f"gate.{name}.w"], summary), store[f"gate.{name}.b"])
    return K.sigmoid(z)


class SceneEncoding:
    """Per-forward object/edge key matrices shared by every language node."""

    def __init__(self, graph, store, config, need_edges):
        self.graph = graph
        self.size = len(graph)
        feats = K.Tensor(graph.feature_matrix())
        if feats.data.shape[1] != config.feature_dim:
            raise SchemaError(
                f"scene features are {feats.data.shape[1]}-dim, "
                f"model expects {config.feature_dim}"
            )
        spatial = K.Tensor(graph.spatial_matrix())
        self.object_keys = K.l2_normalize_rows(K.mlp_apply(store, "mlp.obj", feats))
        self.spatial_keys = K.l2_normalize_rows(K.mlp_apply(store, "mlp.spatial", spatial))
        self.edge_keys = None
        if need_edges:
            geom = K.matmul(K.Tensor(graph.edge_geometry), store["geom.proj"])
            senders = K.Tensor(graph.sender_feature_matrix())
            raw = K.concat_cols([geom, senders])
            self.edge_keys = K.l2_normalize_rows(K.mlp_apply(store, "mlp.edge", raw))


def attend_node(scene, store, v_look, v_loc):
    """Cosine match of every object against appearance and location queries."""
    q_look = K.l2_normalize(K.mlp_apply(store, "mlp.look", v_look))
    q_loc = K.l2_normalize(K.mlp_apply(store, "mlp.loc", v_loc))
    return (
        K.matmul(scene.object_keys, q_look),
        K.matmul(scene.spatial_keys, q_loc),
    )


def attend_relation(scene, store, v_rel):
    """Non-negative per-image-edge match against the relation query."""
    q_rel = K.l2_normalize(K.mlp_apply(store, "mlp.rel", v_rel))
    return K.relu(K.matmul(scene.edge_keys, q_rel))


def transfer(scene, gamma, lam):
    """Move attention along weighted image edges onto the receiving objects."""
    return K.edge_transfer(gamma, scene.graph.receivers, scene.graph.senders, lam, scene.size)


def merge(maps, mode="sum"):
    """Combine attention maps from several edges into one."""
    if not maps:
        raise UsageError("merge needs at least one attention map")
    if mode == "sum":
        return maps[0] if len(maps) == 1 else K.add_n(maps)
    if mode not in ("max", "min"):
        raise UsageError(f"unknown merge mode {mode!r}")
    out = maps[0]
    fold = K.maximum if mode == "max" else K.minimum
    for m in maps[1:]:
        out = fold(out, m)
    return out


def norm(x):
    """Rescale by the largest magnitude only when it exceeds one."""
    return K.norm_cap(x)


def inference_order(graph):
    """Topological order of modifier arrows; ties resolve to the smaller id.

    Every node appears after all of its modifiers, so a node's incoming maps
    are ready when it is processed.
    """
    remaining = {n.id: len(graph.modifier_edges(n.id)) for n in graph.nodes}
    out = {n.id: [] for n in graph.nodes}
    for e in graph.edges:
        out[e.object].append(e.subject)
    ready = [i for i, c in remaining.items() if c == 0]
    heapq.heapify(ready)
    order = []
    while ready:
        i = heapq.heappop(ready)
        order.append(i)
        for j in out[i]:
            remaining[j] -= 1
            if remaining[j] == 0:
                heapq.heappush(ready, j)
    if len(order) != len(graph.nodes):
        raise StructureError("rule graph-cyclic: no topological order exists")
    return order


def _combine(terms, config, trace):
    combined = K.add_n(terms) if len(terms) > 1 else terms[0]
    if config.enable_norm:
        trace.module_calls.append("norm")
        combined = norm(combined)
    return combined


def process_leaf(scene, store, config, vocab, node, trace):
    enc = encode_phrase(store, vocab, node.words)
    _, v_look = word_attention(store, "look", enc)
    _, v_loc = word_attention(store, "loc", enc)
    trace.module_calls.append("attend_node")
    lam_look, lam_loc = attend_node(scene, store, v_look, v_loc)
    b_look = gate_value(store, "look", enc.summary)
    b_loc = gate_value(store, "loc", enc.summary)
    lam = _combine([K.mul(lam_look, b_look), K.mul(lam_loc, b_loc)], config, trace)
    trace.note_node(node.id, lam, {"beta_look": b_look.item(), "beta_loc": b_loc.item()})
    return lam

def process_intermediate(scene, store, config, vocab, node, edges, child_maps, trace):
    """One pass per incoming edge over the subject-relation-object sentence."""
    edge_maps = []
    notes = []
    for e in edges:
        child = child_maps[e.object]
        sentence = node.words + e.relation + trace.graph.node(e.object).words
        enc = encode_phrase(store, vocab, sentence)
        _, v_look = word_attention(store, "look", enc)
        _, v_loc = word_attention(store, "loc", enc)
        trace.module_calls.append("attend_node")
        lam_look, lam_loc = attend_node(scene, store, v_look, v_loc)
        b_look = gate_value(store, "look", enc.summary)
        b_loc = gate_value(store, "loc", enc.summary)
        terms = [K.mul(lam_look, b_look), K.mul(lam_loc, b_loc)]
        note = {
            "subject": e.subject,
            "object": e.object,
            "relation": e.relation_phrase,
            "beta_look": b_look.item(),
            "beta_loc": b_loc.item(),
        }
        if config.enable_transfer:
            _, v_rel = word_attention(store, "rel", enc)
            b_rel = gate_value(store, "rel", enc.summary)
            trace.module_calls.append("attend_relation")
            gamma = attend_relation(scene, store, v_rel)
            trace.module_calls.append("transfer")
            moved = transfer(scene, gamma, child)
            if config.enable_norm:
                trace.module_calls.append("norm")
                moved = norm(moved)
            terms.append(K.mul(moved, b_rel))
            note["beta_rel"] = b_rel.item()
            note["gamma_top"] = trace.top_gamma(scene, gamma)
        edge_maps.append(_combine(terms, config, trace))
        notes.append(note)
    trace.module_calls.append("merge")
    merged = merge(edge_maps, config.merge_mode)
    if config.enable_norm:
        trace.module_calls.append("norm")
        merged = norm(merged)
    trace.note_edges(node.id, merged, notes)
    return merged


def forward(language_graph, image_graph, store, config, vocab):
    """Process nodes in inference order and score the referent's map."""
    config.validate()
    order = inference_order(language_graph)
    need_edges = config.enable_transfer and any(
        language_graph.modifier_edges(i) for i in order
    )
    scene = SceneEncoding(image_graph, store, config, need_edges)
    trace = ReasoningTrace(language_graph, image_graph, order)
    states = {}
    for node_id in order:
        node = language_graph.node(node_id)
        edges = sorted(
            language_graph.modifier_edges(node_id),
            key=lambda e: (e.object, e.relation),
        )
        for e in edges:
            if e.object not in states:
                raise StructureError(
                    "rule inference-order: modifier map missing; ordering is broken"
                )
        if edges:
            states[node_id] = process_intermediate(
                scene, store, config, vocab, node, edges, states, trace
            )
        else:
            states[node_id] = process_leaf(scene, store, config, vocab, node, trace)
    lam_ref = states[language_graph.referent]
    logits = K.mul(lam_ref, K.Tensor(config.logit_scale))
    p = K.softmax(logits)
    trace.finish(lam_ref, p)
    return trace


def loss(trace, gt_index):
    """Cross-entropy of the referent map's softmax at the true object."""
    n = trace.p_tensor.data.shape[0]
    if not 0 <= gt_index < n:
        raise UsageError(f"gt index {gt_index} outside 0..{n - 1}")
    return K.neg(K.log(K.pick(trace.p_tensor, gt_index)))


def predict(trace):
    """Index of the highest-probability object; ties go to the smallest index."""
    return int(np.argmax(trace.distribution))


# ------------------------------------------------------------- model bundles

MODEL_FORMAT = "refground-model"
MODEL_VERSION = 1


@dataclass
class GroundingModel:
    """Config, vocabulary and parameters that travel together."""

    config: ModelConfig
    vocab: Vocabulary
    store: K.ParamStore

    @classmethod
    def fresh(cls, config, vocab, seed):
        return cls(config, vocab, init_params(config, len(vocab), seed))

    def ground(self, language_graph, image_graph):
        return forward(language_graph, image_graph, self.store, self.config, self.vocab)

    def to_dict(self):
        return {
            "format": MODEL_FORMAT,
            "version": MODEL_VERSION,
            "config": self.config.to_dict(),
            "vocab": self.vocab.to_list(),
            "params": self.store.to_dict(),
        }

    def save(self, path):
        atomic_write_text(path, json.dumps(self.to_dict(), indent=1) + "\n")

    @classmethod
    def from_dict(cls, payload):
        if not isinstance(payload, dict) or payload.get("format") != MODEL_FORMAT:
            raise SchemaError("not a model bundle")
        if payload.get("version") != MODEL_VERSION:
            raise SchemaError(f"unsupported model version {payload.get('version')!r}")
        config = ModelConfig.from_dict(payload.get("config", {}))
        vocab_words = payload.get("vocab")
        if not isinstance(vocab_words, list) or not vocab_words:
            raise SchemaError("model bundle has no vocabulary")
        store = K.ParamStore.from_dict(payload.get("params"))
        model = cls(config, Vocabulary(vocab_words), store)
        if store["embed"].data.shape[0] != len(model.vocab):
            raise SchemaError("embedding rows do not match vocabulary size")
        return model

    @classmethod
    def load(cls, path):
        try:
            with open(path, "r", encoding="utf-8") as fh:
                payload = json.load(fh)
        except FileNotFoundError:
            raise SchemaError(f"model file not found: {path}")
        except json.JSONDecodeError as exc:
            raise SchemaError(f"model file is not valid JSON: {exc}")
        return cls.from_dict(payload)
