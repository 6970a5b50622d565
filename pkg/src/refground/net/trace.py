"""Reasoning traces: inspectable record of one forward pass, with JSON and
Graphviz DOT export."""

from __future__ import annotations

import numpy as np

GAMMA_TOP = 10
DOT_TOP_OBJECTS = 3


class ReasoningTrace:
    """Processing order, per-node maps, per-edge summaries, final scores."""

    def __init__(self, graph, image_graph, order):
        self.graph = graph
        self.image_graph = image_graph
        self.order = list(order)
        self.node_maps = {}
        self.node_notes = {}
        self.edge_notes = {}
        self.module_calls = []
        self.lambda_ref = None
        self.p_tensor = None
        self.distribution = None

    # ---- recording hooks used by the forward pass

    def note_node(self, node_id, lam, info):
        self.node_maps[node_id] = np.array(lam.data)
        self.node_notes[node_id] = info

    def note_edges(self, node_id, merged, notes):
        self.node_maps[node_id] = np.array(merged.data)
        self.edge_notes[node_id] = notes

    def top_gamma(self, scene, gamma):
        g = gamma.data
        if g.shape[0] == 0:
            return []
        idx = np.argsort(-g, kind="stable")[:GAMMA_TOP]
        out = []
        for e in idx:
            if g[e] <= 0.0:
                break
            i, j = scene.graph.edges[int(e)]
            out.append(
                [
                    int(scene.graph.objects[i].id),
                    int(scene.graph.objects[j].id),
                    float(g[e]),
                ]
            )
        return out

    def finish(self, lam_ref, p):
        self.lambda_ref = lam_ref
        self.p_tensor = p
        self.distribution = np.array(p.data)

    # ---- export

    def predicted_index(self):
        return int(np.argmax(self.distribution))

    def to_dict(self):
        objects = [
            {"id": int(o.id), "class": o.class_label}
            for o in self.image_graph.objects
        ]
        nodes = []
        for node_id in self.order:
            node = self.graph.node(node_id)
            entry = {
                "id": node_id,
                "phrase": node.phrase,
                "attention": [float(v) for v in self.node_maps[node_id]],
            }
            if node_id in self.node_notes:
                entry.update(self.node_notes[node_id])
            if node_id in self.edge_notes:
                entry["edges"] = self.edge_notes[node_id]
            nodes.append(entry)
        return {
            "expression": self.graph.expression,
            "order": self.order,
            "objects": objects,
            "nodes": nodes,
            "module_calls": list(self.module_calls),
            "distribution": [float(v) for v in self.distribution],
            "predicted_index": self.predicted_index(),
            "predicted_object_id": int(
                self.image_graph.objects[self.predicted_index()].id
            ),
        }

    def top_objects(self, node_id, count=DOT_TOP_OBJECTS):
        lam = self.node_maps[node_id]
        idx = np.argsort(-lam, kind="stable")[:count]
        return [
            (self.image_graph.objects[int(i)], float(lam[int(i)])) for i in idx
        ]


def _dot_escape(text):
    return text.replace("\\", "\\\\").replace('"', '\\"')


def trace_to_dot(trace):
    """Language graph as a digraph; each node lists its top attended objects."""
    lines = [
        "digraph reasoning {",
        "  rankdir=BT;",
        '  node [shape=box, fontname="Helvetica"];',
    ]
    for node_id in sorted(n.id for n in trace.graph.nodes):
        node = trace.graph.node(node_id)
        tops = trace.top_objects(node_id)
        attended = "\\n".join(
            f"{obj.id}:{_dot_escape(obj.class_label)} {weight:.2f}"
            for obj, weight in tops
        )
        style = ', style=filled, fillcolor="lightgoldenrod1"' if node_id == trace.graph.referent else ""
        lines.append(
            f'  n{node_id} [label="{_dot_escape(node.phrase)}\\n--\\n{attended}"{style}];'
        )
    for e in sorted(trace.graph.edges, key=lambda e: (e.subject, e.relation, e.object)):
        lines.append(
            f'  n{e.object} -> n{e.subject} [label="{_dot_escape(e.relation_phrase)}"];'
        )
    lines.append("}")
    return "\n".join(lines) + "\n"
