"""Language scene graphs: parsing expressions and the interchange format.

The grammar is deliberately small and unambiguous. An expression is a head
entity followed by modifier groups; each group is a relation phrase plus an
entity. Attachment is decided by the group's introducer, never by guessing:

* no introducer or ``and``  -> the modifier attaches to the head entity,
* ``that is`` / ``which is`` -> it attaches to the most recent entity,

so "the cup on the table and near the lamp" is a star around the cup while
"the cup on the table that is near the lamp" chains through the table.

Edges are stored pointing from the modifying entity (the ``object``) to the
entity it modifies (the ``subject``); the referent is the unique node with no
outgoing edge. Articles segment entities but are not kept as phrase words.
"""

from __future__ import annotations

import json
from dataclasses import dataclass

from .errors import ParseError, SchemaError, StructureError
from .util import atomic_write_text

ARTICLES = ("the", "a")
SUBORDINATORS = (("that", "is"), ("which", "is"))
CONJUNCTION = ("and",)

# relation surface forms the synthetic corpus emits
GENERATION_RELATIONS = (
    "on",
    "under",
    "above",
    "below",
    "to the left of",
    "to the right of",
    "near",
    "inside",
    "same color as",
    "same material as",
    "same shape as",
)

# additionally recognized when parsing free-form input
EXTRA_RELATIONS = (
    "in",
    "across",
    "behind",
    "in front of",
    "next to",
    "holding",
)

PARSE_RELATIONS = GENERATION_RELATIONS + EXTRA_RELATIONS

_PUNCT = ",.;:!?\"'()"


@dataclass(frozen=True)
class PhraseNode:
    id: int
    words: tuple

    @property
    def phrase(self):
        return " ".join(self.words)


@dataclass(frozen=True)
class RelationEdge:
    """Directed modifier edge: ``object`` modifies ``subject``."""

    subject: int
    relation: tuple
    object: int

    @property
    def relation_phrase(self):
        return " ".join(self.relation)


class LanguageSceneGraph:
    """Phrase nodes plus modifier edges with a unique referent."""

    def __init__(self, expression, nodes, edges, referent):
        self.expression = expression
        self.nodes = sorted(nodes, key=lambda n: n.id)
        self.edges = list(edges)
        self.referent = referent
        self._by_id = {n.id: n for n in self.nodes}

    def node(self, node_id):
        return self._by_id[node_id]

    def node_ids(self):
        return [n.id for n in self.nodes]

    def modifier_edges(self, node_id):
        """Edges whose subject is this node, i.e. its incoming modifiers."""
        return [e for e in self.edges if e.subject == node_id]

    def out_degree(self, node_id):
        return sum(1 for e in self.edges if e.object == node_id)

    def __len__(self):
        return len(self.nodes)

    def __eq__(self, other):
        return (
            isinstance(other, LanguageSceneGraph)
            and self.expression == other.expression
            and self.nodes == other.nodes
            and sorted(self.edges, key=_edge_key) == sorted(other.edges, key=_edge_key)
            and self.referent == other.referent
        )


def _edge_key(e):
    return (e.subject, e.relation, e.object)


def tokenize(text):
    words = []
    for raw in text.lower().split():
        cleaned = raw.strip(_PUNCT)
        if cleaned:
            words.append(cleaned)
    return words


class GrammarTable:
    """Keyword tables driving tokenizer segmentation; longest match wins."""

    def __init__(self, relations=PARSE_RELATIONS):
        self.relation_phrases = sorted(
            (tuple(r.split()) for r in relations), key=len, reverse=True
        )
        self.intro_phrases = sorted(
            list(SUBORDINATORS) + [CONJUNCTION], key=len, reverse=True
        )
        self.articles = set(ARTICLES)

    def match_relation(self, tokens, pos):
        for phrase in self.relation_phrases:
            if tuple(tokens[pos : pos + len(phrase)]) == phrase:
                return phrase
        return None

    def match_intro(self, tokens, pos):
        for phrase in self.intro_phrases:
            if tuple(tokens[pos : pos + len(phrase)]) == phrase:
                return phrase
        return None

    def at_boundary(self, tokens, pos):
        if pos >= len(tokens):
            return True
        if tokens[pos] in self.articles:
            return True
        return (
            self.match_relation(tokens, pos) is not None
            or self.match_intro(tokens, pos) is not None
        )


DEFAULT_GRAMMAR = GrammarTable()


def _parse_entity(tokens, pos, grammar):
    if pos < len(tokens) and tokens[pos] in grammar.articles:
        pos += 1
    words = []
    while pos < len(tokens) and not grammar.at_boundary(tokens, pos):
        words.append(tokens[pos])
        pos += 1
    if not words:
        raise ParseError("expected an entity phrase", position=pos)
    return tuple(words), pos


def parse_expression(text, grammar=DEFAULT_GRAMMAR):
    """Parse an expression into a LanguageSceneGraph; the head entity is the
    referent. Raises ParseError with the failing token position."""
    tokens = tokenize(text)
    if not tokens:
        raise ParseError("empty expression", position=0)
    words, pos = _parse_entity(tokens, 0, grammar)
    nodes = [PhraseNode(0, words)]
    edges = []
    previous = 0
    while pos < len(tokens):
        attach = 0
        intro = grammar.match_intro(tokens, pos)
        if intro is not None:
            pos += len(intro)
            if intro != CONJUNCTION:
                attach = previous
        relation = grammar.match_relation(tokens, pos)
        if relation is None:
            raise ParseError("expected a relation phrase", position=pos)
        pos += len(relation)
        words, pos = _parse_entity(tokens, pos, grammar)
        child = PhraseNode(len(nodes), words)
        nodes.append(child)
        edges.append(RelationEdge(subject=attach, relation=relation, object=child.id))
        previous = child.id
    graph = LanguageSceneGraph(" ".join(tokens), nodes, edges, referent=0)
    validate_graph(graph)
    return graph


def find_referent(graph):
    """The unique node that never appears as an edge's object."""
    roots = [n.id for n in graph.nodes if graph.out_degree(n.id) == 0]
    if len(roots) != 1:
        raise StructureError(
            f"rule root-not-unique: found {len(roots)} zero-out-degree nodes"
        )
    return roots[0]


def validate_graph(graph):
    """Check every structural rule; error messages name the violated rule."""
    if not graph.nodes:
        raise StructureError("rule nodes-missing: graph has no nodes")
    ids = [n.id for n in graph.nodes]
    if len(set(ids)) != len(ids):
        raise StructureError("rule node-id-duplicate: node ids must be unique")
    for n in graph.nodes:
        if not n.words:
            raise StructureError(f"rule phrase-empty: node {n.id} has no words")
    known = set(ids)
    for e in graph.edges:
        if e.subject not in known or e.object not in known:
            raise StructureError(
                f"rule edge-endpoint-unknown: edge {e.subject}<-{e.object}"
            )
        if e.subject == e.object:
            raise StructureError(f"rule edge-self-loop: node {e.subject}")
        if not e.relation:
            raise StructureError("rule relation-empty: edge has no relation words")
    # cycle check over object -> subject arrows
    out = {i: [] for i in known}
    indeg = {i: 0 for i in known}
    for e in graph.edges:
        out[e.object].append(e.subject)
        indeg[e.subject] += 1
    ready = [i for i in known if indeg[i] == 0]
    seen = 0
    while ready:
        i = ready.pop()
        seen += 1
        for j in out[i]:
            indeg[j] -= 1
            if indeg[j] == 0:
                ready.append(j)
    if seen != len(known):
        raise StructureError("rule graph-cyclic: modifier edges form a cycle")
    root = find_referent(graph)
    if graph.referent != root:
        raise StructureError(
            f"rule referent-mismatch: declared {graph.referent}, computed {root}"
        )
    return graph


def graph_to_dict(graph):
    return {
        "expression": graph.expression,
        "nodes": [{"id": n.id, "phrase": n.phrase} for n in graph.nodes],
        "edges": [
            {"subject": e.subject, "relation": e.relation_phrase, "object": e.object}
            for e in sorted(graph.edges, key=_edge_key)
        ],
        "referent": graph.referent,
    }


def graph_from_dict(payload, where="language graph"):
    if not isinstance(payload, dict):
        raise SchemaError(f"{where}: expected a JSON object")
    for key in ("expression", "nodes", "edges", "referent"):
        if key not in payload:
            raise SchemaError(f"{where}: missing field {key!r}")
    try:
        nodes = [
            PhraseNode(int(n["id"]), tuple(str(n["phrase"]).split()))
            for n in payload["nodes"]
        ]
        edges = [
            RelationEdge(
                int(e["subject"]),
                tuple(str(e["relation"]).split()),
                int(e["object"]),
            )
            for e in payload["edges"]
        ]
        referent = int(payload["referent"])
        expression = str(payload["expression"])
    except (KeyError, TypeError, ValueError) as exc:
        raise SchemaError(f"{where}: malformed entry ({exc})")
    graph = LanguageSceneGraph(expression, nodes, edges, referent)
    validate_graph(graph)
    return graph


def save_graph(graph, path):
    atomic_write_text(path, json.dumps(graph_to_dict(graph), indent=2) + "\n")


def load_graph(path):
    try:
        with open(path, "r", encoding="utf-8") as fh:
            payload = json.load(fh)
    except FileNotFoundError:
        raise SchemaError(f"language graph file not found: {path}")
    except json.JSONDecodeError as exc:
        raise SchemaError(f"language graph file is not valid JSON: {exc}")
    return graph_from_dict(payload, where=str(path))
