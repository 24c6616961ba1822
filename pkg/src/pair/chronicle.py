"""Chronicle: a per-user identity knowledge graph with an append-only log.

A Chronicle holds labeled nodes, directed labeled edges, and an update log of
(timestamp, triple, source) entries.  Graphs are loaded from and saved to a
strict JSON format:

    {
      "schema_version": 1,
      "owner": "user_123",
      "nodes": [{"id": "...", "labels": ["..."], "properties": {...},
                 "timestamp": 1690000000}],
      "edges": [{"from": "...", "rel": "OWNS", "to": "...", "properties": {}}],
      "update_log": [[1690000000, ["user", "has_emotion", "curious"], "monitor"]]
    }

Unknown keys are rejected.  Property values are strings, numbers, or booleans.
Edge endpoints must exist; a dangling edge is an integrity error naming the
missing node.

Access control is enforced at the pool level: a requester may read an owner's
graph iff requester == owner or the requester is in the owner's consent set.
"""

from __future__ import annotations

import json
import re
import threading
import time
from dataclasses import dataclass, field
from typing import TYPE_CHECKING, Any, Iterable

from .errors import (
    ConsentDenied,
    ContractViolation,
    FormatError,
    IntegrityError,
    UnknownOwner,
)

if TYPE_CHECKING:  # match_pattern takes a parsed query; imported lazily to avoid a cycle
    from .query import QueryAst

__all__ = [
    "Triple",
    "ChronicleNode",
    "ChronicleEdge",
    "UpdateEntry",
    "UpdateReport",
    "ChronicleGraph",
    "ChroniclePool",
    "PoolEntry",
    "load_chronicle",
    "save_chronicle",
    "load_pool",
    "literal_equal",
    "match_pattern",
    "match_pattern_with_bindings",
    "apply_update",
    "pool_get",
]

SCHEMA_VERSION = 1

_PREDICATE_RE = re.compile(r"^[a-z][a-z0-9_]*$")
_REL_RE = re.compile(r"^[A-Z][A-Z0-9_]*$")

Literal = str | int | float | bool


# ── Core value types ────────────────────────────────────────────────────────


@dataclass(frozen=True)
class Triple:
    """A (subject, predicate, object) statement about the user or a situation."""

    subject: str
    predicate: str
    object: str

    def __post_init__(self):
        if not self.subject:
            raise ContractViolation("triple subject must be non-empty")
        if not _PREDICATE_RE.match(self.predicate):
            raise ContractViolation(
                f"triple predicate {self.predicate!r} must match [a-z][a-z0-9_]*")
        if not isinstance(self.object, str) or self.object == "":
            raise ContractViolation("triple object must be a non-empty string")

    def as_list(self) -> list[str]:
        return [self.subject, self.predicate, self.object]


@dataclass
class ChronicleNode:
    id: str
    labels: frozenset[str]
    properties: dict[str, Literal]
    timestamp: int | None = None

    def __post_init__(self):
        if not self.id:
            raise ContractViolation("node id must be non-empty")
        self.labels = frozenset(self.labels)
        if not self.labels:
            raise ContractViolation(f"node {self.id!r} must carry at least one label")

    @property
    def text(self) -> str:
        """Lowercased bag-of-words surface of the node.

        Deterministic: sorted labels, then string property values in key order.
        Non-string property values do not contribute.
        """
        parts = list(sorted(self.labels))
        for key in sorted(self.properties):
            value = self.properties[key]
            if isinstance(value, str):
                parts.append(value)
        return " ".join(parts).lower()


@dataclass
class ChronicleEdge:
    from_id: str
    rel: str
    to_id: str
    properties: dict[str, Literal] = field(default_factory=dict)

    def __post_init__(self):
        if not _REL_RE.match(self.rel):
            raise ContractViolation(f"edge rel {self.rel!r} must match [A-Z][A-Z0-9_]*")


@dataclass(frozen=True)
class UpdateEntry:
    timestamp: int
    triple: Triple
    source: str


@dataclass(frozen=True)
class UpdateReport:
    """What apply_update did with each triple."""

    materialized: tuple[Triple, ...]
    logged_only: tuple[Triple, ...]


# ── Graph ───────────────────────────────────────────────────────────────────


class ChronicleGraph:
    """In-memory graph with serialized writes.

    Reads may run concurrently; every mutation goes through ``write_lock``.
    """

    def __init__(self, owner: str):
        if not owner:
            raise ContractViolation("owner must be non-empty")
        self.owner = owner
        self.nodes: dict[str, ChronicleNode] = {}
        self.edges: list[ChronicleEdge] = []
        self.update_log: list[UpdateEntry] = []
        self.write_lock = threading.RLock()

    # construction helpers

    def add_node(self, node: ChronicleNode) -> None:
        with self.write_lock:
            if node.id in self.nodes:
                raise FormatError(f"duplicate node id {node.id!r}")
            # Temporal reasoning needs an origin time for every memory.
            if "Memory" in node.labels and node.timestamp is None:
                raise IntegrityError(f"Memory node {node.id!r} has no timestamp")
            self.nodes[node.id] = node

    def add_edge(self, edge: ChronicleEdge) -> None:
        with self.write_lock:
            for end, role in ((edge.from_id, "from"), (edge.to_id, "to")):
                if end not in self.nodes:
                    raise IntegrityError(
                        f"edge {edge.from_id}-[:{edge.rel}]->{edge.to_id} "
                        f"references missing node {end!r} ({role})")
            self.edges.append(edge)

    # read helpers

    def node(self, node_id: str) -> ChronicleNode | None:
        return self.nodes.get(node_id)

    def nodes_with_label(self, label: str) -> list[ChronicleNode]:
        return sorted((n for n in self.nodes.values() if label in n.labels),
                      key=lambda n: n.id)

    def has_edge(self, from_id: str, rel: str, to_id: str) -> bool:
        return any(e.from_id == from_id and e.rel == rel and e.to_id == to_id
                   for e in self.edges)

    def neighbors(self, from_id: str, rel: str) -> list[str]:
        return sorted({e.to_id for e in self.edges
                       if e.from_id == from_id and e.rel == rel})

    def validate(self) -> None:
        """Raise IntegrityError if any edge dangles."""
        for edge in self.edges:
            for end in (edge.from_id, edge.to_id):
                if end not in self.nodes:
                    raise IntegrityError(
                        f"edge {edge.from_id}-[:{edge.rel}]->{edge.to_id} "
                        f"references missing node {end!r}")


# ── File format ─────────────────────────────────────────────────────────────


def _require_keys(obj: dict, required: set[str], optional: set[str], where: str,
                  path: str | None) -> None:
    unknown = set(obj) - required - optional
    if unknown:
        raise FormatError(f"unknown key(s) {sorted(unknown)} in {where}",
                          path=path, field=where)
    missing = required - set(obj)
    if missing:
        raise FormatError(f"missing key(s) {sorted(missing)} in {where}",
                          path=path, field=where)


def _check_properties(raw: Any, where: str, path: str | None) -> dict[str, Literal]:
    if not isinstance(raw, dict):
        raise FormatError(f"{where}.properties must be an object", path=path, field=where)
    for key, value in raw.items():
        if not isinstance(key, str) or not key:
            raise FormatError(f"{where} has a non-string property key", path=path, field=where)
        if not isinstance(value, (str, int, float, bool)):
            raise FormatError(
                f"{where}.{key} must be a string, number, or boolean",
                path=path, field=f"{where}.{key}")
    return dict(raw)


def load_chronicle(source: str | dict) -> ChronicleGraph:
    """Load a Chronicle from a file path or an already-parsed document."""
    path: str | None = None
    if isinstance(source, str):
        path = source
        with open(source, "r", encoding="utf-8") as handle:
            try:
                doc = json.load(handle)
            except json.JSONDecodeError as exc:
                raise FormatError(f"invalid JSON: {exc}", path=path) from exc
    else:
        doc = source

    if not isinstance(doc, dict):
        raise FormatError("chronicle document must be an object", path=path)
    _require_keys(doc, {"schema_version", "owner", "nodes", "edges", "update_log"},
                  set(), "chronicle", path)
    if doc["schema_version"] != SCHEMA_VERSION:
        raise FormatError(f"unsupported schema_version {doc['schema_version']!r}",
                          path=path, field="schema_version")
    if not isinstance(doc["owner"], str) or not doc["owner"]:
        raise FormatError("owner must be a non-empty string", path=path, field="owner")

    graph = ChronicleGraph(doc["owner"])

    if not isinstance(doc["nodes"], list):
        raise FormatError("nodes must be an array", path=path, field="nodes")
    for i, raw in enumerate(doc["nodes"]):
        where = f"nodes[{i}]"
        if not isinstance(raw, dict):
            raise FormatError(f"{where} must be an object", path=path, field=where)
        _require_keys(raw, {"id", "labels", "properties"}, {"timestamp"}, where, path)
        if not isinstance(raw["id"], str) or not raw["id"]:
            raise FormatError(f"{where}.id must be a non-empty string", path=path, field=where)
        labels = raw["labels"]
        if (not isinstance(labels, list) or not labels
                or not all(isinstance(l, str) and l for l in labels)):
            raise FormatError(f"{where}.labels must be a non-empty array of strings",
                              path=path, field=where)
        ts = raw.get("timestamp")
        if ts is not None and not isinstance(ts, int):
            raise FormatError(f"{where}.timestamp must be an integer or null",
                              path=path, field=where)
        try:
            graph.add_node(ChronicleNode(
                id=raw["id"],
                labels=frozenset(labels),
                properties=_check_properties(raw["properties"], where, path),
                timestamp=ts,
            ))
        except FormatError:
            raise
        except ContractViolation as exc:
            raise FormatError(str(exc), path=path, field=where) from exc

    if not isinstance(doc["edges"], list):
        raise FormatError("edges must be an array", path=path, field="edges")
    for i, raw in enumerate(doc["edges"]):
        where = f"edges[{i}]"
        if not isinstance(raw, dict):
            raise FormatError(f"{where} must be an object", path=path, field=where)
        _require_keys(raw, {"from", "rel", "to"}, {"properties"}, where, path)
        for key in ("from", "rel", "to"):
            if not isinstance(raw[key], str) or not raw[key]:
                raise FormatError(f"{where}.{key} must be a non-empty string",
                                  path=path, field=where)
        try:
            graph.add_edge(ChronicleEdge(
                from_id=raw["from"],
                rel=raw["rel"],
                to_id=raw["to"],
                properties=_check_properties(raw.get("properties", {}), where, path),
            ))
        except ContractViolation as exc:
            raise FormatError(str(exc), path=path, field=where) from exc

    if not isinstance(doc["update_log"], list):
        raise FormatError("update_log must be an array", path=path, field="update_log")
    last_ts: int | None = None
    for i, raw in enumerate(doc["update_log"]):
        where = f"update_log[{i}]"
        if (not isinstance(raw, list) or len(raw) != 3
                or not isinstance(raw[0], int)
                or not isinstance(raw[1], list) or len(raw[1]) != 3
                or not all(isinstance(part, str) for part in raw[1])
                or not isinstance(raw[2], str)):
            raise FormatError(f"{where} must be [timestamp, [s, p, o], source]",
                              path=path, field=where)
        if last_ts is not None and raw[0] < last_ts:
            raise FormatError(f"{where} breaks timestamp monotonicity",
                              path=path, field=where)
        last_ts = raw[0]
        try:
            triple = Triple(*raw[1])
        except ContractViolation as exc:
            raise FormatError(str(exc), path=path, field=where) from exc
        graph.update_log.append(UpdateEntry(raw[0], triple, raw[2]))

    return graph


def chronicle_document(graph: ChronicleGraph) -> dict:
    """The graph as a plain JSON-ready document (nodes and edges sorted)."""
    return {
        "schema_version": SCHEMA_VERSION,
        "owner": graph.owner,
        "nodes": [
            {
                "id": node.id,
                "labels": sorted(node.labels),
                "properties": {k: node.properties[k] for k in sorted(node.properties)},
                "timestamp": node.timestamp,
            }
            for node in sorted(graph.nodes.values(), key=lambda n: n.id)
        ],
        "edges": [
            {
                "from": edge.from_id,
                "rel": edge.rel,
                "to": edge.to_id,
                "properties": {k: edge.properties[k] for k in sorted(edge.properties)},
            }
            for edge in sorted(graph.edges, key=lambda e: (e.from_id, e.rel, e.to_id))
        ],
        "update_log": [
            [entry.timestamp, entry.triple.as_list(), entry.source]
            for entry in graph.update_log
        ],
    }


def save_chronicle(graph: ChronicleGraph, path: str) -> None:
    """Write the graph to ``path`` in the canonical file format."""
    with graph.write_lock:
        doc = chronicle_document(graph)
    with open(path, "w", encoding="utf-8") as handle:
        json.dump(doc, handle, indent=2, sort_keys=True)
        handle.write("\n")


# ── Pattern matching ────────────────────────────────────────────────────────


def literal_equal(a: Literal, b: Literal) -> bool:
    """JSON-typed equality: bools never equal numbers, ints equal floats."""
    if isinstance(a, bool) or isinstance(b, bool):
        return isinstance(a, bool) and isinstance(b, bool) and a is b
    return a == b


def match_pattern_with_bindings(
    graph: ChronicleGraph, pattern: "QueryAst",
) -> list[tuple[tuple[Literal, ...], dict[str, str]]]:
    """All (row, binding) pairs for a parsed path pattern.

    A binding assigns one node to each path variable, in path order, such
    that every hop is realized by at least one edge with the required rel.
    A binding survives iff every WHERE equality holds and every RETURN
    property exists on its node; references to unknown properties therefore
    produce empty results rather than errors.  Output is sorted by the tuple
    of bound node ids, which makes row order deterministic.
    """
    candidates: list[list[ChronicleNode]] = []
    for node_pattern in pattern.nodes:
        if node_pattern.label is None:
            pool = sorted(graph.nodes.values(), key=lambda n: n.id)
        else:
            pool = graph.nodes_with_label(node_pattern.label)
        if not pool:
            return []
        candidates.append(pool)

    results: list[tuple[tuple[Literal, ...], dict[str, str]]] = []
    where_by_var: dict[str, list] = {}
    for cond in pattern.where:
        where_by_var.setdefault(cond.var, []).append(cond)

    def node_passes(var: str, node: ChronicleNode) -> bool:
        for cond in where_by_var.get(var, ()):
            if cond.prop not in node.properties:
                return False
            if not literal_equal(node.properties[cond.prop], cond.value):
                return False
        return True

    def extend(position: int, bound: list[ChronicleNode]) -> None:
        if position == len(pattern.nodes):
            binding = {npat.var: n.id for npat, n in zip(pattern.nodes, bound)}
            row = []
            for proj in pattern.returns:
                node = bound[_var_index(pattern, proj.var)]
                if proj.prop not in node.properties:
                    return
                row.append(node.properties[proj.prop])
            results.append((tuple(row), binding))
            return
        for node in candidates[position]:
            if position > 0:
                rel = pattern.edges[position - 1].rel
                if not graph.has_edge(bound[-1].id, rel, node.id):
                    continue
            if not node_passes(pattern.nodes[position].var, node):
                continue
            extend(position + 1, bound + [node])

    extend(0, [])
    # candidate pools are id-sorted, so depth-first order is already
    # lexicographic in the bound id tuple
    return results


def _var_index(pattern: "QueryAst", var: str) -> int:
    for i, node_pattern in enumerate(pattern.nodes):
        if node_pattern.var == var:
            return i
    raise ContractViolation(f"variable {var!r} is not bound by the pattern")


def match_pattern(graph: ChronicleGraph, pattern: "QueryAst") -> list[tuple[Literal, ...]]:
    """Rows for a parsed path pattern; one value per RETURN item."""
    return [row for row, _ in match_pattern_with_bindings(graph, pattern)]


# ── Feedback updates ────────────────────────────────────────────────────────

# Predicates with a structural mapping into the graph.  Everything else is
# recorded in the update log only.
MATERIALIZED_PREDICATES = frozenset({"has_attention_on", "has_emotion", "has_preference"})

ATTENTION_REL = "ATTENDED"
PREFERENCE_REL = "HAS_PREFERENCE"
LAST_EMOTION_PROPERTY = "last_emotion"


def _resolve_subject(graph: ChronicleGraph, subject: str) -> ChronicleNode | None:
    # "user" is the conventional subject for the graph owner
    if subject == "user":
        return graph.nodes.get(graph.owner)
    return graph.nodes.get(subject)


def _slug(value: str) -> str:
    return re.sub(r"[^a-z0-9]+", "_", value.lower()).strip("_")


def apply_update(
    graph: ChronicleGraph,
    triples: Iterable[Triple],
    source: str,
    timestamp: int | None = None,
) -> UpdateReport:
    """Append triples to the update log and materialize the whitelisted ones.

    Materialization:
      * has_attention_on  -> ATTENDED edge from the subject to the object
                              (the object node is created if missing)
      * has_emotion       -> ``last_emotion`` property on the subject
      * has_preference    -> Preference node linked from the subject

    Any triple whose subject cannot be resolved, or whose predicate has no
    mapping, is logged only.  Timestamps are clamped so the log stays
    monotone.  Returns which triples went where.
    """
    triples = list(triples)
    for triple in triples:
        if not isinstance(triple, Triple):
            raise ContractViolation(f"expected Triple, got {type(triple).__name__}")
    with graph.write_lock:
        ts = int(time.time()) if timestamp is None else int(timestamp)
        if graph.update_log:
            ts = max(ts, graph.update_log[-1].timestamp)
        materialized: list[Triple] = []
        logged_only: list[Triple] = []
        for triple in triples:
            graph.update_log.append(UpdateEntry(ts, triple, source))
            subject = _resolve_subject(graph, triple.subject)
            if subject is None or triple.predicate not in MATERIALIZED_PREDICATES:
                logged_only.append(triple)
                continue
            if triple.predicate == "has_attention_on":
                if triple.object not in graph.nodes:
                    graph.nodes[triple.object] = ChronicleNode(
                        id=triple.object, labels=frozenset({"Entity"}), properties={})
                if not graph.has_edge(subject.id, ATTENTION_REL, triple.object):
                    graph.edges.append(ChronicleEdge(subject.id, ATTENTION_REL, triple.object))
            elif triple.predicate == "has_emotion":
                subject.properties[LAST_EMOTION_PROPERTY] = triple.object
            else:  # has_preference
                pref_id = f"pref_{_slug(triple.object)}"
                if pref_id not in graph.nodes:
                    graph.nodes[pref_id] = ChronicleNode(
                        id=pref_id, labels=frozenset({"Preference"}),
                        properties={"value": triple.object})
                if not graph.has_edge(subject.id, PREFERENCE_REL, pref_id):
                    graph.edges.append(ChronicleEdge(subject.id, PREFERENCE_REL, pref_id))
            materialized.append(triple)
        graph.validate()
        return UpdateReport(tuple(materialized), tuple(logged_only))


# ── Pool and consent ────────────────────────────────────────────────────────


@dataclass
class PoolEntry:
    graph: ChronicleGraph
    consent: set[str] = field(default_factory=set)


class ChroniclePool:
    """Owner-keyed collection of Chronicles with per-owner consent sets."""

    def __init__(self):
        self.entries: dict[str, PoolEntry] = {}

    def add(self, graph: ChronicleGraph, consent: Iterable[str] = ()) -> None:
        self.entries[graph.owner] = PoolEntry(graph, set(consent))

    def grant(self, owner: str, requester: str) -> None:
        if owner not in self.entries:
            raise UnknownOwner(f"no chronicle for owner {owner!r}")
        self.entries[owner].consent.add(requester)


def pool_get(pool: ChroniclePool, owner: str, requester: str) -> ChronicleGraph:
    """The owner's graph, iff the requester is the owner or has consent."""
    entry = pool.entries.get(owner)
    if entry is None:
        raise UnknownOwner(f"no chronicle for owner {owner!r}")
    if requester != owner and requester not in entry.consent:
        raise ConsentDenied(f"{requester!r} may not read the chronicle of {owner!r}")
    return entry.graph


def load_pool(directory: str) -> ChroniclePool:
    """Load every ``*.json`` chronicle in a directory into a pool.

    An optional ``consent.json`` file maps owner ids to lists of requester
    ids that have been granted read access.
    """
    import os

    pool = ChroniclePool()
    consent_map: dict[str, list[str]] = {}
    consent_path = os.path.join(directory, "consent.json")
    if os.path.exists(consent_path):
        with open(consent_path, "r", encoding="utf-8") as handle:
            consent_map = json.load(handle)
        if not isinstance(consent_map, dict):
            raise FormatError("consent.json must map owners to requester lists",
                              path=consent_path)
    for name in sorted(os.listdir(directory)):
        if not name.endswith(".json") or name == "consent.json":
            continue
        graph = load_chronicle(os.path.join(directory, name))
        pool.add(graph, consent_map.get(graph.owner, ()))
    return pool
