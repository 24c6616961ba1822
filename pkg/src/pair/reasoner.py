"""Reasoning over situations: from a situation graph to a query and an anchor.

The reasoner owns the decisions that connect language to the graph and to
space:

  * ``extract_entities_relations`` pulls the target entities and intents out
    of a situation graph.
  * ``align_nodes`` ranks Chronicle nodes by embedding similarity to the
    situation text.
  * ``formulate_query`` builds a linear path query from the requester's User
    node to a schema label chosen by intent (entities as fallback; the
    aligned ranking breaks ties), or from an explicit retrieval goal.
  * ``resolve_anchor`` maps a symbolic location reference to the single best
    anchor that is semantically matching and in front of the user.
  * ``infer_affordance`` ranks anchors for a need with no geometric filter.
  * ``select_emotional_goal`` compares the detected emotion with the session
    goal and, when they differ, picks a memory context to retrieve.
  * ``query_temporal`` orders labeled nodes by timestamp.

All similarity comparisons go through one pluggable embedder so the whole
layer can be rescaled or swapped in tests.
"""

from __future__ import annotations

import os
from dataclasses import dataclass, field

from .chronicle import ChronicleGraph, ChronicleNode
from .embedding import Embedder, semantic_similarity
from .errors import AnchorResolutionError, ContractViolation, ReasoningError
from .query import Condition, EdgePattern, NodePattern, Projection, QueryAst
from .scene import AnchorPoint, UserPose, in_front
from .scribe import SituationGraph

__all__ = [
    "ExtractionResult",
    "SymbolicReference",
    "ReasonerConfig",
    "LabelSchema",
    "DEFAULT_SCHEMA",
    "RetrievalIntent",
    "AnchorResolution",
    "ReasoningPlan",
    "extract_entities_relations",
    "align_nodes",
    "formulate_query",
    "resolve_anchor",
    "resolve_anchor_trace",
    "infer_affordance",
    "select_emotional_goal",
    "query_temporal",
]

THETA_ENV_VAR = "PAIR_THETA"

# Calibrated against the hashed bag-of-words embedding: shared-token cosines
# for short anchor descriptions land around 0.2-0.3, so the gate sits below
# that band while still rejecting the zero-overlap noise floor.
DEFAULT_SIMILARITY_THRESHOLD = 0.15
DEFAULT_MAX_FRONT_DISTANCE = 5.0
DEFAULT_TOP_K = 8


@dataclass(frozen=True)
class ExtractionResult:
    entities: tuple[str, ...]
    relations: tuple[str, ...]


@dataclass(frozen=True)
class SymbolicReference:
    """A location phrase that has not been grounded yet."""

    text: str
    kind: str = "location"

    def __post_init__(self):
        if not self.text:
            raise ContractViolation("symbolic reference text must be non-empty")


@dataclass
class ReasonerConfig:
    similarity_threshold: float = DEFAULT_SIMILARITY_THRESHOLD
    max_front_distance: float = DEFAULT_MAX_FRONT_DISTANCE
    top_k: int = DEFAULT_TOP_K

    def __post_init__(self):
        if not 0.0 <= self.similarity_threshold <= 1.0:
            raise ContractViolation("similarity threshold must lie in [0, 1]")
        if self.max_front_distance <= 0:
            raise ContractViolation("max front distance must be positive")
        if self.top_k <= 0:
            raise ContractViolation("top_k must be positive")

    @classmethod
    def from_env(cls, **overrides) -> "ReasonerConfig":
        """Defaults, then the PAIR_THETA variable, then explicit overrides."""
        config = cls(**overrides)
        raw = os.environ.get(THETA_ENV_VAR)
        if raw is not None and "similarity_threshold" not in overrides:
            try:
                config.similarity_threshold = float(raw)
            except ValueError as exc:
                raise ContractViolation(f"{THETA_ENV_VAR} must be a float, got {raw!r}") from exc
            if not -1.0 <= config.similarity_threshold <= 1.0:
                raise ContractViolation(f"{THETA_ENV_VAR} must lie in [-1, 1]")
        return config


# ── Schema table ────────────────────────────────────────────────────────────


@dataclass(frozen=True)
class LabelSchema:
    """How to reach one node label from the User node, and what to read off it."""

    label: str
    path: tuple[tuple[str, str], ...]   # (rel, label) hops from User
    values: tuple[str, ...]             # value-bearing properties, in query order
    text: str                           # match surface for intent/entity scoring

    def __post_init__(self):
        if not self.path:
            raise ContractViolation(f"schema for {self.label!r} needs at least one hop")
        if self.path[-1][1] != self.label:
            raise ContractViolation(f"schema path for {self.label!r} must end at it")
        if not self.values:
            raise ContractViolation(f"schema for {self.label!r} needs value properties")


DEFAULT_SCHEMA: dict[str, LabelSchema] = {
    "Spending": LabelSchema(
        label="Spending",
        path=(("OWNS", "CreditCard"), ("HAS_SPENDING", "Spending")),
        values=("category", "amount"),
        text="spending",
    ),
    "Memory": LabelSchema(
        label="Memory",
        path=(("HAS_MEMORY", "Memory"),),
        values=("image", "location", "sentiment"),
        text="memory",
    ),
    "Preference": LabelSchema(
        label="Preference",
        path=(("HAS_PREFERENCE", "Preference"),),
        values=("name", "value"),
        text="preference",
    ),
}

USER_LABEL = "User"
USER_ID_PROPERTY = "id"


# ── Retrieval goals and plans ───────────────────────────────────────────────


@dataclass(frozen=True)
class RetrievalIntent:
    """What to fetch on the user's behalf; ``no_op`` means leave the scene be."""

    kind: str                                   # "retrieve_memory" | "no_op"
    filters: dict[str, str] = field(default_factory=dict)
    candidates: tuple[str, ...] = ()            # node ids behind the choice

    def __post_init__(self):
        if self.kind not in ("retrieve_memory", "no_op"):
            raise ContractViolation(f"unknown retrieval intent kind {self.kind!r}")
        object.__setattr__(self, "filters", dict(self.filters))


@dataclass
class ReasoningPlan:
    """Assembled record of one reasoning pass, for traces and diagnostics."""

    modes: tuple[str, ...] = ()
    extraction: ExtractionResult | None = None
    aligned: tuple[tuple[str, float], ...] = ()
    query: QueryAst | None = None
    anchor: str | None = None
    goal: RetrievalIntent | None = None


# ── Extraction and alignment ────────────────────────────────────────────────


def extract_entities_relations(situation: SituationGraph) -> ExtractionResult:
    """Entities are target-entity objects; relations are intent objects."""
    return ExtractionResult(
        entities=tuple(situation.objects_of("has_target_entity")),
        relations=tuple(situation.objects_of("has_intent")),
    )


def align_nodes(situation: SituationGraph, graph: ChronicleGraph,
                config: ReasonerConfig | None = None,
                embedder: Embedder | None = None) -> list[tuple[str, float]]:
    """Nodes ranked by similarity between situation text and node text.

    Descending score, ties broken by ascending node id, truncated to the
    configured top_k.  No threshold is applied here; callers decide what a
    useful score is.
    """
    config = config or ReasonerConfig()
    scored = [
        (node.id, semantic_similarity(situation.text, node.text, embedder))
        for node in graph.nodes.values()
    ]
    scored.sort(key=lambda pair: (-pair[1], pair[0]))
    return scored[:config.top_k]


# ── Query formulation ───────────────────────────────────────────────────────


def _score_labels(terms: tuple[str, ...], schema: dict[str, LabelSchema],
                  embedder: Embedder | None) -> dict[str, float]:
    return {
        label: max((semantic_similarity(term, entry.text, embedder) for term in terms),
                   default=0.0)
        for label, entry in schema.items()
    }


def _pick_target_label(
    extraction: ExtractionResult,
    aligned: list[tuple[str, float]],
    graph: ChronicleGraph,
    schema: dict[str, LabelSchema],
    embedder: Embedder | None,
) -> str:
    # Intent-first: the intent names what to fetch; entities usually name
    # something on the way there.  The aligned ranking settles exact ties.
    alignment_rank = {node_id: i for i, (node_id, _) in enumerate(aligned)}

    def tie_rank(label: str) -> tuple[int, str]:
        best = len(alignment_rank)
        for node_id, position in alignment_rank.items():
            node = graph.node(node_id)
            if node is not None and label in node.labels:
                best = min(best, position)
        return best, label

    for terms in (extraction.relations, extraction.entities):
        if not terms:
            continue
        scores = _score_labels(terms, schema, embedder)
        positive = [label for label, score in scores.items() if score > 0.0]
        if positive:
            return min(positive, key=lambda label: (-scores[label], tie_rank(label)))
    raise ReasoningError("no schema path matches the extracted intent or entities")


def _variable_names(labels: list[str]) -> list[str]:
    names: list[str] = []
    used: set[str] = set()
    for label in labels:
        base = label[0].lower() if label else "x"
        name = base
        suffix = 2
        while name in used:
            name = f"{base}{suffix}"
            suffix += 1
        used.add(name)
        names.append(name)
    return names


def formulate_query(
    extraction: ExtractionResult,
    aligned: list[tuple[str, float]],
    graph: ChronicleGraph,
    requester: str,
    *,
    goal: RetrievalIntent | None = None,
    schema: dict[str, LabelSchema] | None = None,
    embedder: Embedder | None = None,
) -> QueryAst:
    """Build the path query for a situation.

    Without a goal, the query runs from the requester's User node to the
    schema label matching the extracted intent (entities as fallback) and
    filters on ``u.id = requester``.  With a retrieval goal, the goal's own
    property filters replace the identity filter and the goal kind selects
    the label.  Raises ReasoningError when no schema label matches.
    """
    schema = schema or DEFAULT_SCHEMA
    if goal is not None:
        if goal.kind == "no_op":
            raise ContractViolation("cannot formulate a query for a no_op goal")
        target = _pick_target_label(
            ExtractionResult((), (goal.kind,)), aligned, graph, schema, embedder)
    else:
        if not extraction.entities and not extraction.relations and not aligned:
            raise ContractViolation("need an extraction or an aligned ranking")
        target = _pick_target_label(extraction, aligned, graph, schema, embedder)

    entry = schema[target]
    labels = [USER_LABEL] + [hop_label for _, hop_label in entry.path]
    variables = _variable_names(labels)
    nodes = tuple(NodePattern(var, label) for var, label in zip(variables, labels))
    edges = tuple(EdgePattern(rel) for rel, _ in entry.path)
    target_var = variables[-1]

    if goal is not None:
        where = tuple(Condition(target_var, prop, value)
                      for prop, value in sorted(goal.filters.items()))
    else:
        where = (Condition(variables[0], USER_ID_PROPERTY, requester),)

    returns = tuple(Projection(target_var, prop) for prop in entry.values)
    return QueryAst(nodes=nodes, edges=edges, where=where, returns=returns)


# ── Anchor resolution and affordances ───────────────────────────────────────


@dataclass(frozen=True)
class AnchorResolution:
    """Full working for one resolution, exposed for traces and tests."""

    similarities: dict[str, float]
    semantic_matches: tuple[str, ...]   # ids with sim >= threshold, sorted
    front_matches: tuple[str, ...]      # semantic matches also in front, sorted
    chosen: str | None


def resolve_anchor_trace(
    reference: SymbolicReference | str,
    anchors: list[AnchorPoint],
    user: UserPose,
    config: ReasonerConfig | None = None,
    embedder: Embedder | None = None,
) -> AnchorResolution:
    """Compute every stage of anchor resolution without raising.

    Semantic set first (similarity against descriptions, gated by the
    threshold), then the frontal filter (strictly ahead of the user and
    within max_front_distance), then argmax by similarity with ties going to
    the lexicographically smallest anchor id.
    """
    if not anchors:
        raise ContractViolation("anchor resolution needs a non-empty anchor list")
    config = config or ReasonerConfig()
    text = reference.text if isinstance(reference, SymbolicReference) else reference
    if not text:
        raise ContractViolation("symbolic reference text must be non-empty")

    similarities = {
        anchor.id: semantic_similarity(text, anchor.description, embedder)
        for anchor in anchors
    }
    semantic = tuple(sorted(
        anchor.id for anchor in anchors
        if similarities[anchor.id] >= config.similarity_threshold))
    semantic_set = set(semantic)
    front = tuple(sorted(
        anchor.id for anchor in anchors
        if anchor.id in semantic_set
        and in_front(user, anchor.position, config.max_front_distance)))
    chosen: str | None = None
    if front:
        chosen = min(front, key=lambda anchor_id: (-similarities[anchor_id], anchor_id))
    return AnchorResolution(similarities, semantic, front, chosen)


def resolve_anchor(
    reference: SymbolicReference | str,
    anchors: list[AnchorPoint],
    user: UserPose,
    config: ReasonerConfig | None = None,
    embedder: Embedder | None = None,
) -> str:
    """The anchor id for a symbolic reference, or a resolution error."""
    trace = resolve_anchor_trace(reference, anchors, user, config, embedder)
    if not trace.semantic_matches:
        best = max(trace.similarities.values(), default=0.0)
        raise AnchorResolutionError(
            f"no anchor semantically matches the reference (best score {best:.6f})",
            kind="no_semantic_match", best_score=best)
    if trace.chosen is None:
        raise AnchorResolutionError(
            "semantic matches exist but nothing is in front of the user: "
            + ", ".join(trace.semantic_matches),
            kind="nothing_in_front", candidates=trace.semantic_matches)
    return trace.chosen


def infer_affordance(
    need: str,
    anchors: list[AnchorPoint],
    config: ReasonerConfig | None = None,
    embedder: Embedder | None = None,
) -> list[str]:
    """Anchor ids whose descriptions afford the need, best first.

    Purely semantic: an affordance holds regardless of where the user is
    facing.  Gated by the similarity threshold; ties by ascending id.
    """
    if not need:
        raise ContractViolation("affordance need must be non-empty")
    config = config or ReasonerConfig()
    scored = [
        (anchor.id, semantic_similarity(need, anchor.description, embedder))
        for anchor in anchors
    ]
    matching = [(anchor_id, score) for anchor_id, score in scored
                if score >= config.similarity_threshold]
    matching.sort(key=lambda pair: (-pair[1], pair[0]))
    return [anchor_id for anchor_id, _ in matching]


# ── Emotional goals ─────────────────────────────────────────────────────────

# possible cause -> theme words used to pick a memory context
CAUSE_THEMES = {
    "missing_someone": "friends best friend",
}


def select_emotional_goal(
    situation: SituationGraph,
    app_goal: str,
    graph: ChronicleGraph,
    embedder: Embedder | None = None,
) -> RetrievalIntent:
    """Decide whether to steer the user's emotion toward the session goal.

    The situation must carry at least one emotion (the first one counts).
    Matching the goal already is a no_op.  Otherwise the intent is to
    retrieve a positive memory, its context picked by thematic similarity to
    the situation's possible cause; without a theme match the most recent
    positive memory wins.  No positive memories means an empty candidate
    set, which callers treat as "nothing to show".
    """
    if not app_goal:
        raise ContractViolation("app_goal must be non-empty")
    emotions = situation.objects_of("has_emotion")
    if not emotions:
        raise ContractViolation("situation carries no has_emotion triple")
    if emotions[0] == app_goal:
        return RetrievalIntent(kind="no_op")

    candidates = [node for node in graph.nodes_with_label("Memory")
                  if node.properties.get("sentiment") == "positive"]
    if not candidates:
        return RetrievalIntent(kind="retrieve_memory")

    cause = situation.first_object("has_possible_cause")
    theme = CAUSE_THEMES.get(cause) if cause else None

    def context_of(node: ChronicleNode) -> str | None:
        value = node.properties.get("context")
        return value if isinstance(value, str) and value else None

    contexts = sorted({ctx for node in candidates if (ctx := context_of(node))})
    best_context: str | None = None
    if theme and contexts:
        scored = [(semantic_similarity(theme, ctx, embedder), ctx) for ctx in contexts]
        top_score = max(score for score, _ in scored)
        if top_score > 0.0:
            # smallest context string among equal top scores
            best_context = min(ctx for score, ctx in scored if score == top_score)
    if best_context is None:
        # fall back to the most recent positive memory that has a context
        dated = [node for node in candidates
                 if node.timestamp is not None and context_of(node)]
        if dated:
            newest = min(dated, key=lambda n: (-n.timestamp, n.id))
            best_context = context_of(newest)
    if best_context is None:
        return RetrievalIntent(kind="retrieve_memory")

    chosen = tuple(sorted(node.id for node in candidates
                          if context_of(node) == best_context))
    return RetrievalIntent(kind="retrieve_memory",
                           filters={"context": best_context},
                           candidates=chosen)


# ── Temporal queries ────────────────────────────────────────────────────────


def query_temporal(
    graph: ChronicleGraph,
    label: str,
    order: str = "ascending",
    window: tuple[int, int] | None = None,
    schema: dict[str, LabelSchema] | None = None,
) -> list[str]:
    """Ids of timestamped ``label`` nodes, ordered by time (ties by id).

    ``window`` is inclusive on both ends; an inverted window is empty.
    Nodes without a timestamp cannot be ordered and are skipped.
    """
    schema = schema or DEFAULT_SCHEMA
    if label not in schema:
        raise ContractViolation(f"label {label!r} is not in the schema table")
    if order not in ("ascending", "descending"):
        raise ContractViolation("order must be 'ascending' or 'descending'")
    nodes = [node for node in graph.nodes_with_label(label) if node.timestamp is not None]
    if window is not None:
        t0, t1 = window
        nodes = [node for node in nodes if t0 <= node.timestamp <= t1]
    if order == "ascending":
        nodes.sort(key=lambda n: (n.timestamp, n.id))
    else:
        nodes.sort(key=lambda n: (-n.timestamp, n.id))
    return [node.id for node in nodes]
