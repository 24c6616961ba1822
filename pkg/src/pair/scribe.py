"""Scribe: natural language and signal states in, situation graphs out.

A SituationGraph is a small set of triples over a fixed predicate
vocabulary, anchored on a situation id (``situation_1`` for parsed requests,
``situation_2`` for interpreted signal states; ids are local to a pipeline
run).  Translation is rule-based and deterministic: an ordered keyword table
where the first matching rule wins.  The same translator also renders media
objects into runtime events; a backend with the same surface could delegate
those three tasks to an external model instead.
"""

from __future__ import annotations

import re
from dataclasses import dataclass
from typing import Protocol

from .chronicle import Triple
from .errors import ContractViolation
from .monitor import DetectedState
from .scene import INSTANTIATE_VISUALIZATION, RuntimeEvent, SpatialData
from .synthesizer import MediaObject, PieSlice

__all__ = [
    "SITUATION_VOCABULARY",
    "SituationGraph",
    "TranslatorBackend",
    "RuleBasedTranslator",
    "parse_user_request",
    "interpret_signals",
    "render_xr_script",
]

SITUATION_VOCABULARY = frozenset({
    "has_participant",
    "has_intent",
    "has_target_entity",
    "has_target_location",
    "has_emotion",
    "has_possible_cause",
    "has_activity",
    "has_location",
    "has_time",
    "has_ambience",
})

REQUEST_SITUATION_ID = "situation_1"
SIGNAL_SITUATION_ID = "situation_2"

UNKNOWN_INTENT = "unknown"


@dataclass
class SituationGraph:
    """Triples describing one situation, over the fixed vocabulary."""

    situation_id: str
    triples: list[Triple]

    def __post_init__(self):
        if not self.situation_id:
            raise ContractViolation("situation id must be non-empty")
        if not self.triples:
            raise ContractViolation("a situation must contain at least one triple")
        for triple in self.triples:
            if triple.subject not in (self.situation_id, "user"):
                raise ContractViolation(
                    f"triple subject {triple.subject!r} is neither the situation "
                    f"id nor 'user'")
            if triple.predicate not in SITUATION_VOCABULARY:
                raise ContractViolation(
                    f"predicate {triple.predicate!r} is outside the situation vocabulary")

    def objects_of(self, predicate: str) -> list[str]:
        return [t.object for t in self.triples if t.predicate == predicate]

    def first_object(self, predicate: str) -> str | None:
        for triple in self.triples:
            if triple.predicate == predicate:
                return triple.object
        return None

    @property
    def text(self) -> str:
        """All triple elements joined, for embedding."""
        return " ".join(" ".join(t.as_list()) for t in self.triples)


class TranslatorBackend(Protocol):
    """The three translation tasks a scribe backend must cover."""

    capability: str

    def parse_request(self, text: str, context: SituationGraph | None,
                      spatial: SpatialData | None) -> SituationGraph: ...

    def interpret_states(self, states: list[DetectedState]) -> SituationGraph: ...

    def render_event(self, media: MediaObject, anchor_id: str) -> RuntimeEvent: ...


# ── Rule tables ─────────────────────────────────────────────────────────────


@dataclass(frozen=True)
class RequestRule:
    """First rule whose keywords all appear in the request wins."""

    keywords: frozenset[str]
    intent: str
    target_entity: str | None = None


REQUEST_RULES: tuple[RequestRule, ...] = (
    RequestRule(frozenset({"spending"}), "visualize_spending_profile", "credit_card"),
    RequestRule(frozenset({"memories"}), "retrieve_memory", "memory"),
    RequestRule(frozenset({"memory"}), "retrieve_memory", "memory"),
)

# "<thing> in front of me" becomes a symbolic location; resolution to a
# concrete anchor happens later, against the scene
_FRONT_LOCATION_RE = re.compile(r"\bon the ([a-z]+) in front\b")

LOCATION_PHRASES: tuple[tuple[str, str], ...] = (
    ("on the wall", "wall_center"),
    ("on the desk", "desk_center"),
)

# state label -> does a cause rule apply?  sad with downward gaze evidence
# points at missing someone
CAUSE_RULES: tuple[tuple[str, str, str], ...] = (
    ("sad", "gaze_direction", "missing_someone"),
)

_WORD_RE = re.compile(r"[a-z0-9]+")


class RuleBasedTranslator:
    """Deterministic table-driven backend; no model calls anywhere."""

    capability = "rule_based"

    def parse_request(self, text: str, context: SituationGraph | None = None,
                      spatial: SpatialData | None = None) -> SituationGraph:
        lowered = text.lower()
        words = set(_WORD_RE.findall(lowered))
        matched: RequestRule | None = None
        for rule in REQUEST_RULES:
            if rule.keywords <= words:
                matched = rule
                break  # ordered table: at most one rule applies
        sid = REQUEST_SITUATION_ID
        if matched is None:
            return SituationGraph(sid, [Triple(sid, "has_intent", UNKNOWN_INTENT)])
        triples = [
            Triple(sid, "has_participant", "user"),
            Triple(sid, "has_intent", matched.intent),
        ]
        if matched.target_entity:
            triples.append(Triple(sid, "has_target_entity", matched.target_entity))
        location = self._location_reference(lowered)
        if location:
            triples.append(Triple(sid, "has_target_location", location))
        return SituationGraph(sid, triples)

    @staticmethod
    def _location_reference(lowered: str) -> str | None:
        front = _FRONT_LOCATION_RE.search(lowered)
        if front:
            return f"{front.group(1)}_in_front"
        for phrase, symbol in LOCATION_PHRASES:
            if phrase in lowered:
                return symbol
        return None

    def interpret_states(self, states: list[DetectedState]) -> SituationGraph:
        if not states:
            raise ContractViolation("cannot interpret an empty state list")
        sid = SIGNAL_SITUATION_ID
        triples = [Triple(sid, "has_participant", "user")]
        for state in states:
            triples.append(Triple(sid, "has_emotion", state.label))
        for state in states:
            for label, evidence_kind, cause in CAUSE_RULES:
                if state.label == label and evidence_kind in state.evidence:
                    triples.append(Triple(sid, "has_possible_cause", cause))
                    break
        return SituationGraph(sid, triples)

    def render_event(self, media: MediaObject, anchor_id: str) -> RuntimeEvent:
        if not anchor_id:
            raise ContractViolation("render needs a target anchor id")
        if media.kind == "pie_chart":
            data = [{"category": s.category, "amount": s.amount}
                    for s in media.data]
            self._check_slices(media.data)
        elif media.kind == "photo_frame":
            data = [{
                "image": media.data["image"],
                "frame_color": media.data["frame_color"],
                "emotional_tag": media.data["emotional_tag"],
            }]
        elif media.kind == "text_panel":
            data = [{"text": media.data["text"]}]
        else:
            raise ContractViolation(f"no renderer for media kind {media.kind!r}")
        return RuntimeEvent(
            event=INSTANTIATE_VISUALIZATION,
            visualization_type=media.kind,
            data=data,
            position=anchor_id,
            interaction="enabled",
        )

    @staticmethod
    def _check_slices(slices: list[PieSlice]) -> None:
        if not slices:
            raise ContractViolation("a pie needs at least one slice")


DEFAULT_TRANSLATOR = RuleBasedTranslator()


def parse_user_request(text: str, context: SituationGraph | None = None,
                       spatial: SpatialData | None = None,
                       backend: TranslatorBackend | None = None) -> SituationGraph:
    """Turn a user utterance into a situation graph.  Total: unmatched
    requests come back as ``has_intent = unknown`` rather than failing."""
    return (backend or DEFAULT_TRANSLATOR).parse_request(text, context, spatial)


def interpret_signals(states: list[DetectedState],
                      backend: TranslatorBackend | None = None) -> SituationGraph:
    """Turn detected user states into a situation graph."""
    return (backend or DEFAULT_TRANSLATOR).interpret_states(states)


def render_xr_script(media: MediaObject, anchor_id: str,
                     backend: TranslatorBackend | None = None) -> RuntimeEvent:
    """Render a media object into a runtime event at the given anchor."""
    return (backend or DEFAULT_TRANSLATOR).render_event(media, anchor_id)
