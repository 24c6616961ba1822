"""Media synthesis: query rows become renderable media objects.

Three routes, one per provenance:
  * ``synthesize_pie``        -- generated chart data with exact proportions
  * ``synthesize_retrieval``  -- an existing asset picked out of the Chronicle
  * ``synthesize_generated``  -- a text panel conditioned on selected nodes
"""

from __future__ import annotations

import re
from dataclasses import dataclass
from numbers import Real
from typing import Any

from .chronicle import ChronicleGraph
from .errors import ContractViolation, DegenerateTotalError

__all__ = [
    "SpendingRecord",
    "PieSlice",
    "RetrievedRow",
    "MediaObject",
    "synthesize_pie",
    "synthesize_retrieval",
    "synthesize_generated",
]

PROVENANCES = ("generated", "retrieved")

# sentiment of the retrieved memory -> emotional tag on the frame;
# negative memories are never surfaced
EMOTIONAL_TAGS = {"positive": "nostalgia", "neutral": "calm"}

FALLBACK_FRAME_COLOR = "neutral_gray"
FAVORITE_COLOR_PREFERENCE = "favorite_color"


@dataclass(frozen=True)
class SpendingRecord:
    category: str
    amount: float

    def __post_init__(self):
        if not self.category:
            raise ContractViolation("spending category must be non-empty")
        if not isinstance(self.amount, Real) or isinstance(self.amount, bool):
            raise ContractViolation("spending amount must be a number")
        if self.amount < 0:
            raise ContractViolation(f"spending amount must be non-negative, got {self.amount}")


@dataclass(frozen=True)
class PieSlice:
    category: str
    amount: float
    proportion: float


@dataclass(frozen=True)
class RetrievedRow:
    """One query row with the id of the node it came from."""

    node_id: str
    values: dict[str, Any]

    def __post_init__(self):
        object.__setattr__(self, "values", dict(self.values))


@dataclass
class MediaObject:
    kind: str                     # pie_chart | photo_frame | text_panel
    data: Any
    provenance: str
    source_refs: tuple[str, ...] = ()
    warnings: tuple[str, ...] = ()

    def __post_init__(self):
        if self.provenance not in PROVENANCES:
            raise ContractViolation(f"provenance must be one of {PROVENANCES}")


def synthesize_pie(rows: list[SpendingRecord],
                   source_refs: tuple[str, ...] = ()) -> MediaObject:
    """Pie chart data: proportion_j = amount_j / sum(amounts), input order kept.

    Raises DegenerateTotalError iff the amounts sum to zero (with
    non-negative amounts, exactly the all-zero case).
    """
    if not rows:
        raise ContractViolation("cannot build a pie from zero rows")
    total = sum(record.amount for record in rows)
    if total == 0:
        raise DegenerateTotalError("amounts sum to zero; proportions are undefined")
    slices = [PieSlice(r.category, r.amount, r.amount / total) for r in rows]
    return MediaObject(kind="pie_chart", data=slices, provenance="generated",
                       source_refs=source_refs)


def _favorite_color(preferences: ChronicleGraph) -> str | None:
    # Preference nodes carry {"name": <preference>, "value": <setting>}
    for node in preferences.nodes_with_label("Preference"):
        if node.properties.get("name") == FAVORITE_COLOR_PREFERENCE:
            value = node.properties.get("value")
            if isinstance(value, str) and value:
                return value
    return None


def _slug(value: str) -> str:
    return re.sub(r"[^a-z0-9]+", "_", value.lower()).strip("_")


def synthesize_retrieval(rows: list[RetrievedRow],
                         preferences: ChronicleGraph) -> MediaObject | None:
    """Frame the best retrieved memory; None when it must be suppressed.

    The first row wins (callers pass rows in deterministic query order).
    Frame color comes from the owner's favorite-color preference, with a
    neutral fallback plus a warning when the preference is absent.  A
    negative-sentiment memory is suppressed rather than framed.
    """
    if not rows:
        raise ContractViolation("retrieval needs at least one row")
    top = rows[0]
    image = top.values.get("image")
    if not isinstance(image, str) or not image:
        raise ContractViolation("each retrieved row must carry an image ref")
    sentiment = top.values.get("sentiment", "neutral")
    if sentiment not in EMOTIONAL_TAGS:
        return None
    warnings: tuple[str, ...] = ()
    color = _favorite_color(preferences)
    if color is None:
        color = FALLBACK_FRAME_COLOR
        warnings = ("no favorite_color preference; using fallback frame color",)
    return MediaObject(
        kind="photo_frame",
        data={
            "image": image,
            "frame_color": _slug(color),
            "emotional_tag": EMOTIONAL_TAGS[sentiment],
        },
        provenance="retrieved",
        source_refs=(top.node_id,),
        warnings=warnings,
    )


def synthesize_generated(condition: tuple[str, ...], request: str,
                         graph: ChronicleGraph) -> MediaObject:
    """A text panel deterministically templated from the conditioning nodes."""
    if not condition:
        raise ContractViolation("generation needs at least one conditioning node")
    parts: list[str] = []
    for node_id in sorted(condition):
        node = graph.node(node_id)
        if node is None:
            raise ContractViolation(f"conditioning node {node_id!r} is not in the graph")
        fields = ", ".join(
            f"{key}={node.properties[key]}"
            for key in sorted(node.properties)
            if isinstance(node.properties[key], str))
        parts.append(f"{node_id}: {fields}" if fields else node_id)
    return MediaObject(
        kind="text_panel",
        data={"text": f"{request}: " + "; ".join(parts)},
        provenance="generated",
        source_refs=tuple(sorted(condition)),
    )
