"""Scene state: anchors, user pose, and visualization placement.

Coordinates are right-handed, y-up, in meters ("rh_y_up_m"); spatial files
declare this in their header and nothing else is accepted.  A scene tracks
which anchor holds which visualization.  Placements are keyed by generated
ids of the form ``<type>_<seq>`` with a zero-padded, strictly increasing
sequence number shared by all types, e.g. ``pie_chart_001``.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from typing import Any

from .errors import ContractViolation, FormatError, ProtocolError

__all__ = [
    "COORDINATE_SYSTEM",
    "INSTANTIATE_VISUALIZATION",
    "Vec3",
    "AnchorPoint",
    "UserPose",
    "SpatialData",
    "RuntimeEvent",
    "PlacedVisualization",
    "SceneDelta",
    "SceneState",
    "load_spatial",
    "init_scene",
    "apply_event",
    "snapshot",
    "in_front",
]

COORDINATE_SYSTEM = "rh_y_up_m"
INSTANTIATE_VISUALIZATION = "instantiate_visualization"
INTERACTION_MODES = ("enabled", "disabled")

Vec3 = tuple[float, float, float]


def _vec3(raw: Any, where: str, path: str | None = None) -> Vec3:
    if (not isinstance(raw, list) or len(raw) != 3
            or not all(isinstance(v, (int, float)) and not isinstance(v, bool) for v in raw)):
        raise FormatError(f"{where} must be an array of 3 numbers", path=path, field=where)
    return (float(raw[0]), float(raw[1]), float(raw[2]))


@dataclass
class AnchorPoint:
    id: str
    position: Vec3
    description: str
    occupied_by: str | None = None

    def __post_init__(self):
        if not self.id:
            raise ContractViolation("anchor id must be non-empty")
        if not self.description:
            raise ContractViolation("anchor description must be non-empty")


@dataclass
class UserPose:
    center: Vec3
    facing: Vec3
    box_extents: Vec3

    def __post_init__(self):
        norm = math.sqrt(sum(c * c for c in self.facing))
        if norm == 0.0:
            raise ContractViolation("facing vector must be non-zero")
        # store a unit facing vector so half-space tests are scale-free
        self.facing = tuple(c / norm for c in self.facing)  # type: ignore[assignment]
        if any(extent < 0 for extent in self.box_extents):
            raise ContractViolation("box extents must be non-negative")


@dataclass
class SpatialData:
    anchors: list[AnchorPoint]
    supported_events: list[str]
    user: UserPose

    def __post_init__(self):
        if INSTANTIATE_VISUALIZATION not in self.supported_events:
            raise ContractViolation(
                f"supported_events must include {INSTANTIATE_VISUALIZATION!r}")


@dataclass
class RuntimeEvent:
    """A renderable scene instruction, serialized exactly as emitted."""

    event: str
    visualization_type: str
    data: list[dict[str, Any]]
    position: str
    interaction: str = "enabled"

    def __post_init__(self):
        if self.interaction not in INTERACTION_MODES:
            raise ContractViolation(f"interaction must be one of {INTERACTION_MODES}")
        if not self.visualization_type:
            raise ContractViolation("visualization_type must be non-empty")
        if not self.position:
            raise ContractViolation("position must name an anchor")

    def to_payload(self) -> dict[str, Any]:
        return {
            "event": self.event,
            "visualization_type": self.visualization_type,
            "data": [dict(row) for row in self.data],
            "position": self.position,
            "interaction": self.interaction,
        }

    @classmethod
    def from_payload(cls, raw: dict[str, Any]) -> "RuntimeEvent":
        required = {"event", "visualization_type", "data", "position", "interaction"}
        unknown = set(raw) - required
        if unknown:
            raise FormatError(f"unknown key(s) {sorted(unknown)} in event")
        missing = required - set(raw)
        if missing:
            raise FormatError(f"missing key(s) {sorted(missing)} in event")
        if not isinstance(raw["data"], list) or not all(isinstance(r, dict) for r in raw["data"]):
            raise FormatError("event data must be an array of objects")
        return cls(event=raw["event"], visualization_type=raw["visualization_type"],
                   data=[dict(r) for r in raw["data"]], position=raw["position"],
                   interaction=raw["interaction"])


@dataclass(frozen=True)
class PlacedVisualization:
    event: RuntimeEvent
    seq: int


@dataclass(frozen=True)
class SceneDelta:
    """What the last apply_event changed."""

    placed: str
    displaced: str | None


@dataclass
class SceneState:
    spatial: SpatialData
    visualizations: dict[str, PlacedVisualization] = field(default_factory=dict)
    seq: int = 0
    last_delta: SceneDelta | None = None

    def anchor(self, anchor_id: str) -> AnchorPoint | None:
        for anchor in self.spatial.anchors:
            if anchor.id == anchor_id:
                return anchor
        return None


# ── Loading ─────────────────────────────────────────────────────────────────


def load_spatial(source: str | dict) -> SpatialData:
    """Parse a spatial description from a file path or a parsed document."""
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
        raise FormatError("spatial document must be an object", path=path)
    required = {"coordinate_system", "anchors", "supported_events", "user"}
    unknown = set(doc) - required
    if unknown:
        raise FormatError(f"unknown key(s) {sorted(unknown)} in spatial document", path=path)
    missing = required - set(doc)
    if missing:
        raise FormatError(f"missing key(s) {sorted(missing)} in spatial document", path=path)
    if doc["coordinate_system"] != COORDINATE_SYSTEM:
        raise FormatError(
            f"coordinate_system must be {COORDINATE_SYSTEM!r}, "
            f"got {doc['coordinate_system']!r}", path=path, field="coordinate_system")

    anchors: list[AnchorPoint] = []
    if not isinstance(doc["anchors"], list):
        raise FormatError("anchors must be an array", path=path, field="anchors")
    for i, raw in enumerate(doc["anchors"]):
        where = f"anchors[{i}]"
        if not isinstance(raw, dict):
            raise FormatError(f"{where} must be an object", path=path, field=where)
        extra = set(raw) - {"id", "position", "description"}
        if extra:
            raise FormatError(f"unknown key(s) {sorted(extra)} in {where}",
                              path=path, field=where)
        if not isinstance(raw.get("id"), str) or not raw["id"]:
            raise FormatError(f"{where}.id must be a non-empty string", path=path, field=where)
        if not isinstance(raw.get("description"), str) or not raw["description"]:
            raise FormatError(f"{where}.description must be a non-empty string",
                              path=path, field=where)
        anchors.append(AnchorPoint(
            id=raw["id"],
            position=_vec3(raw.get("position"), f"{where}.position", path),
            description=raw["description"],
        ))

    events = doc["supported_events"]
    if (not isinstance(events, list)
            or not all(isinstance(e, str) and e for e in events)):
        raise FormatError("supported_events must be an array of strings",
                          path=path, field="supported_events")

    raw_user = doc["user"]
    if not isinstance(raw_user, dict):
        raise FormatError("user must be an object", path=path, field="user")
    extra = set(raw_user) - {"center", "facing", "box_extents"}
    if extra:
        raise FormatError(f"unknown key(s) {sorted(extra)} in user", path=path, field="user")
    try:
        user = UserPose(
            center=_vec3(raw_user.get("center"), "user.center", path),
            facing=_vec3(raw_user.get("facing"), "user.facing", path),
            box_extents=_vec3(raw_user.get("box_extents"), "user.box_extents", path),
        )
        return SpatialData(anchors=anchors, supported_events=list(events), user=user)
    except ContractViolation as exc:
        raise FormatError(str(exc), path=path) from exc


def spatial_document(spatial: SpatialData) -> dict[str, Any]:
    return {
        "coordinate_system": COORDINATE_SYSTEM,
        "anchors": [
            {"id": a.id, "position": list(a.position), "description": a.description}
            for a in spatial.anchors
        ],
        "supported_events": list(spatial.supported_events),
        "user": {
            "center": list(spatial.user.center),
            "facing": list(spatial.user.facing),
            "box_extents": list(spatial.user.box_extents),
        },
    }


# ── State machine ───────────────────────────────────────────────────────────


def init_scene(spatial: SpatialData) -> SceneState:
    """Fresh scene over the given layout; anchor ids must be unique."""
    seen: set[str] = set()
    for anchor in spatial.anchors:
        if anchor.id in seen:
            raise FormatError(f"duplicate anchor id {anchor.id!r}")
        seen.add(anchor.id)
        anchor.occupied_by = None
    return SceneState(spatial=spatial)


def apply_event(scene: SceneState, event: RuntimeEvent) -> tuple[SceneState, str]:
    """Place a visualization; replaces in place when the anchor is occupied.

    Validation happens before any mutation, so a raising call leaves the
    scene exactly as it was.  The replacement, if any, is recorded in
    ``scene.last_delta``.
    """
    if event.event not in scene.spatial.supported_events:
        raise ProtocolError(f"unsupported event type {event.event!r}")
    anchor = scene.anchor(event.position)
    if anchor is None:
        raise ProtocolError(f"unknown anchor {event.position!r}")

    displaced = anchor.occupied_by
    if displaced is not None:
        del scene.visualizations[displaced]
    scene.seq += 1
    viz_id = f"{event.visualization_type}_{scene.seq:03d}"
    scene.visualizations[viz_id] = PlacedVisualization(event=event, seq=scene.seq)
    anchor.occupied_by = viz_id
    scene.last_delta = SceneDelta(placed=viz_id, displaced=displaced)
    return scene, viz_id


def snapshot(scene: SceneState) -> dict[str, Any]:
    """The scene as a canonical JSON-ready document.  Read-only."""
    return {
        "coordinate_system": COORDINATE_SYSTEM,
        "seq": scene.seq,
        "anchors": [
            {
                "id": anchor.id,
                "position": list(anchor.position),
                "description": anchor.description,
                "occupied_by": anchor.occupied_by,
            }
            for anchor in sorted(scene.spatial.anchors, key=lambda a: a.id)
        ],
        "user": {
            "center": list(scene.spatial.user.center),
            "facing": list(scene.spatial.user.facing),
            "box_extents": list(scene.spatial.user.box_extents),
        },
        "visualizations": {
            viz_id: {"event": placed.event.to_payload(), "seq": placed.seq}
            for viz_id, placed in sorted(scene.visualizations.items())
        },
    }


# ── Geometry ────────────────────────────────────────────────────────────────


def in_front(user: UserPose, point: Vec3, max_distance: float) -> bool:
    """Strictly ahead of the user's facing plane and within reach.

    A point on the plane through the user's center (including the center
    itself) is not in front.
    """
    if max_distance <= 0:
        raise ContractViolation("max_distance must be positive")
    delta = tuple(p - c for p, c in zip(point, user.center))
    ahead = sum(d * f for d, f in zip(delta, user.facing))
    if ahead <= 0.0:
        return False
    return math.sqrt(sum(d * d for d in delta)) <= max_distance
