import json
import random

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from pair.errors import ContractViolation, FormatError, ProtocolError
from pair.scene import (COORDINATE_SYSTEM, INSTANTIATE_VISUALIZATION,
                        AnchorPoint, RuntimeEvent, UserPose, apply_event,
                        in_front, init_scene, load_spatial, snapshot,
                        spatial_document)

PIE_EVENT = RuntimeEvent(
    event=INSTANTIATE_VISUALIZATION,
    visualization_type="pie_chart",
    data=[{"category": "Dining", "amount": 320},
          {"category": "Travel", "amount": 210},
          {"category": "Groceries", "amount": 400}],
    position="anchor_12",
)


def test_load_desk_spatial(desk_spatial):
    assert [a.id for a in desk_spatial.anchors] == ["anchor_07", "anchor_12"]
    assert INSTANTIATE_VISUALIZATION in desk_spatial.supported_events
    scene = init_scene(desk_spatial)
    assert all(a.occupied_by is None for a in scene.spatial.anchors)


def test_empty_anchor_list_is_valid(desk_scenario):
    doc = dict(desk_scenario["spatial"], anchors=[])
    scene = init_scene(load_spatial(doc))
    assert snapshot(scene)["anchors"] == []
    assert snapshot(scene)["coordinate_system"] == COORDINATE_SYSTEM


def test_duplicate_anchor_id_rejected(desk_scenario):
    doc = json.loads(json.dumps(desk_scenario["spatial"]))
    doc["anchors"].append(dict(doc["anchors"][1]))
    with pytest.raises(FormatError, match="anchor_12"):
        init_scene(load_spatial(doc))


def test_unknown_spatial_keys_rejected(desk_scenario):
    doc = dict(desk_scenario["spatial"], extra=1)
    with pytest.raises(FormatError, match="extra"):
        load_spatial(doc)


def test_spatial_must_support_instantiation(desk_scenario):
    doc = dict(desk_scenario["spatial"], supported_events=["teleport"])
    with pytest.raises(FormatError, match="instantiate_visualization"):
        load_spatial(doc)


def test_user_pose_validation():
    with pytest.raises(ContractViolation):
        UserPose(center=(0, 0, 0), facing=(0, 0, 0), box_extents=(1, 1, 1))
    with pytest.raises(ContractViolation):
        UserPose(center=(0, 0, 0), facing=(0, 0, 1), box_extents=(-1, 1, 1))
    pose = UserPose(center=(0, 0, 0), facing=(0, 0, 2), box_extents=(1, 1, 1))
    assert pose.facing == (0.0, 0.0, 1.0)  # normalized on construction


def test_anchor_description_required():
    with pytest.raises(ContractViolation):
        AnchorPoint(id="a", position=(0, 0, 0), description="")


# ── Event application ────────────────────────────────────────────────────────


def test_pie_event_gets_sequential_id(desk_spatial):
    scene = init_scene(desk_spatial)
    scene, viz_id = apply_event(scene, PIE_EVENT)
    assert viz_id == "pie_chart_001"
    assert scene.last_delta.placed == "pie_chart_001"
    assert scene.last_delta.displaced is None
    assert scene.anchor("anchor_12").occupied_by == "pie_chart_001"


def test_photo_frame_event_id(desk_spatial):
    scene = init_scene(desk_spatial)
    event = RuntimeEvent(event=INSTANTIATE_VISUALIZATION,
                         visualization_type="photo_frame",
                         data=[{"image": "x.jpg", "frame_color": "light_blue",
                                "emotional_tag": "nostalgia"}],
                         position="anchor_07")
    _, viz_id = apply_event(scene, event)
    assert viz_id == "photo_frame_001"


def test_sequence_spans_types(desk_spatial):
    scene = init_scene(desk_spatial)
    _, first = apply_event(scene, PIE_EVENT)
    event = RuntimeEvent(event=INSTANTIATE_VISUALIZATION,
                         visualization_type="photo_frame",
                         data=[{"image": "x.jpg"}], position="anchor_07")
    _, second = apply_event(scene, event)
    assert (first, second) == ("pie_chart_001", "photo_frame_002")


def test_replacement_records_displaced(desk_spatial):
    scene = init_scene(desk_spatial)
    apply_event(scene, PIE_EVENT)
    scene, viz_id = apply_event(scene, PIE_EVENT)
    assert viz_id == "pie_chart_002"
    assert scene.last_delta.displaced == "pie_chart_001"
    assert [v.seq for v in scene.visualizations.values()] == [2]


def test_unknown_anchor_is_protocol_error(desk_spatial):
    scene = init_scene(desk_spatial)
    bad = RuntimeEvent(event=INSTANTIATE_VISUALIZATION,
                       visualization_type="pie_chart",
                       data=[], position="nowhere")
    with pytest.raises(ProtocolError, match="nowhere"):
        apply_event(scene, bad)


def test_unsupported_event_is_protocol_error(desk_spatial):
    scene = init_scene(desk_spatial)
    bad = RuntimeEvent(event=INSTANTIATE_VISUALIZATION,
                       visualization_type="pie_chart",
                       data=[], position="anchor_12")
    scene.spatial.supported_events = ("other_thing",)
    with pytest.raises(ProtocolError):
        apply_event(scene, bad)


def test_failed_event_leaves_scene_untouched(desk_spatial):
    scene = init_scene(desk_spatial)
    apply_event(scene, PIE_EVENT)
    before = snapshot(scene)
    bad = RuntimeEvent(event=INSTANTIATE_VISUALIZATION,
                       visualization_type="pie_chart",
                       data=[], position="nowhere")
    with pytest.raises(ProtocolError):
        apply_event(scene, bad)
    assert snapshot(scene) == before
    _, viz_id = apply_event(scene, PIE_EVENT)
    assert viz_id == "pie_chart_002"  # seq was not burned by the failure


# ── Snapshots ────────────────────────────────────────────────────────────────


def test_fresh_snapshot(desk_spatial):
    doc = snapshot(init_scene(desk_spatial))
    assert [a["id"] for a in doc["anchors"]] == ["anchor_07", "anchor_12"]
    assert doc["visualizations"] == {}
    assert doc["coordinate_system"] == COORDINATE_SYSTEM


def test_snapshot_contains_event_payload_verbatim(desk_spatial):
    scene = init_scene(desk_spatial)
    apply_event(scene, PIE_EVENT)
    doc = snapshot(scene)
    assert set(doc["visualizations"]) == {"pie_chart_001"}
    viz = doc["visualizations"]["pie_chart_001"]
    assert viz["event"]["data"] == PIE_EVENT.data
    assert viz["event"]["interaction"] == "enabled"


def test_snapshot_idempotent(desk_spatial):
    scene = init_scene(desk_spatial)
    apply_event(scene, PIE_EVENT)
    first = json.dumps(snapshot(scene), sort_keys=True)
    second = json.dumps(snapshot(scene), sort_keys=True)
    assert first == second


def test_spatial_document_round_trip(desk_scenario):
    spatial = load_spatial(desk_scenario["spatial"])
    assert load_spatial(spatial_document(spatial)) == spatial


# ── Frontal geometry ─────────────────────────────────────────────────────────

ORIGIN_POSE = UserPose(center=(0, 0, 0), facing=(0, 0, 1),
                       box_extents=(0.4, 0.9, 0.3))


def test_in_front_basic_cases():
    assert in_front(ORIGIN_POSE, (0, 0, 1.5), 5.0)
    assert not in_front(ORIGIN_POSE, (0, 0, -2.0), 5.0)
    assert not in_front(ORIGIN_POSE, (0, 0, 0), 5.0)  # strict: center excluded
    assert in_front(ORIGIN_POSE, (0, 0, 5.0), 5.0)    # distance bound inclusive
    assert not in_front(ORIGIN_POSE, (0, 0, 5.0 + 1e-9), 5.0)


def test_in_front_lateral_point_counts_if_ahead():
    # any positive forward component qualifies; the cone is a half-space
    assert in_front(ORIGIN_POSE, (3, 0, 0.1), 5.0)
    assert not in_front(ORIGIN_POSE, (3, 0, 0.0), 5.0)


@given(st.floats(0.01, 100.0))
@settings(max_examples=60)
def test_in_front_invariant_under_facing_scale(scale):
    scaled = UserPose(center=(0, 0, 0), facing=(0, 0, scale),
                      box_extents=(0.4, 0.9, 0.3))
    for point in [(0, 0, 1.5), (0, 0, -2.0), (1, 1, 1), (-1, 0, 4.9)]:
        assert in_front(scaled, point, 5.0) == in_front(ORIGIN_POSE, point, 5.0)


# ── Events as payloads ───────────────────────────────────────────────────────


def test_event_payload_round_trip():
    payload = PIE_EVENT.to_payload()
    assert payload["interaction"] == "enabled"
    assert RuntimeEvent.from_payload(payload) == PIE_EVENT


def test_event_payload_strict_keys():
    payload = PIE_EVENT.to_payload()
    payload["surprise"] = 1
    with pytest.raises(FormatError, match="surprise"):
        RuntimeEvent.from_payload(payload)


@given(st.integers(1, 12))
@settings(max_examples=30)
def test_sequence_strictly_increasing(count):
    rng = random.Random(count)
    import oracles as O
    _, anchors, _ = O.random_scene(rng, max_anchors=6)
    doc = {"coordinate_system": COORDINATE_SYSTEM,
           "anchors": [{"id": a.id, "position": list(a.position),
                        "description": a.description} for a in anchors],
           "supported_events": [INSTANTIATE_VISUALIZATION],
           "user": {"center": [0, 0, 0], "facing": [0, 0, 1],
                    "box_extents": [0.4, 0.9, 0.3]}}
    scene = init_scene(load_spatial(doc))
    seen = []
    for i in range(count):
        anchor = rng.choice(anchors).id
        event = RuntimeEvent(event=INSTANTIATE_VISUALIZATION,
                             visualization_type=rng.choice(["pie_chart", "photo_frame"]),
                             data=[], position=anchor)
        _, viz_id = apply_event(scene, event)
        seen.append(viz_id)
    assert len(set(seen)) == count           # ids never reused
    assert scene.seq == count                # one tick per successful event
    live = sorted(v.seq for v in scene.visualizations.values())
    assert live == sorted(set(live))         # live seqs unique & increasing
