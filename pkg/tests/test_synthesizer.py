"""Media synthesis: exact pie proportions, retrieval framing, text panels."""

from fractions import Fraction

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from pair.errors import ContractViolation, DegenerateTotalError
from pair.synthesizer import (
    EMOTIONAL_TAGS,
    MediaObject,
    RetrievedRow,
    SpendingRecord,
    synthesize_generated,
    synthesize_pie,
    synthesize_retrieval,
)

from oracles import exact_proportions

SPENDING = [
    SpendingRecord("Dining", 320),
    SpendingRecord("Travel", 210),
    SpendingRecord("Groceries", 400),
]

BERLIN_ROW = RetrievedRow("mem_berlin", {
    "image": "user_best_friend_berlin_trip.jpg",
    "location": "Berlin",
    "sentiment": "positive",
})


# --- pie charts ---------------------------------------------------------


def test_pie_proportions_match_exact_arithmetic():
    media = synthesize_pie(SPENDING)
    exact = exact_proportions([r.amount for r in SPENDING])
    assert media.kind == "pie_chart"
    assert media.provenance == "generated"
    for piece, frac in zip(media.data, exact):
        assert piece.proportion == pytest.approx(float(frac), abs=1e-12)
    # spot values: 320/930, 210/930, 400/930
    assert media.data[0].proportion == pytest.approx(0.344086, abs=1e-6)
    assert media.data[1].proportion == pytest.approx(0.225806, abs=1e-6)
    assert media.data[2].proportion == pytest.approx(0.430108, abs=1e-6)


def test_pie_keeps_input_order():
    media = synthesize_pie(SPENDING)
    assert [s.category for s in media.data] == ["Dining", "Travel", "Groceries"]
    assert [s.amount for s in media.data] == [320, 210, 400]


def test_pie_single_row_is_whole():
    media = synthesize_pie([SpendingRecord("Rent", 1200.0)])
    assert media.data[0].proportion == 1.0


def test_pie_zero_total_is_degenerate():
    with pytest.raises(DegenerateTotalError):
        synthesize_pie([SpendingRecord("A", 0), SpendingRecord("B", 0.0)])


def test_pie_empty_rows_rejected():
    with pytest.raises(ContractViolation):
        synthesize_pie([])


def test_pie_source_refs_pass_through():
    media = synthesize_pie(SPENDING, source_refs=("s1", "s2", "s3"))
    assert media.source_refs == ("s1", "s2", "s3")


@pytest.mark.parametrize("category,amount", [
    ("", 10),            # empty category
    ("Dining", -1),      # negative amount
    ("Dining", "320"),   # stringly-typed amount
    ("Dining", True),    # bool is not a spending amount
])
def test_spending_record_validation(category, amount):
    with pytest.raises(ContractViolation):
        SpendingRecord(category, amount)


amounts_strategy = st.lists(
    st.floats(min_value=0, max_value=1e9, allow_nan=False, allow_infinity=False),
    min_size=1, max_size=12)


@given(amounts=amounts_strategy)
def test_pie_proportions_sum_to_one(amounts):
    rows = [SpendingRecord(f"c{i}", a) for i, a in enumerate(amounts)]
    if sum(amounts) == 0:
        with pytest.raises(DegenerateTotalError):
            synthesize_pie(rows)
        return
    media = synthesize_pie(rows)
    assert abs(sum(s.proportion for s in media.data) - 1.0) <= 1e-9


@settings(max_examples=60)
@given(amounts=amounts_strategy,
       scale=st.floats(min_value=1e-3, max_value=1e6,
                       allow_nan=False, allow_infinity=False))
def test_pie_proportions_scale_invariant(amounts, scale):
    if sum(amounts) == 0:
        return
    base = synthesize_pie([SpendingRecord(f"c{i}", a) for i, a in enumerate(amounts)])
    scaled = synthesize_pie(
        [SpendingRecord(f"c{i}", a * scale) for i, a in enumerate(amounts)])
    for lhs, rhs in zip(base.data, scaled.data):
        assert lhs.proportion == pytest.approx(rhs.proportion, abs=1e-9)


def test_exact_proportions_oracle_agrees_on_integers():
    # integer amounts stay exact through float division for these magnitudes
    exact = exact_proportions([320, 210, 400])
    assert exact == [Fraction(320, 930), Fraction(210, 930), Fraction(400, 930)]


# --- retrieved memories -------------------------------------------------


def test_retrieval_frames_top_memory(desk_graph):
    media = synthesize_retrieval([BERLIN_ROW], desk_graph)
    assert media.kind == "photo_frame"
    assert media.provenance == "retrieved"
    assert media.data == {
        "image": "user_best_friend_berlin_trip.jpg",
        "frame_color": "light_blue",
        "emotional_tag": "nostalgia",
    }
    assert media.source_refs == ("mem_berlin",)
    assert media.warnings == ()


def test_retrieval_first_row_wins(desk_graph):
    other = RetrievedRow("mem_other", {"image": "other.jpg", "sentiment": "neutral"})
    media = synthesize_retrieval([other, BERLIN_ROW], desk_graph)
    assert media.data["image"] == "other.jpg"
    assert media.data["emotional_tag"] == "calm"
    assert media.source_refs == ("mem_other",)


def test_retrieval_without_color_preference_falls_back(financial_graph):
    media = synthesize_retrieval([BERLIN_ROW], financial_graph)
    assert media.data["frame_color"] == "neutral_gray"
    assert len(media.warnings) == 1
    assert "favorite_color" in media.warnings[0]


def test_retrieval_suppresses_negative_memories(desk_graph):
    sad = RetrievedRow("mem_rainy", {"image": "rainy_window.jpg",
                                     "sentiment": "negative"})
    assert synthesize_retrieval([sad], desk_graph) is None


def test_retrieval_missing_sentiment_reads_neutral(desk_graph):
    bare = RetrievedRow("mem_x", {"image": "x.jpg"})
    media = synthesize_retrieval([bare], desk_graph)
    assert media.data["emotional_tag"] == EMOTIONAL_TAGS["neutral"]


@pytest.mark.parametrize("values", [
    {"sentiment": "positive"},            # image absent
    {"image": 7, "sentiment": "positive"},  # image not a string
    {"image": "", "sentiment": "positive"},  # image empty
])
def test_retrieval_requires_image_ref(desk_graph, values):
    with pytest.raises(ContractViolation):
        synthesize_retrieval([RetrievedRow("mem_x", values)], desk_graph)


def test_retrieval_empty_rows_rejected(desk_graph):
    with pytest.raises(ContractViolation):
        synthesize_retrieval([], desk_graph)


def test_retrieval_is_deterministic(desk_graph):
    first = synthesize_retrieval([BERLIN_ROW], desk_graph)
    second = synthesize_retrieval([BERLIN_ROW], desk_graph)
    assert first.data == second.data
    assert first.source_refs == second.source_refs


# --- generated text panels ----------------------------------------------


def test_generated_panel_quotes_string_properties(desk_graph):
    media = synthesize_generated(("mem_berlin",), "remember this", desk_graph)
    assert media.kind == "text_panel"
    assert media.provenance == "generated"
    text = media.data["text"]
    assert text.startswith("remember this: mem_berlin:")
    assert "location=Berlin" in text
    assert "sentiment=positive" in text


def test_generated_panel_sorts_conditioning_nodes(desk_graph):
    media = synthesize_generated(("mem_rainy", "mem_berlin"), "recap", desk_graph)
    text = media.data["text"]
    assert text.index("mem_berlin") < text.index("mem_rainy")
    assert media.source_refs == ("mem_berlin", "mem_rainy")


def test_generated_panel_requires_known_nodes(desk_graph):
    with pytest.raises(ContractViolation):
        synthesize_generated(("no_such_node",), "recap", desk_graph)


def test_generated_panel_requires_condition(desk_graph):
    with pytest.raises(ContractViolation):
        synthesize_generated((), "recap", desk_graph)


def test_media_object_rejects_unknown_provenance():
    with pytest.raises(ContractViolation):
        MediaObject(kind="pie_chart", data=[], provenance="hallucinated")
