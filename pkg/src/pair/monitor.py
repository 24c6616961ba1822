"""Passive signal monitoring: detection rules and attention tracking.

Detection is a fixed, ordered rule table over a signal batch; it is
stateless, so the only cross-batch state lives in the AttentionTracker,
which accumulates gaze dwell per object and fires edge-triggered attention
triples.  Splitting one batch into two never changes what gets emitted.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from numbers import Real

from .chronicle import Triple
from .errors import ContractViolation

__all__ = [
    "SIGNAL_KINDS",
    "Signal",
    "DetectedState",
    "AttentionTracker",
    "detect",
    "track_attention",
    "propose_update",
]

SIGNAL_KINDS = frozenset({
    "facial_expression",
    "gaze_direction",
    "gaze_target",
    "heart_rate",
})

DEFAULT_DWELL_THRESHOLD = 2.0   # seconds of gaze on one object
DEFAULT_MIN_CONFIDENCE = 0.8

GAZE_NOWHERE = "none"


@dataclass(frozen=True)
class Signal:
    kind: str
    value: str | float
    timestamp: float

    def __post_init__(self):
        if self.kind not in SIGNAL_KINDS:
            raise ContractViolation(f"unknown signal kind {self.kind!r}")
        if self.kind == "heart_rate":
            if not isinstance(self.value, Real) or isinstance(self.value, bool):
                raise ContractViolation("heart_rate value must be a number")
            if not 20 < self.value < 250:
                raise ContractViolation(
                    f"heart_rate {self.value} outside the plausible range (20, 250)")
        elif not isinstance(self.value, str) or not self.value:
            raise ContractViolation(f"{self.kind} value must be a non-empty string")
        if not isinstance(self.timestamp, Real) or isinstance(self.timestamp, bool):
            raise ContractViolation("signal timestamp must be a number")


@dataclass(frozen=True)
class DetectedState:
    label: str
    confidence: float
    evidence: frozenset[str]    # signal kinds that contributed


def _check_order(signals: list[Signal]) -> None:
    for earlier, later in zip(signals, signals[1:]):
        if later.timestamp < earlier.timestamp:
            raise ContractViolation("signals within a batch must be time-ordered")


def _batch_dwell(signals: list[Signal]) -> dict[str, float]:
    """Seconds of gaze per target, from consecutive gaze_target samples."""
    dwell: dict[str, float] = {}
    last: Signal | None = None
    for signal in signals:
        if signal.kind != "gaze_target":
            continue
        if last is not None and last.value != GAZE_NOWHERE:
            target = str(last.value)
            dwell[target] = dwell.get(target, 0.0) + max(0.0, signal.timestamp - last.timestamp)
        last = signal
    return dwell


def detect(signals: list[Signal],
           dwell_threshold: float = DEFAULT_DWELL_THRESHOLD) -> list[DetectedState]:
    """Apply the detection rule table to one batch.

    Rules, in order:
      low_brows + downward gaze          -> sad     (0.9)
      smile                              -> happy   (0.9)
      gaze dwell >= threshold on object  -> curious (0.7)

    A batch matching nothing yields an empty list; unknown values never fail.
    """
    _check_order(signals)
    expressions = {s.value for s in signals if s.kind == "facial_expression"}
    directions = {s.value for s in signals if s.kind == "gaze_direction"}
    states: list[DetectedState] = []
    if "low_brows" in expressions and "downward" in directions:
        states.append(DetectedState("sad", 0.9,
                                    frozenset({"facial_expression", "gaze_direction"})))
    if "smile" in expressions:
        states.append(DetectedState("happy", 0.9, frozenset({"facial_expression"})))
    if any(seconds >= dwell_threshold for seconds in _batch_dwell(signals).values()):
        states.append(DetectedState("curious", 0.7, frozenset({"gaze_target"})))
    return states


@dataclass
class AttentionTracker:
    """Cross-batch gaze accumulator with edge-triggered emission."""

    dwell_threshold: float = DEFAULT_DWELL_THRESHOLD
    dwell: dict[str, float] = field(default_factory=dict)
    emitted: set[str] = field(default_factory=set)
    curious_emitted: bool = False
    _last_gaze: Signal | None = None

    def __post_init__(self):
        if self.dwell_threshold <= 0:
            raise ContractViolation("dwell threshold must be positive")


def track_attention(tracker: AttentionTracker, signals: list[Signal]) -> list[Triple]:
    """Fold a batch into the tracker; emit triples for fresh threshold crossings.

    Each object fires <user, has_attention_on, id> exactly once, when its
    accumulated dwell first reaches the threshold; the very first crossing
    also fires <user, has_emotion, curious>.  Dwell intervals spanning a
    batch boundary are attributed via the remembered last gaze sample, so a
    split batch emits exactly what the combined batch would.
    """
    _check_order(signals)
    out: list[Triple] = []
    for signal in signals:
        if signal.kind != "gaze_target":
            continue
        last = tracker._last_gaze
        if last is not None and last.value != GAZE_NOWHERE:
            target = str(last.value)
            tracker.dwell[target] = (tracker.dwell.get(target, 0.0)
                                     + max(0.0, signal.timestamp - last.timestamp))
            if (tracker.dwell[target] >= tracker.dwell_threshold
                    and target not in tracker.emitted):
                tracker.emitted.add(target)
                out.append(Triple("user", "has_attention_on", target))
                if not tracker.curious_emitted:
                    tracker.curious_emitted = True
                    out.append(Triple("user", "has_emotion", "curious"))
        tracker._last_gaze = signal
    return out


def propose_update(states: list[DetectedState],
                   min_confidence: float = DEFAULT_MIN_CONFIDENCE) -> list[Triple]:
    """Emotion triples for states at or above the confidence floor,
    ordered by descending confidence, ties by label."""
    if not 0.0 <= min_confidence <= 1.0:
        raise ContractViolation("min_confidence must lie in [0, 1]")
    ranked = sorted(states, key=lambda s: (-s.confidence, s.label))
    return [Triple("user", "has_emotion", s.label)
            for s in ranked if s.confidence >= min_confidence]
