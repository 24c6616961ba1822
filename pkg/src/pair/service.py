"""Session service: envelopes in, envelopes out.

Messages travel as envelopes — ``{"type", "session_id", "seq", "ts",
"payload"}`` — over newline-delimited JSON (one envelope per line) or
in-process.  Inbound types are ``init_spatial_data``, ``user_prompt``,
``signal_batch``, and ``snapshot_request``; outbound are ``snapshot``,
``event_out``, ``chronicle_update``, ``reasoning_trace``, and ``error``.

Each session owns a scene, an attention tracker, and a reference to its
user's Chronicle.  Message handling is transactional with respect to the
scene: when any stage fails, the reply is a single error envelope naming the
stage and the scene is exactly what it was before the message.

Traces are deterministic: identical scenario input produces byte-identical
envelope streams once the wall-clock ``ts`` fields are stripped.
"""

from __future__ import annotations

import json
import socketserver
import threading
import time
from dataclasses import dataclass, field
from typing import Any, Callable

from .chronicle import (
    ChronicleGraph,
    ChroniclePool,
    Triple,
    apply_update,
    load_chronicle,
    match_pattern_with_bindings,
    pool_get,
)
from .errors import ContractViolation, FormatError, PairError, ProtocolError
from .monitor import (
    DEFAULT_DWELL_THRESHOLD,
    DEFAULT_MIN_CONFIDENCE,
    AttentionTracker,
    Signal,
    detect,
    propose_update,
    track_attention,
)
from .query import QueryAst, execute, format_query
from .reasoner import (
    ReasonerConfig,
    ReasoningPlan,
    RetrievalIntent,
    align_nodes,
    extract_entities_relations,
    formulate_query,
    infer_affordance,
    resolve_anchor,
    resolve_anchor_trace,
    select_emotional_goal,
)
from .scene import RuntimeEvent, SceneState, apply_event, init_scene, load_spatial, snapshot
from .scribe import (
    SituationGraph,
    interpret_signals,
    parse_user_request,
    render_xr_script,
)
from .synthesizer import (
    MediaObject,
    RetrievedRow,
    SpendingRecord,
    synthesize_generated,
    synthesize_pie,
    synthesize_retrieval,
)

__all__ = [
    "ENVELOPE_TYPES",
    "ServiceConfig",
    "Session",
    "PairService",
    "ScenarioResult",
    "run_scenario",
    "serve",
    "strip_trace",
    "first_divergence",
]

ENVELOPE_TYPES = frozenset({
    "init_spatial_data",
    "user_prompt",
    "signal_batch",
    "snapshot_request",
    "event_out",
    "chronicle_update",
    "snapshot",
    "reasoning_trace",
    "error",
})

INBOUND_TYPES = frozenset({
    "init_spatial_data", "user_prompt", "signal_batch", "snapshot_request"})

# intent family -> what kind of surface the visualization needs
AFFORDANCE_NEEDS = {
    "visualize": "display data",
    "retrieve_memory": "display an emotional memory photo",
}


@dataclass
class ServiceConfig:
    reasoner: ReasonerConfig = field(default_factory=ReasonerConfig.from_env)
    min_confidence: float = DEFAULT_MIN_CONFIDENCE
    dwell_threshold: float = DEFAULT_DWELL_THRESHOLD

    @classmethod
    def from_document(cls, doc: dict[str, Any]) -> "ServiceConfig":
        known = {"theta", "max_front_distance", "top_k", "min_confidence",
                 "dwell_threshold"}
        unknown = set(doc) - known
        if unknown:
            raise FormatError(f"unknown config key(s) {sorted(unknown)}")
        overrides: dict[str, Any] = {}
        if "theta" in doc:
            overrides["similarity_threshold"] = float(doc["theta"])
        if "max_front_distance" in doc:
            overrides["max_front_distance"] = float(doc["max_front_distance"])
        if "top_k" in doc:
            overrides["top_k"] = int(doc["top_k"])
        config = cls(reasoner=ReasonerConfig.from_env(**overrides))
        if "min_confidence" in doc:
            config.min_confidence = float(doc["min_confidence"])
        if "dwell_threshold" in doc:
            config.dwell_threshold = float(doc["dwell_threshold"])
        return config


@dataclass
class Session:
    id: str
    scene: SceneState
    graph: ChronicleGraph
    requester: str
    tracker: AttentionTracker
    app_goal: str | None = None
    last_situation: SituationGraph | None = None
    seq_out: int = 0
    seq_in: int = 0


class _StageFailure(Exception):
    """Internal: wraps a PairError with the pipeline stage that raised it."""

    def __init__(self, stage: str, error: PairError):
        super().__init__(str(error))
        self.stage = stage
        self.error = error


class PairService:
    """Envelope dispatcher over a chronicle pool.

    One instance can serve many sessions; sessions are isolated from each
    other (separate scenes and trackers) and individually serial.
    """

    def __init__(self, pool: ChroniclePool, config: ServiceConfig | None = None):
        self.pool = pool
        self.config = config or ServiceConfig()
        self.sessions: dict[str, Session] = {}
        self._session_counter = 0
        self._lock = threading.Lock()

    # ── envelope plumbing ──────────────────────────────────────────────

    def _emit(self, session: Session | None, env_type: str, payload: dict) -> dict:
        if session is None:
            return {"type": env_type, "session_id": "", "seq": 0,
                    "ts": time.time(), "payload": payload}
        session.seq_out += 1
        return {"type": env_type, "session_id": session.id, "seq": session.seq_out,
                "ts": time.time(), "payload": payload}

    def _error(self, session: Session | None, stage: str, error: Exception) -> dict:
        return self._emit(session, "error", {
            "stage": stage,
            "error": type(error).__name__,
            "message": str(error),
        })

    def handle_envelope(self, envelope: dict) -> list[dict]:
        """Process one inbound envelope and return the outbound envelopes."""
        if not isinstance(envelope, dict) or "type" not in envelope:
            return [self._error(None, "envelope", ProtocolError("envelope must be an object with a type"))]
        env_type = envelope["type"]
        if env_type not in ENVELOPE_TYPES:
            return [self._error(None, "envelope", ProtocolError(f"unknown envelope type {env_type!r}"))]
        if env_type not in INBOUND_TYPES:
            return [self._error(None, "envelope", ProtocolError(f"{env_type!r} is not an inbound type"))]
        payload = envelope.get("payload")
        if not isinstance(payload, dict):
            return [self._error(None, "envelope", ProtocolError("envelope payload must be an object"))]

        if env_type == "init_spatial_data":
            return self.handle_init(payload)

        session = self.sessions.get(envelope.get("session_id", ""))
        if session is None:
            return [self._error(None, "envelope",
                                ProtocolError(f"unknown session {envelope.get('session_id')!r}"))]
        session.seq_in += 1
        if env_type == "user_prompt":
            return self.handle_prompt(session, payload)
        if env_type == "signal_batch":
            return self.handle_signals(session, payload)
        return [self._emit(session, "snapshot", snapshot(session.scene))]

    # ── init ───────────────────────────────────────────────────────────

    def handle_init(self, payload: dict) -> list[dict]:
        """Open a session: spatial layout plus chronicle access.

        The acknowledgement is a snapshot envelope carrying the new session
        id and the fresh (empty) scene.
        """
        try:
            known = {"spatial", "owner", "requester", "app_goal"}
            unknown = set(payload) - known
            if unknown:
                raise FormatError(f"unknown init key(s) {sorted(unknown)}")
            for key in ("spatial", "owner"):
                if key not in payload:
                    raise FormatError(f"init payload needs {key!r}")
            owner = payload["owner"]
            requester = payload.get("requester", owner)
            app_goal = payload.get("app_goal")
            if app_goal is not None and (not isinstance(app_goal, str) or not app_goal):
                raise FormatError("app_goal must be a non-empty string or absent")
            spatial = load_spatial(payload["spatial"])
            graph = pool_get(self.pool, owner, requester)
            scene = init_scene(spatial)
        except PairError as exc:
            return [self._error(None, "init", exc)]

        with self._lock:
            self._session_counter += 1
            session = Session(
                id=f"session_{self._session_counter:03d}",
                scene=scene,
                graph=graph,
                requester=requester,
                tracker=AttentionTracker(dwell_threshold=self.config.dwell_threshold),
                app_goal=app_goal,
            )
            self.sessions[session.id] = session
        return [self._emit(session, "snapshot", snapshot(session.scene))]

    # ── prompt pipeline ────────────────────────────────────────────────

    def handle_prompt(self, session: Session, payload: dict) -> list[dict]:
        """Parse, ground, query, synthesize, render, place; then report."""
        text = payload.get("text")
        if not isinstance(text, str) or not text:
            return [self._error(session, "envelope",
                                ProtocolError("user_prompt payload needs non-empty text"))]
        trace_lines: list[dict] = []
        try:
            plan, media, anchor_id = self._prompt_plan(session, text, trace_lines)
            event = self._stage("render", render_xr_script, media, anchor_id)
            _, viz_id = self._stage("scene", apply_event, session.scene, event)
            trace_lines.append({"stage": "scene", "placed": viz_id,
                                "displaced": session.scene.last_delta.displaced})
        except _StageFailure as failure:
            return [self._error(session, failure.stage, failure.error)]
        out = [self._emit(session, "event_out", event.to_payload())]
        out.append(self._emit(session, "snapshot", snapshot(session.scene)))
        out.append(self._emit(session, "reasoning_trace", {"lines": trace_lines}))
        return out

    def _stage(self, stage: str, fn: Callable, *args, **kwargs):
        try:
            return fn(*args, **kwargs)
        except PairError as exc:
            raise _StageFailure(stage, exc) from exc

    def _prompt_plan(self, session: Session, text: str,
                     trace_lines: list[dict]) -> tuple[ReasoningPlan, MediaObject, str]:
        config = self.config.reasoner
        plan = ReasoningPlan(modes=("semantic", "spatial"))

        situation = self._stage("scribe", parse_user_request, text,
                                session.last_situation, session.scene.spatial)
        session.last_situation = situation
        trace_lines.append({"stage": "scribe",
                            "situation": [t.as_list() for t in situation.triples]})

        extraction = self._stage("extract", extract_entities_relations, situation)
        plan.extraction = extraction
        trace_lines.append({"stage": "extract",
                            "entities": list(extraction.entities),
                            "relations": list(extraction.relations)})

        aligned = self._stage("align", align_nodes, situation, session.graph, config)
        plan.aligned = tuple(aligned)
        trace_lines.append({"stage": "align",
                            "nodes": [[node_id, score] for node_id, score in aligned]})

        ast = self._stage("formulate_query", formulate_query,
                          extraction, aligned, session.graph, session.requester)
        plan.query = ast
        rows_bound = self._stage("query", match_pattern_with_bindings, session.graph, ast)
        trace_lines.append({"stage": "query", "text": format_query(ast),
                            "rows": [list(row) for row, _ in rows_bound]})

        anchor_id = self._resolve_placement(session, situation, extraction,
                                            config, trace_lines)
        plan.anchor = anchor_id

        media = self._synthesize_for_prompt(session, extraction, ast, rows_bound)
        trace_lines.append({"stage": "synthesize", "kind": media.kind,
                            "provenance": media.provenance,
                            "source_refs": list(media.source_refs),
                            "warnings": list(media.warnings)})
        return plan, media, anchor_id

    def _resolve_placement(self, session: Session, situation: SituationGraph,
                           extraction, config: ReasonerConfig,
                           trace_lines: list[dict]) -> str:
        anchors = session.scene.spatial.anchors
        user = session.scene.spatial.user
        location = situation.first_object("has_target_location")
        if location is not None:
            resolution = self._stage("resolve_anchor", resolve_anchor_trace,
                                     location, anchors, user, config)
            trace_lines.append({
                "stage": "resolve_anchor",
                "reference": location,
                "similarities": {k: resolution.similarities[k]
                                 for k in sorted(resolution.similarities)},
                "semantic_matches": list(resolution.semantic_matches),
                "front_matches": list(resolution.front_matches),
                "chosen": resolution.chosen,
            })
            return self._stage("resolve_anchor", resolve_anchor,
                               location, anchors, user, config)
        need = self._affordance_need(extraction)
        ranked = self._stage("infer_affordance", infer_affordance, need, anchors, config)
        trace_lines.append({"stage": "infer_affordance", "need": need,
                            "ranked": ranked})
        if not ranked:
            raise _StageFailure("infer_affordance", ContractViolation(
                f"no anchor affords {need!r}")) from None
        return ranked[0]

    @staticmethod
    def _affordance_need(extraction) -> str:
        for intent in extraction.relations:
            if intent.startswith("visualize"):
                return AFFORDANCE_NEEDS["visualize"]
            if intent in AFFORDANCE_NEEDS:
                return AFFORDANCE_NEEDS[intent]
        return "display data"

    def _synthesize_for_prompt(self, session: Session, extraction,
                               ast: QueryAst, rows_bound) -> MediaObject:
        intents = extraction.relations
        target_var = ast.nodes[-1].var
        columns = [proj.prop for proj in ast.returns]
        if any(intent.startswith("visualize") for intent in intents):
            if not rows_bound:
                raise _StageFailure("synthesize", ContractViolation(
                    "the query returned no rows to visualize"))
            try:
                records = [SpendingRecord(category=row[columns.index("category")],
                                          amount=row[columns.index("amount")])
                           for row, _ in rows_bound]
            except (ValueError, IndexError):
                raise _StageFailure("synthesize", ContractViolation(
                    "visualization rows need category and amount columns")) from None
            refs = tuple(binding[target_var] for _, binding in rows_bound)
            return self._stage("synthesize", synthesize_pie, records, refs)
        if "retrieve_memory" in intents:
            rows = [RetrievedRow(node_id=binding[target_var],
                                 values=dict(zip(columns, row)))
                    for row, binding in rows_bound]
            if not rows:
                raise _StageFailure("synthesize", ContractViolation(
                    "no memories matched the request"))
            media = self._stage("synthesize", synthesize_retrieval, rows, session.graph)
            if media is None:
                raise _StageFailure("synthesize", ContractViolation(
                    "the matching memory is suppressed"))
            return media
        refs = tuple(binding[target_var] for _, binding in rows_bound)
        if not refs:
            raise _StageFailure("synthesize", ContractViolation(
                "the query returned no rows to describe"))
        intent = intents[0] if intents else "describe"
        return self._stage("synthesize", synthesize_generated, refs, intent, session.graph)

    # ── signal pipeline ────────────────────────────────────────────────

    def handle_signals(self, session: Session, payload: dict) -> list[dict]:
        """Detect states, track attention, update the Chronicle, and, when a
        session goal is set and missed, steer the scene toward it.

        A batch that triggers nothing produces no envelopes at all.
        """
        raw = payload.get("signals")
        if not isinstance(raw, list):
            return [self._error(session, "signals",
                                ProtocolError("signal_batch payload needs a signals array"))]
        try:
            signals = [self._parse_signal(item) for item in raw]
            states = detect(signals, self.config.dwell_threshold)
            attention = track_attention(session.tracker, signals)
        except PairError as exc:
            return [self._error(session, "signals", exc)]

        out: list[dict] = []
        trace_lines: list[dict] = [{
            "stage": "detect",
            "states": [{"label": s.label, "confidence": s.confidence,
                        "evidence": sorted(s.evidence)} for s in states],
        }]

        updates = attention + propose_update(states, self.config.min_confidence)
        if updates:
            stamp = int(signals[-1].timestamp) if signals else None
            report = apply_update(session.graph, updates, source="monitor",
                                  timestamp=stamp)
            out.append(self._emit(session, "chronicle_update", {
                "source": "monitor",
                "materialized": [t.as_list() for t in report.materialized],
                "logged_only": [t.as_list() for t in report.logged_only],
            }))
            trace_lines.append({"stage": "chronicle_update",
                                "materialized": [t.as_list() for t in report.materialized],
                                "logged_only": [t.as_list() for t in report.logged_only]})

        if session.app_goal and states:
            out.extend(self._pursue_goal(session, states, trace_lines))

        # an error anywhere suppresses the trace envelope, never the record
        # of chronicle updates that really happened
        if out and not any(envelope["type"] == "error" for envelope in out):
            out.append(self._emit(session, "reasoning_trace", {"lines": trace_lines}))
        return out

    @staticmethod
    def _parse_signal(item: Any) -> Signal:
        if not isinstance(item, dict):
            raise ProtocolError("each signal must be an object")
        unknown = set(item) - {"kind", "value", "t"}
        if unknown:
            raise ProtocolError(f"unknown signal key(s) {sorted(unknown)}")
        missing = {"kind", "value", "t"} - set(item)
        if missing:
            raise ProtocolError(f"signal needs key(s) {sorted(missing)}")
        return Signal(kind=item["kind"], value=item["value"], timestamp=item["t"])

    def _pursue_goal(self, session: Session, states, trace_lines: list[dict]) -> list[dict]:
        config = self.config.reasoner
        try:
            situation = self._stage("scribe", interpret_signals, states)
            session.last_situation = situation
            trace_lines.append({"stage": "scribe",
                                "situation": [t.as_list() for t in situation.triples]})
            goal = self._stage("select_goal", select_emotional_goal,
                               situation, session.app_goal, session.graph)
            trace_lines.append({"stage": "select_goal", "kind": goal.kind,
                                "filters": dict(goal.filters),
                                "candidates": list(goal.candidates)})
            if goal.kind == "no_op" or not goal.filters:
                return []
            ast = self._stage("formulate_query", formulate_query,
                              extract_entities_relations(situation), [],
                              session.graph, session.requester, goal=goal)
            rows_bound = self._stage("query", match_pattern_with_bindings,
                                     session.graph, ast)
            trace_lines.append({"stage": "query", "text": format_query(ast),
                                "rows": [list(row) for row, _ in rows_bound]})
            if not rows_bound:
                return []
            target_var = ast.nodes[-1].var
            columns = [proj.prop for proj in ast.returns]
            rows = [RetrievedRow(node_id=binding[target_var],
                                 values=dict(zip(columns, row)))
                    for row, binding in rows_bound]
            media = self._stage("synthesize", synthesize_retrieval, rows, session.graph)
            if media is None:
                return []
            need = AFFORDANCE_NEEDS["retrieve_memory"]
            ranked = self._stage("infer_affordance", infer_affordance,
                                 need, session.scene.spatial.anchors, config)
            trace_lines.append({"stage": "infer_affordance", "need": need,
                                "ranked": ranked})
            if not ranked:
                return []
            event = self._stage("render", render_xr_script, media, ranked[0])
            _, viz_id = self._stage("scene", apply_event, session.scene, event)
            trace_lines.append({"stage": "scene", "placed": viz_id,
                                "displaced": session.scene.last_delta.displaced})
        except _StageFailure as failure:
            return [self._error(session, failure.stage, failure.error)]
        return [self._emit(session, "event_out", event.to_payload()),
                self._emit(session, "snapshot", snapshot(session.scene))]


# ── Scenario runner ─────────────────────────────────────────────────────────


@dataclass
class ScenarioResult:
    exit_code: int
    trace: list[dict]
    divergence: str | None = None


def strip_trace(trace: list[dict]) -> list[dict]:
    """Comparison form: drop wall-clock stamps and reasoning_trace envelopes."""
    stripped = []
    for envelope in trace:
        if envelope.get("type") == "reasoning_trace":
            continue
        clone = {key: value for key, value in envelope.items() if key != "ts"}
        stripped.append(clone)
    return stripped


def first_divergence(actual: list[dict], expected: list[dict]) -> str | None:
    """Dotted path to the first difference, or None when traces agree."""

    def walk(a: Any, b: Any, path: str) -> str | None:
        if isinstance(a, dict) and isinstance(b, dict):
            for key in sorted(set(a) | set(b)):
                if key not in a:
                    return f"{path}.{key}: missing in actual"
                if key not in b:
                    return f"{path}.{key}: unexpected in actual"
                found = walk(a[key], b[key], f"{path}.{key}")
                if found:
                    return found
            return None
        if isinstance(a, list) and isinstance(b, list):
            for i, (item_a, item_b) in enumerate(zip(a, b)):
                found = walk(item_a, item_b, f"{path}[{i}]")
                if found:
                    return found
            if len(a) != len(b):
                return f"{path}: length {len(a)} != {len(b)}"
            return None
        if type(a) is bool or type(b) is bool:
            if a is not b:
                return f"{path}: {a!r} != {b!r}"
            return None
        if isinstance(a, (int, float)) and isinstance(b, (int, float)):
            if a != b:
                return f"{path}: {a!r} != {b!r}"
            return None
        if a != b:
            return f"{path}: {a!r} != {b!r}"
        return None

    def seq_label(i: int) -> str:
        # Divergence reports address envelopes by their seq, not list index.
        for side in (actual, expected):
            if i < len(side) and isinstance(side[i], dict) and "seq" in side[i]:
                return f"envelope seq={side[i]['seq']}"
        return f"envelope[{i}]"

    for i in range(min(len(actual), len(expected))):
        found = walk(actual[i], expected[i], seq_label(i))
        if found:
            return found
    if len(actual) != len(expected):
        return (f"trace: {len(actual)} envelopes != {len(expected)} expected "
                f"(first unmatched: {seq_label(min(len(actual), len(expected)))})")
    return None


def load_scenario(path: str) -> dict:
    with open(path, "r", encoding="utf-8") as handle:
        try:
            doc = json.load(handle)
        except json.JSONDecodeError as exc:
            raise FormatError(f"invalid JSON: {exc}", path=path) from exc
    if not isinstance(doc, dict):
        raise FormatError("scenario must be an object", path=path)
    required = {"spatial", "chronicle", "steps"}
    optional = {"app_goal", "expect"}
    unknown = set(doc) - required - optional
    if unknown:
        raise FormatError(f"unknown scenario key(s) {sorted(unknown)}", path=path)
    missing = required - set(doc)
    if missing:
        raise FormatError(f"missing scenario key(s) {sorted(missing)}", path=path)
    if not isinstance(doc["steps"], list):
        raise FormatError("steps must be an array", path=path)
    for i, step in enumerate(doc["steps"]):
        if not isinstance(step, dict) or len(step) != 1 or not (
                "prompt" in step or "signals" in step):
            raise FormatError(f"steps[{i}] must be {{'prompt': ...}} or {{'signals': ...}}",
                              path=path)
    return doc


def run_scenario(path: str, expect_path: str | None = None,
                 emit_path: str | None = None,
                 config: ServiceConfig | None = None) -> ScenarioResult:
    """Replay a scenario file against a fresh in-process service.

    The scenario's chronicle path is resolved relative to the scenario file.
    When an expected trace is available (the ``--expect`` file wins over the
    scenario's inline ``expect``), the actual trace is compared against it
    after stripping timestamps and reasoning_trace envelopes; a mismatch
    reports the path of the first divergence.
    """
    import os

    scenario = load_scenario(path)
    base = os.path.dirname(os.path.abspath(path))
    chronicle_path = os.path.join(base, scenario["chronicle"])
    graph = load_chronicle(chronicle_path)
    pool = ChroniclePool()
    pool.add(graph)
    service = PairService(pool, config)

    trace: list[dict] = []
    seq_in = 0

    def send(env_type: str, payload: dict, session_id: str = "") -> list[dict]:
        nonlocal seq_in
        seq_in += 1
        outs = service.handle_envelope({
            "type": env_type, "session_id": session_id, "seq": seq_in,
            "ts": time.time(), "payload": payload,
        })
        trace.extend(outs)
        return outs

    init_payload: dict[str, Any] = {
        "spatial": scenario["spatial"],
        "owner": graph.owner,
        "requester": graph.owner,
    }
    if scenario.get("app_goal"):
        init_payload["app_goal"] = scenario["app_goal"]
    acks = send("init_spatial_data", init_payload)
    session_id = acks[0].get("session_id", "") if acks else ""

    for step in scenario["steps"]:
        if "prompt" in step:
            send("user_prompt", {"text": step["prompt"]}, session_id)
        else:
            send("signal_batch", {"signals": step["signals"]}, session_id)

    if emit_path:
        with open(emit_path, "w", encoding="utf-8") as handle:
            json.dump(trace, handle, indent=2, sort_keys=True)
            handle.write("\n")

    expected: list[dict] | None = None
    if expect_path:
        with open(expect_path, "r", encoding="utf-8") as handle:
            expected = json.load(handle)
    elif scenario.get("expect") is not None:
        expected = scenario["expect"]

    if expected is None:
        return ScenarioResult(exit_code=0, trace=trace)

    divergence = first_divergence(strip_trace(trace), strip_trace(expected))
    if divergence is None:
        return ScenarioResult(exit_code=0, trace=trace)
    return ScenarioResult(exit_code=1, trace=trace, divergence=divergence)


# ── TCP transport ───────────────────────────────────────────────────────────


class _EnvelopeHandler(socketserver.StreamRequestHandler):
    def handle(self):
        service: PairService = self.server.service  # type: ignore[attr-defined]
        for line in self.rfile:
            line = line.strip()
            if not line:
                continue
            try:
                envelope = json.loads(line)
            except json.JSONDecodeError as exc:
                replies = [service._error(None, "envelope",
                                          ProtocolError(f"invalid JSON: {exc}"))]
            else:
                replies = service.handle_envelope(envelope)
            for reply in replies:
                self.wfile.write(json.dumps(reply, sort_keys=True).encode("utf-8"))
                self.wfile.write(b"\n")
            self.wfile.flush()


class EnvelopeServer(socketserver.ThreadingTCPServer):
    allow_reuse_address = True
    daemon_threads = True

    def __init__(self, addr: tuple[str, int], service: PairService):
        super().__init__(addr, _EnvelopeHandler)
        self.service = service


def serve(addr: str, pool: ChroniclePool, config: ServiceConfig | None = None) -> None:
    """Serve newline-delimited JSON envelopes over TCP until interrupted."""
    host, _, port = addr.rpartition(":")
    if not host or not port.isdigit():
        raise ContractViolation(f"addr must look like host:port, got {addr!r}")
    server = EnvelopeServer((host, int(port)), PairService(pool, config))
    try:
        server.serve_forever()
    finally:
        server.server_close()
