"""Independent reference implementations for cross-checking the package.

Everything here is written the slow, literal way on purpose: exhaustive
enumeration instead of indexes, dict-based vectors instead of numpy, and
Fractions where exactness matters.  Tests compare the package against these
and never the other way around.
"""

from __future__ import annotations

import itertools
import math
import re
from fractions import Fraction

# ── Embedding reference ──────────────────────────────────────────────────────

_FNV_OFFSET = 0xCBF29CE484222325
_FNV_PRIME = 0x100000001B3
_MASK = 0xFFFFFFFFFFFFFFFF


def ref_fnv1a64(data: bytes) -> int:
    h = _FNV_OFFSET
    for b in data:
        h = ((h ^ b) * _FNV_PRIME) & _MASK
    return h


def ref_tokens(text: str) -> list[str]:
    return re.findall(r"[a-z0-9]+", text.lower())


def ref_embed(text: str, dims: int = 256) -> dict[int, float]:
    """Sparse signed bag-of-tokens vector, L2-normalized, as {slot: weight}."""
    vec: dict[int, float] = {}
    for token in ref_tokens(text):
        first = ref_fnv1a64(token.encode("utf-8"))
        second = ref_fnv1a64(first.to_bytes(8, "little"))
        sign = 1.0 if second & 1 == 0 else -1.0
        slot = first % dims
        vec[slot] = vec.get(slot, 0.0) + sign
    vec = {slot: w for slot, w in vec.items() if w != 0.0}
    norm = math.sqrt(sum(w * w for w in vec.values()))
    if norm == 0.0:
        return {}
    return {slot: w / norm for slot, w in vec.items()}


def ref_cosine(a: dict[int, float], b: dict[int, float]) -> float:
    if not a or not b:
        return 0.0
    dot = sum(w * b.get(slot, 0.0) for slot, w in a.items())
    return max(-1.0, min(1.0, dot))


def ref_similarity(a: str, b: str, dims: int = 256) -> float:
    return ref_cosine(ref_embed(a, dims), ref_embed(b, dims))


def collision_free_similarity(a: str, b: str, dims: int = 256) -> float:
    """Closed form |shared tokens| / sqrt(|A|·|B|) for duplicate-free texts.

    A second, hash-free derivation of the expected similarity.  Raises if
    either text repeats a token or any two distinct tokens of the union
    collide in the hash table, since the closed form does not apply then.
    """
    ta, tb = ref_tokens(a), ref_tokens(b)
    if len(set(ta)) != len(ta) or len(set(tb)) != len(tb):
        raise ValueError("closed form needs duplicate-free token lists")
    slots = {}
    for token in set(ta) | set(tb):
        slot = ref_fnv1a64(token.encode("utf-8")) % dims
        if slot in slots and slots[slot] != token:
            raise ValueError(f"hash collision between {slots[slot]!r} and {token!r}")
        slots[slot] = token
    if not ta or not tb:
        return 0.0
    shared = len(set(ta) & set(tb))
    return shared / math.sqrt(len(ta) * len(tb))


# ── Query execution reference ────────────────────────────────────────────────


def ref_literal_equal(a, b) -> bool:
    if isinstance(a, bool) or isinstance(b, bool):
        return isinstance(a, bool) and isinstance(b, bool) and a is b
    return a == b


def _label_pools(graph, ast) -> list[list[str]]:
    return [
        sorted(nid for nid, node in graph.nodes.items()
               if pat.label is None or pat.label in node.labels)
        for pat in ast.nodes
    ]


def pool_product_size(graph, ast) -> int:
    return math.prod(len(pool) for pool in _label_pools(graph, ast))


def brute_force_match(graph, ast) -> list[tuple]:
    """Enumerate every node assignment {v_i ∈ nodes(label_i)} and filter.

    The literal set definition: the cross product of per-variable label
    pools, kept iff every hop has an edge, every WHERE equality holds and
    every RETURN property exists.  itertools.product over the graph's
    public collections, no shared code with the package matcher.
    """
    edge_set = {(e.from_id, e.rel, e.to_id) for e in graph.edges}
    var_order = [pat.var for pat in ast.nodes]

    rows = []
    for assignment in itertools.product(*_label_pools(graph, ast)):
        ok = True
        for i, edge in enumerate(ast.edges):
            if (assignment[i], edge.rel, assignment[i + 1]) not in edge_set:
                ok = False
                break
        if not ok:
            continue
        bound = dict(zip(var_order, assignment))
        for cond in ast.where:
            props = graph.nodes[bound[cond.var]].properties
            if cond.prop not in props or not ref_literal_equal(props[cond.prop], cond.value):
                ok = False
                break
        if not ok:
            continue
        row = []
        for proj in ast.returns:
            props = graph.nodes[bound[proj.var]].properties
            if proj.prop not in props:
                ok = False
                break
            row.append(props[proj.prop])
        if ok:
            rows.append((assignment, tuple(row)))
    rows.sort(key=lambda pair: pair[0])
    return [row for _, row in rows]


# ── Anchor resolution reference ──────────────────────────────────────────────


def ref_in_front(center, facing, point, max_distance: float) -> bool:
    delta = [p - c for p, c in zip(point, center)]
    norm = math.sqrt(sum(f * f for f in facing))
    ahead = sum(d * f / norm for d, f in zip(delta, facing))
    distance = math.sqrt(sum(d * d for d in delta))
    return ahead > 0.0 and distance <= max_distance


def brute_force_resolve(reference: str, anchors, pose, theta: float,
                        max_distance: float, embed_fn) -> tuple[str, object]:
    """Literal set pipeline: AP_sem, then AP_front, then argmax with id tie.

    anchors: iterable with .id / .position / .description, pose with
    .center / .facing.  embed_fn(text) -> vector understood by ref or numpy
    cosine; similarity computed via normalized dot to stay independent.
    Returns ("ok", anchor_id) or ("no_semantic_match", best_score) or
    ("nothing_in_front", [candidate ids]).
    """

    def sim(a, b) -> float:
        na = math.sqrt(sum(x * x for x in a))
        nb = math.sqrt(sum(x * x for x in b))
        if na == 0.0 or nb == 0.0:
            return 0.0
        dot = sum(x * y for x, y in zip(a, b))
        return max(-1.0, min(1.0, dot / (na * nb)))

    ref_vec = list(embed_fn(reference))
    scores = {a.id: sim(ref_vec, list(embed_fn(a.description))) for a in anchors}
    ap_sem = [a for a in anchors if scores[a.id] >= theta]
    if not ap_sem:
        best = max(scores.values()) if scores else 0.0
        return ("no_semantic_match", best)
    ap_front = [a for a in ap_sem
                if ref_in_front(pose.center, pose.facing, a.position, max_distance)]
    if not ap_front:
        return ("nothing_in_front", sorted(a.id for a in ap_sem))
    best = min(ap_front, key=lambda a: (-scores[a.id], a.id))
    return ("ok", best.id)


# ── Pie arithmetic reference ─────────────────────────────────────────────────


def exact_proportions(amounts) -> list[Fraction]:
    total = sum(Fraction(a) for a in amounts)
    if total == 0:
        raise ZeroDivisionError("degenerate total")
    return [Fraction(a) / total for a in amounts]


# ── Dwell accounting reference ───────────────────────────────────────────────


def ref_dwell_totals(samples) -> dict[str, float]:
    """Total gaze dwell per object over (target, t) samples, brute force.

    An interval [t_i, t_{i+1}] belongs to the object looked at during it,
    i.e. the target of sample i.  "none" breaks the chain.
    """
    totals: dict[str, float] = {}
    for (target, t0), (_, t1) in zip(samples, samples[1:]):
        if target != "none":
            totals[target] = totals.get(target, 0.0) + max(0.0, t1 - t0)
    return totals


# ── Random-instance generators ───────────────────────────────────────────────

# 200 distinct words; thematic overlap on purpose so random descriptions
# collide semantically often enough to exercise both resolver error paths.
_THEMED = [
    "table", "surface", "data", "frame", "holder", "memory", "memories",
    "photo", "chart", "wall", "desk", "shelf", "panel", "display", "screen",
    "corner", "center", "front", "back", "left", "right", "upper", "lower",
    "wide", "narrow", "wooden", "glass", "metal", "digital", "ambient",
    "emotional", "neutral", "warm", "cool", "bright", "dim", "large", "small",
    "presenting", "showing", "holding", "mounting", "floating", "anchored",
]
LEXICON = _THEMED + [f"word{i:03d}" for i in range(200 - len(_THEMED))]
assert len(set(LEXICON)) == 200

NODE_LABELS = ["User", "CreditCard", "Spending", "Memory", "Preference",
               "Entity", "Place", "Device"]
EDGE_RELS = ["OWNS", "HAS_SPENDING", "HAS_MEMORY", "HAS_PREFERENCE",
             "ATTENDED", "NEAR", "LINKS"]
PROP_KEYS = ["category", "amount", "name", "value", "kind", "level"]
PROP_VALUES = ["Dining", "Travel", "Groceries", "Berlin", "light blue",
               "alpha", "beta", 320, 210, 400, 1.5, 0.0, True, False]


def random_graph(rng, max_nodes: int = 200):
    """A random but always-valid ChronicleGraph."""
    from pair.chronicle import ChronicleEdge, ChronicleGraph, ChronicleNode

    graph = ChronicleGraph(owner="owner_0")
    count = rng.randrange(0, max_nodes + 1)
    for i in range(count):
        labels = frozenset(rng.sample(NODE_LABELS, rng.randrange(1, 3)))
        props = {key: rng.choice(PROP_VALUES)
                 for key in rng.sample(PROP_KEYS, rng.randrange(0, 4))}
        ts = rng.randrange(1_600_000_000, 1_700_000_000) if "Memory" in labels else None
        graph.add_node(ChronicleNode(f"n{i:03d}", labels, props, timestamp=ts))
    ids = sorted(graph.nodes)
    edge_count = rng.randrange(0, 2 * len(ids) + 1) if ids else 0
    seen = set()
    for _ in range(edge_count):
        key = (rng.choice(ids), rng.choice(EDGE_RELS), rng.choice(ids))
        if key in seen:
            continue
        seen.add(key)
        graph.add_edge(ChronicleEdge(*key))
    return graph


def random_ast(rng):
    """A random valid QueryAst, independent of any graph."""
    from pair.query import Condition, EdgePattern, NodePattern, Projection, QueryAst

    length = rng.randrange(1, 5)
    vars_ = [f"v{i}" for i in range(length)]
    nodes = tuple(
        NodePattern(var, rng.choice(NODE_LABELS) if rng.random() < 0.8 else None)
        for var in vars_)
    edges = tuple(EdgePattern(rng.choice(EDGE_RELS)) for _ in range(length - 1))

    def literal():
        pick = rng.random()
        if pick < 0.45:
            return rng.choice(["Dining", "light blue", 'quo"te', "line\nbreak",
                               "tab\tstop", "back\\slash", ""])
        if pick < 0.85:
            return rng.choice([0.0, 1.0, -2.5, 320.0, 1e-06, 12345.678])
        return rng.random() < 0.5

    where = tuple(Condition(rng.choice(vars_), rng.choice(PROP_KEYS), literal())
                  for _ in range(rng.randrange(0, 3)))
    returns = tuple(Projection(rng.choice(vars_), rng.choice(PROP_KEYS))
                    for _ in range(rng.randrange(1, 4)))
    return QueryAst(nodes=nodes, edges=edges, where=where, returns=returns)


def random_query_for(graph, rng):
    """A random query whose labels/rels/values are drawn from the graph."""
    from pair.query import Condition, EdgePattern, NodePattern, Projection, QueryAst

    labels = sorted({lb for n in graph.nodes.values() for lb in n.labels}) or NODE_LABELS
    rels = sorted({e.rel for e in graph.edges}) or EDGE_RELS
    length = rng.randrange(1, 4)
    vars_ = [f"q{i}" for i in range(length)]
    nodes = tuple(
        NodePattern(var, rng.choice(labels) if rng.random() < 0.7 else None)
        for var in vars_)
    edges = tuple(EdgePattern(rng.choice(rels)) for _ in range(length - 1))

    def some_value():
        pools = [n.properties for n in graph.nodes.values() if n.properties]
        if pools and rng.random() < 0.7:
            props = rng.choice(pools)
            return props[rng.choice(sorted(props))]
        return rng.choice(PROP_VALUES)

    where = tuple(Condition(rng.choice(vars_), rng.choice(PROP_KEYS), some_value())
                  for _ in range(rng.randrange(0, 3)))
    returns = tuple(Projection(rng.choice(vars_), rng.choice(PROP_KEYS))
                    for _ in range(rng.randrange(1, 4)))
    return QueryAst(nodes=nodes, edges=edges, where=where, returns=returns)


def random_scene(rng, max_anchors: int = 50):
    """Random anchors plus a random pose, for resolver cross-checks."""
    from pair.scene import AnchorPoint, UserPose

    anchors = []
    for i in range(rng.randrange(1, max_anchors + 1)):
        words = rng.choices(LEXICON, k=rng.randrange(1, 9))
        position = (rng.uniform(-8, 8), rng.uniform(-2, 3), rng.uniform(-8, 8))
        anchors.append(AnchorPoint(id=f"anchor_{i:02d}", position=position,
                                   description=" ".join(words)))
    facing = (0.0, 0.0, 0.0)
    while not any(facing):
        facing = (rng.uniform(-1, 1), rng.uniform(-1, 1), rng.uniform(-1, 1))
    pose = UserPose(center=(rng.uniform(-3, 3), rng.uniform(-1, 2), rng.uniform(-3, 3)),
                    facing=facing,
                    box_extents=(rng.uniform(0.1, 1), rng.uniform(0.1, 1), rng.uniform(0.1, 1)))
    reference = " ".join(rng.choices(LEXICON, k=rng.randrange(1, 5)))
    return reference, anchors, pose
