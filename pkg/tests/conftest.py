import json
from pathlib import Path

import pytest

from pair.chronicle import ChroniclePool, load_chronicle
from pair.scene import load_spatial
from pair.service import PairService, ServiceConfig

ROOT = Path(__file__).resolve().parent.parent
SCENARIOS = ROOT / "scenarios"


@pytest.fixture
def financial_graph():
    return load_chronicle(str(SCENARIOS / "chronicles" / "financial_seed.json"))


@pytest.fixture
def desk_graph():
    return load_chronicle(str(SCENARIOS / "chronicles" / "desk_seed.json"))


def _scenario_doc(name: str) -> dict:
    with open(SCENARIOS / name, "r", encoding="utf-8") as fh:
        return json.load(fh)


@pytest.fixture
def financial_scenario():
    return _scenario_doc("financial_helper.json")


@pytest.fixture
def desk_scenario():
    return _scenario_doc("desk_environment.json")


@pytest.fixture
def financial_spatial_doc(financial_scenario):
    return financial_scenario["spatial"]


@pytest.fixture
def desk_spatial_doc(desk_scenario):
    return desk_scenario["spatial"]


@pytest.fixture
def financial_spatial(financial_spatial_doc):
    return load_spatial(financial_spatial_doc)


@pytest.fixture
def desk_spatial(desk_spatial_doc):
    return load_spatial(desk_spatial_doc)


@pytest.fixture
def financial_graph_factory():
    def build():
        return load_chronicle(str(SCENARIOS / "chronicles" / "financial_seed.json"))
    return build


@pytest.fixture
def financial_service(financial_graph):
    pool = ChroniclePool()
    pool.add(financial_graph)
    return PairService(pool, ServiceConfig())


@pytest.fixture
def desk_service(desk_graph):
    pool = ChroniclePool()
    pool.add(desk_graph)
    return PairService(pool, ServiceConfig())


def open_session(service, spatial_doc, owner="user_123", app_goal=None, **extra):
    """Send init_spatial_data and return (session_id, ack envelopes)."""
    payload = {"spatial": spatial_doc, "owner": owner, **extra}
    if app_goal is not None:
        payload["app_goal"] = app_goal
    outs = service.handle_envelope(
        {"type": "init_spatial_data", "session_id": "", "seq": 1, "payload": payload})
    assert outs and outs[0]["type"] == "snapshot", outs
    return outs[0]["session_id"], outs
