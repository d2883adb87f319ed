import json
import threading
from http.server import BaseHTTPRequestHandler, HTTPServer

import pytest

from predinv.data import TransitionDataset, abstract_dataset
from predinv.envs import make_domain
from predinv.online import explore
from predinv.perceiver import Perceiver
from predinv.proposer import (PROTOCOL, EndpointConfig, ExternalProposer,
                              PoolExhausted, ProposalRequest,
                              ScriptedProposer, load_pool, parse_response,
                              propose_round, request_document,
                              strategies_for)


def _cover_request(strategy):
    spec, env, gen = make_domain("cover")
    p = Perceiver(spec.registry)
    res = explore(spec.initial_table, spec.initial_hlas, env, gen.train(),
                  spec.n_abstract, p)
    data = TransitionDataset()
    data.extend(res.episodes)
    view = abstract_dataset(data, spec.initial_table, p)
    return spec, ProposalRequest(strategy, 0, spec.initial_table, data, view)


def test_schedule():
    assert strategies_for(0) == ("S3", "S1")
    assert strategies_for(1) == ("S3", "S2")


def test_unknown_strategy():
    spec, _, _ = make_domain("cover")
    with pytest.raises(ValueError):
        ProposalRequest("S9", 0, spec.initial_table)


def test_scripted_pool_unlocks_on_evidence():
    spec, _, _ = make_domain("cover")
    source = ScriptedProposer.for_domain(spec)
    empty = ProposalRequest("S1", 0, spec.initial_table)
    assert source.propose(empty) == []
    _, req = _cover_request("S1")
    names = {d.name for d in source.propose(req)}
    assert {"GripperOpen", "Holding"} <= names


def test_strict_pool_raises_when_empty():
    spec, _, _ = make_domain("cover")
    source = ScriptedProposer(load_pool("[]"), strict=True)
    with pytest.raises(PoolExhausted):
        source.propose(ProposalRequest("S3", 0, spec.initial_table))


def test_round_results_are_novel():
    spec, req = _cover_request("S1")
    out, strategies = propose_round(ScriptedProposer.for_domain(spec), 0,
                                    req.psi, req.data, req.abstract)
    names = [d.name for d in out]
    assert len(names) == len(set(names))
    assert not set(names) & spec.initial_table.names
    assert strategies == ("S3", "S1")


@pytest.mark.parametrize("strategy", ["S1", "S2", "S3"])
def test_request_document(strategy):
    _, req = _cover_request(strategy)
    doc = request_document(req, 10, 3)
    assert doc["protocol"] == PROTOCOL
    assert doc["strategy"] == strategy
    if strategy == "S3":
        assert doc["exemplars"] == []
    else:
        assert doc["exemplars"]
        key = "state" if strategy == "S1" else "before"
        assert all(key in e for e in doc["exemplars"])
    json.dumps(doc)


def test_parse_response_filters_and_renames():
    spec, _, _ = make_domain("cover")
    body = json.dumps({"proposals": [
        "(primitive Covers (?b block) (> (feat ?b lo) 0.2))",
        "(primitive Broken (?b block)",
        "(primitive Bad (?b block) (> (feat ?b nope) 0.2))",
        42,
        "(primitive Left (?b block) (< (feat ?b lo) 0.5))",
        "(primitive Left2 (?q block) (< (feat ?q lo) 0.5))",
    ]})
    out = parse_response(body, spec.initial_table)
    assert [d.name for d in out] == ["Covers2", "Left"]
    assert parse_response("not json", spec.initial_table) == []
    assert parse_response("{}", spec.initial_table) == []


class _Handler(BaseHTTPRequestHandler):
    def do_POST(self):
        n = int(self.headers["Content-Length"])
        req = json.loads(self.rfile.read(n))
        assert req["protocol"] == PROTOCOL
        body = json.dumps({"proposals": [
            "(primitive Open (?r robot) (> (feat ?r fingers) 0.5))"]})
        self.send_response(200)
        self.send_header("Content-Type", "application/json")
        self.end_headers()
        self.wfile.write(body.encode())

    def log_message(self, *args):
        pass


def test_external_proposer_round_trip():
    server = HTTPServer(("127.0.0.1", 0), _Handler)
    t = threading.Thread(target=server.serve_forever, daemon=True)
    t.start()
    try:
        url = f"http://127.0.0.1:{server.server_port}/"
        spec, req = _cover_request("S2")
        out = ExternalProposer(EndpointConfig(url)).propose(req)
        assert [d.name for d in out] == ["Open"]
    finally:
        server.shutdown()


def test_external_proposer_unreachable_returns_nothing():
    spec, _, _ = make_domain("cover")
    src = ExternalProposer(EndpointConfig("http://127.0.0.1:9/", 0.5))
    assert src.propose(ProposalRequest("S3", 0, spec.initial_table)) == []
