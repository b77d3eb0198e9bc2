from __future__ import annotations

import json
import threading
from http.server import BaseHTTPRequestHandler, HTTPServer

import pytest

from fusekit import ScoredList, RunSet, TransportError
from fusekit.clients import (
    HttpDecomposer,
    HttpRetriever,
    HttpTextClient,
    ReplayDecomposer,
    ReplayRetriever,
)


class _StubHandler(BaseHTTPRequestHandler):
    """Echo-style service: behavior switches on the request path."""

    failures_left = 0

    def do_POST(self):
        length = int(self.headers.get("Content-Length", 0))
        payload = json.loads(self.rfile.read(length) or b"{}")
        if self.path == "/flaky" and type(self).failures_left > 0:
            type(self).failures_left -= 1
            self.send_response(503)
            self.end_headers()
            return
        if self.path == "/decompose" or self.path == "/flaky":
            body = json.dumps([f"{payload['query']} facet {i}" for i in range(3)])
        elif self.path == "/retrieve":
            body = json.dumps(
                [{"doc_id": f"v{i}", "score": 1.0 - 0.1 * i} for i in range(payload["depth"])]
            )
        elif self.path == "/garbage":
            body = "not json at all"
        else:
            self.send_response(404)
            self.end_headers()
            return
        data = body.encode("utf-8")
        self.send_response(200)
        self.send_header("Content-Length", str(len(data)))
        self.end_headers()
        self.wfile.write(data)

    def log_message(self, *args):
        pass


@pytest.fixture(scope="module")
def stub_server():
    server = HTTPServer(("127.0.0.1", 0), _StubHandler)
    thread = threading.Thread(target=server.serve_forever, daemon=True)
    thread.start()
    yield f"http://127.0.0.1:{server.server_address[1]}"
    server.shutdown()


def test_http_decomposer_round_trip(stub_server):
    client = HttpDecomposer(f"{stub_server}/decompose")
    raw = client.decompose_raw({"query_id": "1", "query": "storm damage"})
    assert json.loads(raw) == ["storm damage facet 0", "storm damage facet 1", "storm damage facet 2"]


def test_http_retriever_round_trip(stub_server):
    client = HttpRetriever(f"{stub_server}/retrieve")
    hits = client.retrieve("s1", "storm damage", 4)
    assert hits[0] == ("v0", 1.0)
    assert len(hits) == 4


def test_http_client_retries_then_succeeds(stub_server):
    _StubHandler.failures_left = 2
    client = HttpTextClient(f"{stub_server}/flaky", retries=3, backoff=0.01)
    body = client.request({"query": "x"})
    assert json.loads(body)
    assert _StubHandler.failures_left == 0


def test_http_client_gives_up_after_retries(stub_server):
    _StubHandler.failures_left = 99
    client = HttpTextClient(f"{stub_server}/flaky", retries=2, backoff=0.01)
    with pytest.raises(TransportError):
        client.request({"query": "x"})
    _StubHandler.failures_left = 0


def test_http_client_unreachable_endpoint():
    client = HttpTextClient("http://127.0.0.1:9/none", retries=2, backoff=0.01, timeout=0.5)
    with pytest.raises(TransportError):
        client.request({})


def test_http_retriever_rejects_garbage(stub_server):
    client = HttpRetriever(f"{stub_server}/garbage")
    with pytest.raises(TransportError):
        client.retrieve("s1", "anything", 3)


def test_replay_decomposer_from_jsonl():
    data = json.dumps({"query_id": "1", "response": "[\"a\", \"b\"]"})
    replay = ReplayDecomposer.from_jsonl(data)
    assert replay.decompose_raw({"query_id": "1"}) == '["a", "b"]'
    with pytest.raises(TransportError):
        replay.decompose_raw({"query_id": "2"})


def test_replay_retriever_reads_run():
    runs = RunSet(lists={"s1": ScoredList((("vA", 0.9), ("vB", 0.5)))}, tag="t")
    replay = ReplayRetriever(runs)
    assert replay.retrieve("s1", "ignored", 1) == [("vA", 0.9)]
