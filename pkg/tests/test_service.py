import json
import socket
import threading
import time

import pytest
import uvicorn
from fastapi.testclient import TestClient

from tsens.cli import run
from tsens.io import database_to_inline
from tsens.service.app import app

client = TestClient(app)


@pytest.fixture
def path4_payload(path4):
    db, q = path4
    return {"relations": database_to_inline(db), "query": str(q)}


def test_health():
    assert client.get("/health").json()["status"] == "ok"


def test_schema_endpoint():
    assert "properties" in client.get("/schema").json()


def test_sensitivity(path4_payload):
    resp = client.post("/sensitivity", json=path4_payload)
    assert resp.status_code == 200
    assert resp.json()["result"]["ls"] == "4"


def test_dp_answer(path4_payload):
    body = {**path4_payload, "epsilon": 1.0, "ell": 10, "primary_private": "R2", "test_mode": True}
    resp = client.post("/dp-answer", json=body)
    assert resp.json()["result"]["value"] == "4"


def test_oracle_and_decompose(path4_payload):
    assert client.post("/oracle", json=path4_payload).json()["result"]["ls"] == "4"
    assert client.post("/decompose", json={"query": path4_payload["query"]}).json()["result"]["acyclic"]


def test_reduce_sat():
    resp = client.post("/reduce-sat", json={"dimacs": "p cnf 2 1\n1 -2 2 0\n", "check": True})
    assert resp.json()["result"]["ls_positive"] is True


def test_error_statuses(path4_payload):
    bad_query = client.post("/sensitivity", json={**path4_payload, "query": "Q :- ."})
    assert bad_query.status_code == 422 and bad_query.json()["error"]["exit_code"] == 2
    missing = client.post("/dp-answer", json=path4_payload)
    assert missing.status_code == 400 and missing.json()["error"]["kind"] == "usage"
    extra = client.post("/decompose", json={"query": "Q :- R(A).", "nope": 1})
    assert extra.status_code == 400


@pytest.fixture(scope="module")
def server():
    sock = socket.socket()
    sock.bind(("127.0.0.1", 0))
    port = sock.getsockname()[1]
    sock.close()
    srv = uvicorn.Server(uvicorn.Config(app, host="127.0.0.1", port=port, log_level="warning"))
    thread = threading.Thread(target=srv.run, daemon=True)
    thread.start()
    for _ in range(100):
        if srv.started:
            break
        time.sleep(0.05)
    yield f"http://127.0.0.1:{port}"
    srv.should_exit = True
    thread.join(timeout=5)


@pytest.mark.parametrize(
    "argv",
    [
        ["sensitivity"],
        ["oracle"],
        ["dp-answer", "--epsilon", "2", "--ell", "8", "--primary-private", "R3", "--seed", "11"],
        ["sensitivity", "--mode", "topk", "--k", "1"],
    ],
)
def test_remote_matches_local(capsys, server, fixtures, argv):
    files = ["--data", str(fixtures / "path4" / "manifest.json"), "--query", str(fixtures / "path4" / "query.cq")]
    local_code = run(argv + files)
    local = capsys.readouterr().out
    remote_code = run(argv + files + ["--server", server])
    remote = capsys.readouterr().out
    assert local_code == remote_code == 0
    assert local == remote


def test_remote_error_exit_code(capsys, server, fixtures, tmp_path):
    (tmp_path / "q.cq").write_text("Q :- R1(A,B), R1(B,C).")
    code = run(["decompose", "--query", str(tmp_path / "q.cq"), "--server", server])
    data = json.loads(capsys.readouterr().out)
    assert code == 2 and data["error"]["type"] == "SelfJoinUnsupported"


def test_unreachable_server(capsys, fixtures):
    code = run(["decompose", "--query", str(fixtures / "triangle.cq"), "--server", "http://127.0.0.1:9"])
    assert code == 3
