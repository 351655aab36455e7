import socket
import threading
import time

import pytest
import uvicorn
from fastapi.testclient import TestClient

from mihash.cli import main
from mihash.io import gen_uniform, write_codes
from mihash.mih import build_index
from mihash.scan import scan_knn, scan_range
from mihash.service import create_app


@pytest.fixture(scope="module")
def setup():
    db = gen_uniform(5000, 64, seed=1)
    index = build_index(db, m=4)
    return db, index, TestClient(create_app(index))


class TestEndpoints:
    def test_health_and_info(self, setup):
        _, _, client = setup
        assert client.get("/health").json() == {"status": "ok"}
        assert client.get("/index").json() == {"n": 5000, "b": 64, "m": 4, "lengths": [16, 16, 16, 16]}

    def test_knn(self, setup):
        db, _, client = setup
        q = gen_uniform(2, 64, seed=2)
        resp = client.post("/knn", json={"codes": [hex(c.to_int()) for c in q], "k": 5})
        assert resp.status_code == 200
        for code, res in zip(q, resp.json()["results"]):
            want = scan_knn(db, code, 5)
            assert res["distances"] == want.distances.tolist()
            assert res["trace"]["lookups"] > 0

    def test_range(self, setup):
        db, _, client = setup
        q = db[10]
        res = client.post("/range", json={"codes": [hex(q.to_int())], "r": 10}).json()["results"][0]
        want = scan_range(db, q, 10)
        assert res["ids"] == want.ids.tolist() and res["distances"] == want.distances.tolist()

    @pytest.mark.parametrize("body", [
        {"codes": ["xyz"], "k": 1},
        {"codes": [], "k": 1},
        {"codes": ["0x1"], "k": -1},
        {"codes": [hex(2**64)], "k": 1},
        {"codes": ["0x1"], "k": 10**6},
    ])
    def test_rejects_bad_requests(self, setup, body):
        _, _, client = setup
        assert client.post("/knn", json=body).status_code == 422

    def test_range_radius_too_large(self, setup):
        _, _, client = setup
        assert client.post("/range", json={"codes": ["0x0"], "r": 65}).status_code == 422

    def test_costmodel_curve(self, setup):
        _, _, client = setup
        body = client.get("/costmodel", params={"b": 240, "r": 60, "n": 1e9}).json()
        assert len(body["points"]) == 240 and body["best_s"] == 27


def _free_port():
    with socket.socket() as s:
        s.bind(("127.0.0.1", 0))
        return s.getsockname()[1]


class TestThinClient:
    def test_query_over_http_matches_local(self, setup, tmp_path, capsys):
        db, index, _ = setup
        port = _free_port()
        server = uvicorn.Server(uvicorn.Config(create_app(index), host="127.0.0.1", port=port, log_level="error"))
        thread = threading.Thread(target=server.run, daemon=True)
        thread.start()
        try:
            for _ in range(100):
                if server.started:
                    break
                time.sleep(0.05)
            write_codes(db, tmp_path / "db.bin")
            write_codes(gen_uniform(5, 64, seed=3), tmp_path / "q.bin")
            assert main(["query", "--url", f"http://127.0.0.1:{port}", "--queries", str(tmp_path / "q.bin"), "--k", "3", "--radius", "9"]) == 0
            remote = capsys.readouterr().out
            assert main(["query", "--dataset", str(tmp_path / "db.bin"), "--tables", "4", "--queries", str(tmp_path / "q.bin"), "--k", "3", "--radius", "9"]) == 0
            assert capsys.readouterr().out == remote
        finally:
            server.should_exit = True
            thread.join(timeout=5)

    def test_unreachable_service(self, tmp_path, capsys):
        write_codes(gen_uniform(1, 64, seed=3), tmp_path / "q.bin")
        code = main(["query", "--url", f"http://127.0.0.1:{_free_port()}", "--queries", str(tmp_path / "q.bin"), "--k", "1", "--timeout", "2"])
        assert code == 2
