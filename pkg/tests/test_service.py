import pytest
from fastapi.testclient import TestClient

from schwarzlab.service import app

client = TestClient(app)


def base_config(**over):
    cfg = {"mesh": {"n": 8}, "partition": {"H_cells": 4, "delta_layers": 2},
           "coarse": {"type": "ms"}}
    cfg.update(over)
    return cfg


def test_health():
    r = client.get("/health")
    assert r.status_code == 200
    assert r.json() == {"status": "ok"}


def test_solve_returns_row():
    r = client.post("/solve", json={"config": base_config()})
    assert r.status_code == 200
    row = r.json()
    assert row["method"] == "ms"
    assert row["converged"] is True
    assert row["iterations"] >= 1
    assert row["kappa"] >= 1.0
    assert row["coarse_dim"] == 1


def test_sweep_rows():
    cfg = base_config(mesh={"n": 16}, coarse={"type": "shem", "m": 2},
                      sweep={"contrast": [1.0, 100.0]})
    r = client.post("/sweep", json={"config": cfg, "threads": 2})
    assert r.status_code == 200
    rows = r.json()["rows"]
    assert len(rows) == 2
    assert all(row["error"] is None for row in rows)


def test_spectrum_rows():
    r = client.post("/spectrum", json={"config": base_config()})
    assert r.status_code == 200
    rows = r.json()["rows"]
    assert len(rows) == 12
    assert rows[0]["k"] == 1
    assert rows[0]["eigenvalue"] > 0.0


def test_check_endpoint():
    r = client.post("/check", json={"seed": 1})
    assert r.status_code == 200
    body = r.json()
    assert body["passed"] is True
    assert len(body["results"]) == 7


def test_schema_violation_gives_422():
    bad = base_config(partition={"H_cells": 3, "delta_layers": 2})
    r = client.post("/solve", json={"config": bad})
    assert r.status_code == 422


def test_usage_error_gives_400():
    cfg = base_config()
    cfg["alpha"] = {"benchmark": {"name": "channels", "params": {"count": -1}}}
    r = client.post("/solve", json={"config": cfg})
    assert r.status_code == 400
    assert r.json()["error_type"] == "usage"
