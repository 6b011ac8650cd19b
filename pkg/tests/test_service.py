"""HTTP service surface."""

import pytest
from fastapi.testclient import TestClient

from semagraph import Config
from semagraph.service import create_app

from conftest import EXAMPLE_PHOTOS


@pytest.fixture
def client(tmp_path):
    config = Config(
        data_dir=str(tmp_path / "data"),
        blob_compare_sub_key="face",
        extractors={"face": "byte_vector dim=4 serial=1", "animal": "text_label serial=1"},
    )
    app = create_app(config)
    with TestClient(app) as c:
        yield c


def _create_fixture(client):
    client.post(
        "/query",
        json={
            "text": (
                "CREATE (jordan:Person{name: 'Michael Jordan'}) "
                "CREATE (scott:Person{name: 'Scott Pippen'}) "
                "CREATE (jordan)-[:teamMate]->(scott);"
            )
        },
    ).raise_for_status()


def test_healthz(client):
    assert client.get("/healthz").json() == {"status": "ok"}


def test_query_roundtrip(client):
    _create_fixture(client)
    resp = client.post(
        "/query",
        json={"text": "MATCH (jordan)-[:teamMate]->(n) WHERE jordan.name='Michael Jordan' RETURN n.name"},
    )
    assert resp.status_code == 200
    body = resp.json()
    assert body["columns"] == ["n.name"]
    assert body["rows"] == [["Scott Pippen"]]


def test_write_summary(client):
    resp = client.post("/query", json={"text": "CREATE (n:Thing {x: 1})"})
    assert resp.json()["summary"] == {"nodes_created": 1}


def test_query_with_params(client):
    _create_fixture(client)
    resp = client.post(
        "/query",
        json={"text": "MATCH (n:Person) WHERE n.name = $who RETURN n.name", "params": {"who": "Scott Pippen"}},
    )
    assert resp.json()["rows"] == [["Scott Pippen"]]


def test_parse_error_maps_to_400_data(client):
    resp = client.post("/query", json={"text": "MATCH (n RETURN n"})
    assert resp.status_code == 400
    body = resp.json()
    assert body["category"] == "data"
    assert body["error"] == "ParseError"


def test_explain_endpoint(client):
    _create_fixture(client)
    resp = client.post("/explain", json={"text": "MATCH (n:Person) WHERE n.name = 'X' RETURN n"})
    assert resp.status_code == 200
    assert "Projection" in resp.json()["plan"]
    assert "NodeByLabelScan" in resp.json()["plan"]


def test_explain_prefix_in_query(client):
    resp = client.post("/query", json={"text": "EXPLAIN MATCH (n) RETURN n"})
    assert resp.status_code == 200
    assert "AllNodeScan" in resp.json()["rows"][0][0]


def test_stats_endpoint(client):
    _create_fixture(client)
    body = client.get("/stats").json()
    assert body["node_count"] == 2
    assert body["rel_count"] == 1
    assert body["label_counts"] == {"Person": 2}
    assert body["rel_type_counts"] == {"teamMate": 1}


def test_init_and_checkpoint(client):
    resp = client.post("/admin/init", json={})
    assert resp.status_code == 200
    assert resp.json()["created"] is True
    assert client.post("/checkpoint").json()["snapshot"].endswith("graph.pgrf")


def test_ingest_endpoint(client, tmp_path):
    nodes = tmp_path / "nodes.csv"
    nodes.write_text("id,labels,name,photo\nn1,Person,Jordan,mj.bin\n")
    blobs = tmp_path / "photos"
    blobs.mkdir()
    (blobs / "mj.bin").write_bytes(EXAMPLE_PHOTOS[1])
    resp = client.post(
        "/ingest",
        json={"nodes": [str(nodes)], "blob_dir": str(blobs), "blob_column": "photo"},
    )
    body = resp.json()
    assert body["nodes_created"] == 1 and body["blobs_created"] == 1
    rows = client.post("/query", json={"text": "MATCH (n:Person) RETURN n.photo"}).json()["rows"]
    assert rows[0][0].startswith("blob:1:")


def test_unstructured_query_via_config_extractors(client):
    client.post(
        "/query",
        json={"text": "CREATE (a:Person {name: 'A', photo: Blob.fromBytes('21646464')})"},
    ).raise_for_status()
    client.post(
        "/query",
        json={"text": "CREATE (b:Person {name: 'B', photo: Blob.fromBytes('21656464')})"},
    ).raise_for_status()
    resp = client.post(
        "/query",
        json={
            "text": "MATCH (a:Person),(b:Person) WHERE a.name='A' AND b.name='B' RETURN a.photo ~: b.photo"
        },
    )
    assert resp.json()["rows"] == [["true"]]


def test_index_endpoint(client):
    _create_fixture(client)
    resp = client.post("/indexes", json={"label": "Person", "key": "name"})
    assert resp.json()["created"] is True


def test_bench_index_endpoint(client):
    resp = client.post(
        "/bench/index",
        json={"vectors": 500, "dim": 8, "clusters": 10, "buckets": 10, "ks": [1, 5], "nprobes": [1, "all"], "repeats": 20},
    )
    body = resp.json()
    assert resp.status_code == 200
    rows = body["report"]["rows"]
    assert len(rows) == 4
    exact = [r for r in rows if r["nprobe"] == "all"]
    assert all(r["avg_recall"] == 1.0 for r in exact)
    assert "ms/query" in body["text"]


def test_cluster_sim_endpoint(client):
    resp = client.post(
        "/cluster/sim",
        json={"replicas": 3, "writes": 40, "drop_rate": 0.1, "seed": 5, "late_joiner_lag": 10},
    )
    body = resp.json()
    assert resp.status_code == 200
    assert body["report"]["converged"] is True
    digests = set(body["report"]["digests"].values())
    assert len(digests) == 1
