import pytest
from fastapi.testclient import TestClient

from agglineage.service import create_app
from helpers import DEMO_B, DEMO_N, DEMO_Q1_EXACT, DEMO_S, multinomial_band

SMALL_CSV = "Sal,Dept\n10,A\n20,B\n30,A\n40,B\n"


@pytest.fixture
def client():
    return TestClient(create_app())


def upload(client, csv_text=SMALL_CSV, name="dataset"):
    response = client.post(
        f"/datasets?name={name}",
        content=csv_text,
        headers={"content-type": "text/csv"},
    )
    assert response.status_code == 200, response.text
    return response.json()


def build_sketch(client, dataset_id, **body):
    response = client.post(f"/datasets/{dataset_id}/sketches", json=body)
    assert response.status_code == 200, response.text
    return response.json()


def clause(attribute, op, value):
    return {"attribute": attribute, "op": op, "value": value}


def query(client, sketch_id, clauses):
    return client.post(
        f"/sketches/{sketch_id}/query", json={"predicate": {"clauses": clauses}}
    )


class TestDatasets:
    def test_upload_descriptor(self, client):
        descriptor = upload(client)
        assert descriptor["n"] == 4
        assert descriptor["totals"] == {"Sal": 100.0}
        assert {"name": "Sal", "kind": "numeric"} in descriptor["attributes"]
        assert {"name": "Dept", "kind": "categorical"} in descriptor["attributes"]

    def test_empty_body_is_400(self, client):
        response = client.post("/datasets", content="")
        assert response.status_code == 400
        body = response.json()
        assert set(body) == {"code", "message", "detail"}

    def test_negative_value_names_row(self, client):
        response = client.post("/datasets", content="Sal\n10\n-5\n")
        assert response.status_code == 400
        assert "row 2" in response.json()["message"]

    def test_eviction_then_404(self, client):
        dataset_id = upload(client)["id"]
        assert client.delete(f"/datasets/{dataset_id}").status_code == 204
        response = client.post(
            f"/datasets/{dataset_id}/exact-query",
            json={"attribute": "Sal", "predicate": {"clauses": []}},
        )
        assert response.status_code == 404
        assert "evicted" in response.json()["message"]

    def test_unknown_dataset_404(self, client):
        assert client.delete("/datasets/ds-9999").status_code == 404


class TestSketchBuild:
    def test_guarantee_triple_yields_demo_budget(self, client):
        dataset_id = upload(client)["id"]
        descriptor = build_sketch(
            client, dataset_id, attribute="Sal", m=10**6, p=1e-6, epsilon=0.04
        )
        assert descriptor["b"] == DEMO_B
        assert descriptor["epsilon_certified"] <= 0.04
        assert descriptor["S"] == 100.0

    def test_explicit_budget_one(self, client):
        dataset_id = upload(client)["id"]
        descriptor = build_sketch(client, dataset_id, attribute="Sal", b=1)
        assert descriptor["distinct_entries"] == 1
        assert descriptor["epsilon_certified"] is None

    def test_unknown_attribute_422(self, client):
        dataset_id = upload(client)["id"]
        response = client.post(
            f"/datasets/{dataset_id}/sketches", json={"attribute": "Nope", "b": 4}
        )
        assert response.status_code == 422

    def test_degenerate_attribute_422(self, client):
        dataset_id = upload(client, csv_text="Sal,Z\n10,0\n20,0\n")["id"]
        response = client.post(
            f"/datasets/{dataset_id}/sketches", json={"attribute": "Z", "b": 4}
        )
        assert response.status_code == 422
        assert response.json()["code"] == "degenerate-attribute"

    def test_unknown_dataset_404(self, client):
        response = client.post(
            "/datasets/ds-404/sketches", json={"attribute": "Sal", "b": 4}
        )
        assert response.status_code == 404

    def test_b_and_triple_conflict_422(self, client):
        dataset_id = upload(client)["id"]
        response = client.post(
            f"/datasets/{dataset_id}/sketches",
            json={"attribute": "Sal", "b": 4, "m": 10, "p": 0.1, "epsilon": 0.2},
        )
        assert response.status_code == 422

    def test_k_below_three_422(self, client):
        dataset_id = upload(client)["id"]
        response = client.post(
            f"/datasets/{dataset_id}/sketches", json={"attribute": "Sal", "b": 4, "k": 2}
        )
        assert response.status_code == 422


class TestQueries:
    def test_always_true_estimate_is_total(self, client):
        dataset_id = upload(client)["id"]
        sketch_id = build_sketch(client, dataset_id, attribute="Sal", b=64)["id"]
        response = query(client, sketch_id, [])
        assert response.status_code == 200
        body = response.json()
        assert body["estimate"] == 100.0
        assert body["matched_frequency_mass"] == 64
        assert body["flags"] == []

    def test_deterministic_for_fixed_sketch(self, client):
        dataset_id = upload(client)["id"]
        sketch_id = build_sketch(client, dataset_id, attribute="Sal", b=32)["id"]
        clauses = [clause("Dept", "=", "A")]
        first = query(client, sketch_id, clauses).json()
        second = query(client, sketch_id, clauses).json()
        assert first == second

    def test_certified_sketch_reports_bounds_and_resolution_flag(self, client):
        csv_text = "Sal,Dept\n1,tiny\n1000000,big\n"
        dataset_id = upload(client, csv_text=csv_text)["id"]
        descriptor = build_sketch(
            client, dataset_id, attribute="Sal", m=10**6, p=1e-6, epsilon=0.04
        )
        sketch_id = descriptor["id"]
        epsilon = descriptor["epsilon_certified"]

        whole = query(client, sketch_id, []).json()
        assert whole["additive_bound"] == pytest.approx(epsilon * 1000001.0)
        assert whole["relative_bound"] == pytest.approx(epsilon)
        assert whole["flags"] == []

        small = query(client, sketch_id, [clause("Dept", "=", "tiny")]).json()
        assert "below-resolution" in small["flags"]

    def test_malformed_predicate_400(self, client):
        dataset_id = upload(client)["id"]
        sketch_id = build_sketch(client, dataset_id, attribute="Sal", b=8)["id"]
        response = query(client, sketch_id, [clause("Dept", "~", "A")])
        assert response.status_code == 400
        response = query(client, sketch_id, [clause("Dept", "in", "not-a-list")])
        assert response.status_code == 400
        response = query(client, sketch_id, [clause("Dept", "between", [1])])
        assert response.status_code == 400

    def test_frequency_predicate_400(self, client):
        dataset_id = upload(client)["id"]
        sketch_id = build_sketch(client, dataset_id, attribute="Sal", b=8)["id"]
        response = query(client, sketch_id, [clause("Fr", ">", 1)])
        assert response.status_code == 400

    def test_unknown_sketch_404(self, client):
        assert query(client, "sk-404", []).status_code == 404

    def test_sketch_queryable_after_dataset_eviction(self, client):
        dataset_id = upload(client)["id"]
        sketch_id = build_sketch(client, dataset_id, attribute="Sal", b=16)["id"]
        client.delete(f"/datasets/{dataset_id}")
        response = query(client, sketch_id, [clause("Dept", "=", "B")])
        assert response.status_code == 200

    def test_query_path_never_touches_datasets(self, client):
        dataset_id = upload(client)["id"]
        sketch_id = build_sketch(client, dataset_id, attribute="Sal", b=16)["id"]

        class Poison(dict):
            def __getitem__(self, key):
                raise AssertionError("query path read a dataset")

            def get(self, key, default=None):
                raise AssertionError("query path read a dataset")

        client.app.state.catalog.datasets = Poison()
        response = query(client, sketch_id, [clause("Dept", "=", "A")])
        assert response.status_code == 200


class TestLogAndStats:
    def test_fresh_sketch_has_empty_log(self, client):
        dataset_id = upload(client)["id"]
        sketch_id = build_sketch(client, dataset_id, attribute="Sal", b=8)["id"]
        assert client.get(f"/sketches/{sketch_id}/log").json() == {"queries": []}

    def test_log_orders_and_limits(self, client):
        dataset_id = upload(client)["id"]
        sketch_id = build_sketch(client, dataset_id, attribute="Sal", b=8)["id"]
        query(client, sketch_id, [])
        query(client, sketch_id, [clause("Dept", "=", "A")])
        query(client, sketch_id, [clause("Sal", ">", 15)])
        log = client.get(f"/sketches/{sketch_id}/log").json()["queries"]
        assert len(log) == 3
        assert log[0]["predicate"] == []
        assert log[1]["predicate"][0]["attribute"] == "Dept"
        assert [entry["timestamp"] for entry in log] == sorted(
            entry["timestamp"] for entry in log
        )
        limited = client.get(f"/sketches/{sketch_id}/log?limit=2").json()["queries"]
        assert limited == log[-2:]
        assert client.get(f"/sketches/{sketch_id}/log?limit=0").json() == {
            "queries": []
        }
        assert client.get(f"/sketches/{sketch_id}/log?limit=-1").status_code == 400

    def test_stats_mass_sums_to_budget(self, client):
        dataset_id = upload(client)["id"]
        sketch_id = build_sketch(client, dataset_id, attribute="Sal", b=48)["id"]
        stats = client.get(f"/sketches/{sketch_id}/stats").json()
        assert stats["frequency_mass"] == 48
        assert sum(block["bag_mass"] for block in stats["blocks"]) == 48
        values = [block["value"] for block in stats["blocks"]]
        assert values == sorted(values, reverse=True)

    def test_b_one_stats_single_row(self, client):
        dataset_id = upload(client)["id"]
        sketch_id = build_sketch(client, dataset_id, attribute="Sal", b=1)["id"]
        stats = client.get(f"/sketches/{sketch_id}/stats").json()
        assert len(stats["blocks"]) == 1
        assert stats["blocks"][0]["frequencies"] == [{"fr": 1, "count": 1}]

    def test_unknown_sketch_404(self, client):
        assert client.get("/sketches/sk-404/stats").status_code == 404
        assert client.get("/sketches/sk-404/log").status_code == 404


class TestExactQuery:
    def test_matches_direct_evaluation(self, client):
        dataset_id = upload(client)["id"]
        response = client.post(
            f"/datasets/{dataset_id}/exact-query",
            json={
                "attribute": "Sal",
                "predicate": {"clauses": [clause("Dept", "=", "A")]},
            },
        )
        assert response.status_code == 200
        assert response.json() == {"exact": 40.0}

    def test_unknown_attribute_422(self, client):
        dataset_id = upload(client)["id"]
        response = client.post(
            f"/datasets/{dataset_id}/exact-query",
            json={"attribute": "Nope", "predicate": {"clauses": []}},
        )
        assert response.status_code == 422


@pytest.mark.slow
class TestDemoScale:
    def test_full_drilldown_flow(self, client, salaries):
        descriptor = upload(client, csv_text=salaries.to_csv_text(), name="salaries")
        assert descriptor["n"] == DEMO_N
        assert descriptor["totals"]["Sal"] == DEMO_S

        sketch = build_sketch(
            client,
            descriptor["id"],
            attribute="Sal",
            m=10**6,
            p=1e-6,
            epsilon=0.04,
            seed=7,
        )
        assert sketch["b"] == DEMO_B

        answer = query(
            client, sketch["id"], [clause("Department", "=", "Toys")]
        ).json()
        assert abs(answer["estimate"] - DEMO_Q1_EXACT) <= 0.04 * DEMO_S
        assert answer["flags"] == []

        stats = client.get(f"/sketches/{sketch['id']}/stats").json()
        assert stats["frequency_mass"] == DEMO_B
        block = next(b for b in stats["blocks"] if b["value"] == 1e6)
        expected = DEMO_B * 1e12 / DEMO_S
        band = multinomial_band(DEMO_B, 1e12 / DEMO_S)
        assert abs(block["bag_mass"] - expected) <= band
        # nearly every selected record in the million-record block is a
        # single draw; collisions (Fr=2) are birthday-rare
        assert block["frequencies"][0]["fr"] == 1
        assert block["frequencies"][0]["count"] >= 0.99 * block["distinct"]
        assert sum(e["count"] for e in block["frequencies"]) == block["distinct"]

        exact = client.post(
            f"/datasets/{descriptor['id']}/exact-query",
            json={
                "attribute": "Sal",
                "predicate": {"clauses": [clause("Department", "=", "Toys")]},
            },
        )
        assert exact.status_code == 200
        assert exact.json() == {"exact": DEMO_Q1_EXACT}
