"""Tests for the HTTP service endpoints and the CLI thin client."""

import json
import os

import pytest

from sdcd.cli import (
    EXIT_IO,
    EXIT_NONFINITE,
    EXIT_OK,
    EXIT_USAGE,
    EXIT_VALIDATION,
    main,
)
from sdcd.service import app


@pytest.fixture()
def client():
    from starlette.testclient import TestClient

    with TestClient(app, raise_server_exceptions=False) as c:
        yield c


def write_edge_list(path, edges):
    with open(path, "w") as fh:
        fh.write("src,dst\n")
        for i, j in edges:
            fh.write(f"{i},{j}\n")


FAST_CONFIG = {"epochs1": 10, "epochs2": 10, "batch_size": 64,
               "check_period": 5, "patience": 0}


class TestHealth:
    def test_ok(self, client):
        body = client.get("/health").json()
        assert body["status"] == "ok"


class TestSimulateEndpoint:
    def test_writes_dataset(self, client, tmp_path):
        out = str(tmp_path / "sim")
        resp = client.post("/simulate", json={
            "d": 5, "s": 2.0, "n_obs": 50, "n_per_target": 10,
            "frac_intervened": 0.4, "seed": 1, "out_dir": out,
        })
        assert resp.status_code == 200
        body = resp.json()
        assert body["n_rows"] == 50 + 2 * 10  # ceil(0.4*5)=2 targets
        assert len(body["intervened"]) == 2
        for path in body["paths"].values():
            assert os.path.exists(path)

    def test_rejects_s_above_d_minus_1(self, client, tmp_path):
        resp = client.post("/simulate", json={
            "d": 3, "s": 3.0, "out_dir": str(tmp_path)})
        assert resp.status_code == 400
        assert resp.json()["error"] == "validation"

    def test_pydantic_validation(self, client, tmp_path):
        resp = client.post("/simulate", json={
            "d": 0, "s": 1.0, "out_dir": str(tmp_path)})
        assert resp.status_code == 422


class TestTrainEndpoint:
    def test_end_to_end(self, client, tmp_path):
        sim = client.post("/simulate", json={
            "d": 4, "s": 1.5, "n_obs": 150, "seed": 0,
            "out_dir": str(tmp_path / "sim")}).json()
        resp = client.post("/train", json={
            "data_path": sim["paths"]["data"],
            "meta_path": sim["paths"]["meta"],
            "graph_out": str(tmp_path / "pred.csv"),
            "log_out": str(tmp_path / "log.jsonl"),
            "config": FAST_CONFIG,
        })
        assert resp.status_code == 200
        body = resp.json()
        assert body["is_dag"]
        assert body["epochs_run"] == {"stage1": 10, "stage2": 10}
        assert os.path.exists(body["graph_path"])
        assert os.path.exists(body["log_path"])

    def test_missing_input_is_validation_error(self, client, tmp_path):
        resp = client.post("/train", json={
            "data_path": str(tmp_path / "nope.csv"),
            "meta_path": str(tmp_path / "nope.json"),
            "graph_out": str(tmp_path / "g.csv")})
        assert resp.status_code == 400
        assert resp.json()["error"] == "validation"

    def test_unknown_config_key_is_validation_error(self, client, tmp_path):
        sim = client.post("/simulate", json={
            "d": 3, "s": 1.0, "n_obs": 30,
            "out_dir": str(tmp_path / "sim")}).json()
        resp = client.post("/train", json={
            "data_path": sim["paths"]["data"],
            "meta_path": sim["paths"]["meta"],
            "graph_out": str(tmp_path / "g.csv"),
            "config": {"learning_rate": 0.1}})
        assert resp.status_code == 400
        assert resp.json()["error"] == "validation"


class TestEvalEndpoint:
    def test_metrics(self, client, tmp_path):
        pred = tmp_path / "pred.csv"
        true = tmp_path / "true.csv"
        write_edge_list(pred, [(0, 1), (1, 2)])
        write_edge_list(true, [(0, 1), (2, 1)])
        body = client.post("/eval", json={
            "pred_path": str(pred), "true_path": str(true), "d": 3}).json()
        assert body["shd"] == 1          # one reversal
        assert body["precision"] == 0.5
        assert body["recall"] == 0.5

    def test_missing_file_is_io_error(self, client, tmp_path):
        resp = client.post("/eval", json={
            "pred_path": str(tmp_path / "a.csv"),
            "true_path": str(tmp_path / "b.csv")})
        assert resp.status_code == 404
        assert resp.json()["error"] == "io"

    def test_aligns_d_when_unspecified(self, client, tmp_path):
        pred = tmp_path / "pred.csv"
        true = tmp_path / "true.csv"
        write_edge_list(pred, [(0, 1)])
        write_edge_list(true, [(0, 1), (3, 4)])
        body = client.post("/eval", json={
            "pred_path": str(pred), "true_path": str(true)}).json()
        assert body["shd"] == 1


class TestBenchEndpoint:
    def test_rows_and_csv(self, client, tmp_path):
        out = tmp_path / "probe.csv"
        body = client.post("/bench-constraints", json={
            "constraints": ["exp", "spectral"], "family": "cycle",
            "d_list": [10, 50], "scales": [0.5], "csv_out": str(out)}).json()
        assert len(body["rows"]) == 4
        text = out.read_text()
        assert text.splitlines()[0] == "d,constraint,family,scale,value,status"
        statuses = {(r["d"], r["constraint"]): r["status"] for r in body["rows"]}
        assert statuses[(50, "exp")] == "underflow-to-zero"
        assert statuses[(50, "spectral")] == "ok"

    def test_nonfinite_values_serialized(self, client):
        body = client.post("/bench-constraints", json={
            "constraints": ["exp"], "family": "uniform",
            "d_list": [100], "scales": [1.0]}).json()
        value = body["rows"][0]["value"]
        assert isinstance(value, (str, float))

    def test_unknown_constraint(self, client):
        resp = client.post("/bench-constraints", json={
            "constraints": ["cosh"], "d_list": [5]})
        assert resp.status_code == 400
        assert resp.json()["error"] == "validation"


class TestCli:
    def test_version(self, capsys):
        with pytest.raises(SystemExit) as exc:
            main(["--version"])
        assert exc.value.code == 0

    def test_usage_error(self):
        with pytest.raises(SystemExit) as exc:
            main(["simulate", "--d", "5"])  # missing required args
        assert exc.value.code == EXIT_USAGE

    def test_simulate_writes_manifest(self, tmp_path, capsys):
        out = tmp_path / "sim"
        code = main(["simulate", "--d", "4", "--s", "1.5", "--n-obs", "40",
                     "--seed", "3", "--out-dir", str(out)])
        assert code == EXIT_OK
        manifest = json.loads((out / "manifest.json").read_text())
        assert manifest["command"] == "simulate"
        assert manifest["status"] == "done"
        assert all(os.path.exists(p) for p in manifest["outputs"])

    def test_eval_prints_csv(self, tmp_path, capsys):
        pred = tmp_path / "p.csv"
        true = tmp_path / "t.csv"
        write_edge_list(pred, [(0, 1)])
        write_edge_list(true, [(0, 1)])
        code = main(["eval", "--pred", str(pred), "--true", str(true),
                     "--d", "2", "--metrics", "shd", "f1"])
        assert code == EXIT_OK
        lines = capsys.readouterr().out.strip().splitlines()
        assert lines[0] == "shd,f1"
        assert lines[1] == "0,1"

    def test_eval_missing_file_exit_code(self, tmp_path, capsys):
        with pytest.raises(SystemExit) as exc:
            main(["eval", "--pred", str(tmp_path / "x.csv"),
                  "--true", str(tmp_path / "y.csv")])
        assert exc.value.code == EXIT_IO

    def test_train_validation_exit_code(self, tmp_path, capsys):
        with pytest.raises(SystemExit) as exc:
            main(["train", "--data", str(tmp_path / "no.csv"),
                  "--meta", str(tmp_path / "no.json"),
                  "--out", str(tmp_path / "g.csv")])
        assert exc.value.code == EXIT_VALIDATION

    def test_train_bad_inline_config(self, tmp_path, capsys):
        code = main(["train", "--data", "d", "--meta", "m",
                     "--out", "o", "--config", "{not json"])
        assert code == EXIT_VALIDATION

    def test_bench_stdout(self, capsys):
        code = main(["bench-constraints", "--constraints", "exp",
                     "--d-list", "5,40", "--scale-list", "0.5"])
        assert code == EXIT_OK
        out = capsys.readouterr().out
        assert out.splitlines()[0] == "d,constraint,family,scale,value,status"
        assert "underflow-to-zero" in out

    def test_exit_code_table_complete(self):
        assert {EXIT_OK, EXIT_USAGE, EXIT_VALIDATION,
                EXIT_NONFINITE, EXIT_IO} == {0, 2, 3, 4, 5}


class TestReplay:
    def test_simulate_replay_byte_identical(self, tmp_path, capsys):
        out = tmp_path / "sim"
        assert main(["simulate", "--d", "4", "--s", "1.5", "--n-obs", "30",
                     "--seed", "7", "--out-dir", str(out)]) == EXIT_OK
        manifest = out / "manifest.json"
        originals = {
            p: open(p, "rb").read()
            for p in json.loads(manifest.read_text())["outputs"]
        }
        for p in originals:
            os.remove(p)
        assert main(["replay", str(manifest)]) == EXIT_OK
        for p, blob in originals.items():
            assert open(p, "rb").read() == blob

    def test_missing_manifest(self, capsys):
        assert main(["replay", "/nonexistent/manifest.json"]) == EXIT_IO
