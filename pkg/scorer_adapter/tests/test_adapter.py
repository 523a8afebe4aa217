import io
import json
import pickle
import shlex
import subprocess
import sys
import threading
import urllib.request
from pathlib import Path

import pytest

from scorer_adapter import (
    AdapterConfig,
    AdapterError,
    GlmModel,
    PickleModel,
    handle_line,
    load_model,
    serve_stdio,
    startup_probe,
)
from scorer_adapter.cli import build_config, main
from scorer_adapter.server import make_http_server

FIXTURES = Path(__file__).resolve().parent.parent.parent / "fixtures" / "protocol"


def write_glm(path, link="identity", intercept=0.0, coefficients=None, reference_levels=None):
    path.write_text(
        json.dumps(
            {
                "link": link,
                "intercept": intercept,
                "coefficients": coefficients or {},
                "reference_levels": reference_levels or {},
            }
        )
    )
    return str(path)


class TestConfig:
    def test_rejects_unknown_kind(self):
        with pytest.raises(AdapterError):
            AdapterConfig(artifact="m.json", kind="onnx")

    def test_rejects_duplicate_columns(self):
        with pytest.raises(AdapterError):
            AdapterConfig(artifact="m.json", columns=("x", "x"))

    def test_cli_parses_column_order(self):
        cfg = build_config(["--model", "m.json", "--columns", "a,b,c", "--serve", "http"])
        assert cfg.columns == ("a", "b", "c")
        assert cfg.server == "http"


class TestGlmModel:
    def test_identity_with_dummies(self, tmp_path):
        path = write_glm(
            tmp_path / "glm.json",
            intercept=0.5,
            coefficients={"x": 2.0, "grade=b": 1.0},
            reference_levels={"grade": "a"},
        )
        model = GlmModel(path)
        preds = model.score(["x", "grade"], [[1.0, "a"], [1.0, "b"]])
        assert preds == [2.5, 3.5]

    def test_column_order_independent(self, tmp_path):
        path = write_glm(tmp_path / "glm.json", coefficients={"x": 1.0, "z": 10.0})
        model = GlmModel(path)
        a = model.score(["x", "z"], [[1.0, 2.0]])
        b = model.score(["z", "x"], [[2.0, 1.0]])
        assert a == b == [21.0]

    def test_missing_column_errors(self, tmp_path):
        model = GlmModel(write_glm(tmp_path / "glm.json", coefficients={"x": 1.0}))
        with pytest.raises(AdapterError, match="missing model column"):
            model.score(["z"], [[1.0]])

    def test_logit_in_open_unit_interval(self, tmp_path):
        model = GlmModel(
            write_glm(tmp_path / "glm.json", link="logit", coefficients={"x": 3.0})
        )
        preds = model.score(["x"], [[-2.0], [0.0], [2.0]])
        assert all(0.0 < p < 1.0 for p in preds)
        assert preds[1] == 0.5

    def test_bad_artifact_raises(self, tmp_path):
        bad = tmp_path / "glm.json"
        bad.write_text("{not json")
        with pytest.raises(AdapterError):
            GlmModel(str(bad))

    def test_startup_probe_passes(self, tmp_path):
        model = GlmModel(
            write_glm(
                tmp_path / "glm.json",
                coefficients={"x": 1.0, "grade=b": 2.0},
                reference_levels={"grade": "a"},
            )
        )
        startup_probe(model)


from estimators import HalfProbaEstimator, StochasticEstimator

TESTS_DIR = Path(__file__).resolve().parent


class TestPickleModel:
    def test_predict_proba_mode(self, tmp_path):
        path = tmp_path / "model.pkl"
        path.write_bytes(pickle.dumps(HalfProbaEstimator()))
        cfg = AdapterConfig(artifact=str(path), kind="pickle", predict_mode="probability")
        model = load_model(cfg)
        assert model.score(["x"], [[2.0]]) == [pytest.approx(0.2)]

    def test_column_reordering(self, tmp_path):
        path = tmp_path / "model.pkl"
        path.write_bytes(pickle.dumps(HalfProbaEstimator()))
        cfg = AdapterConfig(
            artifact=str(path), kind="pickle", predict_mode="probability",
            columns=("x",),
        )
        model = load_model(cfg)
        # model wants x first; request delivers it second
        assert model.score(["junk", "x"], [["?", 2.0]]) == [pytest.approx(0.2)]
        with pytest.raises(AdapterError, match="missing"):
            model.score(["junk"], [["?"]])


class TestHandleLine:
    @pytest.fixture
    def model(self, tmp_path):
        return GlmModel(write_glm(tmp_path / "glm.json", coefficients={"x": 0.5}))

    def test_echoes_id_and_length(self, model):
        out = handle_line(model, json.dumps({"id": 9, "columns": ["x"], "rows": [[2.0], [4.0]]}))
        assert out == {"id": 9, "predictions": [1.0, 2.0]}

    def test_malformed_json(self, model):
        assert handle_line(model, "{oops")["id"] == -1

    def test_invalid_id(self, model):
        assert handle_line(model, json.dumps({"id": -3, "columns": ["x"], "rows": []}))["id"] == -1

    def test_ragged_rows(self, model):
        out = handle_line(model, json.dumps({"id": 1, "columns": ["x"], "rows": [[1.0, 2.0]]}))
        assert out["id"] == -1

    def test_scoring_error_reported(self, model):
        out = handle_line(model, json.dumps({"id": 1, "columns": ["z"], "rows": [[1.0]]}))
        assert out["id"] == -1 and "scoring failed" in out["error"]

    def test_golden_fixtures_byte_identical(self):
        model = GlmModel(str(FIXTURES / "glm_halfx.json"))
        request = (FIXTURES / "request_basic.json").read_text()
        got = json.dumps(handle_line(model, request)) + "\n"
        assert got == (FIXTURES / "response_basic.json").read_text()
        err = json.dumps(handle_line(model, (FIXTURES / "request_malformed.txt").read_text()))
        assert err + "\n" == (FIXTURES / "response_error.json").read_text()


class TestServeStdio:
    def test_continues_after_malformed_line(self, tmp_path):
        model = GlmModel(write_glm(tmp_path / "glm.json", coefficients={"x": 1.0}))
        stdin = io.StringIO(
            "{broken\n"
            + json.dumps({"id": 0, "columns": ["x"], "rows": [[3.0]]})
            + "\n"
        )
        stdout = io.StringIO()
        serve_stdio(model, stdin, stdout)
        lines = [json.loads(l) for l in stdout.getvalue().splitlines()]
        assert lines[0]["id"] == -1
        assert lines[1] == {"id": 0, "predictions": [3.0]}

    def test_subprocess_round_trip(self, tmp_path):
        glm = write_glm(tmp_path / "glm.json", coefficients={"x": 2.0})
        cmd = f"{shlex.quote(sys.executable)} -m scorer_adapter.cli --model {shlex.quote(glm)}"
        proc = subprocess.Popen(
            cmd, shell=True, stdin=subprocess.PIPE, stdout=subprocess.PIPE, text=True
        )
        try:
            req = json.dumps({"id": 4, "columns": ["x"], "rows": [[1.0], [2.5]]})
            proc.stdin.write(req + "\n")
            proc.stdin.flush()
            reply = json.loads(proc.stdout.readline())
        finally:
            proc.stdin.close()
            proc.wait(timeout=10)
        assert reply == {"id": 4, "predictions": [2.0, 5.0]}
        assert proc.returncode == 0

    def test_bad_artifact_exits_nonzero(self, tmp_path):
        bad = tmp_path / "glm.json"
        bad.write_text("{")
        assert main(["--model", str(bad)]) == 1


class TestHttp:
    def test_predict_and_error_status(self, tmp_path):
        model = GlmModel(write_glm(tmp_path / "glm.json", coefficients={"x": 1.0}))
        server = make_http_server(model, "127.0.0.1", 0)
        thread = threading.Thread(target=server.serve_forever, daemon=True)
        thread.start()
        try:
            url = f"http://127.0.0.1:{server.server_address[1]}/predict"
            body = json.dumps({"id": 2, "columns": ["x"], "rows": [[7.0]]}).encode()
            with urllib.request.urlopen(
                urllib.request.Request(url, data=body)
            ) as resp:
                assert resp.status == 200
                assert json.loads(resp.read()) == {"id": 2, "predictions": [7.0]}
            bad = urllib.request.Request(url, data=b"{nope")
            with pytest.raises(urllib.error.HTTPError) as exc:
                urllib.request.urlopen(bad)
            assert exc.value.code == 400
            assert json.loads(exc.value.read())["id"] == -1
        finally:
            server.shutdown()
            server.server_close()


class TestDeterminismContract:
    def test_primary_probe_rejects_stochastic_model(self, tmp_path):
        # The client-side startup probe must reject a model that answers
        # the same rows differently on consecutive calls.
        from robustkit.errors import ScoringError
        from robustkit.models import SubprocessScorer, determinism_probe

        path = tmp_path / "model.pkl"
        path.write_bytes(pickle.dumps(StochasticEstimator()))
        # the child must be able to unpickle the estimator class
        cmd = (
            f"PYTHONPATH={shlex.quote(str(TESTS_DIR))} "
            f"{shlex.quote(sys.executable)} -m scorer_adapter.cli "
            f"--model {shlex.quote(str(path))} --kind pickle"
        )
        scorer = SubprocessScorer(cmd)
        try:
            with pytest.raises(ScoringError, match="non-deterministic"):
                determinism_probe(scorer, ["x"], [[float(i)] for i in range(16)])
        finally:
            scorer.close()
