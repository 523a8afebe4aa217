"""The gateway must speak exactly the wire protocol in PROTOCOL.md; the
golden files under fixtures/protocol/ pin both directions."""

import json
import shlex
import sys
from pathlib import Path

import pytest

from robustkit.errors import ScoringError
from robustkit.models import BuiltinGlm, GlmSpec, SubprocessScorer

FIXTURES = Path(__file__).resolve().parent.parent / "fixtures" / "protocol"


@pytest.fixture
def basic_request():
    return json.loads((FIXTURES / "request_basic.json").read_text())


def test_request_serialization_matches_golden_bytes(basic_request):
    encoded = json.dumps(
        {"id": 0, "columns": basic_request["columns"], "rows": basic_request["rows"]}
    )
    assert encoded + "\n" == (FIXTURES / "request_basic.json").read_text()


def test_builtin_glm_reproduces_golden_response(basic_request):
    glm = BuiltinGlm(GlmSpec.from_file(FIXTURES / "glm_halfx.json"))
    preds = glm.score(basic_request["columns"], basic_request["rows"])
    expected = json.loads((FIXTURES / "response_basic.json").read_text())
    assert basic_request["id"] == expected["id"]
    assert preds == expected["predictions"]


def test_subprocess_round_trip_against_golden_files(basic_request):
    # The child verifies the request line matches the golden request, then
    # replies with the golden response verbatim.
    child = (
        "import sys\n"
        f"expected = open({str(FIXTURES / 'request_basic.json')!r}).read()\n"
        "line = sys.stdin.readline()\n"
        "assert line == expected, line\n"
        f"sys.stdout.write(open({str(FIXTURES / 'response_basic.json')!r}).read())\n"
        "sys.stdout.flush()\n"
    )
    scorer = SubprocessScorer(f"{shlex.quote(sys.executable)} -c {shlex.quote(child)}")
    try:
        preds = scorer.score(basic_request["columns"], basic_request["rows"])
    finally:
        scorer.close()
    assert preds == json.loads((FIXTURES / "response_basic.json").read_text())["predictions"]


def test_error_response_fixture_is_rejected_as_reply(basic_request):
    # An id=-1 error reply can never satisfy a real request.
    child = (
        "import sys\n"
        "sys.stdin.readline()\n"
        f"sys.stdout.write(open({str(FIXTURES / 'response_error.json')!r}).read())\n"
        "sys.stdout.flush()\n"
    )
    scorer = SubprocessScorer(f"{shlex.quote(sys.executable)} -c {shlex.quote(child)}")
    try:
        with pytest.raises(ScoringError, match="id"):
            scorer.score(basic_request["columns"], basic_request["rows"])
    finally:
        scorer.close()


def test_error_fixture_shape():
    err = json.loads((FIXTURES / "response_error.json").read_text())
    assert err["id"] == -1
    assert isinstance(err["error"], str)
    with pytest.raises(json.JSONDecodeError):
        json.loads((FIXTURES / "request_malformed.txt").read_text())
