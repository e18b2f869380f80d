# mypy: disable-error-code="no-untyped-def, no-untyped-call"
from __future__ import annotations

import json

import click
import pytest
from click.testing import CliRunner

from chainsem import expr_lang as el
from chainsem.cli import _reports_failures, main
from chainsem.codec import expr_to_json
from chainsem.examples import load_example
from chainsem.scheduler import ReplayMismatchError, StaleTransitionError, read_trace_header


@pytest.fixture
def runner():
    return CliRunner()


def _invoke(runner, *args, **kwargs):
    return runner.invoke(main, list(args), catch_exceptions=False, **kwargs)


def test_run(runner) -> None:
    result = _invoke(runner, "run", "transfer", "--seed", "3")
    assert result.exit_code == 0
    report = json.loads(result.stdout)
    assert report["scenario"] == "transfer"
    assert report["seed"] == 3
    assert report["terminated"]
    assert report["kinds"]["node_inject"] == 1


def test_run_env_seed(runner) -> None:
    a = json.loads(_invoke(runner, "run", "transfer", env={"CHAINSEM_SEED": "9"}).stdout)
    b = json.loads(_invoke(runner, "run", "transfer", "--seed", "9").stdout)
    assert a == b


def test_run_options(runner) -> None:
    result = _invoke(runner, "run", "transfer", "--min-fee", "5")
    assert result.exit_code == 0
    kinds = json.loads(result.stdout)["kinds"]
    assert kinds["node_reject"] == 1
    assert "block_accept" not in kinds


def test_trace_and_replay(runner, tmp_path) -> None:
    trace = tmp_path / "trace.jsonl"
    snapshot = tmp_path / "final.json"
    result = _invoke(
        runner, "run", "invoke", "--seed", "2", "--trace", str(trace), "--snapshot", str(snapshot)
    )
    assert result.exit_code == 0
    digest = json.loads(result.stdout)["final_digest"]
    assert "managers" in json.loads(snapshot.read_text())["chain"]

    replayed = _invoke(runner, "replay", "invoke", str(trace))
    assert replayed.exit_code == 0
    assert json.loads(replayed.stdout)["final_digest"] == digest

    via_run = _invoke(runner, "run", "invoke", "--replay", str(trace))
    assert json.loads(via_run.stdout)["final_digest"] == digest

    # the trace belongs to another scenario
    mismatch = _invoke(runner, "replay", "transfer", str(trace))
    assert mismatch.exit_code == 2


def test_sweep(runner) -> None:
    result = _invoke(runner, "run", "transfer", "--sweep", "3", "--seed", "4")
    assert result.exit_code == 0
    report = json.loads(result.stdout)
    assert report["seeds"] == [4, 6]
    assert report["terminated"] == 3
    assert report["violations"] == []


def test_explore(runner) -> None:
    result = _invoke(runner, "explore", "transfer", "--depth", "6")
    assert result.exit_code == 0
    report = json.loads(result.stdout)
    assert report["violations"] == []
    assert report["terminal"] >= 1
    assert set(report["terminal_partitions"]) <= {"included", "timeout"}


def test_explore_budget(runner) -> None:
    result = _invoke(runner, "explore", "transfer", "--depth", "10", "--max-states", "3")
    assert result.exit_code == 3


def test_typecheck(runner) -> None:
    result = _invoke(runner, "typecheck", "auction")
    assert result.exit_code == 0
    report = json.loads(result.stdout)
    assert set(report["programs"].values()) == {"Unit"}
    assert len(report["delta"]) == 1


def _ill_typed(tmp_path):
    data = load_example("transfer").to_dict()
    data["nodes"][0]["programs"] = [expr_to_json(el.IntLit(1))]
    path = tmp_path / "bad.json"
    path.write_text(json.dumps(data))
    return path


def test_typecheck_ill_typed(runner, tmp_path) -> None:
    result = _invoke(runner, "typecheck", str(_ill_typed(tmp_path)))
    assert result.exit_code == 1
    assert '"/nodes[0]/programs[0]": "Int"' in result.output
    assert "T-Sub" in result.output


def test_typecheck_reports_derived_types(runner, tmp_path) -> None:
    data = load_example("transfer").to_dict()
    data["nodes"][0]["programs"] = [
        expr_to_json(el.Raise(el.ErrorLit(el.ErrorKind.ERR_B))),
        expr_to_json(el.Eq(el.IntLit(1), el.BoolLit(True))),
    ]
    path = tmp_path / "mixed.json"
    path.write_text(json.dumps(data))
    result = _invoke(runner, "typecheck", str(path))
    assert result.exit_code == 1
    assert '"/nodes[0]/programs[0]": "Unit"' in result.output
    assert '"/nodes[0]/programs[1]": "ill-typed: [T-Sub]' in result.output


def test_invalid_scenarios(runner, tmp_path) -> None:
    assert _invoke(runner, "run", str(_ill_typed(tmp_path))).exit_code == 1

    broken = tmp_path / "broken.json"
    broken.write_text(json.dumps({"name": "x", "colour": "blue"}))
    result = _invoke(runner, "run", str(broken))
    assert result.exit_code == 1
    assert "decode" in result.output

    assert _invoke(runner, "run", "nowhere").exit_code != 0


def test_export(runner, tmp_path) -> None:
    result = _invoke(runner, "export", "originate")
    assert result.exit_code == 0
    assert json.loads(result.stdout) == load_example("originate").to_dict()

    out = tmp_path / "originate.json"
    assert _invoke(runner, "export", "originate", "-o", str(out)).exit_code == 0
    result = _invoke(runner, "run", str(out), "--seed", "1")
    assert result.exit_code == 0
    assert json.loads(result.stdout)["scenario"] == "originate"


def test_replay_uses_recorded_options(runner, tmp_path) -> None:
    trace = tmp_path / "trace.jsonl"
    result = _invoke(
        runner, "run", "rejections", "--seed", "3", "--min-fee", "0", "--trace", str(trace)
    )
    assert result.exit_code == 0
    digest = json.loads(result.stdout)["final_digest"]
    header = read_trace_header(trace.read_text())
    assert header["seed"] == 3
    assert header["options"]["min_fee"] == 0

    replayed = _invoke(runner, "replay", "rejections", str(trace))
    assert replayed.exit_code == 0
    assert json.loads(replayed.stdout)["final_digest"] == digest

    via_run = _invoke(runner, "run", "rejections", "--replay", str(trace))
    assert via_run.exit_code == 0
    assert json.loads(via_run.stdout)["final_digest"] == digest


def test_replay_headerless_trace(runner, tmp_path) -> None:
    trace = tmp_path / "trace.jsonl"
    assert _invoke(runner, "run", "transfer", "--seed", "1", "--trace", str(trace)).exit_code == 0
    lines = trace.read_text().splitlines(keepends=True)
    assert "header" in json.loads(lines[0])
    trace.write_text("".join(lines[1:]))
    assert _invoke(runner, "replay", "transfer", str(trace)).exit_code == 0


@pytest.mark.parametrize(
    ("error", "code"),
    [
        (ValueError("bad value"), 1),
        (StaleTransitionError("not enabled"), 2),
        (ReplayMismatchError("digest differs"), 2),
    ],
)
def test_failure_exit_codes(error, code) -> None:
    @_reports_failures
    def failing() -> None:
        raise error

    with pytest.raises(click.ClickException) as info:
        failing()
    assert info.value.exit_code == code
