"""
Command line interface (:mod:`~chainsem.cli`)
=============================================

``chainsem run|explore|typecheck|replay|export``.  Every command takes a
scenario, either a JSON file or the name of a bundled scenario.  Every option
can also be set through a ``CHAINSEM_*`` environment variable.

Exit codes: ``0`` success, ``1`` invalid scenario, ``2`` invariant violation
or replay mismatch, ``3`` exploration budget exhausted.
"""

from __future__ import annotations

import json
import logging
from collections import Counter
from functools import wraps
from pathlib import Path
from typing import TYPE_CHECKING, Any, NoReturn

import click

from .core_types import render
from .examples import SCENARIOS, load_example
from .invariants import InvariantViolation
from .options import set_options
from .scenario import Scenario, ScenarioError, load, save
from .scheduler import (
    POLICIES,
    ExplorationBudgetExceeded,
    ReplayMismatchError,
    StaleTransitionError,
    config_digest,
    explore,
    read_trace,
    read_trace_header,
    replay,
    run,
    run_many,
)
from .type_checker import AmbientInfo, TypeCheckError, program_type

if TYPE_CHECKING:
    from collections.abc import Callable

    from ._typing import AssertionNames, ContractTyEnv, JSONDict
    from .scheduler import Config


__all__ = ["load_scenario", "main"]

logger = logging.getLogger(__name__)

EXIT_INVALID = 1
EXIT_VIOLATION = 2
EXIT_BUDGET = 3


class _Failure(click.ClickException):
    """Failure carrying a JSON report, printed on standard error."""

    def __init__(self, code: int, report: JSONDict) -> None:
        super().__init__(str(report.get("error", "failed")))
        self.exit_code = code
        self.report = report

    def show(self, file: Any = None) -> None:  # noqa: ARG002
        click.echo(json.dumps(self.report, indent=2), err=True)


# * Helpers -------------------------------------------------------------------
def load_scenario(source: str) -> Scenario:
    """Scenario from a JSON file, or the bundled scenario of that name."""
    path = Path(source)
    if path.is_file():
        return load(path)
    if source in SCENARIOS:
        return load_example(source)
    msg = f"{source!r} is neither a file nor one of {sorted(SCENARIOS)}"
    raise click.BadParameter(msg, param_hint="SCENARIO")


def _echo_json(data: Any) -> None:
    click.echo(json.dumps(data, indent=2))


def _fail(code: int, report: JSONDict) -> NoReturn:
    raise _Failure(code, report)


def _reports_failures(func: Callable[..., None]) -> Callable[..., None]:
    """Turn library errors into exit codes."""

    @wraps(func)
    def wrapper(*args: Any, **kwargs: Any) -> None:
        try:
            func(*args, **kwargs)
        except ScenarioError as e:
            _fail(EXIT_INVALID, {"error": "invalid scenario", "diagnostics": e.diagnostics})
        except (InvariantViolation, ReplayMismatchError, StaleTransitionError) as e:
            _fail(EXIT_VIOLATION, {"error": str(e)})
        except ValueError as e:
            _fail(EXIT_INVALID, {"error": str(e)})
        except ExplorationBudgetExceeded as e:
            _fail(EXIT_BUDGET, {"error": str(e), **e.result.summary()})

    return wrapper


def _status_partition(cfg: Config) -> str:
    kinds = sorted(e.status.kind.value for e in cfg.chain.pool.values())
    return ",".join(kinds) or "empty pool"


def _overrides(
    pool_cap: int | None, min_fee: int | None, no_empty_blocks: bool
) -> dict[str, Any]:
    out: dict[str, Any] = {}
    if pool_cap is not None:
        out["pool_cap"] = pool_cap
    if min_fee is not None:
        out["min_fee"] = min_fee
    if no_empty_blocks:
        out["empty_blocks"] = False
    return out


def _chain_options(func: Callable[..., Any]) -> Callable[..., Any]:
    """Options shared by commands that execute a scenario."""
    decorators = [
        click.option(
            "--assert",
            "assertions",
            default=None,
            envvar="CHAINSEM_ASSERT",
            help="Per-step checks: all, none or a comma separated list.",
        ),
        click.option(
            "--pool-cap",
            type=click.IntRange(min=1),
            default=None,
            envvar="CHAINSEM_POOL_CAP",
            help="Maximal number of pending operations.",
        ),
        click.option(
            "--min-fee",
            type=click.IntRange(min=0),
            default=None,
            envvar="CHAINSEM_MIN_FEE",
            help="Minimal fee accepted by the fee check.",
        ),
        click.option(
            "--no-empty-blocks",
            is_flag=True,
            default=False,
            envvar="CHAINSEM_NO_EMPTY_BLOCKS",
            help="Disable empty blocks.",
        ),
    ]
    for decorator in reversed(decorators):
        func = decorator(func)
    return func


def _assertions(value: str | None, scenario: Scenario) -> AssertionNames:
    return scenario.assertions if value is None else value


# * Commands ------------------------------------------------------------------
@click.group()
@click.option("-v", "--verbose", count=True, help="More logging (repeatable).")
@click.option("-q", "--quiet", is_flag=True, help="Only log errors.")
@click.version_option(package_name="chainsem")
def main(verbose: int, quiet: bool) -> None:
    """Run, explore and type check blockchain scenarios."""
    if quiet:
        level = logging.ERROR
    else:
        level = {0: logging.WARNING, 1: logging.INFO}.get(verbose, logging.DEBUG)
    logging.basicConfig(level=level, format="%(levelname)s %(name)s: %(message)s", force=True)


@main.command("run")
@click.argument("scenario")
@click.option("--seed", type=click.IntRange(min=0), default=None, envvar="CHAINSEM_SEED")
@click.option(
    "--max-steps", type=click.IntRange(min=0), default=None, envvar="CHAINSEM_MAX_STEPS"
)
@click.option(
    "--policy", type=click.Choice(sorted(POLICIES)), default=None, envvar="CHAINSEM_POLICY"
)
@_chain_options
@click.option(
    "--sweep",
    type=click.IntRange(min=1),
    default=None,
    envvar="CHAINSEM_SWEEP",
    help="Run this many consecutive seeds and report a summary.",
)
@click.option(
    "--trace",
    "trace_path",
    type=click.Path(dir_okay=False),
    default=None,
    envvar="CHAINSEM_TRACE",
    help="Write the JSON-lines trace here.",
)
@click.option(
    "--snapshot",
    "snapshot_path",
    type=click.Path(dir_okay=False),
    default=None,
    envvar="CHAINSEM_SNAPSHOT",
    help="Write the final configuration here.",
)
@click.option(
    "--replay",
    "replay_path",
    type=click.Path(exists=True, dir_okay=False),
    default=None,
    help="Replay this trace instead of running.",
)
@click.pass_context
@_reports_failures
def cmd_run(
    ctx: click.Context,
    scenario: str,
    seed: int | None,
    max_steps: int | None,
    policy: str | None,
    assertions: str | None,
    pool_cap: int | None,
    min_fee: int | None,
    no_empty_blocks: bool,
    sweep: int | None,
    trace_path: str | None,
    snapshot_path: str | None,
    replay_path: str | None,
) -> None:
    """Seeded random run of SCENARIO."""
    if replay_path is not None:
        ctx.invoke(cmd_replay, scenario=scenario, trace=replay_path)
        return

    sc = load_scenario(scenario)
    seed = sc.seed if seed is None else seed
    max_steps = sc.max_steps if max_steps is None else max_steps
    policy = sc.policy if policy is None else policy
    checks = _assertions(assertions, sc)

    with sc.option_context(), set_options(**_overrides(pool_cap, min_fee, no_empty_blocks)):
        cfg, delta = sc.to_config()
        if sweep is not None:
            _sweep(sc, cfg, delta, range(seed, seed + sweep), max_steps, policy, checks)
            return
        trace = run(cfg, seed, max_steps, policy, checks, delta)

    if trace_path is not None:
        Path(trace_path).write_text(trace.to_jsonl())
    if snapshot_path is not None:
        Path(snapshot_path).write_text(json.dumps(trace.final.to_json(), indent=2) + "\n")

    report: JSONDict = {
        "scenario": sc.name,
        "seed": seed,
        "policy": trace.policy,
        "steps": len(trace.events),
        "terminated": trace.terminated,
        "kinds": dict(Counter(k.value for k in trace.kinds())),
        "final_digest": trace.final_digest,
    }
    if trace.violation is not None:
        _fail(EXIT_VIOLATION, {**report, "violation": trace.violation.to_dict()})
    _echo_json(report)


def _sweep(
    sc: Scenario,
    cfg: Config,
    delta: ContractTyEnv,
    seeds: range,
    max_steps: int,
    policy: str,
    checks: AssertionNames,
) -> None:
    traces = run_many(cfg, seeds, max_steps, policy, checks, delta)
    violations = [
        {"seed": t.seed, **t.violation.to_dict()} for t in traces if t.violation is not None
    ]
    report: JSONDict = {
        "scenario": sc.name,
        "seeds": [seeds.start, seeds.stop - 1],
        "policy": policy,
        "terminated": sum(t.terminated for t in traces),
        "longest": max((len(t.events) for t in traces), default=0),
        "violations": violations,
    }
    if violations:
        _fail(EXIT_VIOLATION, report)
    _echo_json(report)


@main.command("explore")
@click.argument("scenario")
@click.option(
    "--depth", type=click.IntRange(min=0), default=8, envvar="CHAINSEM_DEPTH", show_default=True
)
@click.option(
    "--max-states",
    type=click.IntRange(min=1),
    default=100_000,
    envvar="CHAINSEM_MAX_STATES",
    show_default=True,
)
@_chain_options
@_reports_failures
def cmd_explore(
    scenario: str,
    depth: int,
    max_states: int,
    assertions: str | None,
    pool_cap: int | None,
    min_fee: int | None,
    no_empty_blocks: bool,
) -> None:
    """Exhaustive exploration of SCENARIO up to a depth."""
    sc = load_scenario(scenario)
    with sc.option_context(), set_options(**_overrides(pool_cap, min_fee, no_empty_blocks)):
        cfg, delta = sc.to_config()
        result = explore(cfg, depth, max_states, _assertions(assertions, sc), delta)

    report = {
        "scenario": sc.name,
        **result.summary(),
        "terminal_partitions": dict(
            Counter(_status_partition(c) for c in result.terminal_configs())
        ),
        "partitions": dict(Counter(_status_partition(c) for c in result.states.values())),
    }
    if result.violations:
        _fail(EXIT_VIOLATION, report)
    _echo_json(report)


@main.command("typecheck")
@click.argument("scenario")
@_reports_failures
def cmd_typecheck(scenario: str) -> None:
    """Check that SCENARIO gives a well-formed, well-typed configuration."""
    sc = load_scenario(scenario)
    with sc.option_context():
        diagnostics = sc.diagnostics()
        cfg = sc.config()

    ambient = AmbientInfo.from_chain(cfg.chain)
    programs: JSONDict = {}
    for i, node in enumerate(cfg.nodes):
        for j, program in enumerate(node.programs):
            try:
                derived = render(program_type(program, ambient))
            except TypeCheckError as e:
                derived = f"ill-typed: {e}"
            programs[f"/nodes[{i}]/programs[{j}]"] = derived
    report: JSONDict = {
        "scenario": sc.name,
        "delta": {puh: render(pair) for puh, pair in ambient.delta.items()},
        "programs": programs,
    }
    if diagnostics:
        _fail(EXIT_INVALID, {**report, "diagnostics": diagnostics})
    _echo_json(report)


@main.command("replay")
@click.argument("scenario")
@click.argument("trace", type=click.Path(exists=True, dir_okay=False))
@_reports_failures
def cmd_replay(scenario: str, trace: str) -> None:
    """
    Re-apply the transitions of TRACE to SCENARIO, checking every digest.

    The options recorded in the trace header override the scenario's.
    """
    sc = load_scenario(scenario)
    text = Path(trace).read_text()
    events = read_trace(text)
    recorded = read_trace_header(text).get("options", {})
    with sc.option_context(), set_options(**recorded):
        cfg, _ = sc.to_config()
        final = replay(cfg, events)
    _echo_json({"scenario": sc.name, "steps": len(events), "final_digest": config_digest(final)})


@main.command("export")
@click.argument("name", type=click.Choice(sorted(SCENARIOS)))
@click.option(
    "-o",
    "--output",
    type=click.Path(dir_okay=False),
    default=None,
    help="Write here instead of standard output.",
)
def cmd_export(name: str, output: str | None) -> None:
    """Write bundled scenario NAME as JSON."""
    sc = load_example(name)
    if output is None:
        _echo_json(sc.to_dict())
    else:
        save(sc, output)
        logger.info("wrote %s to %s", name, output)


if __name__ == "__main__":  # pragma: no cover
    main()
