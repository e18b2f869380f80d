# mypy: disable-error-code="no-untyped-def, no-untyped-call"
from __future__ import annotations

import time

import pytest

from chainsem import expr_lang as el
from chainsem.chain_state import TransferOp
from chainsem.codec import parse_stored
from chainsem.contract_stubs import AUCTION_STORAGE
from chainsem.examples import SCENARIOS, auction, load_example
from chainsem.scheduler import POLICIES, TransitionKind, canonical_key, explore, run, run_many
from chainsem.type_checker import type_config

# small scenarios, mixed policies
SWEEP = ["transfer", "originate", "invoke", "rejections", "auction_solo"]


@pytest.mark.parametrize("name", sorted(SCENARIOS))
def test_bundled_scenarios_are_valid(name) -> None:
    scenario = load_example(name)
    assert scenario.diagnostics() == []
    cfg, delta = scenario.to_config()
    assert type_config(delta, cfg)


@pytest.mark.parametrize("name", ["transfer", "originate", "invoke", "rejections"])
def test_bundled_scenarios_run(name) -> None:
    scenario = load_example(name)
    cfg, delta = scenario.to_config()
    trace = run(cfg, seed=5, max_steps=scenario.max_steps, assertions="all", delta=delta)
    assert trace.violation is None
    assert trace.terminated


def test_rejections_all_caught() -> None:
    cfg, delta = load_example("rejections").to_config()
    for seed in range(3):
        trace = run(cfg, seed=seed, max_steps=400, delta=delta)
        assert not [e for e in trace.events if "uncaught" in e.payload]
        premises = {e.payload["premise"] for e in trace.events if "premise" in e.payload}
        assert {"chk_bal", "chk_fee", "dry_run"} <= premises


def _last_accepted_bidder(trace, puh: str) -> str | None:
    pool = trace.final.chain.pool
    last = None
    for event in trace.events:
        if event.tid.kind != TransitionKind.BLOCK_ACCEPT or "divergence" in event.payload:
            continue
        op = pool[event.tid.oph].op
        if isinstance(op, TransferOp) and op.target == puh and op.param.startswith("right"):
            last = op.puk
    return last


def _check_auction(trace, puh: str) -> None:
    assert trace.violation is None
    assert trace.terminated
    assert not [e for e in trace.events if "uncaught" in e.payload]

    storage = parse_stored(trace.final.chain.contractors[puh].storage, AUCTION_STORAGE)
    assert isinstance(storage, el.PairE)
    assert storage.fst == el.BoolLit(False)
    highest = storage.snd.snd  # type: ignore[attr-defined]
    last = _last_accepted_bidder(trace, puh)
    assert highest == el.PukLit(last or "puk_owner")

    # closing hands the winning bid to the owner
    closes = [
        e.payload["refund"]["amount"]
        for e in trace.events
        if e.payload.get("refund", {}).get("target") == "puk_owner"
    ]
    assert all(0 < amount <= 80 for amount in closes)
    assert trace.final.chain.contractors[puh].bal == 0


@pytest.mark.parametrize("seed", [1, 2, 3])
def test_auction(seed) -> None:
    scenario = auction()
    cfg, delta = scenario.to_config()
    trace = run(cfg, seed=seed, max_steps=scenario.max_steps, assertions="all", delta=delta)
    _check_auction(trace, scenario.puh("auction"))


@pytest.mark.slow
def test_auction_many_seeds() -> None:
    scenario = auction()
    cfg, delta = scenario.to_config()
    traces = run_many(
        cfg, range(100), scenario.max_steps, assertions="prop2,consistency", delta=delta
    )
    for trace in traces:
        _check_auction(trace, scenario.puh("auction"))


def test_auction_solo_explore() -> None:
    cfg, delta = load_example("auction_solo").to_config()
    result = explore(cfg, depth=4, max_states=50_000, assertions="prop2,consistency", delta=delta)
    assert result.violations == []
    assert len(result) > 1


@pytest.mark.parametrize("depth", [4, pytest.param(7, marks=pytest.mark.slow)])
def test_auction_solo_runs_stay_in_explored_states(depth) -> None:
    cfg, delta = load_example("auction_solo").to_config()
    result = explore(cfg, depth=depth, max_states=500_000, delta=delta)
    for seed in range(20):
        trace = run(cfg, seed=seed, max_steps=depth, delta=delta)
        key = canonical_key(trace.final)
        assert key in result.states
        assert result.depth_of[key] <= len(trace.events)


@pytest.mark.parametrize("name", ["transfer", "originate", "invoke"])
def test_progress_by_exploration(name) -> None:
    cfg, delta = load_example(name).to_config()
    result = explore(
        cfg, depth=10, max_states=200_000, assertions="progress,preservation", delta=delta
    )
    assert result.violations == []
    for final in result.terminal_configs():
        assert final.is_done()


@pytest.mark.parametrize("name", SWEEP)
@pytest.mark.parametrize(
    "seeds", [range(3), pytest.param(range(3, 100), marks=pytest.mark.slow)]
)
def test_sweep_keeps_typing_and_balances(name, seeds) -> None:
    scenario = load_example(name)
    cfg, delta = scenario.to_config()
    policies = sorted(POLICIES)
    for seed in seeds:
        trace = run(
            cfg,
            seed=seed,
            max_steps=scenario.max_steps,
            policy=policies[seed % len(policies)],
            assertions="preservation,prop2",
            delta=delta,
        )
        assert trace.violation is None


@pytest.mark.parametrize(
    ("name", "seeds", "limit"),
    [
        ("transfer", 50, 20.0),
        pytest.param("auction", 20, 120.0, marks=pytest.mark.slow),
    ],
)
def test_assertion_sweep_time(name, seeds, limit) -> None:
    scenario = load_example(name)
    cfg, delta = scenario.to_config()
    start = time.perf_counter()
    traces = run_many(cfg, range(seeds), scenario.max_steps, assertions="all", delta=delta)
    elapsed = time.perf_counter() - start
    assert [t.violation for t in traces] == [None] * seeds
    assert elapsed < limit


def test_load_example_unknown() -> None:
    with pytest.raises(KeyError, match="no bundled scenario"):
        load_example("lottery")
