# mypy: disable-error-code="no-untyped-def, no-untyped-call"
from __future__ import annotations

import json

import pytest

from chainsem import chain_state as cs
from chainsem.contract_stubs import (
    Refund,
    builtin_auction,
    builtin_identity,
    fresh_auction_storage,
)
from chainsem.core_types import CodeRef
from chainsem.options import set_options


def _managers(**balances: int) -> dict[str, cs.ManagerEntry]:
    return {f"puk_{k}": cs.ManagerEntry(v) for k, v in balances.items()}


def _chain(time: int = 0, **balances: int) -> cs.Blockchain:
    return cs.Blockchain(managers=_managers(**balances), time=time)


def _with_contract(b: cs.Blockchain, code: CodeRef, storage: str, bal: int = 0, t: int = 0):
    puh = cs.gen_contract_hash(code, t)
    contractors = {**b.contractors, puh: cs.ContractorEntry(code, t, bal, storage)}
    return b.set(contractors=contractors), puh


def _transfer(nt: int, sender: str, target: str, param: str = "()", fee: int = 1):
    return cs.TransferOp(nt, sender, target, param, fee)


# * Checks --------------------------------------------------------------------
def test_chk_bal() -> None:
    m = _managers(a=10)
    assert cs.chk_bal(m, "puk_a", 9, 1)
    assert not cs.chk_bal(m, "puk_a", 10, 1)
    assert not cs.chk_bal(m, "puk_z", 0, 0)


def test_chk_count() -> None:
    m = cs.upd_count(_managers(a=10), "puk_a", True)
    assert not cs.chk_count(m, "puk_a")
    assert cs.chk_count(cs.upd_count(m, "puk_a", False), "puk_a")
    assert not cs.chk_count(m, "puk_z")


def test_chk_fee() -> None:
    assert cs.chk_fee(1)
    assert not cs.chk_fee(0)
    assert cs.chk_fee(0, min_fee=0)
    with set_options(min_fee=5):
        assert not cs.chk_fee(4)
        assert cs.chk_fee(5)


def test_chk_arg_and_puh() -> None:
    b, puh = _with_contract(cs.Blockchain(), builtin_identity(), "0")
    assert cs.chk_puh(b.contractors, puh)
    assert not cs.chk_puh(b.contractors, "puh_missing")
    assert cs.chk_arg(b.contractors, puh, "7")
    assert not cs.chk_arg(b.contractors, puh, "()")
    assert not cs.chk_arg(b.contractors, "puh_missing", "7")


def test_chk_prg_and_init() -> None:
    assert cs.chk_prg(builtin_auction())
    assert not cs.chk_prg(CodeRef("missing", None, None))
    assert cs.chk_init(builtin_auction(), fresh_auction_storage("puk_a"))
    assert not cs.chk_init(builtin_auction(), "7")


# * Updates -------------------------------------------------------------------
def test_upd_succ() -> None:
    m = cs.upd_count(_managers(a=100), "puk_a", True)
    out = cs.upd_succ(m, "puk_a", 10, 2)
    assert out["puk_a"] == cs.ManagerEntry(88, cs.Counter(1, False))
    # input untouched
    assert m["puk_a"].bal == 100


def test_upd_succ_requires_flag() -> None:
    with pytest.raises(cs.ModelFault):
        cs.upd_succ(_managers(a=100), "puk_a", 1, 1)
    with pytest.raises(cs.ModelFault):
        cs.upd_succ({}, "puk_a", 1, 1)


def test_upd_constr() -> None:
    b, puh = _with_contract(
        cs.Blockchain(), builtin_auction(), "(true,(puk_o,puk_b))", bal=10
    )
    contractors, refund = cs.upd_constr(b.contractors, puh, 15, "right ()", sender="puk_c")
    assert refund == Refund("puk_b", 10)
    assert contractors[puh].bal == 15
    assert contractors[puh].storage == "(true,(puk_o,puk_c))"
    with pytest.raises(cs.ContractFailure, match="bid too low") as info:
        cs.upd_constr(b.contractors, puh, 5, "right ()", sender="puk_c")
    assert info.value.message == "bid too low"
    with pytest.raises(cs.ModelFault):
        cs.upd_constr(b.contractors, "puh_missing", 5, "right ()", sender="puk_c")


# * Pool ----------------------------------------------------------------------
def test_inject() -> None:
    b = _chain(a=100)
    op = _transfer(10, "puk_a", "puk_b")
    b1, oph = cs.inject(b, op)
    assert oph == cs.gen_op_hash(op, 0, 0)
    assert b1.pool[oph] == cs.PoolEntry(op, 0, cs.Status.pending(), 0)
    assert b1.managers["puk_a"].cnt.flag
    # same operation again gets a fresh hash
    _, oph2 = cs.inject(b1.set(managers=b.managers), op)
    assert oph2 != oph


@pytest.mark.parametrize("n", [10_000, pytest.param(100_000, marks=pytest.mark.slow)])
def test_op_hash_collisions(rng, n) -> None:
    codes = (builtin_identity(), builtin_auction())
    inputs: set[tuple[cs.Operation, int, int]] = set()
    for _ in range(n):
        nt, fee, sender = (int(x) for x in rng.integers(0, 100, size=3))
        op: cs.Operation
        if rng.random() < 0.8:
            op = _transfer(nt, f"puk_{sender}", f"puk_{rng.integers(100)}", fee=fee)
        else:
            op = cs.OriginateOp(nt, f"puk_{sender}", codes[int(rng.integers(2))], "0", fee)
        inputs.add((op, int(rng.integers(0, 1000)), int(rng.integers(0, 3))))
    hashes = {cs.gen_op_hash(*args) for args in inputs}
    assert len(hashes) == len(inputs)


def test_pool_cap() -> None:
    b = _chain(a=100, b=100, c=100)
    hashes = []
    for name in "abc":
        b, oph = cs.inject(b, _transfer(1, f"puk_{name}", "puk_z"))
        hashes.append(oph)
    b2, expired = cs.enforce_pool_cap(b, cap=2)
    assert expired == (hashes[0],)
    assert b2.pool[hashes[0]].status == cs.Status.timeout()
    assert not b2.managers["puk_a"].cnt.flag
    assert cs.enforce_pool_cap(b) == (b, ())


# * Blocks --------------------------------------------------------------------
def test_accept_transfer_to_implicit() -> None:
    b, oph = cs.inject(_chain(a=100), _transfer(10, "puk_a", "puk_b", fee=2))
    report = cs.block_accept_report(b, oph)
    out = report.chain
    assert out.time == 1
    assert out.pool[oph].status == cs.Status.included(0)
    assert out.managers["puk_a"] == cs.ManagerEntry(88, cs.Counter(1, False))
    assert out.managers["puk_b"].bal == 10
    assert report.credits == {"puk_b": 10}
    assert report.divergence is None


@pytest.mark.parametrize(("delay", "ok"), [(0, True), (60, True), (61, False)])
def test_acceptance_window(delay, ok) -> None:
    b, oph = cs.inject(_chain(a=100), _transfer(1, "puk_a", "puk_b"))
    b = b.set(time=delay)
    if ok:
        assert cs.block_accept(b, oph).pool[oph].status == cs.Status.included(delay)
        with pytest.raises(cs.TransitionError):
            cs.block_timeout(b, oph)
    else:
        with pytest.raises(cs.TransitionError, match="acceptance window"):
            cs.block_accept(b, oph)
        out = cs.block_timeout(b, oph)
        assert out.pool[oph].status == cs.Status.timeout()
        assert out.managers["puk_a"] == cs.ManagerEntry(100, cs.Counter(0, False))
        assert out.time == b.time


def test_window_option() -> None:
    b, oph = cs.inject(_chain(a=100), _transfer(1, "puk_a", "puk_b"))
    with set_options(acceptance_window=5):
        cs.block_timeout(b.set(time=6), oph)
        with pytest.raises(cs.TransitionError):
            cs.block_accept(b.set(time=6), oph)


def test_accept_not_pending() -> None:
    b, oph = cs.inject(_chain(a=100), _transfer(1, "puk_a", "puk_b"))
    b = cs.block_accept(b, oph)
    with pytest.raises(cs.TransitionError, match="not pending"):
        cs.block_accept(b, oph)
    with pytest.raises(cs.TransitionError):
        cs.block_accept(b, "oph_missing")


def test_bake() -> None:
    with pytest.raises(cs.TransitionError):
        cs.block_bake(_chain(a=1))
    b, _ = cs.inject(_chain(a=100), _transfer(1, "puk_a", "puk_b"))
    assert cs.block_bake(b).time == 1
    assert cs.block_bake(b).pool == b.pool


def test_contract_call_with_refund() -> None:
    b, puh = _with_contract(
        _chain(o=100, a=100, b=100), builtin_auction(), "(true,(puk_o,puk_b))", bal=10
    )
    b, oph = cs.inject(b, _transfer(20, "puk_a", puh, "right ()"))
    report = cs.block_accept_report(b, oph)
    out = report.chain
    assert out.contractors[puh].bal == 20
    assert out.contractors[puh].storage == "(true,(puk_o,puk_a))"
    assert out.managers["puk_a"].bal == 79
    assert out.managers["puk_b"].bal == 110
    assert report.credits == {"puk_b": 10}
    assert report.refund == Refund("puk_b", 10)


def test_divergence_charges_fee_only() -> None:
    b, puh = _with_contract(
        _chain(o=100, a=100), builtin_auction(), fresh_auction_storage("puk_o")
    )
    b, oph = cs.inject(b, _transfer(0, "puk_a", puh, "left ()", fee=3))
    report = cs.block_accept_report(b, oph)
    assert report.divergence == "not owner"
    out = report.chain
    assert out.pool[oph].status == cs.Status.included(0)
    assert out.managers["puk_a"] == cs.ManagerEntry(97, cs.Counter(1, False))
    assert out.contractors[puh] == b.contractors[puh]


def test_originate() -> None:
    code = builtin_identity()
    b, oph = cs.inject(_chain(time=4, a=100), cs.OriginateOp(5, "puk_a", code, "0", 1))
    with pytest.raises(cs.TransitionError):
        cs.block_accept(b, oph)
    out = cs.block_originate_accept(b, oph)
    puh = cs.gen_contract_hash(code, 4)
    assert out.contractors[puh] == cs.ContractorEntry(code, 4, 5, "0")
    assert out.managers["puk_a"].bal == 94
    assert cs.well_formed(out)


# * Well formedness -----------------------------------------------------------
def test_well_formed() -> None:
    b, oph = cs.inject(_chain(a=100, b=0), _transfer(1, "puk_a", "puk_b"))
    assert cs.well_formed(b, [["puk_a"], ["puk_b"]])
    assert not cs.well_formed(b, [["puk_a"], ["puk_a"]])
    assert not cs.well_formed(b, [["puk_c"]])

    entry = b.pool[oph]
    bad = b.set(pool={"oph_forged": entry})
    assert any("does not match" in e for e in cs.well_formed_errors(bad))
    neg = b.set(managers={**b.managers, "puk_b": cs.ManagerEntry(-1)})
    assert cs.well_formed_errors(neg) == ["manager puk_b has negative balance"]


def test_chain_json() -> None:
    b, puh = _with_contract(_chain(a=100), builtin_auction(), fresh_auction_storage("puk_a"))
    b, oph = cs.inject(b, _transfer(5, "puk_a", puh, "right ()"))
    b = cs.block_accept(b, oph)
    data = json.loads(json.dumps(cs.chain_to_json(b)))
    assert cs.chain_from_json(data) == b
