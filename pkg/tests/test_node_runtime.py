# mypy: disable-error-code="no-untyped-def, no-untyped-call"
from __future__ import annotations

import pytest

from chainsem import expr_lang as el
from chainsem.chain_state import (
    Blockchain,
    ContractorEntry,
    ManagerEntry,
    ModelFault,
    OriginateOp,
    block_accept,
    block_originate_accept,
    block_timeout,
    gen_contract_hash,
    inject,
    upd_count,
)
from chainsem.contract_stubs import (
    AUCTION_PARAM,
    AUCTION_STORAGE,
    builtin_auction,
    builtin_identity,
    fresh_auction_storage,
)
from chainsem.core_types import (
    OPH_NO_NO,
    CodeRef,
    TAddr,
    TContract,
    TInt,
    TPair,
    TPuh,
    TPuk,
    TUnit,
)
from chainsem.node_runtime import (
    BLOCKED,
    Account,
    Injected,
    Node,
    Raised,
    Rejection,
    StepKind,
    classify_program,
    literal_handles,
    perform_downcast,
    query,
    step_program,
    try_inject_originate,
    try_inject_transfer,
)
from chainsem.options import set_options

ErrorKind = el.ErrorKind
IDENTITY = builtin_identity()
AUCTION = builtin_auction()
ID_PUH = gen_contract_hash(IDENTITY, 0)
AUCTION_PUH = gen_contract_hash(AUCTION, 1)


@pytest.fixture
def chain() -> Blockchain:
    return Blockchain(
        managers={f"puk_{n}": ManagerEntry(100) for n in ("alice", "bob", "owner")},
        contractors={
            ID_PUH: ContractorEntry(IDENTITY, 0, 0, "0"),
            AUCTION_PUH: ContractorEntry(AUCTION, 1, 0, fresh_auction_storage("puk_owner")),
        },
        time=2,
    )


def _node(program: el.Expr, *names: str) -> Node:
    return Node((program,), frozenset(Account.named(n) for n in names or ("alice",)))


def _transfer(
    amount: int = 10,
    sender: str = "alice",
    target: el.Expr | None = None,
    param: el.Expr | None = None,
    fee: int = 1,
) -> el.Transfer:
    return el.Transfer(
        el.TzLit(amount),
        el.PukLit(f"puk_{sender}"),
        el.PukLit("puk_bob") if target is None else target,
        el.UnitLit() if param is None else param,
        el.TzLit(fee),
    )


def test_inject_transfer(chain) -> None:
    program = el.App(el.Lam("_", OPH_NO_NO, el.UnitLit()), _transfer())
    out = try_inject_transfer(_node(program), chain, 0)
    assert isinstance(out, Injected)
    assert out.oph in out.chain.pool
    assert out.chain.managers["puk_alice"].cnt.flag
    # balance is only charged at acceptance
    assert out.chain.managers["puk_alice"].bal == 100
    assert out.node.programs[0] == el.App(el.Lam("_", OPH_NO_NO, el.UnitLit()), el.OphLit(out.oph))


@pytest.mark.parametrize(
    ("transfer", "names", "error", "premise"),
    [
        (_transfer(), ("bob",), el.ErrorLit(ErrorKind.ERR_K), "account"),
        (_transfer(amount=100), (), el.ErrorLit(ErrorKind.ERR_B), "chk_bal"),
        (
            _transfer(target=el.PuhLit(ID_PUH), param=el.StrLit("x")),
            (),
            el.ErrorLit(ErrorKind.ERR_A),
            "chk_arg",
        ),
        (_transfer(target=el.PuhLit("puh_missing")), (), el.ErrorLit(ErrorKind.ERR_H), "chk_puh"),
        (_transfer(target=el.PukLit("puk_zed")), (), el.ErrorLit(ErrorKind.ERR_K), "target"),
        (_transfer(fee=0), (), el.ErrorLit(ErrorKind.ERR_F), "chk_fee"),
        (
            _transfer(amount=0, target=el.PuhLit(AUCTION_PUH), param=el.Left(el.UnitLit())),
            (),
            el.FailWith(el.StrLit("not owner")),
            "dry_run",
        ),
    ],
)
def test_transfer_rejections(chain, transfer, names, error, premise) -> None:
    out = try_inject_transfer(_node(transfer, *names), chain, 0)
    assert isinstance(out, Rejection)
    assert out.error == error
    assert out.premise == premise
    assert out.node.programs[0] == el.Raise(error, OPH_NO_NO)


def test_counter_checked_after_balance(chain) -> None:
    busy = chain.set(managers=upd_count(chain.managers, "puk_alice", True))
    out = try_inject_transfer(_node(_transfer()), busy, 0)
    assert isinstance(out, Rejection)
    assert out.premise == "chk_count"
    out = try_inject_transfer(_node(_transfer(amount=100)), busy, 0)
    assert out.premise == "chk_bal"  # type: ignore[union-attr]


def test_fee_threshold_option(chain) -> None:
    with set_options(min_fee=3):
        out = try_inject_transfer(_node(_transfer(fee=2)), chain, 0)
    assert isinstance(out, Rejection)
    assert out.error == el.ErrorLit(ErrorKind.ERR_F)


@pytest.mark.parametrize(
    ("code", "init", "error"),
    [
        (CodeRef("missing", TInt(), TInt()), el.IntLit(0), ErrorKind.ERR_P),
        (CodeRef("identity", TUnit(), TInt()), el.IntLit(0), ErrorKind.ERR_P),
        (IDENTITY, el.StrLit("x"), ErrorKind.ERR_I),
    ],
)
def test_originate_rejections(chain, code, init, error) -> None:
    e = el.Originate(el.TzLit(0), el.PukLit("puk_alice"), el.CodeLit(code), init, el.TzLit(1))
    out = try_inject_originate(_node(e), chain, 0)
    assert isinstance(out, Rejection)
    assert out.error == el.ErrorLit(error)


def test_originate_then_get_contract(chain) -> None:
    e = el.Originate(el.TzLit(5), el.PukLit("puk_alice"), el.CodeLit(IDENTITY), el.IntLit(3), el.TzLit(1))
    out = try_inject_originate(_node(e), chain, 0)
    assert isinstance(out, Injected)
    arg = el.OphLit(out.oph)
    assert query(out.chain, el.QueryKind.GET_CONTRACT, arg) is BLOCKED
    assert query(out.chain, el.QueryKind.GET_STATUS, arg) == el.Pending()

    accepted = block_originate_accept(out.chain, out.oph)
    puh = gen_contract_hash(IDENTITY, chain.time)
    assert query(accepted, el.QueryKind.GET_CONTRACT, arg) == el.PuhLit(puh)
    assert query(accepted, el.QueryKind.GET_STATUS, arg) == el.Included(el.IntLit(chain.time))
    assert query(accepted, el.QueryKind.GET_STORAGE, el.PuhLit(puh)) == el.IntLit(3)
    assert query(accepted, el.QueryKind.GET_BALANCE, el.PuhLit(puh)) == el.TzLit(5)

    expired = block_timeout(out.chain.set(time=chain.time + 61), out.oph)
    assert query(expired, el.QueryKind.GET_CONTRACT, arg) == Raised(el.ErrorLit(ErrorKind.ERR_H))


def test_queries(chain) -> None:
    assert query(chain, el.QueryKind.GET_BALANCE, el.PukLit("puk_bob")) == el.TzLit(100)
    assert query(chain, el.QueryKind.GET_BALANCE, el.PuhLit("puh_none")) == Raised(
        el.ErrorLit(ErrorKind.ERR_H)
    )
    assert query(chain, el.QueryKind.GET_STORAGE, el.PuhLit("puh_none")) == Raised(
        el.ErrorLit(ErrorKind.ERR_H)
    )
    storage = query(chain, el.QueryKind.GET_STORAGE, el.PuhLit(AUCTION_PUH))
    assert storage == el.PairE(
        el.BoolLit(True), el.PairE(el.PukLit("puk_owner"), el.PukLit("puk_owner"))
    )
    with pytest.raises(ModelFault):
        query(chain, el.QueryKind.GET_STATUS, el.OphLit("oph_missing"))


def test_storage_reads_committed_state(chain) -> None:
    op = _transfer(target=el.PuhLit(ID_PUH), param=el.IntLit(9))
    out = try_inject_transfer(_node(op), chain, 0)
    assert isinstance(out, Injected)
    assert query(out.chain, el.QueryKind.GET_STORAGE, el.PuhLit(ID_PUH)) == el.IntLit(0)
    done = block_accept(out.chain, out.oph)
    assert query(done, el.QueryKind.GET_STORAGE, el.PuhLit(ID_PUH)) == el.IntLit(9)


def test_downcasts(chain) -> None:
    handle = el.PuhLit(ID_PUH)
    assert perform_downcast(chain, handle, TPuh(), TContract(TInt(), TInt())) == handle
    assert perform_downcast(chain, handle, TPuh(), TContract(TUnit(), TUnit())) == Raised(
        el.ErrorLit(ErrorKind.ERR_P)
    )
    assert perform_downcast(chain, el.PuhLit("puh_x"), TPuh(), TContract(TInt(), TInt())) == Raised(
        el.ErrorLit(ErrorKind.ERR_P)
    )
    assert perform_downcast(chain, handle, TAddr(), TPuh()) == handle
    assert perform_downcast(chain, el.PukLit("puk_bob"), TAddr(), TPuh()) == Raised(
        el.ErrorLit(ErrorKind.ERR_H)
    )
    assert perform_downcast(chain, el.PukLit("puk_bob"), TAddr(), TPuk()) == el.PukLit("puk_bob")
    assert perform_downcast(chain, el.PukLit("puk_zed"), TAddr(), TPuk()) == Raised(
        el.ErrorLit(ErrorKind.ERR_K)
    )


CAST_TARGETS = (
    TPuk(),
    TPuh(),
    TContract(TInt(), TInt()),
    TContract(AUCTION_PARAM, AUCTION_STORAGE),
    TContract(TUnit(), TUnit()),
)
CAST_ERRORS = {TPuk: ErrorKind.ERR_K, TPuh: ErrorKind.ERR_H, TContract: ErrorKind.ERR_P}


def _random_contractors(rng) -> dict[str, ContractorEntry]:
    out = {}
    for t in range(int(rng.integers(0, 4))):
        if rng.random() < 0.5:
            out[gen_contract_hash(IDENTITY, t)] = ContractorEntry(IDENTITY, t, 0, "0")
        else:
            storage = fresh_auction_storage("puk_alice")
            out[gen_contract_hash(AUCTION, t)] = ContractorEntry(AUCTION, t, 0, storage)
    return out


@pytest.mark.parametrize("n", [1_000, pytest.param(10_000, marks=pytest.mark.slow)])
def test_random_downcasts(rng, n) -> None:
    code_types = {IDENTITY: TPair(TInt(), TInt()), AUCTION: TPair(AUCTION_PARAM, AUCTION_STORAGE)}
    for _ in range(n):
        contractors = _random_contractors(rng)
        managers = {p: ManagerEntry(1) for p in ("puk_alice", "puk_bob") if rng.random() < 0.5}
        b = Blockchain(managers=managers, contractors=contractors)
        target = CAST_TARGETS[int(rng.integers(len(CAST_TARGETS)))]
        handles: list[el.Expr] = [el.PuhLit(p) for p in (*contractors, "puh_x")]
        if not isinstance(target, TContract):
            handles += [el.PukLit("puk_alice"), el.PukLit("puk_bob")]
        v = handles[int(rng.integers(len(handles)))]

        match target, v:
            case TPuk(), el.PukLit(puk):
                ok = puk in managers
            case TPuh(), el.PuhLit(puh):
                ok = puh in contractors
            case TContract(p, s), el.PuhLit(puh):
                ok = puh in contractors and code_types[contractors[puh].code] == TPair(p, s)
            case _:
                ok = False
        source = TPuh() if isinstance(target, TContract) else TAddr()
        out = perform_downcast(b, v, source, target)
        assert out == (v if ok else Raised(el.ErrorLit(CAST_ERRORS[type(target)])))


def test_step_program_kinds(chain) -> None:
    node = _node(el.Add(el.IntLit(1), el.IntLit(1)))
    assert classify_program(node, chain, 0) == StepKind.EVAL
    assert step_program(node, chain, 0).node.programs[0] == el.IntLit(2)

    node = _node(el.Query(el.QueryKind.GET_BALANCE, el.PukLit("puk_alice")))
    step = step_program(node, chain, 0)
    assert step.kind == StepKind.QUERY
    assert step.payload == {"query": "get_balance", "arg": "puk_alice", "result": "100tz"}

    node = _node(el.Cast(el.PuhLit(ID_PUH), TPuh(), TContract(TInt(), TInt())))
    step = step_program(node, chain, 0)
    assert step.kind == StepKind.CAST
    assert step.result == (el.PuhLit(ID_PUH), TContract(TInt(), TInt()))

    assert classify_program(_node(el.UnitLit()), chain, 0) is None
    with pytest.raises(ModelFault):
        step_program(_node(el.UnitLit()), chain, 0)


def test_rejection_then_uncaught(chain) -> None:
    node = _node(_transfer(amount=1000))
    step = step_program(node, chain, 0)
    assert step.kind == StepKind.REJECT
    assert step.payload == {"raised": "errB", "premise": "chk_bal"}
    assert step.chain == chain

    step = step_program(step.node, chain, 0)
    assert step.kind == StepKind.EVAL
    assert step.payload == {"uncaught": "errB"}
    assert step.node.programs[0] == el.UnitLit()
    assert step.node.is_done()


def test_fault_terminates_program(chain) -> None:
    node = _node(el.Match(el.IntLit(1), (el.MatchArm(el.PConst(el.IntLit(2)), el.UnitLit()),)))
    step = step_program(node, chain, 0)
    assert "fault" in step.payload
    assert step.node.programs[0] == el.UnitLit()


def test_blocked_program(chain) -> None:
    op = OriginateOp(0, "puk_alice", IDENTITY, "0", 1)
    pending, oph = inject(chain, op)
    node = _node(el.Query(el.QueryKind.GET_CONTRACT, el.OphLit(oph)))
    assert classify_program(node, pending, 0) is None


def test_literal_handles() -> None:
    program = el.PairE(
        el.OphLit("oph_1"), el.Transfer(
            el.TzLit(0), el.PukLit("puk_a"), el.PuhLit("puh_b"), el.UnitLit(), el.TzLit(1)
        )
    )
    assert literal_handles([program]) == ({"oph_1"}, {"puk_a"}, {"puh_b"})
