"""
Bundled scenarios (:mod:`~chainsem.examples`)
=============================================

=============== ===============================================================
name            content
=============== ===============================================================
transfer        one transfer between implicit accounts
originate       origination, ``get_contract`` on its hash, then an invocation
invoke          two accounts invoking the same pre-deployed contract
auction         an owner and two auto-bidding accounts around an auction
auction_solo    the auction with a single bidder
rejections      each injection failure raised and caught by the sending program
=============== ===============================================================

>>> sorted(SCENARIOS)
['auction', 'auction_solo', 'invoke', 'originate', 'rejections', 'transfer']
>>> load_example("transfer").managers
{'alice': 100, 'bob': 50}
"""

from __future__ import annotations

import json
from importlib import resources
from typing import TYPE_CHECKING, Any

from . import expr_lang as el
from .contract_stubs import (
    AUCTION_PARAM,
    AUCTION_STORAGE,
    builtin_auction,
    builtin_identity,
    fresh_auction_storage,
)
from .core_types import (
    OPH_NO_NO,
    TBool,
    TContract,
    TException,
    TInt,
    TOph,
    TPuh,
    TTz,
    TUnit,
)
from .dsl import (
    as_address,
    await_status,
    catch_all,
    contract_handle,
    if_,
    ignore,
    lam,
    let_,
    match,
    match_error,
    min_,
    rec,
    seq,
    sleep,
)
from .scenario import ContractSpec, NodeSpec, Scenario, account

if TYPE_CHECKING:
    from collections.abc import Callable, Mapping


__all__ = [
    "SCENARIOS",
    "auction",
    "auction_solo",
    "invoke",
    "json_to_dict",
    "load_example",
    "originate",
    "rejections",
    "transfer",
]


def json_to_dict(basename: str) -> dict[str, Any]:
    """
    Load a json file into a dict.

    All files names are relative to 'chainsem/data/'.

    Parameters
    ----------
    basename : string
        Name of file to load in 'chainsem/data' directory.

    Returns
    -------
    output : dict
    """
    with resources.as_file(
        resources.files("chainsem").joinpath("data", basename)
    ) as path, path.open() as f:
        return json.load(f)  # type: ignore[no-any-return]


def _tz(n: int) -> el.TzLit:
    return el.TzLit(n)


def _puk(name: str) -> el.PukLit:
    return el.PukLit(account(name).puk)


# * Simple scenarios ----------------------------------------------------------
def transfer() -> Scenario:
    return Scenario.from_dict(json_to_dict("transfer.json"))


def originate() -> Scenario:
    """Originate the identity contract, wait for its hash, and call it with 7."""
    code = builtin_identity()
    alice = _puk("alice")
    program = let_(
        "h",
        TOph(TInt(), TInt()),
        el.Originate(_tz(0), alice, el.CodeLit(code), el.IntLit(0), _tz(1)),
        let_(
            "c",
            TContract(TInt(), TInt()),
            el.Query(el.QueryKind.GET_CONTRACT, el.Var("h")),
            ignore(el.Transfer(_tz(0), alice, el.Var("c"), el.IntLit(7), _tz(1)), OPH_NO_NO),
        ),
    )
    return Scenario(
        "originate",
        managers={"alice": 100},
        nodes=(NodeSpec(("alice",), (program,)),),
        max_steps=200,
        description="origination followed by an invocation through get_contract",
    )


def invoke() -> Scenario:
    """Two accounts write 5 and 9 into an identity contract."""
    store = ContractSpec(builtin_identity(), "0")
    programs = {
        name: ignore(
            el.Transfer(_tz(0), _puk(name), el.PuhLit(store.puh), el.IntLit(n), _tz(1)),
            OPH_NO_NO,
        )
        for name, n in (("alice", 5), ("bob", 9))
    }
    return Scenario(
        "invoke",
        managers={"alice": 100, "bob": 100},
        contracts={"store": store},
        nodes=tuple(NodeSpec((name,), (p,)) for name, p in programs.items()),
        max_steps=200,
        description="concurrent invocations of one contract",
    )


# * Auction -------------------------------------------------------------------
HANDLE_TY = TContract(AUCTION_PARAM, AUCTION_STORAGE)


def bidder_program(
    name: str, auction_puh: str, limit: int, step: int = 10, fee: int = 1, wait: int = 3
) -> el.Expr:
    """
    Auto-bidding loop.

    While bidding is open and the highest bid (the contract balance) is below
    ``limit``, outbid the current highest bidder by ``step`` tokens up to
    ``limit``, ignoring failures, then wait and poll again.
    """
    me = _puk(name)
    auction = el.Var("auction")
    bid = catch_all(
        ignore(
            el.Transfer(
                min_(el.Add(el.Var("high"), _tz(step)), _tz(limit)),
                me,
                auction,
                el.Right(el.UnitLit()),
                _tz(fee),
            ),
            OPH_NO_NO,
        ),
        el.UnitLit(),
    )
    body = match(
        el.Query(el.QueryKind.GET_STORAGE, auction),
        (
            el.PPair(el.PVar("bidding"), el.PPair(el.PWild(), el.PVar("highest"))),
            let_(
                "high",
                TTz(),
                el.Query(el.QueryKind.GET_BALANCE, as_address(auction, HANDLE_TY)),
                if_(
                    el.And(el.Var("bidding"), el.Lt(el.Var("high"), _tz(limit))),
                    seq(
                        if_(el.Not(el.Eq(el.Var("highest"), me)), bid, el.UnitLit()),
                        sleep(wait),
                        el.App(el.Var("poll"), el.UnitLit()),
                    ),
                    el.UnitLit(),
                ),
            ),
        ),
    )
    poll = rec("poll", "_u", TUnit(), TUnit(), body)
    return let_(
        "auction",
        HANDLE_TY,
        contract_handle(auction_puh, AUCTION_PARAM, AUCTION_STORAGE),
        el.App(poll, el.UnitLit()),
    )


def owner_program(
    name: str, auction_puh: str, fee: int = 1, wait: int = 10, retry_wait: int = 3
) -> el.Expr:
    """
    Wait, then close the auction, retrying until the close is included.

    A close refused by the contract means the auction is already closed.
    """
    auction = el.Var("auction")
    attempt = el.Try(
        let_(
            "h",
            OPH_NO_NO,
            el.Transfer(_tz(0), _puk(name), auction, el.Left(el.UnitLit()), _tz(fee)),
            match(
                await_status(el.Var("h")),
                (el.PIncluded(el.PWild()), el.BoolLit(True)),
                (el.PWild(), el.BoolLit(False)),
            ),
        ),
        lam(
            "e",
            TException(),
            match(
                el.Var("e"),
                (el.PFailWith(el.PWild()), el.BoolLit(True)),
                (el.PWild(), el.BoolLit(False)),
            ),
        ),
    )
    body = let_(
        "done",
        TBool(),
        attempt,
        if_(
            el.Var("done"),
            el.UnitLit(),
            seq(sleep(retry_wait), el.App(el.Var("close"), el.UnitLit())),
        ),
    )
    close = rec("close", "_u", TUnit(), TUnit(), body)
    return let_(
        "auction",
        HANDLE_TY,
        contract_handle(auction_puh, AUCTION_PARAM, AUCTION_STORAGE),
        seq(sleep(wait), el.App(close, el.UnitLit())),
    )


def auction(
    limits: Mapping[str, int] | None = None,
    step: int = 10,
    fee: int = 1,
    balance: int = 1000,
    owner_wait: int = 10,
    poll_wait: int = 3,
    name: str = "auction",
) -> Scenario:
    """
    Auction run by ``owner`` with one auto-bidding node per entry of ``limits``.

    Parameters
    ----------
    limits : mapping of str to int, optional
        Bidding limit of each bidder.  Defaults to ``alice`` at 50 and ``bob``
        at 80.
    step : int
        Bid increment.
    fee : int
        Fee offered by every operation.
    balance : int
        Initial balance of every account.
    owner_wait, poll_wait : int
        Busy-wait lengths of the owner before closing and of the bidders
        between polls.
    """
    limits = {"alice": 50, "bob": 80} if limits is None else dict(limits)
    contract = ContractSpec(builtin_auction(), fresh_auction_storage(account("owner").puk))
    puh = contract.puh
    nodes = [NodeSpec(("owner",), (owner_program("owner", puh, fee, owner_wait, poll_wait),))]
    nodes.extend(
        NodeSpec((bidder,), (bidder_program(bidder, puh, limit, step, fee, poll_wait),))
        for bidder, limit in limits.items()
    )
    return Scenario(
        name,
        managers={"owner": balance, **dict.fromkeys(limits, balance)},
        contracts={"auction": contract},
        nodes=tuple(nodes),
        max_steps=2000,
        description="auction with auto-bidding programs and an owner closing it",
    )


def auction_solo() -> Scenario:
    """Auction with a single bidder and short waits, small enough to explore."""
    return auction({"alice": 50}, owner_wait=2, poll_wait=1, name="auction_solo")


# * Rejections ----------------------------------------------------------------
def rejections() -> Scenario:
    """
    One program per injection failure, each catching exactly its error.

    ``errB`` (balance), ``errF`` (fee), ``errP`` (failed downcast), a contract
    ``failwith`` from the dry run, and ``errC`` when a second operation is sent
    while the first is still pending.  Any other error is raised again.
    """
    store = ContractSpec(builtin_identity(), "0")
    auction_c = ContractSpec(builtin_auction(), fresh_auction_storage(account("bob").puk), time=1)
    bob = _puk("bob")

    def pay(sender: str, amount: int, fee: int = 1) -> el.Expr:
        return ignore(el.Transfer(_tz(amount), _puk(sender), bob, el.UnitLit(), _tz(fee)), OPH_NO_NO)

    def guarded(body: el.Expr, pattern: el.Pattern) -> el.Expr:
        return catch_all(body, match_error("_e", [(pattern, el.UnitLit())]))

    wrong = TContract(TUnit(), TUnit())
    node0 = (
        guarded(pay("alice", 1000), el.PError(el.ErrorKind.ERR_B)),
        guarded(pay("carol", 5, fee=0), el.PError(el.ErrorKind.ERR_F)),
        seq(pay("frank", 1), guarded(pay("frank", 1), el.PError(el.ErrorKind.ERR_C))),
    )
    node1 = (
        guarded(
            ignore(el.Cast(el.PuhLit(store.puh), TPuh(), wrong), wrong),
            el.PError(el.ErrorKind.ERR_P),
        ),
        guarded(
            ignore(
                el.Transfer(
                    _tz(0), _puk("erin"), el.PuhLit(auction_c.puh), el.Left(el.UnitLit()), _tz(1)
                ),
                OPH_NO_NO,
            ),
            el.PFailWith(el.PConst(el.StrLit("not owner"))),
        ),
    )
    return Scenario(
        "rejections",
        managers=dict.fromkeys(("alice", "bob", "carol", "dave", "erin", "frank"), 100),
        contracts={"store": store, "auction": auction_c},
        nodes=(
            NodeSpec(("alice", "carol", "frank"), node0),
            NodeSpec(("dave", "erin"), node1),
        ),
        max_steps=400,
        description="every rejection raised into its program and caught there",
    )


SCENARIOS: Mapping[str, Callable[[], Scenario]] = {
    "transfer": transfer,
    "originate": originate,
    "invoke": invoke,
    "auction": auction,
    "auction_solo": auction_solo,
    "rejections": rejections,
}
"""Bundled scenario builders by name."""


def load_example(name: str) -> Scenario:
    """
    Bundled scenario ``name``.

    Raises
    ------
    KeyError
        If no scenario has that name.
    """
    if name not in SCENARIOS:
        msg = f"no bundled scenario {name!r}; choose from {sorted(SCENARIOS)}"
        raise KeyError(msg)
    return SCENARIOS[name]()
