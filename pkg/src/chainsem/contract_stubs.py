"""
Contract stubs (:mod:`~chainsem.contract_stubs`)
================================================

Contracts are black boxes with a typed signature.  Each registered stub is a
deterministic function of the parameter, storage, contract balance, incoming
amount and sender, returning either a new storage plus an optional refund, or
a ``FAILWITH`` message.

>>> code = builtin_auction()
>>> out = apply_stub(code, "right ()", fresh_auction_storage("puk_owner"), 0, 10, "puk_bob")
>>> out.new_storage
'(true,(puk_owner,puk_bob))'
>>> apply_stub(code, "right ()", out.new_storage, 10, 10, "puk_carol")
StubFailWith(message='bid too low')
"""

from __future__ import annotations

import logging
from dataclasses import dataclass
from typing import TYPE_CHECKING, Callable, Union

from . import expr_lang as el
from .codec import parse_stored, serialize_value
from .core_types import CodeRef, TAddr, TBool, TInt, TPair, TSum, TUnit, Ty

if TYPE_CHECKING:
    from collections.abc import Mapping


__all__ = [
    "REGISTRY",
    "CodeRef",
    "Refund",
    "Stub",
    "StubCall",
    "StubFailWith",
    "StubOutcome",
    "StubSuccess",
    "apply_stub",
    "builtin_auction",
    "builtin_deposit",
    "builtin_identity",
    "fresh_auction_storage",
    "lookup",
]

logger = logging.getLogger(__name__)


@dataclass(frozen=True)
class Refund:
    """Single outgoing transfer emitted by a contract run."""

    target: str
    amount: int


@dataclass(frozen=True)
class StubSuccess:
    new_storage: str
    refund: Refund | None = None


@dataclass(frozen=True)
class StubFailWith:
    message: str


StubOutcome = Union[StubSuccess, StubFailWith]


@dataclass(frozen=True)
class StubCall:
    """Decoded inputs of a contract run."""

    param: el.Expr
    storage: el.Expr
    balance: int
    amount: int
    sender: str


@dataclass(frozen=True)
class _Result:
    storage: el.Expr
    refund: Refund | None = None


@dataclass(frozen=True)
class Stub:
    """Registered contract behavior with its declared types."""

    stub_id: str
    param_ty: Ty
    storage_ty: Ty
    behavior: Callable[[StubCall], _Result | StubFailWith]

    @property
    def code(self) -> CodeRef:
        return CodeRef(self.stub_id, self.param_ty, self.storage_ty)


# * Behaviors -----------------------------------------------------------------
def _address(v: el.Expr) -> str:
    if isinstance(v, el.PukLit):
        return v.puk
    if isinstance(v, el.PuhLit):
        return v.puh
    msg = f"not an address: {v!r}"
    raise TypeError(msg)


def _address_lit(addr: str) -> el.Expr:
    return el.PuhLit(addr) if addr.startswith("puh_") else el.PukLit(addr)


def _auction_storage(bidding: bool, owner: str, highest: str) -> el.Expr:
    return el.PairE(
        el.BoolLit(bidding), el.PairE(_address_lit(owner), _address_lit(highest))
    )


def _auction(call: StubCall) -> _Result | StubFailWith:
    # storage: (bidding, (owner, highest_bidder)); the highest bid is the balance
    match call.storage:
        case el.PairE(el.BoolLit(bidding), el.PairE(owner_v, highest_v)):
            owner, highest = _address(owner_v), _address(highest_v)
        case _:
            msg = f"malformed auction storage {call.storage!r}"
            raise TypeError(msg)

    if isinstance(call.param, el.Right):
        # %bid
        if not bidding:
            return StubFailWith("closed")
        if call.amount <= call.balance:
            return StubFailWith("bid too low")
        refund = Refund(highest, call.balance) if call.balance > 0 else None
        return _Result(_auction_storage(True, owner, call.sender), refund)

    # %close
    if call.sender != owner:
        return StubFailWith("not owner")
    if not bidding:
        return StubFailWith("closed")
    total = call.balance + call.amount
    refund = Refund(owner, total) if total > 0 else None
    return _Result(_auction_storage(False, owner, highest), refund)


def _identity(call: StubCall) -> _Result | StubFailWith:
    return _Result(call.param)


def _deposit(call: StubCall) -> _Result | StubFailWith:
    return _Result(call.storage)


AUCTION_PARAM = TSum(TUnit(), TUnit())
AUCTION_STORAGE = TPair(TBool(), TPair(TAddr(), TAddr()))

REGISTRY: Mapping[str, Stub] = {
    s.stub_id: s
    for s in (
        Stub("auction", AUCTION_PARAM, AUCTION_STORAGE, _auction),
        Stub("identity", TInt(), TInt(), _identity),
        Stub("deposit", TUnit(), TUnit(), _deposit),
    )
}
"""Registered stubs by identifier.  Immutable after import."""


def lookup(stub_id: str) -> Stub | None:
    return REGISTRY.get(stub_id)


def builtin_auction() -> CodeRef:
    """
    Code of the auction contract.

    Parameter ``Sum Unit Unit`` (``left`` closes, ``right`` bids) and storage
    ``Pair Bool (Pair Addr Addr)`` holding the bidding flag, the owner and the
    highest bidder.
    """
    return REGISTRY["auction"].code


def builtin_identity() -> CodeRef:
    return REGISTRY["identity"].code


def builtin_deposit() -> CodeRef:
    return REGISTRY["deposit"].code


def fresh_auction_storage(owner: str) -> str:
    """Initial auction storage: open, with the owner as placeholder bidder."""
    return serialize_value(_auction_storage(True, owner, owner))


def apply_stub(
    code: CodeRef,
    param: str,
    storage: str,
    contract_balance: int,
    amount: int,
    sender: str,
) -> StubOutcome:
    """
    Run the contract ``code``.

    Parameters
    ----------
    code : CodeRef
        Registered code.
    param, storage : str
        Serialized parameter and current storage.
    contract_balance : int
        Balance before the incoming ``amount``.
    amount : int
        Tokens sent with the call.
    sender : str
        Address of the caller.

    Returns
    -------
    StubSuccess or StubFailWith

    Raises
    ------
    KeyError
        If ``code`` is not registered.
    chainsem.codec.StoredValueError
        If ``param`` or ``storage`` do not have the declared types.
    """
    stub = REGISTRY[code.stub_id]
    call = StubCall(
        param=parse_stored(param, stub.param_ty),
        storage=parse_stored(storage, stub.storage_ty),
        balance=contract_balance,
        amount=amount,
        sender=sender,
    )
    result = stub.behavior(call)
    if isinstance(result, StubFailWith):
        logger.debug("%s failwith %r", code.stub_id, result.message)
        return result
    return StubSuccess(serialize_value(result.storage), result.refund)
