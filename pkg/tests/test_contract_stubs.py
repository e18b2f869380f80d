# mypy: disable-error-code="no-untyped-def, no-untyped-call"
from __future__ import annotations

import pytest

from chainsem.codec import StoredValueError
from chainsem.contract_stubs import (
    REGISTRY,
    CodeRef,
    Refund,
    StubFailWith,
    StubSuccess,
    apply_stub,
    builtin_auction,
    builtin_deposit,
    builtin_identity,
    fresh_auction_storage,
    lookup,
)

AUCTION = builtin_auction()
OPEN = fresh_auction_storage("puk_owner")


def test_first_bid_has_no_refund() -> None:
    out = apply_stub(AUCTION, "right ()", OPEN, 0, 10, "puk_bob")
    assert out == StubSuccess("(true,(puk_owner,puk_bob))", None)


def test_outbid_refunds_previous_bidder() -> None:
    storage = "(true,(puk_owner,puk_bob))"
    out = apply_stub(AUCTION, "right ()", storage, 10, 20, "puk_alice")
    assert out == StubSuccess("(true,(puk_owner,puk_alice))", Refund("puk_bob", 10))


@pytest.mark.parametrize("amount", [0, 5, 10])
def test_bid_too_low(amount) -> None:
    out = apply_stub(AUCTION, "right ()", "(true,(puk_owner,puk_bob))", 10, amount, "puk_alice")
    assert out == StubFailWith("bid too low")


def test_close() -> None:
    storage = "(true,(puk_owner,puk_bob))"
    out = apply_stub(AUCTION, "left ()", storage, 40, 0, "puk_owner")
    assert out == StubSuccess("(false,(puk_owner,puk_bob))", Refund("puk_owner", 40))

    assert apply_stub(AUCTION, "left ()", storage, 40, 0, "puk_bob") == StubFailWith("not owner")


def test_closed_auction_rejects() -> None:
    closed = "(false,(puk_owner,puk_bob))"
    assert apply_stub(AUCTION, "right ()", closed, 0, 100, "puk_alice") == StubFailWith("closed")
    assert apply_stub(AUCTION, "left ()", closed, 0, 0, "puk_owner") == StubFailWith("closed")


def test_close_without_bids_has_no_refund() -> None:
    out = apply_stub(AUCTION, "left ()", OPEN, 0, 0, "puk_owner")
    assert out == StubSuccess("(false,(puk_owner,puk_owner))", None)


def test_identity_and_deposit() -> None:
    assert apply_stub(builtin_identity(), "7", "0", 0, 0, "puk_a") == StubSuccess("7")
    assert apply_stub(builtin_deposit(), "()", "()", 3, 5, "puk_a") == StubSuccess("()")


def test_ill_typed_inputs() -> None:
    with pytest.raises(StoredValueError):
        apply_stub(AUCTION, "()", OPEN, 0, 1, "puk_a")
    with pytest.raises(StoredValueError):
        apply_stub(builtin_identity(), "7", "true", 0, 0, "puk_a")


def test_registry() -> None:
    assert set(REGISTRY) == {"auction", "identity", "deposit"}
    assert lookup("missing") is None
    assert lookup("auction").code == AUCTION  # type: ignore[union-attr]
    with pytest.raises(KeyError):
        apply_stub(CodeRef("missing", None, None), "()", "()", 0, 0, "puk_a")
