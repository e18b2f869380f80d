"""
Blockchain state (:mod:`~chainsem.chain_state`)
===============================================

The global state ``[pool, managers, contractors, time]`` with the check and
update helpers used by node and block transitions.

All values are immutable; every update returns a new :class:`Blockchain`.

>>> b = Blockchain(managers={"puk_a": ManagerEntry(100, Counter(3, True))})
>>> upd_succ(b.managers, "puk_a", 60, 40)["puk_a"]
ManagerEntry(bal=0, cnt=Counter(n=4, flag=False))
"""

from __future__ import annotations

import enum
import logging
from dataclasses import dataclass, field, replace
from functools import lru_cache
from typing import TYPE_CHECKING, Union

from . import expr_lang as el
from .codec import StoredValueError, parse_stored
from .contract_stubs import Refund, StubFailWith, apply_stub
from .core_types import CodeRef
from .docstrings import docfiller
from .options import OPTIONS
from .utils import digest

if TYPE_CHECKING:
    from collections.abc import Iterable, Iterator, Mapping

    from ._typing import Contractors, JSONDict, Managers, Pool
    from .core_types import TPair


__all__ = [
    "Blockchain",
    "BlockReport",
    "ContractFailure",
    "ContractorEntry",
    "Counter",
    "ManagerEntry",
    "ModelFault",
    "OriginateOp",
    "PoolEntry",
    "Status",
    "StatusKind",
    "TransferOp",
    "TransitionError",
    "block_accept",
    "block_bake",
    "block_originate_accept",
    "block_timeout",
    "chain_from_json",
    "chain_to_json",
    "chk_arg",
    "chk_bal",
    "chk_count",
    "chk_fee",
    "chk_init",
    "chk_prg",
    "chk_puh",
    "gen_contract_hash",
    "gen_op_hash",
    "upd_constr",
    "upd_count",
    "upd_succ",
    "well_formed",
]

logger = logging.getLogger(__name__)


class ModelFault(RuntimeError):
    """Precondition of a helper violated; unreachable from guarded transitions."""


class ContractFailure(Exception):  # noqa: N818
    """Contract run ended in ``failwith``."""

    def __init__(self, puh: str, message: str) -> None:
        super().__init__(f"contract {puh} failed with {message!r}")
        self.puh = puh
        self.message = message


class TransitionError(ValueError):
    """Block transition applied while its premises do not hold."""


# * State ---------------------------------------------------------------------
@dataclass(frozen=True)
class Counter:
    """Serialization counter ``(n, flag)``; the flag marks an operation in flight."""

    n: int = 0
    flag: bool = False


@dataclass(frozen=True)
class ManagerEntry:
    bal: int
    cnt: Counter = field(default_factory=Counter)


@dataclass(frozen=True)
class ContractorEntry:
    code: CodeRef
    t: int
    bal: int
    storage: str


@dataclass(frozen=True)
class TransferOp:
    """Transfer to an implicit account, or invocation of a contract."""

    nt: int
    puk: str
    target: str
    param: str
    fee: int

    kind = "transfer"


@dataclass(frozen=True)
class OriginateOp:
    nt: int
    puk: str
    code: CodeRef
    init: str
    fee: int

    kind = "originate"


Operation = Union[TransferOp, OriginateOp]


class StatusKind(str, enum.Enum):
    PENDING = "pending"
    INCLUDED = "included"
    TIMEOUT = "timeout"


@dataclass(frozen=True)
class Status:
    kind: StatusKind
    time: int | None = None

    @classmethod
    def pending(cls) -> Status:
        return cls(StatusKind.PENDING)

    @classmethod
    def included(cls, t: int) -> Status:
        return cls(StatusKind.INCLUDED, t)

    @classmethod
    def timeout(cls) -> Status:
        return cls(StatusKind.TIMEOUT)

    @property
    def is_pending(self) -> bool:
        return self.kind == StatusKind.PENDING

    def to_expr(self) -> el.Expr:
        """Status as a value of the calculus."""
        if self.kind == StatusKind.INCLUDED:
            return el.Included(el.IntLit(self.time or 0))
        return el.Pending() if self.is_pending else el.TimeoutE()

    def __str__(self) -> str:
        if self.kind == StatusKind.INCLUDED:
            return f"included({self.time})"
        return str(self.kind.value)


@dataclass(frozen=True)
class PoolEntry:
    """
    Pool entry ``<op, t, status>``.

    ``seq`` is the insertion index of the entry, fed to :func:`gen_op_hash` so
    that re-injecting an identical operation at the same time gets a fresh hash.
    """

    op: Operation
    t: int
    status: Status
    seq: int = 0


@dataclass(frozen=True)
class Blockchain:
    """Global state ``[pool, managers, contractors, time]``."""

    pool: Pool = field(default_factory=dict)
    managers: Managers = field(default_factory=dict)
    contractors: Contractors = field(default_factory=dict)
    time: int = 0

    def pending(self) -> Iterator[tuple[str, PoolEntry]]:
        """Pending pool entries in insertion order."""
        for oph, entry in self.pool.items():
            if entry.status.is_pending:
                yield oph, entry

    def set(
        self,
        pool: Pool | None = None,
        managers: Managers | None = None,
        contractors: Contractors | None = None,
        time: int | None = None,
    ) -> Blockchain:
        return Blockchain(
            pool=self.pool if pool is None else pool,
            managers=self.managers if managers is None else managers,
            contractors=self.contractors if contractors is None else contractors,
            time=self.time if time is None else time,
        )


@dataclass(frozen=True)
class BlockReport:
    """
    Result of a block transition.

    ``credits`` maps each implicit account to the tokens it received during the
    step.  ``divergence`` is the acceptance-time ``FAILWITH`` message when a
    contract call that passed its dry run failed once accepted.
    """

    chain: Blockchain
    credits: Mapping[str, int] = field(default_factory=dict)
    divergence: str | None = None
    refund: Refund | None = None


# * JSON ----------------------------------------------------------------------
def op_to_json(op: Operation) -> JSONDict:
    if isinstance(op, TransferOp):
        return {
            "kind": op.kind,
            "nt": op.nt,
            "puk": op.puk,
            "target": op.target,
            "param": op.param,
            "fee": op.fee,
        }
    return {
        "kind": op.kind,
        "nt": op.nt,
        "puk": op.puk,
        "code": op.code.to_json(),
        "init": op.init,
        "fee": op.fee,
    }


def op_from_json(data: JSONDict) -> Operation:
    if data["kind"] == "transfer":
        return TransferOp(
            data["nt"], data["puk"], data["target"], data["param"], data["fee"]
        )
    return OriginateOp(
        data["nt"],
        data["puk"],
        CodeRef.from_json(data["code"]),
        data["init"],
        data["fee"],
    )


def chain_to_json(b: Blockchain) -> JSONDict:
    """JSON snapshot of ``b``; pool and contractors keep insertion order."""
    return {
        "time": b.time,
        "pool": {
            oph: {
                "op": op_to_json(e.op),
                "t": e.t,
                "status": str(e.status),
                "seq": e.seq,
            }
            for oph, e in b.pool.items()
        },
        "managers": {
            puk: {"bal": m.bal, "n": m.cnt.n, "flag": m.cnt.flag}
            for puk, m in b.managers.items()
        },
        "contractors": {
            puh: {
                "code": c.code.to_json(),
                "t": c.t,
                "bal": c.bal,
                "storage": c.storage,
            }
            for puh, c in b.contractors.items()
        },
    }


def _status_from_str(s: str) -> Status:
    if s.startswith("included(") and s.endswith(")"):
        return Status.included(int(s[len("included(") : -1]))
    return Status(StatusKind(s))


def chain_from_json(data: JSONDict) -> Blockchain:
    return Blockchain(
        pool={
            oph: PoolEntry(
                op_from_json(e["op"]), e["t"], _status_from_str(e["status"]), e["seq"]
            )
            for oph, e in data["pool"].items()
        },
        managers={
            puk: ManagerEntry(m["bal"], Counter(m["n"], m["flag"]))
            for puk, m in data["managers"].items()
        },
        contractors={
            puh: ContractorEntry(
                CodeRef.from_json(c["code"]), c["t"], c["bal"], c["storage"]
            )
            for puh, c in data["contractors"].items()
        },
        time=data["time"],
    )


# * Hashes --------------------------------------------------------------------
HASH_SIZE = 10


@lru_cache(maxsize=4096)
def gen_op_hash(op: Operation, t: int, seq: int = 0) -> str:
    """
    Operation hash of ``op`` injected at time ``t``.

    >>> op = TransferOp(5, "puk_a", "puk_b", "()", 1)
    >>> gen_op_hash(op, 3) == gen_op_hash(op, 3)
    True
    >>> gen_op_hash(op, 3) == gen_op_hash(op, 4)
    False
    """
    return "oph_" + digest({"op": op_to_json(op), "t": t, "seq": seq}, HASH_SIZE)


@lru_cache(maxsize=1024)
def gen_contract_hash(code: CodeRef, t: int) -> str:
    """Public hash of a contract with ``code`` accepted at time ``t``."""
    return "puh_" + digest({"code": code.to_json(), "t": t}, HASH_SIZE)


# * Checks --------------------------------------------------------------------
def _code_types(code: CodeRef) -> TPair:
    from .type_checker import type_code

    return type_code(code)


@docfiller.decorate
def chk_bal(m: Managers, puk: str, nt: int, fee: int) -> bool:
    """
    True if ``puk`` is registered with a balance covering ``nt + fee``.

    Parameters
    ----------
    {managers}
    {puk}
    {nt}
    {fee}
    """
    entry = m.get(puk)
    return entry is not None and entry.bal >= nt + fee


def chk_count(m: Managers, puk: str) -> bool:
    """True if ``puk`` has no operation in flight."""
    entry = m.get(puk)
    return entry is not None and not entry.cnt.flag


def chk_puh(c: Contractors, puh: str) -> bool:
    return puh in c


def chk_arg(c: Contractors, puh: str, param: str) -> bool:
    """True if ``param`` parses at the parameter type of contract ``puh``."""
    entry = c.get(puh)
    if entry is None:
        return False
    try:
        parse_stored(param, _code_types(entry.code).first)
    except (StoredValueError, ValueError):
        return False
    return True


def chk_fee(fee: int, min_fee: int | None = None) -> bool:
    """Flat fee rule: ``fee >= min_fee`` (default ``OPTIONS["min_fee"]``)."""
    if min_fee is None:
        min_fee = OPTIONS["min_fee"]
    return fee >= min_fee


def chk_prg(code: CodeRef) -> bool:
    """True if ``code`` is a registered stub with consistent declared types."""
    from .type_checker import CodeTypeError

    try:
        _code_types(code)
    except CodeTypeError:
        return False
    return True


def chk_init(code: CodeRef, s: str) -> bool:
    """True if ``s`` parses at the storage type of ``code``."""
    if not chk_prg(code):
        return False
    try:
        parse_stored(s, _code_types(code).second)
    except StoredValueError:
        return False
    return True


# * Updates -------------------------------------------------------------------
def _manager(m: Managers, puk: str) -> ManagerEntry:
    entry = m.get(puk)
    if entry is None:
        msg = f"unknown manager {puk}"
        raise ModelFault(msg)
    return entry


def upd_count(m: Managers, puk: str, flag: bool) -> Managers:
    """Set the in-flight flag of ``puk``; balance and counter value are kept."""
    entry = _manager(m, puk)
    return {**m, puk: replace(entry, cnt=Counter(entry.cnt.n, flag))}


def upd_succ(m: Managers, puk: str, nt: int, fee: int) -> Managers:
    """
    Commit the in-flight operation of ``puk``.

    ``<bal, (n, True)>`` becomes ``<bal - nt - fee, (n + 1, False)>``.
    """
    entry = _manager(m, puk)
    if not entry.cnt.flag:
        msg = f"{puk} has no operation in flight"
        raise ModelFault(msg)
    if entry.bal < nt + fee:
        msg = f"{puk} balance {entry.bal} below {nt} + {fee}"
        raise ModelFault(msg)
    return {**m, puk: ManagerEntry(entry.bal - nt - fee, Counter(entry.cnt.n + 1, False))}


def credit(m: Managers, puk: str, amount: int) -> Managers:
    """Add ``amount`` to ``puk``, registering it if needed."""
    entry = m.get(puk, ManagerEntry(0))
    return {**m, puk: replace(entry, bal=entry.bal + amount)}


def _commit_success(
    c: Contractors, puh: str, nt: int, new_storage: str, refund: Refund | None
) -> Contractors:
    entry = c[puh]
    out = entry.bal + nt - (refund.amount if refund else 0)
    if out < 0:
        msg = f"contract {puh} refunds more than it holds"
        raise ModelFault(msg)
    return {**c, puh: replace(entry, bal=out, storage=new_storage)}


def upd_constr(
    c: Contractors, puh: str, nt: int, param: str, *, sender: str
) -> tuple[Contractors, Refund | None]:
    """
    Run contract ``puh`` on ``param`` and commit its storage and balance.

    Returns the updated contractors and the refund emitted by the contract, to
    be credited by the caller.

    Raises
    ------
    ContractFailure
        If the contract fails; ``c`` is left as it was.
    ModelFault
        If the contract is unknown.
    """
    entry = c.get(puh)
    if entry is None:
        msg = f"unknown contract {puh}"
        raise ModelFault(msg)
    outcome = apply_stub(entry.code, param, entry.storage, entry.bal, nt, sender)
    if isinstance(outcome, StubFailWith):
        raise ContractFailure(puh, outcome.message)
    return _commit_success(c, puh, nt, outcome.new_storage, outcome.refund), outcome.refund


def _credit_address(
    managers: Managers,
    contractors: Contractors,
    target: str,
    amount: int,
    credits: dict[str, int],
) -> tuple[Managers, Contractors]:
    if target in contractors:
        entry = contractors[target]
        return managers, {**contractors, target: replace(entry, bal=entry.bal + amount)}
    credits[target] = credits.get(target, 0) + amount
    return credit(managers, target, amount), contractors


# * Pool ----------------------------------------------------------------------
def inject(b: Blockchain, op: Operation) -> tuple[Blockchain, str]:
    """Add ``op`` as pending and raise the sender's flag."""
    seq = len(b.pool)
    oph = gen_op_hash(op, b.time, seq)
    pool = {**b.pool, oph: PoolEntry(op, b.time, Status.pending(), seq)}
    return b.set(pool=pool, managers=upd_count(b.managers, op.puk, True)), oph


def _expire(b: Blockchain, oph: str) -> Blockchain:
    entry = b.pool[oph]
    pool = {**b.pool, oph: replace(entry, status=Status.timeout())}
    return b.set(pool=pool, managers=upd_count(b.managers, entry.op.puk, False))


def enforce_pool_cap(
    b: Blockchain, cap: int | None = None
) -> tuple[Blockchain, tuple[str, ...]]:
    """
    Time out the oldest pending entries while more than ``cap`` are pending.

    ``cap`` defaults to ``OPTIONS["pool_cap"]``; ``None`` means unbounded.
    """
    if cap is None:
        cap = OPTIONS["pool_cap"]
    if cap is None:
        return b, ()
    pending = [oph for oph, _ in b.pending()]
    expired = tuple(pending[: max(0, len(pending) - cap)])
    for oph in expired:
        logger.info("pool cap %s reached, timing out %s", cap, oph)
        b = _expire(b, oph)
    return b, expired


# * Block transitions ---------------------------------------------------------
def _pending_entry(b: Blockchain, oph: str) -> PoolEntry:
    entry = b.pool.get(oph)
    if entry is None or not entry.status.is_pending:
        msg = f"{oph} is not pending"
        raise TransitionError(msg)
    return entry


def _check_window(b: Blockchain, oph: str, entry: PoolEntry) -> None:
    if b.time - entry.t > OPTIONS["acceptance_window"]:
        msg = f"{oph} injected at {entry.t} is outside the acceptance window at {b.time}"
        raise TransitionError(msg)


def _included(b: Blockchain, oph: str, entry: PoolEntry) -> Pool:
    return {**b.pool, oph: replace(entry, status=Status.included(b.time))}


def block_accept_report(b: Blockchain, oph: str) -> BlockReport:
    """:func:`block_accept` with credits, refund and divergence."""
    entry = _pending_entry(b, oph)
    op = entry.op
    if not isinstance(op, TransferOp):
        msg = f"{oph} is an origination"
        raise TransitionError(msg)
    _check_window(b, oph, entry)

    credits: dict[str, int] = {}
    managers, contractors = b.managers, b.contractors
    divergence: str | None = None
    refund: Refund | None = None

    if op.target in contractors:
        try:
            contractors, refund = upd_constr(
                contractors, op.target, op.nt, op.param, sender=op.puk
            )
        except ContractFailure as e:
            # included, fee charged, contract untouched
            divergence = e.message
            managers = upd_succ(managers, op.puk, 0, op.fee)
            logger.info("divergence on %s: %r", oph, divergence)
        else:
            managers = upd_succ(managers, op.puk, op.nt, op.fee)
            if refund is not None:
                managers, contractors = _credit_address(
                    managers, contractors, refund.target, refund.amount, credits
                )
    else:
        managers = upd_succ(managers, op.puk, op.nt, op.fee)
        managers, contractors = _credit_address(
            managers, contractors, op.target, op.nt, credits
        )

    logger.debug("accept %s at %s", oph, b.time)
    chain = b.set(
        pool=_included(b, oph, entry),
        managers=managers,
        contractors=contractors,
        time=b.time + 1,
    )
    return BlockReport(chain, credits, divergence, refund)


@docfiller.decorate
def block_accept(b: Blockchain, oph: str) -> Blockchain:
    """
    Include pending transfer ``oph``.

    Parameters
    ----------
    {chain}
    {oph}

    Returns
    -------
    Blockchain
        Status ``included(b.time)``, sender charged with :func:`upd_succ`,
        target credited or contract updated, time advanced by one.

    Raises
    ------
    TransitionError
        If ``oph`` is not a pending transfer within the acceptance window.
    """
    return block_accept_report(b, oph).chain


def block_originate_accept_report(b: Blockchain, oph: str) -> BlockReport:
    entry = _pending_entry(b, oph)
    op = entry.op
    if not isinstance(op, OriginateOp):
        msg = f"{oph} is not an origination"
        raise TransitionError(msg)
    _check_window(b, oph, entry)

    puh = gen_contract_hash(op.code, b.time)
    if puh in b.contractors:
        msg = f"contract {puh} already exists"
        raise ModelFault(msg)
    logger.debug("originate %s as %s at %s", oph, puh, b.time)
    chain = b.set(
        pool=_included(b, oph, entry),
        managers=upd_succ(b.managers, op.puk, op.nt, op.fee),
        contractors={
            **b.contractors,
            puh: ContractorEntry(op.code, b.time, op.nt, op.init),
        },
        time=b.time + 1,
    )
    return BlockReport(chain)


def block_originate_accept(b: Blockchain, oph: str) -> Blockchain:
    """Include pending origination ``oph``, creating its contract."""
    return block_originate_accept_report(b, oph).chain


def block_timeout(b: Blockchain, oph: str) -> Blockchain:
    """
    Time out pending ``oph`` once the acceptance window has passed.

    Only the status and the sender's flag change.
    """
    entry = _pending_entry(b, oph)
    if b.time - entry.t <= OPTIONS["acceptance_window"]:
        msg = f"{oph} injected at {entry.t} is still acceptable at {b.time}"
        raise TransitionError(msg)
    logger.info("timeout %s (injected at %s, now %s)", oph, entry.t, b.time)
    return _expire(b, oph)


def block_bake(b: Blockchain) -> Blockchain:
    """Empty block: advance time by one while some operation is pending."""
    if not any(True for _ in b.pending()):
        msg = "empty block with nothing pending"
        raise TransitionError(msg)
    return b.set(time=b.time + 1)


# * Well formedness -----------------------------------------------------------
@docfiller.decorate
def well_formed_errors(
    b: Blockchain, accounts: Iterable[Iterable[str]] | None = None
) -> list[str]:
    """
    Diagnostics for a malformed chain, empty when well formed.

    Parameters
    ----------
    {chain}
    accounts : iterable of iterable of str, optional
        Public keys held by each local node.  When given, node accounts must be
        pairwise disjoint and registered.
    """
    out: list[str] = []
    for oph, e in b.pool.items():
        if oph != gen_op_hash(e.op, e.t, e.seq):
            out.append(f"pool key {oph} does not match its operation")
        if e.status.kind == StatusKind.INCLUDED and not (
            e.t <= (e.status.time or 0) < b.time
        ):
            out.append(f"{oph} included at {e.status.time}, injected at {e.t}")
        if e.op.nt < 0 or e.op.fee < 0:
            out.append(f"{oph} has a negative amount or fee")
    for puk, m in b.managers.items():
        if m.bal < 0:
            out.append(f"manager {puk} has negative balance")
    for puh, c in b.contractors.items():
        if puh != gen_contract_hash(c.code, c.t):
            out.append(f"contract key {puh} does not match its code and time")
        if c.bal < 0:
            out.append(f"contract {puh} has negative balance")
    if accounts is not None:
        seen: set[str] = set()
        for i, node_accounts in enumerate(accounts):
            for puk in node_accounts:
                if puk in seen:
                    out.append(f"account {puk} held by more than one node")
                seen.add(puk)
                if puk not in b.managers:
                    out.append(f"account {puk} of node {i} is not registered")
    return out


def well_formed(b: Blockchain, accounts: Iterable[Iterable[str]] | None = None) -> bool:
    """
    Pool and contract hash equations, inclusion times, and node accounts.

    >>> well_formed(Blockchain())
    True
    """
    return not well_formed_errors(b, accounts)
