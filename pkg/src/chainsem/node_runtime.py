"""
Local nodes (:mod:`~chainsem.node_runtime`)
===========================================

Node-level transitions: pure evaluation of a program, injection or rejection
of blockchain operations, queries against the chain and downcasts that
consult it.

A program step never mutates anything; it returns the new node and chain.
"""

from __future__ import annotations

import enum
import logging
from dataclasses import dataclass, field, replace
from typing import TYPE_CHECKING, Any, Union

from . import expr_lang as el
from .chain_state import (
    ModelFault,
    OriginateOp,
    StatusKind,
    TransferOp,
    chk_arg,
    chk_bal,
    chk_count,
    chk_fee,
    chk_init,
    chk_prg,
    chk_puh,
    enforce_pool_cap,
    gen_contract_hash,
    inject,
)
from .codec import parse_stored, serialize_value, show_expr
from .contract_stubs import StubFailWith, apply_stub
from .core_types import (
    OPH_NO_NO,
    TContract,
    TOph,
    TPair,
    TPuh,
    TPuk,
    TStatus,
    TTz,
    Ty,
    render,
)
from .docstrings import docfiller
from .type_checker import CodeTypeError, type_code

if TYPE_CHECKING:
    from collections.abc import Iterable

    from ._typing import JSONDict
    from .chain_state import Blockchain, Operation


__all__ = [
    "BLOCKED",
    "Account",
    "Injected",
    "Node",
    "NodeStep",
    "Raised",
    "Rejection",
    "StepKind",
    "classify_program",
    "perform_downcast",
    "query",
    "step_program",
    "try_inject_originate",
    "try_inject_transfer",
]

logger = logging.getLogger(__name__)

ErrorKind = el.ErrorKind


# * Nodes ---------------------------------------------------------------------
@dataclass(frozen=True)
class Account:
    """Key pair ``<pak, puk>``.  The private key is an opaque label."""

    pak: str
    puk: str

    @classmethod
    def named(cls, name: str) -> Account:
        """
        Account with keys derived from ``name``.

        >>> Account.named("alice")
        Account(pak='pak_alice', puk='puk_alice')
        """
        return cls(f"pak_{name}", f"puk_{name}")


@dataclass(frozen=True)
class Node:
    """Local node ``[programs, accounts]``."""

    programs: tuple[el.Expr, ...] = ()
    accounts: frozenset[Account] = field(default_factory=frozenset)

    @property
    def puks(self) -> frozenset[str]:
        return frozenset(a.puk for a in self.accounts)

    def with_program(self, index: int, e: el.Expr) -> Node:
        programs = list(self.programs)
        programs[index] = e
        return replace(self, programs=tuple(programs))

    def is_done(self) -> bool:
        return all(isinstance(p, el.UnitLit) for p in self.programs)


# * Outcomes ------------------------------------------------------------------
class _Blocked(enum.Enum):
    BLOCKED = "blocked"


BLOCKED = _Blocked.BLOCKED
"""Query outcome of a program that must wait for a block transition."""


@dataclass(frozen=True)
class Raised:
    """Query or cast outcome raising ``error`` in the program."""

    error: el.Expr


@dataclass(frozen=True)
class Injected:
    node: Node
    chain: Blockchain
    oph: str
    expired: tuple[str, ...] = ()


@dataclass(frozen=True)
class Rejection:
    """
    Failed injection.

    ``error`` is the raised value (an error constant or ``failwith``) and
    ``premise`` the name of the first failing check.
    """

    node: Node
    error: el.Expr
    premise: str


InjectOutcome = Union[Injected, Rejection]


def _err(kind: ErrorKind) -> el.Expr:
    return el.ErrorLit(kind)


def _address(v: el.Expr) -> str | None:
    if isinstance(v, el.PukLit):
        return v.puk
    if isinstance(v, el.PuhLit):
        return v.puh
    return None


def _redex(node: Node, index: int) -> tuple[el.EvalContext, el.Redex]:
    d = el.decompose(node.programs[index])
    if isinstance(d, el._Marker):
        msg = f"program {index} is a value"
        raise ModelFault(msg)
    return d


def _operation_redex(
    node: Node, index: int, cls: type[el.Transfer] | type[el.Originate]
) -> tuple[el.EvalContext, Any]:
    ctx, redex = _redex(node, index)
    if not isinstance(redex, el.BlockchainOp) or not isinstance(redex.expr, cls):
        msg = f"program {index} is not at a {cls.__name__.lower()}"
        raise ModelFault(msg)
    return ctx, redex.expr


def _tokens(v: el.Expr, what: str) -> int:
    if not isinstance(v, el.TzLit):
        msg = f"{what} is not a token amount: {v}"
        raise ModelFault(msg)
    return v.value


# * Injection -----------------------------------------------------------------
def _transfer_op(e: el.Transfer) -> TransferOp:
    target = _address(e.target)
    if not isinstance(e.sender, el.PukLit) or target is None:
        msg = f"ill-formed transfer {e}"
        raise ModelFault(msg)
    param = "()" if isinstance(e.target, el.PukLit) else serialize_value(e.param)
    return TransferOp(
        _tokens(e.amount, "amount"), e.sender.puk, target, param, _tokens(e.fee, "fee")
    )


def _transfer_failure(
    node: Node, chain: Blockchain, op: TransferOp
) -> tuple[el.Expr, str] | None:
    m, c = chain.managers, chain.contractors
    is_contract = op.target.startswith("puh_")
    if op.puk not in node.puks:
        return _err(ErrorKind.ERR_K), "account"
    if not chk_bal(m, op.puk, op.nt, op.fee):
        return _err(ErrorKind.ERR_B), "chk_bal"
    if is_contract and chk_puh(c, op.target) and not chk_arg(c, op.target, op.param):
        return _err(ErrorKind.ERR_A), "chk_arg"
    if not chk_count(m, op.puk):
        return _err(ErrorKind.ERR_C), "chk_count"
    if is_contract and not chk_puh(c, op.target):
        return _err(ErrorKind.ERR_H), "chk_puh"
    if not is_contract and op.target not in m:
        return _err(ErrorKind.ERR_K), "target"
    if not chk_fee(op.fee):
        return _err(ErrorKind.ERR_F), "chk_fee"
    if is_contract:
        contract = c[op.target]
        outcome = apply_stub(
            contract.code, op.param, contract.storage, contract.bal, op.nt, op.puk
        )
        if isinstance(outcome, StubFailWith):
            return el.FailWith(el.StrLit(outcome.message)), "dry_run"
    return None


def _originate_op(e: el.Originate) -> OriginateOp:
    if not isinstance(e.sender, el.PukLit) or not isinstance(e.code, el.CodeLit):
        msg = f"ill-formed origination {e}"
        raise ModelFault(msg)
    return OriginateOp(
        _tokens(e.amount, "amount"),
        e.sender.puk,
        e.code.code,
        serialize_value(e.init),
        _tokens(e.fee, "fee"),
    )


def _originate_failure(
    node: Node, chain: Blockchain, op: OriginateOp
) -> tuple[el.Expr, str] | None:
    m = chain.managers
    if op.puk not in node.puks:
        return _err(ErrorKind.ERR_K), "account"
    if not chk_bal(m, op.puk, op.nt, op.fee):
        return _err(ErrorKind.ERR_B), "chk_bal"
    if not chk_count(m, op.puk):
        return _err(ErrorKind.ERR_C), "chk_count"
    if not chk_prg(op.code):
        return _err(ErrorKind.ERR_P), "chk_prg"
    if not chk_fee(op.fee):
        return _err(ErrorKind.ERR_F), "chk_fee"
    if not chk_init(op.code, op.init):
        return _err(ErrorKind.ERR_I), "chk_init"
    return None


def _oph_type(op: Operation) -> Ty | None:
    if isinstance(op, TransferOp):
        return OPH_NO_NO
    if op.code.param_ty is None or op.code.storage_ty is None:
        return None
    return TOph(op.code.param_ty, op.code.storage_ty)


def _finish_inject(
    node: Node,
    chain: Blockchain,
    index: int,
    ctx: el.EvalContext,
    op: Operation,
    failure: tuple[el.Expr, str] | None,
) -> InjectOutcome:
    if failure is not None:
        error, premise = failure
        logger.info("reject %s from %s: %s (%s)", op.kind, op.puk, show_expr(error), premise)
        program = el.plug(ctx, el.Raise(error, _oph_type(op)))
        return Rejection(node.with_program(index, program), error, premise)
    chain, oph = inject(chain, op)
    chain, expired = enforce_pool_cap(chain)
    logger.debug("inject %s %s from %s", op.kind, oph, op.puk)
    return Injected(node.with_program(index, el.plug(ctx, el.OphLit(oph))), chain, oph, expired)


@docfiller.decorate
def try_inject_transfer(node: Node, chain: Blockchain, index: int) -> InjectOutcome:
    """
    Inject the transfer at the redex of program ``index``, or reject it.

    Premises are checked in order: sender account on the node, balance,
    argument type for a contract target, counter, target existence, fee, and
    finally a dry run of the contract.  The first failure decides the raised
    error.

    Parameters
    ----------
    {node}
    {chain}
    index : int
        Program index on ``node``.

    Returns
    -------
    Injected or Rejection
        On rejection the chain is unchanged.
    """
    ctx, e = _operation_redex(node, index, el.Transfer)
    op = _transfer_op(e)
    return _finish_inject(node, chain, index, ctx, op, _transfer_failure(node, chain, op))


def try_inject_originate(node: Node, chain: Blockchain, index: int) -> InjectOutcome:
    """Origination counterpart of :func:`try_inject_transfer` (``errP``, ``errI``)."""
    ctx, e = _operation_redex(node, index, el.Originate)
    op = _originate_op(e)
    return _finish_inject(node, chain, index, ctx, op, _originate_failure(node, chain, op))


# * Queries -------------------------------------------------------------------
QueryOutcome = Union[el.Expr, Raised, _Blocked]


def query(chain: Blockchain, kind: el.QueryKind, arg: el.Expr) -> QueryOutcome:
    """
    Answer a query against ``chain``.

    Returns the resulting value, a :class:`Raised` error, or :data:`BLOCKED`
    for ``get_contract`` on a pending origination.  Reads only see committed
    state.

    >>> from chainsem.chain_state import Blockchain, ManagerEntry
    >>> b = Blockchain(managers={"puk_a": ManagerEntry(42)})
    >>> query(b, el.QueryKind.GET_BALANCE, el.PukLit("puk_a"))
    TzLit(value=42)
    >>> query(b, el.QueryKind.GET_BALANCE, el.PukLit("puk_z"))
    Raised(error=ErrorLit(kind=<ErrorKind.ERR_K: 'errK'>))
    """
    if kind == el.QueryKind.GET_BALANCE:
        if isinstance(arg, el.PukLit):
            m = chain.managers.get(arg.puk)
            return Raised(_err(ErrorKind.ERR_K)) if m is None else el.TzLit(m.bal)
        if isinstance(arg, el.PuhLit):
            c = chain.contractors.get(arg.puh)
            return Raised(_err(ErrorKind.ERR_H)) if c is None else el.TzLit(c.bal)

    elif kind == el.QueryKind.GET_STORAGE:
        if isinstance(arg, el.PuhLit):
            c = chain.contractors.get(arg.puh)
            if c is None:
                return Raised(_err(ErrorKind.ERR_H))
            return parse_stored(c.storage, type_code(c.code).second)

    elif isinstance(arg, el.OphLit):
        entry = chain.pool.get(arg.oph)
        if entry is None:
            msg = f"unknown operation hash {arg.oph}"
            raise ModelFault(msg)
        if kind == el.QueryKind.GET_STATUS:
            return entry.status.to_expr()
        if not isinstance(entry.op, OriginateOp):
            msg = f"get_contract on transfer {arg.oph}"
            raise ModelFault(msg)
        if entry.status.kind == StatusKind.INCLUDED:
            return el.PuhLit(gen_contract_hash(entry.op.code, entry.status.time or 0))
        if entry.status.kind == StatusKind.TIMEOUT:
            return Raised(_err(ErrorKind.ERR_H))
        return BLOCKED

    msg = f"{kind.value} applied to {show_expr(arg)}"
    raise ModelFault(msg)


# * Casts ---------------------------------------------------------------------
def perform_downcast(
    chain: Blockchain, v: el.Expr, from_ty: Ty, to_ty: Ty
) -> el.Expr | Raised:
    """
    Runtime check of a downcast.

    ``Puh => Contract p s`` succeeds if the contract exists and its code types
    at ``Pair p s`` (``errP`` otherwise).  ``Addr => Puh`` and ``Addr => Puk``
    succeed on a registered address of that kind (``errH`` and ``errK``
    otherwise).
    """
    match to_ty:
        case TContract(p, s):
            if isinstance(v, el.PuhLit) and (c := chain.contractors.get(v.puh)):
                try:
                    if type_code(c.code) == TPair(p, s):
                        return v
                except CodeTypeError:
                    pass
            return Raised(_err(ErrorKind.ERR_P))
        case TPuh():
            if isinstance(v, el.PuhLit) and v.puh in chain.contractors:
                return v
            return Raised(_err(ErrorKind.ERR_H))
        case TPuk():
            if isinstance(v, el.PukLit) and v.puk in chain.managers:
                return v
            return Raised(_err(ErrorKind.ERR_K))
    msg = f"no downcast {render(from_ty)} => {render(to_ty)}"
    raise ModelFault(msg)


# * Program steps -------------------------------------------------------------
class StepKind(str, enum.Enum):
    EVAL = "node_eval"
    INJECT = "node_inject"
    REJECT = "node_reject"
    QUERY = "query"
    CAST = "cast"


@dataclass(frozen=True)
class NodeStep:
    """
    Result of one program step.

    ``result`` holds a value returned into the program with its expected type,
    for canonical-form checks.
    """

    kind: StepKind
    node: Node
    chain: Blockchain
    payload: JSONDict = field(default_factory=dict)
    result: tuple[el.Expr, Ty] | None = None


def _inject_failure(
    node: Node, chain: Blockchain, redex: el.BlockchainOp
) -> tuple[el.Expr, str] | None:
    e = redex.expr
    if isinstance(e, el.Transfer):
        return _transfer_failure(node, chain, _transfer_op(e))
    return _originate_failure(node, chain, _originate_op(e))


def classify_program(node: Node, chain: Blockchain, index: int) -> StepKind | None:
    """
    Kind of the step program ``index`` can take, or ``None``.

    ``None`` is returned for values, programs blocked on a pending origination
    and stuck programs.
    """
    d = el.decompose(node.programs[index])
    if isinstance(d, el._Marker):
        return None
    _, redex = d
    match redex:
        case el.PureRedex():
            return StepKind.EVAL
        case el.BlockchainOp():
            return StepKind.REJECT if _inject_failure(node, chain, redex) else StepKind.INJECT
        case el.QueryRedex(kind, arg):
            return None if query(chain, kind, arg) is BLOCKED else StepKind.QUERY
        case el.DowncastCheck():
            return StepKind.CAST
    return None


def stuck_redex(node: Node, index: int) -> el.Stuck | None:
    """The stuck redex of program ``index``, if any."""
    d = el.decompose(node.programs[index])
    if isinstance(d, el._Marker):
        return None
    return d[1] if isinstance(d[1], el.Stuck) else None


def _step_eval(node: Node, chain: Blockchain, index: int) -> NodeStep:
    program = node.programs[index]
    try:
        nxt = el.step_pure(program)
    except el.UncaughtException as e:
        logger.info("program %s terminated by uncaught %s", index, show_expr(e.error))
        return NodeStep(
            StepKind.EVAL,
            node.with_program(index, el.UnitLit()),
            chain,
            {"uncaught": show_expr(e.error)},
        )
    except el.RuntimeFault as e:
        logger.info("program %s terminated by fault: %s", index, e)
        return NodeStep(
            StepKind.EVAL, node.with_program(index, el.UnitLit()), chain, {"fault": str(e)}
        )
    if isinstance(nxt, el._Marker):
        msg = f"program {index} has no pure step"
        raise ModelFault(msg)
    return NodeStep(StepKind.EVAL, node.with_program(index, nxt), chain)


def _step_inject(node: Node, chain: Blockchain, index: int) -> NodeStep:
    _, redex = _redex(node, index)
    assert isinstance(redex, el.BlockchainOp)  # noqa: S101
    if isinstance(redex.expr, el.Transfer):
        outcome = try_inject_transfer(node, chain, index)
        oph_ty: Ty | None = OPH_NO_NO
    else:
        outcome = try_inject_originate(node, chain, index)
        oph_ty = _oph_type(_originate_op(redex.expr))
    if isinstance(outcome, Rejection):
        return NodeStep(
            StepKind.REJECT,
            outcome.node,
            chain,
            {"raised": show_expr(outcome.error), "premise": outcome.premise},
        )
    payload: JSONDict = {"oph": outcome.oph}
    if outcome.expired:
        payload["expired"] = list(outcome.expired)
    result = None if oph_ty is None else (el.OphLit(outcome.oph), oph_ty)
    return NodeStep(StepKind.INJECT, outcome.node, outcome.chain, payload, result)


def _query_type(chain: Blockchain, kind: el.QueryKind, arg: el.Expr) -> Ty | None:
    """Type of the answer to a query on ``arg``, if the chain determines it."""
    if kind == el.QueryKind.GET_BALANCE:
        return TTz()
    if kind == el.QueryKind.GET_STATUS:
        return TStatus()
    try:
        if kind == el.QueryKind.GET_STORAGE and isinstance(arg, el.PuhLit):
            return type_code(chain.contractors[arg.puh].code).second
        if isinstance(arg, el.OphLit):
            op = chain.pool[arg.oph].op
            if isinstance(op, OriginateOp):
                pair = type_code(op.code)
                return TContract(pair.first, pair.second)
    except (KeyError, CodeTypeError):
        pass
    return None


def _step_query(node: Node, chain: Blockchain, index: int) -> NodeStep:
    ctx, redex = _redex(node, index)
    assert isinstance(redex, el.QueryRedex)  # noqa: S101
    out = query(chain, redex.kind, redex.arg)
    if out is BLOCKED:
        msg = f"program {index} is blocked"
        raise ModelFault(msg)
    ty = _query_type(chain, redex.kind, redex.arg)
    payload: JSONDict = {"query": redex.kind.value, "arg": show_expr(redex.arg)}
    if isinstance(out, Raised):
        payload["raised"] = show_expr(out.error)
        program = el.plug(ctx, el.Raise(out.error, ty))
        return NodeStep(StepKind.QUERY, node.with_program(index, program), chain, payload)
    assert isinstance(out, el.Expr)  # noqa: S101
    payload["result"] = show_expr(out)
    return NodeStep(
        StepKind.QUERY,
        node.with_program(index, el.plug(ctx, out)),
        chain,
        payload,
        None if ty is None else (out, ty),
    )


def _step_cast(node: Node, chain: Blockchain, index: int) -> NodeStep:
    ctx, redex = _redex(node, index)
    assert isinstance(redex, el.DowncastCheck)  # noqa: S101
    out = perform_downcast(chain, redex.value, redex.from_ty, redex.to_ty)
    payload: JSONDict = {"cast": f"{render(redex.from_ty)} => {render(redex.to_ty)}"}
    if isinstance(out, Raised):
        payload["raised"] = show_expr(out.error)
        program = el.plug(ctx, el.Raise(out.error, redex.to_ty))
        return NodeStep(StepKind.CAST, node.with_program(index, program), chain, payload)
    return NodeStep(
        StepKind.CAST,
        node.with_program(index, el.plug(ctx, out)),
        chain,
        payload,
        (out, redex.to_ty),
    )


@docfiller.decorate
def step_program(node: Node, chain: Blockchain, index: int) -> NodeStep:
    """
    Advance program ``index`` of ``node`` by one node-level transition.

    Parameters
    ----------
    {node}
    {chain}
    index : int
        Program index on ``node``.

    Returns
    -------
    NodeStep

    Raises
    ------
    ModelFault
        If the program cannot step (value, blocked or stuck).
    """
    kind = classify_program(node, chain, index)
    if kind is None:
        msg = f"program {index} cannot step"
        raise ModelFault(msg)
    if kind == StepKind.EVAL:
        return _step_eval(node, chain, index)
    if kind in {StepKind.INJECT, StepKind.REJECT}:
        return _step_inject(node, chain, index)
    if kind == StepKind.QUERY:
        return _step_query(node, chain, index)
    return _step_cast(node, chain, index)


def literal_handles(programs: Iterable[el.Expr]) -> tuple[set[str], set[str], set[str]]:
    """Operation hashes, public keys and public hashes occurring in ``programs``."""
    ophs: set[str] = set()
    puks: set[str] = set()
    puhs: set[str] = set()
    for program in programs:
        for sub in el.iter_subexprs(program):
            if isinstance(sub, el.OphLit):
                ophs.add(sub.oph)
            elif isinstance(sub, el.PukLit):
                puks.add(sub.puk)
            elif isinstance(sub, el.PuhLit):
                puhs.add(sub.puh)
    return ophs, puks, puhs
