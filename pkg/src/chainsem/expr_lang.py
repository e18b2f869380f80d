"""
Expression calculus (:mod:`~chainsem.expr_lang`)
================================================

Terms, values and patterns of the call-by-value language run by local nodes,
together with the decomposition of a term into an evaluation context and a
redex, and the pure reduction step.

Evaluation is left to right.  Blockchain operations, queries and downcasts are
never reduced here: :func:`decompose` classifies them so that
:mod:`chainsem.node_runtime` can intercept them.

>>> e = App(Lam("x", TInt(), Add(Var("x"), IntLit(1))), IntLit(2))
>>> evaluate(e)
IntLit(value=3)
"""

from __future__ import annotations

import enum
import logging
from dataclasses import dataclass, fields, replace
from typing import TYPE_CHECKING, ClassVar, Union

from .core_types import (
    CastKind,
    CodeRef,
    TInt,
    TTz,
    Ty,
    cast_allowed,
)
from .options import OPTIONS

if TYPE_CHECKING:
    from collections.abc import Iterator, Mapping

    from ._typing_compat import TypeAlias


__all__ = [
    "ALREADY_VALUE",
    "NO_MATCH",
    "NO_PURE_STEP",
    "Add",
    "And",
    "App",
    "BlockchainOp",
    "BoolLit",
    "Cast",
    "CodeLit",
    "Cons",
    "DowncastCheck",
    "Eq",
    "ErrorKind",
    "ErrorLit",
    "EvalContext",
    "Expr",
    "FailWith",
    "Fix",
    "Frame",
    "Included",
    "IntLit",
    "Lam",
    "Left",
    "Lt",
    "Match",
    "MatchArm",
    "Nil",
    "NoneE",
    "Not",
    "OphLit",
    "Or",
    "Originate",
    "PCons",
    "PConst",
    "PError",
    "PFailWith",
    "PIncluded",
    "PLeft",
    "PNil",
    "PNone",
    "PPair",
    "PPending",
    "PRight",
    "PSome",
    "PTimeout",
    "PVar",
    "PWild",
    "PairE",
    "Pattern",
    "Pending",
    "PukLit",
    "PuhLit",
    "PureRedex",
    "Query",
    "QueryKind",
    "QueryRedex",
    "Raise",
    "Redex",
    "Right",
    "RuntimeFault",
    "SomeE",
    "StrLit",
    "Stuck",
    "TimeoutE",
    "Transfer",
    "Try",
    "TzLit",
    "UncaughtException",
    "UnitLit",
    "Var",
    "decompose",
    "evaluate",
    "erase_annotations",
    "free_vars",
    "is_value",
    "iter_subexprs",
    "match_pattern",
    "pattern_vars",
    "plug",
    "step_pure",
    "substitute",
    "value_eq",
]

logger = logging.getLogger(__name__)


# * Errors --------------------------------------------------------------------
class UncaughtException(Exception):  # noqa: N818
    """A raised error value reached the top of a program."""

    def __init__(self, error: Expr) -> None:
        self.error = error
        super().__init__(f"uncaught exception {error}")


class RuntimeFault(RuntimeError):
    """Runtime failure outside the error set: overflow, match failure, stuck term."""


class _Marker(enum.Enum):
    ALREADY_VALUE = "already_value"
    NO_PURE_STEP = "no_pure_step"
    NO_MATCH = "no_match"


ALREADY_VALUE = _Marker.ALREADY_VALUE
"""Result of :func:`decompose` on a value."""
NO_PURE_STEP = _Marker.NO_PURE_STEP
"""Result of :func:`step_pure` when no ``⇝`` step applies."""
NO_MATCH = _Marker.NO_MATCH
"""Result of :func:`match_pattern` on disagreeing shapes."""


class ErrorKind(str, enum.Enum):
    """Error constants raised by rejected operations and failed casts."""

    ERR_P = "errP"
    ERR_B = "errB"
    ERR_C = "errC"
    ERR_F = "errF"
    ERR_K = "errK"
    ERR_H = "errH"
    ERR_A = "errA"
    ERR_I = "errI"


class QueryKind(str, enum.Enum):
    GET_BALANCE = "get_balance"
    GET_STATUS = "get_status"
    GET_STORAGE = "get_storage"
    GET_CONTRACT = "get_contract"


# * Expressions ---------------------------------------------------------------
@dataclass(frozen=True)
class Expr:
    """Base class of expressions."""

    #: Subterm fields evaluated left to right before the node itself reduces.
    eval_fields: ClassVar[tuple[str, ...]] = ()

    def __str__(self) -> str:
        from .codec import show_expr

        return show_expr(self)


# literals
@dataclass(frozen=True)
class IntLit(Expr):
    value: int


@dataclass(frozen=True)
class TzLit(Expr):
    """Token amount."""

    value: int


@dataclass(frozen=True)
class StrLit(Expr):
    value: str


@dataclass(frozen=True)
class BoolLit(Expr):
    value: bool


@dataclass(frozen=True)
class UnitLit(Expr):
    pass


@dataclass(frozen=True)
class OphLit(Expr):
    oph: str


@dataclass(frozen=True)
class PuhLit(Expr):
    puh: str


@dataclass(frozen=True)
class PukLit(Expr):
    puk: str


@dataclass(frozen=True)
class CodeLit(Expr):
    code: CodeRef


# status values
@dataclass(frozen=True)
class Pending(Expr):
    pass


@dataclass(frozen=True)
class Included(Expr):
    time: Expr

    eval_fields: ClassVar[tuple[str, ...]] = ("time",)


@dataclass(frozen=True)
class TimeoutE(Expr):
    pass


# error values
@dataclass(frozen=True)
class ErrorLit(Expr):
    kind: ErrorKind


@dataclass(frozen=True)
class FailWith(Expr):
    """Contract abort carrying a message, a value of type ``Exception``."""

    message: Expr

    eval_fields: ClassVar[tuple[str, ...]] = ("message",)


# core
@dataclass(frozen=True)
class Var(Expr):
    name: str


@dataclass(frozen=True)
class Lam(Expr):
    """``fun (param : param_ty) -> body``, with an optional result type ``ret``."""

    param: str
    param_ty: Ty
    body: Expr
    ret: Ty | None = None


@dataclass(frozen=True)
class Fix(Expr):
    """Fixpoint ``fix f``; a value once ``f`` is."""

    fn: Expr

    eval_fields: ClassVar[tuple[str, ...]] = ("fn",)


@dataclass(frozen=True)
class App(Expr):
    fn: Expr
    arg: Expr

    eval_fields: ClassVar[tuple[str, ...]] = ("fn", "arg")


@dataclass(frozen=True)
class _BinOp(Expr):
    left: Expr
    right: Expr

    eval_fields: ClassVar[tuple[str, ...]] = ("left", "right")


@dataclass(frozen=True)
class Add(_BinOp):
    pass


@dataclass(frozen=True)
class Lt(_BinOp):
    pass


@dataclass(frozen=True)
class Eq(_BinOp):
    pass


@dataclass(frozen=True)
class And(_BinOp):
    pass


@dataclass(frozen=True)
class Or(_BinOp):
    pass


@dataclass(frozen=True)
class Not(Expr):
    operand: Expr

    eval_fields: ClassVar[tuple[str, ...]] = ("operand",)


# data
@dataclass(frozen=True)
class PairE(Expr):
    fst: Expr
    snd: Expr

    eval_fields: ClassVar[tuple[str, ...]] = ("fst", "snd")


@dataclass(frozen=True)
class Nil(Expr):
    """Empty list, optionally annotated with its ``List`` type."""

    ty: Ty | None = None


@dataclass(frozen=True)
class Cons(Expr):
    head: Expr
    tail: Expr

    eval_fields: ClassVar[tuple[str, ...]] = ("head", "tail")


@dataclass(frozen=True)
class Left(Expr):
    """Left injection, optionally annotated with its ``Sum`` type."""

    value: Expr
    ty: Ty | None = None

    eval_fields: ClassVar[tuple[str, ...]] = ("value",)


@dataclass(frozen=True)
class Right(Expr):
    value: Expr
    ty: Ty | None = None

    eval_fields: ClassVar[tuple[str, ...]] = ("value",)


@dataclass(frozen=True)
class SomeE(Expr):
    value: Expr

    eval_fields: ClassVar[tuple[str, ...]] = ("value",)


@dataclass(frozen=True)
class NoneE(Expr):
    ty: Ty | None = None


# control
@dataclass(frozen=True)
class MatchArm:
    pattern: Pattern
    body: Expr


@dataclass(frozen=True)
class Match(Expr):
    scrutinee: Expr
    arms: tuple[MatchArm, ...]

    eval_fields: ClassVar[tuple[str, ...]] = ("scrutinee",)


@dataclass(frozen=True)
class Raise(Expr):
    """``raise exc``, optionally annotated with the type it stands for."""

    exc: Expr
    ty: Ty | None = None

    eval_fields: ClassVar[tuple[str, ...]] = ("exc",)


@dataclass(frozen=True)
class Try(Expr):
    """``try body except handler``; the handler is applied to the raised value."""

    body: Expr
    handler: Expr

    eval_fields: ClassVar[tuple[str, ...]] = ("body",)


@dataclass(frozen=True)
class Cast(Expr):
    expr: Expr
    from_ty: Ty
    to_ty: Ty

    eval_fields: ClassVar[tuple[str, ...]] = ("expr",)


@dataclass(frozen=True)
class Query(Expr):
    kind: QueryKind
    arg: Expr

    eval_fields: ClassVar[tuple[str, ...]] = ("arg",)


# blockchain operations
@dataclass(frozen=True)
class Transfer(Expr):
    amount: Expr
    sender: Expr
    target: Expr
    param: Expr
    fee: Expr

    eval_fields: ClassVar[tuple[str, ...]] = (
        "amount",
        "sender",
        "target",
        "param",
        "fee",
    )


@dataclass(frozen=True)
class Originate(Expr):
    amount: Expr
    sender: Expr
    code: Expr
    init: Expr
    fee: Expr

    eval_fields: ClassVar[tuple[str, ...]] = ("amount", "sender", "code", "init", "fee")


# * Patterns ------------------------------------------------------------------
@dataclass(frozen=True)
class Pattern:
    """Base class of match patterns."""


@dataclass(frozen=True)
class PVar(Pattern):
    name: str


@dataclass(frozen=True)
class PWild(Pattern):
    pass


@dataclass(frozen=True)
class PConst(Pattern):
    """Literal pattern (int, token amount, string, bool, unit)."""

    value: Expr


@dataclass(frozen=True)
class PPair(Pattern):
    fst: Pattern
    snd: Pattern


@dataclass(frozen=True)
class PNil(Pattern):
    pass


@dataclass(frozen=True)
class PCons(Pattern):
    head: Pattern
    tail: Pattern


@dataclass(frozen=True)
class PLeft(Pattern):
    inner: Pattern


@dataclass(frozen=True)
class PRight(Pattern):
    inner: Pattern


@dataclass(frozen=True)
class PSome(Pattern):
    inner: Pattern


@dataclass(frozen=True)
class PNone(Pattern):
    pass


@dataclass(frozen=True)
class PPending(Pattern):
    pass


@dataclass(frozen=True)
class PIncluded(Pattern):
    inner: Pattern


@dataclass(frozen=True)
class PTimeout(Pattern):
    pass


@dataclass(frozen=True)
class PError(Pattern):
    kind: ErrorKind


@dataclass(frozen=True)
class PFailWith(Pattern):
    inner: Pattern


Bindings: TypeAlias = "dict[str, Expr]"


# * Values --------------------------------------------------------------------
_CONSTANTS = (
    IntLit,
    TzLit,
    StrLit,
    BoolLit,
    UnitLit,
    OphLit,
    PuhLit,
    PukLit,
    CodeLit,
    Pending,
    TimeoutE,
    ErrorLit,
    Lam,
    Nil,
    NoneE,
)


def is_value(e: Expr) -> bool:
    """
    True if ``e`` is a value.

    >>> is_value(PairE(IntLit(1), Nil()))
    True
    >>> is_value(Add(IntLit(1), IntLit(2)))
    False
    """
    if isinstance(e, _CONSTANTS):
        return True
    match e:
        case Included(IntLit()) | FailWith(StrLit()):
            return True
        case Fix(fn) | Left(fn) | Right(fn) | SomeE(fn):
            return is_value(fn)
        case PairE(a, b) | Cons(a, b):
            return is_value(a) and is_value(b)
    return False


def erase_annotations(v: Expr) -> Expr:
    """Drop type annotations from a value, for structural comparison."""
    match v:
        case Nil():
            return Nil()
        case NoneE():
            return NoneE()
        case Left(x):
            return Left(erase_annotations(x))
        case Right(x):
            return Right(erase_annotations(x))
        case SomeE(x):
            return SomeE(erase_annotations(x))
        case PairE(a, b):
            return PairE(erase_annotations(a), erase_annotations(b))
        case Cons(a, b):
            return Cons(erase_annotations(a), erase_annotations(b))
    return v


def value_eq(lhs: Expr, rhs: Expr) -> bool:
    """Structural equality of first-order values."""
    return erase_annotations(lhs) == erase_annotations(rhs)


# * Generic traversal ---------------------------------------------------------
def _expr_fields(e: Expr) -> Iterator[tuple[str, Expr]]:
    for f in fields(e):
        x = getattr(e, f.name)
        if isinstance(x, Expr):
            yield f.name, x


def iter_subexprs(e: Expr) -> Iterator[Expr]:
    """Pre-order traversal over ``e`` and all its subterms, match arms included."""
    yield e
    for _, x in _expr_fields(e):
        yield from iter_subexprs(x)
    if isinstance(e, Match):
        for arm in e.arms:
            yield from iter_subexprs(arm.body)


def pattern_vars(p: Pattern) -> list[str]:
    """Variables bound by ``p``, in left-to-right order (duplicates kept)."""
    match p:
        case PVar(name):
            return [name]
        case PPair(a, b) | PCons(a, b):
            return pattern_vars(a) + pattern_vars(b)
        case PLeft(q) | PRight(q) | PSome(q) | PIncluded(q) | PFailWith(q):
            return pattern_vars(q)
    return []


def free_vars(e: Expr) -> frozenset[str]:
    """
    Free variables of ``e``.

    >>> sorted(free_vars(Lam("x", TInt(), Add(Var("x"), Var("y")))))
    ['y']
    """
    match e:
        case Var(name):
            return frozenset((name,))
        case Lam(param, _, body):
            return free_vars(body) - {param}
        case Match(scrutinee, arms):
            out = free_vars(scrutinee)
            for arm in arms:
                out |= free_vars(arm.body) - set(pattern_vars(arm.pattern))
            return out
    out = frozenset[str]()
    for _, x in _expr_fields(e):
        out |= free_vars(x)
    return out


def _fresh(base: str, avoid: frozenset[str] | set[str]) -> str:
    i = 1
    while f"{base}_{i}" in avoid:
        i += 1
    return f"{base}_{i}"


def _rename_pattern(p: Pattern, mapping: Mapping[str, str]) -> Pattern:
    match p:
        case PVar(name):
            return PVar(mapping.get(name, name))
        case PPair(a, b):
            return PPair(_rename_pattern(a, mapping), _rename_pattern(b, mapping))
        case PCons(a, b):
            return PCons(_rename_pattern(a, mapping), _rename_pattern(b, mapping))
        case PLeft(q) | PRight(q) | PSome(q) | PIncluded(q) | PFailWith(q):
            return replace(p, inner=_rename_pattern(q, mapping))  # type: ignore[call-arg]
    return p


def substitute(e: Expr, x: str, v: Expr) -> Expr:
    """
    Capture-avoiding substitution ``e[v/x]``.

    Binders whose name occurs free in ``v`` are renamed first.

    >>> substitute(Lam("y", TInt(), Var("x")), "x", IntLit(5))
    Lam(param='y', param_ty=TInt(), body=IntLit(value=5), ret=None)
    >>> substitute(Lam("x", TInt(), Var("x")), "x", IntLit(5))
    Lam(param='x', param_ty=TInt(), body=Var(name='x'), ret=None)
    """
    match e:
        case Var(name):
            return v if name == x else e
        case Lam(param, _, body):
            if param == x:
                return e
            fv = free_vars(v)
            if param in fv:
                new = _fresh(param, fv | free_vars(body) | {x})
                body = substitute(body, param, Var(new))
                param = new
            return replace(e, param=param, body=substitute(body, x, v))
        case Match(scrutinee, arms):
            return Match(
                substitute(scrutinee, x, v),
                tuple(_substitute_arm(arm, x, v) for arm in arms),
            )
    updates = {name: substitute(sub, x, v) for name, sub in _expr_fields(e)}
    return replace(e, **updates) if updates else e


def _substitute_arm(arm: MatchArm, x: str, v: Expr) -> MatchArm:
    bound = pattern_vars(arm.pattern)
    if x in bound:
        return arm
    fv = free_vars(v)
    pattern, body = arm.pattern, arm.body
    if clash := [name for name in bound if name in fv]:
        avoid = set(fv) | set(free_vars(body)) | set(bound) | {x}
        mapping: dict[str, str] = {}
        for name in clash:
            mapping[name] = _fresh(name, avoid)
            avoid.add(mapping[name])
            body = substitute(body, name, Var(mapping[name]))
        pattern = _rename_pattern(pattern, mapping)
    return MatchArm(pattern, substitute(body, x, v))


# * Pattern matching ----------------------------------------------------------
def match_pattern(p: Pattern, v: Expr) -> Bindings | _Marker:
    """
    Match value ``v`` against ``p``.

    Returns the bindings of the pattern variables, or :data:`NO_MATCH`.

    >>> match_pattern(PCons(PVar("x"), PVar("y")), Cons(IntLit(1), Nil()))
    {'x': IntLit(value=1), 'y': Nil(ty=None)}
    >>> match_pattern(PPending(), Included(IntLit(3)))
    <_Marker.NO_MATCH: 'no_match'>
    """
    out: Bindings = {}
    return out if _match_into(p, v, out) else NO_MATCH


def _match_into(p: Pattern, v: Expr, out: Bindings) -> bool:
    match p, v:
        case PVar(name), _:
            out[name] = v
            return True
        case PWild(), _:
            return True
        case PConst(c), _:
            return value_eq(c, v)
        case PPair(pa, pb), PairE(a, b):
            return _match_into(pa, a, out) and _match_into(pb, b, out)
        case PNil(), Nil():
            return True
        case PCons(ph, pt), Cons(h, t):
            return _match_into(ph, h, out) and _match_into(pt, t, out)
        case (PLeft(q), Left(x)) | (PRight(q), Right(x)) | (PSome(q), SomeE(x)):
            return _match_into(q, x, out)
        case PNone(), NoneE():
            return True
        case PPending(), Pending():
            return True
        case PTimeout(), TimeoutE():
            return True
        case PIncluded(q), Included(x):
            return _match_into(q, x, out)
        case PError(kind), ErrorLit(actual):
            return kind == actual
        case PFailWith(q), FailWith(x):
            return _match_into(q, x, out)
    return False


# * Evaluation contexts -------------------------------------------------------
@dataclass(frozen=True)
class Frame:
    """One layer of an evaluation context: ``node`` with a hole at ``field``."""

    node: Expr
    field: str


EvalContext: TypeAlias = "tuple[Frame, ...]"
"""Evaluation context, outermost frame first; ``()`` is the empty context."""


def plug(ctx: EvalContext, e: Expr) -> Expr:
    """Fill the hole of ``ctx`` with ``e``."""
    for frame in reversed(ctx):
        e = replace(frame.node, **{frame.field: e})
    return e


# * Redexes -------------------------------------------------------------------
@dataclass(frozen=True)
class PureRedex:
    expr: Expr


@dataclass(frozen=True)
class BlockchainOp:
    """Transfer or origination with all arguments evaluated."""

    expr: Transfer | Originate


@dataclass(frozen=True)
class QueryRedex:
    kind: QueryKind
    arg: Expr


@dataclass(frozen=True)
class DowncastCheck:
    value: Expr
    from_ty: Ty
    to_ty: Ty


@dataclass(frozen=True)
class Stuck:
    expr: Expr
    reason: str


Redex = Union[PureRedex, BlockchainOp, QueryRedex, DowncastCheck, Stuck]


def _int_bounds(ty: Ty) -> tuple[int, int]:
    bits = OPTIONS["int_bits"]
    hi = 2 ** (bits - 1) - 1
    return (0, hi) if isinstance(ty, TTz) else (-hi - 1, hi)


def _is_number(e: Expr) -> bool:
    return isinstance(e, (IntLit, TzLit))


def _classify(e: Expr) -> Redex:
    # all eval_fields of ``e`` are values here
    match e:
        case Var(name):
            return Stuck(e, f"free variable {name!r}")
        case App(Lam() | Fix(), _):
            return PureRedex(e)
        case App():
            return Stuck(e, "application of a non-function")
        case Add(a, b) | Lt(a, b) if (
            _is_number(a) and type(a) is type(b)
        ):
            return PureRedex(e)
        case Eq(a, b) if not isinstance(a, (Lam, Fix)) and not isinstance(
            b, (Lam, Fix)
        ):
            return PureRedex(e)
        case And(BoolLit(), BoolLit()) | Or(BoolLit(), BoolLit()) | Not(BoolLit()):
            return PureRedex(e)
        case Match() | Raise() | Try():
            return PureRedex(e)
        case Cast(v, from_ty, to_ty):
            kind = cast_allowed(from_ty, to_ty)
            if kind == CastKind.UPCAST:
                return PureRedex(e)
            if kind == CastKind.DOWNCAST:
                return DowncastCheck(v, from_ty, to_ty)
            return Stuck(e, f"forbidden cast {from_ty} => {to_ty}")
        case Query(kind, arg):
            return QueryRedex(kind, arg)
        case Transfer() | Originate():
            return BlockchainOp(e)
    return Stuck(e, f"no rule for {type(e).__name__}")


def decompose(e: Expr) -> tuple[EvalContext, Redex] | _Marker:
    """
    Split ``e`` into its evaluation context and innermost redex.

    Returns :data:`ALREADY_VALUE` when ``e`` is a value.

    >>> ctx, redex = decompose(Add(IntLit(1), Add(IntLit(2), IntLit(3))))
    >>> [f.field for f in ctx], redex
    (['right'], PureRedex(expr=Add(left=IntLit(value=2), right=IntLit(value=3))))
    """
    if is_value(e):
        return ALREADY_VALUE
    frames: list[Frame] = []
    cur = e
    while True:
        for name in cur.eval_fields:
            sub = getattr(cur, name)
            if not is_value(sub):
                frames.append(Frame(cur, name))
                cur = sub
                break
        else:
            return tuple(frames), _classify(cur)


# * Pure reduction ------------------------------------------------------------
def _arith(e: _BinOp) -> Expr:
    a, b = e.left, e.right
    if not isinstance(a, (IntLit, TzLit)) or not isinstance(b, (IntLit, TzLit)):
        msg = f"arithmetic on non-numbers: {e}"
        raise RuntimeFault(msg)
    if isinstance(e, Lt):
        return BoolLit(a.value < b.value)
    value = a.value + b.value
    lo, hi = _int_bounds(TTz() if isinstance(a, TzLit) else TInt())
    if not lo <= value <= hi:
        msg = f"integer overflow: {a.value} + {b.value}"
        raise RuntimeFault(msg)
    return type(a)(value)


def _reduce(ctx: EvalContext, redex: Expr) -> Expr:
    match redex:
        case App(Lam(param, _, body), arg):
            return plug(ctx, substitute(body, param, arg))
        case App(Fix(fn) as fixed, arg):
            return plug(ctx, App(App(fn, fixed), arg))
        case Add() | Lt():
            return plug(ctx, _arith(redex))
        case Eq(a, b):
            return plug(ctx, BoolLit(value_eq(a, b)))
        case And(BoolLit(a), BoolLit(b)):
            return plug(ctx, BoolLit(a and b))
        case Or(BoolLit(a), BoolLit(b)):
            return plug(ctx, BoolLit(a or b))
        case Not(BoolLit(a)):
            return plug(ctx, BoolLit(not a))
        case Match(v, arms):
            for arm in arms:
                bindings = match_pattern(arm.pattern, v)
                if bindings is not NO_MATCH:
                    body = arm.body
                    for name, x in bindings.items():  # type: ignore[union-attr]
                        body = substitute(body, name, x)
                    return plug(ctx, body)
            msg = f"no match arm accepts {v}"
            raise RuntimeFault(msg)
        case Try(v, _):
            return plug(ctx, v)
        case Cast(v, _, _):
            return plug(ctx, v)
        case Raise(v):
            for i in range(len(ctx) - 1, -1, -1):
                frame = ctx[i]
                if isinstance(frame.node, Try):
                    return plug(ctx[:i], App(frame.node.handler, v))
            logger.debug("uncaught %s", v)
            raise UncaughtException(v)
    msg = f"not a pure redex: {type(redex).__name__}"
    raise RuntimeFault(msg)


def step_pure(e: Expr) -> Expr | _Marker:
    """
    Perform one pure reduction step ``e ⇝ e'``.

    Returns :data:`NO_PURE_STEP` if ``e`` is a value or its redex is a
    blockchain operation, a query, a downcast or stuck.

    Raises
    ------
    UncaughtException
        If a raised value propagates past every handler.
    RuntimeFault
        On arithmetic overflow or when no match arm applies.

    Examples
    --------
    >>> e = Try(Add(IntLit(1), Raise(ErrorLit(ErrorKind.ERR_B))), Lam("x", TInt(), IntLit(0)))
    >>> e = step_pure(e)
    >>> e
    App(fn=Lam(param='x', param_ty=TInt(), body=IntLit(value=0), ret=None), arg=ErrorLit(kind=<ErrorKind.ERR_B: 'errB'>))
    >>> step_pure(e)
    IntLit(value=0)
    """
    d = decompose(e)
    if isinstance(d, _Marker):
        return NO_PURE_STEP
    ctx, redex = d
    if not isinstance(redex, PureRedex):
        return NO_PURE_STEP
    return _reduce(ctx, redex.expr)


def evaluate(e: Expr, max_steps: int = 10_000) -> Expr:
    """
    Reduce a chain-free expression to a value.

    Raises
    ------
    RuntimeFault
        If the term needs the chain, is stuck, or exceeds ``max_steps``.
    """
    for _ in range(max_steps):
        if is_value(e):
            return e
        nxt = step_pure(e)
        if nxt is NO_PURE_STEP:
            msg = f"cannot reduce without a chain: {e}"
            raise RuntimeFault(msg)
        e = nxt  # type: ignore[assignment]
    msg = f"no value after {max_steps} steps"
    raise RuntimeFault(msg)

