"""
Expression builders (:mod:`~chainsem.dsl`)
==========================================

Sugar over the core calculus.  Every builder returns a plain
:class:`~chainsem.expr_lang.Expr`; nothing here adds evaluation rules.

>>> from chainsem.expr_lang import evaluate
>>> evaluate(let_("x", TInt(), el.IntLit(2), el.Add(el.Var("x"), el.Var("x"))))
IntLit(value=4)
>>> evaluate(min_(el.TzLit(7), el.TzLit(3)))
TzLit(value=3)
"""

from __future__ import annotations

from typing import TYPE_CHECKING

from . import expr_lang as el
from .core_types import (
    OPH_NO_NO,
    TAddr,
    TArrow,
    TContract,
    TException,
    TInt,
    TPuh,
    TStatus,
    TTz,
    TUnit,
    Ty,
)

if TYPE_CHECKING:
    from collections.abc import Sequence


__all__ = [
    "as_address",
    "await_status",
    "catch_all",
    "contract_handle",
    "fix",
    "if_",
    "ignore",
    "lam",
    "let_",
    "match",
    "match_error",
    "min_",
    "rec",
    "seq",
    "sleep",
]


def lam(param: str, param_ty: Ty, body: el.Expr, ret: Ty | None = None) -> el.Lam:
    """Function, with its result type when ``ret`` is given."""
    return el.Lam(param, param_ty, body, ret)


def let_(name: str, ty: Ty, value: el.Expr, body: el.Expr) -> el.Expr:
    """``let name : ty = value in body`` as an immediate application."""
    return el.App(el.Lam(name, ty, body), value)


def seq(*exprs: el.Expr, ty: Ty | None = None) -> el.Expr:
    """
    Evaluate ``exprs`` in order, keeping the last value.

    Discarded values have type ``ty`` (``Unit`` by default).

    >>> from chainsem.expr_lang import evaluate
    >>> evaluate(seq(el.UnitLit(), el.IntLit(1)))
    IntLit(value=1)
    """
    if not exprs:
        msg = "seq needs at least one expression"
        raise ValueError(msg)
    discard = TUnit() if ty is None else ty
    out = exprs[-1]
    for e in reversed(exprs[:-1]):
        out = let_("_", discard, e, out)
    return out


def ignore(e: el.Expr, ty: Ty) -> el.Expr:
    """Evaluate ``e`` of type ``ty`` for its effect and return ``()``."""
    return let_("_", ty, e, el.UnitLit())


def match(scrutinee: el.Expr, *arms: tuple[el.Pattern, el.Expr]) -> el.Match:
    return el.Match(scrutinee, tuple(el.MatchArm(p, body) for p, body in arms))


def if_(cond: el.Expr, then: el.Expr, orelse: el.Expr) -> el.Match:
    """Conditional as a match on a boolean constant."""
    return match(cond, (el.PConst(el.BoolLit(True)), then), (el.PWild(), orelse))


def fix(fn: el.Expr) -> el.Fix:
    return el.Fix(fn)


def rec(name: str, param: str, param_ty: Ty, ret: Ty, body: el.Expr) -> el.Fix:
    """
    Recursive function ``name`` of type ``param_ty -> ret``.

    ``body`` may call itself through ``el.Var(name)``.

    >>> from chainsem.expr_lang import evaluate
    >>> count = rec(
    ...     "count",
    ...     "i",
    ...     TInt(),
    ...     TInt(),
    ...     if_(
    ...         el.Lt(el.Var("i"), el.IntLit(3)),
    ...         el.App(el.Var("count"), el.Add(el.Var("i"), el.IntLit(1))),
    ...         el.Var("i"),
    ...     ),
    ... )
    >>> evaluate(el.App(count, el.IntLit(0)))
    IntLit(value=3)
    """
    arrow = TArrow(param_ty, ret)
    return el.Fix(lam(name, arrow, lam(param, param_ty, body, ret), arrow))


def sleep(ticks: int) -> el.Expr:
    """
    Busy loop of ``ticks`` iterations returning ``()``.

    Logical time only advances with blocks, so waiting is expressed in
    program steps.
    """
    loop = rec(
        "_sleep",
        "_i",
        TInt(),
        TUnit(),
        if_(
            el.Lt(el.Var("_i"), el.IntLit(ticks)),
            el.App(el.Var("_sleep"), el.Add(el.Var("_i"), el.IntLit(1))),
            el.UnitLit(),
        ),
    )
    return el.App(loop, el.IntLit(0))


def min_(a: el.Expr, b: el.Expr, ty: Ty | None = None) -> el.Expr:
    """Smaller of ``a`` and ``b``, each evaluated once (``Tz`` by default)."""
    t = TTz() if ty is None else ty
    return let_(
        "_a",
        t,
        a,
        let_(
            "_b",
            t,
            b,
            if_(el.Lt(el.Var("_a"), el.Var("_b")), el.Var("_a"), el.Var("_b")),
        ),
    )


def contract_handle(puh: str, param_ty: Ty, storage_ty: Ty) -> el.Cast:
    """Typed handle: downcast of a public hash to ``Contract param_ty storage_ty``."""
    return el.Cast(el.PuhLit(puh), TPuh(), TContract(param_ty, storage_ty))


def as_address(e: el.Expr, ty: Ty) -> el.Expr:
    """Upcast ``e`` of type ``Contract``, ``Puh`` or ``Puk`` to ``Addr``."""
    if isinstance(ty, TContract):
        e, ty = el.Cast(e, ty, TPuh()), TPuh()
    return el.Cast(e, ty, TAddr())


def await_status(oph: el.Expr, ty: Ty = OPH_NO_NO) -> el.Expr:
    """Poll ``get_status`` until the operation ``oph`` of type ``ty`` leaves pending."""
    poll = rec(
        "_await",
        "_h",
        ty,
        TStatus(),
        match(
            el.Query(el.QueryKind.GET_STATUS, el.Var("_h")),
            (el.PPending(), el.App(el.Var("_await"), el.Var("_h"))),
            (el.PVar("_s"), el.Var("_s")),
        ),
    )
    return el.App(poll, oph)


def catch_all(body: el.Expr, handler_body: el.Expr, name: str = "_e") -> el.Try:
    """``try body except fun name -> handler_body``."""
    return el.Try(body, lam(name, TException(), handler_body))


def match_error(
    name: str, arms: Sequence[tuple[el.Pattern, el.Expr]], ty: Ty | None = None
) -> el.Match:
    """
    Handler body dispatching on the error bound to ``name``.

    Errors no arm accepts are raised again, annotated with ``ty``.
    """
    return match(
        el.Var(name),
        *arms,
        (el.PWild(), el.Raise(el.Var(name), ty)),
    )

