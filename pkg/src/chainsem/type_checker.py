"""
Type checking (:mod:`~chainsem.type_checker`)
=============================================

Bidirectional checking of expressions, plus the typing of stored values,
blockchains and whole configurations.

Terms whose type cannot be synthesized (unannotated ``raise``, ``nil``,
``none``, ``left`` and ``right``) take their type from the expected type.
Programs are checked against ``Unit``.

Checking against a type accepts every type :func:`~chainsem.core_types.subsumed`
by it, so handle values left behind by erased upcasts stay typed.  Where two
synthesized types meet (equality, list cells, match arms, handlers) their
:func:`~chainsem.core_types.join` is taken.  Narrowing still needs a cast.

>>> from chainsem import expr_lang as el
>>> type_of({}, el.Lam("x", TInt(), el.Add(el.Var("x"), el.IntLit(1))))
TArrow(first=TInt(), second=TInt())
"""

from __future__ import annotations

import logging
from dataclasses import dataclass, field
from functools import lru_cache
from typing import TYPE_CHECKING, Callable

from . import expr_lang as el
from .codec import StoredValueError, parse_stored
from .contract_stubs import lookup
from .core_types import (
    OPH_NO_NO,
    CastKind,
    CodeRef,
    TAddr,
    TArrow,
    TBool,
    TCode,
    TContract,
    TException,
    TInt,
    TList,
    TNo,
    TOph,
    TOption,
    TPair,
    TPuh,
    TPuk,
    TStatus,
    TString,
    TSum,
    TTz,
    TUnit,
    Ty,
    TyFormatError,
    cast_allowed,
    is_first_order,
    iter_types,
    join,
    render,
    subsumed,
    validate_ty,
)
from .docstrings import docfiller

if TYPE_CHECKING:
    from collections.abc import Iterable, Mapping

    from ._typing import ContractTyEnv, JSONDict, TyEnv
    from .chain_state import Blockchain
    from .scheduler import Config


__all__ = [
    "AmbientInfo",
    "CodeTypeError",
    "TypeCheckError",
    "canonical_form_ok",
    "check",
    "check_config",
    "derive_delta",
    "extend_delta",
    "program_type",
    "type_blockchain",
    "type_code",
    "type_config",
    "type_of",
    "type_program",
    "type_stored_value",
]

logger = logging.getLogger(__name__)


# * Errors --------------------------------------------------------------------
class TypeCheckError(TypeError):
    """
    Structured typing error.

    Attributes
    ----------
    rule : str
        Name of the typing rule that failed.
    path : tuple of str
        Field names leading from the checked term to the offending subterm.
    expected, actual : Ty, optional
    """

    def __init__(
        self,
        rule: str,
        message: str,
        path: tuple[str, ...] = (),
        expected: Ty | None = None,
        actual: Ty | None = None,
    ) -> None:
        self.rule = rule
        self.message = message
        self.path = path
        self.expected = expected
        self.actual = actual
        super().__init__(f"[{rule}] at /{'/'.join(path)}: {message}")

    def to_dict(self) -> JSONDict:
        return {
            "rule": self.rule,
            "message": self.message,
            "path": "/" + "/".join(self.path),
            "expected": None if self.expected is None else render(self.expected),
            "actual": None if self.actual is None else render(self.actual),
        }


class CodeTypeError(TypeError):
    """Malformed contract code: unknown stub or inconsistent declarations."""


# * Code ----------------------------------------------------------------------
@lru_cache(maxsize=256)
def type_code(code: CodeRef) -> TPair:
    """
    Declared ``Pair param storage`` of contract code.

    Raises
    ------
    CodeTypeError
        For unknown stubs, missing declarations, types without serialized
        values, or declarations that differ from the registered signature.

    Examples
    --------
    >>> from chainsem.contract_stubs import builtin_identity
    >>> type_code(builtin_identity())
    TPair(first=TInt(), second=TInt())
    """
    stub = lookup(code.stub_id)
    if stub is None:
        msg = f"unknown contract stub {code.stub_id!r}"
        raise CodeTypeError(msg)
    if code.param_ty is None or code.storage_ty is None:
        msg = f"stub {code.stub_id!r} lacks a parameter or storage declaration"
        raise CodeTypeError(msg)
    for t in (code.param_ty, code.storage_ty):
        try:
            validate_ty(t)
        except TyFormatError as e:
            raise CodeTypeError(str(e)) from e
        if not is_first_order(t):
            msg = f"declared type {render(t)} has no serialized values"
            raise CodeTypeError(msg)
    if (code.param_ty, code.storage_ty) != (stub.param_ty, stub.storage_ty):
        msg = (
            f"stub {code.stub_id!r} declared as ({render(code.param_ty)}, "
            f"{render(code.storage_ty)}) but implements ({render(stub.param_ty)}, "
            f"{render(stub.storage_ty)})"
        )
        raise CodeTypeError(msg)
    return TPair(code.param_ty, code.storage_ty)


def type_stored_value(s: str, t: Ty) -> bool:
    """
    True if serialized ``s`` is a value of type ``t``.

    >>> type_stored_value("()", TUnit()), type_stored_value("true", TInt())
    (True, False)
    """
    try:
        parse_stored(s, t)
    except StoredValueError:
        return False
    return True


# * Ambient information -------------------------------------------------------
def _lenient_code_typer(code: CodeRef) -> TPair:
    if code.param_ty is None or code.storage_ty is None:
        msg = f"code {code.stub_id!r} lacks declared types"
        raise CodeTypeError(msg)
    return TPair(code.param_ty, code.storage_ty)


@dataclass(frozen=True)
class AmbientInfo:
    """
    Chain-derived facts used to type runtime literals.

    Parameters
    ----------
    code_typer : callable
        Types code literals.  Defaults to the declared types.
    oph_types : mapping of str to TOph
        Type of each operation hash in the pool.
    delta : mapping of str to TPair
        Contract typing environment.
    """

    code_typer: Callable[[CodeRef], TPair] = _lenient_code_typer
    oph_types: Mapping[str, TOph] = field(default_factory=dict)
    delta: ContractTyEnv = field(default_factory=dict)

    @classmethod
    def from_chain(cls, chain: Blockchain, delta: ContractTyEnv | None = None) -> AmbientInfo:
        """Ambient information for ``chain``, with ``delta`` derived if not given."""
        from .chain_state import OriginateOp

        oph_types: dict[str, TOph] = {}
        for oph, entry in chain.pool.items():
            if isinstance(entry.op, OriginateOp):
                try:
                    pair = type_code(entry.op.code)
                except CodeTypeError:
                    continue
                oph_types[oph] = TOph(pair.first, pair.second)
            else:
                oph_types[oph] = OPH_NO_NO
        return cls(
            code_typer=type_code,
            oph_types=oph_types,
            delta=derive_delta(chain) if delta is None else delta,
        )


_DEFAULT_AMBIENT = AmbientInfo()


# * Checker -------------------------------------------------------------------
class _Checker:
    def __init__(self, ambient: AmbientInfo) -> None:
        self.ambient = ambient

    # helpers
    def fail(
        self,
        rule: str,
        message: str,
        path: tuple[str, ...],
        expected: Ty | None = None,
        actual: Ty | None = None,
    ) -> TypeCheckError:
        return TypeCheckError(rule, message, path, expected, actual)

    def code_types(self, code: CodeRef, path: tuple[str, ...]) -> TPair:
        try:
            return self.ambient.code_typer(code)
        except CodeTypeError as e:
            raise self.fail("T-Code", str(e), path) from e

    def contract_of(self, puh: str) -> TContract | None:
        pair = self.ambient.delta.get(puh)
        return None if pair is None else TContract(pair.first, pair.second)

    def declared(self, ty: Ty | None, cls: type, rule: str, path: tuple[str, ...]) -> Ty:
        if ty is None:
            msg = "needs a type annotation or an expected type"
            raise self.fail(rule, msg, path)
        if not isinstance(ty, cls):
            msg = f"annotation {render(ty)} is not a {cls.__name__[1:]} type"
            raise self.fail(rule, msg, path)
        return ty

    def bind_pattern(  # noqa: PLR0911
        self, p: el.Pattern, t: Ty, path: tuple[str, ...], out: dict[str, Ty]
    ) -> None:
        def mismatch(what: str) -> TypeCheckError:
            return self.fail("T-Pattern", f"{what} pattern against {render(t)}", path, actual=t)

        match p:
            case el.PVar(name):
                if name in out:
                    msg = f"variable {name!r} bound twice in pattern"
                    raise self.fail("T-Pattern", msg, path)
                out[name] = t
                return
            case el.PWild():
                return
            case el.PConst(v):
                if join(self.synth({}, v, path), t) is None:
                    raise mismatch("constant")
                return
            case el.PPair(a, b):
                if not isinstance(t, TPair):
                    raise mismatch("pair")
                self.bind_pattern(a, t.first, path, out)
                self.bind_pattern(b, t.second, path, out)
                return
            case el.PNil() | el.PCons():
                if not isinstance(t, TList):
                    raise mismatch("list")
                if isinstance(p, el.PCons):
                    self.bind_pattern(p.head, t.elem, path, out)
                    self.bind_pattern(p.tail, t, path, out)
                return
            case el.PLeft(q) | el.PRight(q):
                if not isinstance(t, TSum):
                    raise mismatch("sum")
                self.bind_pattern(q, t.first if isinstance(p, el.PLeft) else t.second, path, out)
                return
            case el.PSome() | el.PNone():
                if not isinstance(t, TOption):
                    raise mismatch("option")
                if isinstance(p, el.PSome):
                    self.bind_pattern(p.inner, t.elem, path, out)
                return
            case el.PPending() | el.PTimeout() | el.PIncluded():
                if not isinstance(t, TStatus):
                    raise mismatch("status")
                if isinstance(p, el.PIncluded):
                    self.bind_pattern(p.inner, TInt(), path, out)
                return
            case el.PError() | el.PFailWith():
                if not isinstance(t, TException):
                    raise mismatch("error")
                if isinstance(p, el.PFailWith):
                    self.bind_pattern(p.inner, TString(), path, out)
                return
        raise mismatch(type(p).__name__)

    def arm_env(
        self, env: TyEnv, arm: el.MatchArm, t: Ty, path: tuple[str, ...]
    ) -> dict[str, Ty]:
        bound: dict[str, Ty] = {}
        self.bind_pattern(arm.pattern, t, path, bound)
        return {**env, **bound}

    # synthesis
    def synth(self, env: TyEnv, e: el.Expr, path: tuple[str, ...]) -> Ty:  # noqa: PLR0911,PLR0912
        match e:
            case el.IntLit():
                return TInt()
            case el.TzLit(n):
                if n < 0:
                    raise self.fail("T-Tz", f"negative token amount {n}", path)
                return TTz()
            case el.StrLit():
                return TString()
            case el.BoolLit():
                return TBool()
            case el.UnitLit():
                return TUnit()
            case el.PukLit():
                return TPuk()
            case el.PuhLit(puh):
                return self.contract_of(puh) or TPuh()
            case el.OphLit(oph):
                t = self.ambient.oph_types.get(oph)
                if t is None:
                    raise self.fail("T-Oph", f"unknown operation hash {oph}", path)
                return t
            case el.CodeLit(code):
                pair = self.code_types(code, path)
                return TCode(pair.first, pair.second)
            case el.Pending() | el.TimeoutE():
                return TStatus()
            case el.Included(t):
                self.check(env, t, TInt(), (*path, "time"))
                return TStatus()
            case el.ErrorLit():
                return TException()
            case el.FailWith(m):
                self.check(env, m, TString(), (*path, "message"))
                return TException()
            case el.Var(name):
                if name not in env:
                    raise self.fail("T-Var", f"unbound variable {name!r}", path)
                return env[name]
            case el.Lam(param, ty, body, ret):
                self.valid(ty, path)
                if ret is None:
                    return TArrow(ty, self.synth({**env, param: ty}, body, (*path, "body")))
                self.valid(ret, path)
                self.check({**env, param: ty}, body, ret, (*path, "body"))
                return TArrow(ty, ret)
            case el.Fix(fn):
                ft = self.synth(env, fn, (*path, "fn"))
                match ft:
                    case TArrow(TArrow() as a, b) if subsumed(b, a):
                        return a
                raise self.fail(
                    "T-Fix", "fix expects a function from T to T with T an arrow", path, actual=ft
                )
            case el.App(fn, arg):
                ft = self.synth(env, fn, (*path, "fn"))
                if not isinstance(ft, TArrow):
                    raise self.fail("T-App", "application of a non-function", path, actual=ft)
                self.check(env, arg, ft.first, (*path, "arg"))
                return ft.second
            case el.Add(a, b) | el.Lt(a, b):
                ta = self.synth(env, a, (*path, "left"))
                if not isinstance(ta, (TInt, TTz)):
                    raise self.fail(
                        "T-Arith", "operands must be Int or Tz", (*path, "left"), actual=ta
                    )
                self.check(env, b, ta, (*path, "right"))
                return ta if isinstance(e, el.Add) else TBool()
            case el.Eq(a, b):
                ta = self.synth(env, a, (*path, "left"))
                if any(isinstance(x, (TArrow, TCode)) for x in iter_types(ta)):
                    raise self.fail(
                        "T-Eq", "equality on functions or code", path, actual=ta
                    )
                self.either_side(env, b, ta, (*path, "right"))
                return TBool()
            case el.And(a, b) | el.Or(a, b):
                self.check(env, a, TBool(), (*path, "left"))
                self.check(env, b, TBool(), (*path, "right"))
                return TBool()
            case el.Not(a):
                self.check(env, a, TBool(), (*path, "operand"))
                return TBool()
            case el.PairE(a, b):
                return TPair(
                    self.synth(env, a, (*path, "fst")), self.synth(env, b, (*path, "snd"))
                )
            case el.Nil(ty):
                out = self.declared(ty, TList, "T-Nil", path)
                self.valid(out, path)
                return out
            case el.NoneE(ty):
                out = self.declared(ty, TOption, "T-None", path)
                self.valid(out, path)
                return out
            case el.Left(_, ty) | el.Right(_, ty):
                out = self.declared(ty, TSum, "T-Inj", path)
                self.check(env, e, out, path)
                return out
            case el.Cons(h, t):
                th = self.synth(env, h, (*path, "head"))
                return self.either_side(env, t, TList(th), (*path, "tail"))
            case el.SomeE(x):
                return TOption(self.synth(env, x, (*path, "value")))
            case el.Match(s, arms):
                ts = self.synth(env, s, (*path, "scrutinee"))
                if not arms:
                    raise self.fail("T-Match", "match without arms", path)
                first_error: TypeCheckError | None = None
                result: Ty | None = None
                for i, arm in enumerate(arms):
                    arm_path = (*path, f"arms[{i}]")
                    arm_env = self.arm_env(env, arm, ts, arm_path)
                    try:
                        found = self.synth(arm_env, arm.body, (*arm_path, "body"))
                    except TypeCheckError as err:
                        first_error = first_error or err
                        continue
                    joined = found if result is None else join(result, found)
                    if joined is None:
                        assert result is not None  # noqa: S101
                        msg = f"arms of types {render(result)} and {render(found)}"
                        raise self.fail("T-Match", msg, (*arm_path, "body"), result, found)
                    result = joined
                if result is None:
                    assert first_error is not None  # noqa: S101
                    raise first_error
                self.check(env, e, result, path)
                return result
            case el.Raise(x, ty):
                self.check(env, x, TException(), (*path, "exc"))
                if ty is None:
                    raise self.fail("T-Raise", "raise needs an annotation or an expected type", path)
                self.valid(ty, path)
                return ty
            case el.Try(body, handler):
                tb = self.synth(env, body, (*path, "body"))
                hpath = (*path, "handler")
                try:
                    th = self.synth(env, handler, hpath)
                except TypeCheckError:
                    self.check(env, handler, TArrow(TException(), tb), hpath)
                    return tb
                if not isinstance(th, TArrow) or th.first != TException():
                    msg = f"handler of type {render(th)} does not take an Exception"
                    raise self.fail("T-Try", msg, hpath, actual=th)
                out = join(tb, th.second)
                if out is None:
                    msg = f"body of type {render(tb)} and handler result {render(th.second)}"
                    raise self.fail("T-Try", msg, path, tb, th.second)
                return out
            case el.Cast(x, a, b):
                self.cast(env, x, a, b, path)
                return b
            case el.Query(kind, arg):
                return self.query(env, kind, arg, path)
            case el.Transfer(amount, sender, target, param, fee):
                self.check(env, amount, TTz(), (*path, "amount"))
                self.check(env, sender, TPuk(), (*path, "sender"))
                tt = self.synth(env, target, (*path, "target"))
                if isinstance(tt, TPuk):
                    self.check(env, param, TUnit(), (*path, "param"))
                elif isinstance(tt, TContract):
                    self.check(env, param, tt.param, (*path, "param"))
                else:
                    raise self.fail(
                        "T-Transfer",
                        "target must be a Puk or a Contract",
                        (*path, "target"),
                        actual=tt,
                    )
                self.check(env, fee, TTz(), (*path, "fee"))
                return OPH_NO_NO
            case el.Originate(amount, sender, code, init, fee):
                self.check(env, amount, TTz(), (*path, "amount"))
                self.check(env, sender, TPuk(), (*path, "sender"))
                tc = self.synth(env, code, (*path, "code"))
                if not isinstance(tc, TCode):
                    raise self.fail(
                        "T-Originate", "code argument is not Code", (*path, "code"), actual=tc
                    )
                self.check(env, init, tc.storage, (*path, "init"))
                self.check(env, fee, TTz(), (*path, "fee"))
                return TOph(tc.param, tc.storage)
        raise self.fail("T-Unknown", f"no typing rule for {type(e).__name__}", path)

    def valid(self, t: Ty, path: tuple[str, ...]) -> None:
        try:
            validate_ty(t)
        except TyFormatError as e:
            raise self.fail("T-Type", str(e), path) from e

    def either_side(self, env: TyEnv, e: el.Expr, t: Ty, path: tuple[str, ...]) -> Ty:
        """Join of ``t`` and the type of ``e``, preferring to check ``e`` against ``t``."""
        try:
            self.check(env, e, t, path)
        except TypeCheckError as err:
            try:
                out = join(self.synth(env, e, path), t)
            except TypeCheckError:
                raise err from None
            if out is None:
                raise
            return out
        return t

    def cast(
        self, env: TyEnv, x: el.Expr, a: Ty, b: Ty, path: tuple[str, ...]
    ) -> None:
        if cast_allowed(a, b) == CastKind.FORBIDDEN:
            raise self.fail(
                "T-Cast", f"cast {render(a)} => {render(b)} is forbidden", path, b, a
            )
        self.check(env, x, a, (*path, "expr"))

    def query(
        self, env: TyEnv, kind: el.QueryKind, arg: el.Expr, path: tuple[str, ...]
    ) -> Ty:
        apath = (*path, "arg")
        if kind == el.QueryKind.GET_BALANCE:
            self.check(env, arg, TAddr(), apath)
            return TTz()
        t = self.synth(env, arg, apath)
        if kind == el.QueryKind.GET_STORAGE:
            if not isinstance(t, TContract):
                raise self.fail("T-GetStorage", "argument is not a Contract", apath, actual=t)
            return t.storage
        if not isinstance(t, TOph):
            raise self.fail(f"T-{kind.value}", "argument is not an Oph", apath, actual=t)
        if kind == el.QueryKind.GET_STATUS:
            return TStatus()
        if isinstance(t.param, TNo) or isinstance(t.storage, TNo):
            raise self.fail(
                "T-GetContract",
                "get_contract needs an origination hash (param and storage not No)",
                apath,
                actual=t,
            )
        return TContract(t.param, t.storage)

    # checking
    def check(self, env: TyEnv, e: el.Expr, t: Ty, path: tuple[str, ...]) -> None:  # noqa: PLR0911,PLR0912
        def expect(actual: Ty, rule: str = "T-Sub") -> None:
            if not subsumed(actual, t):
                msg = f"expected {render(t)}, got {render(actual)}"
                raise self.fail(rule, msg, path, t, actual)

        match e:
            case el.Raise(x, ty):
                self.check(env, x, TException(), (*path, "exc"))
                if ty is not None:
                    self.valid(ty, path)
                    expect(ty, "T-Raise")
                return
            case el.Nil(ty):
                if not isinstance(t, TList):
                    expect(TList(TUnit()) if ty is None else ty)
                if ty is not None:
                    expect(ty)
                return
            case el.NoneE(ty):
                if not isinstance(t, TOption):
                    expect(TOption(TUnit()) if ty is None else ty)
                if ty is not None:
                    expect(ty)
                return
            case el.Left(x, ty) | el.Right(x, ty):
                if ty is not None:
                    expect(ty)
                if not isinstance(t, TSum):
                    raise self.fail("T-Inj", f"injection checked against {render(t)}", path, t)
                inner = t.first if isinstance(e, el.Left) else t.second
                self.check(env, x, inner, (*path, "value"))
                return
            case el.Cons(h, tl):
                if not isinstance(t, TList):
                    raise self.fail("T-Cons", f"list checked against {render(t)}", path, t)
                self.check(env, h, t.elem, (*path, "head"))
                self.check(env, tl, t, (*path, "tail"))
                return
            case el.SomeE(x):
                if not isinstance(t, TOption):
                    raise self.fail("T-Some", f"option checked against {render(t)}", path, t)
                self.check(env, x, t.elem, (*path, "value"))
                return
            case el.PairE(a, b):
                if not isinstance(t, TPair):
                    raise self.fail("T-Pair", f"pair checked against {render(t)}", path, t)
                self.check(env, a, t.first, (*path, "fst"))
                self.check(env, b, t.second, (*path, "snd"))
                return
            case el.Lam(param, ty, body, ret):
                if not isinstance(t, TArrow):
                    raise self.fail("T-Lam", f"function checked against {render(t)}", path, t)
                if ret is not None and not subsumed(ret, t.second):
                    msg = f"result annotated {render(ret)}, expected {render(t.second)}"
                    raise self.fail("T-Lam", msg, path, t.second, ret)
                if ty != t.first:
                    msg = f"parameter annotated {render(ty)}, expected {render(t.first)}"
                    raise self.fail("T-Lam", msg, path, t.first, ty)
                self.check({**env, param: ty}, body, ret or t.second, (*path, "body"))
                return
            case el.Fix(fn) if isinstance(t, TArrow):
                self.check(env, fn, TArrow(t, t), (*path, "fn"))
                return
            case el.Match(s, arms):
                ts = self.synth(env, s, (*path, "scrutinee"))
                if not arms:
                    raise self.fail("T-Match", "match without arms", path)
                for i, arm in enumerate(arms):
                    arm_path = (*path, f"arms[{i}]")
                    arm_env = self.arm_env(env, arm, ts, arm_path)
                    self.check(arm_env, arm.body, t, (*arm_path, "body"))
                return
            case el.Try(body, handler):
                self.check(env, body, t, (*path, "body"))
                self.check(env, handler, TArrow(TException(), t), (*path, "handler"))
                return
            case el.App(fn, arg) if isinstance(fn, el.Lam):
                # let-style redex: propagate the expected type into the body
                self.check(env, arg, fn.param_ty, (*path, "arg"))
                if fn.ret is not None:
                    self.valid(fn.ret, (*path, "fn"))
                    expect(fn.ret, "T-App")
                body_env = {**env, fn.param: fn.param_ty}
                self.check(body_env, fn.body, fn.ret or t, (*path, "fn", "body"))
                return
        expect(self.synth(env, e, path))


@docfiller.decorate
def type_of(env: TyEnv, e: el.Expr, ambient: AmbientInfo | None = None) -> Ty:
    """
    Synthesize the type of ``e``.

    Parameters
    ----------
    {env}
    e : Expr
        Expression to type.
    {ambient}

    Returns
    -------
    Ty

    Raises
    ------
    TypeCheckError
    """
    return _Checker(ambient or _DEFAULT_AMBIENT).synth(env, e, ())


def check(env: TyEnv, e: el.Expr, t: Ty, ambient: AmbientInfo | None = None) -> None:
    """Check ``e`` against ``t``, raising :class:`TypeCheckError` on failure."""
    _Checker(ambient or _DEFAULT_AMBIENT).check(env, e, t, ())


def type_program(e: el.Expr, ambient: AmbientInfo | None = None) -> None:
    """Check a top-level program against ``Unit`` in the empty environment."""
    check({}, e, TUnit(), ambient)


def program_type(e: el.Expr, ambient: AmbientInfo | None = None) -> Ty:
    """
    Type derived for a top-level program.

    The synthesized type when there is one, else ``Unit`` if the program checks
    against it.  Being well typed still means checking against ``Unit``.

    >>> from chainsem import expr_lang as el
    >>> program_type(el.IntLit(1))
    TInt()
    >>> program_type(el.Raise(el.ErrorLit(el.ErrorKind.ERR_B)))
    TUnit()
    """
    try:
        return type_of({}, e, ambient)
    except TypeCheckError as err:
        try:
            type_program(e, ambient)
        except TypeCheckError:
            raise err from None
        return TUnit()


# * Blockchains and configurations -------------------------------------------
def derive_delta(chain: Blockchain) -> dict[str, TPair]:
    """Contract typing environment of every contract whose code types."""
    out: dict[str, TPair] = {}
    for puh, entry in chain.contractors.items():
        try:
            out[puh] = type_code(entry.code)
        except CodeTypeError:
            continue
    return out


def extend_delta(delta: ContractTyEnv, chain: Blockchain) -> dict[str, TPair]:
    """``delta`` extended with the contracts of ``chain`` it does not mention."""
    out = dict(delta)
    for puh, pair in derive_delta(chain).items():
        out.setdefault(puh, pair)
    return out


def blockchain_errors(
    delta: ContractTyEnv, b: Blockchain, since: Blockchain | None = None
) -> list[str]:
    out: list[str] = []
    if set(delta) != set(b.contractors):
        out.append("contract typing environment and contractors differ in domain")
    for puh, entry in b.contractors.items():
        pair = delta.get(puh)
        if pair is None or (since is not None and since.contractors.get(puh) == entry):
            continue
        try:
            code_pair = type_code(entry.code)
        except CodeTypeError as e:
            out.append(f"contract {puh}: {e}")
            continue
        if code_pair != pair:
            out.append(f"contract {puh} code types at {render(code_pair)}, not {render(pair)}")
        elif not type_stored_value(entry.storage, pair.second):
            out.append(f"contract {puh} storage {entry.storage!r} is not {render(pair.second)}")
    return out


@docfiller.decorate
def type_blockchain(delta: ContractTyEnv, b: Blockchain) -> bool:
    """
    Typing of a blockchain under ``delta``.

    Parameters
    ----------
    {delta}
    {chain}

    Returns
    -------
    bool
        True if ``delta`` and the contractors share their domain, each contract's
        code types at its ``delta`` entry, and its storage has the storage type.
    """
    return not blockchain_errors(delta, b)


def check_config(
    delta: ContractTyEnv, cfg: Config, since: Config | None = None
) -> list[TypeCheckError]:
    """
    Errors preventing ``cfg`` from typing under ``delta``.

    Blockchain-level problems are reported with rule ``T-Blockchain``, program
    errors carry their node and program index in their path.

    With ``since``, a configuration that typed under a contract environment
    and pool ``cfg`` extends, contracts and programs left unchanged since then
    are not checked again.
    """
    out = [
        TypeCheckError("T-Blockchain", msg)
        for msg in blockchain_errors(delta, cfg.chain, None if since is None else since.chain)
    ]
    ambient = AmbientInfo.from_chain(cfg.chain, delta)
    checker = _Checker(ambient)
    for i, node in enumerate(cfg.nodes):
        before = since.nodes[i].programs if since is not None and i < len(since.nodes) else ()
        for j, program in enumerate(node.programs):
            if j < len(before) and before[j] is program:
                continue
            try:
                checker.check({}, program, TUnit(), (f"nodes[{i}]", f"programs[{j}]"))
            except TypeCheckError as e:
                out.append(e)
    return out


@docfiller.decorate
def type_config(delta: ContractTyEnv, cfg: Config) -> bool:
    """
    Typing of a configuration.

    Parameters
    ----------
    {delta}
    {cfg}

    Returns
    -------
    bool
        True if the blockchain types under ``delta`` and every program on every
        node has type ``Unit``.
    """
    return not check_config(delta, cfg)


# * Canonical forms -----------------------------------------------------------
def canonical_form_ok(  # noqa: PLR0911,PLR0912
    v: el.Expr, t: Ty, accounts: Iterable[str], chain: Blockchain
) -> bool:
    """
    Check that value ``v`` has the canonical shape of type ``t``.

    Handles must be live: public keys belong to a local node or a registered
    manager, public hashes to a contract (whose code types as requested for
    ``Contract``), and operation hashes to a pool entry of the matching kind.
    """
    from .chain_state import OriginateOp

    accounts = set(accounts)

    def puk_ok(x: el.Expr) -> bool:
        return isinstance(x, el.PukLit) and (x.puk in accounts or x.puk in chain.managers)

    def puh_ok(x: el.Expr) -> bool:
        return isinstance(x, el.PuhLit) and x.puh in chain.contractors

    def code_is(code: CodeRef, first: Ty, second: Ty) -> bool:
        try:
            return type_code(code) == TPair(first, second)
        except CodeTypeError:
            return False

    match t:
        case TBool():
            return isinstance(v, el.BoolLit)
        case TInt():
            return isinstance(v, el.IntLit)
        case TTz():
            return isinstance(v, el.TzLit) and v.value >= 0
        case TUnit():
            return isinstance(v, el.UnitLit)
        case TString():
            return isinstance(v, el.StrLit)
        case TPuk():
            return puk_ok(v)
        case TPuh():
            return puh_ok(v)
        case TAddr():
            return puk_ok(v) or puh_ok(v)
        case TContract(a, b):
            return puh_ok(v) and code_is(chain.contractors[v.puh].code, a, b)  # type: ignore[attr-defined]
        case TOph(a, b):
            if not isinstance(v, el.OphLit) or v.oph not in chain.pool:
                return False
            op = chain.pool[v.oph].op
            if isinstance(op, OriginateOp):
                return code_is(op.code, a, b)
            return isinstance(a, TNo) and isinstance(b, TNo)
        case TCode(a, b):
            return isinstance(v, el.CodeLit) and code_is(v.code, a, b)
        case TStatus():
            return isinstance(v, (el.Pending, el.TimeoutE)) or (
                isinstance(v, el.Included) and isinstance(v.time, el.IntLit)
            )
        case TException():
            return isinstance(v, el.ErrorLit) or (
                isinstance(v, el.FailWith) and isinstance(v.message, el.StrLit)
            )
        case TArrow():
            return isinstance(v, (el.Lam, el.Fix)) and el.is_value(v)
        case TPair(a, b):
            return isinstance(v, el.PairE) and all(
                canonical_form_ok(x, y, accounts, chain) for x, y in ((v.fst, a), (v.snd, b))
            )
        case TList(elem):
            while isinstance(v, el.Cons):
                if not canonical_form_ok(v.head, elem, accounts, chain):
                    return False
                v = v.tail
            return isinstance(v, el.Nil)
        case TSum(a, b):
            if isinstance(v, el.Left):
                return canonical_form_ok(v.value, a, accounts, chain)
            if isinstance(v, el.Right):
                return canonical_form_ok(v.value, b, accounts, chain)
            return False
        case TOption(elem):
            if isinstance(v, el.SomeE):
                return canonical_form_ok(v.value, elem, accounts, chain)
            return isinstance(v, el.NoneE)
    return False
