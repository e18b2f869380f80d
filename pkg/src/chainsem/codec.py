"""
Encodings (:mod:`~chainsem.codec`)
==================================

Three renderings of the calculus:

* constructor-tagged JSON for expressions and patterns (scenario files),
* a short human-readable form (:func:`show_expr`, used by ``str``),
* the serialized value format stored on the chain (parameters, storage).

>>> from chainsem import expr_lang as el
>>> serialize_value(el.PairE(el.BoolLit(True), el.PairE(el.PukLit("puk_a"), el.PukLit("puk_b"))))
'(true,(puk_a,puk_b))'
>>> t = TPair(TBool(), TPair(TAddr(), TAddr()))
>>> parse_stored("(true, (puk_a, puk_b))", t) == el.PairE(
...     el.BoolLit(True), el.PairE(el.PukLit("puk_a"), el.PukLit("puk_b"))
... )
True
"""

from __future__ import annotations

import json
import re
from dataclasses import fields
from typing import TYPE_CHECKING, Any, Callable

from . import expr_lang as el
from .core_types import (
    CodeRef,
    TAddr,
    TBool,
    TContract,
    TException,
    TInt,
    TList,
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
    render,
    ty_from_json,
    ty_to_json,
)
from .options import OPTIONS

if TYPE_CHECKING:
    from ._typing import JSONDict


__all__ = [
    "DecodeError",
    "StoredValueError",
    "expr_from_json",
    "expr_to_json",
    "parse_stored",
    "pattern_from_json",
    "pattern_to_json",
    "serialize_value",
    "show_expr",
    "show_pattern",
]


class DecodeError(ValueError):
    """JSON that does not describe an expression or pattern."""


class StoredValueError(ValueError):
    """Serialized value that does not parse at the requested type."""


# * Tagged JSON ---------------------------------------------------------------
def _registry(base: type) -> dict[str, type]:
    return {
        name: obj
        for name, obj in vars(el).items()
        if isinstance(obj, type)
        and issubclass(obj, base)
        and obj is not base
        and not name.startswith("_")
    }


_EXPR_TAGS: dict[str, type[el.Expr]] = _registry(el.Expr)
_PATTERN_TAGS: dict[str, type[el.Pattern]] = _registry(el.Pattern)


def _encode_field(value: Any) -> Any:
    if isinstance(value, el.Expr):
        return expr_to_json(value)
    if isinstance(value, el.Pattern):
        return pattern_to_json(value)
    if isinstance(value, Ty):
        return ty_to_json(value)
    if isinstance(value, CodeRef):
        return value.to_json()
    if isinstance(value, (el.ErrorKind, el.QueryKind)):
        return value.value
    if isinstance(value, tuple):
        return [
            {"pattern": pattern_to_json(arm.pattern), "body": expr_to_json(arm.body)}
            for arm in value
        ]
    return value


def _to_tagged(obj: el.Expr | el.Pattern) -> JSONDict:
    out: JSONDict = {"tag": type(obj).__name__}
    for f in fields(obj):
        value = getattr(obj, f.name)
        if value is not None:
            out[f.name] = _encode_field(value)
    return out


def expr_to_json(e: el.Expr) -> JSONDict:
    """
    Constructor-tagged JSON object for ``e``.

    >>> expr_to_json(el.Add(el.IntLit(1), el.Var("x")))
    {'tag': 'Add', 'left': {'tag': 'IntLit', 'value': 1}, 'right': {'tag': 'Var', 'name': 'x'}}
    """
    return _to_tagged(e)


def pattern_to_json(p: el.Pattern) -> JSONDict:
    return _to_tagged(p)


def _expect(cond: bool, what: str, value: Any) -> None:
    if not cond:
        msg = f"expected {what}, got {value!r}"
        raise DecodeError(msg)


def _decode_int(value: Any) -> int:
    _expect(isinstance(value, int) and not isinstance(value, bool), "an integer", value)
    return int(value)


def _decode_str(value: Any) -> str:
    _expect(isinstance(value, str), "a string", value)
    return str(value)


def _decode_bool(value: Any) -> bool:
    _expect(isinstance(value, bool), "a boolean", value)
    return bool(value)


def _decode_ty(value: Any) -> Ty:
    try:
        return ty_from_json(value)
    except TyFormatError as e:
        raise DecodeError(str(e)) from e


def _decode_opt_ty(value: Any) -> Ty | None:
    return None if value is None else _decode_ty(value)


def _decode_code(value: Any) -> CodeRef:
    try:
        return CodeRef.from_json(value)
    except TyFormatError as e:
        raise DecodeError(str(e)) from e


def _decode_error_kind(value: Any) -> el.ErrorKind:
    try:
        return el.ErrorKind(value)
    except ValueError as e:
        msg = f"unknown error constant {value!r}"
        raise DecodeError(msg) from e


def _decode_query_kind(value: Any) -> el.QueryKind:
    try:
        return el.QueryKind(value)
    except ValueError as e:
        msg = f"unknown query {value!r}"
        raise DecodeError(msg) from e


def _decode_arms(value: Any) -> tuple[el.MatchArm, ...]:
    _expect(isinstance(value, list), "a list of match arms", value)
    out: list[el.MatchArm] = []
    for arm in value:
        _expect(
            isinstance(arm, dict) and set(arm) == {"pattern", "body"},
            "a match arm with 'pattern' and 'body'",
            arm,
        )
        out.append(el.MatchArm(pattern_from_json(arm["pattern"]), expr_from_json(arm["body"])))
    return tuple(out)


# field annotations of expr_lang classes (kept as strings) -> decoder
_DECODERS: dict[str, Callable[[Any], Any]] = {
    "int": _decode_int,
    "str": _decode_str,
    "bool": _decode_bool,
    "Ty": _decode_ty,
    "Ty | None": _decode_opt_ty,
    "CodeRef": _decode_code,
    "ErrorKind": _decode_error_kind,
    "QueryKind": _decode_query_kind,
    "tuple[MatchArm, ...]": _decode_arms,
}


def _from_tagged(data: Any, tags: dict[str, type], what: str) -> Any:
    _expect(isinstance(data, dict) and "tag" in data, f"a tagged {what} object", data)
    tag = data["tag"]
    if tag not in tags:
        msg = f"unknown {what} tag {tag!r}"
        raise DecodeError(msg)
    cls = tags[tag]
    known = {f.name: f for f in fields(cls)}
    if extra := set(data) - set(known) - {"tag"}:
        msg = f"unknown field(s) {sorted(extra)} for {tag}"
        raise DecodeError(msg)

    kwargs: dict[str, Any] = {}
    for name, f in known.items():
        annotation = str(f.type)
        if name not in data:
            if annotation.endswith("| None"):
                continue
            msg = f"missing field {name!r} for {tag}"
            raise DecodeError(msg)
        value = data[name]
        if annotation == "Expr":
            kwargs[name] = expr_from_json(value)
        elif annotation == "Pattern":
            kwargs[name] = pattern_from_json(value)
        else:
            kwargs[name] = _DECODERS[annotation](value)
    return cls(**kwargs)


def expr_from_json(data: Any) -> el.Expr:
    """
    Inverse of :func:`expr_to_json`.

    Raises
    ------
    DecodeError
        On unknown tags, unknown or missing fields and ill-typed field values.
    """
    return _from_tagged(data, _EXPR_TAGS, "expression")  # type: ignore[no-any-return]


def pattern_from_json(data: Any) -> el.Pattern:
    return _from_tagged(data, _PATTERN_TAGS, "pattern")  # type: ignore[no-any-return]


# * Human readable ------------------------------------------------------------
_INFIX = {el.Add: "+", el.Lt: "<", el.Eq: "=", el.And: "&&", el.Or: "||"}


def show_expr(e: el.Expr) -> str:
    """
    Short readable rendering of ``e``.

    >>> show_expr(el.Try(el.Raise(el.ErrorLit(el.ErrorKind.ERR_B)), el.Var("h")))
    'try raise errB except h'
    """
    match e:
        case el.IntLit(n):
            return str(n)
        case el.TzLit(n):
            return f"{n}tz"
        case el.StrLit(s):
            return json.dumps(s)
        case el.BoolLit(b):
            return "true" if b else "false"
        case el.UnitLit():
            return "()"
        case el.OphLit(x) | el.PuhLit(x) | el.PukLit(x):
            return x
        case el.CodeLit(code):
            return f"code<{code.stub_id}>"
        case el.Pending():
            return "pending"
        case el.TimeoutE():
            return "timeout"
        case el.Included(t):
            return f"included({show_expr(t)})"
        case el.ErrorLit(kind):
            return str(kind.value)
        case el.FailWith(m):
            return f"failwith({show_expr(m)})"
        case el.Var(name):
            return name
        case el.Lam(param, ty, body):
            return f"(fun {param}:{render(ty)} -> {show_expr(body)})"
        case el.Fix(fn):
            return f"fix {show_expr(fn)}"
        case el.App(fn, arg):
            return f"({show_expr(fn)} {show_expr(arg)})"
        case el.Not(x):
            return f"not {show_expr(x)}"
        case el.PairE(a, b):
            return f"({show_expr(a)}, {show_expr(b)})"
        case el.Nil():
            return "[]"
        case el.Cons(h, t):
            return f"({show_expr(h)} :: {show_expr(t)})"
        case el.Left(x):
            return f"left {show_expr(x)}"
        case el.Right(x):
            return f"right {show_expr(x)}"
        case el.SomeE(x):
            return f"some {show_expr(x)}"
        case el.NoneE():
            return "none"
        case el.Match(s, arms):
            body = " | ".join(
                f"{show_pattern(arm.pattern)} -> {show_expr(arm.body)}" for arm in arms
            )
            return f"(match {show_expr(s)} with {body})"
        case el.Raise(x):
            return f"raise {show_expr(x)}"
        case el.Try(body, handler):
            return f"try {show_expr(body)} except {show_expr(handler)}"
        case el.Cast(x, a, b):
            return f"({show_expr(x)} : {render(a)} => {render(b)})"
        case el.Query(kind, arg):
            return f"{kind.value}({show_expr(arg)})"
        case el.Transfer() | el.Originate():
            args = ", ".join(show_expr(getattr(e, name)) for name in e.eval_fields)
            return f"{type(e).__name__.lower()}({args})"
    if type(e) in _INFIX:
        return f"({show_expr(e.left)} {_INFIX[type(e)]} {show_expr(e.right)})"  # type: ignore[attr-defined]
    return repr(e)


def show_pattern(p: el.Pattern) -> str:
    match p:
        case el.PVar(name):
            return name
        case el.PWild():
            return "_"
        case el.PConst(v):
            return show_expr(v)
        case el.PPair(a, b):
            return f"({show_pattern(a)}, {show_pattern(b)})"
        case el.PNil():
            return "[]"
        case el.PCons(h, t):
            return f"{show_pattern(h)} :: {show_pattern(t)}"
        case el.PLeft(q):
            return f"left {show_pattern(q)}"
        case el.PRight(q):
            return f"right {show_pattern(q)}"
        case el.PSome(q):
            return f"some {show_pattern(q)}"
        case el.PNone():
            return "none"
        case el.PPending():
            return "pending"
        case el.PTimeout():
            return "timeout"
        case el.PIncluded(q):
            return f"included({show_pattern(q)})"
        case el.PError(kind):
            return str(kind.value)
        case el.PFailWith(q):
            return f"failwith({show_pattern(q)})"
    return repr(p)


# * Serialized values ---------------------------------------------------------
def serialize_value(v: el.Expr) -> str:
    """
    Serialized form of a first-order value.

    Raises
    ------
    StoredValueError
        For functions, code and non-values.
    """
    match v:
        case el.IntLit(n) | el.TzLit(n):
            return str(n)
        case el.StrLit(s):
            return json.dumps(s)
        case el.BoolLit(b):
            return "true" if b else "false"
        case el.UnitLit():
            return "()"
        case el.OphLit(x) | el.PuhLit(x) | el.PukLit(x):
            return x
        case el.Pending():
            return "pending"
        case el.TimeoutE():
            return "timeout"
        case el.Included(el.IntLit(n)):
            return f"included({n})"
        case el.ErrorLit(kind):
            return str(kind.value)
        case el.FailWith(el.StrLit(s)):
            return f"failwith({json.dumps(s)})"
        case el.PairE(a, b):
            return f"({serialize_value(a)},{serialize_value(b)})"
        case el.Nil() | el.Cons():
            items: list[str] = []
            while isinstance(v, el.Cons):
                items.append(serialize_value(v.head))
                v = v.tail
            if not isinstance(v, el.Nil):
                msg = f"improper list tail {v!r}"
                raise StoredValueError(msg)
            return "[" + ";".join(items) + "]"
        case el.Left(x):
            return f"left {serialize_value(x)}"
        case el.Right(x):
            return f"right {serialize_value(x)}"
        case el.SomeE(x):
            return f"some {serialize_value(x)}"
        case el.NoneE():
            return "none"
    msg = f"value has no serialized form: {v!r}"
    raise StoredValueError(msg)


_WORD_END = r"(?![A-Za-z0-9_])"
_RE_INT = re.compile(r"-?[0-9]+")
_RE_NAT = re.compile(r"[0-9]+")
_RE_HANDLE = {
    "puk": re.compile(r"puk_[A-Za-z0-9_]+"),
    "puh": re.compile(r"puh_[A-Za-z0-9_]+"),
    "oph": re.compile(r"oph_[A-Za-z0-9_]+"),
}
_RE_WS = re.compile(r"\s*")


class _StoredParser:
    def __init__(self, text: str) -> None:
        self.text = text
        self.pos = 0

    def fail(self, what: str) -> StoredValueError:
        snippet = self.text[self.pos : self.pos + 16]
        return StoredValueError(
            f"expected {what} at offset {self.pos} in {self.text!r} (near {snippet!r})"
        )

    def skip_ws(self) -> None:
        m = _RE_WS.match(self.text, self.pos)
        self.pos = m.end() if m else self.pos

    def literal(self, token: str) -> bool:
        self.skip_ws()
        if self.text.startswith(token, self.pos):
            self.pos += len(token)
            return True
        return False

    def keyword(self, word: str) -> bool:
        self.skip_ws()
        if re.compile(re.escape(word) + _WORD_END).match(self.text, self.pos):
            self.pos += len(word)
            return True
        return False

    def expect(self, token: str) -> None:
        if not self.literal(token):
            raise self.fail(repr(token))

    def regex(self, pattern: re.Pattern[str], what: str) -> str:
        self.skip_ws()
        m = pattern.match(self.text, self.pos)
        if m is None:
            raise self.fail(what)
        self.pos = m.end()
        return m.group()

    def number(self, ty: Ty) -> int:
        bits = OPTIONS["int_bits"]
        hi = 2 ** (bits - 1) - 1
        if isinstance(ty, TTz):
            value, lo = int(self.regex(_RE_NAT, "a token amount")), 0
        else:
            value, lo = int(self.regex(_RE_INT, "an integer")), -hi - 1
        if not lo <= value <= hi:
            msg = f"{value} out of range for {render(ty)}"
            raise StoredValueError(msg)
        return value

    def string(self) -> str:
        self.skip_ws()
        if not self.text.startswith('"', self.pos):
            raise self.fail("a string")
        try:
            value, end = json.JSONDecoder().raw_decode(self.text, self.pos)
        except json.JSONDecodeError as e:
            raise self.fail("a string") from e
        self.pos = end
        return str(value)

    def handle(self, *kinds: str) -> el.Expr:
        self.skip_ws()
        for kind in kinds:
            m = _RE_HANDLE[kind].match(self.text, self.pos)
            if m:
                self.pos = m.end()
                handle = m.group()
                if kind == "puk":
                    return el.PukLit(handle)
                if kind == "puh":
                    return el.PuhLit(handle)
                return el.OphLit(handle)
        raise self.fail(" or ".join(f"a {k} handle" for k in kinds))

    def value(self, ty: Ty) -> el.Expr:
        match ty:
            case TUnit():
                self.expect("(")
                self.expect(")")
                return el.UnitLit()
            case TBool():
                if self.keyword("true"):
                    return el.BoolLit(True)
                if self.keyword("false"):
                    return el.BoolLit(False)
                raise self.fail("a boolean")
            case TInt():
                return el.IntLit(self.number(ty))
            case TTz():
                return el.TzLit(self.number(ty))
            case TString():
                return el.StrLit(self.string())
            case TPuk():
                return self.handle("puk")
            case TPuh() | TContract():
                return self.handle("puh")
            case TAddr():
                return self.handle("puk", "puh")
            case TOph():
                return self.handle("oph")
            case TStatus():
                if self.keyword("pending"):
                    return el.Pending()
                if self.keyword("timeout"):
                    return el.TimeoutE()
                if self.keyword("included"):
                    self.expect("(")
                    n = int(self.regex(_RE_NAT, "a time"))
                    self.expect(")")
                    return el.Included(el.IntLit(n))
                raise self.fail("a status")
            case TException():
                if self.keyword("failwith"):
                    self.expect("(")
                    s = self.string()
                    self.expect(")")
                    return el.FailWith(el.StrLit(s))
                for kind in el.ErrorKind:
                    if self.keyword(kind.value):
                        return el.ErrorLit(kind)
                raise self.fail("an error constant")
            case TPair(a, b):
                self.expect("(")
                fst = self.value(a)
                self.expect(",")
                snd = self.value(b)
                self.expect(")")
                return el.PairE(fst, snd)
            case TList(elem):
                self.expect("[")
                items: list[el.Expr] = []
                if not self.literal("]"):
                    items.append(self.value(elem))
                    while self.literal(";"):
                        items.append(self.value(elem))
                    self.expect("]")
                out: el.Expr = el.Nil(ty)
                for item in reversed(items):
                    out = el.Cons(item, out)
                return out
            case TSum(a, b):
                if self.keyword("left"):
                    return el.Left(self.value(a), ty)
                if self.keyword("right"):
                    return el.Right(self.value(b), ty)
                raise self.fail("left or right")
            case TOption(elem):
                if self.keyword("some"):
                    return el.SomeE(self.value(elem))
                if self.keyword("none"):
                    return el.NoneE(ty)
                raise self.fail("some or none")
        msg = f"type {render(ty)} has no serialized values"
        raise StoredValueError(msg)


def parse_stored(s: str, t: Ty) -> el.Expr:
    """
    Parse serialized value ``s`` at type ``t``.

    Raises
    ------
    StoredValueError
        If ``s`` is not a value of type ``t`` or ``t`` is not first order.

    Examples
    --------
    >>> parse_stored("[1; 2]", TList(TInt()))
    Cons(head=IntLit(value=1), tail=Cons(head=IntLit(value=2), tail=Nil(ty=TList(elem=TInt()))))
    >>> parse_stored("true", TInt())
    Traceback (most recent call last):
    ...
    chainsem.codec.StoredValueError: expected an integer at offset 0 in 'true' (near 'true')
    """
    parser = _StoredParser(s)
    out = parser.value(t)
    parser.skip_ws()
    if parser.pos != len(s):
        raise parser.fail("end of input")
    return out
