"""
Types, subtyping and casts (:mod:`~chainsem.core_types`)
========================================================

The type grammar shared by every other module.  Types are immutable and
compared structurally.

>>> from chainsem.core_types import subtype, cast_allowed, TPuh, TAddr, TInt
>>> subtype(TPuh(), TAddr())
True
>>> cast_allowed(TAddr(), TPuh())
<CastKind.DOWNCAST: 'downcast'>
>>> render(TContract(TInt(), TBool()))
'Contract Int Bool'
"""

from __future__ import annotations

import enum
from dataclasses import dataclass
from typing import TYPE_CHECKING, ClassVar

if TYPE_CHECKING:
    from collections.abc import Iterator

    from ._typing import JSONDict


__all__ = [
    "CastKind",
    "CodeRef",
    "TAddr",
    "TArrow",
    "TBool",
    "TCode",
    "TContract",
    "TException",
    "TInt",
    "TList",
    "TNo",
    "TOph",
    "TOption",
    "TPair",
    "TPuh",
    "TPuk",
    "TStatus",
    "TString",
    "TSum",
    "TTz",
    "TUnit",
    "Ty",
    "TyFormatError",
    "cast_allowed",
    "is_first_order",
    "join",
    "render",
    "subsumed",
    "subtype",
    "ty_from_json",
    "ty_to_json",
    "validate_ty",
]


class TyFormatError(ValueError):
    """Malformed type, or type JSON that cannot be decoded."""


@dataclass(frozen=True)
class Ty:
    """Base class of types."""

    #: Constructor name used in the JSON and text renderings.
    name: ClassVar[str] = "Ty"

    def children(self) -> tuple[Ty, ...]:
        return ()

    def __str__(self) -> str:
        return render(self)


# * Base and domain types -----------------------------------------------------
@dataclass(frozen=True)
class TPuh(Ty):
    """Public hash of a contract."""

    name: ClassVar[str] = "Puh"


@dataclass(frozen=True)
class TPuk(Ty):
    """Public key of an implicit account."""

    name: ClassVar[str] = "Puk"


@dataclass(frozen=True)
class TAddr(Ty):
    """Address: a public hash or a public key."""

    name: ClassVar[str] = "Addr"


@dataclass(frozen=True)
class TStatus(Ty):
    name: ClassVar[str] = "Status"


@dataclass(frozen=True)
class TException(Ty):
    name: ClassVar[str] = "Exception"


@dataclass(frozen=True)
class TTz(Ty):
    """Token amounts."""

    name: ClassVar[str] = "Tz"


@dataclass(frozen=True)
class TNo(Ty):
    """Irrelevant type, only legal as a parameter of ``Oph``."""

    name: ClassVar[str] = "No"


@dataclass(frozen=True)
class TInt(Ty):
    name: ClassVar[str] = "Int"


@dataclass(frozen=True)
class TUnit(Ty):
    name: ClassVar[str] = "Unit"


@dataclass(frozen=True)
class TBool(Ty):
    name: ClassVar[str] = "Bool"


@dataclass(frozen=True)
class TString(Ty):
    name: ClassVar[str] = "String"


# * Two-argument constructors -------------------------------------------------
@dataclass(frozen=True)
class _Binary(Ty):
    first: Ty
    second: Ty

    def children(self) -> tuple[Ty, ...]:
        return (self.first, self.second)


@dataclass(frozen=True)
class TContract(_Binary):
    """Verified contract handle ``Contract param storage``."""

    name: ClassVar[str] = "Contract"

    @property
    def param(self) -> Ty:
        return self.first

    @property
    def storage(self) -> Ty:
        return self.second


@dataclass(frozen=True)
class TCode(_Binary):
    """Contract code ``Code param storage``."""

    name: ClassVar[str] = "Code"

    @property
    def param(self) -> Ty:
        return self.first

    @property
    def storage(self) -> Ty:
        return self.second


@dataclass(frozen=True)
class TOph(_Binary):
    """Operation hash ``Oph param storage`` (``Oph No No`` for transfers)."""

    name: ClassVar[str] = "Oph"

    @property
    def param(self) -> Ty:
        return self.first

    @property
    def storage(self) -> Ty:
        return self.second


@dataclass(frozen=True)
class TArrow(_Binary):
    name: ClassVar[str] = "Arrow"


@dataclass(frozen=True)
class TPair(_Binary):
    name: ClassVar[str] = "Pair"


@dataclass(frozen=True)
class TSum(_Binary):
    name: ClassVar[str] = "Sum"


@dataclass(frozen=True)
class TList(Ty):
    elem: Ty

    name: ClassVar[str] = "List"

    def children(self) -> tuple[Ty, ...]:
        return (self.elem,)


@dataclass(frozen=True)
class TOption(Ty):
    elem: Ty

    name: ClassVar[str] = "Option"

    def children(self) -> tuple[Ty, ...]:
        return (self.elem,)


_NULLARY: dict[str, type[Ty]] = {
    cls.name: cls
    for cls in (
        TPuh,
        TPuk,
        TAddr,
        TStatus,
        TException,
        TTz,
        TNo,
        TInt,
        TUnit,
        TBool,
        TString,
    )
}
_UNARY: dict[str, type[TList | TOption]] = {"List": TList, "Option": TOption}
_BINARY: dict[str, type[_Binary]] = {
    cls.name: cls for cls in (TContract, TCode, TOph, TArrow, TPair, TSum)
}

OPH_NO_NO = TOph(TNo(), TNo())
"""Type of transfer operation hashes (written ``Oph`` for short)."""


# * Relation and casts --------------------------------------------------------
class CastKind(str, enum.Enum):
    """Classification of a cast ``from => to``."""

    UPCAST = "upcast"
    DOWNCAST = "downcast"
    FORBIDDEN = "forbidden"


def subtype(lhs: Ty, rhs: Ty) -> bool:
    """
    Relation ``lhs <| rhs``.

    Exactly the three axioms ``Puh <| Addr``, ``Puk <| Addr`` and
    ``Contract t u <| Puh``.  The relation is neither reflexive nor
    transitive.
    """
    match lhs, rhs:
        case TPuh(), TAddr():
            return True
        case TPuk(), TAddr():
            return True
        case TContract(), TPuh():
            return True
    return False


def cast_allowed(from_ty: Ty, to_ty: Ty) -> CastKind:
    """Classify the cast ``from_ty => to_ty``."""
    if subtype(from_ty, to_ty):
        return CastKind.UPCAST
    if subtype(to_ty, from_ty):
        return CastKind.DOWNCAST
    return CastKind.FORBIDDEN


_HANDLES = (TPuk, TPuh, TAddr, TContract)


def subsumed(lhs: Ty, rhs: Ty) -> bool:
    """
    Implicit subsumption ``lhs <= rhs`` used when checking against a type.

    The reflexive and transitive closure of :func:`subtype`, lifted
    covariantly through ``Pair``, ``Sum``, ``List``, ``Option`` and arrow
    results.  Arrow parameters and the remaining constructors are invariant.

    >>> subsumed(TContract(TInt(), TInt()), TAddr()), subsumed(TAddr(), TPuk())
    (True, False)
    >>> subsumed(TList(TPuk()), TList(TAddr()))
    True
    """
    if lhs == rhs:
        return True
    if isinstance(rhs, TAddr):
        return isinstance(lhs, (TPuk, TPuh, TContract))
    if isinstance(rhs, TPuh):
        return isinstance(lhs, TContract)
    if isinstance(lhs, (TPair, TSum)) and type(lhs) is type(rhs):
        assert isinstance(rhs, _Binary)  # noqa: S101
        return subsumed(lhs.first, rhs.first) and subsumed(lhs.second, rhs.second)
    if isinstance(lhs, (TList, TOption)) and type(lhs) is type(rhs):
        assert isinstance(rhs, (TList, TOption))  # noqa: S101
        return subsumed(lhs.elem, rhs.elem)
    if isinstance(lhs, TArrow) and isinstance(rhs, TArrow):
        return lhs.first == rhs.first and subsumed(lhs.second, rhs.second)
    return False


def join(a: Ty, b: Ty) -> Ty | None:
    """
    Least type both ``a`` and ``b`` are :func:`subsumed` by, if any.

    >>> join(TPuk(), TPuh())
    TAddr()
    >>> join(TPair(TPuk(), TInt()), TPair(TAddr(), TInt()))
    TPair(first=TAddr(), second=TInt())
    >>> join(TInt(), TTz()) is None
    True
    """
    if subsumed(a, b):
        return b
    if subsumed(b, a):
        return a
    if isinstance(a, _HANDLES) and isinstance(b, _HANDLES):
        if isinstance(a, (TContract, TPuh)) and isinstance(b, (TContract, TPuh)):
            return TPuh()
        return TAddr()
    if type(a) is not type(b):
        return None
    if isinstance(a, (TPair, TSum)):
        assert isinstance(b, _Binary)  # noqa: S101
        first, second = join(a.first, b.first), join(a.second, b.second)
        if first is None or second is None:
            return None
        return type(a)(first, second)
    if isinstance(a, (TList, TOption)):
        assert isinstance(b, (TList, TOption))  # noqa: S101
        elem = join(a.elem, b.elem)
        return None if elem is None else type(a)(elem)
    if isinstance(a, TArrow) and isinstance(b, TArrow) and a.first == b.first:
        second = join(a.second, b.second)
        return None if second is None else TArrow(a.first, second)
    return None


def iter_types(t: Ty) -> Iterator[Ty]:
    """Pre-order traversal of ``t`` and its components."""
    yield t
    for c in t.children():
        yield from iter_types(c)


def is_first_order(t: Ty) -> bool:
    """True if ``t`` has a serialized form (no arrows, code or ``No``)."""
    return not any(isinstance(x, (TArrow, TCode, TNo)) for x in iter_types(t))


def validate_ty(t: Ty) -> None:
    """
    Check that ``No`` only occurs as a direct argument of ``Oph``.

    Raises
    ------
    TyFormatError
    """
    if isinstance(t, TNo):
        msg = "No is only legal as a parameter of Oph"
        raise TyFormatError(msg)
    for c in t.children():
        if isinstance(t, TOph) and isinstance(c, TNo):
            continue
        validate_ty(c)


# * Renderings ----------------------------------------------------------------
def render(t: Ty) -> str:
    """Canonical text rendering, constructor name followed by arguments."""
    if not t.children():
        return t.name
    parts = [t.name]
    for c in t.children():
        s = render(c)
        parts.append(f"({s})" if c.children() else s)
    return " ".join(parts)


def ty_to_json(t: Ty) -> JSONDict:
    """
    JSON rendering: ``{"ty": name, "args": [...]}``.

    >>> ty_to_json(TOption(TInt()))
    {'ty': 'Option', 'args': [{'ty': 'Int'}]}
    """
    out: JSONDict = {"ty": t.name}
    if t.children():
        out["args"] = [ty_to_json(c) for c in t.children()]
    return out


def ty_from_json(data: object) -> Ty:
    """
    Inverse of :func:`ty_to_json`.

    Raises
    ------
    TyFormatError
        On unknown constructors or wrong arity.
    """
    if not isinstance(data, dict) or "ty" not in data:
        msg = f"expected a type object, got {data!r}"
        raise TyFormatError(msg)
    name = data["ty"]
    args = data.get("args", [])
    if not isinstance(args, list):
        msg = f"type arguments must be a list, got {args!r}"
        raise TyFormatError(msg)
    if extra := set(data) - {"ty", "args"}:
        msg = f"unknown keys {sorted(extra)} in type {name!r}"
        raise TyFormatError(msg)

    if name in _NULLARY:
        arity = 0
    elif name in _UNARY:
        arity = 1
    elif name in _BINARY:
        arity = 2
    else:
        msg = f"unknown type constructor {name!r}"
        raise TyFormatError(msg)
    if len(args) != arity:
        msg = f"type {name!r} expects {arity} argument(s), got {len(args)}"
        raise TyFormatError(msg)

    children = [ty_from_json(a) for a in args]
    if arity == 0:
        return _NULLARY[name]()
    if arity == 1:
        return _UNARY[name](children[0])
    return _BINARY[name](children[0], children[1])


# * Contract code references --------------------------------------------------
@dataclass(frozen=True)
class CodeRef:
    """
    Reference to a registered contract stub together with its declared types.

    A missing declaration (``None``) makes the code malformed; see
    :func:`chainsem.type_checker.type_code`.
    """

    stub_id: str
    param_ty: Ty | None
    storage_ty: Ty | None

    def to_json(self) -> JSONDict:
        return {
            "stub_id": self.stub_id,
            "param": None if self.param_ty is None else ty_to_json(self.param_ty),
            "storage": None
            if self.storage_ty is None
            else ty_to_json(self.storage_ty),
        }

    @classmethod
    def from_json(cls, data: object) -> CodeRef:
        if not isinstance(data, dict) or not isinstance(data.get("stub_id"), str):
            msg = f"expected a code object with 'stub_id', got {data!r}"
            raise TyFormatError(msg)
        param, storage = data.get("param"), data.get("storage")
        return cls(
            stub_id=data["stub_id"],
            param_ty=None if param is None else ty_from_json(param),
            storage_ty=None if storage is None else ty_from_json(storage),
        )
