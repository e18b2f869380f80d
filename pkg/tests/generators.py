"""Seeded random types and well-typed pure terms for the property tests."""

from __future__ import annotations

from typing import TYPE_CHECKING, TypeVar

from chainsem import expr_lang as el
from chainsem.core_types import (
    TAddr,
    TArrow,
    TBool,
    TContract,
    TException,
    TInt,
    TList,
    TOption,
    TPair,
    TPuh,
    TPuk,
    TSum,
    TTz,
    TUnit,
    subsumed,
)

if TYPE_CHECKING:
    from collections.abc import Sequence

    import numpy as np

    from chainsem.core_types import Ty

T = TypeVar("T")

HOLE = "hole"
PUKS = ("puk_a", "puk_b", "puk_c")

_LEAVES: tuple[Ty, ...] = (
    TInt(),
    TBool(),
    TTz(),
    TUnit(),
    TPuk(),
    TPuh(),
    TAddr(),
    TContract(TInt(), TInt()),
    TContract(TUnit(), TBool()),
)

# types with closed values the term generator can build
_BASE: tuple[Ty, ...] = (TInt(), TBool(), TTz(), TUnit(), TPuk(), TAddr())


def _pick(rng: np.random.Generator, items: Sequence[T]) -> T:
    return items[int(rng.integers(len(items)))]


def random_type(rng: np.random.Generator, depth: int = 2) -> Ty:
    """Any type, handles included, nested up to ``depth`` constructors."""
    if depth <= 0 or rng.random() < 0.4:
        return _pick(rng, _LEAVES)
    a, b = random_type(rng, depth - 1), random_type(rng, depth - 1)
    match int(rng.integers(5)):
        case 0:
            return TPair(a, b)
        case 1:
            return TSum(a, b)
        case 2:
            return TList(a)
        case 3:
            return TOption(a)
    return TArrow(a, b)


def value_type(rng: np.random.Generator, depth: int = 2) -> Ty:
    """Type drawn from the fragment :class:`TermGenerator` inhabits."""
    if depth <= 0 or rng.random() < 0.5:
        return _pick(rng, _BASE)
    match int(rng.integers(3)):
        case 0:
            return TPair(value_type(rng, depth - 1), value_type(rng, depth - 1))
        case 1:
            return TList(value_type(rng, depth - 1))
    return TOption(value_type(rng, depth - 1))


class TermGenerator:
    """
    Random chain-free terms whose type is subsumed by a requested type.

    Terms mix literals, arithmetic and comparisons with let-style redexes,
    option matches, upcasts and handled raises.  Every raise sits directly
    under a ``Try``, so evaluation never escapes with an exception.
    """

    def __init__(self, rng: np.random.Generator) -> None:
        self.rng = rng
        self._names = 0

    def coin(self, p: float = 0.5) -> bool:
        return bool(self.rng.random() < p)

    def fresh(self) -> str:
        self._names += 1
        return f"v{self._names}"

    def term(self, t: Ty, env: dict[str, Ty], depth: int) -> el.Expr:
        if depth > 0:
            match int(self.rng.integers(5)):
                case 0:
                    return self.let(t, env, depth - 1)
                case 1:
                    return self.match_option(t, env, depth - 1)
                case 2:
                    return self.guarded(t, env, depth - 1)
        return self.intro(t, env, depth)

    def let(self, t: Ty, env: dict[str, Ty], depth: int) -> el.Expr:
        s = value_type(self.rng, 1)
        x = self.fresh()
        body = self.term(t, {**env, x: s}, depth)
        ret = t if self.coin(0.3) else None
        return el.App(el.Lam(x, s, body, ret), self.term(s, env, depth))

    def match_option(self, t: Ty, env: dict[str, Ty], depth: int) -> el.Expr:
        s = value_type(self.rng, 1)
        y = self.fresh()
        return el.Match(
            self.term(TOption(s), env, depth),
            (
                el.MatchArm(el.PSome(el.PVar(y)), self.term(t, {**env, y: s}, depth)),
                el.MatchArm(el.PNone(), self.term(t, env, depth)),
            ),
        )

    def guarded(self, t: Ty, env: dict[str, Ty], depth: int) -> el.Expr:
        if self.coin():
            kind = (el.ErrorKind.ERR_B, el.ErrorKind.ERR_K)[int(self.rng.integers(2))]
            body: el.Expr = el.Raise(el.ErrorLit(kind), t)
        else:
            body = self.term(t, env, depth)
        handler = el.Lam(self.fresh(), TException(), self.term(t, env, depth))
        return el.Try(body, handler)

    def puk(self) -> el.PukLit:
        return el.PukLit(_pick(self.rng, PUKS))

    def intro(self, t: Ty, env: dict[str, Ty], depth: int) -> el.Expr:  # noqa: PLR0911
        names = [name for name, s in env.items() if subsumed(s, t)]
        if names and self.coin():
            return el.Var(_pick(self.rng, names))
        nested = depth > 0 and self.coin()
        d = depth - 1
        match t:
            case TInt():
                if nested:
                    return el.Add(self.term(t, env, d), self.term(t, env, d))
                return el.IntLit(int(self.rng.integers(-50, 50)))
            case TTz():
                if nested:
                    return el.Add(self.term(t, env, d), self.term(t, env, d))
                return el.TzLit(int(self.rng.integers(0, 50)))
            case TBool():
                return self.condition(env, d) if nested else el.BoolLit(self.coin())
            case TPuk():
                return self.puk()
            case TAddr():
                match int(self.rng.integers(3)):
                    case 0:
                        return self.puk()
                    case 1:
                        return el.Cast(self.term(TPuk(), env, d), TPuk(), TAddr())
                return el.Cast(el.PuhLit("puh_x"), TPuh(), TAddr())
            case TPair(a, b):
                return el.PairE(self.term(a, env, d), self.term(b, env, d))
            case TList(a):
                if nested:
                    return el.Cons(self.term(a, env, d), self.term(t, env, d))
                return el.Nil(t)
            case TOption(a):
                return el.SomeE(self.term(a, env, d)) if self.coin() else el.NoneE(t)
        return el.UnitLit()

    def condition(self, env: dict[str, Ty], depth: int) -> el.Expr:
        match int(self.rng.integers(5)):
            case 0:
                return el.Not(self.term(TBool(), env, depth))
            case 1:
                return el.And(self.term(TBool(), env, depth), self.term(TBool(), env, depth))
            case 2:
                return el.Lt(self.term(TInt(), env, depth), self.term(TInt(), env, depth))
            case 3:
                return el.Eq(self.term(TInt(), env, depth), self.term(TInt(), env, depth))
        return el.Eq(self.term(TAddr(), env, depth), self.term(TAddr(), env, depth))
