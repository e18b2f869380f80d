"""
Per-step assertions (:mod:`~chainsem.invariants`)
=================================================

Checks run by :func:`~chainsem.scheduler.run` and
:func:`~chainsem.scheduler.explore` after every transition.  Each check maps a
:class:`StepContext` to a list of problems; an empty list means it holds.

=============== ==============================================================
name            property
=============== ==============================================================
well_formed     pool and contract hash equations, inclusion times, accounts
prop1           every handle literal in a program resolves in the chain
prop2           monotonicity, status lifecycle, counters and balances
consistency     every pool entry respects the typing of its operation
preservation    the configuration types under the extended contract env
progress        all programs are unit or some transition is enabled
canonical       values returned by queries, casts and injections are canonical
=============== ==============================================================
"""

from __future__ import annotations

import logging
from dataclasses import dataclass
from typing import TYPE_CHECKING, Callable

from .chain_state import (
    OriginateOp,
    StatusKind,
    TransferOp,
    chk_arg,
    chk_init,
    chk_prg,
    gen_contract_hash,
    gen_op_hash,
    well_formed_errors,
)
from .node_runtime import literal_handles, stuck_redex
from .options import OPTIONS
from .type_checker import (
    canonical_form_ok,
    check_config,
    derive_delta,
    extend_delta,
)

if TYPE_CHECKING:
    from collections.abc import Iterator, Mapping

    from ._typing import AssertionNames, ContractTyEnv, JSONDict
    from .chain_state import Blockchain
    from .expr_lang import Expr
    from .scheduler import Config, StepReport


__all__ = [
    "CHECKS",
    "InvariantSuite",
    "InvariantViolation",
    "StepContext",
    "resolve_assertions",
]

logger = logging.getLogger(__name__)


class InvariantViolation(AssertionError):
    """
    Failed per-step assertion.

    ``step`` is ``None`` for the initial configuration.
    """

    def __init__(self, name: str, step: int | None, detail: str) -> None:
        super().__init__(name, step, detail)
        self.name = name
        self.step = step
        self.detail = detail

    def __str__(self) -> str:
        where = "initially" if self.step is None else f"at step {self.step}"
        return f"{self.name} violated {where}: {self.detail}"

    def to_dict(self) -> JSONDict:
        return {"name": self.name, "step": self.step, "detail": self.detail}


@dataclass(frozen=True)
class StepContext:
    """
    Transition ``pre -> post`` under the contract typing environment of
    ``post``.  ``report`` is ``None`` for the initial configuration.
    """

    step: int | None
    pre: Config
    post: Config
    delta: ContractTyEnv
    report: StepReport | None = None


# * Checks --------------------------------------------------------------------
def _changed_programs(ctx: StepContext) -> Iterator[tuple[int, int, Expr]]:
    """Programs of ``post`` that are not the very objects found in ``pre``."""
    for i, node in enumerate(ctx.post.nodes):
        before: tuple[Expr, ...] = ()
        if ctx.report is not None and i < len(ctx.pre.nodes):
            before = ctx.pre.nodes[i].programs
        for j, program in enumerate(node.programs):
            if j < len(before) and before[j] is program:
                continue
            yield i, j, program


def _well_formed(ctx: StepContext) -> list[str]:
    return well_formed_errors(ctx.post.chain, ctx.post.accounts)


def _prop1(ctx: StepContext) -> list[str]:
    # unchanged programs were checked against a smaller chain
    chain = ctx.post.chain
    ophs, puks, puhs = literal_handles(p for _, _, p in _changed_programs(ctx))
    return (
        [f"operation hash {h} not in the pool" for h in sorted(ophs - set(chain.pool))]
        + [f"public key {k} not registered" for k in sorted(puks - set(chain.managers))]
        + [f"public hash {h} not a contract" for h in sorted(puhs - set(chain.contractors))]
    )


def _credits(ctx: StepContext) -> Mapping[str, int]:
    report = ctx.report
    if report is None or report.block is None:
        return {}
    return report.block.credits


def _prop2(ctx: StepContext) -> list[str]:  # noqa: PLR0912
    b, b2 = ctx.pre.chain, ctx.post.chain
    out: list[str] = []
    if b2.time < b.time:
        out.append(f"time went back from {b.time} to {b2.time}")
    for name, before, after in (
        ("pool", b.pool, b2.pool),
        ("managers", b.managers, b2.managers),
        ("contractors", b.contractors, b2.contractors),
    ):
        if missing := set(before) - set(after):
            out.append(f"{name} lost {sorted(missing)}")

    window = OPTIONS["acceptance_window"]
    for oph, e2 in b2.pool.items():
        if oph != gen_op_hash(e2.op, e2.t, e2.seq):
            out.append(f"{oph} does not hash its operation")
        e = b.pool.get(oph)
        if e is not None and e.status != e2.status:
            if not e.status.is_pending:
                out.append(f"{oph} left terminal status {e.status}")
            elif e2.status.kind == StatusKind.INCLUDED and not (
                e2.status.time == b.time
                and b.time - e.t <= window
                and b2.time == b.time + 1
            ):
                out.append(f"{oph} included at {e2.status.time} against time {b.time}")
        if e2.status.is_pending:
            sender = b2.managers.get(e2.op.puk)
            if sender is None or not sender.cnt.flag:
                out.append(f"{oph} pending while its sender has no flag")
            elif sender.bal < e2.op.nt + e2.op.fee:
                out.append(f"{oph} pending beyond its sender's balance")
        elif e2.status.kind == StatusKind.INCLUDED and not (e2.status.time or 0) < b2.time:
            out.append(f"{oph} included at {e2.status.time}, not before {b2.time}")

    credits = _credits(ctx)
    for puk, m in b.managers.items():
        m2 = b2.managers[puk] if puk in b2.managers else None
        if m2 is None:
            continue
        n, n2 = m.cnt.n, m2.cnt.n
        if m.cnt.flag and not m2.cnt.flag:
            if n2 not in {n, n + 1}:
                out.append(f"{puk} counter jumped from {n} to {n2}")
        elif n2 != n:
            out.append(f"{puk} counter changed from {n} to {n2} without settling")
        if n2 == n and m2.bal - credits.get(puk, 0) != m.bal:
            out.append(f"{puk} balance changed from {m.bal} to {m2.bal} with counter {n}")

    for puh, c2 in b2.contractors.items():
        if puh != gen_contract_hash(c2.code, c2.t):
            out.append(f"contract {puh} does not hash its code and time")
        c = b.contractors.get(puh)
        if c is not None and (c.code, c.t) != (c2.code, c2.t):
            out.append(f"contract {puh} code or time changed")
    return out


def _consistency(ctx: StepContext) -> list[str]:
    b = ctx.post.chain
    out: list[str] = []
    for oph, e in b.pool.items():
        op = e.op
        if op.puk not in b.managers:
            out.append(f"{oph} sender {op.puk} not registered")
        if isinstance(op, TransferOp):
            if op.target.startswith("puh_"):
                if not chk_arg(b.contractors, op.target, op.param):
                    out.append(f"{oph} invokes {op.target} with ill-typed {op.param!r}")
            elif op.target not in b.managers:
                out.append(f"{oph} targets unregistered {op.target}")
        elif isinstance(op, OriginateOp):
            if not (chk_prg(op.code) and chk_init(op.code, op.init)):
                out.append(f"{oph} originates ill-typed code or storage")
            if e.status.kind == StatusKind.INCLUDED:
                puh = gen_contract_hash(op.code, e.status.time or 0)
                if puh not in b.contractors:
                    out.append(f"{oph} included but contract {puh} missing")
    return out


def _preservation(ctx: StepContext) -> list[str]:
    since = None if ctx.report is None else ctx.pre
    return [str(e) for e in check_config(ctx.delta, ctx.post, since)]


def _progress(ctx: StepContext) -> list[str]:
    from .scheduler import enabled_transitions

    cfg = ctx.post
    out = [
        f"program {j} on node {i} is stuck: {stuck.reason}"
        for i, j, _ in _changed_programs(ctx)
        if (stuck := stuck_redex(cfg.nodes[i], j)) is not None
    ]
    if not cfg.is_done() and not enabled_transitions(cfg):
        out.append("deadlock: programs left but nothing enabled")
    return out


def _canonical(ctx: StepContext) -> list[str]:
    report = ctx.report
    if report is None or report.node_step is None or report.node_step.result is None:
        return []
    v, t = report.node_step.result
    accounts = {puk for puks in ctx.post.accounts for puk in puks}
    if canonical_form_ok(v, t, accounts, ctx.post.chain):
        return []
    return [f"{v} is not a canonical value of type {t}"]


CheckFunc = Callable[[StepContext], "list[str]"]

CHECKS: Mapping[str, CheckFunc] = {
    "well_formed": _well_formed,
    "prop1": _prop1,
    "prop2": _prop2,
    "consistency": _consistency,
    "preservation": _preservation,
    "progress": _progress,
    "canonical": _canonical,
}
"""Available checks by name, in evaluation order."""

_INITIAL = ("well_formed", "prop1", "consistency", "preservation", "progress")


def resolve_assertions(assertions: AssertionNames) -> tuple[str, ...]:
    """
    Check names selected by ``assertions``.

    >>> resolve_assertions("prop1,prop2")
    ('prop1', 'prop2')
    >>> len(resolve_assertions("all")) == len(CHECKS)
    True
    >>> resolve_assertions(None)
    ()
    """
    if assertions is None:
        return ()
    if isinstance(assertions, str):
        if assertions == "none":
            return ()
        if assertions == "all":
            return tuple(CHECKS)
        assertions = [a.strip() for a in assertions.split(",") if a.strip()]
    names = tuple(assertions)
    if unknown := [a for a in names if a not in CHECKS]:
        msg = f"unknown assertions {unknown}; choose from {list(CHECKS)}"
        raise ValueError(msg)
    return names


class InvariantSuite:
    """
    Selected checks with the initial contract typing environment.

    The environment of each later state extends the initial one with the
    contracts it holds, so it only grows along a run.
    """

    def __init__(self, names: tuple[str, ...], delta: ContractTyEnv) -> None:
        self.names = names
        self.delta = delta
        self._deltas: dict[frozenset[str], ContractTyEnv] = {}

    @classmethod
    def from_assertions(
        cls, assertions: AssertionNames, cfg: Config, delta: ContractTyEnv | None = None
    ) -> InvariantSuite:
        return cls(
            resolve_assertions(assertions),
            derive_delta(cfg.chain) if delta is None else delta,
        )

    def __bool__(self) -> bool:
        return bool(self.names)

    def delta_for(self, chain: Blockchain) -> ContractTyEnv:
        """Initial environment extended with the contracts of ``chain``, memoized."""
        key = frozenset(chain.contractors)
        delta = self._deltas.get(key)
        if delta is None:
            delta = self._deltas[key] = extend_delta(self.delta, chain)
        return delta

    def _check(self, ctx: StepContext, names: tuple[str, ...]) -> None:
        for name in names:
            problems = CHECKS[name](ctx)
            if problems:
                err = InvariantViolation(name, ctx.step, "; ".join(problems))
                logger.warning("%s", err)
                raise err

    def check_initial(self, cfg: Config) -> None:
        """Checks meaningful on a single configuration."""
        if not self.names:
            return
        ctx = StepContext(None, cfg, cfg, self.delta)
        self._check(ctx, tuple(n for n in self.names if n in _INITIAL))

    def check_step(self, step: int, pre: Config, report: StepReport) -> None:
        """
        Run the selected checks on ``pre -> report.cfg``.

        Raises
        ------
        InvariantViolation
            On the first failing check.
        """
        if not self.names:
            return
        delta = self.delta_for(report.cfg.chain)
        self._check(StepContext(step, pre, report.cfg, delta, report), self.names)
