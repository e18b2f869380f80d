"""
Scheduling and exploration (:mod:`~chainsem.scheduler`)
=======================================================

System-level semantics over a configuration ``B[N1, ..., Nn]``: enumeration
of enabled transitions, their application, seeded random runs recorded as
traces, trace replay, and bounded breadth-first exploration.
"""

from __future__ import annotations

import enum
import json
import logging
import re
from collections import deque
from dataclasses import dataclass, field, replace
from typing import TYPE_CHECKING, Any

import numpy as np
from module_utilities import cached

from .chain_state import (
    Blockchain,
    BlockReport,
    ModelFault,
    OriginateOp,
    TransitionError,
    block_accept_report,
    block_bake,
    block_originate_accept_report,
    block_timeout,
    chain_from_json,
    chain_to_json,
    gen_contract_hash,
)
from .codec import expr_from_json, expr_to_json
from .docstrings import docfiller
from .node_runtime import Account, Node, NodeStep, classify_program, step_program
from .options import OPTIONS, semantic_snapshot, set_options, snapshot
from .utils import canonical_json, digest, get_tqdm_calc, parallel_map

if TYPE_CHECKING:
    from collections.abc import Iterable, Iterator, Mapping, Sequence

    from ._typing import AssertionNames, ContractTyEnv, JSONDict, PolicyName
    from .invariants import InvariantViolation
    from .options import Options


__all__ = [
    "POLICIES",
    "Config",
    "Exploration",
    "ExplorationBudgetExceeded",
    "ReplayMismatchError",
    "SchedulingPolicy",
    "StaleTransitionError",
    "StepReport",
    "Trace",
    "TraceEvent",
    "TransitionId",
    "TransitionKind",
    "apply",
    "apply_report",
    "canonical_key",
    "config_digest",
    "enabled_transitions",
    "explore",
    "read_trace",
    "read_trace_header",
    "replay",
    "run",
    "run_many",
]

logger = logging.getLogger(__name__)


class StaleTransitionError(ValueError):
    """Transition applied while not enabled."""


class ReplayMismatchError(RuntimeError):
    """Replayed trace diverges from its recorded state digests."""


class ExplorationBudgetExceeded(RuntimeError):  # noqa: N818
    """State budget exhausted; ``result`` holds the partial exploration."""

    def __init__(self, msg: str, result: Exploration) -> None:
        super().__init__(msg)
        self.result = result


# * Configurations ------------------------------------------------------------
@dataclass(frozen=True)
class Config:
    """Configuration ``B[N1, ..., Nn]``."""

    chain: Blockchain
    nodes: tuple[Node, ...] = ()

    @property
    def accounts(self) -> list[frozenset[str]]:
        """Public keys of each node."""
        return [node.puks for node in self.nodes]

    def is_done(self) -> bool:
        """True if every program on every node is the unit value."""
        return all(node.is_done() for node in self.nodes)

    def with_node(self, index: int, node: Node) -> Config:
        nodes = list(self.nodes)
        nodes[index] = node
        return replace(self, nodes=tuple(nodes))

    def to_json(self) -> JSONDict:
        return {
            "chain": chain_to_json(self.chain),
            "nodes": [
                {
                    "accounts": sorted([a.pak, a.puk] for a in node.accounts),
                    "programs": [expr_to_json(p) for p in node.programs],
                }
                for node in self.nodes
            ],
        }

    @classmethod
    def from_json(cls, data: JSONDict) -> Config:
        return cls(
            chain=chain_from_json(data["chain"]),
            nodes=tuple(
                Node(
                    programs=tuple(expr_from_json(p) for p in node["programs"]),
                    accounts=frozenset(Account(pak, puk) for pak, puk in node["accounts"]),
                )
                for node in data["nodes"]
            ),
        )


def config_digest(cfg: Config) -> str:
    """Digest of the full configuration, hashes included."""
    return digest(cfg.to_json())


_HASH_RE = re.compile(r"\b(oph|puh)_[0-9a-f]{20}\b")


def canonical_key(cfg: Config) -> str:
    """
    Configuration rendering with hashes replaced by allocation-order indices.

    Two configurations differing only in the concrete hash strings they hold
    get the same key.
    """
    text = canonical_json(cfg.to_json(), sort_keys=False)
    names: dict[str, str] = {}

    def rename(m: re.Match[str]) -> str:
        h = m.group(0)
        if h not in names:
            names[h] = f"{m.group(1)}#{len(names)}"
        return names[h]

    return _HASH_RE.sub(rename, text)


# * Transitions ---------------------------------------------------------------
class TransitionKind(str, enum.Enum):
    NODE_EVAL = "node_eval"
    NODE_INJECT = "node_inject"
    NODE_REJECT = "node_reject"
    QUERY = "query"
    CAST = "cast"
    BLOCK_ACCEPT = "block_accept"
    BLOCK_TIMEOUT = "block_timeout"
    BLOCK_ORIGINATE_ACCEPT = "block_originate_accept"
    BLOCK_BAKE = "block_bake"

    @property
    def is_block(self) -> bool:
        return self.value.startswith("block_")


@dataclass(frozen=True)
class TransitionId:
    """One applicable rule instance: a program step or a block transition."""

    kind: TransitionKind
    node: int | None = None
    program: int | None = None
    oph: str | None = None

    def __str__(self) -> str:
        if self.node is not None:
            return f"{self.kind.value}[{self.node}.{self.program}]"
        if self.oph is not None:
            return f"{self.kind.value}[{self.oph}]"
        return self.kind.value

    def to_json(self) -> JSONDict:
        out: JSONDict = {"kind": self.kind.value}
        if self.node is not None:
            out["node"] = self.node
            out["program"] = self.program
        if self.oph is not None:
            out["oph"] = self.oph
        return out

    @classmethod
    def from_json(cls, data: JSONDict) -> TransitionId:
        return cls(
            TransitionKind(data["kind"]), data.get("node"), data.get("program"), data.get("oph")
        )


@docfiller.decorate
def enabled_transitions(cfg: Config) -> list[TransitionId]:
    """
    Every transition enabled in ``cfg``, in a deterministic order.

    Program steps come first (by node, then program), then block transitions
    on pending operations in pool order, then the empty block.  Blocked and
    stuck programs contribute nothing.

    Parameters
    ----------
    {cfg}

    Returns
    -------
    list of TransitionId
    """
    chain = cfg.chain
    out: list[TransitionId] = []
    for i, node in enumerate(cfg.nodes):
        for j in range(len(node.programs)):
            kind = classify_program(node, chain, j)
            if kind is not None:
                out.append(TransitionId(TransitionKind(kind.value), i, j))

    window = OPTIONS["acceptance_window"]
    any_pending = False
    for oph, entry in chain.pending():
        any_pending = True
        if chain.time - entry.t > window:
            out.append(TransitionId(TransitionKind.BLOCK_TIMEOUT, oph=oph))
        elif isinstance(entry.op, OriginateOp):
            out.append(TransitionId(TransitionKind.BLOCK_ORIGINATE_ACCEPT, oph=oph))
        else:
            out.append(TransitionId(TransitionKind.BLOCK_ACCEPT, oph=oph))
    if any_pending and OPTIONS["empty_blocks"]:
        out.append(TransitionId(TransitionKind.BLOCK_BAKE))
    return out


@dataclass(frozen=True)
class StepReport:
    """Result of one transition, with its observable payload."""

    cfg: Config
    tid: TransitionId
    payload: JSONDict = field(default_factory=dict)
    block: BlockReport | None = None
    node_step: NodeStep | None = None


def _block_payload(pre: Blockchain, tid: TransitionId, report: BlockReport) -> JSONDict:
    payload: JSONDict = {"oph": tid.oph, "status": str(report.chain.pool[tid.oph].status)}  # type: ignore[index]
    if tid.kind == TransitionKind.BLOCK_ORIGINATE_ACCEPT:
        op = pre.pool[tid.oph].op  # type: ignore[index]
        payload["puh"] = gen_contract_hash(op.code, pre.time)  # type: ignore[union-attr]
    if report.credits:
        payload["credits"] = dict(report.credits)
    if report.refund is not None:
        payload["refund"] = {"target": report.refund.target, "amount": report.refund.amount}
    if report.divergence is not None:
        payload["divergence"] = report.divergence
    return payload


def _apply(cfg: Config, tid: TransitionId) -> StepReport:
    kind = tid.kind
    chain = cfg.chain
    try:
        if kind == TransitionKind.BLOCK_ACCEPT:
            report = block_accept_report(chain, tid.oph)  # type: ignore[arg-type]
        elif kind == TransitionKind.BLOCK_ORIGINATE_ACCEPT:
            report = block_originate_accept_report(chain, tid.oph)  # type: ignore[arg-type]
        elif kind == TransitionKind.BLOCK_TIMEOUT:
            report = BlockReport(block_timeout(chain, tid.oph))  # type: ignore[arg-type]
        elif kind == TransitionKind.BLOCK_BAKE:
            if not OPTIONS["empty_blocks"]:
                msg = "empty blocks are disabled"
                raise StaleTransitionError(msg)
            new = block_bake(chain)
            return StepReport(replace(cfg, chain=new), tid, {"time": new.time})
        else:
            return _apply_node(cfg, tid)
    except TransitionError as e:
        raise StaleTransitionError(str(e)) from e
    return StepReport(
        replace(cfg, chain=report.chain), tid, _block_payload(chain, tid, report), block=report
    )


def _apply_node(cfg: Config, tid: TransitionId) -> StepReport:
    if tid.node is None or tid.program is None or not (
        0 <= tid.node < len(cfg.nodes) and 0 <= tid.program < len(cfg.nodes[tid.node].programs)
    ):
        msg = f"no program for {tid}"
        raise StaleTransitionError(msg)
    node = cfg.nodes[tid.node]
    kind = classify_program(node, cfg.chain, tid.program)
    if kind is None or kind.value != tid.kind.value:
        msg = f"{tid} is not enabled (program can take {kind})"
        raise StaleTransitionError(msg)
    try:
        step = step_program(node, cfg.chain, tid.program)
    except ModelFault as e:
        raise StaleTransitionError(str(e)) from e
    new = replace(cfg.with_node(tid.node, step.node), chain=step.chain)
    return StepReport(new, tid, dict(step.payload), node_step=step)


def apply_report(cfg: Config, tid: TransitionId) -> StepReport:
    """
    Apply ``tid`` to ``cfg`` and report its payload.

    Raises
    ------
    StaleTransitionError
        If ``tid`` is not enabled in ``cfg``.
    """
    if tid not in enabled_transitions(cfg):
        msg = f"{tid} is not enabled"
        raise StaleTransitionError(msg)
    return _apply(cfg, tid)


@docfiller.decorate
def apply(cfg: Config, tid: TransitionId) -> Config:
    """
    Apply an enabled transition.

    Parameters
    ----------
    {cfg}
    tid : TransitionId
        Transition from :func:`enabled_transitions`.

    Returns
    -------
    Config
        Only the components touched by the transition change.
    """
    return apply_report(cfg, tid).cfg


# * Policies ------------------------------------------------------------------
@dataclass(frozen=True)
class SchedulingPolicy:
    """
    Weighted choice among enabled transitions.

    Kinds missing from ``weights`` get weight one.  When every enabled
    transition has weight zero the choice is uniform.
    """

    name: str
    weights: Mapping[TransitionKind, float] = field(default_factory=dict)

    def weight(self, kind: TransitionKind) -> float:
        return self.weights.get(kind, 1.0)

    def choose(self, rng: np.random.Generator, enabled: Sequence[TransitionId]) -> int:
        w = np.array([self.weight(t.kind) for t in enabled], dtype=float)
        total = w.sum()
        if total <= 0:
            return int(rng.integers(len(enabled)))
        return int(rng.choice(len(enabled), p=w / total))


POLICIES: Mapping[str, SchedulingPolicy] = {
    "uniform": SchedulingPolicy("uniform"),
    "accept-eager": SchedulingPolicy(
        "accept-eager",
        {
            TransitionKind.BLOCK_ACCEPT: 8.0,
            TransitionKind.BLOCK_ORIGINATE_ACCEPT: 8.0,
            TransitionKind.BLOCK_BAKE: 0.25,
        },
    ),
    "timeout-forcing": SchedulingPolicy(
        "timeout-forcing",
        {
            TransitionKind.BLOCK_ACCEPT: 0.0,
            TransitionKind.BLOCK_ORIGINATE_ACCEPT: 0.0,
            TransitionKind.BLOCK_BAKE: 4.0,
            TransitionKind.BLOCK_TIMEOUT: 8.0,
        },
    ),
}
"""Named policy presets."""


def get_policy(policy: PolicyName | str | SchedulingPolicy) -> SchedulingPolicy:
    if isinstance(policy, SchedulingPolicy):
        return policy
    if policy not in POLICIES:
        msg = f"unknown policy {policy!r}; choose from {sorted(POLICIES)}"
        raise ValueError(msg)
    return POLICIES[policy]


# * Traces --------------------------------------------------------------------
@dataclass(frozen=True)
class TraceEvent:
    step: int
    tid: TransitionId
    pre: str
    post: str
    payload: JSONDict = field(default_factory=dict)

    def to_json(self) -> JSONDict:
        return {
            "step": self.step,
            "transition": self.tid.to_json(),
            "pre": self.pre,
            "post": self.post,
            "payload": self.payload,
        }

    @classmethod
    def from_json(cls, data: JSONDict) -> TraceEvent:
        return cls(
            data["step"],
            TransitionId.from_json(data["transition"]),
            data["pre"],
            data["post"],
            data.get("payload", {}),
        )


@dataclass
class Trace:
    """
    Recorded run.

    ``violation`` is set when an enabled per-step assertion failed; the run
    stops at the offending step, which is the last event.  ``options`` holds
    the values of the semantic options in force during the run.
    """

    initial: Config
    seed: int
    policy: str
    events: list[TraceEvent]
    final: Config
    violation: InvariantViolation | None = None
    options: Options = field(default_factory=semantic_snapshot)
    _cache: dict[str, Any] = field(default_factory=dict, init=False, repr=False, compare=False)

    @property
    def terminated(self) -> bool:
        """True if the run stopped because nothing was enabled."""
        return self.violation is None and not enabled_transitions(self.final)

    @cached.prop
    def final_digest(self) -> str:
        return config_digest(self.final)

    def kinds(self) -> list[TransitionKind]:
        return [e.tid.kind for e in self.events]

    def header(self) -> JSONDict:
        return {"seed": self.seed, "policy": self.policy, "options": dict(self.options)}

    def to_jsonl(self) -> str:
        """Header line, then one JSON object per event, one event per line."""
        lines = [{_HEADER: self.header()}, *(e.to_json() for e in self.events)]
        return "".join(canonical_json(line) + "\n" for line in lines)


_HEADER = "header"


def _trace_lines(text: str) -> Iterator[JSONDict]:
    for line in text.splitlines():
        if line.strip():
            yield json.loads(line)


def read_trace(text: str) -> list[TraceEvent]:
    """Events of a JSON-lines trace."""
    return [TraceEvent.from_json(d) for d in _trace_lines(text) if _HEADER not in d]


def read_trace_header(text: str) -> JSONDict:
    """
    Header of a JSON-lines trace: seed, policy and semantic options.

    Empty for traces written without a header.
    """
    first = next(_trace_lines(text), {})
    return dict(first.get(_HEADER, {}))


def _suite(
    cfg: Config, assertions: AssertionNames, delta: ContractTyEnv | None
) -> Any:
    from .invariants import InvariantSuite

    return InvariantSuite.from_assertions(assertions, cfg, delta)


@docfiller.decorate
def run(
    cfg: Config,
    seed: int = 0,
    max_steps: int = 1000,
    policy: PolicyName | str | SchedulingPolicy = "uniform",
    assertions: AssertionNames = None,
    delta: ContractTyEnv | None = None,
) -> Trace:
    """
    Seeded random run.

    Parameters
    ----------
    {cfg}
    {seed}
    {max_steps}
    {policy}
    {assertions}
    {delta}

    Returns
    -------
    Trace
        Identical inputs give identical traces.

    Raises
    ------
    InvariantViolation
        If an assertion fails on the initial configuration.
    """
    from .invariants import InvariantViolation

    pol = get_policy(policy)
    rng = np.random.default_rng(seed)
    suite = _suite(cfg, assertions, delta)
    suite.check_initial(cfg)

    events: list[TraceEvent] = []
    cur = cfg
    violation: InvariantViolation | None = None
    pre_digest = config_digest(cur)
    for step in range(max_steps):
        enabled = enabled_transitions(cur)
        if not enabled:
            break
        tid = enabled[pol.choose(rng, enabled)]
        report = _apply(cur, tid)
        post_digest = config_digest(report.cfg)
        events.append(TraceEvent(step, tid, pre_digest, post_digest, report.payload))
        logger.debug("step %s: %s", step, tid)
        try:
            suite.check_step(step, cur, report)
        except InvariantViolation as e:
            violation = e
            cur = report.cfg
            break
        cur, pre_digest = report.cfg, post_digest
    return Trace(cfg, seed, pol.name, events, cur, violation, semantic_snapshot())


def replay(cfg: Config, events: Iterable[TraceEvent]) -> Config:
    """
    Re-apply recorded transitions, checking every state digest.

    Raises
    ------
    ReplayMismatchError
        On the first digest that differs from the recording.
    StaleTransitionError
        If a recorded transition is not enabled.
    """
    cur = cfg
    for event in events:
        if config_digest(cur) != event.pre:
            msg = f"state before step {event.step} differs from the trace"
            raise ReplayMismatchError(msg)
        cur = apply(cur, event.tid)
        if config_digest(cur) != event.post:
            msg = f"state after step {event.step} ({event.tid}) differs from the trace"
            raise ReplayMismatchError(msg)
    return cur


def _run_seed(
    seed: int,
    cfg: Config,
    max_steps: int,
    policy: PolicyName | str | SchedulingPolicy,
    assertions: AssertionNames,
    delta: ContractTyEnv | None,
    options: Options,
) -> Trace:
    with set_options(**options):
        return run(cfg, seed, max_steps, policy, assertions, delta)


def run_many(
    cfg: Config,
    seeds: Iterable[int],
    max_steps: int = 1000,
    policy: PolicyName | str | SchedulingPolicy = "uniform",
    assertions: AssertionNames = None,
    delta: ContractTyEnv | None = None,
    use_joblib: bool = True,
) -> list[Trace]:
    """:func:`run` over several seeds, in parallel when joblib is enabled."""
    return parallel_map(
        _run_seed,
        seeds,
        cfg,
        max_steps,
        policy,
        assertions,
        delta,
        snapshot(),
        use_joblib=use_joblib,
    )


# * Exploration ---------------------------------------------------------------
@dataclass
class Exploration:
    """
    Reachable configurations, keyed by :func:`canonical_key`.

    ``terminal`` lists the keys of expanded states with nothing enabled and
    ``violations`` every assertion failure met on the way.
    """

    states: dict[str, Config] = field(default_factory=dict)
    depth_of: dict[str, int] = field(default_factory=dict)
    terminal: list[str] = field(default_factory=list)
    transitions: int = 0
    depth: int = 0
    violations: list[InvariantViolation] = field(default_factory=list)

    def __len__(self) -> int:
        return len(self.states)

    def terminal_configs(self) -> Iterator[Config]:
        for key in self.terminal:
            yield self.states[key]

    def summary(self) -> JSONDict:
        return {
            "states": len(self.states),
            "terminal": len(self.terminal),
            "transitions": self.transitions,
            "depth": self.depth,
            "violations": [v.to_dict() for v in self.violations],
        }


@docfiller.decorate
def explore(
    cfg: Config,
    depth: int,
    max_states: int = 100_000,
    assertions: AssertionNames = None,
    delta: ContractTyEnv | None = None,
) -> Exploration:
    """
    Breadth-first exploration of every interleaving up to ``depth``.

    Parameters
    ----------
    {cfg}
    {depth}
    max_states : int
        Budget on distinct canonical states.
    {assertions}
    {delta}

    Returns
    -------
    Exploration

    Raises
    ------
    ExplorationBudgetExceeded
        When more than ``max_states`` states are found.  The partial result is
        attached.
    """
    from .invariants import InvariantViolation

    suite = _suite(cfg, assertions, delta)
    result = Exploration()
    try:
        suite.check_initial(cfg)
    except InvariantViolation as e:
        result.violations.append(e)

    key = canonical_key(cfg)
    result.states[key] = cfg
    result.depth_of[key] = 0
    frontier: deque[str] = deque([key])

    for level in get_tqdm_calc(range(depth), desc="explore"):
        if not frontier:
            break
        result.depth = level + 1
        nxt: deque[str] = deque()
        for key in frontier:
            state = result.states[key]
            enabled = enabled_transitions(state)
            if not enabled:
                result.terminal.append(key)
                continue
            for tid in enabled:
                report = _apply(state, tid)
                result.transitions += 1
                try:
                    suite.check_step(level, state, report)
                except InvariantViolation as e:
                    result.violations.append(e)
                new_key = canonical_key(report.cfg)
                if new_key in result.states:
                    continue
                result.states[new_key] = report.cfg
                result.depth_of[new_key] = level + 1
                nxt.append(new_key)
                if len(result.states) > max_states:
                    msg = f"more than {max_states} states within depth {level + 1}"
                    raise ExplorationBudgetExceeded(msg, result)
        frontier = nxt

    # unexpanded leaves may still be terminal
    for key in frontier:
        if not enabled_transitions(result.states[key]):
            result.terminal.append(key)
    logger.info(
        "explored %s states, %s terminal, depth %s",
        len(result.states),
        len(result.terminal),
        result.depth,
    )
    return result
