"""
Scenarios (:mod:`~chainsem.scenario`)
=====================================

A scenario describes an initial configuration: funded implicit accounts,
pre-deployed contracts, local nodes with their accounts and programs, plus
the run parameters (seed, policy, step budget, assertions, options).

In the JSON form, ``"@name"`` anywhere in a string stands for the public key
of manager ``name``, the public hash of contract ``name`` or an explicit
entry of ``"bindings"``.
"""

from __future__ import annotations

import json
import logging
import re
from dataclasses import dataclass, field
from pathlib import Path
from typing import TYPE_CHECKING, Any

from .chain_state import (
    Blockchain,
    ContractorEntry,
    ManagerEntry,
    gen_contract_hash,
    well_formed_errors,
)
from .codec import DecodeError, StoredValueError, expr_from_json, expr_to_json
from .contract_stubs import lookup
from .core_types import CodeRef, TyFormatError
from .node_runtime import Account, Node, literal_handles
from .options import set_options
from .scheduler import Config
from .type_checker import check_config, derive_delta

if TYPE_CHECKING:
    from . import expr_lang as el
    from ._typing import AssertionNames, JSONDict
    from .core_types import TPair


__all__ = [
    "ContractSpec",
    "NodeSpec",
    "Scenario",
    "ScenarioError",
    "account",
    "load",
    "save",
]

logger = logging.getLogger(__name__)


class ScenarioError(ValueError):
    """
    Invalid scenario.

    ``diagnostics`` lists one dict per problem, each with at least a
    ``"check"`` and a ``"message"`` key.
    """

    def __init__(self, diagnostics: list[JSONDict]) -> None:
        self.diagnostics = diagnostics
        lines = [f"{d['check']}: {d['message']}" for d in diagnostics]
        super().__init__("invalid scenario:\n  " + "\n  ".join(lines))


def account(name: str) -> Account:
    """Key pair of manager ``name``; names already of the ``puk_`` form are kept."""
    if name.startswith("puk_"):
        return Account("pak_" + name[len("puk_") :], name)
    return Account.named(name)


@dataclass(frozen=True)
class ContractSpec:
    """Pre-deployed contract, accepted at ``time`` with storage ``init``."""

    code: CodeRef
    init: str
    balance: int = 0
    time: int = 0

    @property
    def puh(self) -> str:
        return gen_contract_hash(self.code, self.time)

    def to_dict(self) -> JSONDict:
        out: JSONDict = {"init": self.init, "balance": self.balance, "time": self.time}
        stub = lookup(self.code.stub_id)
        if stub is not None and stub.code == self.code:
            out["stub"] = self.code.stub_id
        else:
            out["code"] = self.code.to_json()
        return out

    @classmethod
    def from_dict(cls, data: JSONDict) -> ContractSpec:
        if "code" in data:
            code = CodeRef.from_json(data["code"])
        else:
            stub = lookup(data["stub"])
            if stub is None:
                msg = f"unknown contract stub {data['stub']!r}"
                raise TyFormatError(msg)
            code = stub.code
        return cls(code, data["init"], data.get("balance", 0), data.get("time", 0))


@dataclass(frozen=True)
class NodeSpec:
    """Local node: account names and programs."""

    accounts: tuple[str, ...]
    programs: tuple[el.Expr, ...] = ()

    def to_dict(self) -> JSONDict:
        return {
            "accounts": list(self.accounts),
            "programs": [expr_to_json(p) for p in self.programs],
        }

    @classmethod
    def from_dict(cls, data: JSONDict) -> NodeSpec:
        return cls(
            tuple(data.get("accounts", ())),
            tuple(expr_from_json(p) for p in data.get("programs", ())),
        )


@dataclass(frozen=True)
class Scenario:
    """
    Initial configuration together with its run parameters.

    Parameters
    ----------
    name : str
    managers : mapping of str to int
        Initial balance of each implicit account, by name.
    nodes : sequence of NodeSpec
    contracts : mapping of str to ContractSpec
        Pre-deployed contracts, by name.
    time : int, optional
        Initial logical time.  Defaults to one past the latest contract.
    seed, policy, max_steps, assertions :
        Defaults for :func:`~chainsem.scheduler.run`.
    options : mapping
        Values for :class:`~chainsem.options.set_options` while the scenario
        runs.
    """

    name: str
    managers: dict[str, int] = field(default_factory=dict)
    nodes: tuple[NodeSpec, ...] = ()
    contracts: dict[str, ContractSpec] = field(default_factory=dict)
    time: int | None = None
    seed: int = 0
    policy: str = "uniform"
    max_steps: int = 1000
    assertions: AssertionNames = "all"
    options: dict[str, Any] = field(default_factory=dict)
    description: str = ""

    # ** Names
    def puk(self, name: str) -> str:
        return account(name).puk

    def puh(self, name: str) -> str:
        return self.contracts[name].puh

    @property
    def start_time(self) -> int:
        if self.time is not None:
            return self.time
        return max((c.time + 1 for c in self.contracts.values()), default=0)

    # ** Building
    def chain(self) -> Blockchain:
        managers = {self.puk(name): ManagerEntry(bal) for name, bal in self.managers.items()}
        contractors = {
            c.puh: ContractorEntry(c.code, c.time, c.balance, c.init)
            for c in self.contracts.values()
        }
        return Blockchain(managers=managers, contractors=contractors, time=self.start_time)

    def config(self) -> Config:
        """Configuration without validation."""
        return Config(
            self.chain(),
            tuple(
                Node(spec.programs, frozenset(account(a) for a in spec.accounts))
                for spec in self.nodes
            ),
        )

    def diagnostics(self) -> list[JSONDict]:
        """
        Problems preventing the scenario from giving a well-formed, well-typed
        configuration.  Empty when valid.
        """
        out: list[JSONDict] = []
        seen: dict[str, str] = {}
        for name, c in self.contracts.items():
            if c.puh in seen:
                out.append(
                    {
                        "check": "contracts",
                        "message": f"contracts {seen[c.puh]!r} and {name!r} share the "
                        "same code and time, hence the same public hash",
                    }
                )
            seen[c.puh] = name

        cfg = self.config()
        # no operation exists before the run starts
        ophs, puks, puhs = literal_handles(p for node in cfg.nodes for p in node.programs)
        dangling = ophs | (puks - set(cfg.chain.managers)) | (puhs - set(cfg.chain.contractors))
        out.extend(
            {"check": "handles", "message": f"program literal {h} is not registered"}
            for h in sorted(dangling)
        )
        out.extend(
            {"check": "well_formed", "message": msg}
            for msg in well_formed_errors(cfg.chain, cfg.accounts)
        )
        out.extend(
            {"check": "typing", **e.to_dict()}
            for e in check_config(derive_delta(cfg.chain), cfg)
        )
        return out

    def to_config(self) -> tuple[Config, dict[str, TPair]]:
        """
        Validated configuration and its contract typing environment.

        Raises
        ------
        ScenarioError
            With the list of diagnostics when the scenario is invalid.
        """
        if errors := self.diagnostics():
            for d in errors:
                logger.info("scenario %s: %s: %s", self.name, d["check"], d["message"])
            raise ScenarioError(errors)
        cfg = self.config()
        return cfg, derive_delta(cfg.chain)

    def option_context(self) -> set_options:
        """Apply the scenario options; usable as a context manager."""
        return set_options(**self.options)

    # ** JSON
    def to_dict(self) -> JSONDict:
        out: JSONDict = {
            "name": self.name,
            "description": self.description,
            "managers": dict(self.managers),
            "contracts": {name: c.to_dict() for name, c in self.contracts.items()},
            "nodes": [n.to_dict() for n in self.nodes],
            "seed": self.seed,
            "policy": self.policy,
            "max_steps": self.max_steps,
            "assertions": list(self.assertions)
            if isinstance(self.assertions, (list, tuple))
            else self.assertions,
            "options": dict(self.options),
        }
        if self.time is not None:
            out["time"] = self.time
        return out

    @classmethod
    def from_dict(cls, data: JSONDict) -> Scenario:
        """
        Decode a scenario, resolving ``@name`` references.

        Raises
        ------
        ScenarioError
            On unknown keys, unresolved names or malformed terms.
        """
        try:
            return _from_dict(data)
        except ScenarioError:
            raise
        except (DecodeError, StoredValueError, TyFormatError) as e:
            raise ScenarioError([{"check": "decode", "message": str(e)}]) from e
        except (KeyError, TypeError, ValueError) as e:
            msg = f"malformed scenario: {e!r}"
            raise ScenarioError([{"check": "decode", "message": msg}]) from e


_KEYS = {
    "name",
    "description",
    "managers",
    "contracts",
    "nodes",
    "bindings",
    "time",
    "seed",
    "policy",
    "max_steps",
    "assertions",
    "options",
}

_REF = re.compile(r"(?<![\w@])@([A-Za-z_][A-Za-z0-9_]*)")


def _resolve(obj: Any, names: dict[str, str], unresolved: set[str]) -> Any:
    if isinstance(obj, str):

        def sub(m: re.Match[str]) -> str:
            name = m.group(1)
            if name not in names:
                unresolved.add(name)
                return m.group(0)
            return names[name]

        return _REF.sub(sub, obj)
    if isinstance(obj, list):
        return [_resolve(x, names, unresolved) for x in obj]
    if isinstance(obj, dict):
        return {k: _resolve(v, names, unresolved) for k, v in obj.items()}
    return obj


def _from_dict(data: JSONDict) -> Scenario:
    if unknown := set(data) - _KEYS:
        msg = f"unknown scenario keys {sorted(unknown)}"
        raise ScenarioError([{"check": "decode", "message": msg}])

    managers = {str(k): int(v) for k, v in data.get("managers", {}).items()}
    names = {name: account(name).puk for name in managers}

    # contract hashes depend on code and time only, so they resolve before storage
    raw_contracts = data.get("contracts", {})
    puhs = {
        name: ContractSpec.from_dict({**c, "init": ""}).puh for name, c in raw_contracts.items()
    }
    if clash := set(names) & set(puhs):
        msg = f"names used for both a manager and a contract: {sorted(clash)}"
        raise ScenarioError([{"check": "decode", "message": msg}])
    names.update(puhs)
    names.update({str(k): str(v) for k, v in data.get("bindings", {}).items()})

    unresolved: set[str] = set()
    resolved = _resolve(
        {k: data[k] for k in ("contracts", "nodes") if k in data}, names, unresolved
    )
    if unresolved:
        msg = f"unresolved names {sorted('@' + n for n in unresolved)}"
        raise ScenarioError([{"check": "bindings", "message": msg}])

    return Scenario(
        name=data.get("name", "scenario"),
        description=data.get("description", ""),
        managers=managers,
        contracts={
            name: ContractSpec.from_dict(c) for name, c in resolved.get("contracts", {}).items()
        },
        nodes=tuple(NodeSpec.from_dict(n) for n in resolved.get("nodes", ())),
        time=data.get("time"),
        seed=data.get("seed", 0),
        policy=data.get("policy", "uniform"),
        max_steps=data.get("max_steps", 1000),
        assertions=data.get("assertions", "all"),
        options=dict(data.get("options", {})),
    )


def load(path: str | Path) -> Scenario:
    """Read a scenario JSON file."""
    with Path(path).open() as f:
        data = json.load(f)
    scenario = Scenario.from_dict(data)
    logger.debug("loaded scenario %s from %s", scenario.name, path)
    return scenario


def save(scenario: Scenario, path: str | Path) -> None:
    """Write ``scenario`` as indented JSON."""
    with Path(path).open("w") as f:
        json.dump(scenario.to_dict(), f, indent=2)
        f.write("\n")
