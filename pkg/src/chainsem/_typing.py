"""
Typing definitions for :mod:`chainsem`
======================================
"""

from __future__ import annotations

from typing import TYPE_CHECKING, Any, Callable, Literal, Mapping, TypeVar, Union

from ._typing_compat import TypeAlias

if TYPE_CHECKING:
    # Note: use fully qualified names
    import chainsem.chain_state
    import chainsem.core_types


__all__ = [
    "AssertionNames",
    "ContractTyEnv",
    "Contractors",
    "JSONDict",
    "Managers",
    "Pool",
    "PolicyName",
    "R",
    "T",
    "TyEnv",
]

R = TypeVar("R")
T = TypeVar("T")

FuncType = Callable[..., Any]

JSONDict: TypeAlias = "dict[str, Any]"
"""Alias for a decoded JSON object."""

TyEnv: TypeAlias = "Mapping[str, chainsem.core_types.Ty]"
"""Variable typing environment (Gamma)."""

ContractTyEnv: TypeAlias = "Mapping[str, chainsem.core_types.TPair]"
"""Contract typing environment (Delta)."""

Managers: TypeAlias = "Mapping[str, chainsem.chain_state.ManagerEntry]"
Contractors: TypeAlias = "Mapping[str, chainsem.chain_state.ContractorEntry]"
Pool: TypeAlias = "Mapping[str, chainsem.chain_state.PoolEntry]"

PolicyName = Literal["uniform", "accept-eager", "timeout-forcing"]
"""Names of the preset scheduling policies."""

AssertionNames: TypeAlias = Union[str, "list[str]", "tuple[str, ...]", None]
