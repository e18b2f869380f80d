"""Publicly accessible classes/routines."""

from typing import TYPE_CHECKING

if TYPE_CHECKING:
    from . import (  # noqa: TCH004
        chain_state,
        codec,
        contract_stubs,
        core_types,
        dsl,
        examples,
        expr_lang,
        invariants,
        node_runtime,
        scenario,
        scheduler,
        type_checker,
    )
    from .options import OPTIONS, set_options  # noqa: TCH004
    from .scenario import Scenario  # noqa: TCH004
    from .scheduler import Config, explore, run  # noqa: TCH004
else:
    import lazy_loader as lazy

    __getattr__, __dir__, _ = lazy.attach(
        __name__,
        submodules=[
            "chain_state",
            "codec",
            "contract_stubs",
            "core_types",
            "dsl",
            "examples",
            "expr_lang",
            "invariants",
            "node_runtime",
            "scenario",
            "scheduler",
            "type_checker",
        ],
        submod_attrs={
            "options": ["OPTIONS", "set_options"],
            "scenario": ["Scenario"],
            "scheduler": ["Config", "explore", "run"],
        },
    )


# updated versioning scheme
from importlib.metadata import PackageNotFoundError
from importlib.metadata import version as _version

try:
    __version__ = _version("chainsem")
except PackageNotFoundError:  # pragma: no cover
    __version__ = "999"

__author__ = """chainsem developers"""


__all__ = [
    "OPTIONS",
    "Config",
    "Scenario",
    "__author__",
    "__version__",
    "chain_state",
    "codec",
    "contract_stubs",
    "core_types",
    "dsl",
    "examples",
    "explore",
    "expr_lang",
    "invariants",
    "node_runtime",
    "run",
    "scenario",
    "scheduler",
    "set_options",
    "type_checker",
]
