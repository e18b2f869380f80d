"""Config file for nox."""

# * Imports ----------------------------------------------------------------------------
from __future__ import annotations

import os
import shutil
from pathlib import Path

import nox  # type: ignore[unused-ignore,import]

# * Names ------------------------------------------------------------------------------

PACKAGE_NAME = "chainsem"
IMPORT_NAME = "chainsem"

# * nox options ------------------------------------------------------------------------

ROOT = Path(__file__).parent

nox.options.reuse_existing_virtualenvs = True
nox.options.sessions = ["test"]

# * Options ---------------------------------------------------------------------------

PYTHON_ALL_VERSIONS = ["3.10", "3.11", "3.12"]
PYTHON_DEFAULT_VERSION = "3.11"

ALL_KWS = {"python": PYTHON_ALL_VERSIONS}
DEFAULT_KWS = {"python": PYTHON_DEFAULT_VERSION}


# * Sessions ---------------------------------------------------------------------------
def _test(session: nox.Session, no_cov: bool = False) -> None:
    opts = list(session.posargs)
    if not no_cov:
        session.env["COVERAGE_FILE"] = str(Path(session.create_tmp()) / ".coverage")
        if not any(o.startswith("--cov") for o in opts):
            opts.append(f"--cov={IMPORT_NAME}")

    # keep temporary folders outside the repo
    tmpdir = os.environ.get("TMPDIR", None)
    if tmpdir:
        session.env["TMPDIR"] = tmpdir

    session.run("pytest", *opts)


# *** Basic tests
@nox.session(**ALL_KWS)  # type: ignore[arg-type]
def test(session: nox.Session) -> None:
    """
    Run the test suite, doctests included.

    Extra arguments go to pytest, e.g. ``nox -s test -- -k scheduler``, or
    ``nox -s test -- -m slow`` for the large randomized suites.
    """
    session.install("-e", ".[test]")
    _test(session)


@nox.session(name="test-cli", **DEFAULT_KWS)  # type: ignore[arg-type]
def test_cli(session: nox.Session) -> None:
    """Run the bundled auction scenario end to end through the command line."""
    session.install(".")
    session.run("chainsem", "typecheck", "auction")
    session.run("chainsem", "run", "auction", "--sweep", "20", "--assert", "all")
    session.run("chainsem", "explore", "auction_solo", "--depth", "6")


@nox.session(**DEFAULT_KWS)  # type: ignore[arg-type]
def lint(session: nox.Session) -> None:
    """Run ruff, checking then formatting, on the sources, tests and this file."""
    session.install("ruff")
    paths = session.posargs or ["src", "tests", "noxfile.py"]
    session.run("ruff", "check", *paths)
    session.run("ruff", "format", "--check", *paths)


# ** type checking
@nox.session(**ALL_KWS)  # type: ignore[arg-type]
def typing(session: nox.Session) -> None:
    """Run mypy, with ``clean`` as first argument to drop its cache."""
    session.install("-e", ".[typing,mypy]")
    cache = Path(session.create_tmp()) / ".mypy_cache"
    session.env["MYPY_CACHE_DIR"] = str(cache)

    args = list(session.posargs)
    if args[:1] == ["clean"]:
        args = args[1:]
        if cache.exists():
            session.log(f"removing cache {cache}")
            shutil.rmtree(str(cache))

    session.run("mypy", "--color-output", *(args or ["src", "tests"]))
