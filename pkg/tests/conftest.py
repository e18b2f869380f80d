# mypy: disable-error-code="no-untyped-def, no-untyped-call"
from __future__ import annotations

import numpy as np
import pytest

from chainsem.options import set_options

from .builders import make_config, pay


@pytest.fixture
def rng():
    return np.random.default_rng(123)


@pytest.fixture(autouse=True)
def _in_process():
    with set_options(joblib_use=False):
        yield


@pytest.fixture
def transfer_config():
    return make_config(
        {"alice": 100, "bob": 50}, [(["alice"], [pay("alice", "bob", 10)]), (["bob"], [])]
    )
