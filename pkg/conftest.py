"""Config for doctests and test collection"""

import pytest


@pytest.fixture(autouse=True)
def add_standard_imports(doctest_namespace) -> None:
    import numpy as np

    from chainsem import expr_lang as el

    doctest_namespace["np"] = np
    doctest_namespace["el"] = el

    np.set_printoptions(precision=4)
