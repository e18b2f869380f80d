"""
Options (:mod:`~chainsem.options`)
==================================
"""

from __future__ import annotations

from typing import TYPE_CHECKING, Any, Callable, TypedDict, cast

if TYPE_CHECKING:
    from types import TracebackType

ValidatorFunc = Callable[[Any], bool]


class Options(TypedDict, total=False):
    """Options."""

    min_fee: int
    acceptance_window: int
    pool_cap: int | None
    empty_blocks: bool
    int_bits: int

    tqdm_use: bool
    tqdm_len_calc: int
    tqdm_leave: bool
    tqdm_bar: str

    joblib_use: bool
    joblib_n_jobs: int
    joblib_backend: str | None
    joblib_kws: dict[str, Any]
    joblib_len_calc: int


class OptionsReq(TypedDict, total=True):
    """Options with required parameters."""

    min_fee: int
    acceptance_window: int
    pool_cap: int | None
    empty_blocks: bool
    int_bits: int

    tqdm_use: bool
    tqdm_len_calc: int
    tqdm_leave: bool
    tqdm_bar: str

    joblib_use: bool
    joblib_n_jobs: int
    joblib_backend: str | None
    joblib_kws: dict[str, Any]
    joblib_len_calc: int


class Validators(TypedDict):
    """Validators."""

    min_fee: ValidatorFunc
    acceptance_window: ValidatorFunc
    pool_cap: ValidatorFunc
    empty_blocks: ValidatorFunc
    int_bits: ValidatorFunc

    tqdm_use: ValidatorFunc
    tqdm_len_calc: ValidatorFunc
    tqdm_leave: ValidatorFunc
    tqdm_bar: ValidatorFunc

    joblib_use: ValidatorFunc
    joblib_n_jobs: ValidatorFunc
    joblib_backend: ValidatorFunc
    joblib_kws: ValidatorFunc
    joblib_len_calc: ValidatorFunc


OPTIONS: OptionsReq = {
    "min_fee": 1,
    "acceptance_window": 60,
    "pool_cap": None,
    "empty_blocks": True,
    "int_bits": 64,
    "tqdm_use": False,
    "tqdm_len_calc": 100,
    "tqdm_leave": False,
    "tqdm_bar": "default",
    "joblib_use": True,
    "joblib_n_jobs": -1,
    "joblib_backend": None,
    "joblib_kws": {},
    "joblib_len_calc": 50,
}


def _isbool(x: Any) -> bool:
    return isinstance(x, bool)


def _isint(x: Any) -> bool:
    return isinstance(x, int) and not isinstance(x, bool)


def _isnonneg(x: Any) -> bool:
    return _isint(x) and x >= 0


def _ispositive_or_none(x: Any) -> bool:
    return x is None or (_isint(x) and x > 0)


def _isstr(x: Any) -> bool:
    return isinstance(x, str)


def _isdict(x: Any) -> bool:
    return isinstance(x, dict)


def _isstr_or_none(x: Any) -> bool:
    return x is None or _isstr(x)


_VALIDATORS: Validators = {
    "min_fee": _isnonneg,
    "acceptance_window": _isnonneg,
    "pool_cap": _ispositive_or_none,
    "empty_blocks": _isbool,
    "int_bits": lambda x: _isint(x) and 8 <= x <= 128,
    "tqdm_use": _isbool,
    "tqdm_len_calc": _isint,
    "tqdm_leave": _isbool,
    "tqdm_bar": lambda x: x in {"default", "text", "notebook"},
    "joblib_use": _isbool,
    "joblib_n_jobs": _isint,
    "joblib_backend": _isstr_or_none,
    "joblib_kws": _isdict,
    "joblib_len_calc": _isint,
}

_SETTERS: dict[str, Any] = {}


def _apply_update(options_dict: Options) -> None:
    for k, v in options_dict.items():
        if k in _SETTERS:
            _SETTERS[k](v)
    OPTIONS.update(options_dict)


SEMANTIC_KEYS = ("min_fee", "acceptance_window", "pool_cap", "empty_blocks", "int_bits")
"""Options that change which transitions are enabled or what they do."""


def snapshot() -> Options:
    """Copy of the current option values."""
    return cast(Options, dict(OPTIONS))


def semantic_snapshot() -> Options:
    """Copy of the current values of :data:`SEMANTIC_KEYS`."""
    return cast(Options, {k: OPTIONS[k] for k in SEMANTIC_KEYS})  # type: ignore[literal-required]


class set_options:  # noqa: N801
    """
    Set options for chainsem in a controlled context.
    Currently supported options:

    * `min_fee` : flat minimum fee accepted by the fee check.  Default=1
    * `acceptance_window` : maximal ``t - t_inject`` for inclusion.  Default=60
    * `pool_cap` : if set, maximal number of pending pool entries.  The oldest
      pending entry times out when an injection exceeds the cap.
    * `empty_blocks` : if `True`, time may advance by an empty block while
      some operation is pending.
    * `int_bits` : width of checked integer arithmetic.  Default=64
    * `tqdm_use` : if `True`, use progress bar where appropriate
    * `tqdm_len_calc` : min number of items for using bar in sweeps
    * `tqdm_leave` : if True, leave bar after execution.  Default=False
    * `joblib_use` : if `True`, use joblib for seed sweeps
    * `joblib_n_jobs` : number of processors to use, default=all processors
    * `joblib_backend` : backend to use.
    * `joblib_kws` : dictionary of arguments to joblib.Parallel.
    * `joblib_len_calc` : min number of seeds to run in parallel

    Examples
    --------
    You can use ``set_options`` either as a context manager:

    >>> import chainsem
    >>> with chainsem.set_options(min_fee=5):
    ...     chainsem.OPTIONS["min_fee"]
    5

    Or to set global options:

    >>> _ = chainsem.set_options(tqdm_len_calc=50)
    """

    def __init__(self, **kwargs: Any) -> None:
        self.old: Options = {}
        for k, v in cast(Options, kwargs).items():
            if k not in OPTIONS:
                msg = f"argument name {k!r} is not in the set of valid options {set(OPTIONS)!r}"
                raise ValueError(msg)
            if k in _VALIDATORS and not _VALIDATORS[k](v):  # type: ignore[literal-required]
                msg = f"option {k!r} given an invalid value: {v!r}"
                raise ValueError(msg)
            self.old[k] = OPTIONS[k]  # type: ignore[literal-required]
        _apply_update(cast(Options, kwargs))

    def __enter__(self) -> None:
        return

    def __exit__(
        self,
        type: type[BaseException] | None,  # noqa: A002
        value: BaseException | None,
        traceback: TracebackType | None,
    ) -> None:
        _apply_update(self.old)
