import logging
import math
import operator
import warnings
from concurrent.futures import ThreadPoolExecutor
from functools import wraps
from typing import Any, Callable, Iterable, TypeVar

import numpy as np

from vnhodge import config

logger = logging.getLogger("vnhodge")

T = TypeVar("T")
R = TypeVar("R")

COMPARISON_OPERATORS = {
    "<": operator.lt,
    "<=": operator.le,
    "==": operator.eq,
    "!=": operator.ne,
    ">=": operator.ge,
    ">": operator.gt,
}


def warn_user(func):
    """
    Turn a message builder into a user warning. The message is logged at WARNING level
    and issued as a Python warning of the given ``category`` so callers can filter or
    capture it.
    """

    @wraps(func)
    def inner(*args, category: type[Warning] = UserWarning, **kwargs):
        message = func(*args, **kwargs)
        logger.warning(message)
        warnings.warn(message, category, stacklevel=3)
        return message

    return inner


def inform_user(func):
    @wraps(func)
    def inner(*args, **kwargs):
        message = func(*args, **kwargs)
        logger.info(message)
        return message

    return inner


def parallel_map(
    func: Callable[[T], R], items: Iterable[T], jobs: int | None = None
) -> list[R]:
    """
    Apply a function to every item, optionally on a thread pool. Output order always
    equals input order, so results do not depend on the parallelism degree.

    Parameters
    ----------
    func : Callable
        Function to apply.
    items : Iterable
        Items to map over.
    jobs : int, optional
        Number of worker threads. Defaults to :data:`vnhodge.config.N_JOBS`.

    Returns
    -------
    list
        Results in input order.

    """
    jobs = config.N_JOBS if jobs is None else jobs
    items = list(items)
    if jobs <= 1 or len(items) <= 1:
        return [func(item) for item in items]
    with ThreadPoolExecutor(max_workers=jobs) as pool:
        return list(pool.map(func, items))


def parse_grid(spec: str, default_scale: str = "lin") -> np.ndarray:
    """
    Parse a grid specification of the form ``lo:hi:steps`` or ``lo:hi:steps:log``.

    Parameters
    ----------
    spec : str
        Grid specification.
    default_scale : str, optional
        "lin" or "log", used when the scale is omitted. The default is "lin".

    Returns
    -------
    np.ndarray
        Strictly increasing grid.

    Raises
    ------
    ValueError
        If the specification is malformed or does not give an increasing grid.

    Examples
    --------
    >>> parse_grid("1:10:10")
    >>> parse_grid("1e-4:1e-2:25:log")

    """
    parts = spec.split(":")
    if len(parts) not in (3, 4):
        raise ValueError(f"Grid must be 'lo:hi:steps[:log|lin]', got {spec!r}")
    lo, hi, steps = float(parts[0]), float(parts[1]), int(parts[2])
    scale = parts[3] if len(parts) == 4 else default_scale
    if steps < 1:
        raise ValueError(f"Grid needs at least one step, got {steps}")
    if scale == "log":
        if lo <= 0 or hi <= 0:
            raise ValueError("Logarithmic grids need positive bounds")
        grid = np.logspace(math.log10(lo), math.log10(hi), steps)
    elif scale == "lin":
        grid = np.linspace(lo, hi, steps)
    else:
        raise ValueError(f"Unknown grid scale {scale!r}, use 'lin' or 'log'")
    check_increasing(grid, "grid")
    return grid


def check_increasing(values: np.ndarray, name: str, positive: bool = False):
    values = np.asarray(values, dtype=float)
    if values.size == 0:
        raise ValueError(f"{name} is empty")
    if np.any(np.diff(values) <= 0):
        raise ValueError(f"{name} must be strictly increasing")
    if positive and values[0] <= 0:
        raise ValueError(f"{name} must be positive")


def max_abs(array: np.ndarray) -> float:
    """Largest entry modulus of an array, 0 for empty arrays."""
    if array.size == 0:
        return 0.0
    return float(np.max(np.abs(array)))


def json_safe(value: Any) -> Any:
    """
    Recursively convert numpy scalars and arrays to plain Python objects and replace
    NaN and infinities by None, so reports are valid JSON.
    """
    if isinstance(value, dict):
        return {str(k): json_safe(v) for k, v in value.items()}
    if isinstance(value, (list, tuple)):
        return [json_safe(v) for v in value]
    if isinstance(value, np.ndarray):
        return [json_safe(v) for v in value.tolist()]
    if isinstance(value, (np.bool_, bool)):
        return bool(value)
    if isinstance(value, (np.integer,)):
        return int(value)
    if isinstance(value, (np.floating, float)):
        value = float(value)
        return value if math.isfinite(value) else None
    if isinstance(value, (np.complexfloating, complex)):
        return [json_safe(value.real), json_safe(value.imag)]
    return value
