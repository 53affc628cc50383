from numbers import Number
from typing import Any, NamedTuple

import numpy as np


class Location(NamedTuple):
    """JSON pointer into a parsed document, used in ParseError reports."""

    parts: tuple[str, ...] = ()

    def __truediv__(self, part: Any) -> "Location":
        return Location(self.parts + (str(part),))

    def __str__(self):
        return "/" + "/".join(self.parts)


def decode_entry(value: Any) -> complex:
    """A matrix entry: a plain number or a [re, im] pair."""
    if isinstance(value, bool):
        raise TypeError("booleans are not matrix entries")
    if isinstance(value, Number):
        return complex(value)
    if isinstance(value, (list, tuple)) and len(value) == 2:
        re, im = value
        if isinstance(re, Number) and isinstance(im, Number):
            return complex(float(re), float(im))
    raise TypeError(f"matrix entry must be a number or [re, im], got {value!r}")


def decode_matrix(value: Any, shape: tuple[int, int]) -> np.ndarray:
    """
    Decode a nested list of entries into a complex matrix of the expected shape. An
    empty list stands for an empty block.
    """
    if not isinstance(value, list):
        raise TypeError(f"matrix must be a list of rows, got {type(value).__name__}")
    if shape[0] * shape[1] == 0:
        if any(len(row) for row in value if isinstance(row, list)):
            raise ValueError(f"expected an empty block of shape {shape}")
        return np.zeros(shape, dtype=complex)
    rows = [[decode_entry(x) for x in row] for row in value]
    if len(rows) != shape[0] or any(len(row) != shape[1] for row in rows):
        got = (len(rows), len(rows[0]) if rows else 0)
        raise ValueError(f"expected shape {shape}, got {got}")
    return np.array(rows, dtype=complex)


def encode_matrix(matrix: np.ndarray) -> list:
    """Inverse of :func:`decode_matrix`: nested lists of [re, im] pairs."""
    return [[[float(z.real), float(z.imag)] for z in row] for row in np.asarray(matrix)]


def decode_word(value: Any) -> tuple[tuple[str, int], ...]:
    """A group element as a list of [generator, exponent] pairs."""
    word = []
    for pair in value:
        generator, exponent = pair
        if not isinstance(generator, str) or int(exponent) != exponent:
            raise TypeError(f"word letters are [generator, integer], got {pair!r}")
        word.append((generator, int(exponent)))
    return tuple(word)


def expect_object(value: Any) -> dict:
    if not isinstance(value, dict):
        raise TypeError(f"must be a JSON object, got {type(value).__name__}")
    return value


def expect_array(value: Any) -> list:
    if not isinstance(value, list):
        raise TypeError(f"must be a JSON array, got {type(value).__name__}")
    return value
