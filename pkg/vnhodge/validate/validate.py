"""
Lightweight, Pandera-like validation of the tabular parts of an input document. The
parsers flatten algebra blocks, incidence terms and Morse values into DataFrames and
validate them against a schema before any object is built::

    schema = DataFrameSchema(
        "algebra blocks",
        {
            "label": Column(stringlike),
            "n": Column(integer, checks=Check(">=", 1, report_by="label")),
            "mu": Column(numeric, checks=Check(">", 0, report_by="label")),
        },
    )
    schema.validate(df)

All failures of one table are collected and raised together as a ValidationError. Set
the module flag ``raise_error`` to False to only warn.
"""

from dataclasses import dataclass, field
from typing import Any, Iterator

import pandas as pd

from vnhodge.errors import ValidationFailure
from vnhodge.utils import COMPARISON_OPERATORS, warn_user

raise_error = True

warn = warn_user(lambda warning_info: warning_info)


class ValidationError(ValidationFailure):
    code = "ValidationError"


@dataclass(frozen=True, eq=False)
class DtypeGroup:
    """Set of pandas dtypes that satisfy a column requirement, compared with ``==``."""

    name: str
    members: tuple

    def __repr__(self):
        return f"{self.name} type"

    def __eq__(self, other):
        return other in self.members

    def __hash__(self):
        return hash(self.name)


integer = DtypeGroup("integer", (int, "int64", "int32", "Int64", "Int32"))
numeric = DtypeGroup(
    "numeric", integer.members + (float, "float64", "Float64", "Float32")
)
stringlike = DtypeGroup("stringlike", (str, "object", "string", "str"))


@dataclass
class Check:
    """
    Elementwise comparison of a column against a constant or against another column
    of the same table. Failing rows are reported by the values in ``report_by``, or by
    index when the table has no such column.
    """

    operator: str
    reference: Any
    report_by: str = "index"

    def __post_init__(self):
        if self.operator not in COMPARISON_OPERATORS:
            raise ValueError(f"Unknown comparison operator {self.operator!r}")

    def __repr__(self):
        return f"{self.operator} {self.reference}"

    def failures(self, df: pd.DataFrame, column: str) -> list:
        reference = self.reference
        if isinstance(reference, str) and reference in df.columns:
            reference = df[reference]
        passed = COMPARISON_OPERATORS[self.operator](df[column], reference)
        failed = df.index[~passed.to_numpy(dtype=bool)]
        if self.report_by in df.columns:
            return df.loc[failed, self.report_by].tolist()
        return failed.tolist()


@dataclass
class Column:
    required_dtype: DtypeGroup
    checks: Check | list[Check] | None = None

    def __post_init__(self):
        if isinstance(self.checks, Check):
            self.checks = [self.checks]
        self.checks = list(self.checks or [])

    def __repr__(self):
        return f"Column of type {self.required_dtype}"


@dataclass
class DataFrameSchema:
    name: str
    schema: dict[str, Column]
    validationerrors: list[str] = field(default_factory=list, init=False)

    def _column_errors(self, df: pd.DataFrame, name: str, column: Column) -> Iterator[str]:
        if name not in df.columns:
            yield f'During {self.name}: required column "{name}" is missing'
            return
        dtype = df[name].dtype
        if not column.required_dtype == dtype:
            yield (
                f'During {self.name}: datatype in column "{name}" is "{dtype}", but '
                f'is required to be "{column.required_dtype}"'
            )
            return
        for check in column.checks:
            if failed := check.failures(df, name):
                yield (
                    f'During {self.name}: data in column "{name}" failed check '
                    f'"{check}" for {len(failed)} rows: {failed}'
                )

    def validate(self, df: pd.DataFrame):
        self.validationerrors = [
            message
            for name, column in self.schema.items()
            for message in self._column_errors(df, name, column)
        ]
        if not self.validationerrors:
            return
        message = "\n".join(self.validationerrors)
        if raise_error:
            raise ValidationError(message, schema=self.name)
        warn(message)
