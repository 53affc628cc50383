from enum import StrEnum


class GroupKind(StrEnum):
    """
    Kinds of discrete groups a flat bundle can be built over.

    ``CYCLIC`` is Z_n with a single generator, ``COMMUTING`` has finitely many
    commuting generators (Z^k and its quotients), ``TABLE`` is a finite group given by
    its multiplication table and ``FREE`` has no relations at all (fundamental groups
    of graphs).
    """

    CYCLIC = "cyclic"
    COMMUTING = "commuting"
    TABLE = "table"
    FREE = "free"

    @classmethod
    def from_user_input(cls, value: str) -> "GroupKind":
        try:
            return cls(value.lower())
        except ValueError:
            options = ", ".join(k.value for k in cls)
            raise ValueError(f"Unknown group kind {value!r}, use one of: {options}")


class OutputFormat(StrEnum):
    JSON = "json"
    CSV = "csv"
    PARQUET = "parquet"
    NETCDF = "netcdf"

    @property
    def is_binary(self) -> bool:
        return self in (OutputFormat.PARQUET, OutputFormat.NETCDF)


class Command(StrEnum):
    VALIDATE = "validate"
    DIM = "dim"
    BETTI = "betti"
    DENSITY = "density"
    TRUNCATE = "truncate"
    WITTEN = "witten"
    COMPARE = "compare"
    FARBER = "farber"
