"""Exception types shared across the package.

Each maps onto a CLI exit code (see ``fxreserves.cli``).
"""

from __future__ import annotations


class FxReservesError(Exception):
    exit_code = 1


class ConfigError(FxReservesError, ValueError):
    """Invalid or out-of-range run configuration."""

    exit_code = 2

    def __init__(self, message: str, field: str | None = None):
        self.field = field
        super().__init__(f"{field}: {message}" if field else message)


class DataError(FxReservesError, ValueError):
    """Malformed, missing, or misaligned input data.

    ``path``, ``row`` and ``field`` locate the offending record when known.
    Rows are counted from 1 at the header line, so the first data record is
    row 2, matching what a spreadsheet shows.
    """

    exit_code = 3

    def __init__(self, message: str, path=None, row: int | None = None,
                 field: str | None = None):
        self.path = path
        self.row = row
        self.field = field
        where = []
        if path is not None:
            where.append(str(path))
        if row is not None:
            where.append(f"row {row}")
        if field is not None:
            where.append(f"field {field!r}")
        prefix = ", ".join(where)
        super().__init__(f"{prefix}: {message}" if prefix else message)


class NumericalError(FxReservesError, ArithmeticError):
    """A numerical failure, e.g. every particle weight underflowing."""

    exit_code = 4
