"""Exception types. Every error carries a short machine-readable ``code``."""

from __future__ import annotations

from dataclasses import dataclass


class SibhistError(ValueError):
    code = "ERROR"

    def __init__(self, message: str, code: str | None = None):
        super().__init__(message)
        if code is not None:
            self.code = code


@dataclass(frozen=True)
class Issue:
    code: str
    file: str
    row: int  # 1-based data row; header is row 0
    message: str

    def __str__(self) -> str:
        return f"{self.file}:{self.row}: {self.code}: {self.message}"


class DataError(SibhistError):
    """Input files failed validation. ``issues`` lists every offending row."""

    code = "INVALID_DATA"

    def __init__(self, issues: list[Issue]):
        self.issues = list(issues)
        codes = sorted({i.code for i in self.issues})
        head = "\n".join(str(i) for i in self.issues[:20])
        more = len(self.issues) - 20
        tail = f"\n... and {more} more" if more > 0 else ""
        super().__init__(f"{len(self.issues)} invalid row(s)\n{head}{tail}",
                         codes[0] if len(codes) == 1 else "INVALID_DATA")

    @property
    def codes(self) -> set[str]:
        return {i.code for i in self.issues}


class OverlappingCellsError(SibhistError):
    code = "OVERLAPPING_CELLS"


class ZeroExposureError(SibhistError):
    code = "ZERO_EXPOSURE"


class UndefinedTermError(SibhistError):
    code = "UNDEFINED_TERM"


class SingletonStratumError(SibhistError):
    code = "SINGLETON_STRATUM"


class UndefinedFactorError(SibhistError):
    code = "DIVISION_BY_ZERO"


class ZeroTruthError(SibhistError):
    code = "ZERO_TRUTH"


class EmptySeedError(SibhistError):
    code = "EMPTY_SEED"
