"""Error hierarchy shared by every package; each class knows its CLI exit code."""
from typing import Optional


class RnngError(Exception):
    """Base class for all toolkit errors."""
    exit_code = 1


class DataError(RnngError, ValueError):
    """Malformed or inconsistent input data."""
    exit_code = 2


class ConfigError(RnngError, ValueError):
    """Invalid configuration, unknown keys or incompatible checkpoints."""
    exit_code = 3


class NumericalError(RnngError, ArithmeticError):
    """NaN or Inf detected in a forward or backward pass."""
    exit_code = 4


class TreeParseError(DataError):
    def __init__(self, message: str, line: int, column: int):
        super().__init__(f"{message} (line {line}, column {column})")
        self.line = line
        self.column = column


class IllegalActionError(DataError):
    def __init__(self, message: str, index: Optional[int] = None, diagnostic: str = ""):
        where = f" at action {index}" if index is not None else ""
        detail = f" [{diagnostic}]" if diagnostic else ""
        super().__init__(f"{message}{where}{detail}")
        self.index = index
        self.diagnostic = diagnostic


class YieldMismatchError(DataError):
    def __init__(self, index: int, detail: str = ""):
        super().__init__(f"Token yields differ for sentence {index}" + (f": {detail}" if detail else ""))
        self.index = index


class AlignmentError(DataError):
    """Attention records do not line up with the constituents of a tree."""


class VocabularyMismatchError(DataError):
    def __init__(self, symbol: str, detail: str = ""):
        super().__init__(f"Vocabulary mismatch on symbol '{symbol}'" + (f": {detail}" if detail else ""))
        self.symbol = symbol


class TruncatedSampleError(DataError):
    """Sampling hit a length/depth/action limit or a dead end before finishing."""
