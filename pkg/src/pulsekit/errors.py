"""Exception types shared across the toolkit."""

from __future__ import annotations


class PulsekitError(Exception):
    """Base class for all toolkit errors."""


class InvalidInputError(PulsekitError, ValueError):
    """An argument violates an operation's preconditions."""


class UndefinedStatisticError(PulsekitError, ArithmeticError):
    """A statistic is undefined for the given data (e.g. zero variance)."""


class FormatError(PulsekitError):
    """Base class for on-disk format problems."""


class UnsupportedFormatError(FormatError):
    """File is recognizably not one of ours (bad magic, version, codec)."""


class CorruptFileError(FormatError):
    """File matches the expected format but is truncated or inconsistent."""


class CorruptClipError(FormatError):
    """Clip directory contents disagree with the manifest."""


class SignalParseError(FormatError):
    """A signal CSV row could not be parsed."""

    def __init__(self, message: str, line: int):
        super().__init__(f"line {line}: {message}")
        self.line = line


class IncompleteWeightsError(PulsekitError):
    """A weight file is missing required tensors."""

    def __init__(self, missing: list[str]):
        super().__init__("missing weight tensors: " + ", ".join(sorted(missing)))
        self.missing = sorted(missing)
