"""Exception hierarchy for derevb.

All library errors derive from DerevbError so the CLI can catch them in one
place and print a machine-readable JSON document instead of a traceback.

Classes:
    DerevbError: Base class, carries an optional dotted field path.
    InvalidInput: Pre-condition violated by a caller-supplied value.
    ShapeError: Operand shapes are incompatible.
    NumericalError: A computation produced or would produce non-finite values.
    GraphError: The autodiff graph is missing or was used out of order.
    ConfigError: A config document violates the schema.
    ManifestError: A dataset manifest line is malformed.
    TrainingDiverged: Training hit a non-finite loss.
"""

from __future__ import annotations

from pathlib import Path
from typing import Any, Optional


class DerevbError(Exception):
    """Base class for all derevb errors.

    Attributes:
        message: Human-readable description.
        field: Optional dotted path of the offending field (config, manifest).
    """

    def __init__(self, message: str, field: Optional[str] = None) -> None:
        super().__init__(message)
        self.message = message
        self.field = field

    def to_dict(self) -> dict[str, Any]:
        """Render the error as a JSON-serializable dict.

        Returns:
            Dict with "error" (class name), "message" and, when set, "field".
        """
        body: dict[str, Any] = {
            "error": self.__class__.__name__,
            "message": self.message,
        }
        if self.field is not None:
            body["field"] = self.field
        return body


class InvalidInput(DerevbError, ValueError):
    """A caller-supplied value violates an operation's pre-condition."""


class ShapeError(DerevbError, ValueError):
    """Operand shapes are incompatible."""


class NumericalError(DerevbError, ArithmeticError):
    """A computation cannot produce a finite result."""


class GraphError(DerevbError, RuntimeError):
    """Backward was requested on a tensor with no recorded graph."""


class ConfigError(DerevbError, ValueError):
    """A configuration document violates the schema."""


class ManifestError(DerevbError, ValueError):
    """A manifest record is malformed.

    Attributes:
        line: 1-based line number in the manifest file, when known.
    """

    def __init__(
        self, message: str, field: Optional[str] = None, line: Optional[int] = None
    ) -> None:
        super().__init__(message, field=field)
        self.line = line

    def to_dict(self) -> dict[str, Any]:
        body = super().to_dict()
        if self.line is not None:
            body["line"] = self.line
        return body


class TrainingDiverged(NumericalError):
    """Training produced a non-finite loss.

    Attributes:
        step: Step at which the loss became non-finite.
        checkpoint: Path of the last checkpoint written with finite parameters.
    """

    def __init__(
        self, message: str, step: int, checkpoint: Optional[Path] = None
    ) -> None:
        super().__init__(message)
        self.step = step
        self.checkpoint = checkpoint

    def to_dict(self) -> dict[str, Any]:
        body = super().to_dict()
        body["step"] = self.step
        if self.checkpoint is not None:
            body["checkpoint"] = str(self.checkpoint)
        return body
