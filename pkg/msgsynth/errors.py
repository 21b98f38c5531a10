"""
Exception hierarchy and diagnostic records shared by the toolkit.

Diagnostic operations (validators, monitors) return lists of ``Violation``
records; everything else raises a subclass of ``MsgSynthError``.
"""

from dataclasses import dataclass
from typing import Iterable, Optional, Tuple


@dataclass(frozen=True)
class Violation:
    """A single finding of a validator or monitor."""

    code: str
    message: str
    location: Optional[str] = None

    def __str__(self) -> str:
        where = f" [{self.location}]" if self.location else ""
        return f"{self.code}{where}: {self.message}"


class MsgSynthError(Exception):
    """Base class for all toolkit errors."""


class InvalidBmscError(MsgSynthError):
    """A chart violates the bMSC invariants."""

    def __init__(self, message: str, violations: Iterable[Violation] = ()):
        super().__init__(message)
        self.violations: Tuple[Violation, ...] = tuple(violations)


class CompositionError(MsgSynthError):
    """Weak composition produced a chart that breaks the FIFO condition."""

    def __init__(self, message: str, witness: Tuple = ()):
        super().__init__(message)
        self.witness = witness


class SizeLimitError(MsgSynthError):
    """An enumeration guard was exceeded."""

    def __init__(self, message: str, size: int, cap: int):
        super().__init__(message)
        self.size = size
        self.cap = cap


class PathError(MsgSynthError):
    """A node sequence is not a path (or run) of the graph."""


class GraphError(MsgSynthError):
    """An unknown node was referenced or the graph is malformed."""


class StructuralError(MsgSynthError):
    """The graph structure contradicts an analysis precondition."""


class NotControllableError(MsgSynthError):
    """Synthesis was requested for a graph outside the controllable class."""

    def __init__(self, message: str, nodes: Iterable[str] = ()):
        super().__init__(message)
        self.nodes: Tuple[str, ...] = tuple(nodes)


class SynthesisError(MsgSynthError):
    """Internal inconsistency detected while building process machines."""


class StepError(MsgSynthError):
    """A configuration step was requested for a disabled move."""


class SpecError(MsgSynthError):
    """Base class for specification-language errors with a source location."""

    def __init__(
        self,
        message: str,
        line: Optional[int] = None,
        column: Optional[int] = None,
        source: str = "<spec>",
    ):
        self.line = line
        self.column = column
        self.source = source
        super().__init__(self.render(message))
        self.detail = message

    def render(self, message: str) -> str:
        if self.line is None:
            return f"{self.source}: {message}"
        return f"{self.source}:{self.line}:{self.column}: {message}"


class SpecSyntaxError(SpecError):
    """The source text does not follow the grammar."""


class SpecSemanticError(SpecError):
    """The source parsed but references unknown ids or breaks an invariant."""


class ExportError(MsgSynthError):
    """Structured data could not be imported back."""
