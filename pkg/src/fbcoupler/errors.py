"""Exception types shared across the engine."""

from __future__ import annotations


class EngineError(Exception):
    """Base class for every error raised by this package."""


class _ContextualError(EngineError):
    """Error carrying a machine-readable code plus optional file context."""

    def __init__(
        self,
        message: str,
        *,
        code: str = "invalid",
        path: str | None = None,
        line: int | None = None,
        field: str | None = None,
    ) -> None:
        self.message = message
        self.code = code
        self.path = path
        self.line = line
        self.field = field
        parts = []
        if path is not None:
            parts.append(str(path))
        if line is not None:
            parts.append(f"line {line}")
        if field is not None:
            parts.append(f"field '{field}'")
        prefix = ", ".join(parts)
        super().__init__(f"[{code}] {prefix + ': ' if prefix else ''}{message}")


class ParseError(_ContextualError):
    """Input file is structurally malformed (bad syntax, wrong header, bad type)."""

    def __init__(self, message: str, *, code: str = "malformed", **kw) -> None:
        super().__init__(message, code=code, **kw)


class ValidationError(_ContextualError):
    """A domain-type invariant or precondition was violated."""


class UnbalancedInjections(EngineError):
    """Nodal injections (or zonal net positions) do not sum to zero."""


class IslandedNetwork(EngineError):
    """The in-service AC graph is not a single connected island."""


class MissingGsk(EngineError):
    """A zone has no generation-shift-key weights."""


class UnknownElement(EngineError):
    """A referenced branch, corridor or node does not exist (or is unavailable)."""


class ZoneMismatch(EngineError):
    """Zones of an input object do not match the zones of the domain."""


class Infeasible(EngineError):
    """The coupling problem has no feasible point (cannot occur on AMR-positive domains)."""


class CascadeLimitExceeded(EngineError):
    """Protection schemes kept firing past the simulation round cap."""


class MismatchedResult(EngineError):
    """A coupling result does not belong to the order book it is combined with."""


class DuplicateRecord(EngineError):
    """Two snapshot records share the same CNEC id and hour."""


class UnknownHour(EngineError):
    """The requested hour does not occur in the record set."""
