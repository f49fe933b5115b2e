"""Exception hierarchy shared across the toolkit."""

from __future__ import annotations


class QSimError(Exception):
    """Base class for every error raised by qsimkit."""


class InvalidProgramError(QSimError, ValueError):
    """A Program failed validation."""

    def __init__(self, diagnostics):
        self.diagnostics = list(diagnostics)
        lines = "; ".join(str(d) for d in self.diagnostics[:5])
        more = f" (+{len(self.diagnostics) - 5} more)" if len(self.diagnostics) > 5 else ""
        super().__init__(f"invalid program: {lines}{more}")


class NonUnitaryError(QSimError, ValueError):
    pass


class FlatCircuitRequired(QSimError, ValueError):
    """Raised where only straight-line circuits are accepted."""


class NonTerminationGuard(QSimError, RuntimeError):
    """A QWhile loop exceeded its iteration guard."""


class BudgetExceeded(QSimError, RuntimeError):
    def __init__(self, estimated: int, budget: int):
        self.estimated = estimated
        self.budget = budget
        super().__init__(f"path count {estimated} exceeds budget {budget}")


class Unsupported(QSimError, ValueError):
    """An operation has no rule for the given gate or construct."""


class CompilationError(QSimError, RuntimeError):
    pass


class TopologyError(QSimError, ValueError):
    pass


class NoiseModelError(QSimError, ValueError):
    pass


class NonHermitianError(QSimError, ValueError):
    pass


class ParameterPositionError(QSimError, ValueError):
    """A symbolic parameter sits where the shift rule does not apply."""
