"""Exception types shared across the package."""

from __future__ import annotations


class ChartCalcError(Exception):
    """Base class for all domain errors raised by chartcalc."""


class ParseError(ChartCalcError):
    """A text-format document failed to parse.

    Carries the 1-based line number when known.
    """

    def __init__(self, message: str, line: int | None = None):
        self.line = line
        if line is not None:
            message = f"line {line}: {message}"
        super().__init__(message)


class NotApplicable(ChartCalcError):
    """A move or rewrite rule was bound to elements that do not satisfy
    its structural preconditions."""


class NoFreeEdge(ChartCalcError):
    """A planner pipeline requires at least one free edge (b > 0)."""


class NotWeakSimplified(ChartCalcError):
    """Input to the weak-to-full pipeline is not in weak simplified form."""


class MissingLabels(ChartCalcError):
    """A state offered to the weak-to-full pipeline does not carry every
    label 1..N-1.

    A connected covering of degree N forces every label to appear (the
    monodromy transpositions must generate a transitive group), so states
    missing labels fall outside the scope of the bound being certified.
    """


class CapExceeded(ChartCalcError):
    """A bounded search or reduction hit its configured cap before
    reaching a decision.  ``stats`` holds counters for diagnostics."""

    def __init__(self, message: str, stats: dict | None = None):
        super().__init__(message)
        self.stats = dict(stats or {})


class WordProblemUndecided(CapExceeded):
    """Handle reduction hit the step cap; equality is reported as
    undecided rather than guessed."""


class StepFailed(ChartCalcError):
    """A derivation or script step could not be applied during replay."""

    def __init__(self, index: int, reason: str):
        self.index = index
        self.reason = reason
        super().__init__(f"step {index}: {reason}")


class EndMismatch(ChartCalcError):
    """Replay finished but the final state differs from the expected one."""

    def __init__(self, diff: str):
        self.diff = diff
        super().__init__(f"final state differs from expected:\n{diff}")
