"""Exception types shared across the package."""


class StlppcError(Exception):
    """Base class for all library errors."""


class FormulaSyntaxError(StlppcError):
    """Task text does not conform to the formula grammar."""


class TimeBoundOrderError(FormulaSyntaxError):
    """A time window has a > b, or sequenced windows overlap."""


class NonConcaveNegationError(FormulaSyntaxError):
    """Negation applied to an atom whose negated predicate is not concave.

    Only affine atoms (``lin``) may be negated: negating a distance or band
    atom would produce a convex predicate function.
    """


class SelectorOutOfRangeError(StlppcError):
    """An atom reads an agent or state component absent from the layout."""


class WindowNotCoveredError(StlppcError):
    """A trace does not cover the time window a formula asks for."""


class NonFiniteError(StlppcError):
    """An iterate diverged (unbounded objective or broken dynamics)."""


class InfeasibleTaskError(StlppcError):
    """A task's peak smooth robustness is not positive."""


class BadInitialError(StlppcError):
    """Initial robustness incompatible with the requested funnel."""


class DegenerateWindowError(StlppcError):
    """A decaying funnel is requested over an empty time window."""


class FunnelExit(StlppcError):
    """Normalized error left the funnel interior.

    ``side`` is ``"lower"`` or ``"upper"``; ``xi`` carries the offending
    normalized error so the caller can decide what to do with it.
    """

    def __init__(self, side: str, xi: float):
        super().__init__(f"normalized error {xi:.6g} exited on the {side} side")
        self.side = side
        self.xi = xi


class DimensionMismatchError(StlppcError):
    """A state or input vector has the wrong length for its model."""


class ParamMismatchError(StlppcError):
    """Shared funnel parameters of collaborating agents disagree."""


class NonFiniteStateError(StlppcError):
    """Integration produced a non-finite agent state."""


class JumpStormError(StlppcError):
    """The per-step jump pass failed to reach quiescence."""


class ScenarioParseError(StlppcError):
    """Scenario file is missing or not well-formed."""


class ValidationError(StlppcError):
    """Scenario contents violate a documented constraint.

    ``field`` names the offending entry, e.g. ``tasks[0].agent``.
    """

    def __init__(self, field: str, message: str):
        super().__init__(f"{field}: {message}")
        self.field = field
