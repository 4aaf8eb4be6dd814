"""Exception and warning types raised by the microgrid model."""


class MicrogridError(Exception):
    """Base class for all errors raised by this package."""


class SingularDenominator(MicrogridError, ZeroDivisionError):
    """A control law or model row divides by a quantity that is (nearly) zero."""


class DomainViolation(UserWarning):
    """The DC bus voltage left its admissible operating box."""


class NoEquilibrium(MicrogridError):
    """A steady-state quadratic has no real root."""


class InfeasibleInput(MicrogridError):
    """A steady-state control input lies outside its saturation bounds."""


class Infeasible(MicrogridError):
    """A requested power allocation cannot be realised with admissible inputs."""


class LyapunovSolveFailure(MicrogridError):
    """The error-dynamics matrix is not Hurwitz, so no certificate exists."""


class StageSingularity(SingularDenominator):
    """A singular denominator was hit inside an integrator stage."""


class NonFiniteState(MicrogridError):
    """The integrated state became NaN or infinite."""


class ScheduleGap(MicrogridError):
    """A reference or disturbance schedule does not cover the simulated horizon."""


class ScenarioError(MicrogridError):
    """Base for problems with scenario files."""

    def __init__(self, errors):
        if isinstance(errors, str):
            errors = [errors]
        self.errors = list(errors)
        super().__init__("; ".join(self.errors))


class ParseError(ScenarioError):
    """The scenario document could not be read as structured text."""


class ValidationError(ScenarioError):
    """The scenario document parsed but violates the schema or invariants."""


class MalformedCsv(MicrogridError):
    """A trajectory CSV does not follow the documented layout."""
