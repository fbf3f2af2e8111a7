"""Exception types shared across the package."""


class ValidationError(ValueError):
    """An input violates a documented invariant; the message names the field."""


class DegeneratePlacementError(ValidationError):
    """Two coils share a center point, so the coupling angles are undefined."""


class InconsistentMeasurementError(ValueError):
    """A measured power is incompatible with the given circuit parameters."""


class NoFiniteMaximizerError(ValueError):
    """The requested optimum does not exist (e.g. zero coupling everywhere)."""


class InfeasibleProblemError(ValueError):
    """Raised by operations that require a feasible problem up front."""


class NumericalError(RuntimeError):
    """A numerical routine failed to meet its accuracy contract."""


class ScenarioError(ValueError):
    """A scenario file cannot be parsed or validated."""

    def __init__(self, message, path=None, line=None, column=None):
        self.path = path
        self.line = line
        self.column = column
        where = ""
        if path is not None:
            where = str(path)
            if line is not None:
                where += f":{line}"
                if column is not None:
                    where += f":{column}"
            where += ": "
        super().__init__(where + message)
