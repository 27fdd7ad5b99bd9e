class ConfigurationError(ValueError):
    """Invalid model or run configuration.

    ``violations`` lists every problem found, as ``"field.path: message"``.
    """

    def __init__(self, violations):
        if isinstance(violations, str):
            violations = [violations]
        self.violations = list(violations)
        super().__init__("; ".join(self.violations))


class DomainError(ValueError):
    """Arguments outside the hypotheses of a closed-form result."""


class SolverError(RuntimeError):
    """Iterative solver failed to converge."""

    def __init__(self, message, diagnostics=None):
        super().__init__(message)
        self.diagnostics = diagnostics or {}
