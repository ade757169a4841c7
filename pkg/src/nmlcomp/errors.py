"""Exception hierarchy.

Every error carries a short machine-readable ``code`` that the CLI copies into
reports and uses to pick an exit status.
"""


class NmlcompError(Exception):
    code = "error"

    def __init__(self, message="", **details):
        super().__init__(message)
        self.details = details


class ConfigError(NmlcompError):
    code = "config-error"

    def __init__(self, message, path=None):
        if path:
            message = f"{path}: {message}"
        super().__init__(message, path=path)
        self.path = path


class UnknownModelError(ConfigError):
    code = "unknown-model"

    def __init__(self, model_id):
        super().__init__(f"unknown model: {model_id}")
        self.model_id = model_id


class OutsideDataSpaceError(NmlcompError, ValueError):
    code = "outside-data-space"


class DegenerateMLEError(NmlcompError):
    """The likelihood supremum is only reached on the parameter-space boundary.

    ``limit`` holds the boundary value the MLE tends to.
    """

    code = "degenerate-MLE"

    def __init__(self, message, limit):
        super().__init__(message, limit=limit)
        self.limit = limit


class NonDifferentiablePointError(NmlcompError):
    code = "non-differentiable-point"


class ChartInconsistentError(NmlcompError):
    code = "chart-inconsistent"


class NonFiniteIntegrandError(NmlcompError):
    code = "non-finite-integrand"


class JacobianDegenerateError(NmlcompError):
    code = "jacobian-degenerate"


class BudgetExceededError(NmlcompError):
    code = "budget-exceeded"


class MaxDepthError(NmlcompError):
    code = "max-depth"


class EnumerationBudgetExceededError(NmlcompError):
    code = "enumeration-budget-exceeded"


class NoSufficientStatError(NmlcompError):
    code = "no-sufficient-stat"


class NoChartError(NmlcompError):
    code = "no-chart"


class NoClosedFormError(NmlcompError):
    code = "no-closed-form"


class InfiniteCompError(NmlcompError):
    code = "infinite-comp"
