"""Normalized maximum likelihood code lengths and model complexity.

Discrete models are handled by exact enumeration, continuous ones by
integrating the estimator density over parameter space and, as a check,
the plug-in likelihood over data space.
"""

__version__ = "0.1.0"

from .errors import NmlcompError, ConfigError  # noqa: E402
from .luckiness import Luckiness, luckiness_eval  # noqa: E402
from .models import (  # noqa: E402
    DataSpace,
    ParamSpace,
    ModelDescriptor,
    make_model,
    model_ids,
    log_max_likelihood,
    mle,
    sample,
    rate_parametrization,
)
from .quadrature import QuadratureSpec, IntegralResult  # noqa: E402
from .discrete import (  # noqa: E402
    comp_bruteforce_discrete,
    comp_via_pushforward,
    comp_via_sufficient_stat,
    pushforward_pmf,
    discrete_comp,
)
from .continuous import (  # noqa: E402
    EstimatorPdfSource,
    CompReport,
    NmlResult,
    estimator_pdf,
    lmc_gfunction,
    comp_bruteforce_continuous,
    nml_code_length,
    select_model,
    exponential_lmc_closed_form,
)
from .cases import verify_coarea  # noqa: E402
