"""Probabilities on entire particle histories, one interference factor per slice.

The package assigns each fine-grained history (one configuration per time
slice) the probability |F(H)|^2 times the product of per-slice interference
factors, checks that these sum to the usual squared-amplitude weights at the
final slice, and samples histories backward from that distribution.  See the
scenario builders in :mod:`histlaw.scenarios` for runnable experiments and
``histlaw self-check`` for the acceptance battery.
"""

from .model import (
    Distribution,
    EngineLimits,
    EnumerationOverflowError,
    History,
    HistLawError,
    InitialCondition,
    InvalidBinningError,
    Kernel,
    NonUnitaryScenarioError,
    Scenario,
    SliceGrid,
    UnitarityError,
    ValidationReport,
    validate_kernel,
    NORM_DRIFT_TOL,
    PROBABILITY_ATOL,
)
from .engine import (
    AmplitudeField,
    born_probability,
    compile_scenario,
    final_born_vector,
    history_amplitude,
    propagate,
)
from .interference import (
    interference_factor,
    interference_map,
    interference_ratio,
    interference_terms,
    pair_interference_factor,
)
from .histories import (
    GENERATOR_IDENTITY,
    MarginalReport,
    coarse_grain,
    count_paths,
    end_time_interference_factor,
    enumerate_histories,
    marginal_consistency,
    sample_histories,
)
from .scenarios import (
    HALF_RESULTANT_PHASE,
    RecoilReport,
    apparatus_recoil,
    available_scenarios,
    build_scenario,
    coarse_grained_amplitude,
    fringe_visibility,
    screen_profile,
    second_order_equivalent,
)

__version__ = "0.1.0"

__all__ = [
    "__version__",
    # model
    "Distribution", "EngineLimits", "EnumerationOverflowError", "History",
    "HistLawError", "InitialCondition", "InvalidBinningError", "Kernel",
    "NonUnitaryScenarioError", "Scenario", "SliceGrid", "UnitarityError",
    "ValidationReport", "validate_kernel", "NORM_DRIFT_TOL", "PROBABILITY_ATOL",
    # engine
    "AmplitudeField", "born_probability", "compile_scenario",
    "final_born_vector", "history_amplitude", "propagate",
    # interference
    "interference_factor", "interference_map", "interference_ratio",
    "interference_terms", "pair_interference_factor",
    # histories
    "GENERATOR_IDENTITY", "MarginalReport", "coarse_grain", "count_paths",
    "end_time_interference_factor", "enumerate_histories",
    "marginal_consistency", "sample_histories",
    # scenarios
    "HALF_RESULTANT_PHASE", "RecoilReport", "apparatus_recoil",
    "available_scenarios", "build_scenario", "coarse_grained_amplitude",
    "fringe_visibility", "screen_profile", "second_order_equivalent",
]
