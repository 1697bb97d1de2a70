"""Photon-counting statistics of thermal light from phase-space cell filling."""

__version__ = "0.1.0"

from .counting import (
    CountingWindow,
    convolve_pmfs,
    ergodicity_gap,
    poisson_pmf,
    response_count_pmf,
    response_rate,
    window_count_pmf,
)
from .distributions import (
    DEFAULT_POLICY,
    MeanEstimate,
    MeanOccupancy,
    ModelMode,
    TruncatedPmf,
    TruncationPolicy,
    absorption_pmf,
    cell_filling_pmf,
    conditional_response_pmf,
    detection_mean,
    detection_pmf,
    mean_transition_probability,
    no_response_probability,
    transition_probability,
)
from .errors import (
    DegenerateInputError,
    EmptyHistogramError,
    LinearizationDomainError,
    PhotocellsError,
    TruncationCapExceeded,
)
from .localization import (
    ClassicalBeam,
    LocalizationScenario,
    classical_count_pmf,
    classical_mean_count,
    relative_detection_probability,
    volume_occupation_ratio,
)
from .montecarlo import (
    ComparisonReport,
    CountHistogram,
    SimulationConfig,
    compare,
    sample_conditional_response,
    sample_single_response,
    sample_window,
)
