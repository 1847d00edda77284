"""Natural density and rough statistical convergence of real sequences and function sequences."""

from .density import (
    DEFAULT_PROTOCOL,
    AnalysisProtocol,
    DensityReport,
    DensityVerdict,
    IndexPredicate,
    density_verdict,
    empirical_density,
    prefix_count,
)
from .dsl import SequenceProgram, builtin, compile_program, compile_target, evaluate, format_program
from .repair import (
    Band,
    BandChain,
    RepairResult,
    build_band_chain,
    derive_thresholds,
    repair_pipeline,
    repair_sequence,
    verify_repair,
)
from .rough import (
    ConvergenceReport,
    RoughParams,
    RoughnessEstimate,
    SequenceView,
    bad_index_set,
    classical_rough_verdict,
    linearity_check,
    minimal_roughness,
    pointwise_report,
    rough_cauchy_verdict,
    rough_stat_verdict,
)

__version__ = "0.1.0"
