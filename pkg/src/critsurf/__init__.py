"""Local independence testing with Monte-Carlo calibrated critical surfaces.

The package estimates the quantile dependence function of a bivariate
sample from ranks, calibrates per-cell lower and upper rejection
thresholds so that the collection of local tests keeps a chosen global
significance level under independence, and reports which regions of the
copula square carry significant positive or negative dependence.
"""

__version__ = "0.1.0"

from .calibrate import (
    CalibrationConfig,
    CriticalSurfaces,
    NullEnsemble,
    calibrate_eta,
    generate_null_ensemble,
    load_surfaces,
    replicate_seed,
    sample_null_surface,
    save_surfaces,
    surfaces_for_eta,
)
from .depcore import (
    CopulaGrid,
    FineQSurface,
    HypergeomParams,
    QSurface,
    RankPairs,
    Sample,
    coarsen,
    compute_ranks,
    copula_grid,
    fine_q_surface,
    hypergeom_cdf,
    hypergeom_pmf,
    hypergeom_support,
    normal_approx_gap,
    normal_cdf,
    normal_quantile,
)
from .errors import (
    CacheError,
    CalibrationError,
    CritsurfError,
    DataError,
    InputError,
)
from .heatmap import HeatmapSpec, emit_heatmap, emit_rank_scatter
from .localtest import (
    CellHit,
    RegressionDiagnostics,
    TestReport,
    diagnose_regression,
    fit_simple_ols,
    run_test,
)
from .simlab import (
    FAMILIES,
    ModelSpec,
    PowerResult,
    empirical_power,
    generate,
    models_from_config,
    register_family,
)

__all__ = [
    "__version__",
    "CalibrationConfig",
    "CriticalSurfaces",
    "NullEnsemble",
    "calibrate_eta",
    "generate_null_ensemble",
    "load_surfaces",
    "replicate_seed",
    "sample_null_surface",
    "save_surfaces",
    "surfaces_for_eta",
    "CopulaGrid",
    "FineQSurface",
    "HypergeomParams",
    "QSurface",
    "RankPairs",
    "Sample",
    "coarsen",
    "compute_ranks",
    "copula_grid",
    "fine_q_surface",
    "hypergeom_cdf",
    "hypergeom_pmf",
    "hypergeom_support",
    "normal_approx_gap",
    "normal_cdf",
    "normal_quantile",
    "CacheError",
    "CalibrationError",
    "CritsurfError",
    "DataError",
    "InputError",
    "HeatmapSpec",
    "emit_heatmap",
    "emit_rank_scatter",
    "CellHit",
    "RegressionDiagnostics",
    "TestReport",
    "diagnose_regression",
    "fit_simple_ols",
    "run_test",
    "FAMILIES",
    "ModelSpec",
    "PowerResult",
    "empirical_power",
    "generate",
    "models_from_config",
    "register_family",
]
