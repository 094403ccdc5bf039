"""Fixed-k extreme value test of finite first and second moments of scores."""

from ._tailmoment import (
    CalibrationFailed,
    ConfigError,
    DegenerateTail,
    GridWeights,
    IngestionError,
    LfdTable,
    NumericFailure,
    SingularDesign,
    UnverifiedTable,
    WeakInstrumentSingularity,
    calibrate_lfd,
    decide,
    gev_cdf,
    gev_logpdf,
    joint_ev_logdensity,
    lr_statistic,
    p_value,
    power_curve,
    run_full_test,
    sample_top_k,
    score_norms,
    self_normalize,
    selfnorm_logdensity,
    selfnorm_logdensity_batch,
    set_max_threads,
    simulate_design,
    verify_size,
)

__version__ = "0.1.0"
