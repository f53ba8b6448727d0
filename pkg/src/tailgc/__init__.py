"""Granger causality in the tail of distributions for binary extreme-event series."""

from .core import BinaryPanel, BinarySeries, RealSeries, lagged_cross_correlation, sample_mean
from .dgp import (
    BiVdarParams,
    DarParams,
    GarchScenario,
    Vdar1Params,
    simulate_dar,
    simulate_garch,
    simulate_vdar1,
    simulate_vdar_bivariate,
    star_coupling,
)
from .estimation import (
    FitResult,
    loglik_dar,
    loglik_vdar1,
    loglik_vdar_bivariate,
    mle_dar,
    mle_vdar1,
    mle_vdar_bivariate,
    select_order_bic,
    yule_walker_bivariate,
    yule_walker_vdar1,
)

__version__ = "0.1.0"
