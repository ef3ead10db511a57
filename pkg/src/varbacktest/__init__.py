"""Multinomial backtests of value-at-risk forecasts at several levels.

The main entry points are re-exported here:

* :mod:`~varbacktest.distributions` loss models, quantiles and expected shortfall
* :mod:`~varbacktest.exceptions` level grids and cell counts
* :mod:`~varbacktest.mtest` Pearson, Nass, likelihood-ratio and binomial tests
* :mod:`~varbacktest.traffic` traffic-light classification
* :mod:`~varbacktest.sim` Monte Carlo experiments
"""

from .distributions import LossModel, approx_es, model_es, model_quantile, model_sample, parse_model
from .errors import (BacktestError, ConfigError, ConvergenceError, DegenerateError, DomainError,
                     InsufficientData, LengthMismatch, NonfiniteError, ParseError, RangeError)
from .exceptions import (CellCounts, ExceptionSeries, LevelGrid, VarForecastPanel, cell_counts, count_cells,
                         exceedance_depths, expected_cell_probs, level_grid)
from .mtest import (Sided, TestResult, berkowitz_lrt, binomial_lrt, binomial_score_test, binomial_wald_test,
                    fit_mu_sigma, multinomial_lrt, nass_test, pearson_test)
from .traffic import Colour, TrafficLight, basel_light, classify, light_from_pvalue, light_from_statistic

__version__ = "0.1.0"
