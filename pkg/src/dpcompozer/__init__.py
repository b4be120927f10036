"""Exact and closed-form composition accounting for (eps, delta)-DP.

Privacy guarantees are treated as regions of achievable (missed detection,
false alarm) error pairs.  The package computes the exact k-fold region, the
classical upper bounds, noise calibration, and Monte-Carlo checks.
"""

from dpcompozer.calibration import (CalibrationError, forward_check,
                                    gaussian_variance, jl_params,
                                    laplace_variance, per_query_budget,
                                    calibrate_eps0)
from dpcompozer.composition import (CompositionQuery, CompositionReport,
                                    Method, basic, compare, drv,
                                    heterogeneous, optimal_deltas,
                                    optimal_region, simplified)
from dpcompozer.experiment import (FixedStrategy, check_within,
                                   estimate_curve, run_compose)
from dpcompozer.mechanisms import (GaussianCurve, MechanismKind,
                                   MechanismSpec, canonical_pair,
                                   gaussian_delta, geometric_pair)
from dpcompozer.region import (EpsDelta, PrivacyPoint, PrivacyRegion,
                               boundary, contains_point, contains_region,
                               intersect, region_from_eps_delta, relax,
                               tv_upper_bound)
from dpcompozer.tradeoff import (DiscretePair, hockey_stick, product_pair,
                                 region_from_pair)

__version__ = '0.1.0'
