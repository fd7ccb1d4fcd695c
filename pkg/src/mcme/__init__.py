"""Joint maximum-consensus selection and model estimation.

Outlier flags and parameters are estimated together by alternating a
low-rank relaxed selection update with a weighted model fit.
"""

__version__ = "0.1.0"

from .core import (DegenerateError, DimensionError, DomainError, FitConfig, FitResult,
                   LossVector, MCMEError, NumericError, beta_from_tau, beta_rigid,
                   chi2_quantile, mcme_objective, tau_regression, truncated_objective)
from .models import (LinearModel, PointPairSet, QuasiconvexModel, homography_geometric,
                     linearize_projective)
from .solver import acs_fit, fit, refine_on_inliers
from .baselines import irls_l1, ransac
