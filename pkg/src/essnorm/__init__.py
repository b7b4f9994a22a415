"""Essential norms of weighted composition operators W f = psi * (f o phi)
between Hardy spaces of the unit ball, estimated numerically."""

from .geometry import QuadratureScheme, circle_scheme, default_scheme, sphere_scheme
from .symbols import BallSelfMap, BlaschkeSymbol, PolynomialSymbol, load_pair, self_map
from .pullback import build_pullback, extreme_profile, integrate_pullback
from .estimators import (
    EstimateReport,
    boundedness_hp_hinf,
    compactness_verdict,
    essnorm_bounds_hinf_hq,
    essnorm_bounds_hp_hinf,
    essnorm_exact_hinf_h2,
    essnorm_lower_hp_hq,
    essnorm_upper_interp,
    truncated_image_trace,
)
from .carleson import boundary_mass_check, equivalence_report

__version__ = "0.1.0"
