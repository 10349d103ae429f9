"""Mean-field acoustics of a sheared duct flow in the quasi-one-dimensional limit.

The model is (d/dt + M(y) d/dx)^2 u = d^2/dx^2 a(u) on y in [-1, 1], with
a(u) the cross-section mean. The package provides the dispersion function
N = 1/(2 - F), its poles and boundary values, the Fourier-space kernels, the
quasi-explicit solution and an independent time-stepping reference.
"""

__version__ = "0.1.0"

from .profile import (  # noqa: E402
    PiecewiseLinearProfile,
    SmoothProfile,
    exp_profile,
    linear_profile,
    profile_from_spec,
    quadratic_profile,
)
from .spectrum import analyze_spectrum  # noqa: E402
from .dispersion import build_table  # noqa: E402
from .solution import AnalyticFamily, GaussianPacket, GridSampled, XGrid, full_field, mean_field  # noqa: E402

__all__ = [
    "PiecewiseLinearProfile",
    "SmoothProfile",
    "exp_profile",
    "linear_profile",
    "quadratic_profile",
    "profile_from_spec",
    "analyze_spectrum",
    "build_table",
    "AnalyticFamily",
    "GaussianPacket",
    "GridSampled",
    "XGrid",
    "full_field",
    "mean_field",
]
