"""Complex Legendre transforms for Kahler potentials, with numerical checks of
their fixed points, involutivity, gradient maps and Mabuchi isometry."""

from .domains import Box, Sphere, domain_from_dict
from .fields import (
    ChartPullback,
    Constant,
    Fourier,
    GaussianBump,
    LinearField,
    QuadraticField,
    SampledFunction,
    SmoothCutoff,
    SphereFunction,
)
from .potentials import (
    Euclidean,
    FubiniStudy,
    HermitianSeries,
    SeriesPotential,
    check_strong_psh,
    estimate_neighborhood,
    load_potential,
    potential_from_dict,
)
from .transforms import (
    LegendreTransform,
    admissibility,
    complex_legendre_flat,
    diastasis_legendre,
    double_transform_defect,
    real_legendre,
    transform_field,
)

__version__ = "0.1.0"
