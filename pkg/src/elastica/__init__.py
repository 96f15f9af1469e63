"""Gauge-invariant elastic shape analysis of spherically parameterized surfaces.

The library measures deformations of closed genus-0 surfaces with an elastic
Riemannian metric evaluated on the normal components of velocities only, so
energies and lengths of deformation paths do not depend on how the surfaces
are parameterized along the way.  On top of that sit rigid alignment by
volumetric moments, a spherical-harmonic perturbation basis, and a
path-straightening solver for geodesics and pairwise shape distances.
"""

__version__ = "0.1.0"

from .alignment import (
    AlignmentReport,
    EllipsoidFit,
    VolumeCells,
    align_pair,
    center_of_mass,
    fit_ellipsoid,
    inscribed_volume,
    normalize_surface,
    second_moments,
)
from .basis import (
    BasisElement,
    DeformationBasis,
    HarmonicSpec,
    build_basis,
    get_basis,
    orthonormalize_h1,
    real_harmonics,
    reconstruct,
)
from .errors import (
    DegenerateMetric,
    ElasticaError,
    ImmersionLost,
    NonUniformGrid,
    NotTriaxial,
    NumericalError,
    ParseError,
    RankDeficientWarning,
    SingularFit,
    ValidationError,
    ZeroVolume,
)
from .metric import (
    EVALUATORS,
    ElasticParams,
    EnergyBreakdown,
    SurfacePath,
    curvature_pair,
    gauge_pair,
    metric_pair,
    path_energy,
    path_length,
    theoretical_sphere_energy,
)
from .shapes import (
    bump_sphere,
    ellipsoid,
    gauge_transform_path,
    generate,
    linear_blend,
    reparameterize,
    rotation_schedule,
    sphere,
)
from .straighten import (
    GeodesicResult,
    SolveTrace,
    SolverConfig,
    directional_derivative,
    distance_matrix,
    geodesic_distance,
    straighten,
)
from .surface import (
    FundamentalForms,
    Surface,
    TangentField,
    decompose,
    first_form,
    integrate_scalar,
    partials,
    second_form_direct,
    second_form_polyfit,
    vertex_areas,
    vertex_normals,
)
