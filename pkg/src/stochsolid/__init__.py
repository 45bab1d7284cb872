"""Volumetric representations of stochastic opaque solids.

A solid is described by a random indicator field; its vacancy (probability
of being outside) drives an exponential transport model whose attenuation
coefficient factors into an isotropic density and a directional projected
area.  The package provides the closed forms, the legacy models they are
compared against, quadrature and rendering on top of them, and brute-force
oracles (jump-process simulation, ODE integration, spherical Monte Carlo)
that verify every closed form independently.
"""

from .attenuation import (
    AttenuationModel,
    ConstantAlpha,
    CosineAnnealedModel,
    DegenerateGradientError,
    NeusModel,
    NormalKind,
    NormalModel,
    OursModel,
    PointCloudNeusModel,
    PointCloudOursModel,
    SurfaceAdaptiveAlpha,
    VolSDFModel,
    density,
    density_logistic_simplified,
    normal,
    occupancy,
    projected_area,
    projected_area_mixture,
    projected_area_sggx,
    projected_area_vmf,
    reciprocity_gap,
    sigma,
    vacancy,
)
from .distributions import SymmetricDistribution, cdf, pdf
from .fields import (
    Box,
    ConstantScale,
    GaussianBumpScale,
    ImplicitField,
    LinearRamp,
    PointCloudField,
    SceneField,
    SmoothUnion,
    Sphere,
    finite_difference_grad,
    grad_mean_implicit,
    mean_implicit,
    point_cloud_field,
)
from .oracle import (
    FirstJumpResult,
    TransitionRates,
    integrate_vacancy_ode,
    minimal_rates,
    rates_from_model,
    simulate_indicator,
    spherical_integral,
    spherical_ndf_mass,
)
from .render import (
    PinholeCamera,
    PointLight,
    RenderConfig,
    anisotropy_curves,
    light_trace,
    path_trace,
    rmse,
    write_ppm,
)
from .scattering import (
    GrazingDirectionError,
    LambertianBase,
    PhaseFunction,
    phase,
    phase_closed_form,
    vmf_projected_area,
)
from .sceneio import Scene, SceneError, load_scene, parse_scene
from .transport import (
    Discretization,
    Ray,
    SampleComb,
    discretize,
    discretize_fixed_opacity,
    expected_depth,
    free_flight_pdf,
    render_radiance,
    sample_comb,
    transmittance,
)

__version__ = "0.1.0"
