"""Bundled test scenes.

Small deterministic scenes used by the test suite, the verification CLI, and
the renderer demos.  The point-cloud sphere is the reciprocity demonstration
scene: a Fibonacci-sphere cloud with outward normals, a Gaussian law, and a
constant scale, rendered under a single point light.
"""

from __future__ import annotations

import numpy as np

from .attenuation import (
    ConstantAlpha,
    NormalKind,
    NormalModel,
    OursModel,
    PointCloudNeusModel,
    PointCloudOursModel,
    SurfaceAdaptiveAlpha,
)
from .distributions import SymmetricDistribution
from .fields import (
    Box,
    ConstantScale,
    GaussianBumpScale,
    ImplicitField,
    LinearRamp,
    PointCloudField,
    SmoothUnion,
    Sphere,
)
from .render import PinholeCamera, PointLight, RenderConfig
from .scattering import LambertianBase, PhaseFunction

__all__ = [
    "fibonacci_sphere",
    "sphere_field",
    "linear_ramp_field",
    "box_field",
    "smooth_union_field",
    "pointcloud_sphere_field",
    "varying_scale_sphere_field",
    "test_fields",
    "ours_mixture_model",
    "pointcloud_scene_config",
    "pointcloud_scene_document",
]


def fibonacci_sphere(count: int, radius: float = 1.0) -> np.ndarray:
    """Deterministic, roughly uniform points on a sphere."""
    i = np.arange(count)
    golden = (1.0 + np.sqrt(5.0)) / 2.0
    z = 1.0 - (2.0 * i + 1.0) / count
    r = np.sqrt(np.maximum(0.0, 1.0 - z * z))
    phi = 2.0 * np.pi * i / golden
    return radius * np.stack([r * np.cos(phi), r * np.sin(phi), z], axis=-1)


def sphere_field(scale: float = 4.0,
                 dist: SymmetricDistribution = SymmetricDistribution.GAUSSIAN) -> ImplicitField:
    return ImplicitField(field=Sphere(center=np.zeros(3), radius=1.0),
                         scale=ConstantScale(scale), dist=dist)


def linear_ramp_field(scale: float = 4.0,
                      dist: SymmetricDistribution = SymmetricDistribution.GAUSSIAN) -> ImplicitField:
    return ImplicitField(field=LinearRamp(normal=np.array([0.0, 0.0, 1.0]), offset=0.0),
                         scale=ConstantScale(scale), dist=dist)


def box_field(scale: float = 5.0,
              dist: SymmetricDistribution = SymmetricDistribution.LOGISTIC) -> ImplicitField:
    return ImplicitField(field=Box(center=np.zeros(3), half_extents=np.array([0.8, 0.6, 0.5]),
                                   smoothing=0.1),
                         scale=ConstantScale(scale), dist=dist)


def smooth_union_field(scale: float = 3.0,
                       dist: SymmetricDistribution = SymmetricDistribution.LAPLACE) -> ImplicitField:
    children = (Sphere(center=np.array([-0.6, 0.0, 0.0]), radius=0.7),
                Sphere(center=np.array([0.6, 0.0, 0.0]), radius=0.7))
    return ImplicitField(field=SmoothUnion(children=children, blend_radius=0.2),
                         scale=ConstantScale(scale), dist=dist)


def pointcloud_sphere_field(count: int = 24, radius: float = 1.0, support: float = 0.45,
                            scale: float = 16.0) -> ImplicitField:
    pts = fibonacci_sphere(count, radius)
    return ImplicitField(field=PointCloudField(points=pts, normals=pts / radius, support=support),
                         scale=ConstantScale(scale), dist=SymmetricDistribution.GAUSSIAN)


def varying_scale_sphere_field() -> ImplicitField:
    """Sphere with a spatially varying scale, for the adaptive-density paths."""
    return ImplicitField(field=Sphere(center=np.zeros(3), radius=1.0),
                         scale=GaussianBumpScale(baseline=3.0, amplitude=4.0,
                                                 center=np.zeros(3), width=1.0),
                         dist=SymmetricDistribution.GAUSSIAN)


def test_fields() -> list[tuple[str, ImplicitField]]:
    """The scene set exercised by the verification suite."""
    return [
        ("linear_ramp", linear_ramp_field()),
        ("sphere", sphere_field()),
        ("box", box_field()),
        ("smooth_union", smooth_union_field()),
        ("pointcloud_sphere", pointcloud_sphere_field()),
        ("varying_scale_sphere", varying_scale_sphere_field()),
    ]


def ours_mixture_model(field: ImplicitField, alpha: float = 0.8,
                       surface_adaptive: bool = False, width: float = 0.25) -> OursModel:
    if surface_adaptive:
        a = SurfaceAdaptiveAlpha(field=field, width=width)
    else:
        a = ConstantAlpha(alpha)
    return OursModel(field=field, normal_model=NormalModel(kind=NormalKind.MIXTURE, alpha=a))


def pointcloud_scene_config(variant: str = "ours", width: int = 128, height: int = 128,
                            spp: int = 64, seed: int = 0, **overrides) -> RenderConfig:
    """The bundled point-cloud sphere render, path/light comparable.

    ``variant`` selects the attenuation coefficient: "ours" is the fully
    anisotropic reciprocal one, "neus" its one-sided variant.  Both share
    the same delta-distribution phase function, so any path/light mismatch
    is attributable to the coefficient.
    """
    field = pointcloud_sphere_field()
    if variant == "ours":
        model = PointCloudOursModel(field=field)
    elif variant == "neus":
        model = PointCloudNeusModel(field=field)
    else:
        raise ValueError("variant must be 'ours' or 'neus'")
    phase = PhaseFunction(base=LambertianBase(), nm=NormalModel(kind=NormalKind.DELTA), field=field)
    camera = PinholeCamera(position=np.array([0.0, -3.6, 1.2]), look_at=np.zeros(3),
                           fov=34.0 * np.pi / 180.0, width=width, height=height)
    light = PointLight(position=np.array([2.5, -2.5, 2.5]), intensity=12.0)
    # bounds hug the vacancy transition shell (width ~ 6/scale around |x| = 1)
    params = dict(albedo=0.85, spp=spp, seed=seed, coarse=32, fine=24, shadow_quad=8,
                  bounds=(np.zeros(3), 1.7))
    params.update(overrides)
    return RenderConfig(model=model, phase=phase, camera=camera, light=light, **params)


def pointcloud_scene_document(variant: str = "point_cloud_ours") -> dict:
    """JSON-ready document for the bundled point-cloud sphere scene."""
    pts = fibonacci_sphere(24, 1.0)
    return {
        "field": {
            "kind": "point_cloud",
            "points": [[round(v, 12) for v in p] for p in pts],
            "normals": [[round(v, 12) for v in p] for p in pts],
            "support": 0.45,
        },
        "distribution": "gaussian",
        "scale": 16.0,
        "attenuation": {"variant": variant},
        "camera": {"position": [0.0, -3.4, 1.1], "look_at": [0.0, 0.0, 0.0],
                   "fov_degrees": 38.0, "width": 128, "height": 128},
        "light": {"position": [2.5, -2.5, 2.5], "intensity": 12.0},
        "render": {"albedo": 0.85, "spp": 64, "seed": 0, "coarse": 48,
                   "fine": 33, "shadow_quad": 12},
    }
