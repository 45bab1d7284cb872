"""JSON scene documents.

A scene document is a JSON object with the top-level keys

* ``field``        -- mean-field spec (required)
* ``distribution`` -- "gaussian" | "laplace" | "logistic" (default gaussian)
* ``scale``        -- number, or a scale-field spec (default 1.0)
* ``attenuation``  -- attenuation model spec (default: ours + mixture)
* ``camera``, ``light``, ``render`` -- optional blocks used by the CLI

Unknown keys anywhere in the document are errors.  The exact vocabulary is
documented in the README; every ``kind`` mirrors a constructor in
:mod:`stochsolid.fields` / :mod:`stochsolid.attenuation`.
"""

from __future__ import annotations

import json
from dataclasses import dataclass

import numpy as np

from .attenuation import (
    AnisotropyField,
    AttenuationModel,
    ConstantAlpha,
    CosineAnnealedModel,
    NeusModel,
    NormalKind,
    NormalModel,
    OursModel,
    PointCloudNeusModel,
    PointCloudOursModel,
    SurfaceAdaptiveAlpha,
    VolSDFModel,
)
from .distributions import SymmetricDistribution
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
)
from .render import PinholeCamera, PointLight, RenderConfig
from .scattering import LambertianBase, PhaseFunction

__all__ = ["SceneError", "Scene", "parse_scene", "load_scene"]


class SceneError(ValueError):
    """Malformed scene document."""


def _require(spec, context, required, optional=()):
    if not isinstance(spec, dict):
        raise SceneError(f"{context}: expected an object, got {type(spec).__name__}")
    unknown = set(spec) - set(required) - set(optional)
    if unknown:
        raise SceneError(f"{context}: unknown keys {sorted(unknown)}")
    missing = set(required) - set(spec)
    if missing:
        raise SceneError(f"{context}: missing keys {sorted(missing)}")


def _vec3(value, context):
    v = np.asarray(value, dtype=float)
    if v.shape != (3,):
        raise SceneError(f"{context}: expected a 3-vector")
    return v


def parse_field(spec) -> SceneField:
    _require(spec, "field", ["kind"], optional=[
        "center", "radius", "half_extents", "smoothing", "children",
        "blend_radius", "points", "normals", "support", "normal", "offset",
    ])
    kind = spec["kind"]
    if kind == "sphere":
        _require(spec, "field(sphere)", ["kind", "center", "radius"])
        return Sphere(center=_vec3(spec["center"], "sphere.center"), radius=float(spec["radius"]))
    if kind == "box":
        _require(spec, "field(box)", ["kind", "center", "half_extents"], optional=["smoothing"])
        return Box(center=_vec3(spec["center"], "box.center"),
                   half_extents=_vec3(spec["half_extents"], "box.half_extents"),
                   smoothing=float(spec.get("smoothing", 0.0)))
    if kind == "smooth_union":
        _require(spec, "field(smooth_union)", ["kind", "children", "blend_radius"])
        children = tuple(parse_field(c) for c in spec["children"])
        return SmoothUnion(children=children, blend_radius=float(spec["blend_radius"]))
    if kind == "point_cloud":
        _require(spec, "field(point_cloud)", ["kind", "points", "normals", "support"])
        return PointCloudField(points=np.asarray(spec["points"], dtype=float),
                               normals=np.asarray(spec["normals"], dtype=float),
                               support=float(spec["support"]))
    if kind == "linear_ramp":
        _require(spec, "field(linear_ramp)", ["kind", "normal"], optional=["offset"])
        return LinearRamp(normal=_vec3(spec["normal"], "linear_ramp.normal"),
                          offset=float(spec.get("offset", 0.0)))
    raise SceneError(f"field: unknown kind {kind!r}")


def parse_scale(spec):
    if isinstance(spec, (int, float)):
        return ConstantScale(float(spec))
    _require(spec, "scale", ["kind"], optional=["value", "baseline", "amplitude", "center", "width"])
    kind = spec["kind"]
    if kind == "constant":
        _require(spec, "scale(constant)", ["kind", "value"])
        return ConstantScale(float(spec["value"]))
    if kind == "gaussian_bump":
        _require(spec, "scale(gaussian_bump)", ["kind", "baseline", "amplitude", "center", "width"])
        return GaussianBumpScale(baseline=float(spec["baseline"]),
                                 amplitude=float(spec["amplitude"]),
                                 center=_vec3(spec["center"], "scale.center"),
                                 width=float(spec["width"]))
    raise SceneError(f"scale: unknown kind {kind!r}")


def parse_distribution(name) -> SymmetricDistribution:
    try:
        return SymmetricDistribution(name)
    except ValueError:
        raise SceneError(f"distribution: unknown name {name!r}") from None


def parse_alpha(spec, field: ImplicitField) -> AnisotropyField:
    if isinstance(spec, (int, float)):
        return ConstantAlpha(float(spec))
    _require(spec, "attenuation.alpha", ["kind", "width"], optional=["near", "far"])
    if spec["kind"] != "surface_adaptive":
        raise SceneError(f"attenuation.alpha: unknown kind {spec['kind']!r}")
    return SurfaceAdaptiveAlpha(field=field, width=float(spec["width"]),
                                near=float(spec.get("near", 1.0)),
                                far=float(spec.get("far", 0.0)))


_PHASE_NORMAL_MODEL = {
    "neus": NormalKind.DELTA,
    "point_cloud_ours": NormalKind.DELTA,
    "point_cloud_neus": NormalKind.DELTA,
    "volsdf": NormalKind.UNIFORM,
}


def parse_attenuation(spec, field: ImplicitField):
    """Returns (model, phase normal model)."""
    spec = spec if spec is not None else {"variant": "ours", "normal_model": "mixture", "alpha": 0.8}
    _require(spec, "attenuation", ["variant"], optional=["normal_model", "alpha"])
    variant = spec["variant"]
    if variant == "ours":
        kind_name = spec.get("normal_model", "mixture")
        try:
            kind = NormalKind(kind_name)
        except ValueError:
            raise SceneError(f"attenuation.normal_model: unknown name {kind_name!r}") from None
        alpha = None
        if kind in (NormalKind.MIXTURE, NormalKind.SGGX, NormalKind.VMF):
            alpha = parse_alpha(spec.get("alpha", 0.8), field)
        nm = NormalModel(kind=kind, alpha=alpha)
        return OursModel(field=field, normal_model=nm), nm
    if "normal_model" in spec:
        raise SceneError(f"attenuation: normal_model applies to the 'ours' variant only")
    if variant == "neus":
        model = NeusModel(field=field)
    elif variant == "volsdf":
        model = VolSDFModel(field=field)
    elif variant == "cosine_annealed":
        alpha = spec.get("alpha", 0.5)
        if not isinstance(alpha, (int, float)):
            raise SceneError("attenuation(cosine_annealed): alpha must be a number")
        model = CosineAnnealedModel(field=field, alpha=float(alpha))
        return model, NormalModel(kind=NormalKind.MIXTURE, alpha=ConstantAlpha(float(alpha)))
    elif variant == "point_cloud_ours":
        model = PointCloudOursModel(field=field)
    elif variant == "point_cloud_neus":
        model = PointCloudNeusModel(field=field)
    else:
        raise SceneError(f"attenuation: unknown variant {variant!r}")
    return model, NormalModel(kind=_PHASE_NORMAL_MODEL[variant])


def parse_camera(spec) -> PinholeCamera:
    _require(spec, "camera", ["position", "look_at", "fov_degrees", "width", "height"],
             optional=["up"])
    return PinholeCamera(position=_vec3(spec["position"], "camera.position"),
                         look_at=_vec3(spec["look_at"], "camera.look_at"),
                         fov=float(spec["fov_degrees"]) * np.pi / 180.0,
                         width=int(spec["width"]), height=int(spec["height"]),
                         up=_vec3(spec.get("up", [0.0, 0.0, 1.0]), "camera.up"))


def parse_light(spec) -> PointLight:
    _require(spec, "light", ["position", "intensity"])
    return PointLight(position=_vec3(spec["position"], "light.position"),
                      intensity=float(spec["intensity"]))


_RENDER_KEYS = ("albedo", "spp", "seed", "coarse", "fine", "shadow_quad", "exposure")


@dataclass(frozen=True)
class Scene:
    """Parsed scene: field, attenuation model, phase, and optional CLI blocks."""

    implicit: ImplicitField
    model: AttenuationModel
    phase: PhaseFunction
    camera: PinholeCamera | None
    light: PointLight | None
    render_defaults: dict

    def render_config(self, **overrides) -> RenderConfig:
        if self.camera is None or self.light is None:
            raise SceneError("scene document lacks camera/light blocks needed to render")
        params = dict(self.render_defaults)
        params.update(overrides)
        return RenderConfig(model=self.model, phase=self.phase,
                            camera=self.camera, light=self.light, **params)


def parse_scene(doc) -> Scene:
    _require(doc, "scene", ["field"],
             optional=["distribution", "scale", "attenuation", "camera", "light", "render"])
    scene_field = parse_field(doc["field"])
    dist = parse_distribution(doc.get("distribution", "gaussian"))
    scale = parse_scale(doc.get("scale", 1.0))
    implicit = ImplicitField(field=scene_field, scale=scale, dist=dist)
    model, phase_nm = parse_attenuation(doc.get("attenuation"), implicit)
    phase = PhaseFunction(base=LambertianBase(), nm=phase_nm, field=implicit)
    camera = parse_camera(doc["camera"]) if "camera" in doc else None
    light = parse_light(doc["light"]) if "light" in doc else None
    render_defaults = {}
    if "render" in doc:
        _require(doc["render"], "render", [], optional=_RENDER_KEYS)
        render_defaults = {k: (int(v) if k in ("spp", "seed", "coarse", "fine", "shadow_quad") else float(v))
                           for k, v in doc["render"].items()}
    return Scene(implicit=implicit, model=model, phase=phase,
                 camera=camera, light=light, render_defaults=render_defaults)


def load_scene(path) -> Scene:
    with open(path, "r", encoding="utf-8") as fh:
        try:
            doc = json.load(fh)
        except json.JSONDecodeError as exc:
            raise SceneError(f"{path}: invalid JSON ({exc})") from None
    return parse_scene(doc)
