"""Microflake phase function built from a base BRDF and a normal distribution.

The phase function is the expected foreshortened flake BRDF over the
distribution of normals, normalized by the projected area:

    fp(x, wo, wi) = (1 / area_D(x, wo)) * int fr(m, wo, wi) |wo . m| D(m) dm.

Directions point *away* from the scattering point (``wo`` toward the viewer,
``wi`` toward the source).  The shipped base is a two-sided Lambertian flake:

    fr(m, wo, wi) = (albedo_scale / pi) * |wi . m|   if wi and wo lie on the
                                                     same side of m,
                    0                                otherwise,

so the coupling kernel ``fr * |wo . m|`` is symmetric in (wo, wi) and the
product ``sigma * fp`` satisfies detailed reciprocity exactly.  Summed over
outgoing directions the flake returns exactly its albedo scale, so unit scale
conserves energy.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .attenuation import (
    NormalKind,
    NormalModel,
    projected_area_from_cosine,
    projected_area_vmf,
)
from .fields import ImplicitField
from .oracle import sample_sphere

__all__ = [
    "GrazingDirectionError",
    "LambertianBase",
    "PhaseFunction",
    "phase",
    "phase_closed_form",
    "vmf_projected_area",
    "sample_normals",
    "lambert_lune_integral",
]


class GrazingDirectionError(ValueError):
    """Raised when the projected area in the outgoing direction vanishes."""


@dataclass(frozen=True)
class LambertianBase:
    """Two-sided Lambertian flake BRDF with an albedo multiplier."""

    albedo_scale: float = 1.0

    def kernel(self, m, wo, wi):
        """``fr * |wo . m|``: symmetric coupling kernel, shape-broadcast."""
        co = np.sum(m * wo, axis=-1)
        ci = np.sum(m * wi, axis=-1)
        same_side = (co * ci) > 0.0
        return (self.albedo_scale / np.pi) * np.abs(ci) * np.abs(co) * same_side


@dataclass(frozen=True)
class PhaseFunction:
    base: LambertianBase
    nm: NormalModel
    field: ImplicitField


def _level_set_normal(pf: PhaseFunction, x):
    from .attenuation import normal

    return normal(pf.field, np.asarray(x, dtype=float))


def sample_normals(nm: NormalModel, x, n_axis, count: int, rng) -> np.ndarray:
    """Draw flake normals from the distribution of normals at ``x``.

    ``n_axis`` is the level-set normal the distribution is centered on.
    Delta returns the axis; uniform is uniform on the sphere; the mixture
    picks per sample; vMF uses the inverse-CDF of its cosine; SGGX inverts
    its cosine CDF by bisection.  Azimuths are uniform about the axis.
    """
    n_axis = np.asarray(n_axis, dtype=float)
    if nm.kind is NormalKind.DELTA:
        return np.broadcast_to(n_axis, (count, 3)).copy()
    if nm.kind is NormalKind.UNIFORM:
        return sample_sphere(rng, count)
    a = float(nm.alpha_at(np.atleast_2d(x))[0])
    if nm.kind is NormalKind.MIXTURE:
        out = sample_sphere(rng, count)
        take_delta = rng.random(count) < a
        out[take_delta] = n_axis
        return out
    if nm.kind is NormalKind.VMF:
        kappa = min(a, 1.0 - 1e-6) / (1.0 - min(a, 1.0 - 1e-6))
        u = rng.random(count)
        if kappa < 1e-8:
            t = 2.0 * u - 1.0
        else:
            # inverse CDF of t = cos(theta) under density ~ exp(kappa t)
            t = 1.0 + np.log(u + (1.0 - u) * np.exp(-2.0 * kappa)) / kappa
    else:  # SGGX: bisection on the cosine CDF
        t = _sggx_sample_cosine(a, rng.random(count))
    phi = rng.uniform(0.0, 2.0 * np.pi, size=count)
    b1, b2 = _tangent_basis(n_axis)
    r = np.sqrt(np.maximum(0.0, 1.0 - t * t))
    return (t[:, None] * n_axis + (r * np.cos(phi))[:, None] * b1
            + (r * np.sin(phi))[:, None] * b2)


def _tangent_basis(n):
    helper = np.array([0.0, 0.0, 1.0]) if abs(n[2]) < 0.9 else np.array([1.0, 0.0, 0.0])
    b1 = np.cross(n, helper)
    b1 /= np.linalg.norm(b1)
    return b1, np.cross(n, b1)


def _sggx_sample_cosine(alpha, u, iters: int = 60):
    from .attenuation import ALPHA_MAX, ALPHA_MIN

    a = float(np.clip(alpha, ALPHA_MIN, ALPHA_MAX))

    def antideriv(t):
        return t / (2.0 * (1.0 - a * a * t * t)) + np.arctanh(a * t) / (2.0 * a)

    lo_val, hi_val = antideriv(-1.0), antideriv(1.0)
    target = lo_val + u * (hi_val - lo_val)
    lo = np.full_like(u, -1.0)
    hi = np.full_like(u, 1.0)
    for _ in range(iters):
        mid = 0.5 * (lo + hi)
        below = antideriv(mid) < target
        lo = np.where(below, mid, lo)
        hi = np.where(below, hi, mid)
    return 0.5 * (lo + hi)


def phase(pf: PhaseFunction, x, wo, wi, samples: int, rng):
    """Monte Carlo phase value with standard error.

    Samples flake normals from the distribution of normals and averages the
    coupling kernel, then divides by the closed-form projected area of the
    outgoing direction.  Raises :class:`GrazingDirectionError` when that
    projected area vanishes (delta distribution seen edge-on).
    """
    x = np.asarray(x, dtype=float)
    wo = np.asarray(wo, dtype=float)
    wi = np.asarray(wi, dtype=float)
    n_axis = _level_set_normal(pf, x)
    area = float(projected_area_from_cosine(pf.nm, np.atleast_2d(x), np.dot(wo, n_axis)))
    if area <= 0.0:
        raise GrazingDirectionError("projected area vanishes for the outgoing direction")
    m = sample_normals(pf.nm, x, n_axis, samples, rng)
    k = pf.base.kernel(m, wo, wi)
    return float(np.mean(k) / area), float(np.std(k) / np.sqrt(samples) / area)


def lambert_lune_integral(gamma):
    """``int |a.m| |b.m| 1[(a.m)(b.m) > 0] dm`` for unit vectors at angle gamma.

    Classic cosine-lobe overlap over both same-sign lunes:
    ``(4/3) (sin g + (pi - g) cos g)``.
    """
    g = np.asarray(gamma, dtype=float)
    return (4.0 / 3.0) * (np.sin(g) + (np.pi - g) * np.cos(g))


def phase_closed_form(pf: PhaseFunction, x, wo, wi, n_axis=None):
    """Exact phase value for delta / uniform / mixture distributions.

    Vectorized over leading batch dimensions of ``x``, ``wo``, ``wi``; used
    by the renderer where Monte Carlo per scatter would be wasteful.  For
    the pure delta distribution the ``|wo . n|`` factors cancel, so grazing
    outgoing directions return zero instead of dividing by a vanishing
    projected area.
    """
    if pf.nm.kind not in (NormalKind.DELTA, NormalKind.UNIFORM, NormalKind.MIXTURE):
        raise ValueError("closed form available for delta/uniform/mixture only")
    x = np.asarray(x, dtype=float)
    wo = np.asarray(wo, dtype=float)
    wi = np.asarray(wi, dtype=float)
    if n_axis is None:
        n_axis = _level_set_normal(pf, x)
    scale = pf.base.albedo_scale

    co = np.sum(wo * n_axis, axis=-1)
    ci = np.sum(wi * n_axis, axis=-1)
    # delta value with the |wo . n| foreshortening / projected-area pair cancelled
    fp_delta = (scale / np.pi) * np.abs(ci) * ((co * ci) > 0.0)

    if pf.nm.kind is NormalKind.DELTA:
        return fp_delta

    gamma = np.arccos(np.clip(np.sum(wo * wi, axis=-1), -1.0, 1.0))
    k_unif = (scale / (4.0 * np.pi * np.pi)) * lambert_lune_integral(gamma)
    if pf.nm.kind is NormalKind.UNIFORM:
        return k_unif / 0.5

    alpha = pf.nm.alpha_at(x)
    numer = alpha * fp_delta * np.abs(co) + (1.0 - alpha) * k_unif
    area = projected_area_from_cosine(pf.nm, x, co)
    return np.where(area > 0.0, numer / np.where(area > 0.0, area, 1.0), fp_delta)


def vmf_projected_area(alpha, cosine):
    """Projected area of a vMF distribution of normals, ``((a+1)/2) |c|^a``.

    Concentration is ``kappa = a / (1 - a)``; exact at the isotropic and
    delta endpoints, an approximation in between.
    """
    return projected_area_vmf(alpha, cosine)
