"""Attenuation coefficients for stochastic opaque solids.

The attenuation coefficient factors into an isotropic density and a
directional projected area,

    sigma(x, w) = rho(x) * area_D(x, w),

where ``rho = |grad V| / V`` is driven by the vacancy ``V = cdf(s * fbar)``
and ``area_D`` is the expected foreshortening ``int |w . m| D(m) dm`` over a
distribution of normals ``D``.  This module provides both pieces for every
supported distribution of normals (delta, uniform, linear mixture, SGGX,
von Mises-Fisher), the resulting attenuation models, and the legacy models
they are compared against.

Numerical guard rails (applied uniformly):

* vacancy is clamped to ``[CDF_FLOOR, CDF_CEIL]`` before any division;
* the density is evaluated in log space and capped at ``SIGMA_MAX``;
* where ``|grad V| < GRAD_FLOOR`` the level-set normal is undefined and every
  directional factor falls back to the isotropic value 1/2;
* the anisotropy of SGGX is clamped to ``[1e-6, 1 - 1e-6]`` before the
  normalization constants are evaluated (their endpoint values are removable
  limits).
"""

from __future__ import annotations

import enum
from dataclasses import dataclass

import numpy as np
from scipy import special

from .distributions import (
    CDF_CEIL,
    CDF_FLOOR,
    LOGISTIC_RATE,
    SymmetricDistribution,
    cdf,
    log_cdf,
    log_pdf,
    pdf,
)
from .fields import ImplicitField, _as_points

__all__ = [
    "GRAD_FLOOR",
    "VACANCY_EPS",
    "SIGMA_MAX",
    "ALPHA_MIN",
    "ALPHA_MAX",
    "DegenerateGradientError",
    "AnisotropyField",
    "ConstantAlpha",
    "SurfaceAdaptiveAlpha",
    "NormalKind",
    "NormalModel",
    "vacancy",
    "occupancy",
    "normal",
    "density",
    "density_logistic_simplified",
    "projected_area",
    "projected_area_from_cosine",
    "projected_area_mixture",
    "projected_area_sggx",
    "projected_area_vmf",
    "sggx_area_norm",
    "sggx_ndf_norm",
    "sggx_ndf",
    "vmf_ndf",
    "AttenuationModel",
    "OursModel",
    "NeusModel",
    "VolSDFModel",
    "CosineAnnealedModel",
    "PointCloudOursModel",
    "PointCloudNeusModel",
    "reciprocity_gap",
]

GRAD_FLOOR = 1e-9       # below this |grad V| the level-set normal is undefined
VACANCY_EPS = 1e-12     # density denominator clamp
SIGMA_MAX = 1e6         # cap on any attenuation coefficient, per unit length
ALPHA_MIN = 1e-6
ALPHA_MAX = 1.0 - 1e-6


class DegenerateGradientError(ValueError):
    """Raised when a level-set normal is requested at a zero-gradient point."""


# ---------------------------------------------------------------------------
# Anisotropy fields
# ---------------------------------------------------------------------------

class AnisotropyField:
    """Spatially varying anisotropy ``alpha(x)`` in [0, 1]."""

    def __call__(self, x) -> np.ndarray:
        raise NotImplementedError


@dataclass(frozen=True)
class ConstantAlpha(AnisotropyField):
    value: float

    def __post_init__(self):
        if not 0.0 <= self.value <= 1.0:
            raise ValueError("anisotropy must lie in [0, 1]")

    def __call__(self, x):
        x = _as_points(x)
        return np.full(x.shape[:-1], float(self.value))


@dataclass(frozen=True)
class SurfaceAdaptiveAlpha(AnisotropyField):
    """Logistic step in ``|fbar|``: ``near`` at the surface, ``far`` beyond ``width``.

    The steepness is fixed so the endpoint values are attained to double
    precision (the sigmoid saturates below 1e-12 well inside/outside the
    transition band).
    """

    field: ImplicitField
    width: float
    near: float = 1.0
    far: float = 0.0
    steepness: float = 40.0

    def __post_init__(self):
        if self.width <= 0.0:
            raise ValueError("width must be positive")
        for v in (self.near, self.far):
            if not 0.0 <= v <= 1.0:
                raise ValueError("anisotropy endpoints must lie in [0, 1]")

    def __call__(self, x):
        f = np.abs(self.field.mean(x))
        t = special.expit(self.steepness * (1.0 - f / self.width))
        return self.far + (self.near - self.far) * t


# ---------------------------------------------------------------------------
# Distributions of normals and projected areas
# ---------------------------------------------------------------------------

class NormalKind(enum.Enum):
    DELTA = "delta"
    UNIFORM = "uniform"
    MIXTURE = "mixture"
    SGGX = "sggx"
    VMF = "vmf"


@dataclass(frozen=True)
class NormalModel:
    """Distribution of normals at a point, centered on the level-set normal."""

    kind: NormalKind
    alpha: AnisotropyField | None = None

    def __post_init__(self):
        needs_alpha = self.kind in (NormalKind.MIXTURE, NormalKind.SGGX, NormalKind.VMF)
        if needs_alpha and self.alpha is None:
            raise ValueError(f"{self.kind.value} normal model requires an anisotropy field")

    def alpha_at(self, x):
        if self.alpha is None:
            x = _as_points(x)
            full = 1.0 if self.kind is NormalKind.DELTA else 0.0
            return np.full(x.shape[:-1], full)
        return self.alpha(x)


def projected_area_mixture(alpha, cosine):
    """Linear blend of foreshortened and isotropic area: ``a|c| + (1-a)/2``."""
    alpha = np.asarray(alpha, dtype=float)
    return alpha * np.abs(cosine) + 0.5 * (1.0 - alpha)


def _clamp_alpha(alpha):
    return np.clip(np.asarray(alpha, dtype=float), ALPHA_MIN, ALPHA_MAX)


def sggx_area_norm(alpha):
    """Projected-area normalizer ``C(a) = 1 + (1/a - a) asinh(a / sqrt(1-a^2))``.

    Limits: ``C -> 2`` as ``a -> 0`` (isotropic) and ``C -> 1`` as ``a -> 1``
    (fully foreshortened); evaluated on the clamped anisotropy.
    """
    a = _clamp_alpha(alpha)
    return 1.0 + (1.0 / a - a) * np.arcsinh(a / np.sqrt(1.0 - a * a))


def sggx_ndf_norm(alpha):
    """Density normalizer ``N(a) = (a + atanh(a) - a^2 atanh(a)) / (2 a pi)``."""
    a = _clamp_alpha(alpha)
    t = np.arctanh(a)
    return (a + t - a * a * t) / (2.0 * a * np.pi)


def projected_area_sggx(alpha, cosine):
    """Ellipsoidal microflake area: ``sqrt(a^2 c^2 + 1 - a^2) / C(a)``."""
    a = _clamp_alpha(alpha)
    c = np.asarray(cosine, dtype=float)
    return np.sqrt(a * a * c * c + (1.0 - a * a)) / sggx_area_norm(a)


def sggx_ndf(alpha, cosine):
    """Unit-mass SGGX density of normals as a function of ``m . n``.

    ``D(m) = (1 - a^2) / (2 pi C(a) (1 - a^2 (m.n)^2)^2)``; integrates to one
    over the sphere and reproduces :func:`projected_area_sggx` under the
    foreshortening integral.
    """
    a = _clamp_alpha(alpha)
    t = np.asarray(cosine, dtype=float)
    return (1.0 - a * a) / (2.0 * np.pi * sggx_area_norm(a) * (1.0 - a * a * t * t) ** 2)


def projected_area_vmf(alpha, cosine):
    """von Mises-Fisher area approximation ``((a + 1)/2) |c|^a``.

    Exact at both endpoints (1/2 at ``a = 0``, ``|c|`` at ``a = 1``);
    in between it is the closed-form approximation that pairs with the
    integrated directional encoding of roughness-aware shading models.
    """
    alpha = np.asarray(alpha, dtype=float)
    c = np.abs(np.asarray(cosine, dtype=float))
    return 0.5 * (alpha + 1.0) * c ** alpha


def vmf_ndf(alpha, cosine):
    """vMF density of normals with concentration ``kappa = a / (1 - a)``."""
    a = np.clip(np.asarray(alpha, dtype=float), 0.0, ALPHA_MAX)
    kappa = a / (1.0 - a)
    t = np.asarray(cosine, dtype=float)
    small = kappa < 1e-8
    safe = np.where(small, 1.0, kappa)
    dens = safe / (2.0 * np.pi * -np.expm1(-2.0 * safe)) * np.exp(safe * (t - 1.0))
    return np.where(small, 1.0 / (4.0 * np.pi), dens)


def projected_area_from_cosine(nm: NormalModel, x, cosine):
    """Projected area of ``nm`` at ``x`` given ``cosine = omega . n``."""
    c = np.asarray(cosine, dtype=float)
    if nm.kind is NormalKind.DELTA:
        return np.abs(c)
    if nm.kind is NormalKind.UNIFORM:
        return np.full(np.shape(c), 0.5)
    a = nm.alpha_at(x)
    if nm.kind is NormalKind.MIXTURE:
        return projected_area_mixture(a, c)
    if nm.kind is NormalKind.SGGX:
        return projected_area_sggx(a, c)
    return projected_area_vmf(a, c)


def projected_area(nm: NormalModel, x, omega, n):
    """Expected foreshortening ``int |omega . m| D_x(m) dm`` in closed form."""
    omega = np.asarray(omega, dtype=float)
    n = np.asarray(n, dtype=float)
    return projected_area_from_cosine(nm, x, np.sum(omega * n, axis=-1))


# ---------------------------------------------------------------------------
# Vacancy, normals, density
# ---------------------------------------------------------------------------

def vacancy(field: ImplicitField, x):
    """Probability that ``x`` is outside the solid: ``cdf(s(x) fbar(x))``.

    Clamped away from 0 and 1 so downstream ratios stay finite.
    """
    u = field.scale(x) * field.mean(x)
    return np.clip(cdf(field.dist, u), CDF_FLOOR, CDF_CEIL)


def occupancy(field: ImplicitField, x):
    """Probability that ``x`` is inside the solid: ``cdf(-s(x) fbar(x))``."""
    u = field.scale(x) * field.mean(x)
    return cdf(field.dist, -u)


def _vacancy_gradient_parts(field: ImplicitField, x):
    """Returns (u, grad direction vector of s*fbar, its norm).

    ``grad V = pdf(u) * (s grad fbar + fbar grad s)``; the pdf factor is
    positive, so the returned vector carries the direction of ``grad V`` and,
    scaled by ``pdf(u)``, its magnitude.
    """
    f, g = field.mean_and_grad(x)
    s = field.scale(x)
    if field.scale.is_constant:
        v = s[..., None] * g
    else:
        v = s[..., None] * g + f[..., None] * field.scale.grad(x)
    return s * f, v, np.linalg.norm(v, axis=-1)


def normal(field: ImplicitField, x):
    """Unit normal of the vacancy level set at ``x``.

    Raises :class:`DegenerateGradientError` if any queried point has
    ``|grad V|`` under the floor; vectorized callers that need a fallback
    should use the attenuation models, which substitute the isotropic
    projected area at such points.
    """
    _, v, vn = _vacancy_gradient_parts(field, x)
    if np.any(vn < GRAD_FLOOR):
        raise DegenerateGradientError("level-set normal undefined: |grad V| below floor")
    return v / vn[..., None]


def _log_density_ratio(dist, u):
    # log( pdf(u) / cdf(u) ), finite even deep inside the solid.
    return log_pdf(dist, u) - log_cdf(dist, u)


def _implicit_density(field: ImplicitField, x):
    """Density ``|grad V| / V`` of an implicit field, capped at SIGMA_MAX.

    ``grad V = pdf(u) * (s grad fbar + fbar grad s)`` and ``V = cdf(u)`` with
    ``u = s fbar``; the pdf/cdf ratio is taken in log space so the interior
    (``cdf -> 0``) stays finite up to the cap.
    """
    u, _, vn = _vacancy_gradient_parts(field, x)
    rho = np.exp(_log_density_ratio(field.dist, u)) * vn
    return np.minimum(rho, SIGMA_MAX)


def _logistic_density(field: ImplicitField, x):
    """Logistic-law density regardless of the field's own distribution."""
    u, _, vn = _vacancy_gradient_parts(field, x)
    rho = np.exp(_log_density_ratio(SymmetricDistribution.LOGISTIC, u)) * vn
    return np.minimum(rho, SIGMA_MAX)


def density_logistic_simplified(s, fbar, grad_norm):
    """Simplified logistic density ``s * k * cdf_logistic(-s fbar) * |grad fbar|``.

    The logistic law satisfies ``pdf(u) = k * cdf(u) * cdf(-u)`` with
    ``k = pi / sqrt(3)`` under the unit-variance parameterization, so the
    ``pdf/cdf`` ratio in the general density collapses to ``k * cdf(-u)``.
    """
    s = np.asarray(s, dtype=float)
    u = s * np.asarray(fbar, dtype=float)
    rho = s * LOGISTIC_RATE * cdf(SymmetricDistribution.LOGISTIC, -u) * np.asarray(grad_norm, dtype=float)
    return np.minimum(rho, SIGMA_MAX)


# ---------------------------------------------------------------------------
# Attenuation models
# ---------------------------------------------------------------------------

class AttenuationModel:
    """Common surface: ``density(x)`` and ``sigma(x, omega)`` over batches."""

    field: ImplicitField

    def density(self, x) -> np.ndarray:
        raise NotImplementedError

    def sigma(self, x, omega) -> np.ndarray:
        raise NotImplementedError

    def normal_with_fallback(self, x):
        """(unit normal, degenerate mask); normal rows are arbitrary where masked."""
        _, v, vn = _vacancy_gradient_parts(self.field, x)
        bad = vn < GRAD_FLOOR
        n = v / np.where(bad, 1.0, vn)[..., None]
        n[bad] = np.array([0.0, 0.0, 1.0])
        return n, bad

    def _directional(self, x, omega, area_fn):
        omega = np.asarray(omega, dtype=float)
        n, bad = self.normal_with_fallback(x)
        c = np.sum(omega * n, axis=-1)
        return np.where(bad, 0.5, area_fn(c))

    def _sigma_product(self, x, omega, density_dist, area_fn):
        """density * projected area with one field evaluation.

        ``area_fn(c)`` maps the cosine against the level-set normal to the
        directional factor; degenerate-gradient points get the isotropic 1/2.
        """
        u, v, vn = _vacancy_gradient_parts(self.field, x)
        rho = np.minimum(np.exp(_log_density_ratio(density_dist, u)) * vn, SIGMA_MAX)
        omega = np.asarray(omega, dtype=float)
        dots = np.sum(omega * v, axis=-1)
        bad = vn < GRAD_FLOOR
        c = dots / np.where(bad, 1.0, vn)
        area = np.where(bad, 0.5, area_fn(c))
        return rho * area


@dataclass(frozen=True)
class OursModel(AttenuationModel):
    """Reciprocal coefficient: implicit density times a projected area."""

    field: ImplicitField
    normal_model: NormalModel

    def density(self, x):
        return _implicit_density(self.field, x)

    def sigma(self, x, omega):
        x = _as_points(x)
        return self._sigma_product(x, omega, self.field.dist,
                                   lambda c: projected_area_from_cosine(self.normal_model, x, c))


@dataclass(frozen=True)
class NeusModel(AttenuationModel):
    """Logistic density with the one-sided ``max(0, -w.n)`` clip.

    The clip zeroes the coefficient for rays travelling outward, which breaks
    the direction symmetry ``sigma(x, w) = sigma(x, -w)``; kept verbatim for
    comparison.
    """

    field: ImplicitField

    def density(self, x):
        return _logistic_density(self.field, x)

    def sigma(self, x, omega):
        return self._sigma_product(x, omega, SymmetricDistribution.LOGISTIC,
                                   lambda c: np.maximum(0.0, -c))


@dataclass(frozen=True)
class VolSDFModel(AttenuationModel):
    """Direction-independent ``s * cdf_laplace(-s fbar) * |grad fbar|``.

    Transcribed as published: the Laplace CDF is substituted into the
    *simplified* logistic density, which is not the correct Laplace density
    (it drops the ``pdf/cdf`` ratio).  Preserved so comparisons reproduce the
    original model rather than a repaired one.
    """

    field: ImplicitField

    def density(self, x):
        f, g = self.field.mean_and_grad(x)
        s = self.field.scale(x)
        gn = np.linalg.norm(g, axis=-1)
        rho = s * cdf(SymmetricDistribution.LAPLACE, -s * f) * gn
        return np.minimum(rho, SIGMA_MAX)

    def sigma(self, x, omega):
        omega = np.asarray(omega, dtype=float)
        rho = self.density(x)
        return np.broadcast_to(rho, np.broadcast_shapes(rho.shape, omega.shape[:-1])).copy()


@dataclass(frozen=True)
class CosineAnnealedModel(AttenuationModel):
    """Logistic density with a constant-anisotropy mixture projected area.

    ``sigma = rho_logistic * (alpha |w.n| + (1 - alpha)/2)`` with a single
    global ``alpha``; the reciprocal form of the annealing schedule that
    interpolates isotropic to foreshortened behavior.
    """

    field: ImplicitField
    alpha: float

    def __post_init__(self):
        if not 0.0 <= self.alpha <= 1.0:
            raise ValueError("alpha must lie in [0, 1]")

    def density(self, x):
        return _logistic_density(self.field, x)

    def sigma(self, x, omega):
        return self._sigma_product(x, omega, SymmetricDistribution.LOGISTIC,
                                   lambda c: projected_area_mixture(self.alpha, c))


@dataclass(frozen=True)
class PointCloudOursModel(AttenuationModel):
    """Fully anisotropic reciprocal coefficient: ``(|grad V| / V) * |w.n|``.

    Intended for Gaussian-law point-cloud fields, where the vacancy is the
    Gaussian CDF of the scaled mean field.
    """

    field: ImplicitField

    def density(self, x):
        return _implicit_density(self.field, x)

    def sigma(self, x, omega):
        return self._sigma_product(x, omega, self.field.dist, np.abs)


@dataclass(frozen=True)
class PointCloudNeusModel(AttenuationModel):
    """Point-cloud density with the one-sided clip; non-reciprocal."""

    field: ImplicitField

    def density(self, x):
        return _implicit_density(self.field, x)

    def sigma(self, x, omega):
        return self._sigma_product(x, omega, self.field.dist,
                                   lambda c: np.maximum(0.0, -c))


def density(model: AttenuationModel, x):
    """Isotropic density factor of an attenuation model."""
    return model.density(x)


def sigma(model: AttenuationModel, x, omega):
    """Attenuation coefficient of ``model`` at ``x`` for direction ``omega``."""
    return model.sigma(x, omega)


def reciprocity_gap(model: AttenuationModel, points, directions):
    """Largest ``|sigma(x, w) - sigma(x, -w)|`` over the probe set."""
    points = _as_points(points)
    directions = np.asarray(directions, dtype=float)
    if points.size == 0:
        raise ValueError("probe set must be nonempty")
    fwd = model.sigma(points, directions)
    bwd = model.sigma(points, -directions)
    return float(np.max(np.abs(fwd - bwd)))
