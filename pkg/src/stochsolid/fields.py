"""Scene fields: mean implicit functions, their gradients, and scale fields.

A :class:`SceneField` supplies the mean implicit function ``fbar(x)`` (a
signed-distance-style scalar field, negative inside) and its spatial
gradient.  An :class:`ImplicitField` pairs a scene field with a positive
scale field ``s(x)`` (inverse length; inverse pointwise standard deviation)
and a :class:`~stochsolid.distributions.SymmetricDistribution`.

All evaluators accept point arrays of shape ``(..., 3)`` and broadcast;
scalar results have shape ``(...,)`` and gradients ``(..., 3)``.
"""

from __future__ import annotations

from dataclasses import dataclass, field as dc_field

import numpy as np

from .distributions import SymmetricDistribution

__all__ = [
    "SceneField",
    "Sphere",
    "Box",
    "SmoothUnion",
    "PointCloudField",
    "LinearRamp",
    "ScaleField",
    "ConstantScale",
    "GaussianBumpScale",
    "ImplicitField",
    "point_cloud_field",
    "mean_implicit",
    "grad_mean_implicit",
    "finite_difference_grad",
]


def _as_points(x) -> np.ndarray:
    x = np.asarray(x, dtype=float)
    if x.shape[-1] != 3:
        raise ValueError(f"expected points of shape (..., 3), got {x.shape}")
    return x


def finite_difference_grad(fn, x, h: float):
    """Central-difference gradient of a scalar field ``fn`` with step ``h``."""
    x = _as_points(x)
    g = np.empty(x.shape, dtype=float)
    for axis in range(3):
        e = np.zeros(3)
        e[axis] = h
        g[..., axis] = (fn(x + e) - fn(x - e)) / (2.0 * h)
    return g


# ---------------------------------------------------------------------------
# Scene fields
# ---------------------------------------------------------------------------

class SceneField:
    """Mean implicit function with an analytic gradient and a bounding sphere."""

    def mean(self, x) -> np.ndarray:
        raise NotImplementedError

    def grad(self, x) -> np.ndarray:
        raise NotImplementedError

    def mean_and_grad(self, x):
        """Fused evaluation; subclasses override when work can be shared."""
        return self.mean(x), self.grad(x)

    def bounding_sphere(self) -> tuple[np.ndarray, float]:
        """(center, radius) enclosing the zero level set; generous is fine."""
        raise NotImplementedError

    def diameter(self) -> float:
        return 2.0 * self.bounding_sphere()[1]


@dataclass(frozen=True)
class Sphere(SceneField):
    """Exact signed distance to a sphere: ``|x - c| - r``."""

    center: np.ndarray
    radius: float

    def __post_init__(self):
        object.__setattr__(self, "center", np.asarray(self.center, dtype=float))
        if self.radius <= 0.0:
            raise ValueError("sphere radius must be positive")

    def mean(self, x):
        d = _as_points(x) - self.center
        return np.linalg.norm(d, axis=-1) - self.radius

    def grad(self, x):
        d = _as_points(x) - self.center
        n = np.linalg.norm(d, axis=-1, keepdims=True)
        return np.where(n > 0.0, d / np.where(n > 0.0, n, 1.0), 0.0)

    def bounding_sphere(self):
        return self.center, self.radius


@dataclass(frozen=True)
class LinearRamp(SceneField):
    """Half-space field ``n . x - offset`` with constant unit gradient."""

    normal: np.ndarray
    offset: float = 0.0

    def __post_init__(self):
        n = np.asarray(self.normal, dtype=float)
        nn = np.linalg.norm(n)
        if nn == 0.0:
            raise ValueError("ramp normal must be nonzero")
        object.__setattr__(self, "normal", n / nn)

    def mean(self, x):
        return _as_points(x) @ self.normal - self.offset

    def grad(self, x):
        x = _as_points(x)
        return np.broadcast_to(self.normal, x.shape).copy()

    def bounding_sphere(self):
        # Unbounded plane; a finite window around the surface point closest
        # to the origin so rays and renders have something to clip against.
        return self.normal * self.offset, 4.0


@dataclass(frozen=True)
class Box(SceneField):
    """Signed distance to an axis-aligned box, optionally edge-rounded.

    ``smoothing`` rounds edges with that radius while keeping the overall
    extents equal to ``half_extents``.
    """

    center: np.ndarray
    half_extents: np.ndarray
    smoothing: float = 0.0

    def __post_init__(self):
        object.__setattr__(self, "center", np.asarray(self.center, dtype=float))
        object.__setattr__(self, "half_extents", np.asarray(self.half_extents, dtype=float))
        if np.any(self.half_extents <= 0.0):
            raise ValueError("box half extents must be positive")
        if self.smoothing < 0.0 or self.smoothing >= float(np.min(self.half_extents)):
            if self.smoothing != 0.0:
                raise ValueError("smoothing must lie in [0, min(half_extents))")

    def _q(self, x):
        p = _as_points(x) - self.center
        return p, np.abs(p) - (self.half_extents - self.smoothing)

    def mean(self, x):
        _, q = self._q(x)
        outside = np.linalg.norm(np.maximum(q, 0.0), axis=-1)
        inside = np.minimum(np.max(q, axis=-1), 0.0)
        return outside + inside - self.smoothing

    def grad(self, x):
        p, q = self._q(x)
        pos = np.maximum(q, 0.0)
        outside_norm = np.linalg.norm(pos, axis=-1, keepdims=True)
        is_outside = outside_norm[..., 0] > 0.0
        g_out = np.sign(p) * pos / np.where(outside_norm > 0.0, outside_norm, 1.0)
        # Inside: move along the axis closest to a face.
        axis = np.argmax(q, axis=-1)
        g_in = np.zeros_like(p)
        np.put_along_axis(g_in, axis[..., None], 1.0, axis=-1)
        g_in *= np.sign(np.take_along_axis(p, axis[..., None], axis=-1))
        return np.where(is_outside[..., None], g_out, g_in)

    def bounding_sphere(self):
        return self.center, float(np.linalg.norm(self.half_extents))


@dataclass(frozen=True)
class SmoothUnion(SceneField):
    """Exponential smooth minimum of child fields.

    ``f = -k * log(sum_i exp(-f_i / k))`` with ``k = blend_radius``; smooth
    everywhere, reduces to the plain minimum as the blend radius shrinks.
    """

    children: tuple
    blend_radius: float

    def __post_init__(self):
        object.__setattr__(self, "children", tuple(self.children))
        if len(self.children) < 1:
            raise ValueError("smooth union needs at least one child")
        if self.blend_radius <= 0.0:
            raise ValueError("blend radius must be positive")

    def mean(self, x):
        k = self.blend_radius
        vals = np.stack([c.mean(x) for c in self.children], axis=0)
        lo = np.min(vals, axis=0)
        return lo - k * np.log(np.sum(np.exp(-(vals - lo) / k), axis=0))

    def mean_and_grad(self, x):
        k = self.blend_radius
        pairs = [c.mean_and_grad(x) for c in self.children]
        vals = np.stack([v for v, _ in pairs], axis=0)
        grads = np.stack([g for _, g in pairs], axis=0)
        lo = np.min(vals, axis=0)
        w = np.exp(-(vals - lo) / k)
        wsum = np.sum(w, axis=0)
        f = lo - k * np.log(wsum)
        g = np.sum(w[..., None] * grads, axis=0) / wsum[..., None]
        return f, g

    def grad(self, x):
        return self.mean_and_grad(x)[1]

    def bounding_sphere(self):
        centers, radii = zip(*[c.bounding_sphere() for c in self.children])
        centers = np.stack(centers)
        mid = centers.mean(axis=0)
        r = max(float(np.linalg.norm(c - mid)) + rr for c, rr in zip(centers, radii))
        return mid, r + self.blend_radius


@dataclass(frozen=True)
class PointCloudField(SceneField):
    """Smooth signed field from an oriented point cloud.

    ``fbar(x)`` is the Gaussian-weighted average of the signed plane
    distances ``(x - p_i) . n_i`` with weights
    ``w_i = exp(-|x - p_i|^2 / (2 support^2))``.  Zero at the points, grows
    along the normals, smooth everywhere.
    """

    points: np.ndarray
    normals: np.ndarray
    support: float

    def __post_init__(self):
        pts = np.atleast_2d(np.asarray(self.points, dtype=float))
        nrm = np.atleast_2d(np.asarray(self.normals, dtype=float))
        if pts.shape[0] == 0:
            raise ValueError("point cloud must contain at least one point")
        if pts.shape != nrm.shape or pts.shape[1] != 3:
            raise ValueError("points and normals must both have shape (n, 3)")
        if self.support <= 0.0:
            raise ValueError("support radius must be positive")
        lens = np.linalg.norm(nrm, axis=1, keepdims=True)
        if np.any(lens == 0.0):
            raise ValueError("normals must be nonzero")
        object.__setattr__(self, "points", pts)
        object.__setattr__(self, "normals", nrm / lens)
        inv_2s2 = 1.0 / (2.0 * self.support * self.support)
        object.__setattr__(self, "_pts_t", np.ascontiguousarray(pts.T))
        object.__setattr__(self, "_nrm_t", np.ascontiguousarray(self.normals.T))
        object.__setattr__(self, "_p2", np.sum(pts * pts, axis=1) * inv_2s2)
        object.__setattr__(self, "_pn", np.sum(pts * self.normals, axis=1))

    def _weights(self, x):
        # Log-weights shifted by their max so the normalized ratio never
        # underflows far from the cloud; distances via the gram expansion
        # keep everything in (N, K) matmuls.
        inv_s2 = 1.0 / (self.support * self.support)
        e = x @ self._pts_t
        e *= inv_s2
        e -= self._p2
        e -= np.max(e, axis=-1, keepdims=True)
        # the omitted -x^2/(2 s^2) term is a per-row constant absorbed by the shift
        return np.exp(e, out=e)

    def mean(self, x):
        x = _as_points(x)
        flat = x.reshape(-1, 3)
        w = self._weights(flat)
        d = flat @ self._nrm_t
        d -= self._pn
        f = np.einsum("ij,ij->i", w, d) / np.sum(w, axis=-1)
        return f.reshape(x.shape[:-1])

    def mean_and_grad(self, x):
        x = _as_points(x)
        flat = x.reshape(-1, 3)
        w = self._weights(flat)
        d = flat @ self._nrm_t
        d -= self._pn
        wsum = np.sum(w, axis=-1)
        f = np.einsum("ij,ij->i", w, d) / wsum
        # grad = sum_i [ grad(w_i) (d_i - f) + w_i n_i ] / sum w, with
        # grad(w_i) = -w_i (x - p_i) / support^2
        d -= f[:, None]
        d *= w                                   # reuse as r = w * (d - f)
        inv_s2 = 1.0 / (self.support * self.support)
        g = d @ self.points
        g -= np.sum(d, axis=-1, keepdims=True) * flat
        g *= inv_s2
        g += w @ self.normals
        g /= wsum[:, None]
        return f.reshape(x.shape[:-1]), g.reshape(x.shape)

    def grad(self, x):
        return self.mean_and_grad(x)[1]

    def bounding_sphere(self):
        mid = self.points.mean(axis=0)
        r = float(np.max(np.linalg.norm(self.points - mid, axis=1)))
        return mid, r + 3.0 * self.support


def point_cloud_field(points, normals, support: float) -> PointCloudField:
    """Build the smooth oriented-point-cloud field; errors on an empty cloud."""
    return PointCloudField(points=np.asarray(points, dtype=float),
                           normals=np.asarray(normals, dtype=float),
                           support=float(support))


# ---------------------------------------------------------------------------
# Scale fields
# ---------------------------------------------------------------------------

class ScaleField:
    """Positive scalar field ``s(x)`` with gradient; inverse length units."""

    is_constant = False

    def __call__(self, x) -> np.ndarray:
        raise NotImplementedError

    def grad(self, x) -> np.ndarray:
        raise NotImplementedError

    def min_value(self) -> float:
        raise NotImplementedError


@dataclass(frozen=True)
class ConstantScale(ScaleField):
    value: float

    is_constant = True

    def __post_init__(self):
        if self.value <= 0.0:
            raise ValueError("scale must be positive")

    def __call__(self, x):
        x = _as_points(x)
        return np.full(x.shape[:-1], float(self.value))

    def grad(self, x):
        x = _as_points(x)
        return np.zeros(x.shape)

    def min_value(self):
        return float(self.value)


@dataclass(frozen=True)
class GaussianBumpScale(ScaleField):
    """``s(x) = baseline + amplitude * exp(-|x - c|^2 / (2 width^2))``.

    Requires ``baseline > 0`` and ``baseline + amplitude > 0`` so the scale
    stays positive everywhere.
    """

    baseline: float
    amplitude: float
    center: np.ndarray
    width: float

    def __post_init__(self):
        object.__setattr__(self, "center", np.asarray(self.center, dtype=float))
        if self.baseline <= 0.0 or self.baseline + self.amplitude <= 0.0:
            raise ValueError("scale field must be positive everywhere")
        if self.width <= 0.0:
            raise ValueError("width must be positive")

    def _bump(self, x):
        d = _as_points(x) - self.center
        return np.exp(-np.sum(d * d, axis=-1) / (2.0 * self.width ** 2))

    def __call__(self, x):
        return self.baseline + self.amplitude * self._bump(x)

    def grad(self, x):
        d = _as_points(x) - self.center
        b = self._bump(x)
        return (-self.amplitude / self.width ** 2) * b[..., None] * d

    def min_value(self):
        return float(min(self.baseline, self.baseline + self.amplitude))


# ---------------------------------------------------------------------------
# Implicit field
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class ImplicitField:
    """A stochastic implicit function: mean field, scale, and noise law."""

    field: SceneField
    scale: ScaleField = dc_field(default_factory=lambda: ConstantScale(1.0))
    dist: SymmetricDistribution = SymmetricDistribution.GAUSSIAN

    def mean(self, x):
        return self.field.mean(x)

    def grad(self, x):
        return self.field.grad(x)

    def mean_and_grad(self, x):
        return self.field.mean_and_grad(x)

    def bounding_sphere(self):
        center, radius = self.field.bounding_sphere()
        # Inflate so the vacancy transition (width ~ 1/s) is inside the bound.
        return center, radius + 6.0 / self.scale.min_value()

    def fd_step(self) -> float:
        """Finite-difference step: 1e-4 of the scene bounding diameter."""
        return 1e-4 * self.field.diameter()


def mean_implicit(field: ImplicitField, x):
    """Mean implicit function value ``fbar(x)``."""
    return field.mean(x)


def grad_mean_implicit(field: ImplicitField, x):
    """Gradient of the mean implicit function (analytic for all built-ins)."""
    return field.grad(x)
