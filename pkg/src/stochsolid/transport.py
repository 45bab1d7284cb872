"""Transmittance, free-flight distributions, and ray quadrature.

Distances along a ray are measured from ``t_near`` (written ``tau`` below),
so a ray covers ``tau in [0, L]`` with ``L = t_far - t_near``.  Transmittance
is the exponential of the negative attenuation integral; the free-flight
density is ``sigma * T``.

The discrete machinery mirrors the standard quadrature for volume rendering:
a :class:`SampleComb` partitions the ray into segments with one sample each,
the coefficient is held constant per segment at its sample, and the
per-segment vacancy/occupancy and free-flight masses follow.  Modeling the
*coefficient* per segment (rather than a fixed per-segment opacity) is what
keeps the discretization consistent under refinement; the companion
:func:`discretize_fixed_opacity` exists to demonstrate the failure mode of
modeling opacities directly.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .fields import ImplicitField, _as_points

__all__ = [
    "Ray",
    "SampleComb",
    "Discretization",
    "transmittance",
    "free_flight_pdf",
    "discretize",
    "discretize_fixed_opacity",
    "sample_comb",
    "sample_combs",
    "render_radiance",
    "expected_depth",
]


@dataclass(frozen=True)
class Ray:
    """Ray ``origin + t * direction`` restricted to ``t in [t_near, t_far]``."""

    origin: np.ndarray
    direction: np.ndarray
    t_near: float = 0.0
    t_far: float = 1.0

    def __post_init__(self):
        o = np.asarray(self.origin, dtype=float)
        d = np.asarray(self.direction, dtype=float)
        if o.shape != (3,) or d.shape != (3,):
            raise ValueError("ray origin and direction must be 3-vectors")
        if abs(np.linalg.norm(d) - 1.0) > 1e-12:
            raise ValueError("ray direction must be unit length (within 1e-12)")
        if not (0.0 <= self.t_near < self.t_far):
            raise ValueError("require 0 <= t_near < t_far")
        object.__setattr__(self, "origin", o)
        object.__setattr__(self, "direction", d)

    @property
    def length(self) -> float:
        return self.t_far - self.t_near

    def point(self, tau):
        """Point at distance ``tau`` past ``t_near`` (vectorized over tau)."""
        tau = np.asarray(tau, dtype=float)
        return self.origin + (self.t_near + tau)[..., None] * self.direction

    def reversed(self) -> "Ray":
        """Same segment traversed from the far end toward the origin."""
        return Ray(self.point(self.length), -self.direction, 0.0, self.length)


@dataclass(frozen=True)
class SampleComb:
    """Segments tiling ``[0, L]`` with one ordered sample per segment."""

    edges: np.ndarray     # (n + 1,), edges[0] = 0, edges[-1] = L
    samples: np.ndarray   # (n,), samples[i] in [edges[i], edges[i+1]]

    def __post_init__(self):
        e = np.asarray(self.edges, dtype=float)
        s = np.asarray(self.samples, dtype=float)
        if e.ndim != 1 or s.ndim != 1 or e.size != s.size + 1:
            raise ValueError("need n+1 edges for n samples")
        if np.any(np.diff(e) <= 0.0) or np.any(np.diff(s) <= 0.0):
            raise ValueError("edges and samples must be strictly increasing")
        if np.any(s < e[:-1]) or np.any(s > e[1:]):
            raise ValueError("each sample must lie inside its segment")
        object.__setattr__(self, "edges", e)
        object.__setattr__(self, "samples", s)

    @property
    def widths(self) -> np.ndarray:
        return np.diff(self.edges)

    @classmethod
    def from_samples(cls, samples, length: float) -> "SampleComb":
        """Segments bounded by midpoints of consecutive samples."""
        s = np.asarray(samples, dtype=float)
        mids = 0.5 * (s[:-1] + s[1:])
        edges = np.concatenate([[0.0], mids, [length]])
        return cls(edges=edges, samples=s)

    @classmethod
    def uniform(cls, ray: Ray, n: int) -> "SampleComb":
        """Deterministic midpoint comb with ``n`` equal segments."""
        edges = np.linspace(0.0, ray.length, n + 1)
        return cls(edges=edges, samples=0.5 * (edges[:-1] + edges[1:]))


def transmittance(model, ray: Ray, t, n_quad: int = 128):
    """Probability of traversing ``tau in [0, t]`` unoccluded.

    Composite midpoint quadrature of the attenuation coefficient along the
    ray, exponentiated.  ``t`` may be an array; each entry integrates from 0.
    """
    if n_quad < 2:
        raise ValueError("n_quad must be at least 2")
    t = np.asarray(t, dtype=float)
    if np.any(t < 0.0) or np.any(t > ray.length + 1e-12):
        raise ValueError("t must lie in [0, t_far - t_near]")
    frac = (np.arange(n_quad) + 0.5) / n_quad
    taus = t[..., None] * frac                     # (..., n_quad)
    x = ray.point(taus)
    sig = model.sigma(x, np.broadcast_to(ray.direction, x.shape))
    integral = np.sum(sig, axis=-1) * (t / n_quad)
    return np.exp(-integral)


def free_flight_pdf(model, ray: Ray, t, n_quad: int = 128):
    """Density of the first-intersection distance: ``sigma(r(t)) * T(t)``."""
    t = np.asarray(t, dtype=float)
    x = ray.point(t)
    sig = model.sigma(x, np.broadcast_to(ray.direction, x.shape))
    return sig * transmittance(model, ray, t, n_quad)


@dataclass(frozen=True)
class Discretization:
    """Per-segment quantities of a comb-discretized ray.

    ``vbar``/``obar`` are the per-segment vacancy and occupancy, ``masses``
    the free-flight mass of each segment (these are also the per-sample
    quadrature weights), and ``escape`` the probability of leaving the ray
    unabsorbed.  ``masses.sum() + escape == 1`` up to rounding.
    """

    sigma_bar: np.ndarray
    vbar: np.ndarray
    obar: np.ndarray
    masses: np.ndarray
    escape: float

    @property
    def weights(self) -> np.ndarray:
        return self.masses


def _masses_from_vbar(vbar):
    # Telescoping keeps sum(masses) + escape == 1 to machine precision.
    t_incl = np.cumprod(vbar, axis=-1)
    t_excl = np.concatenate([np.ones_like(t_incl[..., :1]), t_incl[..., :-1]], axis=-1)
    return t_excl - t_incl, t_incl[..., -1]


def discretize(model, ray: Ray, comb: SampleComb) -> Discretization:
    """Constant-coefficient-per-segment discretization of the free flight."""
    x = ray.point(comb.samples)
    sig = model.sigma(x, np.broadcast_to(ray.direction, x.shape))
    vbar = np.exp(-sig * comb.widths)
    masses, escape = _masses_from_vbar(vbar)
    return Discretization(sigma_bar=sig, vbar=vbar, obar=-np.expm1(-sig * comb.widths),
                          masses=masses, escape=float(escape))


def discretize_fixed_opacity(opacity_fn, ray: Ray, comb: SampleComb) -> Discretization:
    """Discretization that models a per-segment opacity directly.

    ``opacity_fn(x)`` is sampled at the segment samples and used as the
    segment occupancy regardless of segment width.  Because the width never
    enters, refining the comb multiplies more vacancy factors into the same
    span and the free-flight masses drift; kept as the contrast case for the
    refinement study.
    """
    x = ray.point(comb.samples)
    obar = np.clip(np.asarray(opacity_fn(x), dtype=float), 0.0, 1.0)
    vbar = 1.0 - obar
    masses, escape = _masses_from_vbar(vbar)
    return Discretization(sigma_bar=np.full_like(obar, np.nan), vbar=vbar, obar=obar,
                          masses=masses, escape=float(escape))


def expected_depth(disc: Discretization, comb: SampleComb, length: float | None = None):
    """Mean absorption depth, censored mass assigned to the far end."""
    if length is None:
        length = float(comb.edges[-1])
    return float(np.sum(disc.masses * comb.samples) + disc.escape * length)


# ---------------------------------------------------------------------------
# Sign-change importance comb
# ---------------------------------------------------------------------------

def sample_combs(field: ImplicitField, origins, directions, t_near, t_far,
                 coarse: int = 1024, fine: int = 64, rng=None):
    """Vectorized sign-change combs for a batch of rays.

    For each ray the mean field is probed at ``coarse + 1`` equidistant
    stations; the first segment entered from outside whose endpoint values
    change sign receives a third of the ``fine`` samples, with a third before
    it and the remainder after.  Each of the three sets is an equidistant
    comb shifted by a single shared uniform offset.  Rays that start inside
    (``fbar <= 0`` at the near point) use station 0 as the bracketing
    segment; empty before/after intervals donate their samples to the
    bracketing segment; rays with no sign change get one comb over the whole
    span.

    Returns ``(edges, samples)`` with shapes ``(B, fine + 1)`` and
    ``(B, fine)`` in distance-from-near coordinates.
    """
    if coarse < 3 or fine < 3:
        raise ValueError("coarse and fine sample counts must be at least 3")
    if rng is None:
        rng = np.random.default_rng()
    origins = np.atleast_2d(np.asarray(origins, dtype=float))
    directions = np.atleast_2d(np.asarray(directions, dtype=float))
    t_near = np.atleast_1d(np.asarray(t_near, dtype=float))
    t_far = np.atleast_1d(np.asarray(t_far, dtype=float))
    B = origins.shape[0]
    L = t_far - t_near

    frac = np.linspace(0.0, 1.0, coarse + 1)
    taus = L[:, None] * frac[None, :]                       # (B, coarse+1)
    pts = origins[:, None, :] + (t_near[:, None] + taus)[..., None] * directions[:, None, :]
    f = field.mean(pts)                                     # (B, coarse+1)

    entering = f[:, :-1] > 0.0
    crossing = f[:, :-1] * f[:, 1:] <= 0.0
    cand = entering & crossing
    has_cross = cand.any(axis=1)
    first = np.argmax(cand, axis=1)
    inside_start = f[:, 0] <= 0.0
    seg = np.where(inside_start, 0, first)
    found = has_cross | inside_start

    u = rng.random((B, 3))                                  # one offset per comb set

    n_third = fine // 3
    samples = np.empty((B, fine))
    dt = L / coarse
    lo = seg * dt
    hi = (seg + 1) * dt

    def comb_set(a, b, count, offset):
        j = np.arange(count)
        return a[:, None] + (j[None, :] + offset[:, None]) * ((b - a) / count)[:, None]

    # Group rays by which intervals are empty; counts are identical within a
    # group, so each group fills its rows with plain equidistant combs.
    no_cross = ~found
    at_start = found & (seg == 0)
    at_end = found & (seg == coarse - 1) & ~at_start
    interior = found & ~at_start & ~at_end

    if np.any(no_cross):
        m = no_cross
        samples[m] = comb_set(np.zeros(m.sum()), L[m], fine, u[m, 1])
    if np.any(at_start):
        m = at_start
        n_after = fine - 2 * n_third
        s_mid = comb_set(lo[m], hi[m], 2 * n_third, u[m, 1])
        s_after = comb_set(hi[m], L[m], n_after, u[m, 2])
        samples[m] = np.concatenate([s_mid, s_after], axis=1)
    if np.any(at_end):
        m = at_end
        n_sign = fine - n_third
        s_before = comb_set(np.zeros(m.sum()), lo[m], n_third, u[m, 0])
        s_mid = comb_set(lo[m], hi[m], n_sign, u[m, 1])
        samples[m] = np.concatenate([s_before, s_mid], axis=1)
    if np.any(interior):
        m = interior
        n_after = fine - 2 * n_third
        s_before = comb_set(np.zeros(m.sum()), lo[m], n_third, u[m, 0])
        s_mid = comb_set(lo[m], hi[m], n_third, u[m, 1])
        s_after = comb_set(hi[m], L[m], n_after, u[m, 2])
        samples[m] = np.concatenate([s_before, s_mid, s_after], axis=1)

    mids = 0.5 * (samples[:, :-1] + samples[:, 1:])
    edges = np.concatenate([np.zeros((B, 1)), mids, L[:, None]], axis=1)
    return edges, samples


def sample_comb(field: ImplicitField, ray: Ray, coarse: int = 1024,
                fine: int = 64, rng=None) -> SampleComb:
    """Sign-change importance comb for a single ray."""
    edges, samples = sample_combs(field, ray.origin[None, :], ray.direction[None, :],
                                  np.array([ray.t_near]), np.array([ray.t_far]),
                                  coarse=coarse, fine=fine, rng=rng)
    return SampleComb(edges=edges[0], samples=samples[0])


def render_radiance(model, emission, ray: Ray, comb: SampleComb) -> float:
    """Emission-only quadrature: sum of per-segment masses times emission.

    ``emission(x, w_out)`` is evaluated at the segment samples with
    ``w_out = -direction`` (radiance leaves toward the ray origin).
    """
    disc = discretize(model, ray, comb)
    x = ray.point(comb.samples)
    e = np.asarray(emission(x, np.broadcast_to(-ray.direction, x.shape)), dtype=float)
    return float(np.sum(disc.masses * e))
