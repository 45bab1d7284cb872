"""Single-bounce volumetric renderers under a point light.

Two estimators of the same image: :func:`path_trace` starts rays at the
camera, samples a scatter distance from the comb-discretized free-flight
masses, and connects to the light; :func:`light_trace` starts rays at the
light, scatters once, and splats the connection onto the film through the
camera model.  Each tracer uses the attenuation coefficient along its own
ray directions, so the two images agree (up to noise and discretization)
exactly when the coefficient and phase function are reciprocal; a one-sided
coefficient drives them visibly apart.

Film values are linear radiance averaged over the pixel footprint.  Images
are deterministic functions of (config, seed): random streams are keyed by
(seed, tracer, pass, chunk) with a fixed chunk size.
"""

from __future__ import annotations

from dataclasses import dataclass, field as dc_field

import numpy as np

from .fields import ImplicitField
from .scattering import PhaseFunction, phase_closed_form
from .transport import sample_combs

__all__ = [
    "PinholeCamera",
    "PointLight",
    "RenderConfig",
    "path_trace",
    "light_trace",
    "anisotropy_curves",
    "write_ppm",
    "rmse",
]

_CHUNK = 8192        # rays per vectorized batch; fixed so results are seed-stable
_MAX_WORKERS = 2     # render passes fan out to at most this many processes


@dataclass(frozen=True)
class PinholeCamera:
    """Pinhole camera; ``fov`` is the vertical field of view in radians."""

    position: np.ndarray
    look_at: np.ndarray
    fov: float
    width: int
    height: int
    up: np.ndarray = dc_field(default_factory=lambda: np.array([0.0, 0.0, 1.0]))

    def __post_init__(self):
        object.__setattr__(self, "position", np.asarray(self.position, dtype=float))
        object.__setattr__(self, "look_at", np.asarray(self.look_at, dtype=float))
        object.__setattr__(self, "up", np.asarray(self.up, dtype=float))
        if not (0.0 < self.fov < np.pi):
            raise ValueError("fov must lie in (0, pi)")
        if self.width < 1 or self.height < 1:
            raise ValueError("image dimensions must be positive")

    def basis(self):
        fwd = self.look_at - self.position
        fwd = fwd / np.linalg.norm(fwd)
        up = self.up
        if abs(np.dot(fwd, up / np.linalg.norm(up))) > 0.999:
            up = np.array([0.0, 1.0, 0.0])
        right = np.cross(fwd, up)
        right /= np.linalg.norm(right)
        return right, np.cross(right, fwd), fwd

    @property
    def film_extents(self):
        ey = np.tan(0.5 * self.fov)
        return ey * self.width / self.height, ey

    @property
    def pixel_film_area(self) -> float:
        ex, ey = self.film_extents
        return (2.0 * ex / self.width) * (2.0 * ey / self.height)

    def rays_for_pixels(self, cols, rows, jitter):
        """Unit directions through jittered positions inside given pixels."""
        right, up, fwd = self.basis()
        ex, ey = self.film_extents
        px = ((cols + jitter[:, 0]) / self.width * 2.0 - 1.0) * ex
        py = (1.0 - (rows + jitter[:, 1]) / self.height * 2.0) * ey
        d = fwd + px[:, None] * right + py[:, None] * up
        return d / np.linalg.norm(d, axis=-1, keepdims=True)

    def project(self, points):
        """(rows, cols, valid, cos_theta, dist) of world points on the film."""
        right, up, fwd = self.basis()
        ex, ey = self.film_extents
        v = points - self.position
        dist = np.linalg.norm(v, axis=-1)
        zf = v @ fwd
        ok = zf > 1e-9
        zs = np.where(ok, zf, 1.0)
        px = (v @ right) / zs
        py = (v @ up) / zs
        cols = np.floor((px / ex + 1.0) * 0.5 * self.width).astype(int)
        rows = np.floor((1.0 - py / ey) * 0.5 * self.height).astype(int)
        valid = ok & (cols >= 0) & (cols < self.width) & (rows >= 0) & (rows < self.height)
        return rows, cols, valid, zf / np.maximum(dist, 1e-300), dist


@dataclass(frozen=True)
class PointLight:
    position: np.ndarray
    intensity: float

    def __post_init__(self):
        object.__setattr__(self, "position", np.asarray(self.position, dtype=float))


@dataclass(frozen=True)
class RenderConfig:
    """Everything a render needs; ``bounds`` defaults to the field's sphere."""

    model: object                 # anything with .sigma(x, w); usually AttenuationModel
    phase: PhaseFunction
    camera: PinholeCamera
    light: PointLight
    albedo: float = 0.85
    spp: int = 16
    seed: int = 0
    coarse: int = 48
    fine: int = 33
    shadow_quad: int = 12
    exposure: float = 1.0
    bounds: tuple | None = None   # (center (3,), radius)

    def __post_init__(self):
        if self.spp < 1:
            raise ValueError("spp must be at least 1")
        if not 0.0 <= self.albedo <= 1.0:
            raise ValueError("albedo must lie in [0, 1]")

    def scene_bounds(self):
        if self.bounds is not None:
            return np.asarray(self.bounds[0], dtype=float), float(self.bounds[1])
        return self.phase.field.bounding_sphere()


def _clip_sphere(origins, dirs, center, radius):
    """Entry/exit distances of rays against a sphere; valid where they overlap t>=0."""
    oc = origins - center
    b = np.sum(oc * dirs, axis=-1)
    c = np.sum(oc * oc, axis=-1) - radius * radius
    disc = b * b - c
    hit = disc > 0.0
    root = np.sqrt(np.maximum(disc, 0.0))
    t0 = np.maximum(-b - root, 0.0)
    t1 = -b + root
    return t0, t1, hit & (t1 > t0 + 1e-12)


def _exit_distance(points, dirs, center, radius):
    """Distance to sphere exit for rays starting inside (clamped at zero)."""
    oc = points - center
    b = np.sum(oc * dirs, axis=-1)
    c = np.sum(oc * oc, axis=-1) - radius * radius
    disc = np.maximum(b * b - c, 0.0)
    return np.maximum(-b + np.sqrt(disc), 0.0)


def _segment_transmittance(model, starts, dirs, spans, n_quad):
    """exp(-integral of sigma) from each start along dirs over span, midpoint rule."""
    frac = (np.arange(n_quad) + 0.5) / n_quad
    taus = spans[:, None] * frac[None, :]
    pts = starts[:, None, :] + taus[..., None] * dirs[:, None, :]
    sig = model.sigma(pts, dirs[:, None, :])
    return np.exp(-np.sum(sig, axis=-1) * spans / n_quad)


def _masses(model, origins, dirs, t_near, edges, samples):
    pts = origins[:, None, :] + (t_near[:, None] + samples)[..., None] * dirs[:, None, :]
    sig = model.sigma(pts, dirs[:, None, :])
    vbar = np.exp(-sig * np.diff(edges, axis=1))
    t_incl = np.cumprod(vbar, axis=1)
    t_excl = np.concatenate([np.ones_like(t_incl[:, :1]), t_incl[:, :-1]], axis=1)
    return t_excl - t_incl


def _sample_scatter(masses, edges, u):
    """Inverse-CDF over segment masses, linear within the chosen segment.

    Returns (tau, total_mass, scattered_mask).
    """
    total = np.sum(masses, axis=1)
    scattered = u < total
    cum = np.cumsum(masses, axis=1)
    idx = np.argmax(cum >= u[:, None], axis=1)
    idx = np.minimum(idx, masses.shape[1] - 1)
    below = cum[np.arange(len(u)), idx] - masses[np.arange(len(u)), idx]
    m = masses[np.arange(len(u)), idx]
    frac = np.where(m > 0.0, (u - below) / np.where(m > 0.0, m, 1.0), 0.5)
    lo = edges[np.arange(len(u)), idx]
    hi = edges[np.arange(len(u)), idx + 1]
    return lo + frac * (hi - lo), total, scattered


def _rng(seed, stream, pass_idx, chunk_idx):
    return np.random.default_rng(np.random.SeedSequence((seed, stream, pass_idx, chunk_idx)))


def _phase_values(cfg: RenderConfig, x, wo, wi):
    n_axis, bad = cfg.model.normal_with_fallback(x)
    fp = phase_closed_form(cfg.phase, x, wo, wi, n_axis=n_axis)
    if np.any(bad):
        # no usable normal: treat the distribution as isotropic at this point
        from .scattering import lambert_lune_integral

        gamma = np.arccos(np.clip(np.sum(wo * wi, axis=-1), -1.0, 1.0))
        iso = (cfg.phase.base.albedo_scale / (4.0 * np.pi * np.pi)) \
            * lambert_lune_integral(gamma) / 0.5
        fp = np.where(bad, iso, fp)
    return fp


def _path_pass(cfg: RenderConfig, k: int) -> np.ndarray:
    """One sample-per-pixel pass of the path tracer; returns a flat film."""
    cam, light = cfg.camera, cfg.light
    center, radius = cfg.scene_bounds()
    H, W = cam.height, cam.width
    film = np.zeros(H * W)
    pix = np.arange(H * W)
    rows_all, cols_all = pix // W, pix % W
    field = cfg.phase.field

    for ci, start in enumerate(range(0, H * W, _CHUNK)):
        sel = slice(start, min(start + _CHUNK, H * W))
        rng = _rng(cfg.seed, 0, k, ci)
        cols, rows = cols_all[sel], rows_all[sel]
        jitter = rng.random((cols.size, 2))
        dirs = cam.rays_for_pixels(cols, rows, jitter)
        origins = np.broadcast_to(cam.position, dirs.shape)
        t0, t1, ok = _clip_sphere(origins, dirs, center, radius)
        u_scatter = rng.random(cols.size)
        rng_comb = np.random.default_rng(np.random.SeedSequence((cfg.seed, 0, k, ci, 1)))
        if not np.any(ok):
            continue
        o, d = origins[ok], dirs[ok]
        tn = t0[ok]
        edges, samples = sample_combs(field, o, d, tn, t1[ok],
                                      coarse=cfg.coarse, fine=cfg.fine, rng=rng_comb)
        masses = _masses(cfg.model, o, d, tn, edges, samples)
        tau, total, scattered = _sample_scatter(masses, edges, u_scatter[ok])
        if not np.any(scattered):
            continue
        x = o[scattered] + (tn[scattered] + tau[scattered])[:, None] * d[scattered]
        to_light = light.position - x
        r_l = np.linalg.norm(to_light, axis=-1)
        w_l = to_light / r_l[:, None]
        span = np.minimum(r_l, _exit_distance(x, w_l, center, radius))
        t_sh = _segment_transmittance(cfg.model, x, w_l, span, cfg.shadow_quad)
        fp = _phase_values(cfg, x, -d[scattered], w_l)
        val = (total[scattered] * cfg.albedo * fp * t_sh
               * light.intensity / (r_l * r_l))
        contrib = np.zeros(cols.size)
        sub = np.zeros(int(np.count_nonzero(ok)))
        sub[scattered] = val
        contrib[ok] = sub
        film[sel] += contrib
    return film


def _light_pass(cfg: RenderConfig, k: int) -> np.ndarray:
    """One pass of the light tracer (H*W particles); returns a flat film."""
    cam, light = cfg.camera, cfg.light
    center, radius = cfg.scene_bounds()
    H, W = cam.height, cam.width
    film = np.zeros((H, W))
    field = cfg.phase.field

    to_center = center - light.position
    dist = np.linalg.norm(to_center)
    if dist > radius:
        cos_max = np.sqrt(max(0.0, 1.0 - (radius / dist) ** 2))
        axis = to_center / dist
    else:
        cos_max = -1.0
        axis = np.array([0.0, 0.0, 1.0])
    pdf_dir = 1.0 / (2.0 * np.pi * (1.0 - cos_max))
    b1 = np.cross(axis, np.array([0.0, 0.0, 1.0]) if abs(axis[2]) < 0.9 else np.array([1.0, 0.0, 0.0]))
    b1 /= np.linalg.norm(b1)
    b2 = np.cross(axis, b1)
    a_pix = cam.pixel_film_area

    for ci, start in enumerate(range(0, H * W, _CHUNK)):
        count = min(start + _CHUNK, H * W) - start
        rng = _rng(cfg.seed, 1, k, ci)
        u1 = rng.random(count)
        phi = rng.uniform(0.0, 2.0 * np.pi, size=count)
        cos_t = 1.0 - u1 * (1.0 - cos_max)
        sin_t = np.sqrt(np.maximum(0.0, 1.0 - cos_t * cos_t))
        dirs = (cos_t[:, None] * axis
                + (sin_t * np.cos(phi))[:, None] * b1
                + (sin_t * np.sin(phi))[:, None] * b2)
        origins = np.broadcast_to(light.position, dirs.shape)
        u_scatter = rng.random(count)
        rng_comb = np.random.default_rng(np.random.SeedSequence((cfg.seed, 1, k, ci, 1)))
        t0, t1, ok = _clip_sphere(origins, dirs, center, radius)
        if not np.any(ok):
            continue
        o, d = origins[ok], dirs[ok]
        tn = t0[ok]
        edges, samples = sample_combs(field, o, d, tn, t1[ok],
                                      coarse=cfg.coarse, fine=cfg.fine, rng=rng_comb)
        masses = _masses(cfg.model, o, d, tn, edges, samples)
        tau, total, scattered = _sample_scatter(masses, edges, u_scatter[ok])
        if not np.any(scattered):
            continue
        x = o[scattered] + (tn[scattered] + tau[scattered])[:, None] * d[scattered]
        rows, cols, visible, cos_f, r_c = cam.project(x)
        if not np.any(visible):
            continue
        x = x[visible]
        w0 = d[scattered][visible]
        rows, cols = rows[visible], cols[visible]
        cos_f, r_c = cos_f[visible], r_c[visible]
        w_c = (cam.position - x) / r_c[:, None]
        span = np.minimum(r_c, _exit_distance(x, w_c, center, radius))
        t_cam = _segment_transmittance(cfg.model, x, w_c, span, cfg.shadow_quad)
        fp = _phase_values(cfg, x, -w0, w_c)
        contrib = (light.intensity * total[scattered][visible] * cfg.albedo * fp
                   * t_cam / (pdf_dir * r_c * r_c * cos_f ** 3 * a_pix))
        np.add.at(film, (rows, cols), contrib)
    return film.ravel()


def _accumulate_passes(cfg: RenderConfig, pass_fn) -> np.ndarray:
    """Sum per-pass films in pass order, fanning out to worker processes.

    The merge order is fixed by the pass index, so the result is bit-equal
    whether passes run inline or across processes.
    """
    import os

    workers = min(_MAX_WORKERS, os.cpu_count() or 1)
    total = np.zeros(cfg.camera.height * cfg.camera.width)
    if workers <= 1 or cfg.spp < 2 * workers:
        for k in range(cfg.spp):
            total += pass_fn(cfg, k)
        return total
    from concurrent.futures import ProcessPoolExecutor

    with ProcessPoolExecutor(max_workers=workers) as pool:
        for film in pool.map(pass_fn, [cfg] * cfg.spp, range(cfg.spp),
                             chunksize=max(1, cfg.spp // (4 * workers))):
            total += film
    return total


def path_trace(cfg: RenderConfig) -> np.ndarray:
    """Camera-first single-scatter estimate; returns linear (H, W) radiance."""
    film = _accumulate_passes(cfg, _path_pass)
    return (film / cfg.spp).reshape(cfg.camera.height, cfg.camera.width)


def light_trace(cfg: RenderConfig) -> np.ndarray:
    """Light-first single-scatter estimate of the same image as path_trace.

    Directions from the light are drawn uniformly inside the cone subtending
    the scene bounds; the connection to the camera carries the transmittance
    toward the camera, the phase value, and the pinhole footprint Jacobian.
    """
    film = _accumulate_passes(cfg, _light_pass)
    n_total = cfg.spp * cfg.camera.height * cfg.camera.width
    return (film / n_total).reshape(cfg.camera.height, cfg.camera.width)


# ---------------------------------------------------------------------------
# Anisotropy curves
# ---------------------------------------------------------------------------

def anisotropy_curves(field: ImplicitField, normal_model, n_theta: int = 181,
                      probe_direction=None):
    """Projected area versus angle at a surface point and an interior point.

    Probes along a diameter of the scene bounds: the surface point is the
    first zero crossing of the mean field (bisected to machine precision),
    the interior point the minimizer of the mean along the probe.  Returns
    ``(theta, area_surface, area_interior)`` arrays with theta in [0, pi].
    """
    from .attenuation import projected_area_from_cosine

    center, radius = field.bounding_sphere()
    e = np.asarray(probe_direction if probe_direction is not None else [1.0, 0.0, 0.0], dtype=float)
    e = e / np.linalg.norm(e)
    start = center + radius * e
    taus = np.linspace(0.0, 2.0 * radius, 513)
    pts = start - taus[:, None] * e
    f = field.mean(pts)
    crossing = np.flatnonzero((f[:-1] > 0.0) & (f[:-1] * f[1:] <= 0.0))
    if crossing.size == 0:
        raise ValueError("probe found no surface crossing; supply another direction")
    lo, hi = taus[crossing[0]], taus[crossing[0] + 1]
    for _ in range(80):
        mid = 0.5 * (lo + hi)
        if field.mean(start - mid * e) > 0.0:
            lo = mid
        else:
            hi = mid
    x_surface = start - 0.5 * (lo + hi) * e
    x_interior = pts[np.argmin(f)]

    theta = np.linspace(0.0, np.pi, n_theta)

    def curve(x):
        # projected area depends on the direction only through cos(theta)
        return projected_area_from_cosine(normal_model, np.broadcast_to(x, (n_theta, 3)),
                                          np.cos(theta))

    return theta, curve(x_surface), curve(x_interior)


# ---------------------------------------------------------------------------
# Output
# ---------------------------------------------------------------------------

def write_ppm(path, image, exposure: float = 1.0):
    """Write linear radiance as binary 8-bit PPM with gamma 2.2 encoding."""
    img = np.asarray(image, dtype=float)
    if img.ndim == 2:
        img = np.repeat(img[:, :, None], 3, axis=2)
    if img.ndim != 3 or img.shape[2] != 3:
        raise ValueError("image must have shape (H, W) or (H, W, 3)")
    enc = np.clip(img * exposure, 0.0, 1.0) ** (1.0 / 2.2)
    data = np.round(enc * 255.0).astype(np.uint8)
    h, w = img.shape[:2]
    with open(path, "wb") as fh:
        fh.write(f"P6\n{w} {h}\n255\n".encode("ascii"))
        fh.write(data.tobytes())


def rmse(a, b) -> float:
    a = np.asarray(a, dtype=float)
    b = np.asarray(b, dtype=float)
    return float(np.sqrt(np.mean((a - b) ** 2)))
