"""Independent verification machinery.

Three brute-force oracles check the closed forms elsewhere in the package:

* :func:`simulate_indicator` runs the continuous-time binary jump process
  along a ray by thinning and returns the empirical law of the first
  outside-to-inside transition; its survival function must match the
  analytic transmittance.
* :func:`integrate_vacancy_ode` integrates the scalar balance equation
  ``w . grad V = -V s01 + (1 - V) s10`` with RK4; traversing a segment
  forward and then backward must return the initial vacancy.
* :func:`spherical_integral` and :func:`spherical_ndf_mass` estimate the
  foreshortening integral and the total mass of a distribution of normals by
  Monte Carlo over the sphere.

With the minimal (free variable set to zero) rate pair

    s01 = |w . grad V| / V,        s10 = 2 max(0, w . grad V) / (1 - V),

the balance equation holds identically and the jump process is reversible.
"""

from __future__ import annotations

from dataclasses import dataclass
import warnings

import numpy as np

from .attenuation import (
    SIGMA_MAX,
    AttenuationModel,
    NormalKind,
    NormalModel,
    vacancy,
)
from .distributions import pdf
from .fields import ImplicitField, _as_points
from .transport import Ray

__all__ = [
    "TransitionRates",
    "minimal_rates",
    "rates_from_model",
    "FirstJumpResult",
    "simulate_indicator",
    "integrate_vacancy_ode",
    "spherical_integral",
    "spherical_ndf_mass",
    "sample_sphere",
]

_V_CLIP = 1e-12


def _vacancy_and_directional(field: ImplicitField, x, omega):
    """(V, w . grad V) with V clipped away from {0, 1}."""
    f, g = field.mean_and_grad(x)
    s = field.scale(x)
    u = s * f
    if field.scale.is_constant:
        gv = s[..., None] * g
    else:
        gv = s[..., None] * g + f[..., None] * field.scale.grad(x)
    dirderiv = pdf(field.dist, u) * np.sum(np.asarray(omega, dtype=float) * gv, axis=-1)
    v = np.clip(field.dist.cdf(u), _V_CLIP, 1.0 - _V_CLIP)
    return v, dirderiv


@dataclass(frozen=True)
class TransitionRates:
    """Outside-to-inside and inside-to-outside rate fields along directions.

    ``sigma01(x, w)`` and ``sigma10(x, w)`` are nonnegative per-length rates;
    the generator of the two-state process at ``(x, w)`` is
    ``[[-s01, s01], [s10, -s10]]`` (rows sum to zero by construction).
    ``pair``, when present, returns both rates from one field evaluation.
    """

    sigma01: callable
    sigma10: callable
    pair: callable | None = None

    def both(self, x, w):
        if self.pair is not None:
            return self.pair(x, w)
        return self.sigma01(x, w), self.sigma10(x, w)


def minimal_rates(field: ImplicitField) -> TransitionRates:
    """The reversible rate pair with the free variable set to zero."""

    def both(x, w):
        v, d = _vacancy_and_directional(field, x, w)
        s01 = np.minimum(np.abs(d) / v, SIGMA_MAX)
        s10 = np.minimum(2.0 * np.maximum(0.0, d) / (1.0 - v), SIGMA_MAX)
        return s01, s10

    return TransitionRates(sigma01=lambda x, w: both(x, w)[0],
                           sigma10=lambda x, w: both(x, w)[1],
                           pair=both)


def rates_from_model(model: AttenuationModel) -> TransitionRates:
    """Rates whose first-jump law reproduces ``model``'s free flight.

    The outside-to-inside rate is the model's attenuation coefficient; the
    return rate is the minimal one of the underlying field (only the first
    rate matters for first-jump simulation).
    """
    base = minimal_rates(model.field)
    return TransitionRates(sigma01=model.sigma, sigma10=base.sigma10)


# ---------------------------------------------------------------------------
# First-jump simulation by thinning
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class FirstJumpResult:
    """Empirical first outside-to-inside jump distances along a ray.

    ``times`` holds one distance (from ``t_near``) per trial, ``inf`` where
    the trial left the ray without jumping.  ``majorant_violations`` counts
    proposals where the local rate exceeded the segment majorant (the
    acceptance probability is clipped; a nonzero count signals a majorant
    that is too tight).
    """

    times: np.ndarray
    length: float
    majorant_violations: int = 0

    def empirical_cdf(self, taus):
        """(cdf, standard error) of the jump distance at each ``tau``."""
        taus = np.asarray(taus, dtype=float)
        n = self.times.size
        p = np.mean(self.times[None, :] <= taus[..., None], axis=-1)
        se = np.sqrt(p * (1.0 - p) / n)
        return p, se


def simulate_indicator(rates: TransitionRates, ray: Ray, trials: int, rng,
                       majorant_segments: int = 64) -> FirstJumpResult:
    """Simulate first 0 -> 1 jump distances by thinning.

    The ray is cut into ``majorant_segments`` equal pieces; each piece gets
    the majorant ``min(SIGMA_MAX, 1.5 * max of sigma01 at its endpoints and
    midpoint)``.  Candidate jumps are proposed from the exponential law of
    the local majorant and accepted with probability ``sigma01 / majorant``;
    trials that reach the far end are censored at infinity.
    """
    if trials < 1:
        raise ValueError("trials must be at least 1")
    L = ray.length
    nseg = majorant_segments
    edges = np.linspace(0.0, L, nseg + 1)
    probe = np.sort(np.concatenate([edges, 0.5 * (edges[:-1] + edges[1:])]))
    sig_probe = rates.sigma01(ray.point(probe), np.broadcast_to(ray.direction, (probe.size, 3)))
    # probes alternate edge, mid, edge, ...; segment i spans probe 2i .. 2i+2
    seg_max = np.maximum(np.maximum(sig_probe[0:-2:2], sig_probe[1::2]), sig_probe[2::2])
    majorant = np.minimum(SIGMA_MAX, 1.5 * np.maximum(seg_max, 1e-300))

    tau = np.zeros(trials)
    seg = np.zeros(trials, dtype=int)
    jump = np.full(trials, np.inf)
    alive = np.ones(trials, dtype=bool)
    violations = 0

    while np.any(alive):
        idx = np.flatnonzero(alive)
        m = majorant[seg[idx]]
        step = rng.exponential(1.0, size=idx.size) / m
        t_new = tau[idx] + step
        boundary = edges[seg[idx] + 1]
        crossed = t_new >= boundary
        # move crossed trials to the next segment boundary
        ci = idx[crossed]
        tau[ci] = boundary[crossed]
        seg[ci] += 1
        finished = seg[ci] >= nseg
        alive[ci[finished]] = False
        # candidates inside the current segment: thin against the majorant
        ki = idx[~crossed]
        if ki.size:
            tau[ki] = t_new[~crossed]
            x = ray.point(tau[ki])
            sig = rates.sigma01(x, np.broadcast_to(ray.direction, x.shape))
            mk = m[~crossed]
            violations += int(np.count_nonzero(sig > mk * (1.0 + 1e-9)))
            accept = rng.random(ki.size) < np.minimum(1.0, sig / mk)
            ai = ki[accept]
            jump[ai] = tau[ai]
            alive[ai] = False

    return FirstJumpResult(times=jump, length=L, majorant_violations=violations)


# ---------------------------------------------------------------------------
# Vacancy ODE
# ---------------------------------------------------------------------------

def integrate_vacancy_ode(rates: TransitionRates, ray: Ray, v0, reverse: bool = False,
                          steps_per_unit: float = 1e4):
    """RK4 integration of ``dV/dtau = -V s01 + (1 - V) s10`` along the ray.

    With ``reverse=True`` the segment is traversed from the far end with the
    opposite direction fed to the rate fields.  Returns ``(taus, V)`` where
    ``taus`` are the ``n + 1`` step endpoints measured along the traversal.
    The state is clamped to ``[1e-12, 1 - 1e-12]``; a clamp triggers a
    warning because it signals the integrator left the meaningful range.
    """
    v0 = np.atleast_1d(np.asarray(v0, dtype=float))
    if np.any(v0 <= 0.0) or np.any(v0 >= 1.0):
        raise ValueError("v0 must lie strictly inside (0, 1)")
    path = ray.reversed() if reverse else ray
    L = path.length
    n = max(2, int(np.ceil(L * steps_per_unit)))
    h = L / n
    taus = np.linspace(0.0, L, n + 1)
    w = np.broadcast_to(path.direction, (v0.size, 3))

    def rhs(tau, v):
        x = np.broadcast_to(path.point(tau), (v0.size, 3))
        s01, s10 = rates.both(x, w)
        return -v * s01 + (1.0 - v) * s10

    out = np.empty((n + 1, v0.size))
    out[0] = v0
    v = v0.copy()
    clamped = 0
    for i in range(n):
        t = taus[i]
        k1 = rhs(t, v)
        k2 = rhs(t + 0.5 * h, v + 0.5 * h * k1)
        k3 = rhs(t + 0.5 * h, v + 0.5 * h * k2)
        k4 = rhs(t + h, v + h * k3)
        v = v + (h / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4)
        lo, hi = _V_CLIP, 1.0 - _V_CLIP
        bad = (v < lo) | (v > hi)
        if np.any(bad):
            clamped += int(np.count_nonzero(bad))
            v = np.clip(v, lo, hi)
        out[i + 1] = v
    if clamped:
        warnings.warn(f"vacancy ODE clamped {clamped} step value(s) to (0, 1)", RuntimeWarning)
    return taus, out.squeeze(axis=1) if v0.size == 1 else out


# ---------------------------------------------------------------------------
# Spherical Monte Carlo
# ---------------------------------------------------------------------------

def sample_sphere(rng, n: int) -> np.ndarray:
    """Uniform directions on the unit sphere, shape (n, 3)."""
    z = rng.uniform(-1.0, 1.0, size=n)
    phi = rng.uniform(0.0, 2.0 * np.pi, size=n)
    r = np.sqrt(np.maximum(0.0, 1.0 - z * z))
    return np.stack([r * np.cos(phi), r * np.sin(phi), z], axis=-1)


def _continuous_ndf(nm: NormalModel, x, cosines):
    from .attenuation import sggx_ndf, vmf_ndf

    if nm.kind is NormalKind.UNIFORM:
        return np.full(np.shape(cosines), 1.0 / (4.0 * np.pi))
    a = nm.alpha_at(np.atleast_2d(x))[0]
    if nm.kind is NormalKind.SGGX:
        return sggx_ndf(a, cosines)
    if nm.kind is NormalKind.VMF:
        return vmf_ndf(a, cosines)
    raise ValueError(f"{nm.kind.value} has no continuous density")


def spherical_integral(nm: NormalModel, x, omega, n, samples: int, rng):
    """Monte Carlo estimate of ``int |omega . m| D(m) dm`` with standard error.

    Uniform sphere sampling with importance weight ``4 pi D(m) |omega . m|``.
    Dirac components are integrated exactly and only the continuous remainder
    is estimated, so delta and uniform mixtures carry no bias.
    """
    omega = np.asarray(omega, dtype=float)
    n = np.asarray(n, dtype=float)
    c_wn = float(np.dot(omega, n))
    if nm.kind is NormalKind.DELTA:
        return abs(c_wn), 0.0
    m = sample_sphere(rng, samples)
    if nm.kind is NormalKind.MIXTURE:
        a = float(nm.alpha_at(np.atleast_2d(x))[0])
        w = 4.0 * np.pi * (1.0 / (4.0 * np.pi)) * np.abs(m @ omega)
        est = a * abs(c_wn) + (1.0 - a) * np.mean(w)
        se = (1.0 - a) * np.std(w) / np.sqrt(samples)
        return float(est), float(se)
    d = _continuous_ndf(nm, x, m @ n)
    w = 4.0 * np.pi * d * np.abs(m @ omega)
    return float(np.mean(w)), float(np.std(w) / np.sqrt(samples))


def spherical_ndf_mass(nm: NormalModel, x, n, samples: int, rng):
    """Monte Carlo estimate of ``int D(m) dm`` (should be one) with its SE."""
    n = np.asarray(n, dtype=float)
    if nm.kind is NormalKind.DELTA:
        return 1.0, 0.0
    if nm.kind is NormalKind.MIXTURE:
        return 1.0, 0.0
    m = sample_sphere(rng, samples)
    d = _continuous_ndf(nm, x, m @ n)
    w = 4.0 * np.pi * d
    return float(np.mean(w)), float(np.std(w) / np.sqrt(samples))
