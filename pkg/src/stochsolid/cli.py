"""Command-line interface.

Subcommands:

* ``render`` -- path- or light-traced image of a scene document, PPM out.
* ``curves`` -- transmittance and free-flight CSV along a probe ray.
* ``verify`` -- run the oracle suite; table to stdout, residual CSV optional.
* ``aniso``  -- projected-area-versus-angle CSV at surface/interior probes.

Exit codes: 0 success, 1 configuration error, 2 verification failure.
"""

from __future__ import annotations

import argparse
import csv
import sys

import numpy as np

from . import scenes
from .attenuation import reciprocity_gap
from .oracle import integrate_vacancy_ode, minimal_rates, rates_from_model, simulate_indicator
from .render import anisotropy_curves, light_trace, path_trace, write_ppm
from .sceneio import SceneError, load_scene
from .transport import Ray, SampleComb, discretize, free_flight_pdf, sample_comb, transmittance
from .attenuation import vacancy


def _parse_vec(text):
    parts = [float(p) for p in text.split(",")]
    if len(parts) != 3:
        raise argparse.ArgumentTypeError("expected three comma-separated numbers")
    return np.array(parts)


def _add_render(sub):
    p = sub.add_parser("render", help="render a scene document to a PPM image")
    p.add_argument("--config", required=True, help="scene JSON document")
    p.add_argument("--mode", choices=["path", "light"], default="path")
    p.add_argument("--out", required=True, help="output PPM path")
    p.add_argument("--spp", type=int, default=None)
    p.add_argument("--seed", type=int, default=None)
    p.add_argument("--exposure", type=float, default=None)


def _add_curves(sub):
    p = sub.add_parser("curves", help="emit t,transmittance,free_flight_pdf CSV along a ray")
    p.add_argument("--config", required=True)
    p.add_argument("--origin", type=_parse_vec, default=None, help="x,y,z (default: outside the scene)")
    p.add_argument("--direction", type=_parse_vec, default=None, help="x,y,z (normalized)")
    p.add_argument("--near", type=float, default=0.0)
    p.add_argument("--far", type=float, default=None)
    p.add_argument("--samples", type=int, default=256, help="output grid size")
    p.add_argument("--coarse", type=int, default=1024, help="quadrature points per evaluation")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out", default=None, help="CSV path (default stdout)")


def _add_verify(sub):
    p = sub.add_parser("verify", help="run the brute-force oracle suite")
    p.add_argument("--trials", type=int, default=20000)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out-csv", default=None, help="write checkpoint residuals here")


def _add_aniso(sub):
    p = sub.add_parser("aniso", help="projected area versus angle at surface/interior probes")
    p.add_argument("--config", required=True)
    p.add_argument("--thetas", type=int, default=181)
    p.add_argument("--out", default=None, help="CSV path (default stdout)")


def _open_out(path):
    return open(path, "w", newline="", encoding="utf-8") if path else sys.stdout


def cmd_render(args) -> int:
    scene = load_scene(args.config)
    overrides = {}
    if args.spp is not None:
        overrides["spp"] = args.spp
    if args.seed is not None:
        overrides["seed"] = args.seed
    if args.exposure is not None:
        overrides["exposure"] = args.exposure
    cfg = scene.render_config(**overrides)
    image = path_trace(cfg) if args.mode == "path" else light_trace(cfg)
    write_ppm(args.out, image, exposure=cfg.exposure)
    return 0


def cmd_curves(args) -> int:
    scene = load_scene(args.config)
    field = scene.implicit
    center, radius = field.bounding_sphere()
    origin = args.origin if args.origin is not None else center + np.array([0.0, -(radius + 0.5), 0.0])
    direction = args.direction if args.direction is not None else center - origin
    direction = direction / np.linalg.norm(direction)
    far = args.far if args.far is not None else float(np.linalg.norm(center - origin) + radius)
    ray = Ray(origin=origin, direction=direction, t_near=args.near, t_far=far)
    ts = np.linspace(0.0, ray.length, args.samples)
    trans = transmittance(scene.model, ray, ts, n_quad=args.coarse)
    ff = free_flight_pdf(scene.model, ray, ts, n_quad=args.coarse)
    out = _open_out(args.out)
    try:
        w = csv.writer(out)
        w.writerow(["t", "transmittance", "free_flight_pdf"])
        for t, tr, f in zip(ts, trans, ff):
            w.writerow([f"{t:.9g}", f"{tr:.9g}", f"{f:.9g}"])
    finally:
        if out is not sys.stdout:
            out.close()
    return 0


def _verify_rows(trials: int, seed: int):
    """Oracle suite rows: (name, value, bound, ok) plus checkpoint residuals."""
    rows, residuals = [], []
    rng = np.random.default_rng(seed)

    # 1. constant-rate jump process is exponential
    ramp = scenes.linear_ramp_field()

    class _Const:
        def __init__(self, rate):
            self.rate = rate

        def sigma01(self, x, w):
            return np.full(np.asarray(x).shape[:-1], self.rate)

        def sigma10(self, x, w):
            return np.zeros(np.asarray(x).shape[:-1])

    from .oracle import TransitionRates

    rate = 2.0
    const = TransitionRates(sigma01=_Const(rate).sigma01, sigma10=_Const(rate).sigma10)
    ray = Ray(origin=np.array([0.0, 0.0, -5.0]), direction=np.array([0.0, 0.0, 1.0]),
              t_near=0.0, t_far=6.0)
    res = simulate_indicator(const, ray, trials, rng)
    jumped = res.times[np.isfinite(res.times)]
    mean_err = abs(jumped.mean() - 1.0 / rate)
    rows.append(("constant-rate mean jump ~ 1/rate", mean_err, 3.0 / (rate * np.sqrt(trials)),
                 mean_err <= 3.0 / (rate * np.sqrt(trials))))

    # 2. empirical survival matches transmittance on ramp and sphere
    for name, field in [("linear_ramp", ramp), ("sphere", scenes.sphere_field())]:
        model = scenes.ours_mixture_model(field, alpha=0.7)
        if name == "linear_ramp":
            r = Ray(origin=np.array([0.3, -0.2, -1.5]), direction=np.array([0.0, 0.0, 1.0]),
                    t_near=0.0, t_far=3.0)
        else:
            r = Ray(origin=np.array([0.0, -2.5, 0.15]), direction=np.array([0.0, 1.0, 0.0]),
                    t_near=0.0, t_far=5.0)
        sim = simulate_indicator(rates_from_model(model), r, trials, rng)
        taus = np.linspace(0.05, r.length, 20)
        cdf_emp, _ = sim.empirical_cdf(taus)
        t_analytic = transmittance(model, r, taus, n_quad=2048)
        se = np.sqrt(np.maximum(t_analytic * (1.0 - t_analytic), 1e-12) / trials)
        worst = float(np.max(np.abs((1.0 - cdf_emp) - t_analytic) / se))
        rows.append((f"{name}: survival vs transmittance (max |z|)", worst, 3.0, worst <= 3.0))
        for t, a, e in zip(taus, t_analytic, 1.0 - cdf_emp):
            residuals.append({"check": name, "t": t, "analytic": a, "empirical": e,
                              "se": float(np.sqrt(max(a * (1.0 - a), 1e-12) / trials))})

    # 3. reversibility round trips
    probe_dir = np.array([0.25, 0.4, 0.88])
    probe_dir /= np.linalg.norm(probe_dir)
    for name, field in scenes.test_fields():
        rates = minimal_rates(field)
        center, bound = field.bounding_sphere()
        start = center - (bound + 0.3) * probe_dir + np.array([0.07, -0.05, 0.0])
        r = Ray(origin=start, direction=probe_dir, t_near=0.0, t_far=2.0 * (bound + 0.3))
        v0 = float(vacancy(field, r.point(0.0)))
        v0 = min(max(v0, 1e-9), 1.0 - 1e-9)
        _, fwd = integrate_vacancy_ode(rates, r, v0, steps_per_unit=2000)
        _, back = integrate_vacancy_ode(rates, r, float(np.atleast_1d(fwd)[-1]),
                                        reverse=True, steps_per_unit=2000)
        err = abs(float(np.atleast_1d(back)[-1]) - v0)
        rows.append((f"{name}: vacancy ODE round trip", err, 1e-6, err <= 1e-6))

    # 4. reciprocity gaps
    sphere = scenes.sphere_field()
    probes_x = rng.normal(size=(1000, 3))
    probes_x *= (0.4 + 1.2 * rng.random((1000, 1))) / np.linalg.norm(probes_x, axis=1, keepdims=True)
    probes_w = rng.normal(size=(1000, 3))
    probes_w /= np.linalg.norm(probes_w, axis=1, keepdims=True)
    from .attenuation import CosineAnnealedModel, NeusModel, VolSDFModel

    for name, model in [
        ("ours", scenes.ours_mixture_model(sphere, alpha=0.7)),
        ("volsdf", VolSDFModel(field=scenes.sphere_field(dist=scenes.SymmetricDistribution.LAPLACE))),
        ("cosine_annealed", CosineAnnealedModel(field=scenes.sphere_field(dist=scenes.SymmetricDistribution.LOGISTIC), alpha=0.4)),
    ]:
        gap = reciprocity_gap(model, probes_x, probes_w)
        rows.append((f"reciprocity gap ({name})", gap, 1e-12, gap <= 1e-12))
    neus = NeusModel(field=scenes.sphere_field(dist=scenes.SymmetricDistribution.LOGISTIC))
    gap = reciprocity_gap(neus, probes_x, probes_w)
    rows.append(("reciprocity gap (neus, must exceed 0.01)", gap, 0.01, gap > 0.01))

    # 5. quadrature partition of unity
    model = scenes.ours_mixture_model(sphere, alpha=0.7)
    r = Ray(origin=np.array([0.0, -2.5, 0.1]), direction=np.array([0.0, 1.0, 0.0]),
            t_near=0.0, t_far=5.0)
    comb = sample_comb(sphere, r, coarse=256, fine=33, rng=np.random.default_rng(seed))
    disc = discretize(model, r, comb)
    defect = abs(float(np.sum(disc.masses) + disc.escape) - 1.0)
    rows.append(("partition of unity defect", defect, 1e-12, defect <= 1e-12))

    return rows, residuals


def cmd_verify(args) -> int:
    rows, residuals = _verify_rows(args.trials, args.seed)
    width = max(len(r[0]) for r in rows) + 2
    print(f"{'check':<{width}}{'value':>14}{'bound':>14}  status")
    ok_all = True
    for name, value, bound, ok in rows:
        ok_all &= ok
        print(f"{name:<{width}}{value:>14.4g}{bound:>14.4g}  {'PASS' if ok else 'FAIL'}")
    if args.out_csv:
        with open(args.out_csv, "w", newline="", encoding="utf-8") as fh:
            w = csv.DictWriter(fh, fieldnames=["check", "t", "analytic", "empirical", "se"])
            w.writeheader()
            w.writerows(residuals)
    return 0 if ok_all else 2


def cmd_aniso(args) -> int:
    scene = load_scene(args.config)
    model = scene.model
    nm = getattr(model, "normal_model", None) or scene.phase.nm
    theta, surf, inter = anisotropy_curves(scene.implicit, nm, n_theta=args.thetas)
    out = _open_out(args.out)
    try:
        w = csv.writer(out)
        w.writerow(["theta", "sigma_proj_surface", "sigma_proj_interior"])
        for t, s, i in zip(theta, surf, inter):
            w.writerow([f"{t:.9g}", f"{s:.17g}", f"{i:.17g}"])
    finally:
        if out is not sys.stdout:
            out.close()
    return 0


def main(argv=None) -> int:
    parser = argparse.ArgumentParser(prog="stochsolid",
                                     description="stochastic opaque solids toolkit")
    sub = parser.add_subparsers(dest="command", required=True)
    _add_render(sub)
    _add_curves(sub)
    _add_verify(sub)
    _add_aniso(sub)
    args = parser.parse_args(argv)
    try:
        if args.command == "render":
            return cmd_render(args)
        if args.command == "curves":
            return cmd_curves(args)
        if args.command == "verify":
            return cmd_verify(args)
        return cmd_aniso(args)
    except (SceneError, OSError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
