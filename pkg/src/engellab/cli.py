"""Command-line driver: parse a config, run a verification suite, emit a
report.

Commands: verify-engel | prolong | contactify | normal-form | realize | gray
| zoll-closedness | central-projection | so3.  Every suite is deterministic
for a fixed config and seed; the report body is byte-identical across runs
(only the wall-time line varies).

Exit status: 0 all checks pass, 1 a check failed, 2 config/parse error,
3 geometry error (the offending point is logged to stderr).
"""

from __future__ import annotations

import argparse
import json
import math
import sys
import time

import numpy as np

from .calculus import Chart, constant_field
from .deformation import (ContactFormPath, ContactIsotopyGenerator,
                          bottom_to_top, gray_solve, realize_isotopy)
from .distributions import (DistributionFrame, characteristic_line,
                            flag_ranks, lie_bracket, plane_principal_angle)
from .errors import ConfigError, EngelLabError, GeometryError
from .expressions import Expression, scalar_field_from_expr, vector_field_from_exprs
from .flow import integrate
from .jets import Jet, multi_indices
from .normal_form import (LegendrianPairJet, ODE_CHART, _linear_pushforward,
                          extract_ode, normalize_pair, pair_from_ode)
from .prolongation import ParallelizedContact, contactify, prolong
from .reporting import Report, render
from .zoll import (SingleChartSpace, SphereAtlas, central_projection_check,
                   closedness_report, euclidean_metric, hamiltonian_alignment,
                   legendre_ray_map, legendre_ray_map_inverse, revolution_metric,
                   so3_engel_frame, so3_frame_fields, stereographic_sphere_metric)

ENGEL_CHART = Chart("engel", ("x", "y", "z", "w"))
CONTACT_CHART = Chart("standard_contact", ("x", "y", "z"))

_DEFAULTS = {
    "verify-engel": dict(samples=1000, tol=1e-8),
    "prolong": dict(samples=500, tol=1e-8),
    "contactify": dict(samples=60, tol=1e-8),
    "normal-form": dict(samples=50, tol=1e-10),
    "realize": dict(samples=200, tol=1e-6),
    "gray": dict(samples=20, tol=1e-6),
    "zoll-closedness": dict(samples=50, tol=1e-6),
    "central-projection": dict(samples=50, tol=1e-7),
    "so3": dict(samples=1000, tol=1e-9),
}


def _load_config(path):
    if path is None:
        return {}
    try:
        with open(path) as fh:
            cfg = json.load(fh)
    except OSError as exc:
        raise ConfigError(f"cannot read config: {exc}")
    except json.JSONDecodeError as exc:
        raise ConfigError(f"config is not valid JSON: {exc}")
    if not isinstance(cfg, dict):
        raise ConfigError("config must be a JSON object")
    return cfg


def _chart(cfg, key, default):
    coords = cfg.get(key)
    if coords is None:
        return default
    return Chart("config", tuple(coords))


def _frame_fields(cfg, chart, key, defaults):
    texts = cfg.get(key, defaults)
    return [vector_field_from_exprs(chart, comp, name=f"{key}[{i}]")
            for i, comp in enumerate(texts)], texts


# -- suites -------------------------------------------------------------------


def _suite_verify_engel(cfg, rng, samples, tol, report):
    chart = _chart(cfg, "coords", ENGEL_CHART)
    fields, texts = _frame_fields(cfg, chart, "frame",
                                  [["0", "0", "0", "1"], ["1", "w", "y", "0"]])
    if len(fields) != 2 or chart.dim != 4:
        raise ConfigError("verify-engel needs 2 frame fields on a 4-dimensional chart")
    frame = DistributionFrame(fields)
    pts = rng.uniform(-1.0, 1.0, (samples, 4))
    failures, detail = 0, ""
    for p in pts:
        rep = flag_ranks(frame, p)
        if not rep.is_engel:
            failures += 1
            if not detail:
                detail = f"ranks {rep.ranks} at {np.round(p, 4).tolist()}"
    report.add("engel-flag", samples, 0, failures, detail=detail)

    direction = cfg.get("char_direction", [0.0, 0.0, 0.0, 1.0] if "frame" not in cfg else None)
    if failures == 0 and direction is not None:
        worst = 0.0
        for p in pts:
            ld = characteristic_line(frame, p)
            worst = max(worst, ld.angle_to(np.asarray(direction, dtype=float)))
        report.add("characteristic-line", samples, tol, worst)
    return {"frame": texts}


def _base_contact(cfg):
    chart = _chart(cfg, "coords", CONTACT_CHART)
    if chart.dim != 3:
        raise ConfigError("contact chart must be 3-dimensional")
    (v0, v1), texts = _frame_fields(cfg, chart, "legendrian_frame",
                                    [["0", "1", "0"], ["1", "0", "y"]])
    return ParallelizedContact(chart, v0, v1), texts


def _suite_prolong(cfg, rng, samples, tol, report):
    contact, texts = _base_contact(cfg)
    full = bool(cfg.get("full_circle", False))
    check_pts = rng.uniform(-1.0, 1.0, (10, 3))
    domain = prolong(contact, full_circle=full, check_points=check_pts)
    frame = domain.frame()
    failures, worst = 0, 0.0
    for _ in range(samples):
        q = np.append(rng.uniform(-1.0, 1.0, 3), rng.uniform(0.0, domain.theta_max))
        rep = flag_ranks(frame, q)
        if not rep.is_engel:
            failures += 1
            continue
        ld = characteristic_line(frame, q)
        worst = max(worst, ld.angle_to([0.0, 0.0, 0.0, 1.0]))
    report.add("engel-flag", samples, 0, failures)
    report.add("characteristic-line", samples, tol, worst)
    return {"legendrian_frame": texts, "full_circle": full}


def _suite_contactify(cfg, rng, samples, tol, report):
    contact, texts = _base_contact(cfg)
    domain = prolong(contact, full_circle=bool(cfg.get("full_circle", False)))
    values = cfg.get("slices", [0.0, 0.7, 1.3])
    per = max(1, samples // len(values))
    worst = 0.0
    for value in values:
        slc = domain.theta_slice(float(value))
        induced = contactify(domain.frame(), slc)
        for _ in range(per):
            m = rng.uniform(-1.0, 1.0, 3)
            got = [induced.v0(m), induced.v1(m)]
            want = [contact.v0(m), contact.v1(m)]
            worst = max(worst, plane_principal_angle(got, want))
    report.add("slice-plane-recovery", per * len(values), tol, worst)
    return {"legendrian_frame": texts, "slices": values}


def _random_jet(rng, order, const=0.0, amp=0.3):
    j = Jet(3, order)
    for k in multi_indices(3, order):
        j.c[k] = const if sum(k) == 0 else rng.uniform(-amp, amp) / (1.0 + sum(k)) ** 2
    return j


def _random_pair(rng, order=4):
    """A random contact pair jet with bounded conditioning: a perturbation of
    the normal-form pair pushed through a random rotation, so the twist stays
    away from zero while the constants are generic."""
    one = Jet.constant(1.0, 3, order)
    y = Jet.variable(1, 3, order)
    while True:
        Y = [_random_jet(rng, order), one + _random_jet(rng, order),
             _random_jet(rng, order)]
        X = [one + _random_jet(rng, order), _random_jet(rng, order),
             y + _random_jet(rng, order)]
        A = np.linalg.qr(rng.normal(size=(3, 3)))[0]
        try:
            return LegendrianPairJet(_linear_pushforward(A, Y),
                                     _linear_pushforward(A, X), order)
        except GeometryError:
            continue


def _normal_pair_of(f_jet):
    order = f_jet.order
    one = Jet.constant(1.0, 3, order)
    zero = Jet(3, order)
    y = Jet.variable(1, 3, order)
    return LegendrianPairJet([zero.copy(), one.copy(), zero.copy()],
                             [one.copy(), f_jet.copy(), y], order)


def _suite_normal_form(cfg, rng, samples, tol, report):
    worst_res, worst_f0, worst_idem = 0.0, 0.0, 0.0
    for _ in range(samples):
        pair = _random_pair(rng)
        res = normalize_pair(pair)
        worst_res = max(worst_res, res.verify(pair))
        worst_f0 = max(worst_f0, abs(res.f_jet.value))
        res2 = normalize_pair(_normal_pair_of(res.f_jet))
        k = res2.f_jet.order
        worst_idem = max(worst_idem, res2.f_jet.max_coeff_diff(res.f_jet.truncated(k)))
    report.add("pushforward-residual", samples, tol, worst_res)
    report.add("f-constant-term", samples, 0, worst_f0)
    report.add("idempotence", samples, tol, worst_idem)

    echo = {}
    if "ode" in cfg:
        f = scalar_field_from_expr(ODE_CHART, cfg["ode"], name="f")
        v0, v1 = pair_from_ode(f)
        pair = LegendrianPairJet.from_fields(v0, v1, [0.0, 0.0, 0.0])
        res = normalize_pair(pair)
        ode = extract_ode(res)
        report.add("ode-residual", 1, tol, res.verify(pair),
                   detail="; ".join(s["step"] for s in res.steps))
        echo = {"ode": cfg["ode"], "steps": res.steps,
                "f_coeffs": {"".join(map(str, k)): v for k, v in sorted(ode.f_jet.c.items())}}
    return echo


def _suite_realize(cfg, rng, samples, tol, report):
    contact, texts = _base_contact(cfg)
    domain = prolong(contact)
    support = tuple(cfg.get("support", (0.25, 1.3)))
    h_text = cfg.get("h", "0.05*sin(x) + 0.04*z*cos(y) + 0.03*y")
    h = scalar_field_from_expr(domain.chart, h_text, name="h")
    gen = ContactIsotopyGenerator(domain, h, support)

    grid = [np.append(m, th) for m in rng.uniform(-1.0, 1.0, (max(10, samples // 10), 3))
            for th in np.linspace(support[0] + 0.05, support[1] - 0.05, 7)]
    deformed = realize_isotopy(domain, gen, samples=grid, validate=True)
    g_min = min(deformed.g(q) for q in grid)
    report.add("spin-margin", len(grid), 0.5, abs(g_min), detail=f"min g = {g_min:.6f}")

    frame = deformed.frame()
    failures = 0
    for _ in range(samples):
        q = np.append(rng.uniform(-1.0, 1.0, 3), rng.uniform(0.0, domain.theta_max))
        if not flag_ranks(frame, q).is_engel:
            failures += 1
    report.add("engel-flag", samples, 0, failures)

    outside = 0.0
    for m in rng.uniform(-1.0, 1.0, (10, 3)):
        for th in (0.02, domain.theta_max - 0.02):
            q = np.append(m, th)
            outside = max(outside, float(np.max(np.abs(
                deformed.W(q) - np.array([0.0, 0.0, 0.0, 1.0])))))
    report.add("unperturbed-outside-support", 20, 0, outside)

    worst = 0.0
    for m in rng.uniform(-0.5, 0.5, (3, 3)):
        top = bottom_to_top(deformed, m, tol=1e-10)
        ref, _, _ = integrate(lambda t, y: gen.X(np.append(y, t))[:3], m,
                              0.0, domain.theta_max, tol=1e-11)
        worst = max(worst, float(np.max(np.abs(top - ref))))
    report.add("bottom-to-top", 3, tol, worst)
    return {"h": h_text, "support": list(support), "legendrian_frame": texts}


def _gray_path(cfg):
    chart = CONTACT_CHART
    comps = cfg.get("form_components",
                    ["t*(0.2*sin(x + 2*z) + 0.3*y*z) - y", "0*y",
                     "1 + t*(0.15*x + 0.2*y + 0.05*z^2)"])
    exprs = [Expression(c, chart.coords + ("t",)) for c in comps]

    def rule(xs):
        env = dict(zip(chart.coords + ("t",), xs))
        return [e(env) for e in exprs]

    return ContactFormPath(chart, rule), comps


def _suite_gray(cfg, rng, samples, tol, report):
    path, comps = _gray_path(cfg)
    t_max = float(cfg.get("t_max", 0.3))
    n_grid = int(cfg.get("grid", 5))
    L = constant_field(CONTACT_CHART, cfg.get("legendrian", [0.0, 1.0, 0.0]), name="L")
    pts = rng.uniform(-1.0, 1.0, (samples, 3))

    sol = gray_solve(path, L, np.linspace(0.0, t_max, n_grid), sample_points=pts[:10])
    report.add("hypothesis", 10, sol.hypothesis_tol, sol.checks[-1]["worst"])

    worst_plane, worst_L = 0.0, 0.0
    for x0 in pts:
        d = sol.pullback_defect(x0)
        worst_plane = max(worst_plane, d["plane_defect"])
        worst_L = max(worst_L, d["L_defect"])
    report.add("plane-pullback", samples, tol, worst_plane)
    report.add("legendrian-preserved", samples, tol, worst_L)

    fine = gray_solve(path, L, np.linspace(0.0, t_max, 2 * n_grid - 1))
    worst_fine = max(fine.pullback_defect(x0)["plane_defect"] for x0 in pts[:5])
    coarse = max(sol.pullback_defect(x0)["plane_defect"] for x0 in pts[:5])
    ratio = worst_fine / max(coarse, 1e-300)
    report.add("refinement-halving", 5, 0.6, ratio,
               detail=f"coarse {coarse:.3e} fine {worst_fine:.3e}")
    return {"form_components": comps, "t_max": t_max, "grid": n_grid}


def _space_from_config(cfg):
    kind = cfg.get("metric", "sphere")
    if kind == "sphere":
        radius = float(cfg.get("radius", 1.0))
        return SphereAtlas(radius), {"metric": "sphere", "radius": radius}, 2.0 * math.pi * radius
    if kind == "plane":
        return SingleChartSpace(euclidean_metric(), bound=cfg.get("bound", 50.0)), \
            {"metric": "plane"}, None
    if kind == "revolution":
        text = cfg["profile"]
        expr = Expression(text, ("u",))

        def profile(u):
            return expr({"u": u})

        metric = revolution_metric(profile)
        space = SingleChartSpace(metric, periodic=(False, True), bound=cfg.get("bound"))
        return space, {"metric": "revolution", "profile": text}, cfg.get("period")
    raise ConfigError(f"unknown metric kind {kind!r} (sphere | plane | revolution)")


def _suite_zoll_closedness(cfg, rng, samples, tol, report, seed):
    space, echo, period = _space_from_config(cfg)
    rep = closedness_report(space, n_samples=samples, seed=seed,
                            max_arclength=float(cfg.get("max_arclength", 30.0)),
                            sample_radius=float(cfg.get("sample_radius", 1.5)))
    expect = bool(cfg.get("expect_return", echo["metric"] == "sphere"))
    if expect:
        report.add("all-return", samples, 0, samples - rep.n_returned)
        report.add("return-defect", samples, tol, rep.max_defect)
        if period is not None:
            spread = max((abs(s.arclength - period) for s in rep.samples if s.returned),
                         default=math.inf)
            report.add("arclength-period", samples, tol, spread,
                       detail=f"period {period:.8f}")
    else:
        report.add("no-return", samples, 0, rep.n_returned)
    report.row_header = ["chart", "x1", "x2", "psi", "returned", "arclength", "defect"]
    for s in rep.samples:
        report.rows.append([s.chart, float(s.state[0]), float(s.state[1]),
                            float(s.state[2]), str(s.returned).lower(),
                            s.arclength, s.defect])
    return echo


def _suite_central_projection(cfg, rng, samples, tol, report, seed):
    out = central_projection_check(n_geodesics=samples, seed=seed,
                                   arc=float(cfg.get("arc", 1.2)))
    report.add("line-fit", out["n_arcs"], tol, out["max_residual"])

    metric = stereographic_sphere_metric()
    worst_rt, worst_al = 0.0, 0.0
    for _ in range(20):
        x = rng.uniform(-1.5, 1.5, 2)
        ray = rng.normal(size=2)
        p = legendre_ray_map(metric, x, ray)
        back = legendre_ray_map_inverse(metric, x, p)
        worst_rt = max(worst_rt, float(np.max(np.abs(back - ray / math.sqrt(
            float(ray @ metric.matrix(x) @ ray))))))
        worst_al = max(worst_al, hamiltonian_alignment(
            metric, np.append(x, rng.uniform(0.0, 2.0 * math.pi))))
    report.add("legendre-roundtrip", 20, 1e-10, worst_rt)
    report.add("hamiltonian-alignment", 20, 1e-6, worst_al)
    return {"arc": float(cfg.get("arc", 1.2))}


def _suite_so3(cfg, rng, samples, tol, report):
    domain = so3_engel_frame(full_circle=bool(cfg.get("full_circle", False)))
    frame = domain.frame()
    failures = 0
    for _ in range(samples):
        v = rng.normal(size=3)
        v *= rng.uniform(0.0, 0.7) / np.linalg.norm(v)
        q = np.append(v, rng.uniform(0.0, domain.theta_max))
        if not flag_ranks(frame, q).is_engel:
            failures += 1
    report.add("engel-flag", samples, 0, failures)

    K, I, J = so3_frame_fields()
    table = [(K, I, J), (I, J, K), (J, K, I)]
    worst = 0.0
    for _ in range(20):
        v = rng.normal(size=3)
        v *= rng.uniform(0.0, 0.7) / np.linalg.norm(v)
        for A, B, C in table:
            worst = max(worst, float(np.max(np.abs(lie_bracket(A, B)(v) - C(v)))))
    report.add("so3-bracket-table", 20, tol, worst)
    return {}


# -- driver -------------------------------------------------------------------


def run(command, cfg, seed, samples, tol):
    """Execute one suite and return the filled report."""
    rng = np.random.default_rng(seed)
    report = Report(command=command, config_echo={})
    t0 = time.perf_counter()
    if command == "verify-engel":
        echo = _suite_verify_engel(cfg, rng, samples, tol, report)
    elif command == "prolong":
        echo = _suite_prolong(cfg, rng, samples, tol, report)
    elif command == "contactify":
        echo = _suite_contactify(cfg, rng, samples, tol, report)
    elif command == "normal-form":
        echo = _suite_normal_form(cfg, rng, samples, tol, report)
    elif command == "realize":
        echo = _suite_realize(cfg, rng, samples, tol, report)
    elif command == "gray":
        echo = _suite_gray(cfg, rng, samples, tol, report)
    elif command == "zoll-closedness":
        echo = _suite_zoll_closedness(cfg, rng, samples, tol, report, seed)
    elif command == "central-projection":
        echo = _suite_central_projection(cfg, rng, samples, tol, report, seed)
    elif command == "so3":
        echo = _suite_so3(cfg, rng, samples, tol, report)
    else:
        raise ConfigError(f"unknown command {command!r}")
    report.config_echo = {"seed": seed, "samples": samples, "tolerance": tol, **echo}
    report.wall_time_s = time.perf_counter() - t0
    return report


def build_parser():
    parser = argparse.ArgumentParser(
        prog="engellab",
        description="Numerical verification suites for Engel structures.")
    sub = parser.add_subparsers(dest="command", required=True)
    for name in _DEFAULTS:
        p = sub.add_parser(name)
        p.add_argument("--config", default=None, help="JSON config path")
        p.add_argument("--seed", type=int, default=0)
        p.add_argument("--samples", type=int, default=None)
        p.add_argument("--tol", type=float, default=None)
        p.add_argument("--out", default=None, help="write the report here instead of stdout")
        p.add_argument("--format", choices=("json", "text", "csv"), default="text")
    return parser


def main(argv=None):
    args = build_parser().parse_args(argv)
    try:
        cfg = _load_config(args.config)
        samples = args.samples if args.samples is not None else \
            int(cfg.get("samples", _DEFAULTS[args.command]["samples"]))
        tol = args.tol if args.tol is not None else \
            float(cfg.get("tol", _DEFAULTS[args.command]["tol"]))
        if samples <= 0 or tol <= 0:
            raise ConfigError("samples and tol must be positive")
        report = run(args.command, cfg, args.seed, samples, tol)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return 2
    except GeometryError as exc:
        msg = f"geometry error: {exc}"
        if exc.point is not None:
            msg += f" at point {np.round(np.asarray(exc.point, dtype=float), 6).tolist()}"
        print(msg, file=sys.stderr)
        return 3
    except EngelLabError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 3
    text = render(report, args.format)
    if args.out:
        with open(args.out, "w") as fh:
            fh.write(text)
    else:
        sys.stdout.write(text)
    return 0 if report.passed else 1


if __name__ == "__main__":
    sys.exit(main())
