"""Command-line surface: config in, report.json and trajectory CSV out.

Every command is a thin composition of library operations; this module
only parses arguments, builds objects from the config, runs the checks the
command asserts, and serializes results.  Exit codes: 0 all asserted
residuals in tolerance, 1 a verification failed, 2 config error, 3
numerical failure.
"""

import argparse
import json
import os
import sys

import numpy as np

from .bundle import TangentPointM
from .config import load_config
from .errors import (ArityError, BranchAmbiguity, DimensionMismatch,
                     DomainError, ExprSyntaxError, FlowEscape,
                     HypothesisFailed, NoConvergence, NonFiniteState,
                     NotAffine, NotPrincipal, NotSubducible, NotWellDefined,
                     ParseError, SingularHessian, SingularMatrix,
                     UnknownIdentifier)
from .lagrangian import (euler_lagrange_sode, homogeneity_of_induced,
                         induced_splitting, integrate_sode,
                         projection_verify, subduce, symmetry_condition_check,
                         tangency_check, _sample_points)
from .nonholonomic import ConstrainedState, integrate_constrained
from .reduction import (base_euler_lagrange, connection_test_domega,
                        decoupling_check, integrate_magnetic,
                        invariance_check, magnetic_lp_system, momentum_map,
                        principal_check, unreduce)
from .splitting import (affine_decompose, classify, curvature_pointwise,
                        horizontal_lift_curve, project_horizontal,
                        project_vertical)

COMMANDS = ("classify", "lift-curve", "induce", "subduce", "project-verify",
            "el-simulate", "nh-simulate", "magnetic-simulate", "curvature",
            "unreduce", "check-all")

_CONFIG_ERRORS = (ParseError, ExprSyntaxError, UnknownIdentifier, ArityError,
                  DimensionMismatch, ValueError)
_VERIFY_ERRORS = (NotSubducible, NotWellDefined, NotPrincipal, NotAffine,
                  HypothesisFailed)
_NUMERIC_ERRORS = (NoConvergence, SingularMatrix, SingularHessian,
                   NonFiniteState, FlowEscape, BranchAmbiguity, DomainError)


def _json_clean(obj):
    if isinstance(obj, dict):
        return {str(k): _json_clean(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_json_clean(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return [_json_clean(v) for v in obj.tolist()]
    if isinstance(obj, (bool, np.bool_)):
        return bool(obj)
    if isinstance(obj, (int, np.integer)):
        return int(obj)
    if isinstance(obj, (float, np.floating)):
        f = float(obj)
        return f if np.isfinite(f) else None
    return obj


def _write_report(out_dir, report):
    path = os.path.join(out_dir, "report.json")
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(_json_clean(report), fh, sort_keys=True, indent=2,
                  allow_nan=False)
        fh.write("\n")
    return path


def _write_csv(out_dir, header, rows):
    path = os.path.join(out_dir, "trajectory.csv")
    with open(path, "w", encoding="utf-8", newline="") as fh:
        fh.write(",".join(header) + "\n")
        for row in rows:
            fh.write(",".join(repr(float(v)) for v in row) + "\n")
    return path


def _state_header(chart, diags=()):
    cols = (["t"] + list(chart.x_names) + list(chart.y_names)
            + list(chart.v_names) + list(chart.w_names))
    return cols + list(diags)


def _trajectory_rows(rec, diag_names=()):
    rows = []
    for i, t in enumerate(rec.t):
        row = [t] + list(rec.states[i])
        for name in diag_names:
            row.append(rec.diagnostics[name][i])
        rows.append(row)
    return rows


class _Run:
    """Accumulates checks and values for one command invocation."""

    def __init__(self, cmd, cfg, seed, samples, tol_structural, tol_dynamic):
        self.report = {
            "command": cmd,
            "config_sha256": cfg.sha256,
            "seed": seed,
            "samples": samples,
            "tolerances": {"structural": tol_structural,
                           "dynamic": tol_dynamic},
            "checks": [],
            "residuals": {},
            "verdicts": {},
            "values": {},
        }
        self.csv = None

    def check(self, name, residual, tol):
        passed = bool(residual < tol)
        self.report["checks"].append(
            {"name": name, "residual": float(residual),
             "tolerance": float(tol), "passed": passed})
        return passed

    def failed(self):
        return [c["name"] for c in self.report["checks"] if not c["passed"]]


def _probe_point(sim, chart):
    """(x, y, v) for pointwise reports: the ic prefix, or a default ray."""
    n, m = chart.n, chart.m
    ic = sim.get("ic")
    if ic is not None and len(ic) >= 2 * n + m:
        return ic[:n], ic[n:n + m], ic[n + m:2 * n + m]
    return np.zeros(n), np.zeros(m), 0.5 * np.ones(n)


def _defining_relation_residual(L, h, samples, seed):
    n, m = L.chart.n, L.chart.m
    worst = 0.0
    for x, y, v in _sample_points(L.chart, samples, seed, 1.0, h.admissible):
        try:
            w = h.h_values(x, y, v)
            g = L.jet(np.concatenate([x, y, v, w])).gradient
        except DomainError:
            continue
        worst = max(worst, float(np.abs(g[2 * n + m:]).max()))
    return worst


def _energy(L, z):
    k = L.chart.n + L.chart.m
    j = L.jet(z)
    return float(j.gradient[k:] @ z[k:] - j.value)


def _cmd_classify(run, cfg, chart, sim, args):
    spec = cfg.splitting(chart)
    rep = classify(spec, samples=run.report["samples"],
                   seed=run.report["seed"])
    run.report["verdicts"]["classification"] = rep.verdict
    run.report["residuals"].update(rep.residuals)
    run.report["values"]["skipped_samples"] = rep.skipped
    run.report["values"]["smooth_at_zero"] = spec.smooth_at_zero


def _cmd_lift_curve(run, cfg, chart, sim, args):
    spec = cfg.splitting(chart)
    base_curve, y0 = cfg.curve(chart)
    rec = horizontal_lift_curve(spec, base_curve, y0, sim["t0"], sim["t1"],
                                sim["dt"])
    resid = float(max(rec.diagnostics["lift_residual"]))
    run.check("lift_residual", resid,
              run.report["tolerances"]["dynamic"])
    run.report["values"]["final_state"] = rec.final
    run.csv = (_state_header(chart, ["lift_residual"]),
               _trajectory_rows(rec, ["lift_residual"]))


def _cmd_induce(run, cfg, chart, sim, args):
    L = cfg.lagrangian(chart)
    h = induced_splitting(L)
    x, y, v = _probe_point(sim, chart)
    w, iters = h.solve_detail(x, y, v)
    run.report["values"]["h_at_probe"] = w
    run.report["values"]["probe"] = np.concatenate([x, y, v])
    run.report["values"]["newton_iterations"] = iters
    run.check("newton_iterations", iters, 3.5)
    resid = _defining_relation_residual(L, h, run.report["samples"],
                                        run.report["seed"])
    run.check("defining_relation", resid,
              run.report["tolerances"]["structural"])


def _cmd_subduce(run, cfg, chart, sim, args):
    L = cfg.lagrangian(chart)
    h = cfg.splitting(chart) if cfg.has("splitting") \
        else induced_splitting(L)
    sub = subduce(L, h, samples=run.report["samples"],
                  seed=run.report["seed"])
    run.report["residuals"]["y_independence"] = sub.y_independence
    run.report["values"]["y_ref"] = sub.y_ref
    x, y, v = _probe_point(sim, chart)
    run.report["values"]["Lbar_at_probe"] = sub.Lbar.value(
        np.concatenate([x, v]))
    sym = symmetry_condition_check(L, h, samples=run.report["samples"],
                                   seed=run.report["seed"])
    run.report["residuals"]["symmetry"] = sym.max_residual
    run.check("y_independence", sub.y_independence, 1e-6)


def _cmd_project_verify(run, cfg, chart, sim, args):
    L = cfg.lagrangian(chart)
    h = cfg.splitting(chart) if cfg.has("splitting") \
        else induced_splitting(L)
    x, y, v = _probe_point(sim, chart)
    rep = projection_verify(L, h, (x, v), y, sim["t1"], sim["dt"])
    tol = run.report["tolerances"]["dynamic"]
    run.check("base_deviation", rep.max_base_deviation, tol)
    run.check("horizontality_drift", rep.horizontality_drift, tol)
    run.report["residuals"]["el_residual_reduced"] = rep.el_residual_reduced
    run.report["values"]["min_lbar_det"] = rep.min_lbar_det


def _cmd_el_simulate(run, cfg, chart, sim, args):
    L = cfg.lagrangian(chart)
    sode = euler_lagrange_sode(L)
    k = chart.n + chart.m
    ic = sim.get("ic")
    if ic is None or len(ic) != 2 * k:
        raise ParseError(f"[simulation] ic must have {2 * k} entries for "
                         f"el-simulate")
    rec = integrate_sode(sode, ic, sim["t0"], sim["t1"], sim["dt"],
                         diagnostic=lambda t, z: {"energy": _energy(L, z)})
    E = rec.diagnostics["energy"]
    run.report["residuals"]["energy_drift"] = float(
        max(abs(e - E[0]) for e in E))
    run.report["values"]["final_state"] = rec.final
    run.csv = (_state_header(chart, ["energy"]),
               _trajectory_rows(rec, ["energy"]))


def _cmd_nh_simulate(run, cfg, chart, sim, args):
    L = cfg.lagrangian(chart)
    c = cfg.constraints(chart)
    n, m = chart.n, chart.m
    ic = sim.get("ic")
    if ic is None or len(ic) != 2 * n + m:
        raise ParseError(f"[simulation] ic must have {2 * n + m} entries "
                         f"(x, y, v) for nh-simulate")
    state = ConstrainedState(ic[:n], ic[n:n + m], ic[n + m:])
    rec = integrate_constrained(L, c, state, sim["t1"], sim["dt"])
    resid = float(max(rec.diagnostics["constraint_residual"]))
    run.check("constraint_residual", resid,
              run.report["tolerances"]["structural"])
    E = rec.diagnostics["energy"]
    run.report["residuals"]["energy_drift"] = float(
        max(abs(e - E[0]) for e in E))
    rows = []
    for i, t in enumerate(rec.t):
        s = rec.states[i]
        w = c.reconstruct_w(s[:n], s[n:n + m], s[n + m:])
        rows.append([t] + list(s[:n + m]) + list(s[n + m:]) + list(w)
                    + [rec.diagnostics["constraint_residual"][i],
                       rec.diagnostics["energy"][i]])
    run.report["values"]["final_state"] = rec.final
    run.csv = (_state_header(chart, ["constraint_residual", "energy"]), rows)


def _cmd_magnetic_simulate(run, cfg, chart, sim, args):
    model = cfg.magnetic()
    system = magnetic_lp_system(model)
    n, m = model.n, model.m
    ic = sim.get("ic")
    if ic is None or len(ic) != 2 * n + m:
        raise ParseError(f"[simulation] ic must have {2 * n + m} entries "
                         f"(x, v, w) for magnetic-simulate")
    rec = integrate_magnetic(system, ic, sim["t0"], sim["t1"], sim["dt"])
    dec = decoupling_check(model, samples=run.report["samples"],
                           seed=run.report["seed"])
    run.report["verdicts"]["decoupled"] = dec.verdict
    run.report["residuals"]["decoupling_condition"] = dec.condition_residual
    run.report["residuals"]["subsystem_dependence"] = dec.subsystem_residual
    run.report["residuals"]["base_el_mismatch"] = dec.base_el_residual
    run.report["values"]["quadratic_diagnostic_max"] = dec.quadratic_max
    run.report["values"]["final_state"] = rec.final
    pcols = [f"p{a+1}" for a in range(m)]
    header = (["t"] + [f"x{i+1}" for i in range(n)]
              + [f"v{i+1}" for i in range(n)]
              + [f"w{a+1}" for a in range(m)] + pcols)
    run.csv = (header, _trajectory_rows(rec, pcols))


def _cmd_curvature(run, cfg, chart, sim, args):
    from .splitting import affine_curvature_coefficients
    spec = cfg.splitting(chart)
    x, y, v = _probe_point(sim, chart)
    try:
        data = affine_decompose(spec)
        B, A0d = affine_curvature_coefficients(data, x, y)
        run.report["verdicts"]["affine"] = True
        run.report["values"]["B_at_probe"] = B
        run.report["values"]["A0_derivative_at_probe"] = A0d
        if data.reconstruction_residual is not None:
            run.report["residuals"]["affine_reconstruction"] = \
                data.reconstruction_residual
    except NotAffine:
        run.report["verdicts"]["affine"] = False
        n = chart.n
        pairs = []
        rng = np.random.default_rng(run.report["seed"])
        for _ in range(3):
            u1 = rng.uniform(-1.0, 1.0, n)
            u2 = rng.uniform(-1.0, 1.0, n)
            val = curvature_pointwise(spec, u1, u2, (x, y))
            pairs.append({"u": u1, "v": u2, "R": val.w})
        run.report["values"]["pointwise_curvature"] = pairs


def _cmd_unreduce(run, cfg, chart, sim, args):
    Lbar = cfg.base_lagrangian(chart)
    gamma_bar = base_euler_lagrange(Lbar, chart.n)
    h = cfg.splitting(chart)
    action = cfg.action(chart)
    G = unreduce(gamma_bar, h, action, samples=run.report["samples"],
                 seed=run.report["seed"])
    n, m = chart.n, chart.m
    rng = np.random.default_rng(run.report["seed"])
    sub = 0.0
    for _ in range(50):
        z = rng.uniform(-1.0, 1.0, 2 * (n + m))
        z2 = z.copy()
        z2[n:n + m] = rng.uniform(-1.0, 1.0, m)
        z2[2 * n + m:] = rng.uniform(-1.0, 1.0, m)
        sub = max(sub, float(np.abs(G.force(z)[:n] - G.force(z2)[:n]).max()))
    run.check("submersion", sub, run.report["tolerances"]["structural"])
    ic = sim.get("ic")
    if ic is not None:
        if len(ic) != 2 * (n + m):
            raise ParseError(f"[simulation] ic must have {2 * (n + m)} "
                             f"entries for unreduce")
        rec = integrate_sode(G, ic, sim["t0"], sim["t1"], sim["dt"])
        drift = 0.0
        for row in rec.states:
            hv = h.h_values(row[:n], row[n:n + m], row[n + m:2 * n + m])
            drift = max(drift, float(np.abs(row[2 * n + m:] - hv).max()))
        run.report["residuals"]["horizontality_drift"] = drift
        w0 = h.h_values(ic[:n], ic[n:n + m], ic[n + m:2 * n + m])
        if np.abs(np.asarray(ic[2 * n + m:]) - w0).max() < 1e-12:
            run.check("horizontality_drift", drift,
                      run.report["tolerances"]["dynamic"])
        run.report["values"]["final_state"] = rec.final
        run.csv = (_state_header(chart), _trajectory_rows(rec))


def _cmd_check_all(run, cfg, chart, sim, args):
    seed = run.report["seed"]
    samples = run.report["samples"]
    tol_s = run.report["tolerances"]["structural"]
    rng = np.random.default_rng(seed)
    n, m = chart.n, chart.m

    h_explicit = cfg.splitting(chart) if cfg.has("splitting") else None
    if h_explicit is not None:
        rep = classify(h_explicit, samples=samples, seed=seed)
        run.report["verdicts"]["classification"] = rep.verdict
        worst_proj = 0.0
        worst_compl = 0.0
        count = 0
        while count < min(samples, 50):
            z = rng.uniform(-1.0, 1.0, 2 * (n + m))
            if not h_explicit.admissible(z[n + m:2 * n + m]):
                continue
            count += 1
            t = TangentPointM(chart, z[:n], z[n:n + m],
                              z[n + m:2 * n + m], z[2 * n + m:])
            ph = project_horizontal(h_explicit, t)
            ph2 = project_horizontal(h_explicit, ph)
            worst_proj = max(worst_proj, float(np.abs(
                ph2.as_array() - ph.as_array()).max()))
            pv = project_vertical(h_explicit, t)
            worst_compl = max(worst_compl, float(np.abs(
                ph.w + pv.w - t.w).max()))
        run.check("projector_idempotent", worst_proj, tol_s)
        run.check("projector_complement", worst_compl, tol_s)

    L = cfg.lagrangian(chart) if cfg.has("lagrangian") else None
    h_ind = None
    if L is not None:
        h_ind = induced_splitting(L)
        run.check("defining_relation",
                  _defining_relation_residual(L, h_ind, samples, seed),
                  tol_s)
        sym = symmetry_condition_check(L, h_ind, samples=samples, seed=seed)
        run.check("symmetry_condition", sym.max_residual, tol_s)
        tan = tangency_check(L, h_ind, samples=samples, seed=seed)
        run.check("tangency", tan.max_residual, tol_s)
        try:
            sub = subduce(L, h_ind, samples=samples, seed=seed)
            run.check("y_independence", sub.y_independence, 1e-6)
        except NotSubducible as exc:
            run.report["checks"].append(
                {"name": "y_independence", "residual": None,
                 "tolerance": 1e-6, "passed": False, "error": str(exc)})
        if L.homogeneity_flag == 2.0:
            hom = homogeneity_of_induced(L, samples=samples, seed=seed)
            run.check("euler_residual_induced", hom.max_residual, 1e-7)

    if cfg.has("action"):
        action = cfg.action(chart)
        if L is not None:
            inv = invariance_check(L, action, samples=samples, seed=seed)
            run.check("invariance", inv.max_residual, tol_s)
        for label, h in (("explicit", h_explicit), ("induced", h_ind)):
            if h is None:
                continue
            pr = principal_check(h, action, samples=samples, seed=seed)
            run.check(f"principal_{label}", pr.max_residual, 1e-7)
            ct = connection_test_domega(h, action, samples=samples,
                                        seed=seed)
            run.report["residuals"][f"connection_test_{label}"] = \
                ct.max_residual
        if L is not None and h_ind is not None:
            worst_J = 0.0
            for x, y, v in _sample_points(chart, min(samples, 100), seed,
                                          1.0, h_ind.admissible):
                w = h_ind.h_values(x, y, v)
                J = momentum_map(L, action, TangentPointM(chart, x, y, v, w))
                worst_J = max(worst_J, float(np.abs(J).max()))
            run.check("momentum_on_horizontal", worst_J, tol_s)

    if cfg.has("constraints"):
        c = cfg.constraints(chart)
        csp = c.to_splitting()
        rep = classify(csp, samples=samples, seed=seed)
        run.report["verdicts"]["constraint_classification"] = rep.verdict
        ok = rep.verdict in ("Ehresmann", "Affine")
        run.report["checks"].append(
            {"name": "constraint_affine", "residual": None,
             "tolerance": None, "passed": ok})
        data = affine_decompose(csp, samples=min(samples, 100), seed=seed)
        recov = 0.0
        for _ in range(10):
            q = rng.uniform(-1.0, 1.0, n + m)
            for a in range(m):
                recov = max(recov, abs(data.A0[a].value(q)
                                       - c.A0[a].value(q)))
                for i in range(n):
                    recov = max(recov, abs(data.A[a][i].value(q)
                                           - c.A[a][i].value(q)))
        run.check("constraint_recovery", recov, tol_s)

    if cfg.has("magnetic"):
        model = cfg.magnetic()
        dec = decoupling_check(model, samples=samples, seed=seed)
        run.report["verdicts"]["decoupled"] = dec.verdict
        run.report["residuals"]["decoupling_condition"] = \
            dec.condition_residual
        run.report["residuals"]["subsystem_dependence"] = \
            dec.subsystem_residual
        run.report["values"]["quadratic_diagnostic_max"] = dec.quadratic_max


_HANDLERS = {
    "classify": _cmd_classify,
    "lift-curve": _cmd_lift_curve,
    "induce": _cmd_induce,
    "subduce": _cmd_subduce,
    "project-verify": _cmd_project_verify,
    "el-simulate": _cmd_el_simulate,
    "nh-simulate": _cmd_nh_simulate,
    "magnetic-simulate": _cmd_magnetic_simulate,
    "curvature": _cmd_curvature,
    "unreduce": _cmd_unreduce,
    "check-all": _cmd_check_all,
}


def _parse_args(argv):
    p = argparse.ArgumentParser(
        prog="fibresplit",
        description="Nonlinear splittings toolkit: classify and lift "
                    "splittings, induce them from Lagrangians, reduce, "
                    "unreduce, and simulate.")
    p.add_argument("command", choices=COMMANDS)
    p.add_argument("--config", required=True, help="INI model file")
    p.add_argument("--out-dir", default=".", help="report/CSV directory")
    p.add_argument("--seed", type=int, default=None)
    p.add_argument("--samples", type=int, default=None)
    p.add_argument("--tol-structural", type=float, default=1e-9)
    p.add_argument("--tol-dynamic", type=float, default=1e-6)
    p.add_argument("--dt", type=float, default=None)
    p.add_argument("--t1", type=float, default=None)
    return p.parse_args(argv)


def main(argv=None):
    args = _parse_args(argv)
    try:
        cfg = load_config(args.config)
        chart = cfg.chart()
        sim = cfg.simulation()
    except _CONFIG_ERRORS as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return 2
    if args.seed is not None:
        sim["seed"] = args.seed
    if args.samples is not None:
        sim["samples"] = args.samples
    if args.dt is not None:
        sim["dt"] = args.dt
    if args.t1 is not None:
        sim["t1"] = args.t1

    os.makedirs(args.out_dir, exist_ok=True)
    run = _Run(args.command, cfg, sim["seed"], sim["samples"],
               args.tol_structural, args.tol_dynamic)
    try:
        _HANDLERS[args.command](run, cfg, chart, sim, args)
    except _CONFIG_ERRORS as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return 2
    except _VERIFY_ERRORS as exc:
        run.report["error"] = f"{type(exc).__name__}: {exc}"
        run.report["status"] = "verification-failed"
        _write_report(args.out_dir, run.report)
        print(f"verification failed: {exc}", file=sys.stderr)
        return 1
    except _NUMERIC_ERRORS as exc:
        run.report["error"] = f"{type(exc).__name__}: {exc}"
        run.report["status"] = "numerical-failure"
        _write_report(args.out_dir, run.report)
        print(f"numerical failure: {exc}", file=sys.stderr)
        return 3

    failed = run.failed()
    run.report["status"] = "ok" if not failed else "verification-failed"
    if run.csv is not None:
        header, rows = run.csv
        run.report["csv"] = "trajectory.csv"
        _write_csv(args.out_dir, header, rows)
    _write_report(args.out_dir, run.report)
    if failed:
        print("failed checks: " + ", ".join(failed), file=sys.stderr)
        return 1
    return 0


if __name__ == "__main__":
    sys.exit(main())
