"""Lagrangians on the total space: EL fields, induced splittings, subduction.

A fibre-regular Lagrangian L(x, y, v, w) determines a splitting through the
relation dL/dw = 0 on the horizontal manifold.  The splitting is
Newton-backed: every coefficient evaluation solves that m-dimensional
system by damped Newton with continuation from v = 0 outward, and first
derivatives come from the implicit-function formula
dh/dz = -(L_ww)^-1 L_wz.
"""

from dataclasses import dataclass

import numpy as np

from .bundle import DerivedField
from .errors import (BranchAmbiguity, DimensionMismatch, DomainError,
                     HypothesisFailed, NoConvergence, NotSubducible,
                     SingularHessian, SingularMatrix)
from .exprs import compile_field, mentions_nonsmooth, parse
from .jets import Jet2, ScalarField
from .numerics import (IvpProblem, LinearSystem, NewtonProblem, linear_solve,
                       newton_solve, rk4_integrate)
from .splitting import SplittingSpec


@dataclass
class LagrangianSpec:
    """A Lagrangian as a scalar field of (x, y, v, w), arity 2(n+m).

    homogeneity_flag optionally declares a velocity-homogeneity degree;
    nonsmooth marks kinked dependence (abs/sqrt) so induced splittings
    inherit the slit restriction.
    """
    chart: object
    field: ScalarField
    homogeneity_flag: float = None
    nonsmooth: bool = False

    def __post_init__(self):
        k = 2 * (self.chart.n + self.chart.m)
        if self.field.arity != k:
            raise DimensionMismatch(
                f"Lagrangian arity {self.field.arity}, expected {k}")

    @classmethod
    def from_expression(cls, chart, source, homogeneity_flag=None,
                        constants=None):
        ast = parse(source) if isinstance(source, str) else source
        f = compile_field(ast, chart.ctx_tangent(constants),
                          label=source if isinstance(source, str) else None,
                          slit_eps=chart.slit_eps)
        return cls(chart, f, homogeneity_flag, mentions_nonsmooth(ast))

    def jet(self, z):
        return self.field.jet(np.asarray(z, dtype=float))

    def value(self, z):
        return self.field.value(np.asarray(z, dtype=float))


@dataclass
class SodeSpec:
    """Second-order field: d(q)/dt = u, d(u)/dt = force(x, y, v, w)."""
    chart: object
    force: object   # callable on the concatenated state, returns n+m floats
    provenance: str = "euler-lagrange"


def integrate_sode(sode, z0, t0, t1, dt, diagnostic=None):
    """Integrate a SODE; states are rows (x, y, v, w) on the time grid."""
    k = sode.chart.n + sode.chart.m
    z0 = np.asarray(z0, dtype=float)
    if z0.shape != (2 * k,):
        raise DimensionMismatch(f"state must have length {2 * k}")

    def f(t, z):
        return np.concatenate([z[k:], sode.force(z)])

    return rk4_integrate(IvpProblem(f, t0, t1, z0, dt), diagnostic)


def fibre_regularity(L, w_pt):
    """Determinant and condition estimate of the fibre Hessian d2L/dw dw."""
    n, m = L.chart.n, L.chart.m
    z = w_pt.as_array()
    H = L.jet(z).hessian
    W = H[2 * n + m:, 2 * n + m:]
    return {"det": float(np.linalg.det(W)),
            "condition": float(np.linalg.cond(W))}


def _force_from_jet(Ljet, q, u):
    """Solve (d2L/du du) f = dL/dq - (d2L/du dq) u for the acceleration."""
    k = q.shape[0]
    M = Ljet.hessian[k:, k:]
    rhs = Ljet.gradient[:k] - Ljet.hessian[k:, :k] @ u
    try:
        return linear_solve(LinearSystem(M, rhs))
    except SingularMatrix as exc:
        raise SingularHessian(f"velocity Hessian singular: {exc}") from exc


def euler_lagrange_sode(L):
    """The EL field of L, with the acceleration solved pointwise."""
    k = L.chart.n + L.chart.m

    def force(z):
        z = np.asarray(z, dtype=float)
        return _force_from_jet(L.jet(z), z[:k], z[k:])

    return SodeSpec(L.chart, force, "euler-lagrange")


class InducedSplitting(SplittingSpec):
    """Newton-backed splitting solving dL/dw (x, y, v, w) = 0 for w."""

    def __init__(self, L):
        chart = L.chart
        n, m = chart.n, chart.m
        self._L = L
        arity = 2 * n + m

        def coeff(a):
            def vg(z):
                w, _ = self.solve_detail(z[:n], z[n:n + m], z[n + m:])
                Ljet = L.jet(np.concatenate([z, w]))
                Lww = Ljet.hessian[arity:, arity:]
                Lwz = Ljet.hessian[arity:, :arity]
                dh = np.array([linear_solve(LinearSystem(Lww, -Lwz[:, c]))
                               for c in range(arity)]).T
                return w[a], dh[a]
            return DerivedField(arity, vg, label=f"h{a+1}_induced")

        super().__init__(chart, [coeff(a) for a in range(m)],
                         smooth_at_zero=not L.nonsmooth,
                         provenance="induced-by-Lagrangian")

    def solve_detail(self, x, y, v):
        """Continuation solve; returns (w, Newton iterations at full v)."""
        chart = self.chart
        n, m = chart.n, chart.m
        x = np.asarray(x, dtype=float)
        y = np.asarray(y, dtype=float)
        v = np.asarray(v, dtype=float)
        self._require_admissible(v)
        k = n + m
        L = self._L
        w = np.zeros(m)
        iterations = 0
        for s in np.linspace(0.0, 1.0, 11):
            vs = s * v

            def residual(wv, vs=vs):
                z = np.concatenate([x, y, vs, wv])
                return L.jet(z).gradient[2 * n + m:]

            def jacobian(wv, vs=vs):
                z = np.concatenate([x, y, vs, wv])
                return L.jet(z).hessian[2 * n + m:, 2 * n + m:]

            try:
                result = newton_solve(NewtonProblem(residual, jacobian, w))
            except DomainError:
                if s < 1.0:
                    continue  # slit Lagrangians are not evaluable at v=0
                raise
            except SingularMatrix as exc:
                raise SingularHessian(str(exc)) from exc
            w = result.x
            iterations = result.iterations
        return w, iterations


def _probe_branches(spec, seed=2718, points=5, n_seeds=10):
    """Reject models where Newton can land on a second nearby root."""
    chart = spec.chart
    n, m = chart.n, chart.m
    L = spec._L
    rng = np.random.default_rng(seed)
    tried = 0
    while tried < points:
        z = rng.uniform(-0.5, 0.5, 2 * n + m)
        x, y, v = z[:n], z[n:n + m], z[n + m:]
        if not spec.admissible(v):
            continue
        tried += 1
        try:
            w_ref, _ = spec.solve_detail(x, y, v)
        except (DomainError, NoConvergence, SingularHessian):
            continue
        seeds = [np.zeros(m), 0.5 * np.ones(m), -0.5 * np.ones(m)]
        seeds += [rng.uniform(-0.7, 0.7, m) for _ in range(n_seeds - 3)]

        def residual(wv):
            return L.jet(np.concatenate([x, y, v, wv])).gradient[2 * n + m:]

        def jacobian(wv):
            return L.jet(np.concatenate([x, y, v, wv])).hessian[
                2 * n + m:, 2 * n + m:]

        for s0 in seeds:
            try:
                res = newton_solve(NewtonProblem(residual, jacobian, s0))
            except (DomainError, NoConvergence, SingularMatrix):
                continue
            gap = np.abs(res.x - w_ref).max()
            if gap > 1e-6 * (1.0 + np.abs(w_ref).max()):
                raise BranchAmbiguity(
                    f"second root at distance {gap:.3e} from the tracked "
                    f"branch near x={x}, v={v}")


def induced_splitting(L, probe=True):
    """The splitting determined by dL/dw = 0, branch-checked at load."""
    spec = InducedSplitting(L)
    if probe:
        _probe_branches(spec)
    return spec


@dataclass
class SampleReport:
    """Max-abs residual over a sampled box, with bookkeeping."""
    max_residual: float
    sample_count: int
    seed: int
    skipped: int = 0


def _sample_points(chart, samples, seed, box, want_admissible):
    rng = np.random.default_rng(seed)
    n, m = chart.n, chart.m
    used = 0
    draws = 0
    while used < samples and draws < 50 * samples:
        draws += 1
        z = rng.uniform(-box, box, 2 * n + m)
        x, y, v = z[:n], z[n:n + m], z[n + m:]
        if want_admissible is not None and not want_admissible(v):
            continue
        used += 1
        yield x, y, v


def symmetry_condition_check(L, h, samples=50, seed=42, box=1.0):
    """Max over samples of |dL/dy . h|: the fibre-frame symmetry residual."""
    chart = L.chart
    n, m = chart.n, chart.m
    worst = 0.0
    skipped = 0
    used = 0
    for x, y, v in _sample_points(chart, samples, seed, box, h.admissible):
        try:
            w = h.h_values(x, y, v)
            g = L.jet(np.concatenate([x, y, v, w])).gradient
        except DomainError:
            skipped += 1
            continue
        used += 1
        worst = max(worst, np.abs(g[n:n + m]).max())
    return SampleReport(float(worst), used, seed, skipped)


def tangency_check(L, h, samples=50, seed=42, box=1.0):
    """Max over samples on the horizontal manifold of |Gamma_L(dL/dw)|.

    The level functions of the horizontal manifold are g_a = dL/dw^a; the
    residual is their derivative along the EL field at points (x,y,v,h).
    """
    chart = L.chart
    n, m = chart.n, chart.m
    k = n + m
    worst = 0.0
    skipped = 0
    used = 0
    for x, y, v in _sample_points(chart, samples, seed, box, h.admissible):
        try:
            w = h.h_values(x, y, v)
            z = np.concatenate([x, y, v, w])
            Ljet = L.jet(z)
            f = _force_from_jet(Ljet, z[:k], z[k:])
        except DomainError:
            skipped += 1
            continue
        used += 1
        u = z[k:]
        for a in range(m):
            row = Ljet.hessian[2 * n + m + a]
            resid = row[:k] @ u + row[k:] @ f
            worst = max(worst, abs(float(resid)))
    return SampleReport(float(worst), used, seed, skipped)


class SubducedField(ScalarField):
    """L restricted to the horizontal manifold, as a field of (x, v).

    Jets are exact: with dL/dw = 0 along h, all first and second
    derivatives of the restriction collapse to Schur complements of L's
    own jet, so no derivatives of h enter.
    """

    def __init__(self, L, h, y_ref, label="Lbar"):
        super().__init__(2 * L.chart.n, None, label)
        self.L = L
        self.h = h
        self.y_ref = np.asarray(y_ref, dtype=float)

    def _z(self, q):
        n = self.L.chart.n
        x, v = q[:n], q[n:]
        w = self.h.h_values(x, self.y_ref, v)
        return np.concatenate([x, self.y_ref, v, w])

    def value(self, q):
        q = np.asarray(q, dtype=float)
        return self.L.value(self._z(q))

    def jet(self, q):
        q = np.asarray(q, dtype=float)
        if q.shape != (self.arity,):
            raise DimensionMismatch(f"expected {self.arity} inputs")
        n, m = self.L.chart.n, self.L.chart.m
        Ljet = self.L.jet(self._z(q))
        idx = np.r_[0:n, n + m:2 * n + m]           # x and v positions
        wpos = np.arange(2 * n + m, 2 * n + 2 * m)
        g = Ljet.gradient[idx]
        Hzz = Ljet.hessian[np.ix_(idx, idx)]
        Hzw = Ljet.hessian[np.ix_(idx, wpos)]
        Hww = Ljet.hessian[np.ix_(wpos, wpos)]
        try:
            corr = Hzw @ np.linalg.solve(Hww, Hzw.T)
        except np.linalg.LinAlgError as exc:
            raise SingularHessian(f"fibre Hessian singular: {exc}") from exc
        H = Hzz - corr
        return Jet2(Ljet.value, g, 0.5 * (H + H.T))


@dataclass
class SubductionResult:
    Lbar: ScalarField
    y_independence: float
    y_ref: np.ndarray


def subduce(L, h, samples=50, seed=42, box=1.0):
    """Restrict L to the horizontal manifold and verify it drops to the base.

    Checks the defining relation dL/dw . h = 0 and the independence of
    L . h from the fibre point; NotSubducible on either failure.  y_ref is
    the fibre point of the first sample.
    """
    chart = L.chart
    n, m = chart.n, chart.m
    y_ref = None
    worst_rel = 0.0
    worst_dep = 0.0
    ref_vals = {}
    for x, y, v in _sample_points(chart, samples, seed, box, h.admissible):
        try:
            w = h.h_values(x, y, v)
            z = np.concatenate([x, y, v, w])
            g = L.jet(z).gradient
        except DomainError:
            continue
        if y_ref is None:
            y_ref = y.copy()
        worst_rel = max(worst_rel, np.abs(g[2 * n + m:]).max())
        try:
            w_ref = h.h_values(x, y_ref, v)
            val_ref = L.value(np.concatenate([x, y_ref, v, w_ref]))
            val = L.value(z)
        except DomainError:
            continue
        worst_dep = max(worst_dep, abs(val - val_ref))
    if y_ref is None:
        raise DomainError("no admissible sample points")
    if worst_rel > 1e-6:
        raise NotSubducible(
            f"defining relation fails: max |dL/dw . h| = {worst_rel:.3e}")
    if worst_dep > 1e-6:
        raise NotSubducible(
            f"restriction depends on the fibre point: {worst_dep:.3e}")
    return SubductionResult(SubducedField(L, h, y_ref), float(worst_dep),
                            y_ref)


@dataclass
class ProjectionReport:
    max_base_deviation: float
    horizontality_drift: float
    el_residual_reduced: float
    min_lbar_det: float


def projection_verify(L, h, ic_base, y0, T, dt):
    """Integrate the full EL field from a horizontal start and compare its
    base shadow with the subduced dynamics started at the same (x0, v0).

    Reports the max base deviation, the drift |w - h(x,y,v)| along the full
    run, the EL residual of the subduced Lagrangian along the projected
    curve (finite differences in t), and the minimum |det| of the subduced
    velocity Hessian seen on the grid.
    """
    chart = L.chart
    n, m = chart.n, chart.m
    x0 = np.asarray(ic_base[0], dtype=float)
    v0 = np.asarray(ic_base[1], dtype=float)
    y0 = np.asarray(y0, dtype=float)
    w0 = h.h_values(x0, y0, v0)
    sode = euler_lagrange_sode(L)
    full = integrate_sode(sode, np.concatenate([x0, y0, v0, w0]), 0.0, T, dt)

    sub = subduce(L, h)
    Lbar = sub.Lbar

    def fbar(t, s):
        q, u = s[:n], s[n:]
        return np.concatenate([u, _force_from_jet(Lbar.jet(s), q, u)])

    red = rk4_integrate(IvpProblem(fbar, 0.0, T, np.concatenate([x0, v0]), dt))

    xs_full = full.states[:, :n]
    dev = np.abs(xs_full - red.states[:, :n]).max()

    drift = 0.0
    for row in full.states:
        x, y, v, w = row[:n], row[n:n + m], row[n + m:2 * n + m], row[2 * n + m:]
        drift = max(drift, np.abs(w - h.h_values(x, y, v)).max())

    # EL residual of Lbar along the projected full trajectory
    ts = full.t
    qs = full.states[:, :n]
    us = full.states[:, n + m:2 * n + m]
    ps = np.zeros((len(ts), n))
    gx = np.zeros((len(ts), n))
    min_det = np.inf
    for i, (q, u) in enumerate(zip(qs, us)):
        jet = Lbar.jet(np.concatenate([q, u]))
        ps[i] = jet.gradient[n:]
        gx[i] = jet.gradient[:n]
        min_det = min(min_det, abs(np.linalg.det(jet.hessian[n:, n:])))
    el_res = 0.0
    for i in range(1, len(ts) - 1):
        pdot = (ps[i + 1] - ps[i - 1]) / (ts[i + 1] - ts[i - 1])
        el_res = max(el_res, np.abs(pdot - gx[i]).max())
    return ProjectionReport(float(dev), float(drift), float(el_res),
                            float(min_det))


def liouville_derivative(L, z):
    """Delta(L) = v . dL/dv + w . dL/dw at the state z = (x, y, v, w)."""
    k = L.chart.n + L.chart.m
    z = np.asarray(z, dtype=float)
    return float(L.jet(z).gradient[k:] @ z[k:])


def homogeneity_of_induced(L, samples=50, seed=42, box=1.0):
    """Euler residual of the induced splitting, under the 2-homogeneity
    hypothesis Delta(L) = 2L (checked first; HypothesisFailed otherwise)."""
    chart = L.chart
    n, m = chart.n, chart.m
    rng = np.random.default_rng(seed)
    checked = 0
    draws = 0
    while checked < samples and draws < 50 * samples:
        draws += 1
        z = rng.uniform(-box, box, 2 * (n + m))
        try:
            gap = abs(liouville_derivative(L, z) - 2.0 * L.value(z))
        except DomainError:
            continue
        checked += 1
        if gap >= 1e-8:
            raise HypothesisFailed(
                f"Delta(L) - 2L = {gap:.3e} at z={z}; Lagrangian is not "
                f"2-homogeneous in the velocities")
    if checked == 0:
        raise DomainError("no admissible sample points")
    h = induced_splitting(L)
    worst = 0.0
    used = 0
    skipped = 0
    for x, y, v in _sample_points(chart, samples, seed + 1, box,
                                  h.admissible):
        try:
            jets = h.h_jets(x, y, v)
        except (DomainError, NoConvergence):
            skipped += 1
            continue
        used += 1
        for j in jets:
            gv = j.gradient[n + m:]
            worst = max(worst, abs(float(gv @ v) - j.value))
    return SampleReport(float(worst), used, seed, skipped)
