"""Nonlinear splittings: projectors, lifts, classification, and curvature.

A splitting is the data of m coefficient fields h^alpha(x, y, v); the
horizontal image of a base velocity v at (x, y) is the tangent vector
(v, h(x, y, v)).  Nothing here assumes linearity in v: Ehresmann (linear),
affine and positively-homogeneous splittings are special cases detected by
sampling, never assumed.

Splittings flagged smooth_at_zero=False are only evaluated on the slit
|v|_2 >= chart.slit_eps.
"""

from dataclasses import dataclass

import numpy as np

from .bundle import (BundleChart, DerivedField, SecondTangentPoint,
                     TangentPointM, VectorFieldM, VectorFieldN,
                     complete_lift, lie_bracket, vertical_lift)
from .errors import (DimensionMismatch, DomainError, NotAffine,
                     NotWellDefined)
from .exprs import compile_field, mentions_nonsmooth, parse
from .jets import Jet2, ScalarField
from .numerics import IvpProblem, TrajectoryRecord, rk4_integrate

PROVENANCE = ("explicit", "induced-by-Lagrangian", "affine-from-constraints")


class SplittingSpec:
    """Coefficients of a nonlinear splitting over one chart.

    coefficients: m ScalarFields of (x, y, v), arity n+m+n.
    smooth_at_zero: False restricts evaluation to the slit |v| >= slit_eps.
    provenance: one of 'explicit', 'induced-by-Lagrangian',
    'affine-from-constraints'.
    """

    def __init__(self, chart, coefficients, smooth_at_zero=True,
                 provenance="explicit"):
        if len(coefficients) != chart.m:
            raise DimensionMismatch(
                f"need {chart.m} coefficient fields, got {len(coefficients)}")
        arity = 2 * chart.n + chart.m
        for c in coefficients:
            if c.arity != arity:
                raise DimensionMismatch(
                    f"coefficient '{c.label}' has arity {c.arity}, "
                    f"expected {arity}")
        if provenance not in PROVENANCE:
            raise ValueError(f"provenance must be one of {PROVENANCE}")
        self.chart = chart
        self.coefficients = list(coefficients)
        self.smooth_at_zero = bool(smooth_at_zero)
        self.provenance = provenance

    @classmethod
    def from_expressions(cls, chart, sources, smooth_at_zero=None,
                         constants=None):
        """Build from m expression strings in x1.., y1.., v1..

        smooth_at_zero defaults to False exactly when abs or sqrt appears
        in some coefficient; pass an explicit flag to override.
        """
        ctx = chart.ctx_pullback(constants)
        asts = [parse(s) if isinstance(s, str) else s for s in sources]
        if smooth_at_zero is None:
            smooth_at_zero = not any(mentions_nonsmooth(a) for a in asts)
        fields = [compile_field(a, ctx, label=src if isinstance(src, str) else None,
                                slit_eps=chart.slit_eps)
                  for a, src in zip(asts, sources)]
        return cls(chart, fields, smooth_at_zero, "explicit")

    def admissible(self, v):
        v = np.asarray(v, dtype=float)
        return self.smooth_at_zero or np.linalg.norm(v) >= self.chart.slit_eps

    def _require_admissible(self, v):
        if not self.admissible(v):
            raise DomainError(
                f"base velocity inside slit ball (|v| < {self.chart.slit_eps})")

    def point_args(self, x, y, v):
        return np.concatenate([np.asarray(x, dtype=float),
                               np.asarray(y, dtype=float),
                               np.asarray(v, dtype=float)])

    def h_values(self, x, y, v):
        self._require_admissible(v)
        z = self.point_args(x, y, v)
        return np.array([c.value(z) for c in self.coefficients])

    def h_jets(self, x, y, v):
        self._require_admissible(v)
        z = self.point_args(x, y, v)
        return [c.jet(z) for c in self.coefficients]

    def as_callable(self):
        return lambda x, y, v: self.h_values(x, y, v)

    def __repr__(self):
        return (f"SplittingSpec(n={self.chart.n}, m={self.chart.m}, "
                f"provenance={self.provenance!r})")


def horizontal_map(spec, p):
    """h itself: (x, y, v) -> the horizontal tangent vector (v, h(x,y,v))."""
    w = spec.h_values(p.x, p.y, p.v)
    return TangentPointM(spec.chart, p.x, p.y, p.v, w)


def project_horizontal(spec, t):
    """P_h: keep the base velocity, replace w by h(x, y, v)."""
    w = spec.h_values(t.x, t.y, t.v)
    return TangentPointM(spec.chart, t.x, t.y, t.v, w)


def project_vertical(spec, t):
    """P_v: zero base velocity, w minus the horizontal part.

    The w-block is computed as t.w - P_h(t).w, so P_h + P_v = identity on
    w-blocks holds bit for bit.
    """
    w_h = spec.h_values(t.x, t.y, t.v)
    return TangentPointM(spec.chart, t.x, t.y, np.zeros(spec.chart.n),
                         t.w - w_h)


def horizontal_lift_field(spec, X, m_pt):
    """Value of the horizontal lift of the base field X at the point (x, y)."""
    x, y = (np.asarray(m_pt[0], dtype=float), np.asarray(m_pt[1], dtype=float))
    v = X.values(x)
    return TangentPointM(spec.chart, x, y, v, spec.h_values(x, y, v))


def lifted_field(spec, X):
    """The horizontal lift of a base field as a field on M (for brackets)."""
    n, m = spec.chart.n, spec.chart.m
    k = n + m

    def base_comp(i):
        def ev(jets):
            return X.components[i].chain(jets[:n])
        return ScalarField(k, ev, label=f"({X.components[i].label})^h")

    def fibre_comp(a):
        def ev(jets):
            inner_v = [X.components[i].chain(jets[:n]) for i in range(n)]
            return spec.coefficients[a].chain(list(jets) + inner_v)
        return ScalarField(k, ev, label=f"h{a+1}^lift")

    comps = [base_comp(i) for i in range(n)] + [fibre_comp(a) for a in range(m)]
    return VectorFieldM(spec.chart, comps)


def horizontal_lift_curve(spec, base_curve, y0, t0, t1, dt):
    """Integrate the lift equation dy/dt = h(x(t), y, dx/dt) with RK4.

    base_curve maps t to the pair (x(t), xdot(t)).  The record's states
    hold the full rows (x, y, v, w) on the time grid; diagnostics carry the
    finite-difference residual |dy/dt - h| (central in the interior,
    one-sided at the ends).
    """
    y0 = np.asarray(y0, dtype=float)
    if y0.shape != (spec.chart.m,):
        raise DimensionMismatch(f"y0 must have length {spec.chart.m}")

    def f(t, y):
        x, xdot = base_curve(t)
        return spec.h_values(x, y, xdot)

    rec = rk4_integrate(IvpProblem(f, t0, t1, y0, dt))
    ts = rec.t
    ys = rec.states
    rows = []
    for t, y in zip(ts, ys):
        x, xdot = base_curve(t)
        rows.append(np.concatenate([np.asarray(x, dtype=float), y,
                                    np.asarray(xdot, dtype=float),
                                    spec.h_values(x, y, xdot)]))
    rows = np.array(rows)
    m = spec.chart.m
    n = spec.chart.n
    w_cols = rows[:, 2 * n + m:]
    resid = np.zeros(len(ts))
    width = min(5, len(ts))
    for i in range(len(ts)):
        if width < 2:
            break
        j = min(max(i - width // 2, 0), len(ts) - width)
        dy = _stencil_derivative(ts[j:j + width], ys[j:j + width], ts[i])
        resid[i] = np.abs(dy - w_cols[i]).max()
    return TrajectoryRecord(ts, rows, {"lift_residual": resid})


def _stencil_derivative(tw, yw, t):
    """Derivative at t of the Lagrange interpolant through (tw, yw) rows.

    Exact for polynomials up to len(tw)-1, on any node spacing; used so the
    residual diagnostic keeps high order across the shortened final step.
    """
    k = len(tw)
    dy = np.zeros(yw.shape[1])
    for a in range(k):
        denom = 1.0
        for l in range(k):
            if l != a:
                denom *= tw[a] - tw[l]
        num = 0.0
        for b in range(k):
            if b == a:
                continue
            term = 1.0
            for l in range(k):
                if l != a and l != b:
                    term *= t - tw[l]
            num += term
        dy += yw[a] * (num / denom)
    return dy


@dataclass
class ClassificationReport:
    """Sampling evidence for the splitting's type.

    residuals always has the keys euler_residual, linearity_residual and
    drift_residual; drift_residual is None when v=0 is not admissible.
    """
    verdict: str
    residuals: dict
    sample_count: int
    seed: int
    tol: float
    skipped: int = 0


def classify(spec, samples=200, seed=42):
    """Sample AD residuals and apply the decision rules.

    Ehresmann: no second v-derivative and no drift h(x,y,0).
    Affine: no second v-derivative.  Homogeneous: Euler identity
    v . dh/dv = h.  Otherwise General.  Linearity/drift are only decidable
    for splittings smooth at v=0.  tol = 1e-7 (1 + max sampled |h|).
    """
    if samples < 1:
        raise ValueError("samples must be >= 1")
    chart = spec.chart
    n, m = chart.n, chart.m
    rng = np.random.default_rng(seed)
    euler = 0.0
    lin = 0.0
    drift = 0.0
    scale = 0.0
    used = 0
    skipped = 0
    while used < samples and skipped < 50 * samples:
        z = rng.uniform(-1.0, 1.0, 2 * n + m)
        x, y, v = z[:n], z[n:n + m], z[n + m:]
        try:
            jets = spec.h_jets(x, y, v)
            if spec.smooth_at_zero:
                hz = spec.h_values(x, y, np.zeros(n))
            else:
                hz = None
        except DomainError:
            skipped += 1
            continue
        used += 1
        for j in jets:
            gv = j.gradient[n + m:]
            hvv = j.hessian[n + m:, n + m:]
            euler = max(euler, abs(float(gv @ v) - j.value))
            lin = max(lin, np.abs(hvv).max())
            scale = max(scale, abs(j.value))
        if hz is not None:
            drift = max(drift, np.abs(hz).max())
    if used == 0:
        raise DomainError("no admissible sample points found")
    tol = 1e-7 * (1.0 + scale)
    if spec.smooth_at_zero and lin < tol and drift < tol:
        verdict = "Ehresmann"
    elif spec.smooth_at_zero and lin < tol:
        verdict = "Affine"
    elif euler < tol:
        verdict = "Homogeneous"
    else:
        verdict = "General"
    residuals = {
        "euler_residual": float(euler),
        "linearity_residual": float(lin) if spec.smooth_at_zero else None,
        "drift_residual": float(drift) if spec.smooth_at_zero else None,
    }
    return ClassificationReport(verdict, residuals, used, seed, tol, skipped)


def _vilms_slices(n, m):
    # doubled-chart variable order: x, v, y, w, X, V
    return (slice(0, n), slice(n, 2 * n), slice(2 * n, 2 * n + m),
            slice(2 * n + m, 2 * n + 2 * m),
            slice(2 * n + 2 * m, 3 * n + 2 * m),
            slice(3 * n + 2 * m, 4 * n + 2 * m))


def vilms_lift(spec):
    """The induced splitting on the tangent fibration TM -> TN.

    On the doubled chart (base (x, v), fibre (y, w)), the coefficients at
    base velocity (X, V) are Y = h(x, y, X) and
    W = h_x(x,y,X) v + h_y(x,y,X) w + h_v(x,y,X) V.

    Y-fields carry exact jets.  W-fields have exact values and gradients;
    their second derivatives in the (x, y, X) block would need third
    derivatives of h, so those jets are finished by differencing the exact
    gradient (DerivedField).  The blocks in which W is linear stay exact.
    """
    chart = spec.chart
    n, m = chart.n, chart.m
    big = BundleChart(2 * n, 2 * m, chart.slit_eps)
    arity = 4 * n + 2 * m
    sx, sv, sy, sw, sX, sV = _vilms_slices(n, m)

    def y_field(a):
        def ev(jets):
            inner = list(jets[sx]) + list(jets[sy]) + list(jets[sX])
            return spec.coefficients[a].chain(inner)
        return ScalarField(arity, ev, label=f"vilms_Y{a+1}")

    def w_field(a):
        def vg(z):
            hj = spec.coefficients[a].jet(
                np.concatenate([z[sx], z[sy], z[sX]]))
            u = np.concatenate([z[sv], z[sw], z[sV]])
            val = float(hj.gradient @ u)
            hu = hj.hessian @ u
            grad = np.zeros(arity)
            grad[sx] = hu[:n]
            grad[sy] = hu[n:n + m]
            grad[sX] = hu[n + m:]
            grad[sv] = hj.gradient[:n]
            grad[sw] = hj.gradient[n:n + m]
            grad[sV] = hj.gradient[n + m:]
            return val, grad
        return DerivedField(arity, vg, label=f"vilms_W{a+1}")

    coeffs = [y_field(a) for a in range(m)] + [w_field(a) for a in range(m)]
    return SplittingSpec(big, coeffs, spec.smooth_at_zero, "explicit")


def vilms_horizontal(spec, at, X, V):
    """Horizontal lift through the Vilms splitting at a point of TM.

    at is the TM point; (X, V) is the base velocity in TN.  Returns the
    second-tangent point (at; X, Y, V, W) by the displayed coefficients.
    """
    X = np.asarray(X, dtype=float)
    V = np.asarray(V, dtype=float)
    jets = spec.h_jets(at.x, at.y, X)
    n, m = spec.chart.n, spec.chart.m
    u = np.concatenate([at.v, at.w, V])
    Y = np.array([j.value for j in jets])
    W = np.array([float(j.gradient @ u) for j in jets])
    return SecondTangentPoint(spec.chart, at.x, at.y, at.v, at.w, X, Y, V, W)


def vilms_vertical_projector(spec, s):
    """Vertical projector of the Vilms splitting, by the direct formula.

    Subtracts the horizontal part at base velocity (X, V) from the upper
    block; the independent oracle is flip . tangent-map(P_v) . flip.
    """
    h = vilms_horizontal(spec, TangentPointM(s.chart, s.x, s.y, s.v, s.w),
                         s.X, s.V)
    n, m = s.chart.n, s.chart.m
    return SecondTangentPoint(s.chart, s.x, s.y, s.v, s.w,
                              np.zeros(n), s.Y - h.Y, np.zeros(n), s.W - h.W)


def pv_component_fields(spec):
    """P_v as 2(n+m) scalar fields of (x, y, v, w), for tangent_map oracles."""
    n, m = spec.chart.n, spec.chart.m
    k = 2 * (n + m)

    def selector(i, label):
        return ScalarField(k, lambda jets, i=i: jets[i], label=label)

    def zero(label):
        return ScalarField(k, lambda jets: Jet2.constant(0.0, k), label=label)

    def w_comp(a):
        def ev(jets):
            inner = list(jets[:n + m]) + list(jets[n + m:2 * n + m])
            return jets[2 * n + m + a] - spec.coefficients[a].chain(inner)
        return ScalarField(k, ev, label=f"Pv_w{a+1}")

    return ([selector(i, f"Pv_x{i+1}") for i in range(n)]
            + [selector(n + a, f"Pv_y{a+1}") for a in range(m)]
            + [zero(f"Pv_v{i+1}") for i in range(n)]
            + [w_comp(a) for a in range(m)])


@dataclass
class VilmsCheckReport:
    """Comparison of the two lift routes through a coordinate direction."""
    complete_residual: float
    vertical_difference: float


def vilms_complete_lift_check(spec, j, at):
    """Check (lift of d/dx_j)^complete against the Vilms lift of d/dx_j.

    Also reports the same comparison for the vertical pair — the vertical
    lift of the lifted direction versus the Vilms lift of d/dv_j — whose
    difference is generically nonzero and is returned, not asserted away.
    """
    n, m = spec.chart.n, spec.chart.m
    if not 0 <= j < n:
        raise DimensionMismatch(f"coordinate index {j} out of range")
    ej = np.zeros(n)
    ej[j] = 1.0
    const = [ScalarField(n, lambda jets, c=ej[i]: Jet2.constant(c, n),
                         label=f"e{j+1}[{i}]") for i in range(n)]
    Xfield = VectorFieldN(spec.chart, const)
    A_c = complete_lift(lifted_field(spec, Xfield), at)
    B_c = vilms_horizontal(spec, at, ej, np.zeros(n))
    complete_residual = float(np.abs(A_c.upper() - B_c.upper()).max())

    hv = spec.h_values(at.x, at.y, ej)
    A_v = vertical_lift(at, TangentPointM(spec.chart, at.x, at.y, ej, hv))
    B_v = vilms_horizontal(spec, at, np.zeros(n), ej)
    vertical_difference = float(np.abs(A_v.upper() - B_v.upper()).max())
    return VilmsCheckReport(complete_residual, vertical_difference)


def curvature_rbar(spec, X, Y, m_pt):
    """Curvature through lifted brackets: [X^h, Y^h] - [X, Y]^h at (x, y).

    The base blocks of the two terms cancel identically; the returned
    tangent vector is vertical (zero v-block) with the fibre difference in
    its w-block.
    """
    x = np.asarray(m_pt[0], dtype=float)
    y = np.asarray(m_pt[1], dtype=float)
    n = spec.chart.n
    br = lie_bracket(lifted_field(spec, X), lifted_field(spec, Y))
    q = np.concatenate([x, y])
    br_vals = br.values(q)
    base_br = lie_bracket(X, Y)
    vb = base_br.values(x)
    lifted = spec.h_values(x, y, vb)
    base_diff = br_vals[:n] - vb
    if np.abs(base_diff).max() > 1e-9:
        raise NotWellDefined(
            f"base blocks failed to cancel: {np.abs(base_diff).max():.3e}")
    return TangentPointM(spec.chart, x, y, np.zeros(n), br_vals[n:] - lifted)


def _linear_extension(chart, values, x0, salt):
    """A non-constant base field through (x0, values), for dependence tests."""
    n = chart.n

    def comp(i):
        def ev(jets):
            out = Jet2.constant(values[i], n)
            for l in range(n):
                c = 0.31 + 0.07 * (i + 1) + 0.11 * (l + 1) + 0.05 * salt
                out = out + c * (jets[l] - float(x0[l]))
            return out
        return ScalarField(n, ev, label=f"ext{salt}_{i+1}")

    return VectorFieldN(chart, [comp(i) for i in range(n)])


def curvature_pointwise(spec, u, v, m_pt):
    """Curvature at a point from constant extensions of the two vectors.

    Recomputes with deliberately different (linear) extensions; if the two
    answers differ by more than 1e-7 the value depends on the extension and
    NotWellDefined is raised.  Affine splittings pass the check.
    """
    u = np.asarray(u, dtype=float)
    v = np.asarray(v, dtype=float)
    x0 = np.asarray(m_pt[0], dtype=float)
    chart = spec.chart
    n = chart.n

    def const_field(vals):
        return VectorFieldN(chart, [
            ScalarField(n, lambda jets, c=vals[i]: Jet2.constant(c, n),
                        label=f"const{i+1}") for i in range(n)])

    r1 = curvature_rbar(spec, const_field(u), const_field(v), m_pt)
    r2 = curvature_rbar(spec, _linear_extension(chart, u, x0, 1),
                        _linear_extension(chart, v, x0, 2), m_pt)
    dep = np.abs(r1.w - r2.w).max()
    if dep > 1e-7:
        raise NotWellDefined(
            f"curvature value depends on the extension (difference {dep:.3e})")
    return r1


@dataclass
class AffineSplittingData:
    """Affine splitting h = -A_i v^i + A_0 by its coefficient fields.

    A is an m x n nested list of ScalarFields of (x, y); A0 is a list of m
    such fields.  reconstruction_residual records how well the affine
    reconstruction matched the source splitting (None when constructed
    directly from expressions).
    """
    chart: BundleChart
    A: list
    A0: list
    reconstruction_residual: float = None

    def __post_init__(self):
        n, m = self.chart.n, self.chart.m
        if len(self.A) != m or any(len(row) != n for row in self.A):
            raise DimensionMismatch(f"A must be {m} rows of {n} fields")
        if len(self.A0) != m:
            raise DimensionMismatch(f"A0 must have {m} fields")

    @classmethod
    def from_expressions(cls, chart, A_sources, A0_sources, constants=None):
        ctx = chart.ctx_point(constants)
        A = [[compile_field(s, ctx, slit_eps=chart.slit_eps) for s in row]
             for row in A_sources]
        A0 = [compile_field(s, ctx, slit_eps=chart.slit_eps)
              for s in A0_sources]
        return cls(chart, A, A0)

    def to_splitting(self):
        n, m = self.chart.n, self.chart.m
        arity = 2 * n + m

        def coeff(a):
            def ev(jets):
                xy = list(jets[:n + m])
                out = self.A0[a].chain(xy)
                for i in range(n):
                    out = out - self.A[a][i].chain(xy) * jets[n + m + i]
                return out
            return ScalarField(arity, ev, label=f"h{a+1}_affine")

        return SplittingSpec(self.chart, [coeff(a) for a in range(m)],
                             True, "affine-from-constraints")


def affine_decompose(spec, samples=100, seed=0):
    """Read off A_0 = h(x,y,0) and A_i = -dh/dv_i(x,y,0), then verify.

    Reconstruction is sampled at `samples` random points; a max-abs
    mismatch above 1e-7 raises NotAffine.
    """
    chart = spec.chart
    n, m = chart.n, chart.m

    def a0_field(a):
        def ev(jets):
            zero = [Jet2.constant(0.0, n + m) for _ in range(n)]
            return spec.coefficients[a].chain(list(jets) + zero)
        return ScalarField(n + m, ev, label=f"A0_{a+1}")

    def a_field(a, i):
        def vg(q):
            hj = spec.coefficients[a].jet(
                np.concatenate([q, np.zeros(n)]))
            val = -hj.gradient[n + m + i]
            grad = -hj.hessian[n + m + i, :n + m]
            return val, grad
        return DerivedField(n + m, vg, label=f"A{a+1}_{i+1}")

    A = [[a_field(a, i) for i in range(n)] for a in range(m)]
    A0 = [a0_field(a) for a in range(m)]
    data = AffineSplittingData(chart, A, A0)
    rng = np.random.default_rng(seed)
    worst = 0.0
    for _ in range(samples):
        z = rng.uniform(-1.0, 1.0, 2 * n + m)
        x, y, v = z[:n], z[n:n + m], z[n + m:]
        h = spec.h_values(x, y, v)
        q = np.concatenate([x, y])
        recon = np.array([
            float(sum(-A[a][i].value(q) * v[i] for i in range(n))
                  + A0[a].value(q)) for a in range(m)])
        worst = max(worst, np.abs(h - recon).max())
    if worst > 1e-7:
        raise NotAffine(f"reconstruction residual {worst:.3e} exceeds 1e-7")
    data.reconstruction_residual = float(worst)
    return data


def affine_curvature_coefficients(data, x, y):
    """B^a_ij from [H_i, H_j] with H_i = d/dx_i - A^b_i d/dy_b, and the
    drift derivatives A^a_0i = H_i(A0^a) + A0(A^a_i).

    Returns (B, A0d) with shapes (m, n, n) and (m, n).
    """
    n, m = data.chart.n, data.chart.m
    q = np.concatenate([np.asarray(x, dtype=float),
                        np.asarray(y, dtype=float)])
    Aj = [[data.A[a][i].jet(q) for i in range(n)] for a in range(m)]
    A0j = [data.A0[a].jet(q) for a in range(m)]
    Aval = np.array([[Aj[a][i].value for i in range(n)] for a in range(m)])
    A0val = np.array([j.value for j in A0j])
    # gradient layout of point fields: first n entries d/dx, next m d/dy
    B = np.zeros((m, n, n))
    for a in range(m):
        for i in range(n):
            for j in range(n):
                B[a, i, j] = (-Aj[a][j].gradient[i]
                              + Aval[:, i] @ Aj[a][j].gradient[n:]
                              + Aj[a][i].gradient[j]
                              - Aval[:, j] @ Aj[a][i].gradient[n:])
    A0d = np.zeros((m, n))
    for a in range(m):
        for i in range(n):
            A0d[a, i] = (A0j[a].gradient[i]
                         - Aval[:, i] @ A0j[a].gradient[n:]
                         + A0val @ Aj[a][i].gradient[n:])
    return B, A0d


def rbar_zero(data, zeta, w_pt):
    """The affine curvature contraction: zeta^i (v^j B^a_ij + A^a_0i) d/dy_a.

    zeta is a base field evaluated at the foot of w_pt; v is the base
    velocity of w_pt.  The result is a vertical tangent vector at (x, y).
    """
    B, A0d = affine_curvature_coefficients(data, w_pt.x, w_pt.y)
    zv = zeta.values(w_pt.x)
    n, m = data.chart.n, data.chart.m
    w = np.zeros(m)
    for a in range(m):
        w[a] = sum(zv[i] * (B[a, i] @ w_pt.v + A0d[a, i]) for i in range(n))
    return TangentPointM(data.chart, w_pt.x, w_pt.y, np.zeros(n), w)
