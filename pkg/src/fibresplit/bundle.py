"""Charts and tangent-level objects for a fibred manifold.

A chart fixes base dimension n (coordinates x1..xn) and fibre dimension m
(coordinates y1..ym).  Velocities are v (base directions) and w (fibre
directions).  Points of the second tangent space carry a second block
(X, Y, V, W) over the first.

The slit radius slit_eps is part of the chart: fields built over the chart
inherit it, and non-smooth coefficient fields (abs, sqrt) are only
evaluated at base velocities with |v| >= slit_eps.
"""

from dataclasses import dataclass

import numpy as np

from .errors import BasePointMismatch, DimensionMismatch
from .exprs import VarContext
from .jets import ScalarField, Jet2

SLIT_EPS_DEFAULT = 1e-6


def _vec(a, k, what):
    a = np.asarray(a, dtype=float)
    if a.shape != (k,):
        raise DimensionMismatch(f"{what} must have shape ({k},), got {a.shape}")
    return a


@dataclass(frozen=True)
class BundleChart:
    """Dimensions and naming for one fibred chart."""
    n: int
    m: int
    slit_eps: float = SLIT_EPS_DEFAULT

    def __post_init__(self):
        if self.n < 1 or self.m < 1:
            raise DimensionMismatch("chart needs n >= 1 and m >= 1")
        if self.slit_eps <= 0:
            raise ValueError("slit_eps must be positive")

    @property
    def x_names(self):
        return [f"x{i+1}" for i in range(self.n)]

    @property
    def y_names(self):
        return [f"y{a+1}" for a in range(self.m)]

    @property
    def v_names(self):
        return [f"v{i+1}" for i in range(self.n)]

    @property
    def w_names(self):
        return [f"w{a+1}" for a in range(self.m)]

    def ctx_base(self, constants=None):
        return VarContext([("base", self.x_names)], constants)

    def ctx_point(self, constants=None):
        return VarContext([("base", self.x_names), ("fibre", self.y_names)],
                          constants)

    def ctx_pullback(self, constants=None):
        """Coefficient context (x, y, v): base velocity over a point."""
        return VarContext([("base", self.x_names), ("fibre", self.y_names),
                           ("base_velocity", self.v_names)], constants)

    def ctx_tangent(self, constants=None):
        return VarContext([("base", self.x_names), ("fibre", self.y_names),
                           ("base_velocity", self.v_names),
                           ("fibre_velocity", self.w_names)], constants)


@dataclass
class TangentPointM:
    """Tangent vector (v, w) at the point (x, y) of the total space."""
    chart: BundleChart
    x: np.ndarray
    y: np.ndarray
    v: np.ndarray
    w: np.ndarray

    def __post_init__(self):
        self.x = _vec(self.x, self.chart.n, "x")
        self.y = _vec(self.y, self.chart.m, "y")
        self.v = _vec(self.v, self.chart.n, "v")
        self.w = _vec(self.w, self.chart.m, "w")

    def point(self):
        return np.concatenate([self.x, self.y])

    def as_array(self):
        return np.concatenate([self.x, self.y, self.v, self.w])


@dataclass
class PullbackPoint:
    """Base velocity v attached to the point (x, y): where splittings live."""
    chart: BundleChart
    x: np.ndarray
    y: np.ndarray
    v: np.ndarray

    def __post_init__(self):
        self.x = _vec(self.x, self.chart.n, "x")
        self.y = _vec(self.y, self.chart.m, "y")
        self.v = _vec(self.v, self.chart.n, "v")

    def as_array(self):
        return np.concatenate([self.x, self.y, self.v])


@dataclass
class SecondTangentPoint:
    """Point of the double tangent space: (x,y,v,w) plus (X,Y,V,W)."""
    chart: BundleChart
    x: np.ndarray
    y: np.ndarray
    v: np.ndarray
    w: np.ndarray
    X: np.ndarray
    Y: np.ndarray
    V: np.ndarray
    W: np.ndarray

    def __post_init__(self):
        n, m = self.chart.n, self.chart.m
        self.x = _vec(self.x, n, "x")
        self.y = _vec(self.y, m, "y")
        self.v = _vec(self.v, n, "v")
        self.w = _vec(self.w, m, "w")
        self.X = _vec(self.X, n, "X")
        self.Y = _vec(self.Y, m, "Y")
        self.V = _vec(self.V, n, "V")
        self.W = _vec(self.W, m, "W")

    def as_array(self):
        return np.concatenate([self.x, self.y, self.v, self.w,
                               self.X, self.Y, self.V, self.W])

    def upper(self):
        """The second block (X, Y, V, W) as one array."""
        return np.concatenate([self.X, self.Y, self.V, self.W])

    def allclose(self, other, tol=1e-9):
        return bool(np.all(np.abs(self.as_array() - other.as_array()) <= tol))


def mu(t):
    """Forget the fibre velocity: (x, y, v, w) -> (x, y, v)."""
    return PullbackPoint(t.chart, t.x, t.y, t.v)


def canonical_flip(s):
    """Exchange the two velocity blocks: (q, u, Q, U) -> (q, Q, u, U)."""
    return SecondTangentPoint(s.chart, s.x, s.y, s.X, s.Y, s.v, s.w,
                              s.V, s.W)


def vertical_endomorphism(s):
    """Move the (X, Y) block into (V, W) and zero it: S with S*S = 0."""
    n, m = s.chart.n, s.chart.m
    return SecondTangentPoint(s.chart, s.x, s.y, s.v, s.w,
                              np.zeros(n), np.zeros(m), s.X, s.Y)


def vertical_lift(at, vec):
    """Vertical lift of the tangent vector `vec` to the point `at` of TM.

    Both arguments must sit over the same point of the total space.
    """
    if not (np.array_equal(at.x, vec.x) and np.array_equal(at.y, vec.y)):
        raise BasePointMismatch("vertical lift needs a vector at the same point")
    n, m = at.chart.n, at.chart.m
    return SecondTangentPoint(at.chart, at.x, at.y, at.v, at.w,
                              np.zeros(n), np.zeros(m), vec.v, vec.w)


@dataclass
class VectorFieldM:
    """Vector field on the total space: n + m component fields of (x, y)."""
    chart: BundleChart
    components: list

    def __post_init__(self):
        k = self.chart.n + self.chart.m
        if len(self.components) != k:
            raise DimensionMismatch(
                f"need {k} component fields, got {len(self.components)}")
        for c in self.components:
            if c.arity != k:
                raise DimensionMismatch(
                    f"component '{c.label}' has arity {c.arity}, expected {k}")

    def values(self, q):
        return np.array([c.value(q) for c in self.components])

    def jets(self, q):
        return [c.jet(q) for c in self.components]


@dataclass
class VectorFieldN:
    """Vector field on the base: n component fields of x alone."""
    chart: BundleChart
    components: list

    def __post_init__(self):
        n = self.chart.n
        if len(self.components) != n:
            raise DimensionMismatch(
                f"need {n} component fields, got {len(self.components)}")
        for c in self.components:
            if c.arity != n:
                raise DimensionMismatch(
                    f"component '{c.label}' has arity {c.arity}, expected {n}")

    def values(self, x):
        return np.array([c.value(x) for c in self.components])

    def jets(self, x):
        return [c.jet(x) for c in self.components]


def complete_lift(Z, at):
    """Complete lift of the field Z, evaluated at the tangent point `at`.

    Upper block: (X, Y) = Z(q) and (V, W) = DZ(q) . (v, w).
    """
    q = at.point()
    jets = Z.jets(q)
    vals = np.array([j.value for j in jets])
    u = np.concatenate([at.v, at.w])
    du = np.array([j.gradient @ u for j in jets])
    n = at.chart.n
    return SecondTangentPoint(at.chart, at.x, at.y, at.v, at.w,
                              vals[:n], vals[n:], du[:n], du[n:])


def liouville_fields(h, at, which):
    """Members of the dilation family at a tangent point, given a splitting.

    which selects the field: 'total' is (V, W) = (v, w); 'horizontal' is
    (v, h(x,y,v)); 'vertical' is (0, w - h(x,y,v)); 'zero' is (0, h(x,y,0)).
    h is a callable (x, y, v) -> w-array; it may be None for 'total'.
    """
    n, m = at.chart.n, at.chart.m
    zn, zm = np.zeros(n), np.zeros(m)
    if which == "total":
        V, W = at.v, at.w
    elif which == "horizontal":
        V, W = at.v, np.asarray(h(at.x, at.y, at.v), dtype=float)
    elif which == "vertical":
        V = zn
        W = at.w - np.asarray(h(at.x, at.y, at.v), dtype=float)
    elif which == "zero":
        V = zn
        W = np.asarray(h(at.x, at.y, np.zeros(n)), dtype=float)
    else:
        raise ValueError(f"unknown selector {which!r}")
    return SecondTangentPoint(at.chart, at.x, at.y, at.v, at.w, zn, zm, V, W)


class DerivedField(ScalarField):
    """Scalar field with exact value+gradient and a filled-in Hessian.

    vg(x) must return (value, gradient) exactly; the Hessian of the jet is
    reconstructed by central differences of that gradient (then
    symmetrized), since the exact second derivative of a derived quantity
    would need third derivatives of its ingredients.
    """

    def __init__(self, arity, vg, label="", fd_step=1e-5):
        super().__init__(arity, None, label)
        self.vg = vg
        self.fd_step = fd_step

    def value(self, x):
        return self.vg(np.asarray(x, dtype=float))[0]

    def jet(self, x):
        x = np.asarray(x, dtype=float)
        if x.shape != (self.arity,):
            raise DimensionMismatch(
                f"field '{self.label}' expects {self.arity} inputs")
        val, grad = self.vg(x)
        k = self.arity
        hess = np.zeros((k, k))
        h = self.fd_step * (1.0 + np.abs(x).max())
        for i in range(k):
            e = np.zeros(k)
            e[i] = h
            gp = self.vg(x + e)[1]
            gm = self.vg(x - e)[1]
            hess[i] = (gp - gm) / (2.0 * h)
        hess = 0.5 * (hess + hess.T)
        return Jet2(val, np.asarray(grad, dtype=float), hess)


def _bracket_components(comps1, comps2, k):
    def make_vg(i):
        def vg(q):
            j1 = [c.jet(q) for c in comps1]
            j2 = [c.jet(q) for c in comps2]
            a1 = np.array([j.value for j in j1])
            a2 = np.array([j.value for j in j2])
            g1 = np.array([j.gradient for j in j1])
            g2 = np.array([j.gradient for j in j2])
            val = g2[i] @ a1 - g1[i] @ a2
            # d/dq_l: hess terms plus cross gradient terms
            grad = (j2[i].hessian @ a1 + g1.T @ g2[i]
                    - j1[i].hessian @ a2 - g2.T @ g1[i])
            return val, grad
        return vg

    return [DerivedField(k, make_vg(i),
                         label=f"bracket[{i}]")
            for i in range(k)]


def lie_bracket(Z1, Z2):
    """Commutator of two vector fields (both on M, or both on the base).

    Component i is sum_j (dZ2_i/dq_j Z1_j - dZ1_i/dq_j Z2_j).  Values and
    first derivatives of the result are exact (they use at most second
    derivatives of the inputs); see DerivedField for the Hessian.
    """
    if Z1.chart != Z2.chart or type(Z1) is not type(Z2):
        raise DimensionMismatch("bracket arguments live on different spaces")
    if isinstance(Z1, VectorFieldN):
        comps = _bracket_components(Z1.components, Z2.components, Z1.chart.n)
        return VectorFieldN(Z1.chart, comps)
    k = Z1.chart.n + Z1.chart.m
    comps = _bracket_components(Z1.components, Z2.components, k)
    return VectorFieldM(Z1.chart, comps)


def tangent_map(fields, s):
    """Tangent lift of a self-map of TM, applied to a second-tangent point.

    fields: 2(n+m) ScalarFields of (x, y, v, w) giving the map's components
    in block order x, y, v, w.  The image point is F(base) with upper block
    DF(base) . (X, Y, V, W).
    """
    n, m = s.chart.n, s.chart.m
    k = 2 * (n + m)
    if len(fields) != k:
        raise DimensionMismatch(f"need {k} component fields, got {len(fields)}")
    base = s.as_array()[:k]
    upper = s.upper()
    jets = [f.jet(base) for f in fields]
    new_base = np.array([j.value for j in jets])
    new_upper = np.array([j.gradient @ upper for j in jets])
    return SecondTangentPoint(
        s.chart,
        new_base[:n], new_base[n:n + m], new_base[n + m:2 * n + m],
        new_base[2 * n + m:],
        new_upper[:n], new_upper[n:n + m], new_upper[n + m:2 * n + m],
        new_upper[2 * n + m:])
