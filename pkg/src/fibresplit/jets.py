"""Second-order forward-mode derivatives.

Jet2 carries (value, gradient, hessian) of a scalar function of k inputs
and overloads arithmetic so ordinary numeric code propagates both
derivative orders.  numpy ufuncs dispatch to the like-named methods, so
np.sin(jet) works.

ScalarField wraps an evaluator (list of Jet2 -> Jet2) with an arity and a
label.  TapeField is the compiled-expression variant that evaluates through
the instruction-tape kernels; its plain-algebra evaluator is kept as an
independent second route and the two are cross-checked in tests.
"""

from dataclasses import dataclass

import numpy as np

from . import _kernels
from .errors import ArityError, DimensionMismatch, DomainError

SLIT_EPS_DEFAULT = 1e-6


class Jet2:
    """Value, gradient and Hessian of a scalar at a point.

    hessian must be symmetric (tolerance 1e-12 relative) and all entries
    finite; violations raise at construction so downstream code can trust
    every Jet2 it holds.
    """

    __slots__ = ("value", "gradient", "hessian")
    __array_priority__ = 100  # keep numpy from consuming us in mixed ops

    def __init__(self, value, gradient, hessian):
        value = float(value)
        gradient = np.asarray(gradient, dtype=float)
        hessian = np.asarray(hessian, dtype=float)
        k = gradient.shape[0]
        if gradient.shape != (k,) or hessian.shape != (k, k):
            raise DimensionMismatch(
                f"jet shapes {gradient.shape}, {hessian.shape} for arity {k}")
        if not (np.isfinite(value) and np.isfinite(gradient).all()
                and np.isfinite(hessian).all()):
            raise DomainError("jet has non-finite entries")
        scale = 1.0 + np.abs(hessian).max()
        if np.abs(hessian - hessian.T).max() > 1e-12 * scale:
            raise ValueError("jet hessian is not symmetric")
        self.value = value
        self.gradient = gradient
        self.hessian = hessian

    @property
    def arity(self):
        return self.gradient.shape[0]

    @classmethod
    def constant(cls, c, k):
        return cls(c, np.zeros(k), np.zeros((k, k)))

    @classmethod
    def variable(cls, x, i, k):
        g = np.zeros(k)
        g[i] = 1.0
        return cls(x, g, np.zeros((k, k)))

    def _coerce(self, other):
        if isinstance(other, Jet2):
            if other.arity != self.arity:
                raise DimensionMismatch(
                    f"jet arities differ: {self.arity} vs {other.arity}")
            return other
        return Jet2.constant(float(other), self.arity)

    def __add__(self, other):
        o = self._coerce(other)
        return Jet2(self.value + o.value, self.gradient + o.gradient,
                    self.hessian + o.hessian)

    __radd__ = __add__

    def __sub__(self, other):
        o = self._coerce(other)
        return Jet2(self.value - o.value, self.gradient - o.gradient,
                    self.hessian - o.hessian)

    def __rsub__(self, other):
        return self._coerce(other).__sub__(self)

    def __mul__(self, other):
        o = self._coerce(other)
        return Jet2(self.value * o.value,
                    self.gradient * o.value + self.value * o.gradient,
                    self.hessian * o.value + self.value * o.hessian
                    + np.outer(self.gradient, o.gradient)
                    + np.outer(o.gradient, self.gradient))

    __rmul__ = __mul__

    def __truediv__(self, other):
        o = self._coerce(other)
        if o.value == 0.0:
            raise DomainError("division by zero")
        f = self.value / o.value
        g = (self.gradient - f * o.gradient) / o.value
        h = (self.hessian - np.outer(g, o.gradient)
             - np.outer(o.gradient, g) - f * o.hessian) / o.value
        return Jet2(f, g, h)

    def __rtruediv__(self, other):
        return self._coerce(other).__truediv__(self)

    def __neg__(self):
        return Jet2(-self.value, -self.gradient, -self.hessian)

    def __pow__(self, n):
        if not isinstance(n, (int, np.integer)):
            raise TypeError("jet ** exponent must be an integer; "
                            "use exp/log for general powers")
        n = int(n)
        if n == 0:
            return Jet2.constant(1.0, self.arity)
        u = self.value
        if u == 0.0 and n < 0:
            raise DomainError("zero base with negative exponent")
        if n == 1:
            fp, fpp = 1.0, 0.0
        else:
            fp = n * u ** (n - 1)
            fpp = n * (n - 1) * u ** (n - 2)
        return self._chain1(u ** n, fp, fpp)

    def _chain1(self, f, fp, fpp):
        return Jet2(f, fp * self.gradient,
                    fp * self.hessian
                    + fpp * np.outer(self.gradient, self.gradient))

    def sin(self):
        s, c = np.sin(self.value), np.cos(self.value)
        return self._chain1(s, c, -s)

    def cos(self):
        s, c = np.sin(self.value), np.cos(self.value)
        return self._chain1(c, -s, -c)

    def tan(self):
        t = np.tan(self.value)
        return self._chain1(t, 1.0 + t * t, 2.0 * t * (1.0 + t * t))

    def exp(self):
        e = np.exp(self.value)
        return self._chain1(e, e, e)

    def log(self):
        if self.value <= 0.0:
            raise DomainError("log of nonpositive value")
        u = self.value
        return self._chain1(np.log(u), 1.0 / u, -1.0 / (u * u))

    def sqrt(self):
        if self.value <= 0.0:
            raise DomainError("sqrt of nonpositive value")
        s = np.sqrt(self.value)
        return self._chain1(s, 0.5 / s, -0.25 / (s * self.value))

    def abs(self, slit_eps=SLIT_EPS_DEFAULT):
        # |u| is smooth only away from 0; the slit keeps us off the crease
        if abs(self.value) < slit_eps:
            raise DomainError(
                f"abs argument {self.value!r} inside slit radius {slit_eps}")
        sg = 1.0 if self.value > 0.0 else -1.0
        return self._chain1(sg * self.value, sg, 0.0)

    __abs__ = abs

    def __repr__(self):
        return f"Jet2({self.value!r}, grad={self.gradient!r})"


def seed_jets(x):
    """Independent-variable jets at x: identity gradient, zero hessian."""
    x = np.asarray(x, dtype=float)
    k = x.shape[0]
    return [Jet2.variable(x[i], i, k) for i in range(k)]


def jet2_compose(outer, inners):
    """Chain rule: jet of F(g_1..g_K) from F's jet at (g_i values).

    outer is a Jet2 in K intermediate variables, inners are K jets in the
    true variables.  This is the one composition routine everything else
    (lifts, pullbacks, restricted Lagrangians) goes through.
    """
    K = outer.arity
    if len(inners) != K:
        raise ArityError(f"outer expects {K} inner jets, got {len(inners)}")
    k = inners[0].arity
    G = np.empty((K, k))
    for a, jet in enumerate(inners):
        if jet.arity != k:
            raise DimensionMismatch("inner jets have mixed arities")
        G[a] = jet.gradient
    grad = outer.gradient @ G
    hess = G.T @ outer.hessian @ G
    for a, jet in enumerate(inners):
        hess = hess + outer.gradient[a] * jet.hessian
    return Jet2(outer.value, grad, hess)


class ScalarField:
    """A twice differentiable scalar function of `arity` real inputs.

    evaluator maps a list of Jet2 seeds to the output Jet2; label is for
    reports and error messages.
    """

    def __init__(self, arity, evaluator, label=""):
        self.arity = arity
        self.evaluator = evaluator
        self.label = label

    def jet(self, x):
        x = np.asarray(x, dtype=float)
        if x.shape != (self.arity,):
            raise DimensionMismatch(
                f"field '{self.label}' expects {self.arity} inputs, "
                f"got shape {x.shape}")
        return self.evaluator(seed_jets(x))

    def value(self, x):
        return self.jet(x).value

    def __call__(self, x):
        return self.value(x)

    def chain(self, inners):
        """Jet of self composed with the given inner jets."""
        if len(inners) != self.arity:
            raise ArityError(
                f"field '{self.label}' expects {self.arity} arguments, "
                f"got {len(inners)}")
        at = np.array([j.value for j in inners])
        return jet2_compose(self.jet(at), inners)

    def __repr__(self):
        return f"{type(self).__name__}({self.label!r}, arity={self.arity})"


class TapeField(ScalarField):
    """ScalarField backed by a compiled instruction tape.

    jet() and value() run through the (numba or numpy) kernels; the
    inherited evaluator route recomputes with plain Jet2 algebra, which the
    tests use as the independent cross-check.
    """

    def __init__(self, arity, code, consts, nreg, out_reg, label="",
                 slit_eps=SLIT_EPS_DEFAULT, algebra_evaluator=None):
        super().__init__(arity, algebra_evaluator, label)
        self.code = code
        self.consts = consts
        self.nreg = nreg
        self.out_reg = out_reg
        self.slit_eps = slit_eps

    def _raise_for(self, row):
        op = int(self.code[row, 0])
        name = _kernels.OP_NAMES.get(op, str(op))
        if op == _kernels.OP_DIV:
            msg = "division by zero"
        elif op == _kernels.OP_LOG:
            msg = "log of nonpositive value"
        elif op == _kernels.OP_SQRT:
            msg = "sqrt of nonpositive value"
        elif op == _kernels.OP_ABS:
            msg = f"abs argument inside slit radius {self.slit_eps}"
        elif op == _kernels.OP_POWI:
            msg = "zero base with negative exponent"
        else:
            msg = f"operation '{name}' failed"
        raise DomainError(f"field '{self.label}': {msg}")

    def jet(self, x):
        x = np.asarray(x, dtype=float)
        if x.shape != (self.arity,):
            raise DimensionMismatch(
                f"field '{self.label}' expects {self.arity} inputs, "
                f"got shape {x.shape}")
        status, val, grad, hess = _kernels.tape_jet(
            self.code, self.consts, self.nreg, self.arity, x, self.slit_eps)
        if status >= 0:
            self._raise_for(status)
        r = self.out_reg
        return Jet2(val[r], grad[r], hess[r])

    def value(self, x):
        x = np.asarray(x, dtype=float)
        if x.shape != (self.arity,):
            raise DimensionMismatch(
                f"field '{self.label}' expects {self.arity} inputs, "
                f"got shape {x.shape}")
        status, val = _kernels.tape_val(
            self.code, self.consts, self.nreg, self.arity, x, self.slit_eps)
        if status >= 0:
            self._raise_for(status)
        out = val[self.out_reg]
        if not np.isfinite(out):
            raise DomainError(f"field '{self.label}': non-finite value")
        return out


def eval_jet2(field, x):
    """Jet of a ScalarField at the point x."""
    return field.jet(x)


def directional_derivative(field, x, v):
    """First derivative of field at x along v."""
    v = np.asarray(v, dtype=float)
    jet = field.jet(x)
    if v.shape != jet.gradient.shape:
        raise DimensionMismatch("direction has wrong length")
    return float(jet.gradient @ v)


@dataclass
class DerivativeReport:
    """Outcome of an AD-versus-central-difference comparison."""
    label: str
    grad_error: float   # max abs deviation / (1 + max |grad|)
    hess_error: float   # same scaling for the hessian
    step: float

    @property
    def ok(self):
        return self.grad_error <= 1e-6 and self.hess_error <= 1e-4


def fd_check(field, x, step=1e-5):
    """Compare AD gradient/hessian against central differences of values.

    Uses only field.value so the comparison is independent of the jet
    machinery.  Errors are scaled relative: max|ad - fd| / (1 + max|ad|).
    """
    x = np.asarray(x, dtype=float)
    jet = field.jet(x)
    k = x.shape[0]
    fd_grad = np.zeros(k)
    for i in range(k):
        e = np.zeros(k)
        e[i] = step
        fd_grad[i] = (field.value(x + e) - field.value(x - e)) / (2 * step)
    fd_hess = np.zeros((k, k))
    for i in range(k):
        for j in range(k):
            ei = np.zeros(k)
            ej = np.zeros(k)
            ei[i] = step
            ej[j] = step
            fd_hess[i, j] = (field.value(x + ei + ej) - field.value(x + ei - ej)
                             - field.value(x - ei + ej)
                             + field.value(x - ei - ej)) / (4 * step * step)
    gerr = np.abs(jet.gradient - fd_grad).max() / (1.0 + np.abs(jet.gradient).max())
    herr = np.abs(jet.hessian - fd_hess).max() / (1.0 + np.abs(jet.hessian).max())
    return DerivativeReport(field.label, float(gerr), float(herr), step)
