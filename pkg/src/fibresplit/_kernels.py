"""Tape evaluation kernels: value + gradient + Hessian in one forward sweep.

A compiled expression is a flat instruction tape over float64 registers.
Rows are [op, dst, a, b]; the first k registers hold the input variables,
each instruction writes a fresh register (SSA), and the final register is
the result.  Two interchangeable implementations live here:

  _tape_jet_loops / _tape_val_loops   explicit scalar loops, numba-jitted
  _tape_jet_numpy / _tape_val_numpy   vectorized numpy fallback

Selection: numba is used when importable unless FIBRESPLIT_DISABLE_NUMBA
is set to 1/true/yes.  Both routes implement the same recurrences and are
cross-checked in the test suite; the benchmark script times them head to
head.

Kernels never raise.  They return a status: -1 on success, else the row
index of the failing instruction, so the caller can name the bad operation.
"""

import math
import os

import numpy as np

OP_CONST = 0
OP_ADD = 1
OP_SUB = 2
OP_MUL = 3
OP_DIV = 4
OP_NEG = 5
OP_SIN = 6
OP_COS = 7
OP_TAN = 8
OP_EXP = 9
OP_LOG = 10
OP_SQRT = 11
OP_ABS = 12
OP_POWI = 13

OP_NAMES = {
    OP_CONST: "const", OP_ADD: "+", OP_SUB: "-", OP_MUL: "*", OP_DIV: "/",
    OP_NEG: "neg", OP_SIN: "sin", OP_COS: "cos", OP_TAN: "tan",
    OP_EXP: "exp", OP_LOG: "log", OP_SQRT: "sqrt", OP_ABS: "abs",
    OP_POWI: "powi",
}


def _tape_jet_loops(code, consts, nreg, k, x, slit_eps):
    val = np.zeros(nreg)
    grad = np.zeros((nreg, k))
    hess = np.zeros((nreg, k, k))
    for i in range(k):
        val[i] = x[i]
        grad[i, i] = 1.0
    for row in range(code.shape[0]):
        op = code[row, 0]
        d = code[row, 1]
        a = code[row, 2]
        b = code[row, 3]
        if op == OP_CONST:
            val[d] = consts[a]
        elif op == OP_ADD:
            val[d] = val[a] + val[b]
            for i in range(k):
                grad[d, i] = grad[a, i] + grad[b, i]
                for j in range(k):
                    hess[d, i, j] = hess[a, i, j] + hess[b, i, j]
        elif op == OP_SUB:
            val[d] = val[a] - val[b]
            for i in range(k):
                grad[d, i] = grad[a, i] - grad[b, i]
                for j in range(k):
                    hess[d, i, j] = hess[a, i, j] - hess[b, i, j]
        elif op == OP_MUL:
            va = val[a]
            vb = val[b]
            val[d] = va * vb
            for i in range(k):
                grad[d, i] = grad[a, i] * vb + va * grad[b, i]
                for j in range(k):
                    hess[d, i, j] = (hess[a, i, j] * vb + va * hess[b, i, j]
                                     + grad[a, i] * grad[b, j]
                                     + grad[a, j] * grad[b, i])
        elif op == OP_DIV:
            w = val[b]
            if w == 0.0:
                return row, val, grad, hess
            f = val[a] / w
            val[d] = f
            for i in range(k):
                grad[d, i] = (grad[a, i] - f * grad[b, i]) / w
            for i in range(k):
                for j in range(k):
                    hess[d, i, j] = (hess[a, i, j]
                                     - grad[d, i] * grad[b, j]
                                     - grad[b, i] * grad[d, j]
                                     - f * hess[b, i, j]) / w
        elif op == OP_NEG:
            val[d] = -val[a]
            for i in range(k):
                grad[d, i] = -grad[a, i]
                for j in range(k):
                    hess[d, i, j] = -hess[a, i, j]
        elif op == OP_POWI:
            u = val[a]
            n = b
            if n == 0:
                val[d] = 1.0
                # grad/hess stay zero
            elif u == 0.0 and n < 0:
                return row, val, grad, hess
            else:
                val[d] = u ** n
                if n == 1:
                    fp = 1.0
                    fpp = 0.0
                else:
                    fp = n * u ** (n - 1)
                    fpp = n * (n - 1) * u ** (n - 2)
                for i in range(k):
                    grad[d, i] = fp * grad[a, i]
                    for j in range(k):
                        hess[d, i, j] = (fp * hess[a, i, j]
                                         + fpp * grad[a, i] * grad[a, j])
        else:
            # unary chain ops: f(u) with f', f''
            u = val[a]
            if op == OP_SIN:
                f = math.sin(u)
                fp = math.cos(u)
                fpp = -f
            elif op == OP_COS:
                f = math.cos(u)
                fp = -math.sin(u)
                fpp = -f
            elif op == OP_TAN:
                t = math.tan(u)
                f = t
                fp = 1.0 + t * t
                fpp = 2.0 * t * (1.0 + t * t)
            elif op == OP_EXP:
                f = math.exp(u)
                fp = f
                fpp = f
            elif op == OP_LOG:
                if u <= 0.0:
                    return row, val, grad, hess
                f = math.log(u)
                fp = 1.0 / u
                fpp = -1.0 / (u * u)
            elif op == OP_SQRT:
                if u <= 0.0:
                    return row, val, grad, hess
                s = math.sqrt(u)
                f = s
                fp = 0.5 / s
                fpp = -0.25 / (s * u)
            elif op == OP_ABS:
                # not differentiable at 0; reject the whole slit
                if abs(u) < slit_eps:
                    return row, val, grad, hess
                sg = 1.0 if u > 0.0 else -1.0
                f = sg * u
                fp = sg
                fpp = 0.0
            else:
                return row, val, grad, hess
            val[d] = f
            for i in range(k):
                grad[d, i] = fp * grad[a, i]
                for j in range(k):
                    hess[d, i, j] = (fp * hess[a, i, j]
                                     + fpp * grad[a, i] * grad[a, j])
    return -1, val, grad, hess


def _tape_val_loops(code, consts, nreg, k, x, slit_eps):
    val = np.zeros(nreg)
    for i in range(k):
        val[i] = x[i]
    for row in range(code.shape[0]):
        op = code[row, 0]
        d = code[row, 1]
        a = code[row, 2]
        b = code[row, 3]
        if op == OP_CONST:
            val[d] = consts[a]
        elif op == OP_ADD:
            val[d] = val[a] + val[b]
        elif op == OP_SUB:
            val[d] = val[a] - val[b]
        elif op == OP_MUL:
            val[d] = val[a] * val[b]
        elif op == OP_DIV:
            if val[b] == 0.0:
                return row, val
            val[d] = val[a] / val[b]
        elif op == OP_NEG:
            val[d] = -val[a]
        elif op == OP_POWI:
            if b == 0:
                val[d] = 1.0
            elif val[a] == 0.0 and b < 0:
                return row, val
            else:
                val[d] = val[a] ** b
        elif op == OP_SIN:
            val[d] = math.sin(val[a])
        elif op == OP_COS:
            val[d] = math.cos(val[a])
        elif op == OP_TAN:
            val[d] = math.tan(val[a])
        elif op == OP_EXP:
            val[d] = math.exp(val[a])
        elif op == OP_LOG:
            if val[a] <= 0.0:
                return row, val
            val[d] = math.log(val[a])
        elif op == OP_SQRT:
            if val[a] <= 0.0:
                return row, val
            val[d] = math.sqrt(val[a])
        elif op == OP_ABS:
            if abs(val[a]) < slit_eps:
                return row, val
            val[d] = abs(val[a])
        else:
            return row, val
    return -1, val


def _tape_jet_numpy(code, consts, nreg, k, x, slit_eps):
    """Vectorized twin of _tape_jet_loops; same recurrences via array ops."""
    val = np.zeros(nreg)
    grad = np.zeros((nreg, k))
    hess = np.zeros((nreg, k, k))
    val[:k] = x
    grad[:k, :k] = np.eye(k)
    for row in range(code.shape[0]):
        op, d, a, b = code[row]
        if op == OP_CONST:
            val[d] = consts[a]
        elif op == OP_ADD:
            val[d] = val[a] + val[b]
            grad[d] = grad[a] + grad[b]
            hess[d] = hess[a] + hess[b]
        elif op == OP_SUB:
            val[d] = val[a] - val[b]
            grad[d] = grad[a] - grad[b]
            hess[d] = hess[a] - hess[b]
        elif op == OP_MUL:
            val[d] = val[a] * val[b]
            grad[d] = grad[a] * val[b] + val[a] * grad[b]
            hess[d] = (hess[a] * val[b] + val[a] * hess[b]
                       + np.outer(grad[a], grad[b])
                       + np.outer(grad[b], grad[a]))
        elif op == OP_DIV:
            w = val[b]
            if w == 0.0:
                return row, val, grad, hess
            f = val[a] / w
            val[d] = f
            grad[d] = (grad[a] - f * grad[b]) / w
            hess[d] = (hess[a]
                       - np.outer(grad[d], grad[b])
                       - np.outer(grad[b], grad[d])
                       - f * hess[b]) / w
        elif op == OP_NEG:
            val[d] = -val[a]
            grad[d] = -grad[a]
            hess[d] = -hess[a]
        elif op == OP_POWI:
            u = val[a]
            n = b
            if n == 0:
                val[d] = 1.0
                grad[d] = 0.0
                hess[d] = 0.0
            elif u == 0.0 and n < 0:
                return row, val, grad, hess
            else:
                val[d] = u ** n
                if n == 1:
                    fp, fpp = 1.0, 0.0
                else:
                    fp = n * u ** (n - 1)
                    fpp = n * (n - 1) * u ** (n - 2)
                grad[d] = fp * grad[a]
                hess[d] = fp * hess[a] + fpp * np.outer(grad[a], grad[a])
        else:
            u = val[a]
            if op == OP_SIN:
                f, fp, fpp = math.sin(u), math.cos(u), -math.sin(u)
            elif op == OP_COS:
                f, fp, fpp = math.cos(u), -math.sin(u), -math.cos(u)
            elif op == OP_TAN:
                t = math.tan(u)
                f, fp, fpp = t, 1.0 + t * t, 2.0 * t * (1.0 + t * t)
            elif op == OP_EXP:
                f = math.exp(u)
                fp = fpp = f
            elif op == OP_LOG:
                if u <= 0.0:
                    return row, val, grad, hess
                f, fp, fpp = math.log(u), 1.0 / u, -1.0 / (u * u)
            elif op == OP_SQRT:
                if u <= 0.0:
                    return row, val, grad, hess
                s = math.sqrt(u)
                f, fp, fpp = s, 0.5 / s, -0.25 / (s * u)
            elif op == OP_ABS:
                if abs(u) < slit_eps:
                    return row, val, grad, hess
                sg = 1.0 if u > 0.0 else -1.0
                f, fp, fpp = sg * u, sg, 0.0
            else:
                return row, val, grad, hess
            val[d] = f
            grad[d] = fp * grad[a]
            hess[d] = fp * hess[a] + fpp * np.outer(grad[a], grad[a])
    return -1, val, grad, hess


def _tape_val_numpy(code, consts, nreg, k, x, slit_eps):
    return _tape_val_loops(code, consts, nreg, k, x, slit_eps)


NUMBA_ENABLED = False
_tape_jet_fast = _tape_jet_numpy
_tape_val_fast = _tape_val_numpy

if os.environ.get("FIBRESPLIT_DISABLE_NUMBA", "").lower() not in ("1", "true", "yes"):
    try:
        from numba import njit
        _tape_jet_fast = njit(cache=True)(_tape_jet_loops)
        _tape_val_fast = njit(cache=True)(_tape_val_loops)
        NUMBA_ENABLED = True
    except ImportError:
        pass


def tape_jet(code, consts, nreg, k, x, slit_eps):
    """Evaluate a tape with first and second derivatives at x.

    Returns (status, val, grad, hess) over all registers; status -1 means
    success and the result lives in register nreg-1.
    """
    return _tape_jet_fast(code, consts, nreg, k, np.asarray(x, dtype=float),
                          slit_eps)


def tape_val(code, consts, nreg, k, x, slit_eps):
    """Value-only tape evaluation at x. Returns (status, val)."""
    return _tape_val_fast(code, consts, nreg, k, np.asarray(x, dtype=float),
                          slit_eps)
