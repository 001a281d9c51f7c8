"""Differentiable scalar fields on R^m with analytic gradients and Hessians.

Fields are closed-form expression trees, not samples: the reduced functionals
have to evaluate a(lam*x + xi) at extreme arguments, and only exact node
formulas keep those integrands trustworthy there.  The expression grammar is

    expr   := ['-'] term (('+'|'-') term)*
    term   := factor ('*' factor)*
    factor := number | 'x'INT | 'normsq' | 'bump' '(' expr ',' vector ')'
            | 'rk' '(' number ',' vector ')' | 'beta' INT
            | 'plat' '(' number ',' number ',' vector ')' | '(' expr ')'
    vector := '[' number (',' number)* ']'

`beta I` are the stereographic coordinate pullbacks 2 x_i / (1+|x|^2) for
I <= m and (|x|^2 - 1)/(1+|x|^2) for I = m+1, so any sphere function built
from them automatically has the right decay at infinity.  `plat(r0, r1, z)`
is a C^2 radial cutoff equal to 1 on |x-z| <= r0 and 0 outside |x-z| >= r1
(quintic smoothstep in between); it is the one non-analytic primitive, needed
for perturbation entries that must be exactly affine near a point while
remaining compactly supported.
"""

from __future__ import annotations

import json
import re
from dataclasses import dataclass, field

import numpy as np

__all__ = [
    "ScalarField",
    "Const",
    "Coord",
    "NormSq",
    "Bump",
    "RationalKernel",
    "BetaCoord",
    "Plateau",
    "Add",
    "Scale",
    "Mul",
    "Translate",
    "Dilate",
    "InvertField",
    "parse_field",
    "ParseError",
    "SphereChart",
    "multi_bump",
    "decay_check",
    "morse_census",
    "index_count_check",
    "CriticalPoint",
    "census_to_json",
    "census_to_csv",
]


class FieldError(ValueError):
    pass


class ParseError(FieldError):
    def __init__(self, message, position):
        super().__init__(f"{message} (at position {position})")
        self.position = position


def _batch(x, m):
    x = np.asarray(x, dtype=float)
    single = x.ndim == 1
    if single:
        x = x[None, :]
    if x.shape[1] != m:
        raise FieldError(f"points have dimension {x.shape[1]}, expected {m}")
    return x, single


class ScalarField:
    """Base class; subclasses implement _eval/_grad/_hess on (N, m) batches."""

    m: int

    def eval(self, x):
        X, single = _batch(x, self.m)
        v = self._eval(X)
        return float(v[0]) if single else v

    def grad(self, x):
        X, single = _batch(x, self.m)
        g = self._grad(X)
        return g[0] if single else g

    def hess(self, x):
        X, single = _batch(x, self.m)
        h = self._hess(X)
        return h[0] if single else h

    def laplacian(self, x):
        X, single = _batch(x, self.m)
        v = np.trace(self._hess(X), axis1=1, axis2=2)
        return float(v[0]) if single else v

    def constant_value(self):
        """The field's value if it is a constant expression, else None."""
        return None

    # --- algebra ----------------------------------------------------------
    def __add__(self, other):
        return Add(self, _coerce(other, self.m))

    __radd__ = __add__

    def __sub__(self, other):
        return Add(self, Scale(-1.0, _coerce(other, self.m)))

    def __rsub__(self, other):
        return Add(_coerce(other, self.m), Scale(-1.0, self))

    def __mul__(self, other):
        if isinstance(other, (int, float)):
            return Scale(float(other), self)
        return Mul(self, _coerce(other, self.m))

    __rmul__ = __mul__

    def __neg__(self):
        return Scale(-1.0, self)

    def to_text(self) -> str:
        raise NotImplementedError


def _coerce(v, m):
    if isinstance(v, ScalarField):
        return v
    if isinstance(v, (int, float)):
        return Const(float(v), m)
    raise FieldError(f"cannot use {v!r} as a scalar field")


def _fmt(v: float) -> str:
    return repr(float(v))


class Const(ScalarField):
    def __init__(self, value, m):
        self.value = float(value)
        self.m = m

    def _eval(self, X):
        return np.full(X.shape[0], self.value)

    def _grad(self, X):
        return np.zeros_like(X)

    def _hess(self, X):
        return np.zeros((X.shape[0], self.m, self.m))

    def constant_value(self):
        return self.value

    def to_text(self):
        return _fmt(self.value)


class Coord(ScalarField):
    """x_i with a 1-based axis index."""

    def __init__(self, i, m):
        if not 1 <= i <= m:
            raise FieldError(f"coordinate index {i} out of range for m={m}")
        self.i = i
        self.m = m

    def _eval(self, X):
        return X[:, self.i - 1].copy()

    def _grad(self, X):
        g = np.zeros_like(X)
        g[:, self.i - 1] = 1.0
        return g

    def _hess(self, X):
        return np.zeros((X.shape[0], self.m, self.m))

    def to_text(self):
        return f"x{self.i}"


class NormSq(ScalarField):
    def __init__(self, m):
        self.m = m

    def _eval(self, X):
        return np.sum(X * X, axis=1)

    def _grad(self, X):
        return 2.0 * X

    def _hess(self, X):
        return np.broadcast_to(
            2.0 * np.eye(self.m), (X.shape[0], self.m, self.m)
        ).copy()

    def to_text(self):
        return "normsq"


class Bump(ScalarField):
    """Gaussian bump exp(-beta |x - z|^2)."""

    def __init__(self, beta, z, m=None):
        z = np.atleast_1d(np.asarray(z, dtype=float))
        self.beta = float(beta)
        if self.beta <= 0:
            raise FieldError("bump rate must be positive")
        self.z = z
        self.m = len(z) if m is None else m
        if len(self.z) != self.m:
            raise FieldError("bump center has the wrong dimension")

    def _eval(self, X):
        u = X - self.z
        return np.exp(-self.beta * np.sum(u * u, axis=1))

    def _grad(self, X):
        u = X - self.z
        return -2.0 * self.beta * u * self._eval(X)[:, None]

    def _hess(self, X):
        u = X - self.z
        f = self._eval(X)
        outer = 4.0 * self.beta**2 * u[:, :, None] * u[:, None, :]
        return (outer - 2.0 * self.beta * np.eye(self.m)[None, :, :]) * f[:, None, None]

    def to_text(self):
        zs = ",".join(_fmt(v) for v in self.z)
        return f"bump({_fmt(self.beta)},[{zs}])"


class RationalKernel(ScalarField):
    """(1 + |x - z|^2)^{-s}."""

    def __init__(self, s, z, m=None):
        z = np.atleast_1d(np.asarray(z, dtype=float))
        self.s = float(s)
        self.z = z
        self.m = len(z) if m is None else m

    def _eval(self, X):
        u = X - self.z
        return (1.0 + np.sum(u * u, axis=1)) ** (-self.s)

    def _grad(self, X):
        u = X - self.z
        w = 1.0 + np.sum(u * u, axis=1)
        return -2.0 * self.s * u * (w ** (-self.s - 1.0))[:, None]

    def _hess(self, X):
        u = X - self.z
        w = 1.0 + np.sum(u * u, axis=1)
        outer = u[:, :, None] * u[:, None, :]
        t1 = 4.0 * self.s * (self.s + 1.0) * outer * (w ** (-self.s - 2.0))[:, None, None]
        t2 = -2.0 * self.s * np.eye(self.m)[None, :, :] * (w ** (-self.s - 1.0))[:, None, None]
        return t1 + t2

    def to_text(self):
        zs = ",".join(_fmt(v) for v in self.z)
        return f"rk({_fmt(self.s)},[{zs}])"


class BetaCoord(ScalarField):
    """Stereographic pullback of the ambient coordinate functions of S^m.

    For 1 <= i <= m this is 2 x_i/(1+|x|^2); for i = m+1 it is
    (|x|^2 - 1)/(1+|x|^2).  Both tend to the value at the chart base point as
    |x| -> infinity.
    """

    def __init__(self, i, m):
        if not 1 <= i <= m + 1:
            raise FieldError(f"beta index {i} out of range for m={m}")
        self.i = i
        self.m = m

    def _eval(self, X):
        g = 1.0 / (1.0 + np.sum(X * X, axis=1))
        if self.i <= self.m:
            return 2.0 * X[:, self.i - 1] * g
        return 1.0 - 2.0 * g

    def _grad(self, X):
        g = 1.0 / (1.0 + np.sum(X * X, axis=1))
        if self.i > self.m:
            return 4.0 * X * (g**2)[:, None]
        i = self.i - 1
        out = -4.0 * X[:, i][:, None] * X * (g**2)[:, None]
        out[:, i] += 2.0 * g
        return out

    def _hess(self, X):
        n = X.shape[0]
        g = 1.0 / (1.0 + np.sum(X * X, axis=1))
        eye = np.eye(self.m)
        if self.i > self.m:
            outer = X[:, :, None] * X[:, None, :]
            return 4.0 * eye[None] * (g**2)[:, None, None] - 16.0 * outer * (
                g**3
            )[:, None, None]
        i = self.i - 1
        out = np.zeros((n, self.m, self.m))
        out += 16.0 * X[:, i][:, None, None] * (
            X[:, :, None] * X[:, None, :]
        ) * (g**3)[:, None, None]
        out[:, i, :] += -4.0 * X * (g**2)[:, None]
        out[:, :, i] += -4.0 * X * (g**2)[:, None]
        out += -4.0 * X[:, i][:, None, None] * eye[None] * (g**2)[:, None, None]
        return out

    def to_text(self):
        return f"beta{self.i}"


class Plateau(ScalarField):
    """C^2 radial cutoff: 1 on |x-z| <= r0, 0 on |x-z| >= r1."""

    def __init__(self, r0, r1, z, m=None):
        z = np.atleast_1d(np.asarray(z, dtype=float))
        if not 0 < r0 < r1:
            raise FieldError("plateau radii must satisfy 0 < r0 < r1")
        self.r0, self.r1 = float(r0), float(r1)
        self.z = z
        self.m = len(z) if m is None else m

    def _pieces(self, X):
        u = X - self.z
        s = np.sum(u * u, axis=1)
        s0, s1 = self.r0**2, self.r1**2
        t = np.clip((s - s0) / (s1 - s0), 0.0, 1.0)
        mid = (s > s0) & (s < s1)
        return u, s, t, mid, 1.0 / (s1 - s0)

    def _eval(self, X):
        _, _, t, _, _ = self._pieces(X)
        return 1.0 - t**3 * (10.0 - 15.0 * t + 6.0 * t**2)

    def _grad(self, X):
        u, _, t, mid, ts = self._pieces(X)
        wp = -30.0 * t**2 * (1.0 - t) ** 2
        out = np.zeros_like(X)
        out[mid] = (wp[mid] * ts)[:, None] * (2.0 * u[mid])
        return out

    def _hess(self, X):
        u, _, t, mid, ts = self._pieces(X)
        wp = -30.0 * t**2 * (1.0 - t) ** 2
        wpp = -60.0 * t * (1.0 - t) * (1.0 - 2.0 * t)
        out = np.zeros((X.shape[0], self.m, self.m))
        uo = u[:, :, None] * u[:, None, :]
        mid_h = (wpp * ts**2)[:, None, None] * 4.0 * uo + (wp * ts)[
            :, None, None
        ] * 2.0 * np.eye(self.m)[None]
        out[mid] = mid_h[mid]
        return out

    def to_text(self):
        zs = ",".join(_fmt(v) for v in self.z)
        return f"plat({_fmt(self.r0)},{_fmt(self.r1)},[{zs}])"


class Add(ScalarField):
    def __init__(self, a, b):
        if a.m != b.m:
            raise FieldError("dimension mismatch in sum")
        self.a, self.b = a, b
        self.m = a.m

    def _eval(self, X):
        return self.a._eval(X) + self.b._eval(X)

    def _grad(self, X):
        return self.a._grad(X) + self.b._grad(X)

    def _hess(self, X):
        return self.a._hess(X) + self.b._hess(X)

    def constant_value(self):
        ca, cb = self.a.constant_value(), self.b.constant_value()
        return None if ca is None or cb is None else ca + cb

    def to_text(self):
        return f"{self.a.to_text()} + {self.b.to_text()}"


class Scale(ScalarField):
    def __init__(self, c, f):
        self.c = float(c)
        self.f = f
        self.m = f.m

    def _eval(self, X):
        return self.c * self.f._eval(X)

    def _grad(self, X):
        return self.c * self.f._grad(X)

    def _hess(self, X):
        return self.c * self.f._hess(X)

    def constant_value(self):
        cf = self.f.constant_value()
        return None if cf is None else self.c * cf

    def to_text(self):
        return f"{_fmt(self.c)}*({self.f.to_text()})"


class Mul(ScalarField):
    def __init__(self, a, b):
        if a.m != b.m:
            raise FieldError("dimension mismatch in product")
        self.a, self.b = a, b
        self.m = a.m

    def _eval(self, X):
        return self.a._eval(X) * self.b._eval(X)

    def _grad(self, X):
        return (
            self.a._grad(X) * self.b._eval(X)[:, None]
            + self.b._grad(X) * self.a._eval(X)[:, None]
        )

    def _hess(self, X):
        fa, fb = self.a._eval(X), self.b._eval(X)
        ga, gb = self.a._grad(X), self.b._grad(X)
        cross = ga[:, :, None] * gb[:, None, :]
        return (
            self.a._hess(X) * fb[:, None, None]
            + self.b._hess(X) * fa[:, None, None]
            + cross
            + np.swapaxes(cross, 1, 2)
        )

    def constant_value(self):
        ca, cb = self.a.constant_value(), self.b.constant_value()
        return None if ca is None or cb is None else ca * cb

    def to_text(self):
        return f"({self.a.to_text()})*({self.b.to_text()})"


class Translate(ScalarField):
    """f(x - z)."""

    def __init__(self, f, z):
        self.f = f
        self.z = np.asarray(z, dtype=float)
        self.m = f.m
        if self.z.shape != (self.m,):
            raise FieldError("translation vector has the wrong dimension")

    def _eval(self, X):
        return self.f._eval(X - self.z)

    def _grad(self, X):
        return self.f._grad(X - self.z)

    def _hess(self, X):
        return self.f._hess(X - self.z)

    def to_text(self):
        return f"translate({self.f.to_text()};[{','.join(_fmt(v) for v in self.z)}])"


class Dilate(ScalarField):
    """f(s x)."""

    def __init__(self, f, s):
        self.f = f
        self.s = float(s)
        self.m = f.m

    def _eval(self, X):
        return self.f._eval(self.s * X)

    def _grad(self, X):
        return self.s * self.f._grad(self.s * X)

    def _hess(self, X):
        return self.s**2 * self.f._hess(self.s * X)

    def to_text(self):
        return f"dilate({self.f.to_text()};{_fmt(self.s)})"


class InvertField(ScalarField):
    """f(-x/|x|^2), the Kelvin-type pullback used for inversion symmetry checks."""

    def __init__(self, f):
        self.f = f
        self.m = f.m

    @staticmethod
    def _map(X):
        s = np.maximum(np.sum(X * X, axis=1), 1e-300)
        return -X / s[:, None], s

    def _eval(self, X):
        Y, _ = self._map(X)
        return self.f._eval(Y)

    def _jac(self, X, s):
        # J_{k,i} = d r_k / d x_i = (-delta_{ki} + 2 x_k x_i/s)/s
        n, m = X.shape
        J = 2.0 * X[:, :, None] * X[:, None, :] / (s**2)[:, None, None]
        J -= np.eye(m)[None] / s[:, None, None]
        return J

    def _grad(self, X):
        Y, s = self._map(X)
        gf = self.f._grad(Y)
        J = self._jac(X, s)
        return np.einsum("nk,nki->ni", gf, J)

    def _hess(self, X):
        Y, s = self._map(X)
        gf = self.f._grad(Y)
        hf = self.f._hess(Y)
        J = self._jac(X, s)
        out = np.einsum("nki,nkl,nlj->nij", J, hf, J)
        # second derivatives of r_k
        n, m = X.shape
        eye = np.eye(m)
        xk = X[:, :, None, None]
        d2r = (
            2.0
            * (
                eye[None, :, :, None] * X[:, None, None, :]
                + eye[None, :, None, :] * X[:, None, :, None]
                + eye[None, None, :, :] * xk[:, :, 0, 0][:, :, None, None]
            )
            / (s**2)[:, None, None, None]
        )
        d2r -= 8.0 * (
            X[:, :, None, None] * X[:, None, :, None] * X[:, None, None, :]
        ) / (s**3)[:, None, None, None]
        out += np.einsum("nk,nkij->nij", gf, d2r)
        return out

    def to_text(self):
        return f"invert({self.f.to_text()})"


def multi_bump(components, centers):
    """Sum of translated component fields, the l-bump construction."""
    total = None
    for f, z in zip(components, centers):
        piece = Translate(f, np.asarray(z, dtype=float))
        total = piece if total is None else total + piece
    return total


# ----------------------------------------------------------------------------
# parser

_TOKEN_RE = re.compile(
    r"\s*(?:(?P<num>[0-9]+(?:\.[0-9]*)?(?:[eE][+-]?[0-9]+)?)"
    r"|(?P<name>[A-Za-z_][A-Za-z_0-9]*)"
    r"|(?P<op>[-+*(),\[\]]))"
)


def _tokenize(text):
    pos, out = 0, []
    while pos < len(text):
        mobj = _TOKEN_RE.match(text, pos)
        if mobj is None or mobj.end() == pos:
            if text[pos:].strip():
                raise ParseError(f"unexpected character {text[pos]!r}", pos)
            break
        kind = mobj.lastgroup
        out.append((kind, mobj.group(kind), mobj.start(kind)))
        pos = mobj.end()
    out.append(("end", "", len(text)))
    return out


class _Parser:
    def __init__(self, tokens, m):
        self.toks = tokens
        self.m = m
        self.k = 0

    def peek(self):
        return self.toks[self.k]

    def next(self):
        t = self.toks[self.k]
        self.k += 1
        return t

    def expect(self, value):
        kind, val, pos = self.next()
        if val != value:
            raise ParseError(f"expected {value!r}, found {val!r}", pos)

    def number(self):
        sign = 1.0
        if self.peek()[1] == "-":
            self.next()
            sign = -1.0
        kind, val, pos = self.next()
        if kind != "num":
            raise ParseError(f"expected a number, found {val!r}", pos)
        return sign * float(val)

    def vector(self):
        self.expect("[")
        vals = [self.number()]
        while self.peek()[1] == ",":
            self.next()
            vals.append(self.number())
        self.expect("]")
        if len(vals) != self.m:
            _, _, pos = self.peek()
            raise ParseError(f"vector has {len(vals)} entries, expected {self.m}", pos)
        return np.array(vals)

    def expr(self):
        neg = False
        if self.peek()[1] == "-":
            self.next()
            neg = True
        node = self.term()
        if neg:
            node = Scale(-1.0, node)
        while self.peek()[1] in ("+", "-"):
            op = self.next()[1]
            rhs = self.term()
            node = Add(node, rhs if op == "+" else Scale(-1.0, rhs))
        return node

    def term(self):
        node = self.factor()
        while self.peek()[1] == "*":
            self.next()
            node = Mul(node, self.factor())
        return node

    def factor(self):
        kind, val, pos = self.next()
        if val == "-":
            return Scale(-1.0, self.factor())
        if kind == "num":
            return Const(float(val), self.m)
        if val == "(":
            node = self.expr()
            self.expect(")")
            return node
        if kind == "name":
            if val == "normsq":
                return NormSq(self.m)
            mm = re.fullmatch(r"x([0-9]+)", val)
            if mm:
                return Coord(int(mm.group(1)), self.m)
            mm = re.fullmatch(r"beta([0-9]+)", val)
            if mm:
                return BetaCoord(int(mm.group(1)), self.m)
            if val == "bump":
                self.expect("(")
                rate = self.expr()
                cv = rate.constant_value()
                if cv is None:
                    raise ParseError("bump rate must be a constant expression", pos)
                self.expect(",")
                z = self.vector()
                self.expect(")")
                return Bump(cv, z, self.m)
            if val == "rk":
                self.expect("(")
                s = self.number()
                self.expect(",")
                z = self.vector()
                self.expect(")")
                return RationalKernel(s, z, self.m)
            if val == "plat":
                self.expect("(")
                r0 = self.number()
                self.expect(",")
                r1 = self.number()
                self.expect(",")
                z = self.vector()
                self.expect(")")
                return Plateau(r0, r1, z, self.m)
            raise ParseError(f"unknown identifier {val!r}", pos)
        raise ParseError(f"unexpected token {val!r}", pos)


def parse_field(text: str, m: int) -> ScalarField:
    """Parse an expression string into a ScalarField over R^m."""
    parser = _Parser(_tokenize(text), m)
    node = parser.expr()
    kind, val, pos = parser.peek()
    if kind != "end":
        raise ParseError(f"trailing input {val!r}", pos)
    return node


# ----------------------------------------------------------------------------
# stereographic chart


class SphereChart:
    """Stereographic projection of S^m (minus a base point) onto R^m.

    The base point is the point *from* which we project; it corresponds to
    |x| -> infinity in the chart.  The conformal factor of the inverse map is
    f(x) = 2/(1+|x|^2).
    """

    def __init__(self, m: int, base_point=None):
        self.m = m
        north = np.zeros(m + 1)
        north[-1] = 1.0
        if base_point is None:
            base_point = north
        p = np.asarray(base_point, dtype=float)
        p = p / np.linalg.norm(p)
        self.base_point = p
        # orthogonal map sending base_point to the north pole
        if np.allclose(p, north):
            self.rot = np.eye(m + 1)
        else:
            v = (north - p)[:, None]
            self.rot = np.eye(m + 1) - 2.0 * (v @ v.T) / float(v.T @ v)

    def forward(self, y):
        """Map points of S^m (minus the base point) to R^m."""
        Y = np.atleast_2d(np.asarray(y, dtype=float)) @ self.rot.T
        denom = 1.0 - Y[:, -1]
        x = Y[:, :-1] / denom[:, None]
        return x[0] if np.asarray(y).ndim == 1 else x

    def inverse(self, x):
        """Map chart points back to S^m."""
        X = np.atleast_2d(np.asarray(x, dtype=float))
        s = np.sum(X * X, axis=1)
        y = np.concatenate([2.0 * X, (s - 1.0)[:, None]], axis=1) / (1.0 + s)[:, None]
        y = y @ self.rot
        return y[0] if np.asarray(x).ndim == 1 else y

    @staticmethod
    def conformal_factor(x):
        X = np.atleast_2d(np.asarray(x, dtype=float))
        f = 2.0 / (1.0 + np.sum(X * X, axis=1))
        return float(f[0]) if np.asarray(x).ndim == 1 else f


# ----------------------------------------------------------------------------
# validators and census


def decay_check(a: ScalarField, c0: float, cloud) -> dict:
    """Check |da| <= c0 (1+|x|^2)^{-1} and |dda| <= c0 (1+|x|^2)^{-3/2} on a cloud."""
    X, _ = _batch(cloud, a.m)
    s = 1.0 + np.sum(X * X, axis=1)
    g = np.max(np.abs(a.grad(X)), axis=1) * s
    h = np.max(np.abs(a.hess(X)), axis=(1, 2)) * s**1.5
    ig, ih = int(np.argmax(g)), int(np.argmax(h))
    worst_grad, worst_hess = float(g[ig] / c0), float(h[ih] / c0)
    return {
        "passed": bool(worst_grad <= 1.0 and worst_hess <= 1.0),
        "c0": c0,
        "worst_grad_ratio": worst_grad,
        "worst_grad_location": X[ig].tolist(),
        "worst_hess_ratio": worst_hess,
        "worst_hess_location": X[ih].tolist(),
    }


@dataclass
class CriticalPoint:
    location: np.ndarray
    value: float
    grad_norm: float
    eigenvalues: np.ndarray
    morse_index: int
    laplacian: float
    index_sign: int  # sign of det(Hessian) = (-1)^{morse_index}
    at_infinity: bool = False


def _sobol_seeds(box, n, seed=0):
    from scipy.stats import qmc

    lo = np.asarray([b[0] for b in box], dtype=float)
    hi = np.asarray([b[1] for b in box], dtype=float)
    u = qmc.Sobol(d=len(box), scramble=True, seed=seed).random(n)
    return lo + u * (hi - lo)


def morse_census(
    a: ScalarField,
    box,
    seeds=64,
    grad_tol=1e-10,
    eig_floor=1e-8,
    merge_radius=1e-6,
    max_iter=80,
    include_infinity=False,
    seed=0,
):
    """Multistart damped Newton on grad(a) over a bounded box.

    Accepted points have gradient norm <= grad_tol, all Hessian eigenvalues
    of magnitude >= eig_floor and a nonzero Laplacian; duplicates within
    merge_radius are merged.  Returns (census, report) where report carries
    per-seed convergence diagnostics and the degenerate flag.
    """
    box = [tuple(map(float, b)) for b in box]
    if len(box) != a.m:
        raise FieldError(f"box has {len(box)} intervals, expected {a.m}")
    pts = _sobol_seeds(box, seeds, seed) if isinstance(seeds, int) else np.atleast_2d(seeds)
    lo = np.array([b[0] for b in box])
    hi = np.array([b[1] for b in box])
    scale = max(float(np.max(np.abs(a.eval(pts)))), 1.0)

    margin = 1e-3 * np.max(hi - lo)
    found, failures, degenerate_hits = [], 0, 0
    for x0 in pts:
        x = x0.copy()
        mu = 1e-6
        ok = False
        for _ in range(max_iter):
            g = a.grad(x)
            gn = np.linalg.norm(g)
            if gn <= grad_tol * scale:
                ok = True
                break
            H = a.hess(x)
            try:
                step = np.linalg.solve(H + mu * np.eye(a.m), -g)
            except np.linalg.LinAlgError:
                mu *= 10.0
                continue
            limit = 0.2 * float(np.max(hi - lo))
            sn = np.linalg.norm(step)
            if sn > limit:
                step *= limit / sn
            # keep iterates inside the box: tail-marchers stall on a face
            # and get reported as failures instead of spurious flat points
            x_new = np.clip(x + step, lo, hi)
            if np.linalg.norm(a.grad(x_new)) < gn:
                x = x_new
                mu = max(mu * 0.3, 1e-12)
            else:
                mu *= 10.0
                if mu > 1e8:
                    break
        on_face = np.any(x <= lo + margin) or np.any(x >= hi - margin)
        if not ok or on_face:
            failures += 1
            continue
        H = a.hess(x)
        eig = np.linalg.eigvalsh(H)
        lap = float(np.trace(H))
        if np.min(np.abs(eig)) < eig_floor * scale or abs(lap) < eig_floor * scale:
            degenerate_hits += 1
            continue
        idx = int(np.sum(eig < 0.0))
        found.append(
            CriticalPoint(
                location=x,
                value=float(a.eval(x)),
                grad_norm=float(np.linalg.norm(a.grad(x))),
                eigenvalues=eig,
                morse_index=idx,
                laplacian=lap,
                index_sign=1 if idx % 2 == 0 else -1,
            )
        )

    merged = []
    for cp in sorted(found, key=lambda c: tuple(c.location)):
        if all(np.linalg.norm(cp.location - q.location) > merge_radius for q in merged):
            merged.append(cp)

    if include_infinity:
        rng = np.random.default_rng(seed)
        dirs = rng.standard_normal((10, a.m))
        dirs /= np.linalg.norm(dirs, axis=1)[:, None]
        limit_val = float(np.mean(a.eval(1e6 * dirs)))
        merged.append(
            CriticalPoint(
                location=np.full(a.m, np.inf),
                value=limit_val,
                grad_norm=0.0,
                eigenvalues=np.zeros(a.m),
                morse_index=-1,
                laplacian=0.0,
                index_sign=0,
                at_infinity=True,
            )
        )

    report = {
        "seeds": int(len(pts)),
        "failures": failures,
        "degenerate_hits": degenerate_hits,
        "degenerate": bool(a.constant_value() is not None)
        or bool(len(merged) == 0 and degenerate_hits == len(pts)),
    }
    return merged, report


def index_count_check(census, m: int):
    """Index-count condition: sum over negative-Laplacian points of (-1)^index.

    Returns (passed, total) where passed means the sum differs from (-1)^m.
    """
    total = sum(
        (-1) ** cp.morse_index
        for cp in census
        if not cp.at_infinity and cp.laplacian < 0.0
    )
    return total != (-1) ** m, total


def census_to_json(census, report=None) -> str:
    docs = [
        {
            "location": [None if not np.isfinite(v) else float(v) for v in cp.location],
            "value": cp.value,
            "grad_norm": cp.grad_norm,
            "eigenvalues": [float(e) for e in cp.eigenvalues],
            "morse_index": cp.morse_index,
            "laplacian": cp.laplacian,
            "index_sign": cp.index_sign,
            "at_infinity": cp.at_infinity,
        }
        for cp in census
    ]
    return json.dumps(
        {"census": docs, "report": report or {}}, sort_keys=True, indent=2
    )


def census_to_csv(census) -> str:
    m = len(census[0].location) if census else 0
    header = [f"x{i+1}" for i in range(m)] + [
        "value",
        "grad_norm",
        "morse_index",
        "laplacian",
        "index_sign",
    ]
    lines = [",".join(header)]
    for cp in census:
        row = [f"{v!r}" for v in cp.location] + [
            f"{cp.value!r}",
            f"{cp.grad_norm!r}",
            str(cp.morse_index),
            f"{cp.laplacian!r}",
            str(cp.index_sign),
        ]
        lines.append(",".join(row))
    return "\n".join(lines) + "\n"
