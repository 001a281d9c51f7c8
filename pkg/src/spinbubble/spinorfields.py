"""Spinor-valued fields built over the unit bubble, with closed-form calculus.

The Galerkin machinery works in the frame of psi = psi_{1,0,gamma}.  Every
field here is a polynomial multiple of one of the base fields

    psi,   grad_j psi (j = 1..m),   G_k psi (k = 1..m),

or a linear combination of such.  Values, per-axis covariant derivatives and
Dirac images are all exact closed forms:

    D psi        = (m/s) psi,                       s = 1 + |x|^2,
    D grad_j psi = -(2 m x_j / s^2) psi + (m/s) grad_j psi,
    D (G_k psi)  = -G_k D psi - 2 grad_k psi,
    D (f u)      = (grad f) . u + f D u.

Evaluations accept a NodeCache so that repeated work over one node batch
(e.g. Gram-matrix assembly over a whole dictionary) shares psi and its
derivatives.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .bubbles import Bubble
from .clifford import CliffordRep

__all__ = [
    "BubbleFrame",
    "NodeCache",
    "SpinField",
    "PolyField",
    "ComboField",
    "default_dictionary",
]


class BubbleFrame:
    """The unit bubble psi_{1,0,gamma} and its Clifford context."""

    def __init__(self, rep: CliffordRep, gamma: np.ndarray):
        self.rep = rep
        self.gamma = np.asarray(gamma, dtype=complex)
        self.m = rep.m
        self.n = rep.n_spinor
        self.ggam = np.stack([g @ self.gamma for g in rep.generators])  # (m,n)

    def bubble(self) -> Bubble:
        return Bubble(lam=1.0, xi=np.zeros(self.m), gamma=self.gamma, rep=self.rep)

    def gmul(self, k: int, F: np.ndarray) -> np.ndarray:
        """Clifford multiplication G_k F for field values of shape (N,n)."""
        return F @ self.rep.generators[k].T

    def cache(self, X) -> "NodeCache":
        return NodeCache(self, np.asarray(X, dtype=float))


class NodeCache:
    """Lazily computed bubble data shared across fields on one node batch."""

    def __init__(self, frame: BubbleFrame, X: np.ndarray):
        self.frame = frame
        self.X = X
        self.s = 1.0 + np.sum(X * X, axis=1)
        self._core = None
        self._psi = None
        self._grads = None
        self._dpsi = None

    @property
    def core(self):
        if self._core is None:
            f = self.frame
            self._core = f.gamma[None, :] - self.X @ f.ggam
        return self._core

    @property
    def prefactor(self):
        f = self.frame
        return f.m ** (0.5 * (f.m - 1)) * self.s ** (-0.5 * f.m)

    @property
    def psi(self):
        if self._psi is None:
            self._psi = self.prefactor[:, None] * self.core
        return self._psi

    @property
    def grads(self):
        if self._grads is None:
            f = self.frame
            c = self.prefactor
            out = np.empty((f.m, self.X.shape[0], f.n), dtype=complex)
            for i in range(f.m):
                out[i] = c[:, None] * (
                    (-f.m * self.X[:, i] / self.s)[:, None] * self.core
                    - f.ggam[i][None, :]
                )
            self._grads = out
        return self._grads

    @property
    def dirac_psi(self):
        if self._dpsi is None:
            self._dpsi = (self.frame.m / self.s)[:, None] * self.psi
        return self._dpsi

    def hess_entry(self, i: int, j: int) -> np.ndarray:
        """grad_i grad_j psi, shape (N,n)."""
        f, X, s = self.frame, self.X, self.s
        c = self.prefactor
        cp = -0.5 * f.m * c / s
        cpp = 0.5 * f.m * (0.5 * f.m + 1.0) * c / s**2
        out = (cpp * 4.0 * X[:, i] * X[:, j] + (2.0 * cp if i == j else 0.0))[
            :, None
        ] * self.core
        out -= (2.0 * X[:, j] * cp)[:, None] * f.ggam[i][None, :]
        out -= (2.0 * X[:, i] * cp)[:, None] * f.ggam[j][None, :]
        return out

    @property
    def norm_sq(self):
        """|psi|^2 = m^{m-1}/s^{m-1}."""
        f = self.frame
        return f.m ** (f.m - 1) / self.s ** (f.m - 1)


class SpinField:
    """Interface: values/dirac/grad_axis over node batches (0-based axes)."""

    frame: BubbleFrame

    def values(self, X, cache: NodeCache = None) -> np.ndarray:
        raise NotImplementedError

    def dirac(self, X, cache: NodeCache = None) -> np.ndarray:
        raise NotImplementedError

    def grad_axis(self, i: int, X, cache: NodeCache = None) -> np.ndarray:
        raise NotImplementedError

    def _cache(self, X, cache):
        return cache if cache is not None else self.frame.cache(X)


_PSI, _GRAD, _GPSI = "psi", "grad", "gpsi"


@dataclass
class PolyField(SpinField):
    """Monomial times a base field: prod_i x_i^{e_i} * base."""

    frame: BubbleFrame
    exps: np.ndarray  # (m,) nonnegative ints
    kind: str
    axis: int = 0  # j of grad_j or k of G_k (0-based)

    def __post_init__(self):
        self.exps = np.asarray(self.exps, dtype=int)

    def label(self) -> str:
        mono = (
            "".join(
                f"x{i+1}" + (f"^{e}" if e > 1 else "")
                for i, e in enumerate(self.exps)
                if e > 0
            )
            or "1"
        )
        if self.kind == _PSI:
            return f"{mono}*psi"
        if self.kind == _GRAD:
            return f"{mono}*d{self.axis+1}psi"
        return f"{mono}*G{self.axis+1}psi"

    def poly(self, X):
        out = np.ones(X.shape[0])
        for i, e in enumerate(self.exps):
            if e:
                out = out * X[:, i] ** e
        return out

    def poly_grad(self, i, X):
        e = self.exps[i]
        if e == 0:
            return None
        out = e * X[:, i] ** (e - 1) if e > 1 else np.full(X.shape[0], float(e))
        for j, ej in enumerate(self.exps):
            if ej and j != i:
                out = out * X[:, j] ** ej
        return out

    def base_values(self, cache: NodeCache):
        if self.kind == _PSI:
            return cache.psi
        if self.kind == _GRAD:
            return cache.grads[self.axis]
        return self.frame.gmul(self.axis, cache.psi)

    def base_grad_axis(self, i, cache: NodeCache):
        if self.kind == _PSI:
            return cache.grads[i]
        if self.kind == _GRAD:
            return cache.hess_entry(i, self.axis)
        return self.frame.gmul(self.axis, cache.grads[i])

    def base_dirac(self, cache: NodeCache):
        f, m = self.frame, self.frame.m
        if self.kind == _PSI:
            return cache.dirac_psi
        if self.kind == _GRAD:
            j = self.axis
            return (-2.0 * m * cache.X[:, j] / cache.s**2)[:, None] * cache.psi + (
                m / cache.s
            )[:, None] * cache.grads[j]
        k = self.axis
        return -f.gmul(k, cache.dirac_psi) - 2.0 * cache.grads[k]

    def values(self, X, cache=None):
        cache = self._cache(X, cache)
        return self.poly(cache.X)[:, None] * self.base_values(cache)

    def grad_axis(self, i, X, cache=None):
        cache = self._cache(X, cache)
        out = self.poly(cache.X)[:, None] * self.base_grad_axis(i, cache)
        pg = self.poly_grad(i, cache.X)
        if pg is not None:
            out = out + pg[:, None] * self.base_values(cache)
        return out

    def dirac(self, X, cache=None):
        cache = self._cache(X, cache)
        out = self.poly(cache.X)[:, None] * self.base_dirac(cache)
        base = None
        for i in range(self.frame.m):
            pg = self.poly_grad(i, cache.X)
            if pg is not None:
                if base is None:
                    base = self.base_values(cache)
                out = out + pg[:, None] * self.frame.gmul(i, base)
        return out


@dataclass
class ComboField(SpinField):
    """Real linear combination of spin fields."""

    frame: BubbleFrame
    terms: list  # [(coef, SpinField)]

    def label(self) -> str:
        return " + ".join(f"{c:+.3g}*{t.label()}" for c, t in self.terms)

    def _accumulate(self, call, X, cache):
        cache = self._cache(X, cache)
        out = np.zeros((cache.X.shape[0], self.frame.n), dtype=complex)
        for c, t in self.terms:
            if c != 0.0:
                out += c * call(t, cache)
        return out

    def values(self, X, cache=None):
        return self._accumulate(lambda t, c: t.values(c.X, c), X, cache)

    def dirac(self, X, cache=None):
        return self._accumulate(lambda t, c: t.dirac(c.X, c), X, cache)

    def grad_axis(self, i, X, cache=None):
        return self._accumulate(lambda t, c: t.grad_axis(i, c.X, c), X, cache)


def default_dictionary(frame: BubbleFrame) -> list[PolyField]:
    """The Galerkin dictionary: x_i grad_j psi, x_i x_j grad_k psi (i <= j),
    x_i psi, G_k psi, and x_k G_j psi."""
    m = frame.m
    fields = []
    for i in range(m):
        for j in range(m):
            e = np.zeros(m, dtype=int)
            e[i] = 1
            fields.append(PolyField(frame, e, _GRAD, j))
    for i in range(m):
        for j in range(i, m):
            for k in range(m):
                e = np.zeros(m, dtype=int)
                e[i] += 1
                e[j] += 1
                fields.append(PolyField(frame, e, _GRAD, k))
    for i in range(m):
        e = np.zeros(m, dtype=int)
        e[i] = 1
        fields.append(PolyField(frame, e, _PSI))
    for k in range(m):
        fields.append(PolyField(frame, np.zeros(m, dtype=int), _GPSI, k))
    for k in range(m):
        for j in range(m):
            e = np.zeros(m, dtype=int)
            e[k] = 1
            fields.append(PolyField(frame, e, _GPSI, j))
    return fields
