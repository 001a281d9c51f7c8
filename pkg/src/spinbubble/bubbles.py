"""Closed-form evaluation of the bubble spinors and their calculus.

The family

    psi_{lam,xi,gamma}(x)
        = m^{(m-1)/2} lam^{(m-1)/2} (lam^2 + |x-xi|^2)^{-m/2} (lam - (x-xi)) . gamma

solves D psi = |psi|^{2/(m-1)} psi on R^m for every scale lam > 0, center xi
and unit spinor gamma.  Everything here is the exact closed form (including
all derivatives); no autodiff is involved, so these formulas double as test
targets for the rest of the package.

Points are accepted either as single vectors of shape (m,) or as batches of
shape (N, m); spinor outputs follow with shapes (n,) or (N, n).
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .clifford import CliffordRep, ShapeError

__all__ = [
    "Bubble",
    "eval_bubble",
    "bubble_norm",
    "grad_bubble",
    "dirac",
    "dirac_residual",
    "pairing_density",
    "pairing_density_closed",
    "invert",
    "tangent_basis",
    "gamma_tangent_frame",
]

# below this scale the prefactor is evaluated in log space
_TINY_LAMBDA = 1e-6


@dataclass(frozen=True)
class Bubble:
    """A point (lam, xi, gamma) of the critical manifold."""

    lam: float
    xi: np.ndarray
    gamma: np.ndarray
    rep: CliffordRep

    def __post_init__(self):
        object.__setattr__(self, "xi", np.asarray(self.xi, dtype=float))
        object.__setattr__(self, "gamma", np.asarray(self.gamma, dtype=complex))
        if self.lam <= 0:
            raise ValueError(f"scale must be positive, got {self.lam}")
        if self.xi.shape != (self.rep.m,):
            raise ShapeError(f"center shape {self.xi.shape} != ({self.rep.m},)")
        if self.gamma.shape != (self.rep.n_spinor,):
            raise ShapeError("gamma length does not match the spinor module")
        if abs(np.linalg.norm(self.gamma) - 1.0) > 1e-12:
            raise ValueError("gamma must be a unit spinor (within 1e-12)")

    @property
    def m(self) -> int:
        return self.rep.m


def _as_batch(x, m):
    x = np.asarray(x, dtype=float)
    single = x.ndim == 1
    if single:
        x = x[None, :]
    if x.shape[1] != m:
        raise ShapeError(f"points have dimension {x.shape[1]}, expected {m}")
    return x, single


def _gamma_images(b: Bubble) -> np.ndarray:
    """Stack [G_1 gamma, ..., G_m gamma], shape (m, n)."""
    return np.stack([g @ b.gamma for g in b.rep.generators])


def _core(b: Bubble, u: np.ndarray, ggam: np.ndarray) -> np.ndarray:
    """(lam - u) . gamma for a batch of offsets u = x - xi."""
    return b.lam * b.gamma[None, :] - u @ ggam


def _prefactor(b: Bubble, s: np.ndarray) -> np.ndarray:
    """m^{(m-1)/2} lam^{(m-1)/2} s^{-m/2} with s = lam^2 + |x-xi|^2."""
    m, lam = b.m, b.lam
    if lam < _TINY_LAMBDA:
        return np.exp(0.5 * (m - 1) * (np.log(m) + np.log(lam)) - 0.5 * m * np.log(s))
    return m ** (0.5 * (m - 1)) * lam ** (0.5 * (m - 1)) * s ** (-0.5 * m)


def eval_bubble(b: Bubble, x) -> np.ndarray:
    """Evaluate psi_{lam,xi,gamma} at x."""
    X, single = _as_batch(x, b.m)
    u = X - b.xi
    s = b.lam**2 + np.sum(u * u, axis=1)
    psi = _prefactor(b, s)[:, None] * _core(b, u, _gamma_images(b))
    return psi[0] if single else psi


def bubble_norm(b: Bubble, x) -> np.ndarray:
    """Pointwise hermitian norm, m^{(m-1)/2} lam^{(m-1)/2} (lam^2+|x-xi|^2)^{-(m-1)/2}."""
    X, single = _as_batch(x, b.m)
    u = X - b.xi
    s = b.lam**2 + np.sum(u * u, axis=1)
    out = _prefactor(b, s) * np.sqrt(s)
    return out[0] if single else out


def grad_bubble(b: Bubble, i: int, x) -> np.ndarray:
    """Closed-form covariant derivative along the i-th axis (1-based)."""
    if not 1 <= i <= b.m:
        raise ShapeError(f"axis {i} out of range for m={b.m}")
    X, single = _as_batch(x, b.m)
    u = X - b.xi
    s = b.lam**2 + np.sum(u * u, axis=1)
    ggam = _gamma_images(b)
    c = _prefactor(b, s)
    out = c[:, None] * (
        (-b.m * u[:, i - 1] / s)[:, None] * _core(b, u, ggam) - ggam[i - 1][None, :]
    )
    return out[0] if single else out


def _all_grads(b: Bubble, u, s, ggam):
    """psi and all m derivatives in one pass; shapes (N,n) and (m,N,n)."""
    c = _prefactor(b, s)
    core = _core(b, u, ggam)
    psi = c[:, None] * core
    grads = np.empty((b.m, u.shape[0], b.rep.n_spinor), dtype=complex)
    for i in range(b.m):
        grads[i] = c[:, None] * ((-b.m * u[:, i] / s)[:, None] * core - ggam[i][None, :])
    return psi, grads


def dirac(b: Bubble, x) -> np.ndarray:
    """D psi = sum_i e_i . grad_i psi, assembled from the closed forms."""
    X, single = _as_batch(x, b.m)
    u = X - b.xi
    s = b.lam**2 + np.sum(u * u, axis=1)
    ggam = _gamma_images(b)
    _, grads = _all_grads(b, u, s, ggam)
    out = np.zeros((X.shape[0], b.rep.n_spinor), dtype=complex)
    for i, g in enumerate(b.rep.generators):
        out += grads[i] @ g.T
    return out[0] if single else out


def dirac_residual(b: Bubble, x) -> np.ndarray:
    """D psi - |psi|^{2/(m-1)} psi; identically zero in exact arithmetic."""
    X, single = _as_batch(x, b.m)
    u = X - b.xi
    s = b.lam**2 + np.sum(u * u, axis=1)
    res = dirac(b, X) - (b.m * b.lam / s)[:, None] * eval_bubble(b, X)
    return res[0] if single else res


def pairing_density(b: Bubble, i: int, x) -> np.ndarray:
    """Re(e_i . grad_i psi, psi) via the Clifford algebra (no closed form)."""
    if not 1 <= i <= b.m:
        raise ShapeError(f"axis {i} out of range for m={b.m}")
    X, single = _as_batch(x, b.m)
    psi = eval_bubble(b, X)
    gi = b.rep.generators[i - 1]
    dpsi = grad_bubble(b, i, X)
    out = np.real(np.sum(np.conj(dpsi @ gi.T) * psi, axis=1))
    return out[0] if single else out


def pairing_density_closed(b: Bubble, x) -> np.ndarray:
    """The same density in closed form: m^{m-1} lam^m (lam^2+|x-xi|^2)^{-m}."""
    X, single = _as_batch(x, b.m)
    u = X - b.xi
    s = b.lam**2 + np.sum(u * u, axis=1)
    if b.lam < _TINY_LAMBDA:
        out = np.exp((b.m - 1) * np.log(b.m) + b.m * np.log(b.lam) - b.m * np.log(s))
    else:
        out = b.m ** (b.m - 1) * b.lam**b.m / s**b.m
    return out[0] if single else out


def invert(b: Bubble) -> Bubble:
    """The inversion (lam, xi) -> (lam, -xi)/(lam^2+|xi|^2); involutive."""
    d = b.lam**2 + float(np.dot(b.xi, b.xi))
    if d == 0.0:
        raise ValueError("inversion undefined at (lam, xi) = (0, 0)")
    return Bubble(lam=b.lam / d, xi=-b.xi / d, gamma=b.gamma, rep=b.rep)


def gamma_tangent_frame(gamma: np.ndarray) -> list[np.ndarray]:
    """Real-orthonormal basis of the tangent space to the unit sphere at gamma.

    The sphere sits in C^n viewed as R^{2n}; the frame has 2n-1 members and
    is deterministic for a fixed gamma.
    """
    gamma = np.asarray(gamma, dtype=complex)
    n = gamma.shape[0]
    frame = [gamma]
    candidates = []
    for j in range(n):
        e = np.zeros(n, dtype=complex)
        e[j] = 1.0
        candidates.extend([e, 1.0j * e])
    for c in candidates:
        v = c.copy()
        for f in frame:
            v = v - np.real(np.vdot(f, v)) * f
        nv = np.linalg.norm(v)
        if nv > 1e-8:
            frame.append(v / nv)
        if len(frame) == 2 * n:
            break
    return frame[1:]


def tangent_basis(b: Bubble) -> list:
    """Callable closed forms spanning the tangent space of the critical manifold.

    Returns m + 2*n_spinor fields: d/dlam, d/dxi_i for i = 1..m, and one field
    psi_{lam,xi,delta} per tangent direction delta of the gamma sphere
    (2*n_spinor - 1 of those).
    """
    fields = []

    def d_lam(x, b=b):
        X, single = _as_batch(x, b.m)
        u = X - b.xi
        s = b.lam**2 + np.sum(u * u, axis=1)
        ggam = _gamma_images(b)
        c = _prefactor(b, s)
        core = _core(b, u, ggam)
        out = ((b.m - 1) / (2 * b.lam) - b.m * b.lam / s)[..., None] * (
            c[:, None] * core
        ) + c[:, None] * b.gamma[None, :]
        return out[0] if single else out

    fields.append(d_lam)

    def make_dxi(i):
        def d_xi(x, b=b, i=i):
            return -grad_bubble(b, i, x)

        return d_xi

    for i in range(1, b.m + 1):
        fields.append(make_dxi(i))

    def make_dgamma(delta):
        bd = Bubble(lam=b.lam, xi=b.xi, gamma=delta / np.linalg.norm(delta), rep=b.rep)
        scale = np.linalg.norm(delta)

        def d_gamma(x, bd=bd, scale=scale):
            return scale * eval_bubble(bd, x)

        return d_gamma

    for delta in gamma_tangent_frame(b.gamma):
        fields.append(make_dgamma(delta))
    return fields
