"""The reduced problem for potential perturbations: Psi(lam, xi) and its analysis.

After the change of variables that moves the bubble to the unit frame,

    Psi(lam, xi) = m^m * integral a(lam*x + xi) / (1+|x|^2)^m dx,

which is independent of the spin factor gamma.  The even extension
Psi~(lam, xi) across lam = 0 has Psi~(0, xi) = c_pot_0 * a(xi), gradient
(0, c_pot_0 * grad a), and a block-diagonal Hessian limit
diag(c_pot_2 * Lap a(xi), c_pot_0 * Hess a(xi)) for m >= 3; for m = 2 the
lam-lam entry degenerates like -4 pi lam log(lam) Lap a(xi), which is what
the log-fit operation extracts.

The Brouwer degree over a region is computed by Morse summation of local
indices (non-Morse points abort), with the lam = 0 plane contributing via
the index formula driven by the sign of Lap a at critical points of a.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field

import numpy as np

from .bubbles import Bubble, bubble_norm
from .fields import ScalarField, morse_census
from .quadrature import ConstantsTable, QuadratureRule, build_rule, constants_table

__all__ = [
    "ReducedPotential",
    "CriticalPointReport",
    "DegreeReport",
    "psi",
    "psi_raw",
    "gamma_functional",
    "psi_grad",
    "psi_hessian",
    "psi_tilde",
    "psi_tilde_grad",
    "hessian_limit",
    "lnlambda_fit_2d",
    "critical_census",
    "degree",
    "outward_check",
    "energy_report",
    "grad_decay_check",
]


class ExtrapolationError(RuntimeError):
    """Raised when a Richardson or log-fit extrapolation fails to converge."""


class NonMorseError(RuntimeError):
    """Raised when a degree computation meets a degenerate critical point."""


@dataclass
class ReducedPotential:
    """A potential field together with the quadrature data used on it."""

    a: ScalarField
    rule: QuadratureRule
    constants: ConstantsTable = None
    eps: float = 0.0
    census_rule: QuadratureRule = None

    def __post_init__(self):
        m = self.rule.m
        if self.a.m != m:
            raise ValueError("field and rule dimensions disagree")
        if self.constants is None:
            self.constants = constants_table(m)
        r2 = np.sum(self.rule.nodes**2, axis=1)
        self._wk = self.rule.weights * (1.0 + r2) ** (-m)
        if self.census_rule is None and self.rule.tolerance < 1e-4:
            seed = self.rule.scheme.get("seed", 0)
            self.census_rule = build_rule(m, 1e-4, seed=seed)
        elif self.census_rule is None:
            self.census_rule = self.rule
        r2c = np.sum(self.census_rule.nodes**2, axis=1)
        self._wkc = self.census_rule.weights * (1.0 + r2c) ** (-m)

    @property
    def m(self) -> int:
        return self.rule.m


def _shifted(rp: ReducedPotential, lam, xi, coarse=False):
    rule = rp.census_rule if coarse else rp.rule
    wk = rp._wkc if coarse else rp._wk
    return rule.nodes * lam + np.asarray(xi, dtype=float)[None, :], rule.nodes, wk


def psi(rp: ReducedPotential, lam: float, xi) -> float:
    """Psi(lam, xi) in the change-of-variables form."""
    if lam <= 0:
        raise ValueError("psi is defined for lam > 0; use psi_tilde at lam <= 0")
    Y, _, wk = _shifted(rp, lam, xi)
    return rp.m**rp.m * float(wk @ rp.a._eval(Y))


def psi_raw(rp: ReducedPotential, b: Bubble) -> float:
    """Psi from the raw definition: quadrature of a(x) |psi_b(x)|^{2*} in x.

    Exercises the gamma-dependent evaluation path; the result must agree
    with psi(lam, xi) for every unit gamma.
    """
    X = rp.rule.nodes
    dens = bubble_norm(b, X) ** rp.constants.two_star
    return float(np.sum(rp.rule.weights * rp.a._eval(X) * dens))


def gamma_functional(rp: ReducedPotential, b: Bubble) -> float:
    """Gamma(psi_b) = -(1/2*) integral a |psi_b|^{2*} = -((m-1)/2m) Psi."""
    return -psi_raw(rp, b) / rp.constants.two_star


def psi_grad(rp: ReducedPotential, lam: float, xi, coarse=False) -> np.ndarray:
    """(d_lam Psi, grad_xi Psi) with analytic integrands."""
    Y, X, wk = _shifted(rp, lam, xi, coarse)
    g = rp.a._grad(Y)
    out = np.empty(rp.m + 1)
    out[0] = wk @ np.sum(g * X, axis=1)
    out[1:] = wk @ g
    return rp.m**rp.m * out


def psi_hessian(rp: ReducedPotential, lam: float, xi, coarse=False) -> np.ndarray:
    """Full (m+1) x (m+1) Hessian of Psi at lam > 0."""
    Y, X, wk = _shifted(rp, lam, xi, coarse)
    H = rp.a._hess(Y)
    m = rp.m
    out = np.empty((m + 1, m + 1))
    HX = np.einsum("nij,nj->ni", H, X)
    out[0, 0] = wk @ np.sum(HX * X, axis=1)
    mixed = wk @ HX
    out[0, 1:] = mixed
    out[1:, 0] = mixed
    out[1:, 1:] = np.einsum("n,nij->ij", wk, H)
    return m**m * out


def psi_tilde(rp: ReducedPotential, lam: float, xi) -> float:
    """Even extension across lam = 0; Psi~(0, xi) = c_pot_0 a(xi)."""
    if lam == 0.0:
        return rp.constants.c_pot_0 * rp.a.eval(np.asarray(xi, dtype=float))
    return psi(rp, abs(lam), xi)


def psi_tilde_grad(rp: ReducedPotential, lam: float, xi) -> np.ndarray:
    if lam == 0.0:
        out = np.empty(rp.m + 1)
        out[0] = 0.0
        out[1:] = rp.constants.c_pot_0 * rp.a.grad(np.asarray(xi, dtype=float))
        return out
    g = psi_grad(rp, abs(lam), xi)
    if lam < 0:
        g[0] = -g[0]
    return g


def hessian_limit(rp: ReducedPotential, xi, lams=(1e-2, 5e-3, 2.5e-3)) -> np.ndarray:
    """Richardson extrapolation of the Hessian of Psi~ to the lam = 0 plane.

    Expected structure: diag(c_pot_2 * Lap a(xi), c_pot_0 * Hess a(xi)) with
    vanishing mixed entries; requires m >= 3 for the lam-lam entry.
    """
    if rp.m < 3:
        raise ExtrapolationError("the lam-lam entry diverges for m = 2; use the log fit")
    lams = np.asarray(sorted(lams, reverse=True), dtype=float)
    if len(lams) != 3 or not np.allclose(lams[:-1] / lams[1:], 2.0, rtol=1e-12):
        raise ExtrapolationError("need three lam values in ratio 2 for the extrapolation")
    h0 = psi_hessian(rp, lams[0], xi)
    h1 = psi_hessian(rp, lams[1], xi)
    h2 = psi_hessian(rp, lams[2], xi)
    # eliminate O(lam) and O(lam^2) error terms
    out = (h0 - 6.0 * h1 + 8.0 * h2) / 3.0
    steps = np.array([np.max(np.abs(h1 - h0)), np.max(np.abs(h2 - h1))])
    if steps[0] > 0 and steps[1] > steps[0] * 4.0:
        raise ExtrapolationError("Hessian extrapolation is not converging")
    return out


def lnlambda_fit_2d(rp: ReducedPotential, xi, lam_lo=1e-4, lam_hi=1e-2, n=9):
    """Fit d_lam Psi(lam, xi) = lam log(lam) (c + d/log(lam)) for m = 2.

    Returns (c, r_squared); the limit coefficient c is -4 pi Lap a(xi).
    """
    if rp.m != 2:
        raise ExtrapolationError("the log-lambda fit applies to m = 2 only")
    lams = np.geomspace(lam_lo, lam_hi, n)
    y = np.array([psi_grad(rp, lam, xi)[0] / (lam * math.log(lam)) for lam in lams])
    A = np.stack([np.ones_like(lams), 1.0 / np.log(lams)], axis=1)
    coef, *_ = np.linalg.lstsq(A, y, rcond=None)
    resid = y - A @ coef
    ss_tot = float(np.sum((y - np.mean(y)) ** 2))
    r2 = 1.0 - float(np.sum(resid**2)) / ss_tot if ss_tot > 0 else 1.0
    if r2 < 0.99:
        raise ExtrapolationError(f"log-lambda fit too poor: R^2 = {r2:.4f}")
    return float(coef[0]), r2


@dataclass
class CriticalPointReport:
    lam: float
    xi: np.ndarray
    value: float
    grad_norm: float
    eigenvalues: np.ndarray
    morse_index: int
    local_index: int  # sign(det Hessian)
    iterations: int

    @property
    def location(self) -> np.ndarray:
        return np.concatenate([[self.lam], self.xi])

    def as_dict(self) -> dict:
        return {
            "lambda": self.lam,
            "xi": self.xi.tolist(),
            "value": self.value,
            "grad_norm": self.grad_norm,
            "eigenvalues": self.eigenvalues.tolist(),
            "morse_index": self.morse_index,
            "local_index": self.local_index,
        }


def _psi_scale(rp: ReducedPotential) -> float:
    sup_a = float(np.max(np.abs(rp.a._eval(rp.census_rule.nodes))))
    return rp.constants.c_pot_0 * max(sup_a, 1.0)


def critical_census(
    rp: ReducedPotential,
    box,
    seeds=128,
    grad_tol=1e-8,
    eig_floor=1e-8,
    merge_radius=1e-6,
    lam_floor=1e-3,
    max_iter=60,
    seed=0,
):
    """Multistart Newton census of grad Psi over a box in (0, inf) x R^m.

    The box must keep lam >= lam_floor; the search runs on a coarse rule and
    each hit is polished and validated on the full rule.  Returns
    (reports sorted by value, diagnostics dict).
    """
    box = [tuple(map(float, b)) for b in box]
    if len(box) != rp.m + 1:
        raise ValueError(f"box needs {rp.m + 1} intervals (lam, xi_1..xi_m)")
    if box[0][0] < lam_floor:
        raise ValueError(f"box must stay above the lam floor {lam_floor}")
    lo = np.array([b[0] for b in box])
    hi = np.array([b[1] for b in box])
    from scipy.stats import qmc

    u = qmc.Sobol(d=rp.m + 1, scramble=True, seed=seed).random(int(seeds))
    pts = lo + u * (hi - lo)
    scale = _psi_scale(rp)
    margin = 1e-3 * np.max(hi - lo)

    found, failures = [], 0
    for z0 in pts:
        z = z0.copy()
        mu = 1e-6
        ok = False
        iters = 0
        for iters in range(1, max_iter + 1):
            g = psi_grad(rp, z[0], z[1:], coarse=True)
            gn = np.linalg.norm(g)
            if gn <= grad_tol * scale:
                ok = True
                break
            H = psi_hessian(rp, z[0], z[1:], coarse=True)
            try:
                step = np.linalg.solve(H + mu * np.eye(rp.m + 1), -g)
            except np.linalg.LinAlgError:
                mu *= 10.0
                continue
            limit = 0.2 * float(np.max(hi - lo))
            sn = np.linalg.norm(step)
            if sn > limit:
                step *= limit / sn
            z_new = np.clip(z + step, lo, hi)
            if np.linalg.norm(psi_grad(rp, z_new[0], z_new[1:], coarse=True)) < gn:
                z = z_new
                mu = max(mu * 0.3, 1e-12)
            else:
                mu *= 10.0
                if mu > 1e8:
                    break
        if not ok or np.any(z <= lo + margin) or np.any(z >= hi - margin):
            failures += 1
            continue
        # polish on the full-accuracy rule
        for _ in range(8):
            g = psi_grad(rp, z[0], z[1:])
            if np.linalg.norm(g) <= 0.1 * grad_tol * scale:
                break
            H = psi_hessian(rp, z[0], z[1:])
            try:
                step = np.linalg.solve(H, -g)
            except np.linalg.LinAlgError:
                break
            if np.linalg.norm(step) > 0.1:
                step *= 0.1 / np.linalg.norm(step)
            z = np.clip(z + step, lo, hi)
        g = psi_grad(rp, z[0], z[1:])
        if np.linalg.norm(g) > grad_tol * scale:
            failures += 1
            continue
        H = psi_hessian(rp, z[0], z[1:])
        eig = np.linalg.eigvalsh(H)
        if np.min(np.abs(eig)) < eig_floor * scale:
            failures += 1
            continue
        idx = int(np.sum(eig < 0.0))
        found.append(
            CriticalPointReport(
                lam=float(z[0]),
                xi=z[1:].copy(),
                value=psi(rp, z[0], z[1:]),
                grad_norm=float(np.linalg.norm(g)),
                eigenvalues=eig,
                morse_index=idx,
                local_index=1 if idx % 2 == 0 else -1,
                iterations=iters,
            )
        )

    merged = []
    for cp in sorted(found, key=lambda c: tuple(c.location)):
        if all(
            np.linalg.norm(cp.location - q.location) > merge_radius for q in merged
        ):
            merged.append(cp)
    merged.sort(key=lambda c: c.value)
    return merged, {"seeds": int(seeds), "failures": failures, "scale": scale}


@dataclass
class DegreeReport:
    region: dict
    census: list
    plane_census: list
    degree: int
    expected: int | None
    match: bool | None

    def as_dict(self) -> dict:
        return {
            "region": self.region,
            "census": [cp.as_dict() for cp in self.census],
            "plane_points": [
                {
                    "xi": cp.location.tolist(),
                    "morse_index": cp.morse_index,
                    "laplacian": cp.laplacian,
                    "index": _plane_index(cp),
                }
                for cp in self.plane_census
            ],
            "degree": self.degree,
            "expected": self.expected,
            "match": self.match,
        }


def _plane_index(cp) -> int:
    base = (-1) ** cp.morse_index
    return base if cp.laplacian > 0 else -base


def degree(
    rp: ReducedPotential,
    radius: float,
    census=None,
    plane_census=None,
    boundary_margin=1e-4,
    census_kwargs=None,
) -> DegreeReport:
    """Degree of grad Psi~ over the extended ball lam^2 + |xi|^2 <= R^2.

    Morse summation: positive-lam critical points contribute twice (their
    mirror images at -lam contribute equally by evenness), plane points
    contribute the index formula driven by sign(Lap a).  The expected value
    is (-1)^{m+1}.
    """
    m = rp.m
    kwargs = dict(census_kwargs or {})
    if census is None:
        box = [(1e-3, radius)] + [(-radius, radius)] * m
        census, _ = critical_census(rp, box, **kwargs)
    if plane_census is None:
        plane_census, _ = morse_census(
            rp.a, [(-radius, radius)] * m, seeds=kwargs.get("seeds", 256)
        )
    inside = []
    for cp in census:
        r = float(np.linalg.norm(cp.location))
        if abs(r - radius) <= boundary_margin:
            raise ValueError(f"census point within {boundary_margin} of the boundary")
        if r < radius:
            if np.min(np.abs(cp.eigenvalues)) <= 0.0:
                raise NonMorseError(f"non-Morse critical point at {cp.location}")
            inside.append(cp)
    plane_inside = []
    for cp in plane_census:
        if cp.at_infinity:
            continue
        r = float(np.linalg.norm(cp.location))
        if abs(r - radius) <= boundary_margin:
            raise ValueError(f"plane point within {boundary_margin} of the boundary")
        if r < radius:
            if cp.laplacian == 0.0:
                raise NonMorseError(f"plane point with vanishing Laplacian at {cp.location}")
            plane_inside.append(cp)
    deg = 2 * sum(cp.local_index for cp in inside) + sum(
        _plane_index(cp) for cp in plane_inside
    )
    expected = (-1) ** (m + 1)
    return DegreeReport(
        region={"kind": "extended-ball", "radius": radius},
        census=inside,
        plane_census=plane_inside,
        degree=int(deg),
        expected=expected,
        match=bool(deg == expected),
    )


def degree_box(rp: ReducedPotential, census, box, expected=None) -> DegreeReport:
    """Degree over a positive-lam box, by summation of local indices."""
    lo = np.array([b[0] for b in box])
    hi = np.array([b[1] for b in box])
    inside = [
        cp
        for cp in census
        if np.all(cp.location >= lo) and np.all(cp.location <= hi)
    ]
    for cp in inside:
        if np.min(np.abs(cp.eigenvalues)) <= 0.0:
            raise NonMorseError(f"non-Morse critical point at {cp.location}")
    deg = sum(cp.local_index for cp in inside)
    return DegreeReport(
        region={"kind": "box", "bounds": [list(b) for b in box]},
        census=inside,
        plane_census=[],
        degree=int(deg),
        expected=expected,
        match=None if expected is None else bool(deg == expected),
    )


def outward_check(rp: ReducedPotential, radius: float, n_samples=64, seed=0) -> dict:
    """Sample grad Psi~ . (lam, xi) on the shell lam^2+|xi|^2 = R^2; expect < 0."""
    rng = np.random.default_rng(seed)
    z = rng.standard_normal((n_samples, rp.m + 1))
    z /= np.linalg.norm(z, axis=1)[:, None]
    z *= radius
    worst = -np.inf
    for row in z:
        g = psi_tilde_grad(rp, row[0], row[1:])
        worst = max(worst, float(g @ row))
    return {"radius": radius, "worst_dot": worst, "passed": bool(worst < 0.0)}


def energy_report(rp: ReducedPotential, cp: CriticalPointReport, eps: float) -> dict:
    """Energy data at a reduced critical point.

    The unperturbed level is (m/2)^m omega_m; the first-order correction of
    integral (1+eps*a)|psi|^{2*} is eps * Psi(lam*, xi*).  For m = 2 the
    report adds the Willmore-type estimate of integral (1+eps*a)^2 |psi|^4.
    """
    m = rp.m
    leading = rp.constants.c_pot_0  # equals (m/2)^m omega_m by the oracle identity
    psi_star = psi(rp, cp.lam, cp.xi) if eps != 0.0 else 0.0
    out = {
        "lambda": cp.lam,
        "xi": cp.xi.tolist(),
        "eps": eps,
        "leading": leading,
        "energy": leading + eps * psi_star,
        "first_order": psi_star,
    }
    if m == 2:
        if eps != 0.0:
            Y, _, wk = _shifted(rp, cp.lam, cp.xi)
            a_vals = rp.a._eval(Y)
            second = m**m * float(wk @ a_vals**2)
            willmore = leading + 2.0 * eps * psi_star + eps**2 * second
        else:
            willmore = leading
        out["willmore"] = willmore
        out["willmore_leading"] = 4.0 * math.pi
        out["embedded"] = bool(willmore < 8.0 * math.pi)
    return out


def grad_decay_check(rp: ReducedPotential, z, distances=(10.0, 100.0, 1000.0)) -> dict:
    """Verify that grad Psi decays along lam- and xi-rays away from z."""
    z = np.asarray(z, dtype=float)
    e = np.zeros(rp.m)
    e[0] = 1.0
    near = max(
        float(np.linalg.norm(psi_grad(rp, 1.0, z))),
        float(np.linalg.norm(psi_grad(rp, 1.0, z + e))),
    )
    lam_ray = [float(np.linalg.norm(psi_grad(rp, d, z))) for d in distances]
    xi_ray = [float(np.linalg.norm(psi_grad(rp, 1.0, z + d * e))) for d in distances]
    def monotone(seq):
        return all(seq[i + 1] <= seq[i] * (1 + 1e-9) for i in range(len(seq) - 1))
    far = max(lam_ray[-1], xi_ray[-1])
    passed = monotone(lam_ray) and monotone(xi_ray) and (
        near == 0.0 or far <= 1e-3 * near
    )
    return {
        "near_scale": near,
        "lam_ray": lam_ray,
        "xi_ray": xi_ray,
        "passed": bool(passed),
    }


def landscape_csv(rp: ReducedPotential, lam_grid, xi_grid) -> str:
    """CSV landscape (lam, xi_1..xi_m, Psi) over a product grid."""
    header = ["lambda"] + [f"xi{i+1}" for i in range(rp.m)] + ["psi"]
    lines = [",".join(header)]
    for lam in lam_grid:
        for xi in xi_grid:
            xi = np.atleast_1d(np.asarray(xi, dtype=float))
            vals = [lam, *xi.tolist(), psi(rp, float(lam), xi)]
            lines.append(",".join(repr(float(v)) for v in vals))
    return "\n".join(lines) + "\n"
