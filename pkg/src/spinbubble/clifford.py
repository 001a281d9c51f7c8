"""Complex Clifford algebra representations and the spinor inner-product calculus.

Generators are skew-hermitian with G_i^2 = -I (negative-definite convention),
so Clifford multiplication by a tangent vector v satisfies v.v.psi = -|v|^2 psi
and is an isometry of the hermitian metric.  The construction is the standard
recursive tensor-product one: hermitian gamma matrices with entries in
{0, +-1, +-i} are built from the Pauli base case and multiplied by i, which
keeps all the defining relations exact in floating point.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

__all__ = ["CliffordRep", "build_rep", "clifford_mul", "hermitian", "random_unit_spinor"]

_PAULI_1 = np.array([[0.0, 1.0], [1.0, 0.0]], dtype=complex)
_PAULI_2 = np.array([[0.0, -1.0j], [1.0j, 0.0]], dtype=complex)
_PAULI_3 = np.array([[1.0, 0.0], [0.0, -1.0]], dtype=complex)


class DimensionError(ValueError):
    """Raised for ambient dimensions outside the supported range."""


class ShapeError(ValueError):
    """Raised when vector/spinor dimensions do not match a representation."""


@dataclass(frozen=True)
class CliffordRep:
    """Representation of Cl(R^m) on the spinor module C^{2^[m/2]}.

    Immutable after construction; all operations on it are pure functions,
    so instances can be shared freely across threads.
    """

    m: int
    n_spinor: int
    generators: tuple = field(repr=False)

    def generator(self, i: int) -> np.ndarray:
        """Return G_i for a 1-based axis index."""
        if not 1 <= i <= self.m:
            raise ShapeError(f"axis {i} out of range for m={self.m}")
        return self.generators[i - 1]


def _hermitian_gammas(m: int) -> list[np.ndarray]:
    """Hermitian anticommuting gammas with Gamma_i^2 = +I, built recursively."""
    if m == 1:
        return [np.array([[1.0]], dtype=complex)]
    if m == 2:
        return [_PAULI_1.copy(), _PAULI_2.copy()]
    if m % 2 == 1:
        gammas = _hermitian_gammas(m - 1)
        # chirality element, normalized to square to +I and stay hermitian
        k = (m - 1) // 2
        chi = gammas[0]
        for g in gammas[1:]:
            chi = chi @ g
        gammas.append((-1.0j) ** k * chi)
        return gammas
    lower = _hermitian_gammas(m - 2)
    eye = np.eye(lower[0].shape[0], dtype=complex)
    gammas = [np.kron(_PAULI_3, g) for g in lower]
    gammas.append(np.kron(_PAULI_1, eye))
    gammas.append(np.kron(_PAULI_2, eye))
    return gammas


def build_rep(m: int) -> CliffordRep:
    """Construct the spinor representation of Cl(R^m) for m >= 2.

    Deterministic: identical output (bit for bit) for a fixed m.
    """
    if not isinstance(m, (int, np.integer)) or m < 2:
        raise DimensionError(f"ambient dimension must be an integer >= 2, got {m!r}")
    gammas = _hermitian_gammas(int(m))
    generators = tuple(1.0j * g for g in gammas)
    n = generators[0].shape[0]
    assert n == 2 ** (m // 2)
    return CliffordRep(m=int(m), n_spinor=n, generators=generators)


def clifford_mul(rep: CliffordRep, v: np.ndarray, psi: np.ndarray) -> np.ndarray:
    """Clifford multiplication v . psi = sum_i v_i G_i psi.

    Linear in both arguments; applying it twice with the same v gives
    -|v|^2 psi.
    """
    v = np.asarray(v, dtype=float)
    psi = np.asarray(psi, dtype=complex)
    if v.shape != (rep.m,):
        raise ShapeError(f"vector shape {v.shape} does not match m={rep.m}")
    if psi.shape[-1] != rep.n_spinor:
        raise ShapeError(f"spinor length {psi.shape[-1]} != {rep.n_spinor}")
    out = np.zeros_like(psi)
    for vi, g in zip(v, rep.generators):
        if vi != 0.0:
            out += vi * (psi @ g.T)
    return out


def hermitian(psi: np.ndarray, phi: np.ndarray) -> complex:
    """Hermitian product (psi, phi), conjugate-linear in the first slot."""
    psi = np.asarray(psi, dtype=complex)
    phi = np.asarray(phi, dtype=complex)
    if psi.shape != phi.shape:
        raise ShapeError(f"spinor shapes differ: {psi.shape} vs {phi.shape}")
    return complex(np.vdot(psi, phi))


def random_unit_spinor(rep: CliffordRep, rng: np.random.Generator) -> np.ndarray:
    """A uniformly random unit spinor, for sampling the gamma factor."""
    z = rng.standard_normal(rep.n_spinor) + 1.0j * rng.standard_normal(rep.n_spinor)
    return z / np.linalg.norm(z)
