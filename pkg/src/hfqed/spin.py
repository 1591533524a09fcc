"""Two-spin Pauli algebra on C^4 = C^2(electron) x C^2(nucleus).

Basis ordering is |el, n> with el, n in {up, down}, electron index slowest,
so that sigma_el_j = s_j (x) 1 and sigma_n_j = 1 (x) s_j.
"""

from __future__ import annotations

from typing import Sequence

import numpy as np
from numpy.typing import NDArray

ComplexMatrix = NDArray[np.complex128]

DEGENERACY_TOL = 1e-10

_S1 = np.array([[0, 1], [1, 0]], dtype=complex)
_S2 = np.array([[0, -1j], [1j, 0]], dtype=complex)
_S3 = np.array([[1, 0], [0, -1]], dtype=complex)
_PAULI_2X2 = (_S1, _S2, _S3)
_I2 = np.eye(2, dtype=complex)

IDENTITY4: ComplexMatrix = np.eye(4, dtype=complex)

SPECIES = ("el", "n")


def _check_axis(j: int) -> int:
    if j not in (1, 2, 3):
        raise ValueError(f"axis index must be 1, 2 or 3, got {j!r}")
    return j


def pauli_el(j: int) -> ComplexMatrix:
    """Electron Pauli matrix ``sigma_el_j`` acting on the first tensor factor."""
    s = _PAULI_2X2[_check_axis(j) - 1]
    return np.kron(s, _I2)


def pauli_n(j: int) -> ComplexMatrix:
    """Nucleus Pauli matrix ``sigma_n_j`` acting on the second tensor factor."""
    s = _PAULI_2X2[_check_axis(j) - 1]
    return np.kron(_I2, s)


def pauli(species: str, j: int) -> ComplexMatrix:
    if species == "el":
        return pauli_el(j)
    if species == "n":
        return pauli_n(j)
    raise ValueError(f"unknown spin species {species!r}; expected 'el' or 'n'")


def _coeffs(a: Sequence[complex]) -> NDArray[np.complex128]:
    arr = np.asarray(a, dtype=complex)
    if arr.shape != (3,):
        raise ValueError(f"expected a 3-vector of coefficients, got shape {arr.shape}")
    return arr


def spin_dot(a: Sequence[complex], species: str = "el") -> ComplexMatrix:
    """Return ``sum_j a_j sigma_j`` for the chosen species.

    For complex ``a`` the square of the result is ``(a1^2 + a2^2 + a3^2) Id``;
    note the plain squares, not moduli.
    """
    arr = _coeffs(a)
    return sum(arr[j - 1] * pauli(species, j) for j in (1, 2, 3))


def coupling_matrix(a: Sequence[complex]) -> ComplexMatrix:
    """Return ``sum_j a_j sigma_el_j sigma_n_j``."""
    arr = _coeffs(a)
    return sum(arr[j - 1] * (pauli_el(j) @ pauli_n(j)) for j in (1, 2, 3))


def coupling_eigenvalues(a: Sequence[float]) -> tuple[float, float, float, float]:
    """Closed-form spectrum of :func:`coupling_matrix` for real coefficients, ascending."""
    arr = np.asarray(a)
    if np.iscomplexobj(arr):
        if np.any(arr.imag != 0):
            raise ValueError("closed-form eigenvalues require real coefficients")
        arr = arr.real
    a1, a2, a3 = (float(x) for x in arr)
    vals = sorted(
        [a1 + a2 - a3, a1 - a2 + a3, -a1 + a2 + a3, -a1 - a2 - a3]
    )
    return tuple(vals)  # type: ignore[return-value]


def singlet_vector() -> NDArray[np.complex128]:
    """Spin singlet (|ud> - |du>)/sqrt(2); eigenvector of coupling_matrix for the
    ``-a1-a2-a3`` eigenvalue."""
    v = np.zeros(4, dtype=complex)
    v[1], v[2] = 1.0, -1.0
    return v / np.sqrt(2.0)


def cluster_multiplicities(values: Sequence[float], tol: float = DEGENERACY_TOL) -> list[int]:
    """Group ascending values into clusters whose consecutive spacing is <= tol."""
    vals = np.sort(np.asarray(values, dtype=float))
    if vals.size == 0:
        return []
    sizes = [1]
    for prev, cur in zip(vals[:-1], vals[1:]):
        if cur - prev <= tol:
            sizes[-1] += 1
        else:
            sizes.append(1)
    return sizes
