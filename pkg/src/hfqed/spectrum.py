"""Low-lying spectrum of fiber operators, clustering and the Gap assertion."""

from __future__ import annotations

import logging
import warnings
from dataclasses import dataclass, field

import numpy as np
import scipy.linalg as sla
import scipy.sparse.linalg as spla
from numpy.typing import NDArray

from .fock import FiberOperator, FiberSpace, assemble_K, ground_sector_indices, number_operator
from .spin import cluster_multiplicities

log = logging.getLogger(__name__)

DENSE_THRESHOLD = 2500


class SolverError(ArithmeticError):
    """The eigensolver did not reach the requested residual."""


def fix_phase(v: NDArray[np.complex128]) -> NDArray[np.complex128]:
    """Rotate so the largest-magnitude component is real and positive."""
    i = int(np.argmax(np.abs(v)))
    if abs(v[i]) == 0:
        return v
    return v * (abs(v[i]) / v[i])


def lowest_eigenpairs_linear(
    matvec,
    n: int,
    m: int,
    diag: NDArray[np.float64] | None = None,
    seed: int = 0,
    tol: float = 1e-10,
    m_strict: int | None = None,
    rounds: int = 20,
    round_iters: int = 10,
    block_extra: int = 4,
) -> tuple[NDArray[np.float64], NDArray[np.complex128], NDArray[np.float64]]:
    """``m`` lowest eigenpairs of a Hermitian operator given by ``matvec``.

    Blocked LOBPCG with a shifted Jacobi preconditioner, run in short
    warm-started rounds until the first ``m_strict`` residuals drop below
    ``tol`` (scaled by the spectral magnitude). The block is a few vectors wider
    than ``m`` so exactly degenerate levels are captured. Returns (values,
    vectors, residual norms); trailing pairs may carry larger residuals.
    """
    k = min(m + block_extra, n)
    m_strict = m if m_strict is None else min(m_strict, m)
    if n <= max(3 * k, 64):
        dense = matvec(np.eye(n, dtype=complex))
        vals, vecs = sla.eigh(0.5 * (dense + dense.conj().T))
        vals, vecs = vals[:m], vecs[:, :m]
        res = np.linalg.norm(dense @ vecs - vecs * vals, axis=0)
        return vals, vecs, res
    rng = np.random.default_rng(seed)
    X = rng.standard_normal((n, k)) + 1j * rng.standard_normal((n, k))
    M = None
    if diag is not None:
        # bias the start block toward the lowest diagonal entries
        low = np.argsort(diag, kind="stable")[:k]
        X[low, np.arange(k)] += 10.0 * np.sqrt(n)
        ref = float(np.min(diag))
        # a floor near 1e-6 of the range stalls small blocks on degenerate diagonals
        floor = max(1e-2 * float(np.max(diag) - ref), 1e-12)
        dinv = 1.0 / np.maximum(np.abs(diag - ref), floor)

        def prec(R):
            R = np.asarray(R)
            return dinv.reshape((-1,) + (1,) * (R.ndim - 1)) * R

        M = spla.LinearOperator((n, n), matvec=prec, matmat=prec, dtype=complex)
    A = spla.LinearOperator((n, n), matvec=matvec, matmat=matvec, dtype=complex)
    X, _ = np.linalg.qr(X)
    for _ in range(rounds):
        with warnings.catch_warnings():
            warnings.simplefilter("ignore", UserWarning)
            _, X = spla.lobpcg(A, X, M=M, tol=tol, maxiter=round_iters, largest=False)
        X, _ = np.linalg.qr(X)
        # Rayleigh-Ritz on the current block
        AX = matvec(X)
        H = X.conj().T @ AX
        vals, c = sla.eigh(0.5 * (H + H.conj().T))
        X = X @ c
        AX = AX @ c
        res = np.linalg.norm(AX - X * vals, axis=0)
        scale = max(1.0, float(np.max(np.abs(vals))))
        if np.all(res[:m_strict] <= tol * scale):
            break
    return vals[:m], X[:, :m], res[:m]


@dataclass
class SpectrumResult:
    eigenvalues: NDArray[np.float64]
    vectors: NDArray[np.complex128]
    residuals: NDArray[np.float64]
    multiplicities: list[int]
    cluster_tol: float
    backend: str
    stamp: dict = field(default_factory=dict)

    @property
    def ground_energy(self) -> float:
        return float(self.eigenvalues[0])

    @property
    def gap(self) -> float:
        """Second distinct level minus the lowest one (nan if only one cluster was resolved)."""
        if len(self.multiplicities) < 2:
            return float("nan")
        return float(self.eigenvalues[self.multiplicities[0]] - self.eigenvalues[0])

    @property
    def ground_vector(self) -> NDArray[np.complex128]:
        return self.vectors[:, 0]

    def to_json(self) -> dict:
        return {
            "eigenvalues": [float(x) for x in self.eigenvalues],
            "residuals": [float(x) for x in self.residuals],
            "multiplicities": list(self.multiplicities),
            "gap": self.gap,
            "cluster_tol": self.cluster_tol,
            "backend": self.backend,
            **self.stamp,
        }


def certify_clusters(
    vals: NDArray, res: NDArray, multiplicities: list[int], cluster_tol: float, n_edges: int = 2
) -> None:
    """Check that residual bars (|lambda - theta| <= |r|) cannot merge the first
    ``n_edges`` cluster boundaries (the ones the gap and simplicity depend on)."""
    edges = np.cumsum(multiplicities)[:-1][:n_edges]
    for e in edges:
        if vals[e] - vals[e - 1] <= cluster_tol + res[e] + res[e - 1]:
            raise SolverError(
                f"cluster boundary at index {e} not resolved: spacing {vals[e] - vals[e - 1]:.3e}, "
                f"residuals {res[e - 1]:.1e}, {res[e]:.1e}"
            )


def lowest_eigenpairs(
    op: FiberOperator,
    m: int = 8,
    tol: float = 1e-10,
    cluster_tol: float = 1e-10,
    dense: bool = False,
    dense_threshold: int = DENSE_THRESHOLD,
    seed: int = 0,
    m_strict: int | None = None,
) -> SpectrumResult:
    """``m`` lowest eigenpairs with residual certification and clustering.

    The first ``m_strict`` pairs (default: all) must reach the residual
    tolerance; the others only need residual bars small enough that the
    clustering is unambiguous.
    """
    if m < 1:
        raise ValueError("need at least one eigenpair")
    n = op.dim
    m = min(m, n)
    m_strict = m if m_strict is None else min(m_strict, m)
    if not op.terms and op.diag is not None:
        # diagonal operator: exact
        order = np.argsort(op.diag, kind="stable")[:m]
        vals = np.asarray(op.diag, dtype=float)[order]
        vecs = np.zeros((n, m), dtype=complex)
        vecs[order, np.arange(m)] = 1.0
        res = np.zeros(m)
        backend = "diagonal"
    elif dense or n <= dense_threshold:
        H = op.to_dense()
        vals, vecs = sla.eigh(0.5 * (H + H.conj().T))
        vals, vecs = vals[:m], vecs[:, :m]
        res = np.linalg.norm(H @ vecs - vecs * vals, axis=0)
        backend = "dense"
    else:
        vals, vecs, res = lowest_eigenpairs_linear(
            op.matvec, n, m, diag=op.diagonal(), seed=seed, tol=tol, m_strict=m_strict
        )
        backend = "lobpcg"
    scale = max(1.0, float(np.max(np.abs(vals))))
    limit = max(tol, 1e-13) * scale * 10
    if np.any(res[:m_strict] > limit):
        raise SolverError(f"eigenpair residuals {res[:m_strict].max():.2e} exceed {limit:.2e}")
    vecs = np.column_stack([fix_phase(v) for v in vecs.T])
    mult = cluster_multiplicities(vals, cluster_tol)
    certify_clusters(vals, res, mult, cluster_tol)
    return SpectrumResult(vals, vecs, res, mult, cluster_tol, backend, dict(op.stamp))


def default_cluster_tol(g: float, delta_estimate: float) -> float:
    return max(1e-10, 1e-3 * g * g * abs(delta_estimate))


@dataclass
class GapAssertion:
    g: float
    P3: float
    sigma: float
    eta: float
    simple: bool
    gap_value: float
    holds: bool
    spectrum: SpectrumResult | None = None

    def to_json(self) -> dict:
        return {
            "g": self.g,
            "P3": self.P3,
            "sigma": self.sigma,
            "eta": self.eta,
            "simple": self.simple,
            "gap_value": self.gap_value,
            "holds": self.holds,
        }


def evaluate_gap(spec: SpectrumResult, g: float, P3: float, sigma: float, eta: float) -> GapAssertion:
    """(i) lowest level simple and (ii) gap >= eta sigma."""
    simple = spec.multiplicities[0] == 1
    gap = spec.gap
    holds = bool(simple and np.isfinite(gap) and gap >= eta * sigma)
    return GapAssertion(g, P3, sigma, eta, simple, gap, holds, spec)


def gap_assertion(
    space: FiberSpace,
    g: float,
    P3: float,
    eta: float,
    m: int = 8,
    tol: float = 1e-10,
    cluster_tol: float = 1e-10,
    dense: bool = False,
    seed: int = 0,
) -> GapAssertion:
    """Assemble ``K_{g, >= sigma}(P)`` on ``space`` and evaluate the Gap assertion."""
    K = assemble_K(space, g, P3)
    spec = lowest_eigenpairs(K, m=m, tol=tol, cluster_tol=cluster_tol, dense=dense, seed=seed)
    return evaluate_gap(spec, g, P3, space.grid.window.sigma_low, eta)


def photon_number_expectation(
    space: FiberSpace, state: NDArray, lo: float | None = None, hi: float | None = None
) -> float:
    """``<state, N state>`` with N counted over ``lo <= |k| <= hi``."""
    state = np.asarray(state)
    nrm = np.vdot(state, state).real
    if nrm <= 0:
        raise ValueError("zero state")
    N = number_operator(space, lo, hi)
    return float(np.vdot(state, N.matvec(state)).real / nrm)


def vacuum_overlap(space: FiberSpace, state: NDArray) -> float:
    """Norm of the projection onto span{y (x) phi_0 (x) Omega}."""
    state = np.asarray(state)
    idx = ground_sector_indices(space)
    return float(np.linalg.norm(state[idx]) / np.linalg.norm(state))


@dataclass
class EnergyBounds:
    g: float
    E0: float
    E_sigma: float
    E_tau: float
    sigma: float
    tau: float
    tol: float

    @property
    def free_ratio(self) -> float:
        """``(E_0 - E_g) / g^2`` at the finer cutoff."""
        return (self.E0 - self.E_tau) / self.g**2 if self.g else 0.0

    @property
    def shell_ratio(self) -> float:
        """``(E_sigma - E_tau) / (g^2 sigma^2)``."""
        return (self.E_sigma - self.E_tau) / (self.g**2 * self.sigma**2) if self.g else 0.0

    @property
    def ordered(self) -> bool:
        return self.E_tau <= self.E_sigma + self.tol and self.E_sigma <= self.E0 + self.tol


def energy_bounds_check(g: float, E0: float, E_sigma: float, E_tau: float, sigma: float, tau: float, tol: float = 1e-10) -> EnergyBounds:
    """Orderings ``E_tau <= E_sigma <= E_0``; raises on a violation beyond ``tol``."""
    rec = EnergyBounds(g, E0, E_sigma, E_tau, sigma, tau, tol)
    if not rec.ordered:
        raise ArithmeticError(
            f"energy ordering violated: E_tau={E_tau!r}, E_sigma={E_sigma!r}, E_0={E0!r}"
        )
    return rec
