"""Truncated Fock space and the fiber operators on C^4 x C^{N_r} x Fock.

Operators are kept as a diagonal plus a short list of Kronecker terms
``L (x) F`` with ``L`` a dense matrix on spin x internal (4 N_r square) and
``F`` a sparse matrix on the photon Fock space. With the state reshaped to
``V[(spin, internal), fock]`` a term acts as ``L @ V @ F.T``.

Field operators are taken in the dipole approximation (couplings at r = 0),
where the (P - P_ph) . A terms of the two particles cancel and the interaction
reduces to::

    W = -(g/mu) p_r . A(0) + (g^2 / 2 mu) :A(0)^2:
        - (g / 2 m_el) sigma_el . B(0) + (g / 2 m_n) sigma_n . B(0)
"""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
import scipy.sparse as sp
import scipy.sparse.linalg as spla
from numpy.typing import NDArray

from .hydrogen import InternalBasis, MomentumElements, momentum_elements
from .photons import ModeGrid, grid_h_A, grid_h_B
from .spin import IDENTITY4, pauli_el, pauli_n

HERMITIAN_TOL = 1e-12


@dataclass(frozen=True)
class Masses:
    m_el: float = 1.0
    m_n: float = 1.0

    def __post_init__(self) -> None:
        if self.m_el <= 0 or self.m_n <= 0:
            raise ValueError("masses must be positive")

    @property
    def total(self) -> float:
        return self.m_el + self.m_n

    @property
    def reduced(self) -> float:
        return self.m_el * self.m_n / (self.m_el + self.m_n)


class FockBasis:
    """Occupation states over ``n_modes`` modes with at most ``n_max`` photons.

    States are stored as sorted tuples of mode indices (a mode appears once per
    photon), ordered by photon number and then lexicographically; the vacuum is
    index 0.
    """

    def __init__(self, n_modes: int, n_max: int = 2):
        if n_modes < 0 or n_max < 0:
            raise ValueError("mode count and n_max must be non-negative")
        self.n_modes = n_modes
        self.n_max = n_max
        states: list[tuple[int, ...]] = []
        for n in range(n_max + 1):
            states.extend(itertools.combinations_with_replacement(range(n_modes), n))
        self.states = states
        self.index = {s: i for i, s in enumerate(states)}
        self.number = np.array([len(s) for s in states], dtype=np.int64)
        # creation table for states below the cap: T[u, i] = index of u + {i}, amp = sqrt(n_i(u) + 1)
        n_below = int(np.sum(self.number < n_max))
        self.n_below = n_below
        T = np.zeros((n_below, n_modes), dtype=np.int64)
        A = np.zeros((n_below, n_modes))
        for u in range(n_below):
            su = states[u]
            for i in range(n_modes):
                T[u, i] = self.index[tuple(sorted(su + (i,)))]
                A[u, i] = math.sqrt(su.count(i) + 1)
        self._T = T
        self._A = A

    def __len__(self) -> int:
        return len(self.states)

    @staticmethod
    def expected_dimension(n_modes: int, n_max: int) -> int:
        return sum(math.comb(n_modes + n - 1, n) for n in range(n_max + 1))

    def occupations(self) -> sp.csr_matrix:
        """Sparse (states x modes) matrix of occupation numbers."""
        rows, cols, vals = [], [], []
        for si, s in enumerate(self.states):
            for i in set(s):
                rows.append(si)
                cols.append(i)
                vals.append(s.count(i))
        return sp.csr_matrix((vals, (rows, cols)), shape=(len(self), self.n_modes))

    # -- single-mode operators -------------------------------------------------

    def creator(self, i: int) -> sp.csr_matrix:
        if not 0 <= i < self.n_modes:
            raise IndexError(f"mode {i} out of range")
        rows = self._T[:, i]
        cols = np.arange(self.n_below)
        return sp.csr_matrix((self._A[:, i], (rows, cols)), shape=(len(self), len(self)))

    def annihilator(self, i: int) -> sp.csr_matrix:
        return self.creator(i).conj().T.tocsr()

    # -- field operators ------------------------------------------------------

    def creation_part(self, f) -> sp.csr_matrix:
        """``sum_i f_i a_i^dagger``."""
        f = np.asarray(f, dtype=complex)
        if f.shape != (self.n_modes,):
            raise ValueError(f"expected {self.n_modes} mode amplitudes, got {f.shape}")
        data = (self._A * f[None, :]).ravel()
        rows = self._T.ravel()
        cols = np.repeat(np.arange(self.n_below), self.n_modes)
        return sp.csr_matrix((data, (rows, cols)), shape=(len(self), len(self)))

    def field(self, f) -> sp.csr_matrix:
        """``Phi = sum_i (f_i a_i^dagger + conj(f_i) a_i)``; ``f`` already carries sqrt(weight)."""
        c = self.creation_part(f)
        return (c + c.conj().T).tocsr()

    def quadratic(self, pair=None, hop=None) -> sp.csr_matrix:
        """``sum_il pair_il a_i^+ a_l^+ + h.c. + sum_il hop_il a_i^+ a_l`` (Wick ordered)."""
        M = self.n_modes
        dim = len(self)
        out = sp.csr_matrix((dim, dim), dtype=complex)
        if M == 0:
            return out
        if hop is not None:
            hop = np.asarray(hop, dtype=complex)
            # a_l maps T[u, l] -> u with amp A[u, l]; then a_i^+ maps u -> T[u, i]
            rows = np.repeat(self._T, M, axis=1).ravel()
            cols = np.tile(self._T, (1, M)).ravel()
            amp = (self._A[:, :, None] * self._A[:, None, :] * hop[None, :, :]).ravel()
            keep = amp != 0
            out = out + sp.csr_matrix((amp[keep], (rows[keep], cols[keep])), shape=(dim, dim))
        if pair is not None and self.n_max >= 2:
            pair = np.asarray(pair, dtype=complex)
            n2 = int(np.sum(self.number < self.n_max - 1))
            v = self._T[:n2]  # u + {l}
            amp_l = self._A[:n2]
            # then a_i^+ on v: T[v, i], A[v, i]
            tgt = self._T[v]  # (n2, M_l, M_i)
            amp_i = self._A[v]
            amp = amp_l[:, :, None] * amp_i * pair.T[None, :, :]
            rows = tgt.ravel()
            cols = np.repeat(np.arange(n2), M * M)
            amp = amp.ravel()
            keep = amp != 0
            c = sp.csr_matrix((amp[keep], (rows[keep], cols[keep])), shape=(dim, dim))
            out = out + c + c.conj().T
        return out.tocsr()

    def embed_indices(self, coarse: FockBasis) -> NDArray[np.int64]:
        """Indices in ``self`` of the states of ``coarse`` (a basis on a prefix of the modes)."""
        if coarse.n_modes > self.n_modes or coarse.n_max > self.n_max:
            raise ValueError("coarse basis must live on a prefix of the modes")
        return np.array([self.index[s] for s in coarse.states], dtype=np.int64)


@dataclass
class FiberOperator:
    """``diag + sum_t L_t (x) F_t`` on C^4 x C^{N_r} x Fock (see module docstring)."""

    n_internal: int
    fock: FockBasis
    diag: NDArray[np.float64] | None = None
    terms: list[tuple[NDArray[np.complex128], sp.csr_matrix]] = field(default_factory=list)
    stamp: dict = field(default_factory=dict)

    @property
    def n_left(self) -> int:
        return 4 * self.n_internal

    @property
    def shape(self) -> tuple[int, int]:
        n = self.n_left * len(self.fock)
        return (n, n)

    @property
    def dim(self) -> int:
        return self.shape[0]

    def __add__(self, other: FiberOperator) -> FiberOperator:
        if other.fock is not self.fock or other.n_internal != self.n_internal:
            raise ValueError("operators live on different spaces")
        if self.diag is None:
            diag = other.diag
        elif other.diag is None:
            diag = self.diag
        else:
            diag = self.diag + other.diag
        return FiberOperator(
            self.n_internal, self.fock, diag, self.terms + other.terms, {**self.stamp, **other.stamp}
        )

    def scaled(self, c: float) -> FiberOperator:
        diag = None if self.diag is None else c * self.diag
        return FiberOperator(self.n_internal, self.fock, diag, [(c * L, F) for L, F in self.terms], dict(self.stamp))

    def matvec(self, v: NDArray) -> NDArray[np.complex128]:
        v = np.asarray(v)
        single = v.ndim == 1
        X = v.reshape(self.dim, -1)
        out = np.zeros(X.shape, dtype=complex)
        if self.diag is not None:
            out += self.diag[:, None] * X
        nf, nl, b = len(self.fock), self.n_left, X.shape[1]
        if self.terms:
            # (nf, nl * b) layout so each sparse factor is applied once for all columns
            Vt = X.reshape(nl, nf, b).transpose(1, 0, 2).reshape(nf, nl * b)
            acc = np.zeros((nl, nf, b), dtype=complex)
            for L, F in self.terms:
                Z = np.asarray(F @ Vt).reshape(nf, nl, b)
                acc += np.einsum("ij,fjc->ifc", L, Z, optimize=True)
            out += acc.reshape(nl * nf, b)
        return out.ravel() if single else out

    def as_linear_operator(self, shift: float = 0.0) -> spla.LinearOperator:
        def mv(v):
            out = self.matvec(v)
            if shift:
                out -= shift * np.asarray(v).reshape(out.shape)
            return out

        return spla.LinearOperator(self.shape, matvec=mv, matmat=mv, rmatvec=mv, dtype=complex)

    def diagonal(self) -> NDArray[np.float64]:
        """Real part of the main diagonal (used for Jacobi preconditioning)."""
        d = np.zeros(self.dim) if self.diag is None else np.array(self.diag, dtype=float)
        for L, F in self.terms:
            d += np.real(np.outer(np.diag(L), F.diagonal())).ravel()
        return d

    def to_sparse(self) -> sp.csr_matrix:
        out = sp.csr_matrix(self.shape, dtype=complex)
        if self.diag is not None:
            out = out + sp.diags(self.diag.astype(complex), format="csr")
        for L, F in self.terms:
            out = out + sp.kron(sp.csr_matrix(L), F, format="csr")
        return out.tocsr()

    def to_dense(self) -> NDArray[np.complex128]:
        return self.to_sparse().toarray()

    def hermiticity_error(self) -> float:
        """Max-norm of ``H - H^dagger``; computed term-wise to avoid forming H."""
        err = 0.0
        if self.diag is not None and np.iscomplexobj(self.diag):
            err = max(err, float(np.abs(self.diag.imag).max()))
        if self.dim <= 20000:
            m = self.to_sparse()
            d = m - m.conj().T
            return float(np.abs(d.data).max()) if d.nnz else 0.0
        for L, F in self.terms:
            dl = np.abs(L - L.conj().T).max() * (np.abs(F.data).max() if F.nnz else 0.0)
            df = (F - F.conj().T)
            dfm = float(np.abs(df.data).max()) if df.nnz else 0.0
            err = max(err, float(dl), dfm * float(np.abs(L).max()))
        return err

    def export_triplets(self, path: str | Path) -> None:
        """Write nonzeros as ``row col re im`` lines (0-based, header line with the dimension)."""
        m = self.to_sparse().tocoo()
        with Path(path).open("w") as fh:
            fh.write(f"# dim {self.dim} nnz {m.nnz}\n")
            for r, c, v in zip(m.row, m.col, m.data):
                fh.write(f"{r} {c} {v.real:.17g} {v.imag:.17g}\n")


def read_triplets(path: str | Path) -> sp.csr_matrix:
    lines = Path(path).read_text().splitlines()
    dim = int(lines[0].split()[2])
    rows, cols, vals = [], [], []
    for line in lines[1:]:
        r, c, re, im = line.split()
        rows.append(int(r))
        cols.append(int(c))
        vals.append(float(re) + 1j * float(im))
    return sp.csr_matrix((vals, (rows, cols)), shape=(dim, dim))


# ---------------------------------------------------------------------------
# the truncated space and operator assembly


@dataclass
class FiberSpace:
    """Everything needed to assemble operators on one truncated space."""

    grid: ModeGrid
    internal: InternalBasis
    masses: Masses
    n_max: int = 2
    fock: FockBasis = field(init=False)
    elements: MomentumElements = field(init=False)

    def __post_init__(self) -> None:
        self.fock = FockBasis(len(self.grid), self.n_max)
        self.elements = momentum_elements(self.internal)
        sw = np.sqrt(self.grid.weight)
        self.f_A = grid_h_A(self.grid) * sw[:, None]  # (M, 3)
        self.f_B = grid_h_B(self.grid) * sw[:, None]
        occ = self.fock.occupations()
        self._photon_energy = occ @ self.grid.kabs if len(self.grid) else np.zeros(len(self.fock))
        self._photon_momentum = occ @ self.grid.k if len(self.grid) else np.zeros((len(self.fock), 3))

    @property
    def n_internal(self) -> int:
        return len(self.internal)

    @property
    def dim(self) -> int:
        return 4 * self.n_internal * len(self.fock)

    def _tile(self, fock_values: NDArray) -> NDArray:
        return np.tile(fock_values, 4 * self.n_internal)

    def _internal_diag(self, values: NDArray) -> NDArray:
        return np.tile(np.repeat(values, len(self.fock)), 4)

    def photon_energy(self) -> NDArray[np.float64]:
        """Diagonal of ``H_ph`` on the full space."""
        return self._tile(self._photon_energy)

    def empty(self, **stamp) -> FiberOperator:
        return FiberOperator(self.n_internal, self.fock, None, [], stamp)

    def shell_mask(self, lo: float, hi: float) -> NDArray[np.bool_]:
        return self.grid.in_window(lo, hi)


def _P3(P) -> NDArray[np.float64]:
    P = np.atleast_1d(np.asarray(P, dtype=float))
    if P.shape == (1,):
        return np.array([0.0, 0.0, P[0]])
    if P.shape != (3,):
        raise ValueError("total momentum must be a scalar (along e3) or a 3-vector")
    return P


def assemble_K0(space: FiberSpace, P) -> FiberOperator:
    """``H_r + (P - P_ph)^2 / 2M + H_ph``; diagonal in the product basis."""
    P = _P3(P)
    M = space.masses.total
    kin = np.sum((P[None, :] - space._photon_momentum) ** 2, axis=1) / (2 * M)
    fock_part = kin + space._photon_energy
    e = space.internal.energies
    diag = (e[:, None] + fock_part[None, :]).ravel()
    diag = np.tile(diag, 4)
    return FiberOperator(space.n_internal, space.fock, diag, [], {"P": P.tolist(), "g": 0.0})


def _mask(f: NDArray, mask: NDArray[np.bool_] | None) -> NDArray:
    if mask is None:
        return f
    return np.where(mask[:, None], f, 0.0)


def _a_squared(space: FiberSpace, fa: NDArray, fb: NDArray | None = None) -> sp.csr_matrix:
    """``sum_j :A_j A'_j:`` symmetrized, for coupling samples fa, fb (defaults fb = fa)."""
    if fb is None:
        fb = fa
    pair = 0.5 * (fa @ fb.T + fb @ fa.T)  # coefficient of a_i^+ a_l^+
    hop = fa @ fb.conj().T + fb @ fa.conj().T  # coefficient of a_i^+ a_l
    return space.fock.quadratic(pair=pair, hop=hop)


def _hermitize(F: sp.csr_matrix) -> sp.csr_matrix:
    return (0.5 * (F + F.conj().T)).tocsr()


def assemble_W(
    space: FiberSpace,
    g: float,
    P=0.0,
    mode: str = "dipole",
    couple: NDArray[np.bool_] | None = None,
) -> FiberOperator:
    """Dipole interaction ``W``; ``couple`` restricts the coupling to a subset of modes."""
    if mode != "dipole":
        raise ValueError("only the dipole interaction is implemented")
    mu = space.masses.reduced
    me, mn = space.masses.m_el, space.masses.m_n
    op = space.empty(g=g, P=_P3(P).tolist())
    if g == 0.0 or len(space.grid) == 0:
        return op
    fA = _mask(space.f_A, couple)
    fB = _mask(space.f_B, couple)
    Nr = space.n_internal
    terms = []
    for j in range(3):
        Aj = _hermitize(space.fock.field(fA[:, j]))
        L = np.kron(IDENTITY4, space.elements.p[j])
        terms.append((-(g / mu) * L, Aj))
    terms.append(((g * g / (2 * mu)) * np.eye(4 * Nr, dtype=complex), _hermitize(_a_squared(space, fA))))
    eye_int = np.eye(Nr, dtype=complex)
    for j in range(1, 4):
        Bj = _hermitize(space.fock.field(fB[:, j - 1]))
        S = -(g / (2 * me)) * pauli_el(j) + (g / (2 * mn)) * pauli_n(j)
        terms.append((np.kron(S, eye_int), Bj))
    op.terms = terms
    return op


def assemble_K(space: FiberSpace, g: float, P=0.0) -> FiberOperator:
    op = assemble_K0(space, P) + assemble_W(space, g, P)
    op.stamp = {"g": g, "P": _P3(P).tolist(), "window": [space.grid.window.sigma_low, space.grid.window.sigma_high]}
    return op


def assemble_K_restricted(space: FiberSpace, g: float, P, sigma: float) -> FiberOperator:
    """``H_{g, >= sigma}`` restricted to this (finer) space: free part on all modes,
    interaction only through modes with ``|k| >= sigma``."""
    couple = space.grid.kabs >= sigma * (1 - 1e-12)
    return assemble_K0(space, P) + assemble_W(space, g, P, couple=couple)


def assemble_W_shell(space: FiberSpace, g: float, P, tau: float, sigma: float) -> FiberOperator:
    """Interaction of the shell ``tau <= |k| < sigma`` on the ``[tau, Lambda]`` space.

    Linear terms use shell couplings only; the Wick-ordered square contributes
    ``:A_s^2: + 2 :A_{>=sigma} . A_s:``.
    """
    if tau > sigma:
        raise ValueError("need tau <= sigma")
    if abs(space.grid.window.sigma_low - tau) > 1e-12 * max(tau, 1.0):
        raise ValueError("space must be built on the [tau, Lambda] grid")
    shell = space.grid.kabs < sigma * (1 - 1e-12)
    upper = ~shell
    mu = space.masses.reduced
    me, mn = space.masses.m_el, space.masses.m_n
    op = space.empty(g=g, P=_P3(P).tolist(), shell=[tau, sigma])
    if g == 0.0 or not shell.any():
        return op
    fA_s = _mask(space.f_A, shell)
    fA_u = _mask(space.f_A, upper)
    fB_s = _mask(space.f_B, shell)
    Nr = space.n_internal
    terms = []
    for j in range(3):
        terms.append((-(g / mu) * np.kron(IDENTITY4, space.elements.p[j]), _hermitize(space.fock.field(fA_s[:, j]))))
    sq = _a_squared(space, fA_s) + _a_squared(space, fA_u, fA_s) * 2.0
    terms.append(((g * g / (2 * mu)) * np.eye(4 * Nr, dtype=complex), _hermitize(sq)))
    eye_int = np.eye(Nr, dtype=complex)
    for j in range(1, 4):
        S = -(g / (2 * me)) * pauli_el(j) + (g / (2 * mn)) * pauli_n(j)
        terms.append((np.kron(S, eye_int), _hermitize(space.fock.field(fB_s[:, j - 1]))))
    op.terms = terms
    return op


# ---------------------------------------------------------------------------
# number operators and projectors (as diagonal vectors / index sets)


def number_operator(space: FiberSpace, lo: float | None = None, hi: float | None = None) -> FiberOperator:
    """``N`` counted over modes with ``lo <= |k| <= hi`` (all modes by default)."""
    mask = np.ones(len(space.grid), dtype=bool)
    if lo is not None or hi is not None:
        mask = space.grid.in_window(lo if lo is not None else 0.0, hi if hi is not None else np.inf)
    counts = space.fock.occupations() @ mask.astype(float) if len(space.grid) else np.zeros(len(space.fock))
    return FiberOperator(space.n_internal, space.fock, space._tile(np.asarray(counts)), [], {})


def ground_sector_indices(space: FiberSpace) -> NDArray[np.int64]:
    """Indices of ``y (x) phi_0 (x) Omega`` for the 4 spin basis vectors y."""
    nf = len(space.fock)
    return np.array([s * space.n_internal * nf for s in range(4)], dtype=np.int64)


def vacuum_indices(space: FiberSpace) -> NDArray[np.int64]:
    nf = len(space.fock)
    return np.arange(4 * space.n_internal) * nf


def pi0_projector(space: FiberSpace) -> sp.csr_matrix:
    idx = ground_sector_indices(space)
    return sp.csr_matrix((np.ones(len(idx)), (idx, idx)), shape=(space.dim, space.dim))


def vacuum_projector(space: FiberSpace) -> sp.csr_matrix:
    idx = vacuum_indices(space)
    return sp.csr_matrix((np.ones(len(idx)), (idx, idx)), shape=(space.dim, space.dim))


def embed_vector(coarse: FiberSpace, fine: FiberSpace, v: NDArray) -> NDArray[np.complex128]:
    """Map ``Phi`` on the coarse space to ``Phi (x) Omega_shell`` on the fine space."""
    if not coarse.grid.is_prefix_of(fine.grid):
        raise ValueError("grids are not nested")
    if coarse.n_internal != fine.n_internal:
        raise ValueError("internal bases differ")
    idx = fine.fock.embed_indices(coarse.fock)
    nl = 4 * coarse.n_internal
    out = np.zeros((nl, len(fine.fock)), dtype=complex)
    out[:, idx] = np.asarray(v).reshape(nl, len(coarse.fock))
    return out.ravel()
