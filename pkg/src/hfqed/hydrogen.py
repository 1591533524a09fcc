"""Internal hydrogen problem ``H_r = p^2/(2 mu) - 1/|r|`` on a bound-state basis.

Wavefunctions are the analytic hydrogenic orbitals with Bohr radius ``1/mu``.
Matrix elements of ``p_j = -i d/dx_j`` are evaluated by product quadrature
(Gauss-Laguerre in r, Gauss-Legendre x uniform on the sphere), which is exact
for these integrands up to rounding.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
import scipy.sparse as sp
import scipy.sparse.linalg as spla
from numpy.typing import NDArray
from scipy.special import eval_genlaguerre, roots_genlaguerre

MAX_N_INT = 3


def reduced_mass(m_el: float, m_n: float) -> float:
    if m_el <= 0 or m_n <= 0:
        raise ValueError(f"masses must be positive, got m_el={m_el}, m_n={m_n}")
    return m_el * m_n / (m_el + m_n)


def ground_energy(mu: float) -> float:
    """Lowest eigenvalue ``e_0 = -mu/2`` of the internal Hamiltonian."""
    if mu <= 0:
        raise ValueError("reduced mass must be positive")
    return -0.5 * mu


def level_energy(mu: float, n: int) -> float:
    return -mu / (2.0 * n * n)


def free_ground_energy(mu: float, P, total_mass: float) -> float:
    """``E_0(P) = e_0 + P^2 / 2M``."""
    p2 = float(np.dot(np.atleast_1d(P), np.atleast_1d(P)))
    return ground_energy(mu) + p2 / (2.0 * total_mass)


# ---------------------------------------------------------------------------
# radial functions


def radial(n: int, l: int, mu: float, r):
    """Normalized R_nl(r) for Bohr radius 1/mu."""
    a = 1.0 / mu
    rho = 2.0 * np.asarray(r, dtype=float) / (n * a)
    norm = math.sqrt((2.0 / (n * a)) ** 3 * math.factorial(n - l - 1) / (2 * n * math.factorial(n + l)))
    return norm * np.exp(-rho / 2) * rho**l * eval_genlaguerre(n - l - 1, 2 * l + 1, rho)


def radial_derivative(n: int, l: int, mu: float, r):
    a = 1.0 / mu
    r = np.asarray(r, dtype=float)
    c = 2.0 / (n * a)
    rho = c * r
    norm = math.sqrt(c**3 * math.factorial(n - l - 1) / (2 * n * math.factorial(n + l)))
    k = n - l - 1
    lag = eval_genlaguerre(k, 2 * l + 1, rho)
    dlag = -eval_genlaguerre(k - 1, 2 * l + 2, rho) if k >= 1 else np.zeros_like(rho)
    pw = rho**l
    dpw = l * rho ** (l - 1) if l >= 1 else np.zeros_like(rho)
    d_rho = np.exp(-rho / 2) * (-0.5 * pw * lag + dpw * lag + pw * dlag)
    return norm * c * d_rho


# ---------------------------------------------------------------------------
# angular parts: real harmonic polynomials A(x) (homogeneous of degree l)


def _real_harmonics(l: int):
    """List of (label, poly, grad) for real harmonic polynomials of degree l."""
    if l == 0:
        return [("s", lambda x: np.ones(len(x)), lambda x: np.zeros_like(x))]
    if l == 1:
        out = []
        for j, lab in enumerate("xyz"):
            def poly(x, j=j):
                return x[:, j]

            def grad(x, j=j):
                g = np.zeros_like(x)
                g[:, j] = 1.0
                return g

            out.append((lab, poly, grad))
        return out
    if l == 2:
        def g(fx, fy, fz):
            return lambda x: np.stack([fx(x), fy(x), fz(x)], axis=1)

        zero = lambda x: np.zeros(len(x))  # noqa: E731
        return [
            ("xy", lambda x: x[:, 0] * x[:, 1], g(lambda x: x[:, 1], lambda x: x[:, 0], zero)),
            ("yz", lambda x: x[:, 1] * x[:, 2], g(zero, lambda x: x[:, 2], lambda x: x[:, 1])),
            ("zx", lambda x: x[:, 2] * x[:, 0], g(lambda x: x[:, 2], zero, lambda x: x[:, 0])),
            (
                "x2-y2",
                lambda x: x[:, 0] ** 2 - x[:, 1] ** 2,
                g(lambda x: 2 * x[:, 0], lambda x: -2 * x[:, 1], zero),
            ),
            (
                "z2",
                lambda x: 2 * x[:, 2] ** 2 - x[:, 0] ** 2 - x[:, 1] ** 2,
                g(lambda x: -2 * x[:, 0], lambda x: -2 * x[:, 1], lambda x: 4 * x[:, 2]),
            ),
        ]
    raise ValueError(f"angular momentum l={l} not supported (max {MAX_N_INT - 1})")


def _real_to_complex(l: int) -> NDArray[np.complex128]:
    """Columns: complex |l, m> (m = -l..l) expanded in the real harmonics of degree l."""
    s2 = 1.0 / math.sqrt(2.0)
    if l == 0:
        return np.ones((1, 1), dtype=complex)
    if l == 1:  # real order x, y, z
        u = np.zeros((3, 3), dtype=complex)
        u[:, 0] = [s2, -1j * s2, 0]  # m=-1: (x - iy)/sqrt2
        u[:, 1] = [0, 0, 1]  # m=0
        u[:, 2] = [-s2, -1j * s2, 0]  # m=+1: -(x + iy)/sqrt2
        return u
    # real order xy, yz, zx, x2-y2, z2
    u = np.zeros((5, 5), dtype=complex)
    u[:, 0] = [-1j * s2, 0, 0, s2, 0]  # m=-2: (x2-y2 - i 2xy)/..
    u[:, 1] = [0, -1j * s2, s2, 0, 0]  # m=-1: (zx - i yz)/sqrt2
    u[:, 2] = [0, 0, 0, 0, 1]  # m=0
    u[:, 3] = [0, -1j * s2, -s2, 0, 0]  # m=+1: -(zx + i yz)/sqrt2
    u[:, 4] = [1j * s2, 0, 0, s2, 0]  # m=+2
    return u


def _sphere_rule(n_theta: int = 10):
    ct, wt = np.polynomial.legendre.leggauss(n_theta)
    nph = 2 * n_theta
    phis = 2 * math.pi * (np.arange(nph) + 0.5) / nph
    st = np.sqrt(1 - ct**2)
    dirs = np.stack(
        [np.outer(st, np.cos(phis)).ravel(), np.outer(st, np.sin(phis)).ravel(), np.repeat(ct, nph)],
        axis=1,
    )
    w = np.repeat(wt, nph) * (2 * math.pi / nph)
    return dirs, w


@dataclass(frozen=True)
class InternalState:
    n: int
    l: int
    m: int

    @property
    def label(self) -> str:
        return f"{self.n}{'spdf'[self.l]}{self.m:+d}" if self.l else f"{self.n}s"


@dataclass(frozen=True)
class InternalBasis:
    """Bound states with ``n <= n_int``, ordered by (n, l, m); ground state first."""

    mu: float
    n_int: int = 2
    states: tuple[InternalState, ...] = field(init=False)

    def __post_init__(self) -> None:
        if self.mu <= 0:
            raise ValueError("reduced mass must be positive")
        if not 1 <= self.n_int <= MAX_N_INT:
            raise ValueError(f"n_int must be in 1..{MAX_N_INT}")
        states = [
            InternalState(n, l, m)
            for n in range(1, self.n_int + 1)
            for l in range(n)
            for m in range(-l, l + 1)
        ]
        object.__setattr__(self, "states", tuple(states))

    def __len__(self) -> int:
        return len(self.states)

    @property
    def energies(self) -> NDArray[np.float64]:
        return np.array([level_energy(self.mu, s.n) for s in self.states])

    @property
    def e0(self) -> float:
        return ground_energy(self.mu)

    def excitation_gap(self) -> float:
        """``e_1 - e_0 = 3 mu / 8``."""
        return level_energy(self.mu, 2) - level_energy(self.mu, 1)


def _pair_integral(basis: InternalBasis, sa: InternalState, sb: InternalState, n_rad: int, kind: str):
    """Three components of <a| d_j |b> (kind='grad') or <a| x_j |b> (kind='pos'),
    both in the real-harmonic basis. Returns array of shape (3, 2l_a+1, 2l_b+1)."""
    mu = basis.mu
    s = mu * (1.0 / sa.n + 1.0 / sb.n)
    x, w = roots_genlaguerre(n_rad, 0.0)
    r = x / s
    wr = w * np.exp(x) / s  # int_0^inf F(r) dr ~ sum wr F(r)
    dirs, wang = _sphere_rule()
    ha = _real_harmonics(sa.l)
    hb = _real_harmonics(sb.l)
    Ra = radial(sa.n, sa.l, mu, r)
    Rb = radial(sb.n, sb.l, mu, r)
    dRb = radial_derivative(sb.n, sb.l, mu, r)
    out = np.zeros((3, len(ha), len(hb)))
    norm_a = [math.sqrt(np.sum(wang * pa(dirs) ** 2)) for _, pa, _ in ha]
    norm_b = [math.sqrt(np.sum(wang * pb(dirs) ** 2)) for _, pb, _ in hb]
    for ia, (_, pa, _) in enumerate(ha):
        Aa = pa(dirs) / norm_a[ia]
        for ib, (_, pb, gb) in enumerate(hb):
            Ab = pb(dirs) / norm_b[ib]
            gAb = gb(dirs) / norm_b[ib]
            for j in range(3):
                if kind == "pos":
                    ang = np.sum(wang * Aa * dirs[:, j] * Ab)
                    out[j, ia, ib] = ang * np.sum(wr * Ra * Rb * r**3)
                else:
                    # d_j [R(r) r^-l A_hom(x)] = (R' - l R / r) xhat_j A + (R / r) grad_j A_hom
                    ang1 = np.sum(wang * Aa * dirs[:, j] * Ab)
                    ang2 = np.sum(wang * Aa * gAb[:, j])
                    rad1 = np.sum(wr * Ra * (dRb - sb.l * Rb / r) * r**2)
                    rad2 = np.sum(wr * Ra * Rb * r)
                    out[j, ia, ib] = ang1 * rad1 + ang2 * rad2
    return out


def _assemble(basis: InternalBasis, n_rad: int, kind: str) -> NDArray[np.complex128]:
    N = len(basis)
    mats = np.zeros((3, N, N), dtype=complex)
    # group states by (n, l) shells, each contiguous in m
    blocks: list[tuple[int, int, int]] = []
    idx = 0
    for n in range(1, basis.n_int + 1):
        for l in range(n):
            blocks.append((n, l, idx))
            idx += 2 * l + 1
    for na, la, ia in blocks:
        ua = _real_to_complex(la)
        for nb, lb, ib in blocks:
            if abs(la - lb) != 1:
                continue
            real = _pair_integral(basis, InternalState(na, la, 0), InternalState(nb, lb, 0), n_rad, kind)
            ub = _real_to_complex(lb)
            for j in range(3):
                mats[j, ia : ia + 2 * la + 1, ib : ib + 2 * lb + 1] = ua.conj().T @ real[j] @ ub
    if kind == "grad":
        mats = -1j * mats
    return mats


@dataclass(frozen=True)
class MomentumElements:
    """Per-axis matrices ``<a|p_j|b>`` over an :class:`InternalBasis`."""

    basis: InternalBasis
    p: NDArray[np.complex128]  # (3, N, N)
    convergence: float  # max change between n_rad and 2 n_rad quadrature

    def hermiticity_error(self) -> float:
        return float(max(np.abs(m - m.conj().T).max() for m in self.p))


def momentum_elements(basis: InternalBasis, n_rad: int = 24, check_tol: float = 1e-11) -> MomentumElements:
    p1 = _assemble(basis, n_rad, "grad")
    p2 = _assemble(basis, 2 * n_rad, "grad")
    diff = float(np.abs(p1 - p2).max())
    if diff > check_tol * max(1.0, basis.mu):
        raise RuntimeError(f"momentum quadrature not converged (change {diff:.3e})")
    return MomentumElements(basis, p2, diff)


def position_elements(basis: InternalBasis, n_rad: int = 48) -> NDArray[np.complex128]:
    """``<a|x_j|b>``; used as an independent check via ``p = i mu [H, x]``."""
    return _assemble(basis, n_rad, "pos")


# ---------------------------------------------------------------------------
# reduced resolvent of the internal Hamiltonian in the p-wave channel


def ground_momentum_variance(mu: float) -> float:
    """``<phi_0| p_j^2 |phi_0> = mu^2 / 3`` for each axis."""
    return mu * mu / 3.0


@dataclass(frozen=True)
class ResolventValue:
    basis_sum: float
    sternheimer: float
    truncation_bound: float  # upper bound on sternheimer - basis_sum from the missing weight

    @property
    def difference(self) -> float:
        return self.sternheimer - self.basis_sum


def resolvent_basis_sum(w, elements: MomentumElements, j: int = 3):
    """``sum_{n != 0} |<n|p_j|0>|^2 / (e_n - e_0 + w)`` over the finite basis."""
    basis = elements.basis
    col = elements.p[j - 1][:, 0]
    weights = np.abs(col[1:]) ** 2
    gaps = basis.energies[1:] - basis.e0
    w_arr = np.asarray(w, dtype=float)
    if np.any(w_arr <= 0):
        raise ValueError("resolvent shift must be positive")
    return np.sum(weights / (gaps + w_arr[..., None]), axis=-1)


def _sternheimer_once(w: float, mu: float, n_pts: int, r_max: float) -> float:
    h = r_max / (n_pts + 1)
    r = h * np.arange(1, n_pts + 1)
    e0 = ground_energy(mu)
    source = radial_derivative(1, 0, mu, r) / math.sqrt(3.0)  # radial part of p_j phi_0 (up to phase)
    diag = 1.0 / (mu * h * h) + 1.0 / (mu * r * r) - 1.0 / r - e0 + w
    off = np.full(n_pts - 1, -1.0 / (2.0 * mu * h * h))
    mat = sp.diags([off, diag, off], [-1, 0, 1], format="csc")
    rhs = r * source
    u = spla.spsolve(mat, rhs)
    return float(h * np.sum(u * rhs))


def resolvent_sternheimer(w: float, mu: float, n_pts: int = 4000, r_max: float | None = None) -> float:
    """Full (bound + continuum) ``<p_j phi_0, (H_r - e_0 + w)^-1 p_j phi_0>`` from a
    radial finite-difference solve in the l = 1 channel, Richardson-extrapolated."""
    if w <= 0:
        raise ValueError("resolvent shift must be positive")
    if r_max is None:
        r_max = 60.0 / mu
    coarse = _sternheimer_once(w, mu, n_pts, r_max)
    fine = _sternheimer_once(w, mu, 2 * n_pts + 1, r_max)
    return (4.0 * fine - coarse) / 3.0


def reduced_resolvent_quadratic_form(w: float, elements: MomentumElements, j: int = 3) -> ResolventValue:
    basis = elements.basis
    a = float(resolvent_basis_sum(w, elements, j))
    b = resolvent_sternheimer(w, basis.mu)
    col = elements.p[j - 1][:, 0]
    missing = ground_momentum_variance(basis.mu) - float(np.sum(np.abs(col[1:]) ** 2))
    next_gap = level_energy(basis.mu, basis.n_int + 1) - basis.e0
    bound = max(missing, 0.0) / (next_gap + w)
    return ResolventValue(a, b, bound)
