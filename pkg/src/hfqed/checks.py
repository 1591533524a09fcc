"""Invariant checks shared by ``hfqed check`` and the acceptance tests.

Each check returns a :class:`CheckResult` with the measured quantities, so
callers can print them; none of them raises on a failed property.
"""

from __future__ import annotations

import math
import time
from dataclasses import dataclass, field

import numpy as np

from .config import ScanConfig
from .feshbach import (
    delta_from_gammas,
    delta_lower_bound,
    effective_matrix,
    feshbach_inequality_min,
    feshbach_operator,
    gamma0_closed_form,
    gamma_integrals,
)
from .fock import FiberSpace, Masses, assemble_K, assemble_K0
from .hydrogen import InternalBasis, free_ground_energy
from .photons import CutoffWindow, build_grid
from .scan import ir_scan, monotone
from .spectrum import default_cluster_tol, lowest_eigenpairs, photon_number_expectation
from .spin import coupling_eigenvalues, coupling_matrix, spin_dot


@dataclass
class CheckResult:
    name: str
    passed: bool
    metrics: dict = field(default_factory=dict)
    seconds: float = 0.0

    def line(self) -> str:
        parts = ", ".join(f"{k}={_fmt(v)}" for k, v in self.metrics.items())
        return f"{'PASS' if self.passed else 'FAIL'} {self.name} ({self.seconds:.1f}s): {parts}"


def _fmt(v) -> str:
    if isinstance(v, float):
        return f"{v:.4g}"
    if isinstance(v, (list, tuple)):
        return "[" + ", ".join(_fmt(x) for x in v) + "]"
    return str(v)


def _timed(fn):
    def wrapper(*args, **kwargs):
        t0 = time.perf_counter()
        res = fn(*args, **kwargs)
        res.seconds = time.perf_counter() - t0
        return res

    wrapper.__name__ = fn.__name__
    wrapper.__doc__ = fn.__doc__
    return wrapper


def _space(sigma: float, Lambda: float, masses: Masses, n_radial=1, n_angular=8, n_int=2, n_max=2) -> FiberSpace:
    grid = build_grid(CutoffWindow(sigma, Lambda), n_radial, n_angular)
    return FiberSpace(grid, InternalBasis(masses.reduced, n_int), masses, n_max)


@_timed
def check_pauli(n: int = 1000, seed: int = 0, tol: float = 1e-12) -> CheckResult:
    """Closed-form coupling spectrum and the (a.sigma)^2 identity on random vectors."""
    rng = np.random.default_rng(seed)
    worst_eig = 0.0
    for a in rng.standard_normal((n, 3)) * 3:
        num = np.linalg.eigvalsh(coupling_matrix(a))
        worst_eig = max(worst_eig, float(np.max(np.abs(num - np.array(coupling_eigenvalues(a))))))
    worst_sq = 0.0
    eye = np.eye(4)
    for a in rng.standard_normal((n, 3)) + 1j * rng.standard_normal((n, 3)):
        s2 = np.sum(a * a)
        for species in ("el", "n"):
            S = spin_dot(a, species)
            worst_sq = max(worst_sq, float(np.max(np.abs(S @ S - s2 * eye))))
    ok = worst_eig <= tol and worst_sq <= tol
    return CheckResult("pauli", ok, {"max_eig_err": worst_eig, "max_square_err": worst_sq})


@_timed
def check_splitting_integrals(
    masses: Masses = Masses(), Lambda: float = 1.0, sigmas=(0.5, 0.125, 1 / 64), P3s=(0.0, 0.1, 0.3)
) -> CheckResult:
    """Sum rule on every grid, P = 0 isotropy, and the closed-form radial oracle."""
    sum_rule = 0.0
    iso = 0.0
    oracle = 0.0
    for sigma in sigmas:
        window = CutoffWindow(sigma, Lambda)
        grids = [None, build_grid(window, 1, 8), build_grid(window, 2, 12), build_grid(window, 2, 18)]
        for grid in grids:
            for P3 in P3s:
                gam = gamma_integrals(P3, window, masses, grid)
                sum_rule = max(sum_rule, abs(sum(gam)))
            gam0 = gamma_integrals(0.0, window, masses, grid)
            if grid is not None and grid.n_angular in (8, 12):
                iso = max(iso, max(gam0[1:]) - min(gam0[1:]))
        exact = gamma0_closed_form(window, masses)
        quad = gamma_integrals(0.0, window, masses)[0]
        oracle = max(oracle, abs(quad - exact) / abs(exact))
    ok = sum_rule <= 1e-13 and iso <= 1e-13 and oracle <= 1e-8
    return CheckResult("splitting_integrals", ok, {"sum_rule": sum_rule, "isotropy": iso, "oracle_rel": oracle})


@_timed
def check_gap_constant(
    masses: Masses = Masses(), Lambda: float = 1.0, p_cs=(0.0, 0.1, 0.5), sigmas=(0.5, 0.25, 0.05, 0.01)
) -> CheckResult:
    """delta lower bound positive and below delta_sigma(P) for sigma <= Lambda/2, |P| <= p_c."""
    bounds = {p: delta_lower_bound(p, Lambda, masses) for p in p_cs}
    worst_margin = math.inf
    for p_c, bound in bounds.items():
        for P3 in np.linspace(0.0, p_c, 3):
            for sigma in sigmas:
                d = delta_from_gammas(gamma_integrals(P3, CutoffWindow(sigma * Lambda, Lambda), masses))
                worst_margin = min(worst_margin, d - bound)
    ok = all(b > 0 for b in bounds.values()) and worst_margin >= 0
    return CheckResult(
        "gap_constant", ok, {"bounds": [bounds[p] for p in p_cs], "min_margin": worst_margin}
    )


@_timed
def check_free_structure(
    P3: float = 0.3, sigma: float = 0.5, masses: Masses = Masses(), Lambda: float = 1.0
) -> CheckResult:
    """Lowest level of K_0 is E_0(P), 4-fold; K_0 - E_0 >= (1 - |P|/M) H_ph; gap above it."""
    space = _space(sigma, Lambda, masses)
    K0 = assemble_K0(space, P3)
    E0 = free_ground_energy(masses.reduced, P3, masses.total)
    spec = lowest_eigenpairs(K0, m=8, cluster_tol=1e-10)
    # K_0 and H_ph are both diagonal in the occupation basis, so the matrix
    # inequality reduces to the diagonal entries
    if K0.terms:
        raise AssertionError("free fiber operator is expected to be diagonal")
    bound = E0 + (1 - abs(P3) / masses.total) * space.photon_energy()
    min_diff = float(np.min(K0.diag - bound))
    gap_bound = min((1 - abs(P3) / masses.total) * space.grid.min_energy(), space.internal.excitation_gap())
    ok = (
        len(space.grid) >= 8
        and abs(spec.eigenvalues[0] - E0) <= 1e-12
        and spec.multiplicities[0] == 4
        and min_diff >= -1e-10
        and spec.gap >= gap_bound - 1e-12
    )
    return CheckResult(
        "free_structure",
        ok,
        {
            "modes": len(space.grid),
            "dim": space.dim,
            "E_err": float(spec.eigenvalues[0] - E0),
            "multiplicity": spec.multiplicities[0],
            "min_eig_K0_minus_bound": min_diff,
            "gap": spec.gap,
            "gap_bound": gap_bound,
        },
    )


@dataclass
class HyperfinePoint:
    g: float
    sigma: float
    space: FiberSpace
    K: object
    spec: object
    eff: object
    seconds: float = 0.0

    @property
    def rel_discrepancy(self) -> float:
        return abs(self.spec.gap / self.g**2 - self.eff.report.delta_sigma) / self.eff.report.delta_sigma


def hyperfine_point(g: float, sigma: float, P3: float = 0.0, masses: Masses = Masses(), Lambda: float = 1.0, seed: int = 0) -> HyperfinePoint:
    t0 = time.perf_counter()
    space = _space(sigma, Lambda, masses)
    eff = effective_matrix(g, P3, masses, space.elements, space.grid)
    K = assemble_K(space, g, P3)
    spec = lowest_eigenpairs(
        K, m=8, m_strict=4, tol=1e-11, cluster_tol=default_cluster_tol(g, eff.report.delta_sigma), seed=seed
    )
    return HyperfinePoint(g, sigma, space, K, spec, eff, time.perf_counter() - t0)


@_timed
def check_hyperfine(points: list[HyperfinePoint], tol: float = 0.25) -> CheckResult:
    """Simple ground level, a 3-cluster above it, Gap/g^2 close to delta_sigma, improving as g drops."""
    rel = [p.rel_discrepancy for p in points]
    patterns = [p.spec.multiplicities[:2] for p in points]
    ok = all(m[0] == 1 and len(m) > 1 and m[1] == 3 for m in patterns)
    ok = ok and all(r <= tol for r in rel) and all(b < a for a, b in zip(rel[:-1], rel[1:]))
    return CheckResult(
        "hyperfine",
        ok,
        {
            "g": [p.g for p in points],
            "sigma": [p.sigma for p in points],
            "dim": [p.space.dim for p in points],
            "clusters": patterns,
            "gap_over_g2": [p.spec.gap / p.g**2 for p in points],
            "delta_sigma": [p.eff.report.delta_sigma for p in points],
            "rel_discrepancy": rel,
        },
    )


@_timed
def check_feshbach(points: list[HyperfinePoint], ineq_tol: float = 1e-9) -> CheckResult:
    """Feshbach inequality on the truncated space and the second-order remainder scaling."""
    mins, rems, consts = [], [], []
    for p in points:
        E_ref = p.spec.ground_energy
        F = feshbach_operator(p.space, p.g, p.eff.report.P, E_ref, K=p.K)
        mins.append(feshbach_inequality_min(p.space, p.K, F))
        rem = F.remainder_norm(p.eff.matrix)
        beta = p.g**2 / p.sigma
        rems.append(rem)
        consts.append(rem / (p.g**2 * (math.sqrt(beta) + p.g ** (2 / 3))))
    # the bound holds with one constant: the fitted C must not grow as g decreases
    stable = all(b <= a * (1 + 1e-6) for a, b in zip(consts[:-1], consts[1:]))
    ok = all(m >= -ineq_tol for m in mins) and stable
    return CheckResult("feshbach", ok, {"ineq_min": mins, "remainder": rems, "C": consts})


@_timed
def check_appendix_bounds(
    g_values=(1e-2, 5e-3, 2.5e-3),
    sigma: float = 1 / 16,
    P3: float = 0.0,
    masses: Masses = Masses(),
    Lambda: float = 1.0,
    tol: float = 1e-10,
) -> CheckResult:
    """Photon number ~ g^2 and the energy orderings on nested dyadic grids."""
    tau = sigma / 2
    E0 = free_ground_energy(masses.reduced, P3, masses.total)
    sp_sigma = _space(sigma, Lambda, masses)
    sp_tau = _space(tau, Lambda, masses)
    n_ratio, c_free, c_shell, ordered = [], [], [], True
    for g in g_values:
        Ks = assemble_K(sp_sigma, g, P3)
        Kt = assemble_K(sp_tau, g, P3)
        ss = lowest_eigenpairs(Ks, m=6, m_strict=1, tol=1e-11, cluster_tol=default_cluster_tol(g, 0.1))
        st = lowest_eigenpairs(Kt, m=6, m_strict=1, tol=1e-11, cluster_tol=default_cluster_tol(g, 0.1))
        Es, Et = ss.ground_energy, st.ground_energy
        ordered = ordered and Et <= Es + tol and Es <= E0 + tol
        n_ratio.append(photon_number_expectation(sp_sigma, ss.ground_vector) / g**2)
        c_free.append((E0 - Es) / g**2)
        c_shell.append((Es - Et) / (g**2 * sigma**2))
    drift = max(n_ratio) / min(n_ratio)
    ok = ordered and drift < 2.0
    return CheckResult(
        "appendix_bounds",
        ok,
        {
            "n_over_g2": n_ratio,
            "drift": drift,
            "C_free": c_free,
            "C_shell": c_shell,
            "C_free_fit": max(c_free),
            "C_shell_fit": max(c_shell),
            "ordered": ordered,
        },
    )


@_timed
def check_scan(cfg: ScanConfig, seed: int = 0) -> CheckResult:
    """Every row of the IR scan holds and E_g does not increase as sigma drops."""
    rows = ir_scan(cfg, seed=seed)
    holds = all(r.holds for r in rows)
    mono = monotone(rows)
    return CheckResult(
        "ir_scan",
        holds and mono,
        {
            "sigma": [r.sigma for r in rows],
            "gap": [r.gap for r in rows],
            "eta_sigma": [r.eta_sigma for r in rows],
            "holds": [r.holds for r in rows],
            "monotone": mono,
        },
    )


def run_all(cfg: ScanConfig, seed: int = 0) -> list[CheckResult]:
    """Quick invariant suite at the configuration's coupling (used by the CLI)."""
    masses = Masses(cfg.m_el, cfg.m_n)
    out = [
        check_pauli(200, seed),
        check_splitting_integrals(masses, cfg.Lambda, sigmas=(cfg.Lambda / 2, cfg.sigma_point)),
        check_gap_constant(masses, cfg.Lambda, p_cs=(0.0, cfg.p_c)),
        check_free_structure(min(abs(cfg.P3), cfg.p_c), cfg.Lambda / 2, masses, cfg.Lambda),
    ]
    g = cfg.g
    pts = [hyperfine_point(g, cfg.sigma_point, cfg.P3, masses, cfg.Lambda, seed)]
    out.append(check_hyperfine(pts))
    out.append(check_feshbach(pts))
    out.append(check_scan(cfg, seed))
    return out
