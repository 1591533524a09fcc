"""Infrared scans sigma_n = kappa^n sigma_0 and their CSV / JSON / SVG output."""

from __future__ import annotations

import csv
import json
import logging
import math
from dataclasses import asdict, dataclass, field
from pathlib import Path

import numpy as np

from .config import ScanConfig
from .feshbach import effective_matrix
from .fock import FiberSpace, Masses, assemble_K
from .hydrogen import InternalBasis, free_ground_energy
from .photons import CutoffWindow, build_grid
from .spectrum import (
    SolverError,
    SpectrumResult,
    default_cluster_tol,
    evaluate_gap,
    lowest_eigenpairs,
    photon_number_expectation,
    vacuum_overlap,
)

log = logging.getLogger(__name__)

CSV_HEADER = ("sigma", "E_g", "gap", "cluster1", "cluster2", "n_ph", "dE_over_g2", "overlap", "holds")
MONOTONE_TOL = 1e-10


def build_space(cfg: ScanConfig, sigma: float) -> FiberSpace:
    window = CutoffWindow(sigma, cfg.Lambda)
    grid = build_grid(window, cfg.grid.n_radial, cfg.grid.n_angular)
    masses = Masses(cfg.m_el, cfg.m_n)
    internal = InternalBasis(masses.reduced, cfg.n_int)
    return FiberSpace(grid, internal, masses, cfg.n_max)


def solve_point(
    cfg: ScanConfig, sigma: float, dense: bool = False, seed: int = 0, space: FiberSpace | None = None
) -> tuple[FiberSpace, SpectrumResult, object]:
    """Assemble and diagonalize ``K_{g, >= sigma}(P)``; also return the effective matrix."""
    space = space or build_space(cfg, sigma)
    eff = effective_matrix(cfg.g, cfg.P3, space.masses, space.elements, space.grid)
    ctol = cfg.solver.cluster_tol
    if ctol is None:
        ctol = default_cluster_tol(cfg.g, eff.report.delta_sigma)
    K = assemble_K(space, cfg.g, cfg.P3)
    spec = lowest_eigenpairs(
        K,
        m=cfg.solver.m,
        tol=cfg.solver.tol,
        cluster_tol=ctol,
        dense=dense,
        dense_threshold=cfg.solver.dense_threshold,
        seed=seed,
        m_strict=cfg.solver.m_strict,
    )
    return space, spec, eff


@dataclass
class ScanRow:
    sigma: float
    E_g: float
    gap: float
    cluster1: int
    cluster2: int
    n_ph: float
    dE_over_g2: float
    overlap: float
    holds: bool
    E0: float = float("nan")
    simple: bool = False
    eta_sigma: float = float("nan")
    monotone_residual: float = float("nan")  # E_g(sigma_n) - E_g(sigma_{n-1}); <= 0 expected
    shell_ratio: float = float("nan")  # (E_g(sigma_{n-1}) - E_g(sigma_n)) / (g^2 sigma_{n-1}^2)
    dim: int = 0
    backend: str = ""
    max_residual: float = float("nan")
    levels: list[float] = field(default_factory=list)
    splitting: dict = field(default_factory=dict)
    error: str = ""

    def csv_row(self) -> list[str]:
        out = []
        for name in CSV_HEADER:
            v = getattr(self, name)
            if isinstance(v, bool):
                out.append("true" if v else "false")
            elif isinstance(v, (int, np.integer)):
                out.append(str(int(v)))
            else:
                out.append(repr(float(v)))
        return out

    def to_json(self) -> dict:
        d = asdict(self)
        return {k: (None if isinstance(v, float) and not math.isfinite(v) else v) for k, v in d.items()}


def ir_scan(cfg: ScanConfig, dense: bool = False, seed: int = 0) -> list[ScanRow]:
    """One row per ``sigma_n``; solver failures are flagged and the scan continues."""
    eta = cfg.resolved_eta()
    masses = Masses(cfg.m_el, cfg.m_n)
    E0 = free_ground_energy(masses.reduced, cfg.P3, masses.total)
    nested = cfg.nested()
    rows: list[ScanRow] = []
    prev_E: float | None = None
    prev_sigma: float | None = None
    for sigma in cfg.sigmas():
        log.info("scan step sigma=%.6g", sigma)
        try:
            space, spec, eff = solve_point(cfg, sigma, dense=dense, seed=seed)
        except (SolverError, ArithmeticError) as exc:
            rows.append(
                ScanRow(sigma, math.nan, math.nan, 0, 0, math.nan, math.nan, math.nan, False, E0=E0, error=str(exc))
            )
            prev_E = None
            continue
        gap = evaluate_gap(spec, cfg.g, cfg.P3, sigma, eta)
        Eg = spec.ground_energy
        psi = spec.ground_vector
        mult = spec.multiplicities
        row = ScanRow(
            sigma=sigma,
            E_g=Eg,
            gap=gap.gap_value,
            cluster1=mult[0],
            cluster2=mult[1] if len(mult) > 1 else 0,
            n_ph=photon_number_expectation(space, psi),
            dE_over_g2=(E0 - Eg) / cfg.g**2 if cfg.g else 0.0,
            overlap=vacuum_overlap(space, psi),
            holds=gap.holds,
            E0=E0,
            simple=gap.simple,
            eta_sigma=eta * sigma,
            dim=space.dim,
            backend=spec.backend,
            max_residual=float(np.max(spec.residuals)),
            levels=[float(x) for x in spec.eigenvalues],
            splitting=eff.report.to_json(),
        )
        if prev_E is not None and nested:
            row.monotone_residual = Eg - prev_E
            if cfg.g:
                row.shell_ratio = (prev_E - Eg) / (cfg.g**2 * prev_sigma**2)
        rows.append(row)
        prev_E, prev_sigma = Eg, sigma
    return rows


def monotone(rows: list[ScanRow], tol: float = MONOTONE_TOL) -> bool:
    """E_g non-increasing as sigma decreases (rows in scan order)."""
    vals = [r.E_g for r in rows]
    return all(b <= a + tol for a, b in zip(vals[:-1], vals[1:]))


def persistence(rows: list[ScanRow]) -> bool:
    """Once a row holds, every later row holds."""
    seen = False
    for r in rows:
        if seen and not r.holds:
            return False
        seen = seen or r.holds
    return True


# ---------------------------------------------------------------------------
# output


def write_csv(rows: list[ScanRow], path: str | Path) -> None:
    with Path(path).open("w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(CSV_HEADER)
        for r in rows:
            w.writerow(r.csv_row())


def write_json(rows: list[ScanRow], cfg: ScanConfig, path: str | Path) -> None:
    doc = {
        "config": cfg.to_json(),
        "eta": cfg.resolved_eta(),
        "monotone": monotone(rows),
        "persistent": persistence(rows),
        "rows": [r.to_json() for r in rows],
    }
    Path(path).write_text(json.dumps(doc, indent=2, allow_nan=False) + "\n")


def write_svg(rows: list[ScanRow], path: str | Path, n_levels: int = 6) -> None:
    """Level diagram: lowest levels relative to E_0(P) against sigma (log axis)."""
    import matplotlib

    matplotlib.use("Agg")
    import matplotlib.pyplot as plt

    plt.rcParams["svg.hashsalt"] = "hfqed"
    good = [r for r in rows if r.levels]
    fig, ax = plt.subplots(figsize=(6, 4))
    for j in range(n_levels):
        pts = [(r.sigma, r.levels[j] - r.E0) for r in good if len(r.levels) > j]
        if pts:
            xs, ys = zip(*pts)
            ax.plot(xs, ys, "o-", lw=1, ms=3, color="k" if j == 0 else "C0" if j < 4 else "0.6")
    if good:
        ax.plot([r.sigma for r in good], [r.eta_sigma for r in good], "--", color="C3", lw=1, label="eta sigma")
    ax.set_xscale("log")
    ax.set_xlabel("sigma")
    ax.set_ylabel("E - E_0(P)")
    ax.legend(loc="best", fontsize=8)
    fig.tight_layout()
    fig.savefig(path, format="svg", metadata={"Date": None})
    plt.close(fig)
