"""Photon modes: polarization vectors, coupling amplitudes and momentum grids.

Units are hbar = c = 1. The coupling functions follow the Coulomb-gauge field
expansions with a sharp cutoff window ``sigma_low <= |k| <= sigma_high``::

    h_A(x, k, lam) = (1/2pi) |k|^{-1/2} eps^lam(k) exp(-i k.x)
    h_B(x, k, lam) = -(i/2pi) |k|^{1/2} (khat ^ eps^lam(k)) exp(-i k.x)

Grids are product rules: Gauss nodes for the measure r^2 dr inside dyadic
radial shells ``[2^-m L, 2^-m+1 L]`` times an angular point set that never
touches the polar axis (where eps^1 is undefined).
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from functools import lru_cache
from pathlib import Path

import numpy as np
from numpy.typing import NDArray

FloatArray = NDArray[np.float64]

TWO_PI = 2.0 * math.pi
AXIS_EPS = 1e-14


@dataclass(frozen=True)
class CutoffWindow:
    """Photon energies kept: ``sigma_low <= |k| <= sigma_high``."""

    sigma_low: float
    sigma_high: float

    def __post_init__(self) -> None:
        if not (0.0 <= self.sigma_low <= self.sigma_high) or self.sigma_high <= 0:
            raise ValueError(
                f"invalid cutoff window [{self.sigma_low}, {self.sigma_high}]"
            )

    def contains(self, kabs: float | FloatArray) -> bool | NDArray[np.bool_]:
        return (kabs >= self.sigma_low) & (kabs <= self.sigma_high)

    def shell_volume(self) -> float:
        return 4.0 * math.pi / 3.0 * (self.sigma_high**3 - self.sigma_low**3)


# ---------------------------------------------------------------------------
# polarization and coupling functions


def polarization(k) -> tuple[FloatArray, FloatArray]:
    """Transverse unit vectors ``(eps1, eps2)`` with ``eps2 = khat x eps1``."""
    k = np.asarray(k, dtype=float)
    rho = math.hypot(k[0], k[1])
    if rho <= AXIS_EPS * max(1.0, float(np.linalg.norm(k))):
        raise ValueError(f"polarization undefined on the polar axis, k={k.tolist()}")
    eps1 = np.array([k[1], -k[0], 0.0]) / rho
    khat = k / np.linalg.norm(k)
    eps2 = np.cross(khat, eps1)
    return eps1, eps2


def _indicator(k: FloatArray, window: CutoffWindow) -> float:
    return 1.0 if window.contains(float(np.linalg.norm(k))) else 0.0


def h_A(x, k, lam: int, window: CutoffWindow) -> NDArray[np.complex128]:
    k = np.asarray(k, dtype=float)
    if _indicator(k, window) == 0.0:
        return np.zeros(3, dtype=complex)
    eps = polarization(k)[_lam_index(lam)]
    kabs = float(np.linalg.norm(k))
    phase = np.exp(-1j * float(np.dot(k, np.asarray(x, dtype=float))))
    return eps * (phase / (TWO_PI * math.sqrt(kabs)))


def h_B(x, k, lam: int, window: CutoffWindow) -> NDArray[np.complex128]:
    k = np.asarray(k, dtype=float)
    if _indicator(k, window) == 0.0:
        return np.zeros(3, dtype=complex)
    eps1, eps2 = polarization(k)
    kabs = float(np.linalg.norm(k))
    # khat ^ eps1 = eps2, khat ^ eps2 = -eps1
    cross = eps2 if _lam_index(lam) == 0 else -eps1
    phase = np.exp(-1j * float(np.dot(k, np.asarray(x, dtype=float))))
    return cross * (-1j * math.sqrt(kabs) * phase / TWO_PI)


def transverse_weight(k, window: CutoffWindow) -> FloatArray:
    """Per-axis weights ``sum_lam |h_B_j(0, k, lam)|^2``."""
    k = np.asarray(k, dtype=float)
    total = np.zeros(3)
    for lam in (1, 2):
        total += np.abs(h_B(np.zeros(3), k, lam, window)) ** 2
    return total


def _lam_index(lam: int) -> int:
    if lam not in (1, 2):
        raise ValueError(f"polarization index must be 1 or 2, got {lam!r}")
    return lam - 1


# ---------------------------------------------------------------------------
# quadrature rules


@lru_cache(maxsize=None)
def _radial_rule_unit(n: int, ratio: float) -> tuple[tuple[float, ...], tuple[float, ...]]:
    # Gauss rule for int_a^1 r^2 f(r) dr with a = ratio; scaled by the caller.
    # Discretized Stieltjes procedure on a fine Gauss-Legendre rule, then Golub-Welsch.
    xs, ws = np.polynomial.legendre.leggauss(max(64, 4 * n))
    r = 0.5 * (1.0 - ratio) * xs + 0.5 * (1.0 + ratio)
    w = 0.5 * (1.0 - ratio) * ws * r**2
    alpha = np.zeros(n)
    beta = np.zeros(n)
    p_prev = np.zeros_like(r)
    p = np.ones_like(r)
    norm_prev = 1.0
    for i in range(n):
        norm = float(np.sum(w * p * p))
        alpha[i] = float(np.sum(w * r * p * p)) / norm
        if i > 0:
            beta[i] = norm / norm_prev
        p_next = (r - alpha[i]) * p - (beta[i] * p_prev if i > 0 else 0.0)
        p_prev, p, norm_prev = p, p_next, norm
    jac = np.diag(alpha) + np.diag(np.sqrt(beta[1:]), 1) + np.diag(np.sqrt(beta[1:]), -1)
    nodes, vecs = np.linalg.eigh(jac)
    weights = float(np.sum(w)) * vecs[0, :] ** 2
    return tuple(nodes.tolist()), tuple(weights.tolist())


def radial_rule(a: float, b: float, n: int) -> tuple[FloatArray, FloatArray]:
    """Gauss nodes/weights for ``int_a^b r^2 f(r) dr``, exact for deg f <= 2n-1."""
    if n < 1:
        raise ValueError("need at least one radial node per shell")
    if not 0 <= a < b:
        raise ValueError(f"invalid radial interval [{a}, {b}]")
    nodes, weights = _radial_rule_unit(n, a / b)
    return b * np.array(nodes), b**3 * np.array(weights)


def angular_rule(n_angular: int) -> tuple[FloatArray, FloatArray]:
    """Unit directions and weights (summing to 4pi) avoiding the polar axis.

    ``8``: cube vertices, ``12``: cube edge midpoints (both invariant under the
    full octahedral group); ``2 t^2`` with ``t >= 3``: Gauss-Legendre in cos(theta)
    times ``2t`` azimuths offset from the coordinate planes.
    """
    if n_angular == 8:
        dirs = np.array(
            [[sx, sy, sz] for sx in (1, -1) for sy in (1, -1) for sz in (1, -1)], dtype=float
        ) / math.sqrt(3.0)
    elif n_angular == 12:
        pts = []
        for a in (1, -1):
            for b in (1, -1):
                pts += [[a, b, 0], [a, 0, b], [0, a, b]]
        dirs = np.array(pts, dtype=float) / math.sqrt(2.0)
    else:
        t = int(round(math.sqrt(n_angular / 2)))
        if t < 3 or 2 * t * t != n_angular:
            raise ValueError(
                f"n_angular must be 8, 12 or 2*t^2 with t >= 3; got {n_angular}"
            )
        ct, wt = np.polynomial.legendre.leggauss(t)
        phis = (np.arange(2 * t) + 0.5) * math.pi / t
        dirs_l, w_l = [], []
        for c, w in zip(ct, wt):
            s = math.sqrt(1.0 - c * c)
            for ph in phis:
                dirs_l.append([s * math.cos(ph), s * math.sin(ph), c])
                w_l.append(w * math.pi / t)
        return np.array(dirs_l), np.array(w_l)
    return dirs, np.full(len(dirs), 4.0 * math.pi / len(dirs))


def dyadic_shells(window: CutoffWindow) -> list[tuple[float, float]]:
    """Radial shells ``[2^-m L, 2^-m+1 L]`` clipped to the window, outermost first."""
    lo, hi = window.sigma_low, window.sigma_high
    shells: list[tuple[float, float]] = []
    m = 1
    upper = hi
    while upper > lo * (1.0 + 1e-12):
        lower = max(lo, hi * 2.0 ** (-m))
        if lower == 0.0:
            raise ValueError("infrared cutoff sigma_low must be > 0 to build a grid")
        shells.append((lower, upper))
        upper = lower
        m += 1
        if m > 200:
            raise ValueError("window spans too many dyadic shells")
    return shells


@dataclass(frozen=True)
class ModeNode:
    k: tuple[float, float, float]
    lam: int
    weight: float


@dataclass(frozen=True)
class ModeGrid:
    """Discrete photon modes ``(k, lam)`` with momentum-space weights.

    Nodes are ordered shell by shell from the ultraviolet end, both
    polarizations per momentum; a grid for a smaller infrared cutoff therefore
    extends a coarser one by appending nodes.
    """

    k: FloatArray  # (N, 3)
    lam: NDArray[np.int64]  # (N,)
    weight: FloatArray  # (N,)
    window: CutoffWindow
    shells: tuple[tuple[float, float], ...]
    n_radial: int
    n_angular: int
    kabs: FloatArray = field(init=False, repr=False)

    def __post_init__(self) -> None:
        object.__setattr__(self, "kabs", np.linalg.norm(self.k, axis=1) if len(self.k) else np.zeros(0))

    def __len__(self) -> int:
        return len(self.weight)

    @property
    def nodes(self) -> list[ModeNode]:
        return [
            ModeNode(tuple(map(float, kk)), int(ll), float(ww))
            for kk, ll, ww in zip(self.k, self.lam, self.weight)
        ]

    def momentum_points(self) -> tuple[FloatArray, FloatArray]:
        """Distinct momenta and their weights (polarization folded out)."""
        sel = self.lam == 1
        return self.k[sel], self.weight[sel]

    def in_window(self, lo: float, hi: float) -> NDArray[np.bool_]:
        tol = 1e-12 * max(lo, 1.0)
        if math.isfinite(hi):
            tol = max(tol, 1e-12 * hi)
        return (self.kabs >= lo - tol) & (self.kabs <= hi + tol)

    def min_energy(self) -> float:
        return float(self.kabs.min()) if len(self) else math.inf

    def is_prefix_of(self, other: ModeGrid) -> bool:
        n = len(self)
        return (
            n <= len(other)
            and np.array_equal(self.k, other.k[:n])
            and np.array_equal(self.lam, other.lam[:n])
            and np.array_equal(self.weight, other.weight[:n])
        )

    def to_json(self) -> dict:
        return {
            "window": [self.window.sigma_low, self.window.sigma_high],
            "n_radial": self.n_radial,
            "n_angular": self.n_angular,
            "shells": [list(s) for s in self.shells],
            "nodes": [
                {"k": [float(v) for v in kk], "lambda": int(ll), "weight": float(ww)}
                for kk, ll, ww in zip(self.k, self.lam, self.weight)
            ],
        }

    def save(self, path: str | Path) -> None:
        Path(path).write_text(json.dumps(self.to_json(), indent=1))

    @classmethod
    def from_json(cls, data: dict) -> ModeGrid:
        nodes = data["nodes"]
        k = np.array([n["k"] for n in nodes], dtype=float).reshape(-1, 3)
        return cls(
            k=k,
            lam=np.array([n["lambda"] for n in nodes], dtype=np.int64),
            weight=np.array([n["weight"] for n in nodes], dtype=float),
            window=CutoffWindow(*data["window"]),
            shells=tuple(tuple(s) for s in data["shells"]),
            n_radial=int(data["n_radial"]),
            n_angular=int(data["n_angular"]),
        )


def build_grid(window: CutoffWindow, n_radial: int = 1, n_angular: int = 8) -> ModeGrid:
    if n_radial < 1 or n_angular < 1:
        raise ValueError("node counts must be >= 1")
    dirs, dir_w = angular_rule(n_angular)
    shells = dyadic_shells(window) if window.sigma_low < window.sigma_high else []
    ks, lams, ws = [], [], []
    for a, b in shells:
        r, rw = radial_rule(a, b, n_radial)
        for ri, rwi in zip(r, rw):
            for d, dw in zip(dirs, dir_w):
                for lam in (1, 2):
                    ks.append(ri * d)
                    lams.append(lam)
                    ws.append(rwi * dw)
    return ModeGrid(
        k=np.array(ks, dtype=float).reshape(-1, 3),
        lam=np.array(lams, dtype=np.int64),
        weight=np.array(ws, dtype=float),
        window=window,
        shells=tuple(shells),
        n_radial=n_radial,
        n_angular=n_angular,
    )


# ---------------------------------------------------------------------------
# vectorized samples on a grid (dipole point x = 0)


def polarization_vectors(k: FloatArray, lam: NDArray[np.int64]) -> FloatArray:
    """Rows ``eps^lam(k)`` for each node."""
    rho = np.hypot(k[:, 0], k[:, 1])
    if np.any(rho <= AXIS_EPS):
        raise ValueError("grid contains nodes on the polar axis")
    eps1 = np.stack([k[:, 1], -k[:, 0], np.zeros(len(k))], axis=1) / rho[:, None]
    khat = k / np.linalg.norm(k, axis=1)[:, None]
    eps2 = np.cross(khat, eps1)
    return np.where((lam == 1)[:, None], eps1, eps2)


def grid_h_A(grid: ModeGrid) -> NDArray[np.complex128]:
    """``h_A_j(0, k_i, lam_i)`` as an (N, 3) array; real at x = 0."""
    if len(grid) == 0:
        return np.zeros((0, 3), dtype=complex)
    eps = polarization_vectors(grid.k, grid.lam)
    return (eps / (TWO_PI * np.sqrt(grid.kabs))[:, None]).astype(complex)


def grid_h_B(grid: ModeGrid) -> NDArray[np.complex128]:
    """``h_B_j(0, k_i, lam_i)`` as an (N, 3) array; purely imaginary at x = 0."""
    if len(grid) == 0:
        return np.zeros((0, 3), dtype=complex)
    eps = polarization_vectors(grid.k, grid.lam)
    khat = grid.k / grid.kabs[:, None]
    cross = np.cross(khat, eps)
    return cross * (-1j * np.sqrt(grid.kabs) / TWO_PI)[:, None]
