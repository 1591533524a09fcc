import math

import numpy as np
import pytest
from hypothesis import assume, given, settings
from hypothesis import strategies as st

from hfqed import photons
from hfqed.photons import CutoffWindow, build_grid

coord = st.floats(-5, 5, allow_nan=False)
W = CutoffWindow(0.0, 1e6)


def _k(x, y, z):
    k = np.array([x, y, z])
    assume(math.hypot(x, y) > 1e-3 and np.linalg.norm(k) > 1e-3)
    return k


@settings(max_examples=80, deadline=None)
@given(coord, coord, coord)
def test_polarization_frame(x, y, z):
    k = _k(x, y, z)
    e1, e2 = photons.polarization(k)
    khat = k / np.linalg.norm(k)
    frame = np.array([e1, e2, khat])
    np.testing.assert_allclose(frame @ frame.T, np.eye(3), atol=1e-12)
    np.testing.assert_allclose(np.cross(khat, e1), e2, atol=1e-12)


@settings(max_examples=80, deadline=None)
@given(coord, coord, coord)
def test_polarization_completeness(x, y, z):
    k = _k(x, y, z)
    e1, e2 = photons.polarization(k)
    khat = k / np.linalg.norm(k)
    np.testing.assert_allclose(np.outer(e1, e1) + np.outer(e2, e2), np.eye(3) - np.outer(khat, khat), atol=1e-12)


@settings(max_examples=50, deadline=None)
@given(coord, coord, coord)
def test_quadratic_quantities_ignore_polarization_sign(x, y, z):
    # eps(-k) = -eps(k) for eps1; quantities quadratic in eps must not notice
    k = _k(x, y, z)
    np.testing.assert_allclose(photons.transverse_weight(k, W), photons.transverse_weight(-k, W), atol=1e-12)
    e1p, _ = photons.polarization(k)
    e1m, _ = photons.polarization(-k)
    np.testing.assert_allclose(e1m, -e1p, atol=1e-12)


@settings(max_examples=50, deadline=None)
@given(coord, coord, coord)
def test_transverse_weight_closed_form(x, y, z):
    k = _k(x, y, z)
    kabs = np.linalg.norm(k)
    expected = kabs * (1 - (k / kabs) ** 2) / (4 * math.pi**2)
    np.testing.assert_allclose(photons.transverse_weight(k, W), expected, atol=1e-12 * (1 + kabs))


def test_couplings_at_origin_real_and_imaginary():
    k = np.array([0.3, 0.2, -0.4])
    w = CutoffWindow(0.1, 1.0)
    for lam in (1, 2):
        assert np.all(photons.h_A([0, 0, 0], k, lam, w).imag == 0)
        assert np.all(photons.h_B([0, 0, 0], k, lam, w).real == 0)
    # outside the window both vanish
    assert not np.any(photons.h_A([0, 0, 0], 3 * k, 1, w))
    assert not np.any(photons.h_B([0, 0, 0], 3 * k, 2, w))


def test_polar_axis_rejected():
    with pytest.raises(ValueError):
        photons.polarization([0.0, 0.0, 1.0])
    with pytest.raises(ValueError):
        photons.h_A([0, 0, 0], [0.5, 0.5, 0.5], 3, CutoffWindow(0.1, 1))


@pytest.mark.parametrize("n", [8, 12, 18, 32])
def test_angular_rule(n):
    dirs, w = photons.angular_rule(n)
    assert len(dirs) == n
    assert w.sum() == pytest.approx(4 * math.pi, rel=1e-14)
    np.testing.assert_allclose(np.linalg.norm(dirs, axis=1), 1.0)
    assert np.all(np.hypot(dirs[:, 0], dirs[:, 1]) > 1e-3)
    # second moments exact: int x_i x_j = 4 pi / 3 delta_ij
    np.testing.assert_allclose((dirs.T * w) @ dirs, 4 * math.pi / 3 * np.eye(3), atol=1e-13)


def test_angular_rule_rejects_bad_count():
    with pytest.raises(ValueError):
        photons.angular_rule(10)


@pytest.mark.parametrize("n", [1, 2, 4])
def test_radial_rule_exact_for_polynomials(n):
    a, b = 0.25, 0.5
    r, w = photons.radial_rule(a, b, n)
    assert np.all((r > a) & (r < b))
    for p in range(2 * n):
        exact = (b ** (p + 3) - a ** (p + 3)) / (p + 3)
        assert np.sum(w * r**p) == pytest.approx(exact, rel=1e-12)


def test_dyadic_shells():
    shells = photons.dyadic_shells(CutoffWindow(0.1, 1.0))
    assert shells[0] == (0.5, 1.0)
    assert shells[-1][0] == 0.1
    for (lo, hi), (lo2, hi2) in zip(shells[:-1], shells[1:]):
        assert hi2 == lo
    with pytest.raises(ValueError):
        photons.dyadic_shells(CutoffWindow(0.0, 1.0))


@pytest.mark.parametrize("sigma", [1 / 2, 1 / 8, 0.3])
def test_grid_volume(sigma):
    window = CutoffWindow(sigma, 1.0)
    grid = build_grid(window, 2, 12)
    one = grid.lam == 1
    assert grid.weight[one].sum() == pytest.approx(window.shell_volume(), rel=1e-13)
    assert np.all(grid.in_window(sigma, 1.0))
    assert grid.min_energy() >= sigma


def test_grids_nest_dyadically():
    coarse = build_grid(CutoffWindow(1 / 4, 1.0), 1, 8)
    fine = build_grid(CutoffWindow(1 / 8, 1.0), 1, 8)
    assert coarse.is_prefix_of(fine)
    assert not fine.is_prefix_of(coarse)
    assert len(fine) == 3 * 16


def test_grid_json_round_trip(tmp_path):
    grid = build_grid(CutoffWindow(0.25, 1.0), 2, 8)
    path = tmp_path / "grid.json"
    grid.save(path)
    import json

    back = photons.ModeGrid.from_json(json.loads(path.read_text()))
    assert back.is_prefix_of(grid) and grid.is_prefix_of(back)
    assert back.window == grid.window


def test_grid_samples_match_pointwise():
    grid = build_grid(CutoffWindow(0.25, 1.0), 1, 12)
    hA, hB = photons.grid_h_A(grid), photons.grid_h_B(grid)
    for i in (0, 5, len(grid) - 1):
        k, lam = grid.k[i], int(grid.lam[i])
        np.testing.assert_allclose(hA[i], photons.h_A([0, 0, 0], k, lam, grid.window), atol=1e-15)
        np.testing.assert_allclose(hB[i], photons.h_B([0, 0, 0], k, lam, grid.window), atol=1e-15)
