import math

import numpy as np
import pytest
import sympy as sym
from hypothesis import given, settings
from hypothesis import strategies as st

from conftest import make_space
from hfqed import feshbach as fe
from hfqed.fock import Masses, assemble_K
from hfqed.photons import CutoffWindow, build_grid
from hfqed.spectrum import lowest_eigenpairs

M11 = Masses()


def test_gamma0_closed_form_matches_integral():
    w = CutoffWindow(0.1, 1.0)
    assert fe.gamma_integrals(0.0, w, M11)[0] == pytest.approx(fe.gamma0_closed_form(w, M11), rel=1e-12)


def test_closed_form_antiderivative():
    r, M = sym.symbols("r M", positive=True)
    F = 2 * M * (r**2 / 2 - 2 * M * r + 4 * M**2 * sym.log(2 * M + r))
    assert sym.simplify(sym.diff(F, r) - 2 * M * r**2 / (2 * M + r)) == 0


def test_sum_rule_and_isotropy_at_rest():
    g = fe.gamma_integrals(0.0, CutoffWindow(0.05, 1.0), M11)
    assert g[1] + g[2] + g[3] == pytest.approx(-g[0], rel=1e-12)
    assert g[1] == pytest.approx(g[3], rel=1e-12) and g[2] == pytest.approx(g[3], rel=1e-12)


def test_moving_frame_breaks_isotropy():
    g = fe.gamma_integrals(0.3, CutoffWindow(0.05, 1.0), M11)
    assert g[1] == pytest.approx(g[2], rel=1e-12)
    assert abs(g[3] - g[1]) > 1e-6 * abs(g[1])


def test_regime_and_axis_checks():
    w = CutoffWindow(0.1, 1.0)
    with pytest.raises(ValueError):
        fe.gamma_integrals(1.5, w, M11)
    with pytest.raises(ValueError):
        fe.gamma_integrals([0.1, 0.0, 0.2], w, M11)


def test_delta_lower_bound_decreasing_and_below_delta():
    bounds = [fe.delta_lower_bound(p, 1.0, M11) for p in (0.0, 0.1, 0.5, 1.0)]
    assert all(b > a for a, b in zip(bounds[1:], bounds[:-1]))
    for P3 in (0.0, 0.1):
        d = fe.delta_sigma(P3, CutoffWindow(0.01, 1.0), M11)
        assert d >= fe.delta_lower_bound(0.1, 1.0, M11)
    with pytest.raises(ValueError):
        fe.delta_lower_bound(2.0, 1.0, M11)


def test_electric_magnetic_cross_terms_vanish(small_space):
    # h_A real, h_B imaginary at the dipole point: Re sum h_A conj(h_B) = 0
    cross = small_space.f_A.T @ small_space.f_B.conj()
    assert np.abs(cross.real).max() < 1e-16


@pytest.mark.parametrize("P3", [0.0, 0.2])
def test_matrix_convention_is_twice_the_formula(P3):
    grid = build_grid(CutoffWindow(0.125, 1.0), 1, 12)
    space_el = make_space(0.5).elements
    eff = fe.effective_matrix(0.01, P3, M11, space_el, grid)
    rep = eff.report
    assert rep.formula_ratio == pytest.approx(fe.FORMULA_RATIO, rel=1e-12)
    for got, lit in zip((rep.gamma0, rep.gamma1, rep.gamma2, rep.gamma3), rep.gamma_formula):
        assert got == pytest.approx(fe.FORMULA_RATIO * lit, rel=1e-12)
    np.testing.assert_allclose(np.sort(eff.eigenvalues()), np.sort(
        [eff.E0 + 0.01**2 * (eff.d + gm) for gm in (rep.gamma0, rep.gamma1, rep.gamma2, rep.gamma3)]), atol=1e-15)


def test_report_fields():
    grid = build_grid(CutoffWindow(0.25, 1.0), 1, 8)
    rep = fe.effective_matrix(0.01, 0.0, M11, make_space(0.5).elements, grid).report.to_json()
    for key in ("gamma0", "gamma1", "gamma2", "gamma3", "delta_sigma", "d_diag", "e0_pred", "window", "masses", "P"):
        assert key in rep
    assert rep["window"] == [0.25, 1.0]


@settings(max_examples=40, deadline=None)
@given(st.lists(st.floats(-5, 5, allow_nan=False), min_size=3, max_size=3))
def test_coupling_spectrum(a):
    assert fe.check_coupling_spectrum(a) < 1e-12 * (1 + max(map(abs, a)))


def test_resolvent_backends_agree_within_truncation():
    grid = build_grid(CutoffWindow(0.25, 1.0), 1, 8)
    el = make_space(0.5).elements
    a = fe.gamma_A_diag(0.0, M11, el, grid=grid, backend="basis")
    b = fe.gamma_A_diag(0.0, M11, el, grid=grid, backend="sternheimer")
    assert b >= a > 0


@pytest.fixture(scope="module")
def fesh_setup():
    space = make_space(0.5, n_int=2, n_max=1)
    g = 0.2
    K = assemble_K(space, g, 0.0)
    spec = lowest_eigenpairs(K, m=4, dense=True)
    return space, g, K, spec


def test_feshbach_isospectral(fesh_setup):
    space, g, K, spec = fesh_setup
    F = fe.feshbach_operator(space, g, 0.0, spec.ground_energy, K=K)
    assert F.inner_min > 0
    assert F.solve_residual < 1e-10
    assert F.hermiticity < 1e-12
    # E_ref in the spectrum of K  <=>  F(E_ref) has a zero mode
    assert np.min(np.abs(np.linalg.eigvalsh(F.matrix))) < 1e-10
    assert fe.feshbach_inequality_min(space, K, F) >= -1e-9


def test_feshbach_remainder_is_small(fesh_setup):
    space, g, K, spec = fesh_setup
    F = fe.feshbach_operator(space, g, 0.0, spec.ground_energy, K=K, check_inner=False)
    eff = fe.effective_matrix(g, 0.0, space.masses, space.elements, space.grid)
    assert math.isnan(F.inner_min)
    assert F.remainder_norm(eff.matrix) < 0.1 * g**2 * abs(eff.report.d_diag)
