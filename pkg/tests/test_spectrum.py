import numpy as np
import pytest

from conftest import make_space
from hfqed.fock import assemble_K, assemble_K0
from hfqed.spectrum import (
    SolverError,
    certify_clusters,
    energy_bounds_check,
    evaluate_gap,
    fix_phase,
    lowest_eigenpairs,
    lowest_eigenpairs_linear,
    photon_number_expectation,
    vacuum_overlap,
)


@pytest.fixture(scope="module")
def K(small_space):
    return assemble_K(small_space, 0.3, 0.1)


def test_dense_and_iterative_agree(K):
    assert 300 <= K.dim <= 600
    dense = lowest_eigenpairs(K, m=6, dense=True)
    it = lowest_eigenpairs(K, m=6, m_strict=4, tol=1e-10, dense_threshold=0, cluster_tol=1e-8)
    assert dense.backend == "dense" and it.backend == "lobpcg"
    np.testing.assert_allclose(it.eigenvalues[:4], dense.eigenvalues[:4], atol=1e-9)
    # trailing pairs are only certified through their residual bars
    assert np.all(np.abs(it.eigenvalues - dense.eigenvalues) <= it.residuals + 1e-9)
    assert abs(abs(np.vdot(it.ground_vector, dense.ground_vector)) - 1) < 1e-8
    assert dense.multiplicities[:2] == it.multiplicities[:2]


def test_linear_solver_residuals(K):
    vals, vecs, res = lowest_eigenpairs_linear(K.matvec, K.dim, 4, diag=K.diagonal(), tol=1e-10, m_strict=2)
    assert np.all(res[:2] < 1e-9)
    np.testing.assert_allclose(vals, np.linalg.eigvalsh(K.to_dense())[:4], atol=1e-9)
    np.testing.assert_allclose(vecs.conj().T @ vecs, np.eye(4), atol=1e-10)


def test_diagonal_operator_is_exact(small_space):
    K0 = assemble_K0(small_space, 0.0)
    spec = lowest_eigenpairs(K0, m=6, cluster_tol=1e-12)
    assert spec.backend == "diagonal"
    assert spec.multiplicities[0] == 4
    np.testing.assert_array_equal(spec.residuals, 0)
    assert spec.ground_energy == pytest.approx(-0.25)


def test_photon_number_and_overlap(small_space, K):
    spec = lowest_eigenpairs(K, m=4, dense=True)
    n = photon_number_expectation(small_space, spec.ground_vector)
    ov = vacuum_overlap(small_space, spec.ground_vector)
    assert 0 < n < 0.1
    assert 0.9 < ov <= 1.0
    assert photon_number_expectation(small_space, spec.ground_vector, lo=2.0) == 0.0


def test_fix_phase():
    v = np.array([0.1, -2j, 0.3])
    w = fix_phase(v)
    assert w[1].real > 0 and w[1].imag == 0
    assert np.allclose(np.abs(w), np.abs(v))


def test_certify_clusters_rejects_ambiguous_boundary():
    vals = np.array([0.0, 1e-6, 1e-6, 1e-6])
    certify_clusters(vals, np.zeros(4), [1, 3], 1e-9)
    with pytest.raises(SolverError):
        certify_clusters(vals, np.array([1e-6, 1e-6, 0, 0]), [1, 3], 1e-9)


def test_gap_assertion_logic(K):
    spec = lowest_eigenpairs(K, m=6, dense=True, cluster_tol=1e-12)
    ok = evaluate_gap(spec, 0.3, 0.1, 0.5, eta=0.0)
    assert ok.simple and ok.holds == (spec.gap >= 0)
    too_big = evaluate_gap(spec, 0.3, 0.1, 0.5, eta=1e6)
    assert not too_big.holds
    assert set(ok.to_json()) == {"g", "P3", "sigma", "eta", "simple", "gap_value", "holds"}


def test_energy_bounds_check():
    rec = energy_bounds_check(0.1, -0.25, -0.2501, -0.2502, 0.5, 0.25)
    assert rec.ordered
    assert rec.free_ratio == pytest.approx(0.0002 / 0.01)
    assert rec.shell_ratio == pytest.approx(0.0001 / (0.01 * 0.25))
    with pytest.raises(ArithmeticError):
        energy_bounds_check(0.1, -0.25, -0.2, -0.2502, 0.5, 0.25)


def test_requires_positive_count(K):
    with pytest.raises(ValueError):
        lowest_eigenpairs(K, m=0)
