import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from hfqed import spin

real = st.floats(-10, 10, allow_nan=False)
cplx = st.complex_numbers(max_magnitude=10, allow_nan=False, allow_infinity=False)


@pytest.mark.parametrize("species", ["el", "n"])
def test_pauli_algebra(species):
    s = [spin.pauli(species, j) for j in (1, 2, 3)]
    for a in range(3):
        np.testing.assert_allclose(s[a] @ s[a], np.eye(4))
        np.testing.assert_allclose(s[a], s[a].conj().T)
    # s1 s2 = i s3 and cyclic
    for a, b, c in ((0, 1, 2), (1, 2, 0), (2, 0, 1)):
        np.testing.assert_allclose(s[a] @ s[b], 1j * s[c], atol=1e-15)


def test_species_commute():
    for i in (1, 2, 3):
        for j in (1, 2, 3):
            A, B = spin.pauli_el(i), spin.pauli_n(j)
            np.testing.assert_allclose(A @ B, B @ A)


def test_basis_ordering_electron_slowest():
    # sigma_el_3 is +1 on the first two basis vectors (electron up)
    np.testing.assert_allclose(np.diag(spin.pauli_el(3)).real, [1, 1, -1, -1])
    np.testing.assert_allclose(np.diag(spin.pauli_n(3)).real, [1, -1, 1, -1])


def test_bad_axis_and_species():
    with pytest.raises(ValueError):
        spin.pauli_el(0)
    with pytest.raises(ValueError):
        spin.pauli("p", 1)
    with pytest.raises(ValueError):
        spin.spin_dot([1, 2])


@settings(max_examples=60, deadline=None)
@given(st.lists(cplx, min_size=3, max_size=3), st.sampled_from(["el", "n"]))
def test_spin_dot_square_uses_plain_squares(a, species):
    S = spin.spin_dot(a, species)
    np.testing.assert_allclose(S @ S, sum(x * x for x in a) * np.eye(4), atol=1e-9 * (1 + sum(abs(x) ** 2 for x in a)))


@settings(max_examples=60, deadline=None)
@given(st.lists(real, min_size=3, max_size=3))
def test_coupling_spectrum_closed_form(a):
    vals = np.linalg.eigvalsh(spin.coupling_matrix(a))
    np.testing.assert_allclose(vals, spin.coupling_eigenvalues(a), atol=1e-12 * (1 + max(map(abs, a))))


def test_singlet_eigenvector():
    a = [0.3, -1.2, 2.0]
    v = spin.singlet_vector()
    np.testing.assert_allclose(spin.coupling_matrix(a) @ v, -sum(a) * v, atol=1e-14)


def test_isotropic_coupling_triplet():
    vals = spin.coupling_eigenvalues([1.0, 1.0, 1.0])
    assert vals == (-3.0, 1.0, 1.0, 1.0)
    assert spin.cluster_multiplicities(vals) == [1, 3]


def test_complex_closed_form_rejected():
    with pytest.raises(ValueError):
        spin.coupling_eigenvalues([1j, 0, 0])


def test_cluster_multiplicities():
    assert spin.cluster_multiplicities([]) == []
    assert spin.cluster_multiplicities([0.0, 1e-12, 1.0, 1.0 + 5e-11, 3.0]) == [2, 2, 1]
    assert spin.cluster_multiplicities([2.0, 0.0, 1.0], tol=1.5) == [3]
