import numpy as np
import pytest
import scipy.sparse as sp

from conftest import make_space
from hfqed.fock import (
    FockBasis,
    Masses,
    assemble_K,
    assemble_K0,
    assemble_K_restricted,
    assemble_W,
    assemble_W_shell,
    embed_vector,
    ground_sector_indices,
    number_operator,
    read_triplets,
    vacuum_indices,
)


def test_dimension_and_ordering():
    fb = FockBasis(5, 3)
    assert len(fb) == FockBasis.expected_dimension(5, 3) == 1 + 5 + 15 + 35
    assert fb.states[0] == ()
    assert list(fb.number) == sorted(fb.number)
    assert fb.index[(1, 1, 4)] > fb.index[(4,)]


def test_ccr_below_cap():
    fb = FockBasis(4, 3)
    low = np.flatnonzero(fb.number < fb.n_max)
    for i in range(4):
        for j in range(4):
            a, adj = fb.annihilator(i), fb.creator(j)
            comm = (a @ adj - adj @ a).toarray()[np.ix_(low, low)]
            np.testing.assert_allclose(comm, np.eye(len(low)) * (i == j), atol=1e-14)
            # creators commute among themselves
            c = (fb.creator(i) @ adj - adj @ fb.creator(i)).toarray()
            assert np.abs(c).max() < 1e-14


def test_field_vacuum_fluctuation():
    rng = np.random.default_rng(1)
    fb = FockBasis(6, 2)
    f = rng.standard_normal(6) + 1j * rng.standard_normal(6)
    phi = fb.field(f)
    vac = np.zeros(len(fb))
    vac[0] = 1
    assert np.vdot(vac, phi @ (phi @ vac)).real == pytest.approx(np.sum(np.abs(f) ** 2), rel=1e-14)


def test_quadratic_is_wick_ordered_square():
    rng = np.random.default_rng(2)
    fb = FockBasis(5, 4)
    f = rng.standard_normal(5) + 1j * rng.standard_normal(5)
    phi = fb.field(f).toarray()
    wick = fb.quadratic(pair=np.outer(f, f), hop=2 * np.outer(f, f.conj())).toarray()
    expected = phi @ phi - np.sum(np.abs(f) ** 2) * np.eye(len(fb))
    keep = np.flatnonzero(fb.number <= fb.n_max - 2)  # columns untouched by the cap
    np.testing.assert_allclose(wick[:, keep], expected[:, keep], atol=1e-12)


def test_embed_indices():
    coarse, fine = FockBasis(3, 2), FockBasis(5, 2)
    idx = fine.embed_indices(coarse)
    assert [fine.states[i] for i in idx] == coarse.states
    with pytest.raises(ValueError):
        coarse.embed_indices(fine)


def test_masses():
    m = Masses(1.0, 3.0)
    assert m.total == 4.0 and m.reduced == 0.75
    with pytest.raises(ValueError):
        Masses(0.0, 1.0)


def test_free_operator_spectrum(small_space):
    K0 = assemble_K0(small_space, 0.2)
    d = K0.diagonal()
    E0 = small_space.internal.e0 + 0.2**2 / 4
    assert d.min() == pytest.approx(E0)
    np.testing.assert_allclose(d[ground_sector_indices(small_space)], E0)


def test_K_hermitian_and_matvec_consistent(small_space):
    K = assemble_K(small_space, 0.3, 0.1)
    assert K.hermiticity_error() < 1e-13
    rng = np.random.default_rng(3)
    v = rng.standard_normal(K.dim) + 1j * rng.standard_normal(K.dim)
    np.testing.assert_allclose(K.matvec(v), K.to_sparse() @ v, atol=1e-13)
    V = rng.standard_normal((K.dim, 3))
    np.testing.assert_allclose(K.matvec(V), K.to_dense() @ V, atol=1e-13)
    np.testing.assert_allclose(K.diagonal(), np.diag(K.to_dense()).real, atol=1e-14)


def test_W_has_no_diagonal_block_on_ground_sector(small_space):
    W = assemble_W(small_space, 0.5, 0.0).to_dense()
    idx = ground_sector_indices(small_space)
    assert np.abs(W[np.ix_(idx, idx)]).max() < 1e-15


def test_only_dipole_mode(small_space):
    with pytest.raises(ValueError):
        assemble_W(small_space, 0.1, 0.0, mode="full")


def test_number_operator(small_space):
    N = number_operator(small_space).diagonal()
    assert N[vacuum_indices(small_space)].max() == 0
    assert N.max() == small_space.n_max


@pytest.fixture(scope="module")
def nested():
    coarse = make_space(sigma=0.5, n_int=2, n_max=2)
    fine = make_space(sigma=0.25, n_int=2, n_max=2)
    return coarse, fine


def test_shell_additivity(nested):
    _, fine = nested
    g, P, tau, sigma = 0.4, 0.15, 0.25, 0.5
    split = assemble_K_restricted(fine, g, P, sigma) + assemble_W_shell(fine, g, P, tau, sigma)
    whole = assemble_K(fine, g, P)
    rng = np.random.default_rng(4)
    V = rng.standard_normal((fine.dim, 2)) + 1j * rng.standard_normal((fine.dim, 2))
    np.testing.assert_allclose(split.matvec(V), whole.matvec(V), atol=1e-12)


def test_restricted_operator_matches_coarse(nested):
    coarse, fine = nested
    g, P = 0.4, 0.1
    rng = np.random.default_rng(5)
    v = rng.standard_normal(coarse.dim) + 1j * rng.standard_normal(coarse.dim)
    big = embed_vector(coarse, fine, v)
    assert np.linalg.norm(big) == pytest.approx(np.linalg.norm(v))
    lhs = np.vdot(big, assemble_K_restricted(fine, g, P, 0.5).matvec(big))
    rhs = np.vdot(v, assemble_K(coarse, g, P).matvec(v))
    assert lhs == pytest.approx(rhs, rel=1e-12)


def test_shell_interaction_vanishes_on_shell_vacuum(nested):
    coarse, fine = nested
    rng = np.random.default_rng(6)
    v = rng.standard_normal(coarse.dim) + 1j * rng.standard_normal(coarse.dim)
    big = embed_vector(coarse, fine, v)
    Ws = assemble_W_shell(fine, 0.4, 0.1, 0.25, 0.5)
    assert abs(np.vdot(big, Ws.matvec(big))) < 1e-12 * np.vdot(v, v).real


def test_shell_requires_matching_grid(nested):
    coarse, _ = nested
    with pytest.raises(ValueError):
        assemble_W_shell(coarse, 0.1, 0.0, 0.25, 0.5)


def test_triplet_round_trip(small_space, tmp_path):
    K = assemble_K(small_space, 0.2, 0.05)
    path = tmp_path / "K.txt"
    K.export_triplets(path)
    head = path.read_text().splitlines()[0]
    assert head.startswith("# dim")
    back = read_triplets(path)
    assert sp.issparse(back)
    assert abs(back - K.to_sparse()).max() == 0
