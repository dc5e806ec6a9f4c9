import numpy as np
import pytest
import scipy.sparse as sp

from catms.hilbert import (
    DensityMatrix,
    SparseOperator,
    StateVector,
    annihilation,
    apply,
    dagger,
    displacement,
    expect,
    identity,
    make_space,
    number_op,
    partial_trace,
    tensor_embed,
)


def test_make_space_dimensions():
    assert make_space([2]).dim == 2
    assert make_space([10, 20, 20]).dim == 4000


def test_make_space_rejects_bad_input():
    with pytest.raises(ValueError):
        make_space([])
    with pytest.raises(ValueError):
        make_space([10, 1])
    with pytest.raises(ValueError):
        make_space([2, 2], ["a", "a"])


def test_flat_index_layout_row_major():
    space = make_space([10, 20, 20])
    assert space.flat_index((1, 0, 3)) == 1 * 400 + 0 * 20 + 3


def test_flat_multi_index_round_trip():
    space = make_space([3, 4, 2])
    for flat in range(space.dim):
        assert space.flat_index(space.multi_index(flat)) == flat


def test_annihilation_matrix_elements():
    space = make_space([6])
    a = annihilation(space, "a0").to_dense()
    assert a[0, 1] == pytest.approx(1.0)
    assert a[1, 2] == pytest.approx(np.sqrt(2.0))


def test_commutator_identity_below_truncation():
    dim = 8
    space = make_space([dim])
    a = annihilation(space, "a0")
    comm = (a @ dagger(a) - dagger(a) @ a).to_dense()
    expected = np.eye(dim)
    expected[-1, -1] = -(dim - 1)  # truncation artifact on the top level only
    assert np.abs(comm - expected).max() < 1e-12


def test_displacement_identity_and_inverse():
    space = make_space([30])
    d0 = displacement(space, "a0", 0.0).to_dense()
    assert np.abs(d0 - np.eye(30)).max() < 1e-12
    dp = displacement(space, "a0", 2.0)
    dm = displacement(space, "a0", -2.0)
    assert np.abs((dp @ dm).to_dense() - np.eye(30)).max() < 1e-10


def test_displacement_is_unitary():
    space = make_space([30])
    d = displacement(space, "a0", 2.5)
    assert np.abs((dagger(d) @ d).to_dense() - np.eye(30)).max() < 1e-8


def test_displacement_coherent_amplitudes():
    space = make_space([40])
    vac = np.zeros(40)
    vac[0] = 1.0
    col = displacement(space, "a0", 2.0).matrix @ vac
    from math import factorial

    for nu in range(10):
        expected = np.exp(-2.0) * 2.0**nu / np.sqrt(factorial(nu))
        assert col[nu] == pytest.approx(expected, rel=1e-10)


def test_displacement_warns_for_large_amplitude():
    space = make_space([9])
    with pytest.warns(UserWarning):
        displacement(space, "a0", 3.0)


def test_tensor_embed_matches_kron_oracle():
    rng = np.random.default_rng(3)
    space = make_space([2, 3])
    m = rng.normal(size=(3, 3)) + 1j * rng.normal(size=(3, 3))
    single = SparseOperator(make_space([3], ["a"]), sp.csr_matrix(m))
    embedded = tensor_embed(single, space, "a1").to_dense()
    assert np.abs(embedded - np.kron(np.eye(2), m)).max() < 1e-14


def test_embed_identity_is_identity():
    space = make_space([3, 4])
    one = SparseOperator(make_space([4], ["x"]), sp.identity(4, dtype=complex))
    assert np.abs(tensor_embed(one, space, "a1").to_dense() - np.eye(12)).max() == 0


def test_mixed_product_property():
    rng = np.random.default_rng(5)
    space = make_space([3, 4])
    ma = rng.normal(size=(3, 3)) + 1j * rng.normal(size=(3, 3))
    mb = rng.normal(size=(4, 4)) + 1j * rng.normal(size=(4, 4))
    a = tensor_embed(SparseOperator(make_space([3], ["x"]), sp.csr_matrix(ma)), space, "a0")
    b = tensor_embed(SparseOperator(make_space([4], ["x"]), sp.csr_matrix(mb)), space, "a1")
    assert np.abs((a @ b).to_dense() - np.kron(ma, mb)).max() < 1e-13
    # disjoint-mode embeddings commute
    assert np.abs((a @ b - b @ a).to_dense()).max() < 1e-13


def test_expect_examples():
    space = make_space([30])
    n = number_op(space, "a0")
    vac = np.zeros(30)
    vac[0] = 1.0
    assert expect(n, StateVector(space, vac)) == 0
    coh = apply(displacement(space, "a0", 2.0), StateVector(space, vac))
    assert expect(n, coh).real == pytest.approx(4.0, abs=1e-8)


def test_expect_density_matrix():
    space = make_space([4])
    v = np.zeros(4)
    v[2] = 1.0
    rho = StateVector(space, v).outer()
    assert expect(number_op(space, "a0"), rho) == pytest.approx(2.0)


def test_dagger_involution():
    rng = np.random.default_rng(11)
    space = make_space([5])
    m = rng.normal(size=(5, 5)) + 1j * rng.normal(size=(5, 5))
    op = SparseOperator(space, sp.csr_matrix(m))
    assert np.abs(dagger(dagger(op)).to_dense() - m).max() < 1e-14


def test_space_mismatch_errors():
    s1, s2 = make_space([4]), make_space([5])
    v = np.zeros(5)
    v[0] = 1.0
    with pytest.raises(ValueError):
        apply(identity(s1), StateVector(s2, v))
    with pytest.raises(ValueError):
        identity(s1) @ identity(s2)
    with pytest.raises(ValueError):
        annihilation(s1, "nope")


def test_density_matrix_validation():
    space = make_space([3])
    good = DensityMatrix(space, np.diag([0.5, 0.5, 0.0]).astype(complex))
    good.assert_valid()
    with pytest.raises(ValueError):
        DensityMatrix(space, np.diag([2.0, 0.0, 0.0]).astype(complex)).assert_valid()


def test_partial_trace_product_state():
    space = make_space([2, 3])
    v = np.kron(np.array([1.0, 0.0]), np.array([0.0, 1.0, 0.0]) + 0j)
    rho = StateVector(space, v).outer()
    r0 = partial_trace(rho, "a0")
    r1 = partial_trace(rho, "a1")
    assert np.abs(r0 - np.diag([1.0, 0.0])).max() < 1e-14
    assert np.abs(r1 - np.diag([0.0, 1.0, 0.0])).max() < 1e-14
