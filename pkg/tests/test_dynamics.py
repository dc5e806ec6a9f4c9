import numpy as np
import pytest
import scipy.linalg
import scipy.sparse as sp

from catms.dynamics import (
    IntegratorSettings,
    evolve_density,
    evolve_state,
    expm_apply,
    hermitian_shift,
    propagate_piecewise,
    propagator_on_subspace,
)
from catms.hilbert import (
    SparseOperator,
    StateVector,
    annihilation,
    dagger,
    make_space,
    number_op,
)
from catms.model import CollapseChannel


def _two_level_rabi():
    space = make_space([2])
    h = SparseOperator(space, sp.csr_matrix(np.array([[0.0, 1.0], [1.0, 0.0]], dtype=complex)))
    v = np.array([1.0, 0.0], dtype=complex)
    return space, h, StateVector(space, v)


def test_rk4_fourth_order_convergence():
    space, h, psi0 = _two_level_rabi()
    t = 1.3
    exact = scipy.linalg.expm(-1j * t * h.to_dense()) @ psi0.amplitudes
    errs = []
    for dt in (0.1, 0.05, 0.025):
        res = evolve_state(h, psi0, (0.0, t), IntegratorSettings(method="rk4_fixed", dt=dt))
        errs.append(np.linalg.norm(res.final.amplitudes - exact))
    # halving dt should shrink the error by ~2^4
    assert errs[0] / errs[1] > 12
    assert errs[1] / errs[2] > 12


def test_adaptive_matches_closed_form():
    space, h, psi0 = _two_level_rabi()
    t = 2.0
    exact = scipy.linalg.expm(-1j * t * h.to_dense()) @ psi0.amplitudes
    res = evolve_state(h, psi0, (0.0, t), IntegratorSettings(rtol=1e-10, atol=1e-12))
    assert np.abs(res.final.amplitudes - exact).max() < 1e-8
    assert abs(res.final.norm() - 1.0) < 1e-8


def test_time_dependent_hamiltonian_phase():
    # i dpsi/dt = f(t) sigma_z psi with f(t) = t accumulates phase t^2/2
    space = make_space([2])
    sz = sp.csr_matrix(np.diag([1.0, -1.0]).astype(complex))

    def h(t):
        return SparseOperator(space, t * sz)

    v = np.array([1.0, 1.0], dtype=complex) / np.sqrt(2.0)
    res = evolve_state(h, StateVector(space, v), (0.0, 2.0),
                       IntegratorSettings(rtol=1e-10, atol=1e-12))
    phase = 2.0**2 / 2.0
    expected = np.array([np.exp(-1j * phase), np.exp(1j * phase)]) / np.sqrt(2.0)
    assert np.abs(res.final.amplitudes - expected).max() < 1e-7


def test_lindblad_cavity_decay_rate():
    dim = 8
    space = make_space([dim])
    h = SparseOperator(space, sp.csr_matrix((dim, dim), dtype=complex))
    kappa = 0.7
    chan = [CollapseChannel(kappa, annihilation(space, "a0"))]
    v = np.zeros(dim, dtype=complex)
    v[3] = 1.0
    rho0 = StateVector(space, v).outer()
    t = 0.9
    res = evolve_density(h, chan, rho0, (0.0, t))
    n_final = np.real(np.trace(number_op(space, "a0").to_dense() @ res.final.entries))
    assert n_final == pytest.approx(3.0 * np.exp(-kappa * t), rel=1e-6)
    assert res.final.trace().real == pytest.approx(1.0, abs=1e-8)
    assert res.final.hermiticity_defect() < 1e-12


def test_lindblad_dephasing_preserves_populations():
    dim = 4
    space = make_space([dim])
    h = SparseOperator(space, sp.csr_matrix((dim, dim), dtype=complex))
    chan = [CollapseChannel(0.5, number_op(space, "a0"))]
    v = np.ones(dim, dtype=complex) / 2.0
    res = evolve_density(h, chan, StateVector(space, v).outer(), (0.0, 1.0))
    pops = np.real(np.diag(res.final.entries))
    assert np.abs(pops - 0.25).max() < 1e-8
    # coherences decay as exp(-rate (m-n)^2 t / 2)
    c01 = abs(res.final.entries[0, 1])
    assert c01 == pytest.approx(0.25 * np.exp(-0.5 * 0.5), rel=1e-5)


def test_expm_apply_matches_scipy():
    rng = np.random.default_rng(2)
    dim = 40
    m = rng.normal(size=(dim, dim)) + 1j * rng.normal(size=(dim, dim))
    m = m + m.conj().T
    v = rng.normal(size=dim) + 1j * rng.normal(size=dim)
    ref = scipy.linalg.expm(-1j * 0.37 * m) @ v
    out = expm_apply(sp.csr_matrix(m), v, -1j * 0.37)
    assert np.abs(out - ref).max() < 1e-9


def test_hermitian_shift_centers_diagonal():
    m = sp.csr_matrix(np.diag([0.0, 10.0, 20.0]).astype(complex))
    shifted, c = hermitian_shift(m)
    assert c == pytest.approx(10.0)
    d = shifted.diagonal().real
    assert d.min() == pytest.approx(-10.0) and d.max() == pytest.approx(10.0)


def test_propagate_piecewise_unitary_and_composed():
    rng = np.random.default_rng(4)
    dim = 12
    h1 = rng.normal(size=(dim, dim)) + 1j * rng.normal(size=(dim, dim))
    h1 = sp.csr_matrix(h1 + h1.conj().T)
    h2 = rng.normal(size=(dim, dim)) + 1j * rng.normal(size=(dim, dim))
    h2 = sp.csr_matrix(h2 + h2.conj().T)
    v = np.zeros(dim, dtype=complex)
    v[0] = 1.0
    out = propagate_piecewise([(h1, 0.3), (h2, 0.5)], v)
    ref = scipy.linalg.expm(-1j * 0.5 * h2.toarray()) @ (
        scipy.linalg.expm(-1j * 0.3 * h1.toarray()) @ v
    )
    assert np.abs(out - ref).max() < 1e-10
    assert np.linalg.norm(out) == pytest.approx(1.0, abs=1e-10)


def test_propagator_on_subspace_requires_orthonormal_basis():
    space, h, psi0 = _two_level_rabi()
    bad = StateVector(space, np.array([1.0, 1.0], dtype=complex))  # unnormalized
    with pytest.raises(ValueError):
        propagator_on_subspace(h, [psi0, bad], (0.0, 0.1))


def test_integrator_settings_validation():
    with pytest.raises(ValueError):
        IntegratorSettings(method="euler")
    with pytest.raises(ValueError):
        IntegratorSettings(method="rk4_fixed")  # missing dt
    with pytest.raises(ValueError):
        IntegratorSettings(rtol=0.0)
