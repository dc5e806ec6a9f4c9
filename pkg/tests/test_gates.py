import numpy as np
import pytest

from catms import gates
from catms.model import GateConfig, Schedule
from catms.states import CatParity, QubitBasisState, basis_state


def _cfg(**kw):
    base = dict(n_qubits=2, kerr=2 * np.pi * 5.0, alpha=2.0,
                j_coupling=2 * np.pi * 0.5, bus_dim=8, kpo_dim=14)
    base.update(kw)
    return GateConfig.from_alpha(**base)


def test_loop_geometry_closed_form():
    cfg = _cfg()
    t_g = gates.gate_time(cfg)
    assert abs(gates.chi(t_g, cfg)) < 1e-12
    assert gates.beta(t_g, cfg) == pytest.approx(-np.pi / 2.0, abs=1e-12)
    geo = gates.geometry(cfg)
    assert geo.r == pytest.approx(2.0 * cfg.j_coupling * cfg.alpha / cfg.delta)
    assert geo.theta == pytest.approx(2.0 * np.pi)


def test_gate_time_scaling():
    cfg = _cfg()
    assert gates.gate_time(cfg) == pytest.approx(np.pi / (2.0 * cfg.j_coupling * cfg.alpha))
    cfg4 = _cfg(m_loops=4)
    assert gates.gate_time(cfg4) == pytest.approx(2.0 * gates.gate_time(cfg))


def test_loop_trajectory_matches_closed_form():
    cfg = _cfg()
    sched = Schedule.constant(cfg.delta, cfg.j_coupling, gates.gate_time(cfg))
    for frac in (0.2, 0.5, 0.8, 1.0):
        t = frac * gates.gate_time(cfg)
        chi_n, beta_n = gates.loop_trajectory(sched, cfg.alpha, t)
        assert abs(chi_n - gates.chi(t, cfg)) < 1e-10
        assert beta_n == pytest.approx(gates.beta(t, cfg), abs=1e-10)


def test_ms_unitary_is_unitary():
    cfg = _cfg(bus_dim=6)
    u = gates.ms_closed_form(0.37 * gates.gate_time(cfg), cfg).to_dense()
    assert np.abs(u @ u.conj().T - np.eye(u.shape[0])).max() < 1e-10


def test_ms_target_matrix_entangles():
    # exp(i pi/2 Sx^2) maps |++> to a maximally entangled superposition
    u = gates.ms_target_matrix(2)
    col = u[:, 0]
    assert abs(col[0]) == pytest.approx(1.0 / np.sqrt(2.0), abs=1e-12)
    assert abs(col[3]) == pytest.approx(1.0 / np.sqrt(2.0), abs=1e-12)
    assert np.abs(u @ u.conj().T - np.eye(4)).max() < 1e-12


def test_average_gate_fidelity_properties():
    assert gates.average_gate_fidelity(np.eye(4)) == pytest.approx(1.0)
    assert gates.average_gate_fidelity(np.exp(1j * 0.7) * np.eye(4)) == pytest.approx(1.0)
    with pytest.raises(ValueError):
        gates.average_gate_fidelity(np.zeros((2, 3)))


def test_error_bias_identity():
    cfg = _cfg()
    t_g = gates.gate_time(cfg)
    assert gates.verify_error_bias(cfg, 0.3 * t_g, 1, bus_dim=12) < 1e-10
    with pytest.raises(ValueError):
        gates.verify_error_bias(cfg, 1.5 * t_g, 1)


def test_switch_plan_invariants():
    cfg = _cfg()
    plan = gates.plan_detuning_switch(cfg, 0.05)
    sched = plan.to_schedule(cfg.j_coupling)
    chi_end, beta_end = gates.loop_trajectory(sched, cfg.alpha, plan.t_total)
    assert abs(chi_end) < 1e-10
    assert beta_end == pytest.approx(-np.pi / 2.0, abs=1e-10)
    chi_tau, _ = gates.loop_trajectory(sched, cfg.alpha, plan.tau)
    assert abs(chi_tau) < 1e-10
    with pytest.raises(ValueError):
        gates.plan_detuning_switch(cfg, 1.5)


def test_run_gate_effective_coherent():
    cfg = _cfg()
    res = gates.run_gate(cfg, mode="effective")
    assert res.f_avg == pytest.approx(1.0, abs=1e-5)
    assert abs(res.beta_total + np.pi / 2.0) < 1e-10
    # deterministic
    res2 = gates.run_gate(cfg, mode="effective")
    assert np.array_equal(res.propagator, res2.propagator)


def test_run_gate_full_coherent_small():
    cfg = _cfg(n_qubits=1, bus_dim=8, kpo_dim=16)
    res = gates.run_gate(cfg, mode="full")
    assert res.f_avg > 0.999


def test_run_gate_reduced_basis_matches_full():
    cfg = _cfg(n_qubits=1, bus_dim=8, kpo_dim=20)
    full = gates.run_gate(cfg, mode="full")
    red = gates.run_gate(cfg.replace(kpo_levels=6), mode="full")
    assert red.f_avg == pytest.approx(full.f_avg, abs=2e-4)


def test_no_leakage_on_pure_cat_product():
    cfg = _cfg(bus_dim=4, kpo_dim=16)
    psi = basis_state(cfg, QubitBasisState((CatParity.EVEN, CatParity.ODD)))
    assert gates.no_leakage(psi, cfg) == pytest.approx(1.0, abs=1e-10)


def test_output_fidelity_of_ideal_output():
    cfg = _cfg(bus_dim=4, kpo_dim=16)
    inp = QubitBasisState((CatParity.EVEN, CatParity.EVEN))
    out = gates.ideal_output_state(cfg, inp)
    assert gates.output_fidelity(out, cfg, inp) == pytest.approx(1.0, abs=1e-10)


def test_run_gate_rejects_unknown_mode():
    with pytest.raises(ValueError):
        gates.run_gate(_cfg(), mode="hybrid")


def test_parity_conservation_in_coherent_run():
    # the full gate couples KPOs only through photon exchange with the bus,
    # so the joint photon-number parity of the final state is unchanged
    cfg = _cfg(n_qubits=1, bus_dim=8, kpo_dim=14)
    res = gates.run_gate(cfg, mode="full", input_state=QubitBasisState((CatParity.EVEN,)),
                         store_final=True)
    space = cfg.space
    amps = res.final_state.amplitudes
    parity = np.array([(-1) ** sum(space.multi_index(k)) for k in range(space.dim)])
    odd_weight = float(np.sum(np.abs(amps[parity < 0]) ** 2))
    assert odd_weight < 1e-10
