"""Closed-form MS-gate geometry, detuning-switch planning, gate runs and metrics."""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np
import scipy.linalg
import scipy.sparse as sp

from . import model
from .dynamics import (
    EvolutionResult,
    IntegratorSettings,
    evolve_density,
    propagate_piecewise,
)
from .hilbert import (
    DensityMatrix,
    SparseOperator,
    StateVector,
    annihilation,
    dagger,
    partial_trace,
)
from .model import GateConfig, Schedule
from .states import (
    CatParity,
    QubitBasisState,
    all_basis_states,
    basis_state,
    single_mode_cat_vector,
)


# --- closed-form loop geometry ------------------------------------------------


def chi(t: float, config: GateConfig) -> complex:
    """Bus displacement χ(t) = (2iJα/Δ)(1 − e^{iΔt})."""
    d = config.delta
    return (2j * config.j_coupling * config.alpha / d) * (1.0 - np.exp(1j * d * t))


def beta(t: float, config: GateConfig) -> float:
    """Geometric phase β(t) = (2Jα/Δ)²(sin Δt − Δt)."""
    d = config.delta
    r = 2.0 * config.j_coupling * config.alpha / d
    return float(r**2 * (np.sin(d * t) - d * t))


def resonance_detuning(j_coupling: float, alpha: float, m_loops: int = 1) -> float:
    """Δ = 4 sqrt(m) J α, the condition for β(t_g) = −π/2."""
    if j_coupling <= 0 or alpha <= 0:
        raise ValueError("J and alpha must be positive")
    return 4.0 * np.sqrt(m_loops) * j_coupling * alpha


def gate_time(config: GateConfig) -> float:
    """t_g = 2mπ/Δ (us)."""
    return 2.0 * np.pi * config.m_loops / config.delta


@dataclass(frozen=True)
class MsGeometry:
    r: float  # loop radius 2Jα/Δ
    theta: float  # rotation angle Δ t_g
    t_g: float
    beta_tg: float
    area: float  # enclosed area π r²


def geometry(config: GateConfig) -> MsGeometry:
    r = 2.0 * config.j_coupling * config.alpha / config.delta
    t_g = gate_time(config)
    return MsGeometry(
        r=r,
        theta=config.delta * t_g,
        t_g=t_g,
        beta_tg=-2.0 * config.m_loops * np.pi * r**2,
        area=np.pi * r**2,
    )


def loop_trajectory(schedule: Schedule, alpha: float, t: float) -> tuple[complex, float]:
    """(χ, β) at time t for a piecewise-constant (Δ, J) schedule.

    χ follows dχ/dt = 2J(t)α e^{iφ(t)} with the accumulated phase φ = ∫Δ;
    β is the exact double-integral geometric phase, accumulated analytically
    per segment.
    """
    chi_acc = 0.0 + 0.0j
    beta_acc = 0.0
    for t0, t1, d, j, phi0 in schedule.segments():
        if t <= t0:
            break
        u = min(t, t1) - t0
        g = 2.0 * j * alpha * np.exp(1j * phi0)
        if abs(d) < 1e-14:
            beta_acc += float(np.imag(np.conj(g) * chi_acc)) * u
            chi_acc = chi_acc + g * u
        else:
            beta_acc += float(
                np.imag(np.conj(g) * chi_acc * (1.0 - np.exp(-1j * d * u)) / (1j * d))
            )
            beta_acc += (abs(g) ** 2 / d) * (np.sin(d * u) / d - u)
            chi_acc = chi_acc + g * (np.exp(1j * d * u) - 1.0) / (1j * d)
    return complex(chi_acc), float(beta_acc)


# --- closed-form propagators ----------------------------------------------------


def _sx_qubit_matrix(n_qubits: int) -> np.ndarray:
    sx = np.array([[0, 1], [1, 0]], dtype=complex)
    total = np.zeros((2**n_qubits, 2**n_qubits), dtype=complex)
    for k in range(n_qubits):
        term = np.array([[1.0 + 0j]])
        for j in range(n_qubits):
            term = np.kron(term, sx if j == k else np.eye(2))
        total += term
    return 0.5 * total


def ms_target_matrix(n_qubits: int) -> np.ndarray:
    """Ideal gate on the 2^N computational subspace: exp(+i (π/2) S_x²)."""
    sx = _sx_qubit_matrix(n_qubits)
    return scipy.linalg.expm(1j * (np.pi / 2.0) * (sx @ sx))


def ms_unitary(config: GateConfig, chi_val: complex, beta_val: float,
               space=None) -> SparseOperator:
    """exp(−i[χ a0† S_x + h.c.]) · exp(−iβ S_x²) on the qubit-level space.

    Built block-wise in the S_x eigenbasis: on each eigenspace with eigenvalue
    s the first factor is the bus displacement-type exponential of s·(χa0†+h.c.)
    and the second is the phase e^{−iβs²}.
    """
    space = space or config.qubit_space
    n = config.n_qubits
    if space.mode_dims[1:] != (2,) * n:
        raise ValueError("ms_unitary expects a bus mode followed by N two-level modes")
    bus_dim = space.mode_dims[0]
    sxq = _sx_qubit_matrix(n)
    w, v = np.linalg.eigh(sxq)
    a = np.diag(np.sqrt(np.arange(1, bus_dim)), 1).astype(complex)
    gen = chi_val * a.conj().T + np.conj(chi_val) * a
    g, q = np.linalg.eigh(gen)
    u = np.zeros((space.dim, space.dim), dtype=complex)
    # group degenerate S_x eigenvalues so each bus exponential is computed once
    for s in np.unique(np.round(w, 12)):
        sel = np.abs(w - s) < 1e-9
        proj = v[:, sel] @ v[:, sel].conj().T
        bus_block = (q * np.exp(-1j * s * g)) @ q.conj().T
        u += np.kron(bus_block, np.exp(-1j * beta_val * s**2) * proj)
    return SparseOperator(space, sp.csr_matrix(u))


def ms_closed_form(t: float, config: GateConfig) -> SparseOperator:
    """Exact effective-model propagator U_MS(t) on the qubit-level space."""
    return ms_unitary(config, chi(t, config), beta(t, config))


# --- fidelity and leakage metrics -------------------------------------------------


def average_gate_fidelity(m: np.ndarray, dim: int | None = None) -> float:
    """F̄ = (Tr(MM†) + |Tr M|²) / (D² + D); global-phase insensitive."""
    m = np.asarray(m)
    if m.ndim != 2 or m.shape[0] != m.shape[1]:
        raise ValueError("M must be square")
    d = dim if dim is not None else m.shape[0]
    if d != m.shape[0]:
        raise ValueError("dimension mismatch")
    return float((np.trace(m @ m.conj().T).real + abs(np.trace(m)) ** 2) / (d**2 + d))


def ideal_output_state(config: GateConfig, input_state: QubitBasisState) -> StateVector:
    """Target state U_MS(t_g)|input⟩ (β = −π/2) on the full space."""
    target = ms_target_matrix(config.n_qubits)
    col = target[:, input_state.index]
    basis = all_basis_states(config.n_qubits, bus_fock=input_state.bus_fock)
    amps = np.zeros(config.space.dim, dtype=complex)
    for k, b in enumerate(basis):
        if abs(col[k]) > 0:
            amps += col[k] * basis_state(config, b).amplitudes
    return StateVector(config.space, amps)


def output_fidelity(state, config: GateConfig, input_state: QubitBasisState) -> float:
    """F_out = ⟨ψ_out|ρ|ψ_out⟩ against the ideal MS output for the given input."""
    from .states import fidelity

    return fidelity(state, ideal_output_state(config, input_state))


def _reduced_mode(state, mode) -> np.ndarray:
    if isinstance(state, DensityMatrix):
        return partial_trace(state, mode)
    space = state.space
    k = space.mode_index(mode)
    m = np.moveaxis(state.amplitudes.reshape(space.mode_dims), k, 0)
    m = m.reshape(space.mode_dims[k], -1)
    return m @ m.conj().T


def _cat_manifold_map(bus_dim: int, cat_rows: np.ndarray, n_qubits: int):
    """Sparse map onto the joint cat manifold: I_bus ⊗ C ⊗ … ⊗ C.

    cat_rows is the 2×d matrix whose rows are the ⟨C±| bras of one KPO.
    """
    a = sp.identity(bus_dim, dtype=complex, format="csr")
    c = sp.csr_matrix(cat_rows)
    for _ in range(n_qubits):
        a = sp.kron(a, c, format="csr")
    return a


def _joint_cat_population(state, amap) -> float:
    if isinstance(state, DensityMatrix):
        proj = amap @ state.entries @ amap.conj().T.tocsr()
        return float(np.real(np.trace(proj)))
    w = amap @ state.amplitudes
    return float(np.real(np.vdot(w, w)))


def no_leakage(state, config: GateConfig) -> float:
    """P_C: population left in the joint cat manifold (no KPO has leaked)."""
    dim = state.space.mode_dims[1]
    cat_rows = np.stack([
        single_mode_cat_vector(dim, config.alpha, parity).conj()
        for parity in (CatParity.EVEN, CatParity.ODD)
    ])
    amap = _cat_manifold_map(state.space.mode_dims[0], cat_rows, config.n_qubits)
    return _joint_cat_population(state, amap)


# --- error bias -----------------------------------------------------------------


def verify_error_bias(config: GateConfig, tau_err: float, qubit: int,
                      error_axis: str = "x", bus_dim: int = 40) -> float:
    """Max-entry distance ‖U(t_g←τ) σ U(τ←0) − σ U_MS(t_g)‖ from closed forms.

    Both segment propagators are built independently from the loop integrals,
    so this checks the bias identity rather than assuming it.
    """
    t_g = gate_time(config)
    if not 0.0 < tau_err < t_g:
        raise ValueError("tau_err must lie strictly inside (0, t_g)")
    cfg = config.replace(bus_dim=bus_dim)
    space = cfg.qubit_space
    sched = Schedule.constant(cfg.delta, cfg.j_coupling, t_g)

    chi1, beta1 = loop_trajectory(sched, cfg.alpha, tau_err)
    u1 = ms_unitary(cfg, chi1, beta1, space)
    # propagator of the remaining arc, integrated from scratch with φ0 = Δτ
    tail = Schedule(np.array([0.0, t_g - tau_err]),
                    np.array([cfg.delta]), np.array([cfg.j_coupling]))
    g_phase = cfg.delta * tau_err
    chi2, beta2 = _loop_with_initial_phase(tail, cfg.alpha, g_phase)
    u2 = ms_unitary(cfg, chi2, beta2, space)

    chit, betat = loop_trajectory(sched, cfg.alpha, t_g)
    utot = ms_unitary(cfg, chit, betat, space)

    err = model.pauli(space, qubit, error_axis)
    lhs = (u2 @ err @ u1).to_dense()
    rhs = (err @ utot).to_dense()
    return float(np.abs(lhs - rhs).max())


def _loop_with_initial_phase(schedule: Schedule, alpha: float, phi0: float):
    shifted = Schedule(schedule.times, schedule.delta, schedule.j_coupling)
    chi_acc = 0.0 + 0.0j
    beta_acc = 0.0
    for t0, t1, d, j, seg_phi in shifted.segments():
        u = t1 - t0
        g = 2.0 * j * alpha * np.exp(1j * (seg_phi + phi0))
        beta_acc += float(
            np.imag(np.conj(g) * chi_acc * (1.0 - np.exp(-1j * d * u)) / (1j * d))
        )
        beta_acc += (abs(g) ** 2 / d) * (np.sin(d * u) / d - u)
        chi_acc = chi_acc + g * (np.exp(1j * d * u) - 1.0) / (1j * d)
    return complex(chi_acc), float(beta_acc)


# --- detuning switch ---------------------------------------------------------------


@dataclass(frozen=True)
class SwitchPlan:
    """Two-segment detuning plan robust to gate-time imperfection ε_a."""

    tau: float
    delta_before: float
    delta_after: float
    m_loops: int
    m_after: int
    t_total: float

    def to_schedule(self, j_coupling: float) -> Schedule:
        return Schedule(
            np.array([0.0, self.tau, self.t_total]),
            np.array([self.delta_before, self.delta_after]),
            np.array([j_coupling, j_coupling]),
        )


def plan_detuning_switch(config: GateConfig, eps_a: float, m_after: int = 1) -> SwitchPlan:
    """Δ = 4√m Jα/√(1−ε_a) until τ = 2πm/Δ, then Δ' = 4√m' Jα/√ε_a.

    Total geometric phase is −π/2 and χ vanishes at both τ and the end.
    """
    if not 0.0 < eps_a < 1.0:
        raise ValueError("eps_a must lie in (0, 1)")
    if m_after < 1 or m_after > config.m_loops:
        raise ValueError("need 1 <= m_after <= m_loops")
    j, alpha, m = config.j_coupling, config.alpha, config.m_loops
    d_before = 4.0 * np.sqrt(m) * j * alpha / np.sqrt(1.0 - eps_a)
    tau = 2.0 * np.pi * m / d_before
    d_after = 4.0 * np.sqrt(m_after) * j * alpha / np.sqrt(eps_a)
    t_total = tau + 2.0 * np.pi * m_after / d_after
    plan = SwitchPlan(tau, d_before, d_after, m, m_after, t_total)
    sched = plan.to_schedule(j)
    chi_tau, _ = loop_trajectory(sched, alpha, tau)
    chi_end, beta_end = loop_trajectory(sched, alpha, t_total)
    if abs(chi_tau) > 1e-10 or abs(chi_end) > 1e-10:
        raise AssertionError("switch plan leaves a residual displacement")
    if abs(beta_end + np.pi / 2.0) > 1e-10:
        raise AssertionError("switch plan does not accumulate β = −π/2")
    return plan


# --- gate runner --------------------------------------------------------------------


@dataclass
class GateRunResult:
    mode: str
    t_end: float
    f_avg: float | None = None
    f_out: float | None = None
    p_c: float | None = None
    chi_residual: float = 0.0
    beta_total: float = 0.0
    propagator: np.ndarray | None = None
    final_state: object | None = None


def _bus_number_diag(space) -> np.ndarray:
    stride0 = space.strides()[0]
    return np.arange(space.dim) // stride0


def _static_parts(config: GateConfig, effective: bool):
    """(N0, H_rest, C) with H_segment = Δ·N0 + H_rest + J·C."""
    if effective:
        space = config.qubit_space
        n0 = model.number_op(space, "a0").matrix
        h_rest = sp.csr_matrix((space.dim, space.dim), dtype=complex)
        a0 = annihilation(space, "a0")
        c = (2.0 * config.alpha) * (model.sx_total(config) @ (a0 + dagger(a0)))
        return space, n0, h_rest, c.matrix
    space = config.space
    n0 = model.number_op(space, "a0").matrix
    h_rest = None
    a0d = dagger(annihilation(space, "a0"))
    c = None
    for n in range(1, config.n_qubits + 1):
        hk = model.h_kerr(config, config.kpo_label(n)).matrix
        h_rest = hk if h_rest is None else h_rest + hk
        cross = annihilation(space, config.kpo_label(n)) @ a0d
        cm = (cross + dagger(cross)).matrix
        c = cm if c is None else c + cm
    return space, n0.tocsr(), h_rest.tocsr(), c.tocsr()


def _segment_generators(config: GateConfig, schedule: Schedule, effective: bool):
    space, n0, h_rest, c = _static_parts(config, effective)
    segs = []
    for t0, t1, d, j, _ in schedule.segments():
        h = (d * n0 + h_rest + j * c).tocsr()
        segs.append((h, t1 - t0))
    return space, segs


class _ReducedModel:
    """Full model expressed in the low-lying Kerr eigenlevels of each KPO.

    The cat manifold tops the Kerr spectrum, so keeping the kpo_levels highest
    eigenstates preserves the gate dynamics while shrinking both the dimension
    and the spectral spread that limits the integrator step size. The bus mode
    keeps its Fock basis.
    """

    def __init__(self, config: GateConfig):
        from .hilbert import make_space, number_op, tensor_embed

        levels = config.kpo_levels
        if levels is None:
            raise ValueError("config.kpo_levels is not set")
        self.config = config
        energies, v = model.kerr_level_isometry(
            config.kerr, config.omega_p, config.kpo_dim, levels
        )
        self.isometry = v
        a1 = np.diag(np.sqrt(np.arange(1, config.kpo_dim)), 1).astype(complex)
        a_red = v.conj().T @ a1 @ v
        n_red = v.conj().T @ (a1.conj().T @ a1) @ v
        dims = [config.bus_dim] + [levels] * config.n_qubits
        labels = ["a0"] + [f"a{n}" for n in range(1, config.n_qubits + 1)]
        self.space = make_space(dims, labels)
        sp1 = make_space([levels], ["a"])
        self._embed = lambda m, lbl: tensor_embed(
            SparseOperator(sp1, sp.csr_matrix(m)), self.space, lbl
        )
        self.n0 = number_op(self.space, "a0").matrix.tocsr()
        a0d = dagger(annihilation(self.space, "a0"))
        h_rest = None
        c = None
        self._a_red, self._n_red = a_red, n_red
        for n in range(1, config.n_qubits + 1):
            lbl = config.kpo_label(n)
            hk = self._embed(np.diag(energies), lbl).matrix
            h_rest = hk if h_rest is None else h_rest + hk
            cross = self._embed(a_red, lbl) @ a0d
            cm = (cross + dagger(cross)).matrix
            c = cm if c is None else c + cm
        self.h_rest = h_rest.tocsr()
        self.c = c.tocsr()
        self.cat_red = {}
        for parity in (CatParity.EVEN, CatParity.ODD):
            amps = single_mode_cat_vector(config.kpo_dim, config.alpha, parity)
            red = v.conj().T @ amps
            norm = np.linalg.norm(red)
            if norm < 1.0 - 1e-6:
                raise ValueError(
                    f"cat state loses {1 - norm:.2e} weight in {levels} levels"
                )
            self.cat_red[parity] = red / norm

    def segment_generators(self, schedule: Schedule):
        segs = []
        for t0, t1, d, j, _ in schedule.segments():
            segs.append(((d * self.n0 + self.h_rest + j * self.c).tocsr(), t1 - t0))
        return segs

    def collapse_channels(self):
        from .hilbert import number_op
        from .model import CollapseChannel

        cfg = self.config
        out = []
        if cfg.kappa0 > 0:
            out.append(CollapseChannel(cfg.kappa0, annihilation(self.space, "a0")))
        if cfg.gamma0 > 0:
            out.append(CollapseChannel(cfg.gamma0, number_op(self.space, "a0")))
        for n in range(1, cfg.n_qubits + 1):
            lbl = cfg.kpo_label(n)
            if cfg.kappa > 0:
                out.append(CollapseChannel(cfg.kappa, self._embed(self._a_red, lbl)))
            if cfg.gamma > 0:
                out.append(CollapseChannel(cfg.gamma, self._embed(self._n_red, lbl)))
        return out

    def basis_vector(self, qbs: QubitBasisState) -> np.ndarray:
        bus = np.zeros(self.config.bus_dim, dtype=complex)
        bus[qbs.bus_fock] = 1.0
        v = bus
        for parity in qbs.parities:
            v = np.kron(v, self.cat_red[parity])
        return v

    def target_state(self, input_state: QubitBasisState) -> np.ndarray:
        target = ms_target_matrix(self.config.n_qubits)
        col = target[:, input_state.index]
        amps = np.zeros(self.space.dim, dtype=complex)
        for k, b in enumerate(all_basis_states(self.config.n_qubits,
                                               bus_fock=input_state.bus_fock)):
            if abs(col[k]) > 0:
                amps += col[k] * self.basis_vector(b)
        return amps

    def f_out(self, state, input_state: QubitBasisState) -> float:
        from .states import fidelity

        tgt = StateVector(self.space, self.target_state(input_state))
        return fidelity(state, tgt)

    def p_c(self, state) -> float:
        cat_rows = np.stack([
            self.cat_red[parity].conj()
            for parity in (CatParity.EVEN, CatParity.ODD)
        ])
        amap = _cat_manifold_map(self.config.bus_dim, cat_rows,
                                 self.config.n_qubits)
        return _joint_cat_population(state, amap)


def run_gate(config: GateConfig, schedule: Schedule | None = None,
             input_state: QubitBasisState | None = None, mode: str = "full",
             settings: IntegratorSettings | None = None, expm_tol: float = 1e-13,
             store_final: bool = False) -> GateRunResult:
    """Simulate the gate to the end of the schedule and compute its metrics.

    Coherent runs (all decay rates zero) propagate the full computational basis
    and report the average gate fidelity; dissipative runs evolve the density
    matrix of `input_state` (default: all qubits in |C+>) and report F_out and,
    in full mode, the no-leakage probability P_C.
    """
    if mode not in ("full", "effective"):
        raise ValueError("mode must be 'full' or 'effective'")
    if schedule is None:
        schedule = Schedule.constant(config.delta, config.j_coupling, gate_time(config))
    t_end = schedule.t_end * config.t_gate_factor
    sched = schedule.clipped(t_end)

    chi_res, beta_tot = loop_trajectory(sched, config.alpha, t_end)
    result = GateRunResult(mode=mode, t_end=t_end,
                           chi_residual=abs(chi_res), beta_total=beta_tot)

    decohering = any(
        r > 0 for r in (config.kappa0, config.gamma0, config.kappa, config.gamma)
    )
    effective = mode == "effective"
    reduced = None
    if not effective and config.kpo_levels is not None:
        reduced = _ReducedModel(config)
        space = reduced.space
        segs = reduced.segment_generators(sched)
    else:
        space, segs = _segment_generators(config, sched, effective)
    n0diag = _bus_number_diag(space)
    phase_end = sched.phase(t_end)
    unrotate = np.exp(1j * phase_end * n0diag)

    n = config.n_qubits
    target = ms_target_matrix(n)

    if not decohering:
        if effective:
            columns = [_qubit_basis_vector(space, config, k) for k in range(2**n)]
        elif reduced is not None:
            columns = [reduced.basis_vector(b) for b in all_basis_states(n)]
        else:
            columns = [
                basis_state(config, b).amplitudes for b in all_basis_states(n)
            ]
        finals = [unrotate * propagate_piecewise(segs, v, expm_tol) for v in columns]
        b = np.stack(columns, axis=1)
        u = np.stack(finals, axis=1)
        w = b.conj().T @ u
        m = target.conj().T @ w
        result.propagator = m
        result.f_avg = average_gate_fidelity(m)
        if input_state is not None:
            psi = StateVector(space, finals[input_state.index])
            if reduced is not None:
                result.f_out = reduced.f_out(psi, input_state)
                result.p_c = reduced.p_c(psi)
            else:
                result.f_out = _output_fid(psi, config, input_state, effective)
                if not effective:
                    result.p_c = no_leakage(psi, config)
            if store_final:
                result.final_state = psi
        return result

    if input_state is None:
        input_state = QubitBasisState((CatParity.EVEN,) * n)
    if effective:
        psi0 = StateVector(space, _qubit_basis_vector(space, config, input_state.index))
        channels = model.collapse_ops_effective(config)
    elif reduced is not None:
        psi0 = StateVector(space, reduced.basis_vector(input_state))
        channels = reduced.collapse_channels()
    else:
        psi0 = basis_state(config, input_state)
        channels = model.collapse_ops_full(config)
    rho = psi0.outer()
    settings = settings or IntegratorSettings(rtol=1e-7, atol=1e-9)
    t0 = 0.0
    for h, dt in segs:
        hop = SparseOperator(space, h)
        res = evolve_density(hop, channels, rho, (0.0, dt), settings,
                             check_positivity=False)
        rho = res.final
        t0 += dt
    rho = DensityMatrix(space, (unrotate[:, None] * rho.entries) * unrotate.conj()[None, :])
    if reduced is not None:
        result.f_out = reduced.f_out(rho, input_state)
        result.p_c = reduced.p_c(rho)
    else:
        result.f_out = _output_fid(rho, config, input_state, effective)
        if not effective:
            result.p_c = no_leakage(rho, config)
    if store_final:
        result.final_state = rho
    return result


def _qubit_basis_vector(space, config: GateConfig, index: int) -> np.ndarray:
    v = np.zeros(space.dim, dtype=complex)
    # bus |0> is the leading block; qubit bits are the fast indices
    v[index] = 1.0
    return v


def _output_fid(state, config: GateConfig, input_state: QubitBasisState,
                effective: bool) -> float:
    from .states import fidelity

    if not effective:
        return output_fidelity(state, config, input_state)
    target = ms_target_matrix(config.n_qubits)
    amps = np.zeros(state.space.dim, dtype=complex)
    amps[: 2**config.n_qubits] = target[:, input_state.index]
    return fidelity(state, StateVector(state.space, amps))
