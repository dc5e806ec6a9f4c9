"""Single-KPO protocols: adiabatic cat-state preparation and single-qubit gates.

Both protocols act on one isolated KPO (the bus is decoupled), so every
simulation here is a single-mode problem.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np
import scipy.linalg
import scipy.sparse as sp

from .dynamics import IntegratorSettings, evolve_density, evolve_state
from .hilbert import (
    DensityMatrix,
    SparseOperator,
    StateVector,
    annihilation,
    dagger,
    make_space,
    number_op,
)
from .model import CollapseChannel, h_kerr_single
from .states import CatParity, fidelity, single_mode_cat_vector


# --- cat-state preparation ------------------------------------------------------


@dataclass(frozen=True)
class CatPrepSchedule:
    """Linear amplitude ramp with a sinusoidal counter-detuning on t in [-t0, 0]."""

    t0: float
    alpha: float

    def __post_init__(self):
        if self.t0 <= 0 or self.alpha <= 0:
            raise ValueError("t0 and alpha must be positive")

    def alpha_t(self, t: float) -> float:
        """alpha * (t + t0) / t0; zero at -t0, alpha at 0."""
        self._check(t)
        return self.alpha * (t + self.t0) / self.t0

    def delta_q(self, t: float, kerr: float) -> float:
        """-K sin(pi (t + t0) / t0); zero at both endpoints, -K at midpoint."""
        self._check(t)
        return -kerr * np.sin(np.pi * (t + self.t0) / self.t0)

    def _check(self, t: float):
        if t < -self.t0 - 1e-12 or t > 1e-12:
            raise ValueError("time outside the ramp [-t0, 0]")


def cat_prep_hamiltonian(kerr: float, schedule: CatPrepSchedule, t: float,
                         dim: int = 30) -> SparseOperator:
    """Instantaneous ramp Hamiltonian Ωp(t)(a†²+a²) − Ka†²a² + Δq(t)a†a.

    Ωp(t) = K α_t² so the instantaneous cat amplitude is α_t.
    """
    alpha_t = schedule.alpha_t(t)
    omega_p = kerr * alpha_t**2
    h = h_kerr_single(kerr, omega_p, dim)
    return h + schedule.delta_q(t, kerr) * number_op(h.space, "a")


def ramp_margin(kerr: float, schedule: CatPrepSchedule, n_samples: int = 101) -> float:
    """Dimensionless adiabaticity margin of the displaced-frame condition.

    The displaced-frame generator cannot change the photon number when the
    effective level spacing |Δq − 4Kα_t²| dominates both the cubic coefficient
    2Kα_t and the residual drive sqrt((α_t Δq)² + α̇_t²). Returns the minimum
    ratio over interior sample points (the boundary t = −t0 is excluded, where
    the spacing vanishes identically).
    """
    t0 = schedule.t0
    ts = -t0 + (np.arange(n_samples) + 0.5) * t0 / n_samples
    alpha_dot = schedule.alpha / t0
    worst = np.inf
    for t in ts:
        a_t = schedule.alpha_t(t)
        dq = schedule.delta_q(t, kerr)
        spacing = abs(dq - 4.0 * kerr * a_t**2)
        drive = max(2.0 * kerr * a_t, np.hypot(a_t * dq, alpha_dot))
        worst = min(worst, spacing / drive)
    return float(worst)


@dataclass
class CatPrepResult:
    target_parity: CatParity
    fidelity: float
    final_state: object  # StateVector or DensityMatrix
    margin: float


def run_cat_prep(kerr: float, alpha: float, t0: float, initial_fock: int = 0,
                 kappa: float = 0.0, gamma: float = 0.0, dim: int = 30,
                 settings: IntegratorSettings | None = None) -> CatPrepResult:
    """Ramp from -t0 to 0 and report the fidelity to the target cat state.

    initial_fock = 0 targets |C+>, initial_fock = 1 targets |C->.
    """
    if initial_fock not in (0, 1):
        raise ValueError("initial state must be Fock |0> or |1>")
    schedule = CatPrepSchedule(t0, alpha)
    space = make_space([dim], ["a"])
    v = np.zeros(dim, dtype=complex)
    v[initial_fock] = 1.0
    psi0 = StateVector(space, v)
    h = lambda t: cat_prep_hamiltonian(kerr, schedule, t, dim)
    settings = settings or IntegratorSettings(rtol=1e-9, atol=1e-11)

    parity = CatParity.EVEN if initial_fock == 0 else CatParity.ODD
    target = StateVector(space, single_mode_cat_vector(dim, alpha, parity))

    if kappa > 0 or gamma > 0:
        channels = []
        if kappa > 0:
            channels.append(CollapseChannel(kappa, annihilation(space, "a")))
        if gamma > 0:
            channels.append(CollapseChannel(gamma, number_op(space, "a")))
        res = evolve_density(h, channels, psi0.outer(), (-t0, 0.0), settings)
    else:
        res = evolve_state(h, psi0, (-t0, 0.0), settings)
    final = res.final
    return CatPrepResult(parity, fidelity(final, target), final,
                         ramp_margin(kerr, schedule))


# --- single-qubit gates -----------------------------------------------------------


@dataclass(frozen=True)
class SingleQubitParams:
    """Drive parameters of one KPO: single-photon drive, detuning, Josephson term."""

    xi_p: complex = 0.0
    delta_q: float = 0.0
    xi_j: float = 0.0

    def __post_init__(self):
        if self.xi_j != 0.0 and self.delta_q != 0.0:
            raise ValueError("the Josephson path requires delta_q = 0")


def effective_single_qubit(params: SingleQubitParams, alpha: float):
    """Cat-subspace parameters (Δ̃_q, Ω_1, φ) of the single-KPO drive.

    Δ̃_q = Δ_q α²(coth α² − tanh α²), plus −ξ_J/(α√(2π)) from the Josephson
    term; Ω_1 e^{−iφ} = ξ_p α √tanh α² + ξ_p* α √coth α².

    The Josephson sign follows the cycle average of the displacement drive:
    ⟨C+|cos[2α(a+a†)]|C+⟩ averaged over the carrier is positive, so a
    positive ξ_J lowers |C+⟩ relative to |C−⟩, i.e. contributes −σ_z.
    """
    if alpha <= 0:
        raise ValueError("alpha must be positive")
    a2 = alpha**2
    dtilde = params.delta_q * a2 * (1.0 / np.tanh(a2) - np.tanh(a2))
    if params.xi_j != 0.0:
        dtilde -= params.xi_j / (alpha * np.sqrt(2.0 * np.pi))
    z = params.xi_p * alpha * np.sqrt(np.tanh(a2)) + np.conj(params.xi_p) * alpha * np.sqrt(
        1.0 / np.tanh(a2)
    )
    omega_1 = abs(z)
    phi = float(-np.angle(z)) if omega_1 > 0 else 0.0
    return float(dtilde), float(omega_1), phi


def rotation_parameters(dtilde_q: float, omega_1: float):
    """(Ξ, θ_rot) with Ξ = sqrt(Δ̃_q²/4 + Ω_1²) and θ_rot = arctan(2Ω_1/Δ̃_q)."""
    xi = np.sqrt(dtilde_q**2 / 4.0 + omega_1**2)
    theta_rot = np.arctan2(2.0 * omega_1, dtilde_q)
    return float(xi), float(theta_rot)


def u1_closed_form(xi: float, theta_rot: float, phi: float, t: float) -> np.ndarray:
    """Closed-form cat-qubit rotation, ordered (|C−>, |C+>) so σ_z = diag(1, −1).

    exp(−it[Δ̃_q σ_z/2 + Ω_1 e^{−iφ}σ⁻ + h.c.]) with Δ̃_q = 2Ξ cos θ_rot and
    Ω_1 = Ξ sin θ_rot.
    """
    c, s = np.cos(xi * t), np.sin(xi * t)
    ct, st = np.cos(theta_rot), np.sin(theta_rot)
    return np.array(
        [
            [c - 1j * s * ct, -1j * np.exp(-1j * phi) * s * st],
            [-1j * np.exp(1j * phi) * s * st, c + 1j * s * ct],
        ]
    )


def design_single_qubit_drive(target: str, alpha: float, t_gate: float,
                              use_h_add: bool) -> SingleQubitParams:
    """Drive parameters realizing a Hadamard or NOT gate at the given time.

    Solves Ξ t = π/2 with θ_rot = π/4 (Hadamard) or π/2 (NOT), then inverts
    the cat-subspace parameter map for a real single-photon drive.
    """
    theta = {"hadamard": np.pi / 4.0, "not": np.pi / 2.0}.get(target)
    if theta is None:
        raise ValueError("target must be 'hadamard' or 'not'")
    xi = np.pi / (2.0 * t_gate)
    omega_1 = xi * np.sin(theta)
    dtilde = 2.0 * xi * np.cos(theta)
    a2 = alpha**2
    xi_p = omega_1 / (alpha * (np.sqrt(np.tanh(a2)) + np.sqrt(1.0 / np.tanh(a2))))
    if dtilde == 0.0:
        return SingleQubitParams(xi_p=xi_p)
    if use_h_add:
        return SingleQubitParams(xi_p=xi_p, xi_j=-dtilde * alpha * np.sqrt(2.0 * np.pi))
    return SingleQubitParams(
        xi_p=xi_p, delta_q=dtilde / (a2 * (1.0 / np.tanh(a2) - np.tanh(a2)))
    )


@dataclass
class SingleQubitResult:
    fidelity: float
    propagator: np.ndarray  # 2x2 in the (|C->, |C+>) ordering
    target: np.ndarray
    t_gate: float


def run_single_qubit_gate(kerr: float, omega_p: float, params: SingleQubitParams,
                          use_h_add: bool = False, t_gate: float = 1.0,
                          omega_c: float | None = None, dim: int = 40,
                          n_steps_per_cycle: int = 320) -> SingleQubitResult:
    """Full single-KPO simulation of a cat-qubit rotation vs its closed form.

    Without the Josephson term the Hamiltonian is static and a single matrix
    exponential suffices. With it, the explicitly oscillating displacement
    drive cos[φ_a(a e^{−iω_c t} + a† e^{iω_c t})] (φ_a = 2α) is integrated by
    fixed-step RK4 with the step derated to the carrier frequency ω_c.
    """
    alpha = float(np.sqrt(omega_p / kerr))
    space = make_space([dim], ["a"])
    a = annihilation(space, "a")
    h0 = h_kerr_single(kerr, omega_p, dim)
    h0 = h0 + params.delta_q * number_op(space, "a")
    h0 = h0 + params.xi_p * a + np.conj(params.xi_p) * dagger(a)

    # columns ordered (|C->, |C+>) to match the closed-form matrix convention
    basis = np.stack(
        [
            single_mode_cat_vector(dim, alpha, CatParity.ODD),
            single_mode_cat_vector(dim, alpha, CatParity.EVEN),
        ],
        axis=1,
    )

    if not use_h_add or params.xi_j == 0.0:
        u = scipy.linalg.expm(-1j * t_gate * h0.to_dense())
        cols = u @ basis
    else:
        if omega_c is None:
            omega_c = 800.0 * kerr
        if omega_c <= 10.0 * abs(params.xi_j):
            raise ValueError("omega_c must dominate xi_j for the drive to average")
        phi_a = 2.0 * alpha
        x = phi_a * (a + dagger(a)).to_dense()
        w, vecs = np.linalg.eigh(x)
        cos_x = (vecs * np.cos(w)) @ vecs.conj().T  # cos(phi_a (a + a†))
        n_diag = np.arange(dim)
        h0m = h0.matrix
        xi_j = params.xi_j

        def rhs(t, y):
            rot = np.exp(1j * omega_c * t * n_diag)
            add = rot[:, None] * (cos_x @ (rot.conj()[:, None] * y))
            return -1j * (h0m @ y + xi_j * add)

        dt = 2.0 * np.pi / (omega_c * n_steps_per_cycle)
        n = int(np.ceil(t_gate / dt))
        grid = np.linspace(0.0, t_gate, n + 1)
        y = basis.astype(complex)
        for k in range(n):
            h = grid[k + 1] - grid[k]
            t = grid[k]
            k1 = rhs(t, y)
            k2 = rhs(t + h / 2, y + h / 2 * k1)
            k3 = rhs(t + h / 2, y + h / 2 * k2)
            k4 = rhs(t + h, y + h * k3)
            y = y + (h / 6) * (k1 + 2 * k2 + 2 * k3 + k4)
        cols = y

    dtilde, omega_1, phi = effective_single_qubit(params, alpha)
    xi, theta_rot = rotation_parameters(dtilde, omega_1)
    target = u1_closed_form(xi, theta_rot, phi, t_gate)
    m = target.conj().T @ (basis.conj().T @ cols)
    f = float((np.trace(m @ m.conj().T).real + abs(np.trace(m)) ** 2) / (4 + 2))
    return SingleQubitResult(f, basis.conj().T @ cols, target, t_gate)
