"""Hamiltonians, collapse channels, projectors, and gap/leakage estimates.

Units: all rates and angular frequencies are rad/us. A parameter quoted as
"X/2pi = v MHz" enters as X = 2*pi*v; a bare "kappa = v MHz" enters as
kappa = v (no 2*pi). The CLI config carries an explicit two_pi flag per
parameter so the convention is auditable.
"""
from __future__ import annotations

from dataclasses import dataclass, field, replace
from functools import cached_property

import numpy as np
import scipy.sparse as sp

from .hilbert import (
    HilbertSpace,
    SparseOperator,
    annihilation,
    dagger,
    identity,
    make_space,
    number_op,
    tensor_embed,
)
from .states import (
    CatParity,
    single_mode_cat_vector,
    single_mode_excited_cat_vector,
)

TWO_PI = 2.0 * np.pi


@dataclass(frozen=True)
class GateConfig:
    """All physical parameters of the multiqubit gate (rad/us units).

    alpha is derived from the drive: alpha = sqrt(omega_p / kerr).
    t_gate_factor scales the actual evolution horizon relative to the
    planned schedule (used for systematic gate-time imperfections).
    """

    n_qubits: int
    kerr: float  # K
    omega_p: float  # two-photon drive amplitude
    j_coupling: float  # J
    delta: float  # bus-KPO detuning
    m_loops: int = 1
    kappa0: float = 0.0
    gamma0: float = 0.0
    kappa: float = 0.0
    gamma: float = 0.0
    bus_dim: int = 10
    kpo_dim: int = 25
    kpo_levels: int | None = None
    t_gate_factor: float = 1.0

    def __post_init__(self):
        if self.n_qubits < 1:
            raise ValueError("need at least one KPO")
        for name in ("kerr", "omega_p", "j_coupling", "delta"):
            if getattr(self, name) <= 0:
                raise ValueError(f"{name} must be positive")
        for name in ("kappa0", "gamma0", "kappa", "gamma"):
            if getattr(self, name) < 0:
                raise ValueError(f"{name} must be non-negative")
        if self.m_loops < 1:
            raise ValueError("m_loops must be >= 1")
        if self.kpo_levels is not None and not 2 <= self.kpo_levels <= self.kpo_dim:
            raise ValueError("kpo_levels must lie in [2, kpo_dim]")

    @classmethod
    def from_alpha(cls, n_qubits, kerr, alpha, j_coupling, m_loops=1, delta=None, **kw):
        """Build from the cat amplitude; delta defaults to the resonance value."""
        omega_p = kerr * alpha**2
        if delta is None:
            delta = 4.0 * np.sqrt(m_loops) * j_coupling * alpha
        return cls(
            n_qubits=n_qubits,
            kerr=kerr,
            omega_p=omega_p,
            j_coupling=j_coupling,
            delta=delta,
            m_loops=m_loops,
            **kw,
        )

    @property
    def alpha(self) -> float:
        return float(np.sqrt(self.omega_p / self.kerr))

    @cached_property
    def space(self) -> HilbertSpace:
        """Full space: bus first, then the N KPO modes."""
        dims = [self.bus_dim] + [self.kpo_dim] * self.n_qubits
        labels = ["a0"] + [f"a{n}" for n in range(1, self.n_qubits + 1)]
        return make_space(dims, labels)

    @cached_property
    def qubit_space(self) -> HilbertSpace:
        """Reduced space: bus mode plus one two-level system per KPO."""
        dims = [self.bus_dim] + [2] * self.n_qubits
        labels = ["a0"] + [f"q{n}" for n in range(1, self.n_qubits + 1)]
        return make_space(dims, labels)

    def kpo_label(self, n: int) -> str:
        if not 1 <= n <= self.n_qubits:
            raise ValueError("KPO index out of range")
        return f"a{n}"

    def replace(self, **kw) -> "GateConfig":
        out = replace(self, **kw)
        return out


@dataclass(frozen=True)
class Schedule:
    """Piecewise-constant detuning and coupling over [0, t_end] (times in us).

    The accumulated coupling phase is the integral of delta, so a detuning
    switch keeps the interaction phase continuous across the breakpoint.
    """

    times: np.ndarray  # breakpoints, length M+1, times[0] == 0
    delta: np.ndarray  # per-segment detuning, length M
    j_coupling: np.ndarray  # per-segment coupling, length M

    def __post_init__(self):
        t = np.asarray(self.times, dtype=float)
        d = np.asarray(self.delta, dtype=float)
        j = np.asarray(self.j_coupling, dtype=float)
        if t.ndim != 1 or len(t) < 2 or t[0] != 0.0:
            raise ValueError("breakpoints must start at 0 and contain >= 2 entries")
        if np.any(np.diff(t) <= 0):
            raise ValueError("breakpoints must be strictly increasing")
        if len(d) != len(t) - 1 or len(j) != len(t) - 1:
            raise ValueError("per-segment arrays must have len(times) - 1 entries")
        object.__setattr__(self, "times", t)
        object.__setattr__(self, "delta", d)
        object.__setattr__(self, "j_coupling", j)

    @classmethod
    def constant(cls, delta: float, j_coupling: float, t_end: float) -> "Schedule":
        return cls(np.array([0.0, t_end]), np.array([delta]), np.array([j_coupling]))

    @property
    def t_end(self) -> float:
        return float(self.times[-1])

    @cached_property
    def _phase_bp(self) -> np.ndarray:
        return np.concatenate([[0.0], np.cumsum(self.delta * np.diff(self.times))])

    def phase(self, t: float) -> float:
        """Accumulated coupling phase integral of delta over [0, t]."""
        k = self.segment_index(t)
        return float(self._phase_bp[k] + self.delta[k] * (t - self.times[k]))

    def segment_index(self, t: float) -> int:
        if t < 0 or t > self.t_end + 1e-12:
            raise ValueError("time outside schedule span")
        k = int(np.searchsorted(self.times, t, side="right")) - 1
        return min(max(k, 0), len(self.delta) - 1)

    def segments(self):
        """Yield (t0, t1, delta, j, phase_at_t0) per segment."""
        for k in range(len(self.delta)):
            yield (
                float(self.times[k]),
                float(self.times[k + 1]),
                float(self.delta[k]),
                float(self.j_coupling[k]),
                float(self._phase_bp[k]),
            )

    def clipped(self, t_end: float) -> "Schedule":
        """Restrict (or extend the last segment) to a new end time."""
        if t_end <= 0:
            raise ValueError("t_end must be positive")
        if t_end >= self.t_end:
            times = self.times.copy()
            times[-1] = t_end
            return Schedule(times, self.delta, self.j_coupling)
        k = self.segment_index(t_end)
        if t_end <= self.times[k]:
            # t_end falls exactly on a breakpoint: drop the later segments
            return Schedule(self.times[: k + 1].copy(),
                            self.delta[:k], self.j_coupling[:k])
        times = np.concatenate([self.times[: k + 1], [t_end]])
        return Schedule(times, self.delta[: k + 1], self.j_coupling[: k + 1])


@dataclass(frozen=True)
class CollapseChannel:
    """Lindblad channel: contributes rate * D[op] to the master equation."""

    rate: float
    op: SparseOperator


# --- Hamiltonian builders ----------------------------------------------------


def h_kerr_single(kerr: float, omega_p: float, dim: int) -> SparseOperator:
    """-K a†²a² + Ωp(a² + a†²) on an isolated mode."""
    space = make_space([dim], ["a"])
    a = annihilation(space, "a")
    ad = dagger(a)
    a2 = a @ a
    return (-kerr) * (dagger(a2) @ a2) + omega_p * (a2 + dagger(a2))


def h_kerr(config: GateConfig, mode) -> SparseOperator:
    """Kerr-oscillator Hamiltonian of one KPO, embedded in the full space."""
    k = config.space.mode_index(mode)
    if k == 0:
        raise ValueError("mode 0 is the bus cavity, not a KPO")
    single = h_kerr_single(config.kerr, config.omega_p, config.space.mode_dims[k])
    return tensor_embed(single, config.space, mode)


def kerr_level_isometry(kerr: float, omega_p: float, dim: int, n_levels: int):
    """(energies, isometry) of the n_levels highest single-KPO eigenstates.

    The cat manifold sits at the top of the Kerr spectrum, so the columns
    start with the two cat states and continue down the excited manifolds.
    The isometry maps the reduced level basis back into the Fock basis.
    """
    if not 2 <= n_levels <= dim:
        raise ValueError("n_levels must lie in [2, dim]")
    hk = h_kerr_single(kerr, omega_p, dim).to_dense()
    w, v = np.linalg.eigh(hk)
    order = np.argsort(w)[::-1][:n_levels]
    return w[order].copy(), np.ascontiguousarray(v[:, order])


def h_displaced(config: GateConfig, sign: int, dim: int | None = None) -> SparseOperator:
    """Displaced-frame KPO Hamiltonian -K[4α²a†a - a†²a² ∓ 2α(a†²a + h.c.)].

    Single-mode operator; the vacuum is an exact eigenstate with eigenvalue 0.
    """
    if sign not in (+1, -1):
        raise ValueError("sign must be +1 or -1")
    dim = dim if dim is not None else config.kpo_dim
    space = make_space([dim], ["a"])
    a = annihilation(space, "a")
    ad = dagger(a)
    alpha = config.alpha
    n = ad @ a
    cubic = ad @ ad @ a
    body = 4.0 * alpha**2 * n - dagger(a @ a) @ (a @ a) - sign * 2.0 * alpha * (
        cubic + dagger(cubic)
    )
    return (-config.kerr) * body


def h_int(config: GateConfig, t: float, phase: float | None = None) -> SparseOperator:
    """Bus-KPO coupling Σ_n J a_n a0† e^{iΔt} + h.c. at one instant.

    phase overrides Δ·t for schedules with accumulated detuning phase.
    """
    ph = config.delta * t if phase is None else phase
    space = config.space
    a0d = dagger(annihilation(space, "a0"))
    term = None
    for n in range(1, config.n_qubits + 1):
        an = annihilation(space, config.kpo_label(n))
        piece = config.j_coupling * (an @ a0d)
        term = piece if term is None else term + piece
    term = np.exp(1j * ph) * term
    return term + dagger(term)


def h_total(config: GateConfig, t: float, phase: float | None = None) -> SparseOperator:
    """Full interaction-picture Hamiltonian at one instant."""
    h = h_int(config, t, phase)
    for n in range(1, config.n_qubits + 1):
        h = h + h_kerr(config, config.kpo_label(n))
    return h


def h_static_frame(
    config: GateConfig, delta: float | None = None, j_coupling: float | None = None
) -> SparseOperator:
    """Time-independent generator in the bus rotating frame.

    H~ = Δ a0†a0 + Σ_n H_kerr,n + J Σ_n (a_n a0† + h.c.); the interaction
    picture state is recovered as ψ(t) = e^{+iφ(t) a0†a0} e^{-i H~ t} ψ(0)
    with φ(t) = Δ t (or the schedule's accumulated phase).
    """
    delta = config.delta if delta is None else delta
    j = config.j_coupling if j_coupling is None else j_coupling
    space = config.space
    h = delta * number_op(space, "a0")
    a0d = dagger(annihilation(space, "a0"))
    for n in range(1, config.n_qubits + 1):
        h = h + h_kerr(config, config.kpo_label(n))
        cross = j * (annihilation(space, config.kpo_label(n)) @ a0d)
        h = h + cross + dagger(cross)
    return h


# --- qubit-level (cat-manifold) operators ------------------------------------

_SX = sp.csr_matrix(np.array([[0, 1], [1, 0]], dtype=complex))
_SY = sp.csr_matrix(np.array([[0, 1j], [-1j, 0]], dtype=complex))
_SZ = sp.csr_matrix(np.array([[-1, 0], [0, 1]], dtype=complex))
# basis convention: index 0 = |C+>, index 1 = |C->; sigma+ = |C-><C+|.


def pauli(space: HilbertSpace, n: int, which: str) -> SparseOperator:
    """Pauli operator of qubit n (1-based) embedded in a qubit-level space."""
    mat = {"x": _SX, "y": _SY, "z": _SZ}[which]
    single = SparseOperator(make_space([2], ["q"]), mat)
    return tensor_embed(single, space, f"q{n}")


def sx_total(config: GateConfig) -> SparseOperator:
    """S_x = (1/2) Σ_n σ_n^x on the qubit-level space."""
    space = config.qubit_space
    out = None
    for n in range(1, config.n_qubits + 1):
        p = pauli(space, n, "x")
        out = p if out is None else out + p
    return 0.5 * out


def h_eff_spin_boson(config: GateConfig, t: float, phase: float | None = None) -> SparseOperator:
    """Cat-manifold effective Hamiltonian 2Jα S_x (a0 e^{-iΔt} + a0† e^{iΔt})."""
    ph = config.delta * t if phase is None else phase
    space = config.qubit_space
    a0 = annihilation(space, "a0")
    bus = np.exp(-1j * ph) * a0 + np.exp(1j * ph) * dagger(a0)
    return (2.0 * config.j_coupling * config.alpha) * (sx_total(config) @ bus)


def h_eff_static_frame(
    config: GateConfig, delta: float | None = None, j_coupling: float | None = None
) -> SparseOperator:
    """Rotating-frame version of h_eff_spin_boson: Δ a0†a0 + 2Jα S_x (a0 + a0†)."""
    delta = config.delta if delta is None else delta
    j = config.j_coupling if j_coupling is None else j_coupling
    space = config.qubit_space
    a0 = annihilation(space, "a0")
    return delta * number_op(space, "a0") + (2.0 * j * config.alpha) * (
        sx_total(config) @ (a0 + dagger(a0))
    )


# --- collapse operators -------------------------------------------------------


def collapse_ops_full(config: GateConfig) -> list[CollapseChannel]:
    """Lindblad channels of the full master equation (rates kept separate)."""
    space = config.space
    out = []
    if config.kappa0 > 0:
        out.append(CollapseChannel(config.kappa0, annihilation(space, "a0")))
    if config.gamma0 > 0:
        out.append(CollapseChannel(config.gamma0, number_op(space, "a0")))
    for n in range(1, config.n_qubits + 1):
        lbl = config.kpo_label(n)
        if config.kappa > 0:
            out.append(CollapseChannel(config.kappa, annihilation(space, lbl)))
        if config.gamma > 0:
            out.append(CollapseChannel(config.gamma, number_op(space, lbl)))
    return out


def collapse_ops_effective(config: GateConfig) -> list[CollapseChannel]:
    """Qubit-level channels: biased bit flip per KPO plus unchanged bus channels.

    The dephasing term enters as gamma*alpha^4 * D[identity], which vanishes on
    any state; it is kept so the channel count is auditable.
    """
    space = config.qubit_space
    alpha = config.alpha
    out = []
    if config.kappa0 > 0:
        out.append(CollapseChannel(config.kappa0, annihilation(space, "a0")))
    if config.gamma0 > 0:
        out.append(CollapseChannel(config.gamma0, number_op(space, "a0")))
    y_weight = np.exp(-2.0 * alpha**2)
    rate = config.kappa * alpha**2 / np.sqrt(1.0 - np.exp(-4.0 * alpha**2))
    for n in range(1, config.n_qubits + 1):
        if config.kappa > 0:
            op = pauli(space, n, "x") + (1j * y_weight) * pauli(space, n, "y")
            out.append(CollapseChannel(rate, op))
        if config.gamma > 0:
            out.append(CollapseChannel(config.gamma * alpha**4, identity(space)))
    return out


# --- projectors and analytic estimates ---------------------------------------


def projector_cat(config: GateConfig) -> SparseOperator:
    """P_c = |0><0|_bus ⊗ ⊗_n (|C+><C+| + |C-><C-|) on the full space."""
    space = config.space
    bus = sp.csr_matrix(
        ([1.0 + 0j], ([0], [0])), shape=(config.bus_dim, config.bus_dim)
    )
    p = tensor_embed(SparseOperator(make_space([config.bus_dim], ["b"]), bus), space, "a0")
    for n in range(1, config.n_qubits + 1):
        p = p @ _mode_manifold_projector(config, n, include_excited=False)
    return p


def projector_kpo(config: GateConfig, levels: int = 1) -> SparseOperator:
    """Per-KPO projector onto the cat manifold plus the first excited manifold.

    Truncated at levels=1 (displaced single-photon states); bus left identity.
    """
    if levels != 1:
        raise ValueError("only the first excited manifold is supported")
    p = identity(config.space)
    for n in range(1, config.n_qubits + 1):
        p = p @ _mode_manifold_projector(config, n, include_excited=True)
    return p


def _mode_manifold_projector(config: GateConfig, n: int, include_excited: bool) -> SparseOperator:
    dim = config.kpo_dim
    vecs = [
        single_mode_cat_vector(dim, config.alpha, CatParity.EVEN),
        single_mode_cat_vector(dim, config.alpha, CatParity.ODD),
    ]
    if include_excited:
        vecs += [
            single_mode_excited_cat_vector(dim, config.alpha, CatParity.EVEN),
            single_mode_excited_cat_vector(dim, config.alpha, CatParity.ODD),
        ]
    b = np.stack(vecs, axis=1)
    proj = sp.csr_matrix(b @ b.conj().T)
    single = SparseOperator(make_space([dim], ["a"]), proj)
    return tensor_embed(single, config.space, config.kpo_label(n))


def energy_gap(config: GateConfig) -> float:
    """Cat-to-excited-manifold gap, E_gap ≈ 4Kα² (rad/us)."""
    return 4.0 * config.kerr * config.alpha**2


def leakage_estimate(config: GateConfig) -> float:
    """Order-of-magnitude excitation probability N J² / (E_gap + Δ)².

    Diagnostic only; never used to gate simulation accuracy.
    """
    return config.n_qubits * config.j_coupling**2 / (energy_gap(config) + config.delta) ** 2
