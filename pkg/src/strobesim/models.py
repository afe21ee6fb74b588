"""Target models, exact gate schedules, and interaction-picture couplings.

Two built-in models: a four-qubit vertex Hamiltonian -(omega/2) X1X2X3X4
with Z couplings to the bath, and the five-qubit code Hamiltonian
-gamma * sum_j S_j with its stabilizer generators. Each comes with an
exact gate schedule whose per-cycle product equals exp(-i H T).
"""

from __future__ import annotations

from dataclasses import dataclass
from fractions import Fraction

import numpy as np

from .operators import SpectralDecomposition, hermitian_eig, pauli_string, unitary_exp


class ScheduleError(ValueError):
    """Invalid schedule parameters."""


@dataclass
class ModelSpec:
    """A target Hamiltonian with its bath-coupling operators."""

    name: str
    n_qubits: int
    h_tar: np.ndarray
    couplings: list                  # Hermitian, unit spectral norm
    spectral: SpectralDecomposition
    frequencies: np.ndarray          # all transition frequencies, incl. 0
    omega_max: float
    energy_scale: float              # omega (vertex model) or gamma (code)
    ground_projector: np.ndarray = None

    @property
    def dim(self) -> int:
        return 2 ** self.n_qubits


@dataclass
class PulseSchedule:
    """Periodic instantaneous-gate sequence; product over one cycle is exact."""

    T: float
    tau_g: float
    gates: list                      # g_1 ... g_M in firing order
    offsets: list                    # Fractions of T, first 0, last tau_g/T
    cycle_unitary: np.ndarray        # g_M ... g_1

    @property
    def M(self) -> int:
        return len(self.gates)

    @property
    def R(self) -> Fraction:
        return self.offsets[-1]

    def gate_times(self):
        return [float(o) * self.T for o in self.offsets]


def _transition_frequencies(eigenvalues: np.ndarray) -> np.ndarray:
    diffs = {0.0}
    for e in eigenvalues:
        for ep in eigenvalues:
            diffs.add(round(ep - e, 12))
    return np.array(sorted(diffs))


def _build_model(name, n_qubits, h_tar, couplings, energy_scale) -> ModelSpec:
    spectral = hermitian_eig(h_tar)
    freqs = _transition_frequencies(spectral.eigenvalues)
    model = ModelSpec(
        name=name,
        n_qubits=n_qubits,
        h_tar=h_tar,
        couplings=couplings,
        spectral=spectral,
        frequencies=freqs,
        omega_max=float(np.max(np.abs(freqs))),
        energy_scale=energy_scale,
        ground_projector=spectral.projectors[0],
    )
    return model


def toric_vertex_model(omega: float) -> ModelSpec:
    """Four-qubit vertex model -(omega/2) X1X2X3X4 with Z_k couplings."""
    if omega <= 0:
        raise ValueError("omega must be positive")
    n = 4
    xxxx = pauli_string([(k, "X") for k in range(1, 5)], n)
    h = -(omega / 2.0) * xxxx
    couplings = [pauli_string([(k, "Z")], n) for k in range(1, 5)]
    return _build_model("toric_vertex", n, h, couplings, omega)


FIVE_QUBIT_STABILIZERS = (
    ((1, "X"), (2, "Z"), (3, "Z"), (4, "X")),
    ((2, "X"), (3, "Z"), (4, "Z"), (5, "X")),
    ((1, "X"), (3, "X"), (4, "Z"), (5, "Z")),
    ((1, "Z"), (2, "X"), (4, "X"), (5, "Z")),
)


def five_qubit_model(gamma: float) -> ModelSpec:
    """Five-qubit-code Hamiltonian -gamma * (S1+S2+S3+S4) with Z_k couplings."""
    if gamma <= 0:
        raise ValueError("gamma must be positive")
    n = 5
    h = np.zeros((32, 32), dtype=complex)
    for stab in FIVE_QUBIT_STABILIZERS:
        h -= gamma * pauli_string(stab, n)
    couplings = [pauli_string([(k, "Z")], n) for k in range(1, 6)]
    return _build_model("five_qubit", n, h, couplings, gamma)


def five_qubit_stabilizers() -> list:
    return [pauli_string(s, 5) for s in FIVE_QUBIT_STABILIZERS]


def ghz_state() -> np.ndarray:
    """(|0000> + |1111>)/sqrt(2), in the vertex-model ground space."""
    psi = np.zeros(16, dtype=complex)
    psi[0] = psi[15] = 1.0 / np.sqrt(2.0)
    return psi


def logical_zero_state() -> np.ndarray:
    """Logical |0> of the five-qubit code (+1 of all S_j and of Z1..Z5 product)."""
    psi = np.zeros(32, dtype=complex)
    psi[0] = 1.0
    for s in five_qubit_stabilizers():
        psi = psi + s @ psi
    return psi / np.linalg.norm(psi)


def initial_state(model: ModelSpec, state_id: str) -> np.ndarray:
    states = {
        ("toric_vertex", "ghz"): ghz_state,
        ("five_qubit", "logical0"): logical_zero_state,
    }
    key = (model.name, state_id)
    if key not in states:
        raise ValueError(f"unknown initial state {state_id!r} for model {model.name!r}")
    return states[key]()


def as_fraction(x, name: str = "value") -> Fraction:
    """Exact rational from int/Fraction/decimal string; floats are snapped."""
    if isinstance(x, Fraction):
        return x
    if isinstance(x, int):
        return Fraction(x)
    if isinstance(x, str):
        return Fraction(x)
    f = Fraction(x).limit_denominator(10 ** 6)
    if x != 0 and abs(float(f) - x) > 1e-9 * abs(x):
        raise ValueError(f"{name}={x} is not close to a small rational; pass a string")
    return f


# gate tables: (pre-rotations applied as +pi/4 pulses, the phi rotation, then
# the inverses), one conjugation block per Hamiltonian term.

_TORIC_BLOCK = (
    ((3, "Y"), (4, "X")),
    ((3, "Z"), (2, "Y")),
    ((1, "X"), (2, "Z")),
)

# One block per stabilizer. Note: the second block's middle pre-rotation uses
# Z4X5; with Z4Z5 the five-gate conjugation lands on X2Z3Z4Z5 instead of S2
# and the cycle product fails to reproduce exp(-i H T).
_FIVE_QUBIT_BLOCKS = (
    (((1, "X"), (2, "X")), ((2, "Y"), (3, "X")), ((3, "Y"), (4, "X"))),
    (((3, "Z"), (5, "Y")), ((4, "Z"), (5, "X")), ((2, "X"), (5, "Y"))),
    (((1, "X"), (3, "Y")), ((3, "Z"), (4, "X")), ((4, "Y"), (5, "Z"))),
    (((4, "X"), (5, "X")), ((2, "Y"), (5, "Y")), ((1, "Z"), (2, "Z"))),
)


def _conjugation_block(pre1, pre2, mid, phi: float, n: int) -> list:
    q = np.pi / 4.0
    g1 = unitary_exp(pauli_string(pre1, n), q)
    g2 = unitary_exp(pauli_string(pre2, n), q)
    g3 = unitary_exp(pauli_string(mid, n), phi)
    return [g1, g2, g3, g2.conj().T, g1.conj().T]


def gate_list(model: ModelSpec, T: float) -> list:
    """The exact gate sequence for one cycle, in firing order."""
    if model.name == "toric_vertex":
        phi = model.energy_scale * T / 2.0   # T = 2 phi / omega
        return _conjugation_block(*_TORIC_BLOCK, phi, 4)
    if model.name == "five_qubit":
        phi = model.energy_scale * T         # phi = gamma T
        gates = []
        for block in _FIVE_QUBIT_BLOCKS:
            gates.extend(_conjugation_block(*block, phi, 5))
        return gates
    raise ScheduleError(f"no built-in gate sequence for model {model.name!r}")


def gate_schedule(model: ModelSpec, T: float, tau_g, *, R=None) -> PulseSchedule:
    """Build the periodic schedule; gates equally spaced over [0, tau_g].

    Gate i fires at offset (i-1) * tau_g / (M-1). ``R`` (= tau_g/T) may be
    given exactly as a Fraction or decimal string; otherwise it is snapped
    from tau_g/T.
    """
    if R is None:
        R = as_fraction(tau_g / T, "tau_g/T")
    else:
        R = as_fraction(R, "R")
    if not 0 < R <= 1:
        raise ScheduleError(f"need 0 < tau_g <= T, got R={R}")
    gates = gate_list(model, T)
    M = len(gates)
    offsets = [Fraction(i, M - 1) * R for i in range(M)] if M > 1 else [Fraction(0)]
    cycle = np.eye(model.dim, dtype=complex)
    for g in gates:
        cycle = g @ cycle
    exact = model.spectral.propagator(T)
    err = np.linalg.norm(cycle - exact, 2)
    if err > 1e-10:
        raise ScheduleError(f"gate product deviates from exp(-i H T) by {err:.2e}")
    return PulseSchedule(T=T, tau_g=float(R) * T, gates=gates, offsets=offsets,
                         cycle_unitary=cycle)


def partial_products(model: ModelSpec, schedule: PulseSchedule) -> list:
    """U_j = g_j ... g_1 for j = 0..M (U_0 = identity, U_M = cycle unitary)."""
    out = [np.eye(model.dim, dtype=complex)]
    for g in schedule.gates:
        out.append(g @ out[-1])
    return out


def propagator(model: ModelSpec, schedule, mu: str, t: float) -> np.ndarray:
    """System-only evolution operator U_mu(t).

    For mu="sim" this is the ordered product of all gates fired strictly
    inside (0, t]; at t = N T the new cycle's leading gate has not yet
    fired, so U_sim(NT) = U_tar(NT) holds exactly.
    """
    if t < 0:
        raise ValueError("t must be nonnegative")
    if mu == "tar":
        return model.spectral.propagator(t)
    if mu != "sim":
        raise ValueError(f"mu must be 'tar' or 'sim', got {mu!r}")
    if schedule is None:
        raise ScheduleError("mu='sim' requires a schedule")
    T = schedule.T
    p = int(np.floor(t / T + 1e-9))
    tbar = t - p * T
    if tbar < 1e-9 * T:
        tbar = 0.0
    u = np.linalg.matrix_power(schedule.cycle_unitary, p)
    for g, o in zip(schedule.gates, schedule.offsets):
        ot = float(o) * T
        fired = (ot < tbar * (1 + 1e-12)) if ot > 0 else (tbar > 0)
        if fired:
            u = g @ u
    return u


def interaction_couplings(model: ModelSpec, schedule, mu: str, t: float) -> list:
    """Interaction-picture coupling operators U_mu(t)^dag A_k U_mu(t)."""
    u = propagator(model, schedule, mu, t)
    return [u.conj().T @ a @ u for a in model.couplings]


def frequency_components(model: ModelSpec, k: int, op: np.ndarray = None) -> dict:
    """Decompose coupling k (or ``op``) as sum_w A(w) with A(w) = sum P_e A P_e'.

    Keys are transition frequencies w = e' - e with a nonvanishing block;
    A(-w) = A(w)^dag and the components sum back to the operator.
    """
    a = model.couplings[k] if op is None else op
    spec = model.spectral
    comps = {}
    for i, (e, p) in enumerate(zip(spec.eigenvalues, spec.projectors)):
        for j, (ep, pp) in enumerate(zip(spec.eigenvalues, spec.projectors)):
            w = round(ep - e, 12)
            block = p @ a @ pp
            if np.linalg.norm(block) < 1e-14:
                continue
            comps[w] = comps.get(w, 0) + block
    return comps
