"""Exact joint system + truncated-boson-mode evolution.

Validation reference for the TCL-2 integrator: a handful of oscillator
modes are kept as explicit truncated Hilbert spaces, the joint state is
evolved unitarily (gates enter as instantaneous system pulses), and the
reduced system state is compared against the master-equation trajectory.
Reduced states here are exactly positive and unit trace.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .models import ModelSpec, PulseSchedule
from .operators import partial_trace

DIM_CAP = 4096


class OracleError(ValueError):
    """Joint-space construction or truncation failure."""


@dataclass
class JointSpec:
    """System plus a list of boson modes with per-coupling strengths.

    ``modes`` entries are (omega_m, g_m) where g_m is either a scalar
    (same coupling for every A_k) or a length-K sequence giving the
    coupling of mode m to each system coupling operator.
    """

    model: ModelSpec
    modes: list
    n_max: int = 4
    beta: float = np.inf

    def mode_couplings(self) -> np.ndarray:
        k = len(self.model.couplings)
        out = np.zeros((len(self.modes), k), dtype=complex)
        for i, (_, g) in enumerate(self.modes):
            out[i] = np.full(k, g) if np.isscalar(g) else np.asarray(g)
        return out

    @property
    def joint_dim(self) -> int:
        return self.model.dim * self.n_max ** len(self.modes)


def lowering_operator(n_max: int) -> np.ndarray:
    b = np.zeros((n_max, n_max), dtype=complex)
    for n in range(1, n_max):
        b[n - 1, n] = np.sqrt(n)
    return b


def _embed_mode(op: np.ndarray, which: int, n_modes: int, n_max: int) -> np.ndarray:
    mats = [np.eye(n_max, dtype=complex)] * n_modes
    mats[which] = op
    out = mats[0]
    for m in mats[1:]:
        out = np.kron(out, m)
    return out


def joint_hamiltonian(spec: JointSpec, mu: str = "tar") -> np.ndarray:
    """H = H_sys (x) 1 + 1 (x) sum_m w_m b'b + sum_k A_k (x) B_k.

    For mu="sim" the system part is zero (gates are applied separately as
    instantaneous pulses); for mu="tar" it is the target Hamiltonian.
    """
    if spec.joint_dim > DIM_CAP:
        raise OracleError(f"joint dimension {spec.joint_dim} exceeds cap {DIM_CAP}")
    model = spec.model
    n_modes = len(spec.modes)
    d_sys = model.dim
    d_bath = spec.n_max ** n_modes
    eye_sys = np.eye(d_sys, dtype=complex)
    eye_bath = np.eye(d_bath, dtype=complex)
    h_sys = model.h_tar if mu == "tar" else np.zeros_like(model.h_tar)
    h = np.kron(h_sys, eye_bath)
    b = lowering_operator(spec.n_max)
    number = b.conj().T @ b
    gmat = spec.mode_couplings()
    for i, (omega_m, _) in enumerate(spec.modes):
        h += omega_m * np.kron(eye_sys, _embed_mode(number, i, n_modes, spec.n_max))
        for k, a in enumerate(model.couplings):
            g = gmat[i, k]
            if g == 0:
                continue
            bk = g * b + np.conj(g) * b.conj().T
            h += np.kron(a, _embed_mode(bk, i, n_modes, spec.n_max))
    return h


def _mode_weights(spec: JointSpec) -> np.ndarray:
    """Boltzmann weights over joint mode number states (truncated, renormalized)."""
    n_modes = len(spec.modes)
    if np.isinf(spec.beta):
        w = np.zeros(spec.n_max ** n_modes)
        w[0] = 1.0
        return w
    per_mode = []
    for omega_m, _ in spec.modes:
        p = np.exp(-spec.beta * omega_m * np.arange(spec.n_max))
        per_mode.append(p / p.sum())
    w = per_mode[0]
    for p in per_mode[1:]:
        w = np.kron(w, p)
    return w


def _expm_factory(h: np.ndarray):
    w, v = np.linalg.eigh(h)

    def u_of(t: float) -> np.ndarray:
        return (v * np.exp(-1j * w * t)) @ v.conj().T

    return u_of


@dataclass
class OracleRun:
    times: np.ndarray
    rhos: np.ndarray                  # reduced, interaction picture
    leakage: np.ndarray               # top-truncation-level population
    purity: np.ndarray                # joint purity (pure initial states stay 1)


def exact_reduced_evolution(rho0_sys: np.ndarray, spec: JointSpec, mu: str,
                            schedule: PulseSchedule, n_cycles: int,
                            leak_tol: float = 1e-3) -> OracleRun:
    """Evolve |psi_sys> (x) thermal modes exactly; sample reduced states at NT.

    Outputs are rotated into the interaction picture of the system
    Hamiltonian so they compare directly with TCL-2 records. The initial
    system state must be pure (the shipped validations use pure states;
    mixed system states would mix over decompositions the same way the
    thermal mode state does).
    """
    model = spec.model
    d_sys = model.dim
    n_modes = len(spec.modes)
    d_bath = spec.n_max ** n_modes
    evals, evecs = np.linalg.eigh(rho0_sys)
    if np.sum(evals > 1e-12) != 1:
        raise OracleError("oracle initial system state must be pure")
    psi_sys = evecs[:, np.argmax(evals)]

    T = schedule.T
    h_joint = joint_hamiltonian(spec, "tar" if mu == "tar" else "sim")
    if mu == "tar":
        u_cycle_pieces = [(None, _expm_factory(h_joint)(T))]
    else:
        u_free = _expm_factory(h_joint)
        pieces = []
        offs = [float(o) * T for o in schedule.offsets]
        eye_bath = np.eye(d_bath, dtype=complex)
        for i, g in enumerate(schedule.gates):
            pieces.append(("gate", np.kron(g, eye_bath)))
            t_next = offs[i + 1] if i + 1 < len(offs) else T
            dt = t_next - offs[i]
            if dt > 0:
                pieces.append(("free", u_free(dt)))
        u_cycle_pieces = pieces

    u_cycle = np.eye(d_sys * d_bath, dtype=complex)
    for _, u in u_cycle_pieces:
        u_cycle = u @ u_cycle

    weights = _mode_weights(spec)
    keep_states = [i for i, w in enumerate(weights) if w > 1e-14]
    dims = [d_sys, d_bath]
    top_proj = np.zeros(d_bath)
    # any mode at its highest retained level counts as truncation leakage
    for idx in range(d_bath):
        rem, hit = idx, False
        for _ in range(n_modes):
            rem, lvl = divmod(rem, spec.n_max)
            hit = hit or (lvl == spec.n_max - 1)
        top_proj[idx] = 1.0 if hit else 0.0

    n_samp = n_cycles + 1
    rhos = np.zeros((n_samp, d_sys, d_sys), dtype=complex)
    top_occ = np.zeros(n_samp)
    purity = np.zeros(n_samp)
    for bstate in keep_states:
        w0 = weights[bstate]
        psi = np.kron(psi_sys, np.eye(d_bath, dtype=complex)[:, bstate])
        for n in range(n_samp):
            joint = np.outer(psi, psi.conj())
            rhos[n] += w0 * partial_trace(joint, dims, keep=[0])
            occ = np.abs(psi.reshape(d_sys, d_bath)) ** 2
            top_occ[n] += w0 * float(occ.sum(axis=0) @ top_proj)
            purity[n] += w0 * float(np.vdot(psi, psi).real) ** 2
            if n < n_cycles:
                psi = u_cycle @ psi
    # leakage = growth of the top-level population over its (truncated,
    # renormalized) initial value; the oracle is exact on its own model
    leak = np.maximum(top_occ - top_occ[0], 0.0)
    if np.max(leak) > leak_tol:
        raise OracleError(f"truncation leakage {np.max(leak):.2e} exceeds {leak_tol:g}; "
                          "increase n_max")

    times = T * np.arange(n_samp)
    for n in range(n_samp):
        u_sys = model.spectral.propagator(times[n])
        rhos[n] = u_sys.conj().T @ rhos[n] @ u_sys
    return OracleRun(times=times, rhos=rhos, leakage=leak, purity=purity)
