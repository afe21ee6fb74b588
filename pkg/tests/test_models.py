import numpy as np
import pytest

from strobesim.bath import convert_units
from strobesim.models import (
    ScheduleError,
    five_qubit_model,
    five_qubit_stabilizers,
    frequency_components,
    gate_schedule,
    ghz_state,
    initial_state,
    interaction_couplings,
    logical_zero_state,
    propagator,
    toric_vertex_model,
)


class TestToricVertexModel:
    def test_spectrum(self):
        m = toric_vertex_model(1.0)
        assert np.allclose(m.spectral.eigenvalues, [-0.5, 0.5])
        for p in m.spectral.projectors:
            assert abs(np.trace(p).real - 8) < 1e-9

    def test_omega_max_single_gap(self):
        for omega in (0.3, 1.0, 20e3):
            assert abs(toric_vertex_model(omega).omega_max - omega) < 1e-9 * omega

    def test_fig4_parameter_conversion(self):
        d = convert_units({"omega": 20e3, "nu_c": 4e3, "beta": 0.2e-3}, "to_dimensionless", 5e-6)
        assert abs(d["omega"] - 0.1) < 1e-12
        assert abs(d["nu_c"] - 0.02) < 1e-12
        assert abs(d["beta"] - 40.0) < 1e-9

    def test_couplings_unit_norm_hermitian(self):
        m = toric_vertex_model(2.0)
        assert len(m.couplings) == 4
        for a in m.couplings:
            assert np.linalg.norm(a - a.conj().T) < 1e-14
            assert abs(np.linalg.norm(a, 2) - 1.0) < 1e-12

    def test_rejects_nonpositive_omega(self):
        with pytest.raises(ValueError):
            toric_vertex_model(0.0)


class TestFiveQubitModel:
    def test_ground_space(self):
        m = five_qubit_model(1.0)
        assert abs(m.spectral.eigenvalues[0] + 4.0) < 1e-10
        assert abs(np.trace(m.spectral.projectors[0]).real - 2) < 1e-9

    def test_stabilizers_commute(self):
        stabs = five_qubit_stabilizers()
        for i, a in enumerate(stabs):
            for b in stabs[i + 1:]:
                assert np.linalg.norm(a @ b - b @ a) < 1e-13

    def test_transition_spectrum(self):
        gamma = 1.3
        m = five_qubit_model(gamma)
        allowed = gamma * np.array([-8, -6, -4, -2, 0, 2, 4, 6, 8])
        for w in m.frequencies:
            assert np.min(np.abs(allowed - w)) < 1e-9

    def test_logical_zero_in_code_space(self):
        psi = logical_zero_state()
        assert abs(np.linalg.norm(psi) - 1.0) < 1e-12
        for s in five_qubit_stabilizers():
            assert np.linalg.norm(s @ psi - psi) < 1e-12


class TestGateSchedule:
    @pytest.mark.parametrize("phi", [0.01, 0.05, 0.1])
    def test_toric_cycle_product(self, phi):
        omega = 1.0
        T = 2 * phi / omega
        m = toric_vertex_model(omega)
        sched = gate_schedule(m, T, None, R="0.1")
        exact = m.spectral.propagator(T)
        assert np.linalg.norm(sched.cycle_unitary - exact, 2) <= 1e-10

    @pytest.mark.parametrize("phi", [0.01, 0.05, 0.1])
    def test_five_qubit_cycle_product(self, phi):
        gamma = 1.0
        T = phi / gamma
        m = five_qubit_model(gamma)
        sched = gate_schedule(m, T, None, R="0.05")
        exact = m.spectral.propagator(T)
        assert np.linalg.norm(sched.cycle_unitary - exact, 2) <= 1e-10

    def test_product_independent_of_gate_window(self):
        m = toric_vertex_model(1.0)
        a = gate_schedule(m, 0.1, None, R="0.1")
        b = gate_schedule(m, 0.1, None, R="1")
        assert np.linalg.norm(a.cycle_unitary - b.cycle_unitary) < 1e-14

    def test_offsets_span_window(self):
        m = toric_vertex_model(1.0)
        sched = gate_schedule(m, 0.1, None, R="0.4")
        offs = sched.gate_times()
        assert offs[0] == 0.0
        assert abs(offs[-1] - sched.tau_g) < 1e-15
        gaps = np.diff(offs)
        assert np.allclose(gaps, gaps[0])

    def test_window_longer_than_cycle_rejected(self):
        m = toric_vertex_model(1.0)
        with pytest.raises(ScheduleError):
            gate_schedule(m, 0.1, 0.2)


class TestPropagator:
    def setup_method(self):
        self.m = toric_vertex_model(1.0)
        self.T = 0.1
        self.sched = gate_schedule(self.m, self.T, None, R="0.1")

    def test_t_zero_identity(self):
        for mu, sched in (("tar", None), ("sim", self.sched)):
            assert np.linalg.norm(propagator(self.m, sched, mu, 0.0) - np.eye(16)) < 1e-14

    @pytest.mark.parametrize("n", [1, 3, 17, 100])
    def test_stroboscopic_identity(self, n):
        u_sim = propagator(self.m, self.sched, "sim", n * self.T)
        u_tar = propagator(self.m, None, "tar", n * self.T)
        assert np.linalg.norm(u_sim - u_tar, 2) <= 1e-9

    def test_mid_cycle_all_gates_fired(self):
        u = propagator(self.m, self.sched, "sim", 0.5 * self.T)
        full = np.eye(16, dtype=complex)
        for g in self.sched.gates:
            full = g @ full
        assert np.linalg.norm(u - full) < 1e-13

    def test_periodicity(self):
        # the within-cycle increment does not depend on the cycle index
        t_off = 0.37 * self.T
        incs = []
        for n in (0, 4, 9):
            u1 = propagator(self.m, self.sched, "sim", n * self.T + t_off)
            u0 = propagator(self.m, self.sched, "sim", n * self.T)
            incs.append(u1 @ u0.conj().T)
        assert np.linalg.norm(incs[0] - incs[1]) < 1e-12
        assert np.linalg.norm(incs[0] - incs[2]) < 1e-12

    def test_negative_time_rejected(self):
        with pytest.raises(ValueError):
            propagator(self.m, None, "tar", -1.0)

    @pytest.mark.parametrize("n", [1, 10, 100])
    def test_five_qubit_stroboscopic_identity(self, n):
        m = five_qubit_model(1.0)
        T = 0.05
        sched = gate_schedule(m, T, None, R="0.1")
        u_sim = propagator(m, sched, "sim", n * T)
        u_tar = propagator(m, None, "tar", n * T)
        assert np.linalg.norm(u_sim - u_tar, 2) <= 1e-9


class TestInteractionCouplings:
    def setup_method(self):
        self.m = toric_vertex_model(1.0)
        self.T = 0.1
        self.sched = gate_schedule(self.m, self.T, None, R="0.1")

    def test_t_zero_unchanged(self):
        for a, a0 in zip(interaction_couplings(self.m, self.sched, "sim", 0.0), self.m.couplings):
            assert np.linalg.norm(a - a0) < 1e-14

    def test_frequency_sum_matches_conjugation(self):
        t = 0.73 * self.T
        for k in range(4):
            comps = frequency_components(self.m, k)
            summed = sum(np.exp(-1j * w * t) * c for w, c in comps.items())
            direct = interaction_couplings(self.m, None, "tar", t)[k]
            assert np.linalg.norm(summed - direct) < 1e-12

    def test_stroboscopic_match(self):
        t = 7 * self.T
        for a, b in zip(interaction_couplings(self.m, self.sched, "sim", t),
                        interaction_couplings(self.m, None, "tar", t)):
            assert np.linalg.norm(a - b, 2) <= 1e-10

    def test_hermitian_unit_norm(self):
        for a in interaction_couplings(self.m, self.sched, "sim", 0.43 * self.T):
            assert np.linalg.norm(a - a.conj().T) < 1e-12
            assert abs(np.linalg.norm(a, 2) - 1.0) < 1e-10


class TestFrequencyComponents:
    def test_toric_z_has_no_static_block(self):
        m = toric_vertex_model(1.0)
        comps = frequency_components(m, 0)
        assert sorted(comps) == [-1.0, 1.0]

    def test_completeness(self):
        m = five_qubit_model(1.0)
        for k in range(5):
            comps = frequency_components(m, k)
            total = sum(comps.values())
            assert np.linalg.norm(total - m.couplings[k]) < 1e-12

    def test_hermiticity_pairing(self):
        m = five_qubit_model(0.7)
        comps = frequency_components(m, 2)
        for w, block in comps.items():
            assert np.linalg.norm(comps[-w] - block.conj().T) < 1e-12

    def test_ground_space_protection(self):
        m = toric_vertex_model(1.0)
        pg = m.ground_projector
        for z in m.couplings:
            assert np.linalg.norm(pg @ z @ pg) < 1e-12


class TestInitialStates:
    def test_ghz_in_ground_space(self):
        m = toric_vertex_model(1.0)
        psi = ghz_state()
        assert abs(psi.conj() @ (m.ground_projector @ psi) - 1.0) < 1e-12

    def test_lookup(self):
        m = toric_vertex_model(1.0)
        assert np.allclose(initial_state(m, "ghz"), ghz_state())
        with pytest.raises(ValueError):
            initial_state(m, "logical0")
