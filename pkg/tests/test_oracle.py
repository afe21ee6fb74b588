import dataclasses

import numpy as np
import pytest

from strobesim.bath import discrete_bath
from strobesim.models import gate_schedule, ghz_state, toric_vertex_model
from strobesim.operators import trace_distance
from strobesim.oracle import (
    JointSpec,
    OracleError,
    exact_reduced_evolution,
    joint_hamiltonian,
    lowering_operator,
)
from strobesim.tcl2 import evolve

rng = np.random.default_rng(13)


@pytest.fixture(scope="module")
def toric():
    model = toric_vertex_model(0.1)
    sched = gate_schedule(model, 1.0, None, R="0.1")
    single = dataclasses.replace(model, couplings=[model.couplings[0]])
    return model, single, sched


def ghz_density():
    psi = ghz_state()
    return np.outer(psi, psi.conj())


class TestJointHamiltonian:
    def test_ladder_number_spectrum(self):
        b = lowering_operator(2)
        n_op = b.conj().T @ b
        assert np.allclose(np.linalg.eigvalsh(n_op), [0.0, 1.0])

    def test_uncoupled_spectrum_is_tensor_sum(self, toric):
        _, single, _ = toric
        spec = JointSpec(model=single, modes=[(0.4, 0.0)], n_max=3)
        h = joint_hamiltonian(spec, "tar")
        sys_eigs = np.linalg.eigvalsh(single.h_tar)
        expected = np.sort(np.add.outer(sys_eigs, 0.4 * np.arange(3)).ravel())
        assert np.allclose(np.sort(np.linalg.eigvalsh(h)), expected, atol=1e-12)

    def test_hermiticity(self, toric):
        _, single, _ = toric
        for _ in range(3):
            g = rng.normal() + 1j * rng.normal()
            spec = JointSpec(model=single, modes=[(abs(rng.normal()) + 0.1, g)], n_max=4)
            h = joint_hamiltonian(spec, "sim")
            assert np.linalg.norm(h - h.conj().T, 2) < 1e-13

    def test_dimension_cap(self, toric):
        model, _, _ = toric
        spec = JointSpec(model=model, modes=[(1.0, 0.1)] * 3, n_max=8)
        with pytest.raises(OracleError):
            joint_hamiltonian(spec)


class TestExactReducedEvolution:
    def test_uncoupled_reduces_to_closed_system(self, toric):
        _, single, sched = toric
        spec = JointSpec(model=single, modes=[(0.4, 0.0)], n_max=3)
        run = exact_reduced_evolution(ghz_density(), spec, "sim", sched, 5)
        for r in run.rhos:
            # interaction picture: closed-system state is static
            assert np.linalg.norm(r - run.rhos[0]) < 1e-12

    def test_reduced_states_physical(self, toric):
        _, single, sched = toric
        spec = JointSpec(model=single, modes=[(0.13, 0.03)], n_max=5)
        run = exact_reduced_evolution(ghz_density(), spec, "sim", sched, 10)
        for r in run.rhos:
            assert abs(np.trace(r) - 1.0) < 1e-12
            assert np.min(np.linalg.eigvalsh(0.5 * (r + r.conj().T))) > -1e-12
        assert np.max(np.abs(run.purity - 1.0)) < 1e-10

    def test_matches_tcl2_at_weak_coupling(self, toric):
        _, single, sched = toric
        g, om = 0.02, 0.13
        spec = JointSpec(model=single, modes=[(om, g)], n_max=5)
        run = exact_reduced_evolution(ghz_density(), spec, "sim", sched, 20)
        rec = evolve(ghz_density(), "sim", single, sched, discrete_bath([(om, g)]),
                     n_cycles=20)
        dist = [trace_distance(a, b) for a, b in zip(run.rhos, rec.rhos)]
        assert max(dist) <= 5e-3

    def test_truncation_convergence(self, toric):
        _, single, sched = toric
        runs = {}
        for n_max in (5, 10):
            spec = JointSpec(model=single, modes=[(0.13, 0.02)], n_max=n_max)
            runs[n_max] = exact_reduced_evolution(ghz_density(), spec, "sim", sched, 20)
        drift = max(np.linalg.norm(a - b) for a, b in zip(runs[5].rhos, runs[10].rhos))
        assert drift <= 1e-6

    def test_thermal_mode_state(self, toric):
        _, single, sched = toric
        spec = JointSpec(model=single, modes=[(0.13, 0.02)], n_max=6, beta=10.0)
        run = exact_reduced_evolution(ghz_density(), spec, "sim", sched, 5)
        assert abs(np.trace(run.rhos[-1]) - 1.0) < 1e-10

    def test_leakage_abort(self, toric):
        _, single, sched = toric
        spec = JointSpec(model=single, modes=[(0.13, 0.45)], n_max=3)
        with pytest.raises(OracleError):
            exact_reduced_evolution(ghz_density(), spec, "sim", sched, 20)

    def test_mixed_initial_state_rejected(self, toric):
        _, single, sched = toric
        spec = JointSpec(model=single, modes=[(0.13, 0.02)], n_max=4)
        with pytest.raises(OracleError):
            exact_reduced_evolution(np.eye(16) / 16.0, spec, "sim", sched, 2)

    def test_target_side(self, toric):
        _, single, sched = toric
        g, om = 0.02, 0.13
        spec = JointSpec(model=single, modes=[(om, g)], n_max=5)
        run = exact_reduced_evolution(ghz_density(), spec, "tar", sched, 10)
        rec = evolve(ghz_density(), "tar", single, sched, discrete_bath([(om, g)]),
                     n_cycles=10)
        dist = [trace_distance(a, b) for a, b in zip(run.rhos, rec.rhos)]
        assert max(dist) <= 5e-3
