"""Acceptance suite: one test per criterion, each printing a PASS/FAIL line.

The trajectory-based criteria share one session-scoped execution of every
shipped preset (see conftest.preset_runs), so the whole module costs about
as much as running the presets once.
"""

import dataclasses
from contextlib import contextmanager

import numpy as np

from strobesim import bath, bounds, models, oracle, tcl2
from strobesim.operators import superop_norm, trace_distance


@contextmanager
def criterion(num, desc):
    try:
        yield
    except Exception:
        print(f"ACCEPTANCE {num:02d}: FAIL - {desc}")
        raise
    print(f"ACCEPTANCE {num:02d}: PASS - {desc}")


def by_label(results, mu):
    return {r.label: r for r in results if r.mu == mu}


def test_criterion_01_exact_simulator_identity():
    with criterion(1, "gate products reproduce exp(-i H T) to 1e-10"):
        for phi in (0.01, 0.05, 0.1):
            m4 = models.toric_vertex_model(1.0)
            sched = models.gate_schedule(m4, 2 * phi, None, R="0.1")
            err = np.linalg.norm(sched.cycle_unitary - m4.spectral.propagator(2 * phi), 2)
            assert err <= 1e-10, f"toric phi={phi}: {err:.2e}"
            m5 = models.five_qubit_model(1.0)
            sched = models.gate_schedule(m5, phi, None, R="0.05")
            err = np.linalg.norm(sched.cycle_unitary - m5.spectral.propagator(phi), 2)
            assert err <= 1e-10, f"five-qubit phi={phi}: {err:.2e}"


def test_criterion_02_window_integral_cross_validation():
    with criterion(2, "D0 closed form matches small-R quadrature and regime forms"):
        for c in np.linspace(0.0, 1.0, 5):
            for x in np.linspace(-10.0, 10.0, 5):
                for eps in np.linspace(-0.2, 0.2, 5):
                    got = bounds.d_numeric(c, x, eps, R=1e-6)
                    want = bounds.d0_closed(c, x, eps)
                    assert abs(got - want) <= 1e-6, (c, x, eps)
        deep = [
            (0.7, 1e-4, 0.05, "I"),
            (0.3, 1e-4, 0.05, "I"),
            (0.7, 0.05, 1e-4, "II"),
            (1.0, 0.05, 1e-4, "II"),
            (0.7, 50.0, 1e-3, "III"),
            (0.4, 80.0, 1e-3, "III"),
        ]
        for c, x, eps, reg in deep:
            approx = bounds.d0_regime(c, x, eps, reg)
            exact = bounds.d0_closed(c, x, eps)
            assert abs(approx - exact) <= 0.10 * abs(exact), (c, x, eps, reg)


def test_criterion_03_ohmic_integral_identities():
    with criterion(3, "zero-T kernel origin and window-overlap identities"):
        eta, nu_c = 0.02, 0.02
        spec = bath.ohmic_bath(eta, nu_c)
        f0 = bath.correlation_quadrature(0.0, spec)
        assert abs(f0 - eta * nu_c ** 2) <= 1e-9 * eta * nu_c ** 2
        # frequency-side overlap with the exact window integral
        for (et, eps, xc) in ((0.02, 0.002, 0.5), (0.02, 0.02, 0.02)):
            got = bounds.ohmic_window_overlap_x(et, eps, xc)
            want = bounds.ohmic_window_overlap_closed(et, eps, xc)
            assert abs(got - want) <= 1e-8, (et, eps, xc)
        # time-side linearized overlap reproduces the closed form exactly
        got = bounds.ohmic_window_overlap(0.02, 0.02, 0.02)
        assert abs(got - bounds.ohmic_window_overlap_closed(0.02, 0.02, 0.02)) <= 1e-10


def test_criterion_04_tcl2_physicality(preset_runs):
    with criterion(4, "trace/Hermiticity within 1e-8 on all presets; RK4 order >= 3.5"):
        checked = 0
        for name, results in sorted(preset_runs.items()):
            for res in results:
                assert res.record.trace_dev.max() <= 1e-8, (name, res.label, res.mu)
                assert res.record.herm_dev.max() <= 1e-8, (name, res.label, res.mu)
                checked += 1
        assert checked >= 30
        model = models.toric_vertex_model(0.1)
        sched = models.gate_schedule(model, 1.0, None, R="0.1")
        strong = bath.ohmic_bath(eta=0.6, nu_c=1.0, beta=2.0)
        psi = models.ghz_state()
        rho0 = np.outer(psi, psi.conj())
        finals = {}
        for spc in (20, 40, 80):
            rec = tcl2.evolve(rho0, "sim", model, sched, strong,
                              n_cycles=4, steps_per_cycle=spc)
            finals[spc] = rec.rhos[-1]
        order = np.log2(np.linalg.norm(finals[20] - finals[40])
                        / np.linalg.norm(finals[40] - finals[80]))
        assert order >= 3.5, f"observed order {order:.2f}"


def test_criterion_05_population_and_gate_window_ordering(preset_runs):
    with criterion(5, "vertex-model population floor and d_cross ordering in R"):
        sims = by_label(preset_runs["fig4A"], "sim")
        tars = by_label(preset_runs["fig4A"], "tar")
        for res in tars.values():
            pg = tcl2.metrics(res.record, res.model)["P_g"]
            assert pg.min() >= 0.85, f"target P_g dipped to {pg.min():.3f}"
        d_final = {label: res.d_cross[-1] for label, res in sims.items()}
        assert d_final["R0.01"] < d_final["R0.1"] < d_final["R0.4"], d_final


def test_criterion_06_error_decreases_with_cycle_time(preset_runs):
    with criterion(6, "fixed-time error decreases as the cycle time grows"):
        sims = by_label(preset_runs["fig4B"], "sim")
        t_common = min(res.record.times[-1] for res in sims.values())
        finals = []
        for label, res in sorted(sims.items(), key=lambda kv: kv[1].record.T):
            n_at = int(round(t_common / res.record.T))
            finals.append((res.record.T, res.d_cross[n_at]))
        for (t_a, d_a), (t_b, d_b) in zip(finals[:-1], finals[1:]):
            assert d_b < d_a, f"d_cross rose from T={t_a:g} ({d_a:.3e}) to T={t_b:g} ({d_b:.3e})"


def test_criterion_07_intermediate_cutoff_magnitudes(preset_runs):
    with criterion(7, "x_c ~ 1 errors stay small and grow with the cutoff"):
        sims = by_label(preset_runs["fig5"], "sim")
        finals = {}
        for label, res in sims.items():
            assert res.d_cross.max() <= 2e-3, (label, res.d_cross.max())
            finals[label] = res.d_cross[-1]
        assert finals["xc0.5"] < finals["xc1"] < finals["xc2"], finals


def test_criterion_08_code_model_ordering_and_saturation(preset_runs):
    with criterion(8, "five-qubit d_cross ordered in R and flat at late times"):
        sims = by_label(preset_runs["fig7A"], "sim")
        n_max = next(iter(sims.values())).record.n_cycles
        d_final = {label: res.d_cross[-1] for label, res in sims.items()}
        assert (d_final["R0.01"] < d_final["R0.1"]
                < d_final["R0.4"] < d_final["R0.7"]), d_final
        q0 = 3 * n_max // 4
        for label, res in sims.items():
            tail = res.d_cross[q0:]
            spread = (tail.max() - tail.min()) / tail.mean()
            assert spread <= 0.20, (label, spread)


def test_criterion_09_oracle_equivalence():
    with criterion(9, "TCL-2 matches the exact mode oracle with g^4 scaling"):
        model = models.toric_vertex_model(0.1)
        sched = models.gate_schedule(model, 1.0, None, R="0.1")
        single = dataclasses.replace(model, couplings=[model.couplings[0]])
        psi = models.ghz_state()
        rho0 = np.outer(psi, psi.conj())
        om = 0.13
        errors = []
        gs = 0.02 * np.array([1.0, 1.5, 2.25, 3.375])
        for g in gs:
            spec = oracle.JointSpec(model=single, modes=[(om, g)], n_max=9)
            run = oracle.exact_reduced_evolution(rho0, spec, "sim", sched, 20)
            rec = tcl2.evolve(rho0, "sim", single, sched,
                              bath.discrete_bath([(om, g)]), n_cycles=20)
            errors.append(max(trace_distance(a, b)
                              for a, b in zip(run.rhos, rec.rhos)))
        assert errors[0] <= 5e-3, f"base deviation {errors[0]:.2e}"
        slope = np.polyfit(np.log(gs), np.log(errors), 1)[0]
        assert slope >= 3.5, f"log-log slope {slope:.2f}"


def test_criterion_10_channel_difference_consistency(preset_runs):
    with criterion(10, "difference map structure and trajectory agreement"):
        rng = np.random.default_rng(17)
        model = models.toric_vertex_model(0.1)
        sched = models.gate_schedule(model, 1.0, None, R="0.1")
        spec = bath.ohmic_bath(eta=0.02, nu_c=0.02, beta=40.0)
        _, d2, d3 = bounds.channel_difference_maps(4, model, sched, spec)
        total = bounds.perturbative_difference(4, model, sched, spec)
        for _ in range(4):
            x = rng.normal(size=(16, 16)) + 1j * rng.normal(size=(16, 16))
            x = x + x.conj().T
            assert np.linalg.norm(d3.apply(x) - d2.apply(x.conj().T).conj().T) <= 1e-10
            assert abs(np.trace(total.apply(x / np.trace(x)))) <= 1e-12
        assert superop_norm(bounds.perturbative_difference(3, model, None, spec)) == 0.0
        sim_01 = by_label(preset_runs["fig4A"], "sim")["R0.1"]
        for n in (2, 5, 10):
            norm = superop_norm(bounds.perturbative_difference(n, model, sched, spec))
            d = sim_01.d_cross[n]
            assert norm <= 3.0 * d and norm >= d / 3.0, (n, norm, d)


def test_criterion_11_bound_table_sanity():
    with criterion(11, "closed-form bound reductions and monotonicity"):
        rng = np.random.default_rng(23)
        base = bounds.RegimeParams(eps_max=0.1, x_bar=0.0, x_c=0.02, n_cycles=10,
                                   r_gate=0.0, pair_count=9, f0=8e-6,
                                   sup_pos=8e-6, sup_all=8e-6)
        rep = bounds.table_bound(base)
        assert rep.multi_gate_term == 0.0
        assert abs(rep.total - base.n_cycles ** 2 * base.pair_count
                   * base.eps_max * base.f0) < 1e-18
        p3 = dataclasses.replace(base, x_bar=20.0, x_c=1.5, eps_max=0.01)
        rep3 = bounds.table_bound(p3)
        assert abs(rep3.stroboscopic_term
                   - p3.n_cycles * p3.pair_count * p3.eps_max
                   * p3.a_B * p3.sup_all) < 1e-18
        for _ in range(20):
            n = int(rng.integers(1, 50))
            r = float(rng.uniform(0.0, 0.9))
            e = float(rng.uniform(0.1, 0.2))     # stays inside regime I
            a = bounds.table_bound(dataclasses.replace(base, n_cycles=n, r_gate=r,
                                                       eps_max=e))
            b = bounds.table_bound(dataclasses.replace(base, n_cycles=n + 3,
                                                       r_gate=r + 0.05,
                                                       eps_max=e))
            assert b.total >= a.total
