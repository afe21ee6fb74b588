"""Closed-form error estimates and the second-order channel-difference map.

Everything in this module works in units of the cycle time (T = 1):
dimensionless times a, b, c; dimensionless frequencies x = nu T and
eps = omega T; dimensionless correlation function f~(a) = T^2 f(aT),
obtained by passing a BathSpec through ``BathSpec.dimensionless(T)``.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
import scipy.integrate

from .bath import BathSpec, correlation
from .models import ModelSpec, PulseSchedule, frequency_components, partial_products
from .operators import SuperOperator, hermitian_adjoint_superop, left_superop


def _cphi(z: complex) -> complex:
    """(e^z - 1)/z, series near 0 so removable points stay accurate."""
    if abs(z) < 1e-4:
        return 1.0 + z / 2.0 + z * z / 6.0 + z ** 3 / 24.0 + z ** 4 / 120.0
    return (np.exp(z) - 1.0) / z


def d0_closed(c: float, x: float, eps: float) -> complex:
    """Instantaneous-pulse window integral, exact closed form.

    Equals int_0^c e^{i x a} (e^{i eps (1-a)} - 1) da; the apparent poles
    at x = 0 and x = eps are removable and handled by series evaluation.
    """
    return c * (np.exp(1j * eps) * _cphi(1j * (x - eps) * c) - _cphi(1j * x * c))


def d_numeric(c: float, x: float, eps: float, R: float,
              epsabs: float = 1e-12) -> complex:
    """Finite-pulse window integral by adaptive quadrature.

    int_0^c e^{i x a} [ e^{i eps (1-a)} - e^{i eps [1 - a/R]_+} ] da,
    with [y]_+ = y for y >= 0 and 0 otherwise.
    """
    if R <= 0:
        raise ValueError("R must be positive")

    def integrand(a):
        ramp = max(1.0 - a / R, 0.0)
        return np.exp(1j * x * a) * (np.exp(1j * eps * (1.0 - a)) - np.exp(1j * eps * ramp))

    pts = [R] if 0.0 < R < c else None
    re, re_err = scipy.integrate.quad(lambda a: integrand(a).real, 0.0, c,
                                      points=pts, epsabs=epsabs, limit=300)
    im, im_err = scipy.integrate.quad(lambda a: integrand(a).imag, 0.0, c,
                                      points=pts, epsabs=epsabs, limit=300)
    if max(re_err, im_err) > 1e-10:
        raise RuntimeError(f"window-integral quadrature error {max(re_err, im_err):.1e}")
    return re + 1j * im


def d0_regime(c: float, x: float, eps: float, regime: str) -> complex:
    """Closed approximations of the window integral in the named regime."""
    if regime in ("I", "II"):
        return 1j * eps * c * (1.0 - c / 2.0)
    if regime == "III":
        return -(eps / x) * (1.0 - (1.0 - c) * np.exp(1j * x * c))
    raise ValueError(f"unknown regime {regime!r}")


@dataclass
class RegimeClassification:
    label: str                        # "I" | "II" | "III" | "none"
    ratios: dict
    flags: dict


def classify_regime(eps_max: float, x_bar: float, x_c: float,
                    margin: float = 0.2) -> RegimeClassification:
    """Place (eps_max, x_bar, x_c) into regime I/II/III or none.

    ``margin`` operationalizes "much less than": a <= margin * b counts as
    a << b. All raw ratios are returned so a stricter margin can be
    applied downstream. A one-sided profile centered at zero can satisfy
    the regime-III scale separation while still having support near x = 0;
    that case is flagged rather than classified as III.
    """
    if min(eps_max, abs(x_bar), x_c) < 0 or eps_max == 0:
        raise ValueError("inputs must be nonnegative with eps_max > 0")
    x_hi = abs(x_bar) + x_c
    x_lo = max(abs(x_bar) - x_c, 0.0)
    ratios = {
        "eps_max": eps_max,
        "x_hi_over_eps": x_hi / eps_max,
        "eps_over_x_scale": eps_max / (x_lo if x_lo > 0 else max(x_c, 1e-300)),
        "x_lo": x_lo,
        "x_hi": x_hi,
    }
    flags = {}
    label = "none"
    if x_hi <= margin * eps_max and eps_max <= margin:
        label = "I"
    elif eps_max <= margin * (x_lo if x_lo > 0 else x_c) and x_hi <= margin:
        label = "II"
    elif eps_max <= margin and x_lo >= 1.0 / margin:
        label = "III"
    if label == "none" and eps_max <= margin and x_c >= 1.0 / margin and x_lo < 1.0 / margin:
        flags["iii_separation_support_at_zero"] = True
    return RegimeClassification(label=label, ratios=ratios, flags=flags)


def correlation_stats(spec_dimless: BathSpec, a_max: float = None,
                      n_scan: int = 4000) -> dict:
    """f~(0), sup_{a>=0}|f~|, sup over all a, and a_B, by dense scan.

    By stationarity |f~(-a)| = |f~(a)|, so the two suprema coincide; both
    are reported because the bound formulas quote them separately.
    """
    if spec_dimless.family == "discrete":
        x_c = max(om for om, _ in spec_dimless.modes)
    else:
        x_c = spec_dimless.nu_c
    if a_max is None:
        a_max = max(20.0 / x_c, 5.0)
    grid = np.linspace(0.0, a_max, n_scan)
    vals = np.abs(np.asarray(correlation(grid, spec_dimless)))
    f0 = complex(correlation(0.0, spec_dimless)).real
    sup = float(vals.max())
    return {
        "f0": f0,
        "sup_pos": sup,
        "sup_all": sup,
        "a_B": 1.0 / x_c,
    }


@dataclass
class RegimeParams:
    """Inputs of the closed-form bound: scales, counts, kernel statistics."""

    eps_max: float
    x_bar: float
    x_c: float
    n_cycles: int
    r_gate: float                    # R_M = tau_g / T
    pair_count: int                  # C = (number of transition frequencies)^2
    f0: float
    sup_pos: float
    sup_all: float

    @property
    def a_B(self) -> float:
        return 1.0 / self.x_c


@dataclass
class BoundReport:
    regime: str
    total: float
    stroboscopic_term: float
    multi_gate_term: float
    ratios: dict
    flags: dict

    def as_dict(self) -> dict:
        return {
            "regime": self.regime,
            "total": self.total,
            "terms": {
                "stroboscopic": self.stroboscopic_term,
                "multi_gate": self.multi_gate_term,
            },
            "ratios": self.ratios,
            "flags": self.flags,
        }


def regime_params(model: ModelSpec, schedule: PulseSchedule,
                  spec: BathSpec, n_cycles: int) -> RegimeParams:
    """Assemble bound inputs from a model, schedule and (dimensional) bath."""
    T = schedule.T
    dimless = spec.dimensionless(T)
    stats = correlation_stats(dimless)
    freqs = model.frequencies
    return RegimeParams(
        eps_max=model.omega_max * T,
        x_bar=dimless.center if dimless.family != "discrete" else 0.0,
        x_c=dimless.nu_c if dimless.family != "discrete" else max(om for om, _ in dimless.modes),
        n_cycles=n_cycles,
        r_gate=float(schedule.R),
        pair_count=len(freqs) ** 2,
        f0=stats["f0"],
        sup_pos=stats["sup_pos"],
        sup_all=stats["sup_all"],
    )


def table_bound(params: RegimeParams, margin: float = 0.2) -> BoundReport:
    """Per-alpha^2 simulation-error estimate for the M-gate simulator.

    Regimes I/II: N^2 [ C eps_max f~(0) + 8 R_M sup_{a>=0}|f~| ];
    regime III:   N^2 [ C (1/N) eps_max a_B sup_a|f~| + 8 R_M sup_{a>=0}|f~| ].
    With R_M = 0 these reduce to the single-gate bounds. The overall
    norm-dependent constant is fixed to 1, so totals are indicative.
    """
    cls = classify_regime(params.eps_max, params.x_bar, params.x_c, margin)
    if cls.label == "none":
        raise ValueError(f"parameters are not in regime I/II/III: ratios {cls.ratios}")
    n2 = params.n_cycles ** 2
    gate_term = n2 * 8.0 * params.r_gate * params.sup_pos
    if cls.label in ("I", "II"):
        strobe = n2 * params.pair_count * params.eps_max * params.f0
    else:
        strobe = (n2 / params.n_cycles) * params.pair_count * params.eps_max \
            * params.a_B * params.sup_all
    return BoundReport(
        regime=cls.label,
        total=strobe + gate_term,
        stroboscopic_term=strobe,
        multi_gate_term=gate_term,
        ratios=cls.ratios,
        flags=cls.flags,
    )


def ohmic_window_overlap(eta: float, eps: float, x_c: float, w: float = 1.0,
                         linearized: bool = True) -> complex:
    """int J~(x) D0(1; x) dx for the one-sided bath profile, by quadrature.

    With ``linearized`` the oscillatory factor e^{i eps (1-a)} - 1 is
    replaced by its leading term i eps (1-a), which is the form with the
    exact closed-form value for w = 1.
    """
    def inner(a):
        osc = 1j * eps * (1.0 - a) if linearized else np.exp(1j * eps * (1.0 - a)) - 1.0
        return osc * x_c ** 2 / (1.0 - 1j * a * x_c) ** 2 if w == 1.0 else None

    if w != 1.0:
        raise ValueError("overlap helper is for the w = 1 profile")
    re, _ = scipy.integrate.quad(lambda a: inner(a).real, 0.0, 1.0, epsabs=1e-13)
    im, _ = scipy.integrate.quad(lambda a: inner(a).imag, 0.0, 1.0, epsabs=1e-13)
    return eta * (re + 1j * im)


def ohmic_window_overlap_x(eta: float, eps: float, x_c: float) -> complex:
    """Same overlap evaluated on the frequency side with the exact D0."""
    def integrand(x):
        return eta * x * np.exp(-x / x_c) * d0_closed(1.0, x, eps)

    re, _ = scipy.integrate.quad(lambda x: integrand(x).real, 0.0, 60.0 * x_c,
                                 epsabs=1e-13, limit=300)
    im, _ = scipy.integrate.quad(lambda x: integrand(x).imag, 0.0, 60.0 * x_c,
                                 epsabs=1e-13, limit=300)
    return re + 1j * im


def ohmic_window_overlap_closed(eta: float, eps: float, x_c: float) -> complex:
    """eta * eps * (-x_c + i ln(1 - i x_c)): the closed linearized overlap."""
    return eta * eps * (-x_c + 1j * np.log(1.0 - 1j * x_c))


# -- second-order channel difference -------------------------------------------


def _gl_nodes(lo: float, hi: float, order: int):
    x, w = np.polynomial.legendre.leggauss(order)
    mid, half = 0.5 * (lo + hi), 0.5 * (hi - lo)
    return mid + half * x, half * w


class _PictureOps:
    """Interaction-picture couplings at times in units of the cycle time."""

    def __init__(self, model: ModelSpec, schedule, cycle_time: float = 1.0):
        self.model = model
        self.schedule = schedule
        self.cycle_time = schedule.T if schedule is not None else cycle_time
        self.omegas, self.A = _freq_tensor(model)
        if schedule is not None:
            units = partial_products(model, schedule)[1:]
            b_ops = [u.conj().T @ a @ u for a in model.couplings for u in units]
            _, comp = _freq_tensor(model, b_ops)
            K, M = len(model.couplings), schedule.M
            self.B = comp.reshape(K, M, len(self.omegas), model.dim, model.dim)
            self.off = np.array([float(o) for o in schedule.offsets] + [1.0])

    def eval(self, a_times: np.ndarray, sim_side: bool) -> np.ndarray:
        """Stacked A_k(a) for every requested time: (n_t, K, d, d)."""
        omT = self.omegas * self.cycle_time
        if not sim_side or self.schedule is None:
            ph = np.exp(-1j * np.outer(a_times, omT))
            return np.einsum("tw,kwab->tkab", ph, self.A, optimize=True)
        out = np.empty((len(a_times), self.A.shape[0], self.model.dim, self.model.dim),
                       dtype=complex)
        for i, a in enumerate(a_times):
            p = int(np.floor(a + 1e-12))
            abar = a - p
            seg = int(np.searchsorted(self.off, abar + 1e-12, side="right")) - 1
            seg = min(max(seg, 0), self.B.shape[1] - 1)
            ph = np.exp(-1j * omT * p)
            out[i] = np.tensordot(ph, self.B[:, seg], axes=([0], [1]))
        return out


def _freq_tensor(model: ModelSpec, ops=None):
    omegas = model.frequencies
    bins = {w: i for i, w in enumerate(omegas)}
    source = model.couplings if ops is None else ops
    d = model.dim
    out = np.zeros((len(source), len(omegas), d, d), dtype=complex)
    for i, op in enumerate(source):
        for w, block in frequency_components(model, 0, op=op).items():
            out[i, bins[w]] += block
    return omegas, out


def channel_difference_maps(n_cycles: int, model: ModelSpec, schedule_sim,
                            bath_dimless: BathSpec, schedule_ref=None,
                            gl_order: int = 8) -> tuple:
    """The three second-order difference maps (sandwich, left, right).

    The reference side is the continuous target unless ``schedule_ref``
    supplies a gate sequence of its own. The bath must already be in
    cycle-time units (the coupling scale stays inside the kernel, so the
    summed map is the physical channel difference at second order). The
    third map is the Hermitian adjoint of the second by construction.

    Quadrature: Gauss-Legendre per piecewise-smooth cell for the outer
    integral and for whole inner cells; the split of the inner integral at
    a = b is handled with fresh nodes on the two partial pieces, so the
    triangular domains lose no accuracy at the diagonal.
    """
    if n_cycles < 1:
        raise ValueError("n_cycles must be at least 1")
    d = model.dim
    cycle_time = next((s.T for s in (schedule_sim, schedule_ref) if s is not None), 1.0)
    ref = _PictureOps(model, schedule_ref, cycle_time)
    sim = _PictureOps(model, schedule_sim, cycle_time)
    ref_is_sim_side = schedule_ref is not None

    def eval_delta(ts):
        return ref.eval(ts, ref_is_sim_side) - sim.eval(ts, True)

    # piecewise-smooth cells: unit cycles split at gate offsets of either side
    cuts = {0.0, 1.0}
    for sched in (schedule_ref, schedule_sim):
        if sched is not None:
            cuts.update(float(o) for o in sched.offsets)
    base_edges = np.array(sorted(cuts))
    cells = []                       # (lo, hi) over [0, n_cycles]
    for n in range(n_cycles):
        for lo, hi in zip(base_edges[:-1], base_edges[1:]):
            if hi > lo:
                cells.append((n + lo, n + hi))
    nodes, weights, cell_of = [], [], []
    for ci, (lo, hi) in enumerate(cells):
        x, w = _gl_nodes(lo, hi, gl_order)
        nodes.append(x)
        weights.append(w)
        cell_of.append(np.full(len(x), ci))
    a_nodes = np.concatenate(nodes)
    a_weights = np.concatenate(weights)
    cell_of = np.concatenate(cell_of)
    n_nodes = len(a_nodes)

    delta_a = eval_delta(a_nodes)                        # (n, K, d, d)
    a_ref = ref.eval(a_nodes, ref_is_sim_side)
    a_sim = sim.eval(a_nodes, True)

    diff = a_nodes[:, None] - a_nodes[None, :]
    fmat = np.asarray(correlation(diff.ravel(), bath_dimless)).reshape(diff.shape)

    K = len(model.couplings)
    w_col = a_weights[None, :]
    # whole-cell masks relative to the outer node's own cell
    below = (cell_of[None, :] < cell_of[:, None]).astype(float)
    above = (cell_of[None, :] > cell_of[:, None]).astype(float)

    # partial-cell contributions at each outer node, with fresh inner nodes
    lam_part = np.zeros((n_nodes, K, d, d), dtype=complex)
    bar_part = np.zeros((n_nodes, K, d, d), dtype=complex)
    for i in range(n_nodes):
        lo, hi = cells[cell_of[i]]
        b = a_nodes[i]
        for (plo, phi, dest) in ((lo, b, lam_part), (b, hi, bar_part)):
            if phi <= plo:
                continue
            x, w = _gl_nodes(plo, phi, gl_order)
            fv = np.asarray(correlation(b - x, bath_dimless))
            dv = eval_delta(x)                           # (g, K, d, d)
            dest[i] = np.tensordot(w * fv, dv, axes=([0], [0]))

    total_left = np.zeros((d, d), dtype=complex)
    d1_mat = np.zeros((d * d, d * d), dtype=complex)
    for k in range(K):
        da = delta_a[:, k]
        lam = np.tensordot(fmat * w_col * below, da, axes=([1], [0])) + lam_part[:, k]
        lam_bar = np.tensordot(fmat * w_col * above, da, axes=([1], [0])) + bar_part[:, k]
        for i in range(n_nodes):
            wb = a_weights[i]
            lsum = lam[i] + lam_bar[i]
            d1_mat += np.kron(a_ref[i, k].T, wb * lsum)
            d1_mat += np.kron(lsum.conj(), wb * a_sim[i, k])
            total_left += wb * (a_ref[i, k] @ lam[i]
                                + lam_bar[i].conj().T @ a_sim[i, k])
    delta1 = SuperOperator(d1_mat, d)
    delta2 = SuperOperator(-left_superop(total_left).matrix, d)
    delta3 = hermitian_adjoint_superop(delta2)
    return delta1, delta2, delta3


def perturbative_difference(n_cycles: int, model: ModelSpec, schedule_sim,
                            bath_dimless: BathSpec, schedule_ref=None,
                            gl_order: int = 8) -> SuperOperator:
    """Sum of the three channel-difference maps; see channel_difference_maps."""
    d1, d2, d3 = channel_difference_maps(n_cycles, model, schedule_sim,
                                         bath_dimless, schedule_ref, gl_order)
    return d1 + d2 + d3
