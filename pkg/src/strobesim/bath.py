"""Bath spectral densities, thermal correlation functions, kernel tables.

The continuous family is J(nu) = eta * nu^w * exp(-nu/nu_c) for nu >= 0
(zero below), with the bath initially thermal at inverse temperature beta
(beta = inf for the vacuum). The correlation function

    f(s) = int_0^inf dnu J(nu) [ (1+N(nu)) e^{-i nu s} + N(nu) e^{+i nu s} ]

has closed forms for w = 1 (trigamma sum over Boltzmann factors) and for
beta = inf at any w; adaptive quadrature is the reference implementation
and remains available for cross-checks and other parameter combinations.
Cumulative integrals F(u) = int_0^u f(s) ds, needed for segment-exact
memory integrals, likewise have closed forms (digamma).
"""

from __future__ import annotations

from dataclasses import dataclass, replace
from math import gamma as gamma_fn

import numpy as np
import scipy.integrate
import scipy.special


class BathError(ValueError):
    """Invalid bath parameters or unsupported operation for the family."""


@dataclass(frozen=True)
class BathSpec:
    """Bath family, coupling scale and temperature.

    families: "ohmic" (one-sided J = eta nu^w e^{-nu/nu_c}), "discrete"
    (finite mode list), "shifted_peak" (two-sided exponential profile
    centered at ``center``; used by the bounds module's regime-III
    experiments, not by the shipped dynamics).
    """

    family: str = "ohmic"
    eta: float = 0.0
    w: float = 1.0
    nu_c: float = 1.0
    center: float = 0.0
    modes: tuple = ()                # ((omega_m, g_m), ...)
    beta: float = np.inf
    independent: bool = True

    def __post_init__(self):
        if self.family not in ("ohmic", "discrete", "shifted_peak"):
            raise BathError(f"unknown bath family {self.family!r}")
        if self.eta < 0:
            raise BathError("eta must be nonnegative")
        if self.family != "discrete" and self.nu_c <= 0:
            raise BathError("cutoff frequency must be positive")
        if not (self.beta > 0):
            raise BathError("beta must be positive (inf for zero temperature)")
        if any(om <= 0 for om, _ in self.modes):
            raise BathError("discrete mode frequencies must be positive")

    def dimensionless(self, T: float) -> "BathSpec":
        """The same bath in units of the cycle time T."""
        if T <= 0:
            raise BathError("T must be positive")
        if self.family == "discrete":
            modes = tuple((om * T, g * T) for om, g in self.modes)
            return replace(self, modes=modes, beta=self.beta / T)
        return replace(self, eta=self.eta * T ** (1.0 - self.w),
                       nu_c=self.nu_c * T, center=self.center * T,
                       beta=self.beta / T)


def ohmic_bath(eta: float, nu_c: float, beta: float = np.inf, w: float = 1.0) -> BathSpec:
    return BathSpec(family="ohmic", eta=eta, w=w, nu_c=nu_c, beta=beta)


def discrete_bath(modes, beta: float = np.inf) -> BathSpec:
    return BathSpec(family="discrete", modes=tuple(tuple(m) for m in modes), beta=beta)


def shifted_peak_bath(eta: float, center: float, width: float) -> BathSpec:
    return BathSpec(family="shifted_peak", eta=eta, center=center, nu_c=width)


def thermal_occupation(nu, beta: float):
    """Mean occupation 1/(e^{beta nu} - 1); zero at beta = inf."""
    nu = np.asarray(nu, dtype=float)
    if np.any(nu <= 0):
        raise BathError("thermal occupation needs nu > 0")
    if np.isinf(beta):
        return np.zeros_like(nu) if nu.shape else 0.0
    out = 1.0 / np.expm1(beta * nu)
    return out if out.shape else float(out)


def spectral_density(nu, spec: BathSpec):
    """J(nu) for the continuous families (zero for nu outside the support)."""
    nu = np.asarray(nu, dtype=float)
    if spec.family == "ohmic":
        out = np.where(nu >= 0, spec.eta * np.abs(nu) ** spec.w * np.exp(-np.abs(nu) / spec.nu_c), 0.0)
    elif spec.family == "shifted_peak":
        out = spec.eta * np.exp(-np.abs(nu - spec.center) / spec.nu_c)
    else:
        raise BathError("discrete-mode baths have no spectral density")
    return out if out.shape else float(out)


# -- complex trigamma: scipy only ships a complex digamma, so psi_1 is done
# here with the standard recurrence + Bernoulli asymptotic series.

_BERNOULLI = (1 / 6, -1 / 30, 1 / 42, -1 / 30, 5 / 66, -691 / 2730, 7 / 6)


def trigamma(z):
    """psi_1(z) for complex arrays with Re z > 0."""
    z = np.asarray(z, dtype=complex)
    scalar = z.ndim == 0
    z = np.atleast_1d(z).copy()
    acc = np.zeros_like(z)
    for _ in range(16):
        mask = z.real < 12.0
        if not mask.any():
            break
        acc[mask] += 1.0 / z[mask] ** 2
        z[mask] += 1.0
    inv = 1.0 / z
    inv2 = inv * inv
    res = inv + 0.5 * inv2
    term = inv * inv2
    for b in _BERNOULLI:
        res += b * term
        term *= inv2
    res += acc
    return complex(res[0]) if scalar else res


def _mode_terms(spec: BathSpec):
    omegas = np.array([om for om, _ in spec.modes])
    weights = np.array([abs(g) ** 2 for _, g in spec.modes])
    if np.isinf(spec.beta):
        occ = np.zeros_like(omegas)
    else:
        occ = 1.0 / np.expm1(spec.beta * omegas)
    return omegas, weights, occ


def correlation(s, spec: BathSpec):
    """Two-point bath correlation f(s); satisfies f(-s) = conj(f(s)).

    Closed forms cover discrete modes, the zero-temperature continuous
    families, and the thermal w = 1 case; other parameter combinations fall
    back to adaptive quadrature (the reference path).
    """
    s = np.asarray(s, dtype=float)
    scalar = s.ndim == 0
    s = np.atleast_1d(s)
    if spec.family == "discrete":
        om, wts, occ = _mode_terms(spec)
        phases = np.exp(-1j * np.outer(s, om))
        out = phases @ (wts * (1.0 + occ)) + np.conj(phases) @ (wts * occ)
    elif spec.family == "shifted_peak":
        # plain Fourier transform of the two-sided profile
        out = 2.0 * spec.eta * spec.nu_c * np.exp(-1j * spec.center * s) / (1.0 + (spec.nu_c * s) ** 2)
    elif np.isinf(spec.beta):
        out = (spec.eta * gamma_fn(spec.w + 1.0) * spec.nu_c ** (spec.w + 1.0)
               / (1.0 + 1j * spec.nu_c * s) ** (spec.w + 1.0))
    elif spec.w == 1.0:
        c = 1.0 / spec.nu_c
        zp = 1.0 + (c + 1j * s) / spec.beta
        zm = 1.0 + (c - 1j * s) / spec.beta
        out = spec.eta * (spec.nu_c ** 2 / (1.0 + 1j * spec.nu_c * s) ** 2
                          + (trigamma(zp) + trigamma(zm)) / spec.beta ** 2)
    else:
        out = np.array([correlation_quadrature(float(si), spec) for si in s])
    return complex(out[0]) if scalar else out


def correlation_quadrature(s: float, spec: BathSpec, epsabs: float = 1e-11):
    """Reference evaluation of f(s) by adaptive Gauss-Kronrod quadrature."""
    if spec.family == "discrete":
        return correlation(s, spec)
    if spec.family == "shifted_peak":
        lo, hi = spec.center - 60 * spec.nu_c, spec.center + 60 * spec.nu_c
        weight = lambda nu: np.exp(-1j * nu * s)
        occ = lambda nu: 0.0
    else:
        if np.isinf(spec.beta):
            nu_cut = 40.0 * spec.nu_c
        else:
            nu_cut = spec.nu_c * max(40.0, 10.0 + 40.0 / (spec.beta * spec.nu_c))
        lo, hi = 0.0, nu_cut

    def integrand_re(nu):
        return _thermal_integrand(nu, s, spec).real

    def integrand_im(nu):
        return _thermal_integrand(nu, s, spec).imag

    re, re_err = scipy.integrate.quad(integrand_re, lo, hi, epsabs=epsabs, limit=400)
    im, im_err = scipy.integrate.quad(integrand_im, lo, hi, epsabs=epsabs, limit=400)
    if max(re_err, im_err) > 100 * epsabs + 1e-9 * (abs(re) + abs(im)):
        raise BathError(f"correlation quadrature did not converge at s={s}: "
                        f"err=({re_err:.1e}, {im_err:.1e})")
    return re + 1j * im


def _thermal_integrand(nu, s, spec):
    nu = np.asarray(nu, dtype=float)
    j = spectral_density(nu, spec)
    if spec.family == "shifted_peak" or np.isinf(spec.beta):
        return j * np.exp(-1j * nu * s)
    expo = spec.beta * np.where(nu > 0, nu, 1.0)
    occ = np.where((nu > 0) & (expo < 700), 1.0 / np.expm1(np.minimum(expo, 700)), 0.0)
    return j * ((1.0 + occ) * np.exp(-1j * nu * s) + occ * np.exp(1j * nu * s))


def cumulative_correlation(u, spec: BathSpec):
    """F(u) = int_0^u f(s) ds, closed form on the fast paths."""
    u = np.asarray(u, dtype=float)
    scalar = u.ndim == 0
    u = np.atleast_1d(u)
    if spec.family == "discrete":
        om, wts, occ = _mode_terms(spec)
        pos = (1.0 - np.exp(-1j * np.outer(u, om))) / (1j * om)
        out = pos @ (wts * (1.0 + occ)) + np.conj(pos) @ (wts * occ)
    elif spec.family == "shifted_peak":
        out = np.array([_cumulative_quad(float(ui), spec) for ui in u])
    elif np.isinf(spec.beta):
        w = spec.w
        out = (-1j * spec.eta * gamma_fn(w) * spec.nu_c ** w
               * (1.0 - (1.0 + 1j * spec.nu_c * u) ** (-w)))
    elif spec.w == 1.0:
        vac = spec.eta * spec.nu_c ** 2 * u / (1.0 + 1j * spec.nu_c * u)
        a0 = 1.0 + 1.0 / (spec.beta * spec.nu_c)
        dig = scipy.special.digamma
        th = (1j * spec.eta / spec.beta) * (dig(a0 - 1j * u / spec.beta)
                                            - dig(a0 + 1j * u / spec.beta))
        out = vac + th
    else:
        out = np.array([_cumulative_quad(float(ui), spec) for ui in u])
    return complex(out[0]) if scalar else out


def _cumulative_quad(u: float, spec: BathSpec) -> complex:
    re, _ = scipy.integrate.quad(lambda s: correlation_quadrature(s, spec).real, 0.0, u, limit=200)
    im, _ = scipy.integrate.quad(lambda s: correlation_quadrature(s, spec).imag, 0.0, u, limit=200)
    return re + 1j * im


@dataclass
class CorrelationKernel:
    """f and its cumulative integral tabulated on a uniform grid m*delta."""

    delta: float
    values: np.ndarray               # f(m delta), m = 0..n_max
    cumulative: np.ndarray           # F(m delta)
    spec: BathSpec

    @property
    def n_max(self) -> int:
        return len(self.values) - 1

    def value(self, m: int) -> complex:
        """f(m delta); negative m via stationarity."""
        return self.values[m] if m >= 0 else np.conj(self.values[-m])


def kernel_table(spec: BathSpec, delta: float, n_max: int) -> CorrelationKernel:
    """Tabulate f and F on the half-step grid used by the integrator."""
    if delta <= 0 or n_max < 1:
        raise BathError("need delta > 0 and n_max >= 1")
    grid = delta * np.arange(n_max + 1)
    values = np.asarray(correlation(grid, spec))
    cumulative = np.asarray(cumulative_correlation(grid, spec))
    return CorrelationKernel(delta=delta, values=values, cumulative=cumulative, spec=spec)


def kernel_csv_rows(kernel: CorrelationKernel):
    """Rows (m, Re f, Im f, Re F, Im F) for export."""
    for m in range(kernel.n_max + 1):
        f, F = kernel.values[m], kernel.cumulative[m]
        yield m, f.real, f.imag, F.real, F.imag


# -- dimensional <-> dimensionless parameter conversion

_SCALING = {
    # name: power of T multiplying the dimensional value
    "omega": 1, "gamma": 1, "nu_c": 1, "nu": 1, "center": 1,
    "beta": -1, "tau_g": -1, "t": -1, "delta_t": -1, "sample_dt": -1,
}

_DUAL_NAMES = {
    "omega": "epsilon", "gamma": "epsilon", "nu_c": "x_c", "nu": "x",
    "center": "x_bar", "beta": "beta_tilde", "tau_g": "R", "t": "a",
    "delta_t": "a_step", "sample_dt": "a_sample", "eta": "eta_tilde",
}


def convert_units(params: dict, direction: str, T: float, w: float = 1.0) -> dict:
    """Convert between dimensional and T-unit parameter dictionaries.

    ``eta`` scales as T^(1-w); frequencies multiply by T, times divide by T.
    Keys not recognized pass through unchanged. Round trip is the identity.
    """
    if T <= 0:
        raise ValueError("T must be positive")
    if direction not in ("to_dimensionless", "to_dimensional"):
        raise ValueError(f"unknown direction {direction!r}")
    forward = direction == "to_dimensionless"
    out = {}
    for key, val in params.items():
        if key == "eta":
            out[key] = val * T ** (1.0 - w) if forward else val / T ** (1.0 - w)
        elif key in _SCALING:
            p = _SCALING[key]
            out[key] = val * T ** p if forward else val / T ** p
        else:
            out[key] = val
    return out
