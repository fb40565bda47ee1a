"""Integrated LMSZ-adiabatic approximation.

The half-crossing at each pulse edge is replaced by the half-LMSZ
propagator in the adiabatic interaction picture, while the dynamical phase
is the exact adiabatic phase of the real envelope. The transition
probability then depends on the pulse only through the edge parameter
``delta`` and the adiabatic phase ``eta`` accumulated over [0, T/2].
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .dynamics import HADAMARD, DriveParams, adiabatic_phase, adiabatic_phase_batch, su2
from .errors import CuspError
from .specfun import arg_gamma, log_gamma_array
from .split_model import SplitMode

EULER_GAMMA = 0.5772156649015329


@dataclass(frozen=True)
class ChiPhases:
    chi1: float
    chi2: float

    @property
    def chi_plus(self) -> float:
        return self.chi1 + self.chi2

    @property
    def chi_minus(self) -> float:
        return self.chi1 - self.chi2


@dataclass(frozen=True)
class IntegratedParams:
    delta: float
    eta: float
    chi1: float
    chi2: float
    chi_plus: float
    chi_minus: float
    nu: float
    mode: SplitMode = SplitMode.SLOPE

    @property
    def amplitude(self) -> float:
        return amplitude_factor(self.delta, self.chi_minus)


def chi_phases(delta: float) -> ChiPhases:
    """Phases chi1, chi2 of the half-LMSZ propagator (continuous arg Gamma)."""
    d2 = delta * delta
    if d2 == 0.0:
        return ChiPhases(0.0, -0.25 * math.pi)
    base = 0.5 * d2 - 0.5 * d2 * math.log(0.5 * d2)
    chi1 = base + arg_gamma(complex(0.5, 0.5 * d2))
    # arg Gamma(i h) = arg Gamma(1 + i h) - pi/2 keeps tiny delta away from the pole
    chi2 = base + arg_gamma(complex(1.0, 0.5 * d2)) - 0.25 * math.pi
    return ChiPhases(chi1, chi2)


def chi_small_delta(delta: float) -> ChiPhases:
    """Leading small-|delta| behaviour of chi1, chi2."""
    d2 = delta * delta
    c = 1.0 - EULER_GAMMA
    return ChiPhases(0.5 * d2 * (c - math.log(2.0 * d2)),
                     0.5 * d2 * (c - math.log(0.5 * d2)) - 0.25 * math.pi)


def chi_large_delta(delta: float) -> ChiPhases:
    """Leading large-|delta| behaviour of chi1, chi2."""
    d2 = delta * delta
    return ChiPhases(1.0 / (12.0 * d2), -1.0 / (6.0 * d2))


def nu_phase(delta: float, chi_minus: float) -> float:
    """arctan(exp(pi delta^2) tan chi_-), written so it cannot overflow."""
    return math.atan2(math.sin(chi_minus), math.exp(-math.pi * delta * delta) * math.cos(chi_minus))


def amplitude_factor(delta: float, chi_minus: float | None = None) -> float:
    """Oscillation amplitude sin^2 chi_- + exp(-2 pi delta^2) cos^2 chi_-."""
    if chi_minus is None:
        chi_minus = chi_phases(delta).chi_minus
    e2 = math.exp(-2.0 * math.pi * delta * delta)
    return math.sin(chi_minus) ** 2 + e2 * math.cos(chi_minus) ** 2


def chi_phases_array(delta) -> tuple[np.ndarray, np.ndarray]:
    """Vectorised :func:`chi_phases`; returns (chi1, chi2)."""
    d2 = np.asarray(delta, dtype=float) ** 2
    zero = d2 == 0.0
    h = np.where(zero, 1.0, 0.5 * d2)
    base = h - h * np.log(h)
    chi1 = base + log_gamma_array(0.5 + 1j * h).imag
    # arg Gamma(i h) = arg Gamma(1 + i h) - pi/2 for h > 0
    chi2 = base + log_gamma_array(1.0 + 1j * h).imag - 0.25 * math.pi
    return np.where(zero, 0.0, chi1), np.where(zero, -0.25 * math.pi, chi2)


def _edge_slope(shape, mode) -> float:
    if SplitMode(mode) is SplitMode.LITERAL:
        return math.pi * shape.omega0 * float(shape.f(0.25 * shape.duration)) * shape.duration
    k0 = shape.omega0 * shape.slope0()
    if not k0 > 0:
        raise CuspError("initial slope must be positive")
    return k0


def delta_param(params: DriveParams, mode=SplitMode.SLOPE) -> float:
    """Edge parameter delta = Delta / (2 sqrt(k0)).

    ``SLOPE``: k0 = omega0 f'(0+), the slope of the envelope at turn-on.
    ``AREA`` gives the same k0, since the matching point sits at t = 0.
    ``LITERAL``: k0 = pi * Omega(T/4), in units where T = 1.
    """
    shape = params.shape
    k0 = _edge_slope(shape, mode)
    if SplitMode(mode) is SplitMode.LITERAL:
        return params.detuning * shape.duration / (2.0 * math.sqrt(k0))
    return params.detuning / (2.0 * math.sqrt(k0))


def integrated_params(params: DriveParams, mode=SplitMode.SLOPE) -> IntegratedParams:
    delta = delta_param(params, mode)
    eta = adiabatic_phase(params, 0.0, params.shape.half)
    return params_from(delta, eta, mode)


def params_from(delta: float, eta: float, mode=SplitMode.SLOPE) -> IntegratedParams:
    ch = chi_phases(delta)
    return IntegratedParams(delta, eta, ch.chi1, ch.chi2, ch.chi_plus, ch.chi_minus,
                            nu_phase(delta, ch.chi_minus), SplitMode(mode))


def half_lmsz_ai(delta: float) -> np.ndarray:
    """Half-crossing LMSZ propagator in the adiabatic interaction picture."""
    ch = chi_phases(delta)
    e = math.exp(-math.pi * delta * delta)
    q = math.sqrt(0.5 * (1.0 + e)) * np.exp(1j * ch.chi1)
    s = math.sqrt(0.5 * (1.0 - e)) * np.exp(1j * ch.chi2)
    return su2(q, s)


def _phase_matrix(eta: float) -> np.ndarray:
    return np.diag([np.exp(0.5j * eta), np.exp(-0.5j * eta)])


def integrated_propagator(delta: float, eta: float) -> np.ndarray:
    """Full-pulse propagator G U^T F(-2 eta) U G whose |U12|^2 is the model probability."""
    u = half_lmsz_ai(delta)
    return HADAMARD @ u.T @ _phase_matrix(-2.0 * eta) @ u @ HADAMARD


def probability_from(delta: float, eta: float, form: str = "a") -> float:
    """Transition probability of the integrated model in one of four equivalent forms."""
    ch = chi_phases(delta)
    e = math.exp(-math.pi * delta * delta)
    c1, c2 = ch.chi1, ch.chi2
    cp, cm = ch.chi_plus, ch.chi_minus
    if form == "a":
        val = 0.5 * (1 + e) * math.sin(eta - 2 * c1) - 0.5 * (1 - e) * math.sin(eta - 2 * c2)
        return val * val
    if form == "b":
        val = math.sin(eta - 2 * c1) - (1 - e) * math.cos(cm) * math.sin(eta - cp)
        return val * val
    if form == "c":
        val = math.sin(cm) * math.cos(eta - cp) - e * math.cos(cm) * math.sin(eta - cp)
        return val * val
    if form == "d":
        amp, phase = amplitude_and_phase(delta, eta)
        return amp * math.sin(phase) ** 2
    raise ValueError(f"unknown form {form!r}")


def amplitude_and_phase(delta: float, eta: float) -> tuple[float, float]:
    """(amplitude, phase) with P = amplitude * sin^2(phase)."""
    ch = chi_phases(delta)
    return amplitude_factor(delta, ch.chi_minus), eta - ch.chi_plus - nu_phase(delta, ch.chi_minus)


def integrated_probability(params: DriveParams, form: str = "a", mode=SplitMode.SLOPE) -> float:
    delta = delta_param(params, mode)
    eta = adiabatic_phase(params, 0.0, params.shape.half)
    return probability_from(delta, eta, form)


def integrated_curve(shape, detunings, mode=SplitMode.SLOPE) -> np.ndarray:
    """Vectorised integrated-model probability over many detunings."""
    dl = np.asarray(detunings, dtype=float)
    k0 = _edge_slope(shape, mode)
    scale = shape.duration if SplitMode(mode) is SplitMode.LITERAL else 1.0
    delta = dl * scale / (2.0 * math.sqrt(k0))
    eta = adiabatic_phase_batch(shape, dl)
    c1, c2 = chi_phases_array(delta)
    e = np.exp(-math.pi * delta**2)
    val = 0.5 * (1 + e) * np.sin(eta - 2 * c1) - 0.5 * (1 - e) * np.sin(eta - 2 * c2)
    return val * val


@dataclass(frozen=True)
class StrongAsymptotics:
    zeta: float
    eta_prime: float
    xi1: float
    xi2: float
    q: complex
    s: complex
    a: complex
    b: complex
    weak: bool

    def propagator(self) -> np.ndarray:
        """R(-zeta) U_adb U_LMSZ, the factorised Cayley-Klein matrix."""
        c, s = math.cos(self.zeta), math.sin(self.zeta)
        rot = np.array([[c, -s], [s, c]])
        adb = np.diag([np.exp(-0.5j * self.eta_prime), np.exp(0.5j * self.eta_prime)])
        return rot @ adb @ su2(self.q, self.s)


def eta_prime(alpha: float, delta: float) -> float:
    """Adiabatic phase of the linear ramp, integral of sqrt(u^2 + 4 delta^2) over [0, alpha]."""
    d2 = delta * delta
    root = math.sqrt(alpha * alpha + 4.0 * d2)
    val = 0.5 * alpha * root
    if d2 > 0:
        val += 2.0 * d2 * math.log(0.5 * (root + alpha)) - d2 * math.log(d2)
    return val


def strong_asymptotics(alpha: float, delta: float) -> StrongAsymptotics:
    """Strong-coupling (alpha^2 + delta^2 >> 1) form of the half-crossing propagator.

    Returns the Cayley-Klein pair (a, b) rebuilt from the factorisation
    R(-zeta) U_adb U_LMSZ rather than from the printed closed form.
    """
    zeta = 0.5 * math.atan2(2.0 * abs(delta), alpha) * (1 if delta >= 0 else -1)
    etap = eta_prime(alpha, delta)
    ch = chi_phases(delta)
    e = math.exp(-math.pi * delta * delta)
    q = math.sqrt(0.5 * (1.0 + e)) * np.exp(1j * ch.chi1)
    s = math.sqrt(0.5 * (1.0 - e)) * np.exp(1j * ch.chi2)
    if delta < 0:
        s = -s
    xi1 = ch.chi1 - 0.5 * etap
    xi2 = ch.chi2 - 0.5 * etap
    res = StrongAsymptotics(zeta, etap, xi1, xi2, complex(q), complex(s), 0j, 0j,
                            alpha * alpha + delta * delta < 4.0)
    u = res.propagator()
    return StrongAsymptotics(zeta, etap, xi1, xi2, complex(q), complex(s),
                             complex(u[0, 0]), complex(u[0, 1]), res.weak)
