"""Split LMSZ-adiabatic approximation.

[0, lambda] and [T - lambda, T] are treated as linear-ramp half-crossings
solved exactly with Weber functions; [lambda, T - lambda] follows the
adiabatic states of the true envelope.
"""

from __future__ import annotations

import cmath
import math
from dataclasses import dataclass
from enum import Enum

import numpy as np

from .dynamics import DriveParams, adiabatic_phase, adiabatic_propagator, mixing_angles, su2
from .errors import InvalidLambda
from .shapes import partial_area
from .specfun import log_gamma, weber_d


class SplitMode(str, Enum):
    """Ramp parameterisation at the matching point.

    ``AREA`` picks the ramp slope so the ramp carries the true pulse area on
    [0, lambda]; ``SLOPE`` uses the secant Omega(lambda)/lambda; ``LITERAL``
    is the printed T-normalised form.
    """

    AREA = "area_consistent"
    SLOPE = "slope_consistent"
    LITERAL = "paper_literal"


@dataclass(frozen=True)
class SplitParams:
    """Linear-ramp parameters at the matching point.

    In ``SLOPE`` mode beta is sqrt(rad/s^2); in ``LITERAL`` mode it is the
    dimensionless value for T = 1. alpha and delta are dimensionless.
    """

    lam: float
    alpha: float
    beta: float
    delta: float
    mode: SplitMode = SplitMode.AREA


@dataclass(frozen=True)
class CayleyKlein:
    a: complex
    b: complex

    def matrix(self) -> np.ndarray:
        return su2(self.a, self.b)

    def bare_basis(self) -> np.ndarray:
        """Ramp propagator for H = 1/2 [[-Delta, Omega], [Omega, Delta]]."""
        a, b = self.a, self.b
        return np.array([
            [a.real - 1j * b.imag, b.real + 1j * a.imag],
            [-b.real + 1j * a.imag, a.real + 1j * b.imag],
        ])


def lmsz_params(params: DriveParams, lam: float, mode=SplitMode.AREA) -> SplitParams:
    """Ramp parameters (alpha, beta, delta) for matching point ``lam``.

    The ramp Omega = k t gives alpha = beta lam and delta = Delta / (2 beta)
    with beta = sqrt(k). In ``AREA`` mode k = 2 A(lam) / lam^2, where A(lam)
    is the pulse area on [0, lam], so alpha^2 / 2 = A(lam). In ``SLOPE``
    mode k is the secant slope. Both fall back to Omega_0 f'(0+) at lam = 0.
    """
    mode = SplitMode(mode)
    shape = params.shape
    T = shape.duration
    if not 0.0 <= lam <= 0.5 * T * (1 + 1e-12):
        raise InvalidLambda(f"lambda must lie in [0, T/2], got {lam}")
    if mode is SplitMode.LITERAL:
        if lam == 0.0:
            raise InvalidLambda("the literal parameterisation has no lambda = 0 limit")
        beta = math.sqrt(shape.omega0 * T * float(shape.f(lam)))
        return SplitParams(lam, beta * lam / T, beta, params.detuning * T / (2.0 * beta), mode)
    if lam == 0.0:
        k = shape.omega0 * shape.slope0()
    elif mode is SplitMode.AREA:
        k = 2.0 * partial_area(shape, lam) / lam**2
    else:
        k = shape.omega0 * float(shape.f(lam)) / lam
    beta = math.sqrt(k)
    return SplitParams(lam, beta * lam, beta, params.detuning / (2.0 * beta), mode)


def lmsz_cayley_klein(sp: SplitParams) -> CayleyKlein:
    """Cayley-Klein pair of the linear-ramp half-crossing over [0, alpha]."""
    alpha, d = sp.alpha, sp.delta
    d2 = d * d
    if alpha == 0.0:
        return CayleyKlein(1.0 + 0j, 0j)
    z_plus = alpha * cmath.exp(0.25j * math.pi)
    z_minus = alpha * cmath.exp(-0.25j * math.pi)
    d_first = weber_d(-1j * d2, z_plus)
    if d2 == 0.0:
        return CayleyKlein(complex(d_first), 0j)
    d_second = weber_d(1j * d2 - 1.0, z_minus)
    one_m = -math.expm1(-math.pi * d2)  # 1 - exp(-pi d^2)
    one_p = 1.0 + math.exp(-math.pi * d2)
    pow2 = cmath.exp(0.5j * d2 * math.log(2.0))  # 2^{i d^2 / 2}
    gam = lambda z: cmath.exp(log_gamma(z))  # noqa: E731
    sqpi = math.sqrt(math.pi)
    rot = cmath.exp(-0.25j * math.pi)
    a = (pow2 * one_p * gam(complex(0.5, 0.5 * d2)) / (2.0 * sqpi) * d_first
         + one_m * gam(complex(1.0, -0.5 * d2)) / (pow2 * math.sqrt(2.0 * math.pi)) * d_second)
    b = (rot * pow2 * (one_m / d) * gam(complex(1.0, 0.5 * d2)) / math.sqrt(2.0 * math.pi) * d_first
         - rot * one_p * d * gam(complex(0.5, -0.5 * d2)) / (2.0 * pow2 * sqpi) * d_second)
    norm = abs(a) ** 2 + abs(b) ** 2
    if abs(norm - 1.0) > 1e-9:
        raise ArithmeticError(f"|a|^2 + |b|^2 = {norm!r} for alpha={alpha}, delta={d}")
    return CayleyKlein(complex(a), complex(b))


@dataclass(frozen=True)
class SplitPieces:
    sp: SplitParams
    ck: CayleyKlein
    theta_i: float
    eta_lam: float


def split_pieces(params: DriveParams, lam: float, mode=SplitMode.AREA) -> SplitPieces:
    sp = lmsz_params(params, lam, mode)
    ck = lmsz_cayley_klein(sp)
    theta_i, _ = mixing_angles(float(params.omega(lam)), params.detuning)
    if lam == 0.0 and params.detuning == 0.0:
        theta_i = 0.25 * math.pi
    eta = adiabatic_phase(params, lam, params.shape.half)
    return SplitPieces(sp, ck, theta_i, eta)


def split_propagator(params: DriveParams, lam: float | None = None, mode=SplitMode.AREA) -> np.ndarray:
    """U_LMSZ^T U_adb(theta_i, theta_i, 2 eta_lambda) U_LMSZ over the whole pulse."""
    if lam is None:
        lam = 0.25 * params.shape.duration
    pc = split_pieces(params, lam, mode)
    ul = pc.ck.bare_basis()
    mid = adiabatic_propagator(pc.theta_i, pc.theta_i, 2.0 * pc.eta_lam)
    return ul.T @ mid @ ul


def _quadrature_parts(a: complex, b: complex, theta_i: float) -> tuple[float, float]:
    # U12 of the composed propagator is i (x sin eta - y cos eta) up to a phase
    s2, c2 = math.sin(2.0 * theta_i), math.cos(2.0 * theta_i)
    ab = a * a - b * b
    return (ab * s2 - 2.0 * a * b.conjugate() * c2).real, ab.imag


def probability_from_pieces(a: complex, b: complex, theta_i: float, eta_lam: float) -> float:
    """|U12|^2 of the composed split propagator from the ramp pair and adiabatic data.

    Signs follow the (a, b) convention of :func:`lmsz_cayley_klein`.
    """
    x, y = _quadrature_parts(a, b, theta_i)
    val = x * math.sin(eta_lam) - y * math.cos(eta_lam)
    return val * val


def split_probability(params: DriveParams, lam: float | None = None, mode=SplitMode.AREA) -> float:
    """Closed-form transition probability of the split model."""
    if lam is None:
        lam = 0.25 * params.shape.duration
    pc = split_pieces(params, lam, mode)
    return probability_from_pieces(pc.ck.a, pc.ck.b, pc.theta_i, pc.eta_lam)


def split_envelope(params: DriveParams, lam: float | None = None, mode=SplitMode.AREA) -> float:
    """Split-model probability maximised over the adiabatic phase."""
    if lam is None:
        lam = 0.25 * params.shape.duration
    pc = split_pieces(params, lam, mode)
    x, y = _quadrature_parts(pc.ck.a, pc.ck.b, pc.theta_i)
    return x * x + y * y
