"""Finite-duration pulse envelopes.

Every bell-shaped envelope f0(x), x = (t - T/2)/tau, is centered on the
pulse, cut at t = 0 and t = T, lowered by its endpoint value and rescaled to
unit peak::

    f(t) = (f0(x) - f0(T/(2 tau))) / (f0(0) - f0(T/(2 tau)))

The sine pulse needs none of this and the rectangular pulse is kept raw.
Times are in seconds and Rabi frequencies in rad/s.
"""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass, field, replace
from enum import Enum
from pathlib import Path

import numpy as np
from scipy import integrate, optimize

from .errors import CuspError, InvalidDuration, OutOfDomain, UnsupportedKind


class ShapeKind(str, Enum):
    SINE = "sine"
    LORENTZIAN = "lorentzian"
    LORENTZIAN2 = "lorentzian2"
    SECH = "sech"
    SECH2 = "sech2"
    GAUSSIAN = "gaussian"
    EXPONENTIAL = "exponential"
    RECTANGULAR = "rectangular"


TABLE_I = (
    ShapeKind.SINE,
    ShapeKind.LORENTZIAN,
    ShapeKind.LORENTZIAN2,
    ShapeKind.SECH,
    ShapeKind.SECH2,
    ShapeKind.GAUSSIAN,
)

_FORMULAS = {
    ShapeKind.SINE: "sin(pi t / T)",
    ShapeKind.LORENTZIAN: "1 / (1 + x^2)",
    ShapeKind.LORENTZIAN2: "1 / (1 + x^2)^2",
    ShapeKind.SECH: "sech(x)",
    ShapeKind.SECH2: "sech(x)^2",
    ShapeKind.GAUSSIAN: "exp(-x^2)",
    ShapeKind.EXPONENTIAL: "exp(-|x|)",
    ShapeKind.RECTANGULAR: "1",
}


def _raw(kind: ShapeKind, x, order: int):
    """Raw envelope f0 and its x-derivatives."""
    x = np.asarray(x, dtype=float)
    if kind is ShapeKind.LORENTZIAN:
        u = 1.0 + x * x
        return (1.0 / u, -2.0 * x / u**2, (6.0 * x * x - 2.0) / u**3)[order]
    if kind is ShapeKind.LORENTZIAN2:
        u = 1.0 + x * x
        return (u**-2, -4.0 * x / u**3, (20.0 * x * x - 4.0) / u**4)[order]
    if kind is ShapeKind.SECH:
        s = 1.0 / np.cosh(x)
        th = np.tanh(x)
        return (s, -s * th, s * (1.0 - 2.0 * s * s))[order]
    if kind is ShapeKind.SECH2:
        s2 = 1.0 / np.cosh(x) ** 2
        th = np.tanh(x)
        return (s2, -2.0 * s2 * th, 4.0 * s2 * th * th - 2.0 * s2 * s2)[order]
    if kind is ShapeKind.GAUSSIAN:
        g = np.exp(-x * x)
        return (g, -2.0 * x * g, (4.0 * x * x - 2.0) * g)[order]
    if kind is ShapeKind.EXPONENTIAL:
        e = np.exp(-np.abs(x))
        return (e, -np.sign(x) * e, e)[order]
    raise UnsupportedKind(kind)


@dataclass(frozen=True)
class PulseShape:
    """A processed envelope Omega(t) = omega0 * f(t) on [0, duration]."""

    kind: ShapeKind
    tau: float
    duration: float
    omega0: float = 1.0
    processed: bool = True
    _background: float = field(default=0.0, repr=False)

    @property
    def has_cusp(self) -> bool:
        return self.kind is ShapeKind.EXPONENTIAL

    @property
    def half(self) -> float:
        return 0.5 * self.duration

    def with_omega0(self, omega0: float) -> "PulseShape":
        if omega0 < 0:
            raise ValueError("omega0 must be non-negative")
        return replace(self, omega0=float(omega0))

    def f(self, t, order: int = 0):
        """Unit-peak envelope f(t) or its time derivative of the given order."""
        if order not in (0, 1, 2):
            raise ValueError("deriv order must be 0, 1 or 2")
        t = np.asarray(t, dtype=float)
        T = self.duration
        inside = (t >= 0.0) & (t <= T)
        if order and not np.all(inside):
            raise OutOfDomain(f"derivative requested outside [0, {T}]")
        if order and self.has_cusp and np.any(t == self.half):
            raise CuspError("exponential envelope has no derivative at its peak")
        if self.kind is ShapeKind.SINE:
            w = math.pi / T
            val = (np.sin(w * t), w * np.cos(w * t), -w * w * np.sin(w * t))[order]
        elif self.kind is ShapeKind.RECTANGULAR:
            val = np.ones_like(t) if order == 0 else np.zeros_like(t)
        else:
            x = (t - self.half) / self.tau
            scale = 1.0 - self._background
            val = (_raw(self.kind, x, order) - (self._background if order == 0 else 0.0))
            val = val / (scale * self.tau**order)
        if order == 0:
            val = np.where(inside, val, 0.0)
        return val[()] if np.ndim(val) == 0 else val

    def f_one_sided(self, t: float, order: int, side: int) -> float:
        """Derivative limit from the left (side=-1) or right (side=+1)."""
        h = 1e-9 * self.duration
        if order == 0:
            return float(self.f(t))
        tt = min(max(t + side * h, 0.0), self.duration)
        return float(self.f(tt, order))

    def slope0(self) -> float:
        """f'(0+) in 1/s."""
        if self.kind is ShapeKind.RECTANGULAR:
            raise CuspError("rectangular envelope jumps at t = 0")
        return float(self.f(0.0, 1))

    def sample(self, n: int = 201):
        t = np.linspace(0.0, self.duration, n)
        return t, self.omega0 * self.f(t)


def make_shape(kind, tau: float, duration: float, omega0: float = 1.0) -> PulseShape:
    """Build the processed envelope of ``kind`` with raw width ``tau`` and length ``duration``."""
    try:
        kind = ShapeKind(kind)
    except ValueError:
        raise UnsupportedKind(f"unknown pulse kind {kind!r}") from None
    if not duration > 0:
        raise InvalidDuration(f"duration must be positive, got {duration}")
    if kind is ShapeKind.SINE:
        tau = duration
    if not tau > 0:
        raise InvalidDuration(f"tau must be positive, got {tau}")
    if omega0 < 0:
        raise ValueError("omega0 must be non-negative")
    background = 0.0
    processed = kind is not ShapeKind.RECTANGULAR
    if kind not in (ShapeKind.SINE, ShapeKind.RECTANGULAR):
        background = float(_raw(kind, duration / (2.0 * tau), 0))
    return PulseShape(kind, float(tau), float(duration), float(omega0), processed, background)


def raw_background(shape: PulseShape) -> float:
    """Endpoint value of the raw envelope that processing subtracted."""
    return shape._background


def evaluate(shape: PulseShape, t, deriv_order: int = 0):
    """Omega(t) = omega0 f(t), or its derivative, in rad/s^(1+order)."""
    return shape.omega0 * shape.f(t, deriv_order)


def _quad_points(shape: PulseShape):
    return [shape.half] if shape.has_cusp else None


def area(shape: PulseShape) -> float:
    """Pulse area in radians by adaptive quadrature."""
    if shape.omega0 == 0:
        return 0.0
    tol = 1e-12 * shape.omega0 * shape.duration
    val, _ = integrate.quad(lambda t: evaluate(shape, t), 0.0, shape.duration,
                            epsabs=tol, epsrel=1e-13, limit=200, points=_quad_points(shape))
    return float(val)


def partial_area(shape: PulseShape, t: float) -> float:
    """Area of the pulse between 0 and ``t`` in radians."""
    if t <= 0.0 or shape.omega0 == 0:
        return 0.0
    t = min(t, shape.duration)
    pts = [shape.half] if shape.has_cusp and t > shape.half else None
    val, _ = integrate.quad(lambda s: evaluate(shape, s), 0.0, t, epsabs=1e-13 * shape.omega0 * shape.duration,
                            epsrel=1e-13, limit=200, points=pts)
    return float(val)


def calibrate_area(shape: PulseShape, target: float) -> PulseShape:
    """Rescale omega0 so the pulse area equals ``target``."""
    unit = area(shape.with_omega0(1.0))
    return shape.with_omega0(target / unit)


@dataclass(frozen=True)
class ShapeDiagnostics:
    shape: PulseShape
    slope_at_start: float
    endpoint_ratio: float
    linearity_ratio: float
    inflection_offsets: tuple
    cusp_detected: bool
    cusp_jump: float = 0.0

    def secant_slope(self, lam: float) -> float:
        """f(lam)/lam; tends to slope_at_start as lam -> 0."""
        if lam <= 0:
            return self.slope_at_start
        return float(self.shape.f(lam)) / lam


def diagnose(shape: PulseShape, n: int = 2001) -> ShapeDiagnostics:
    """Pre-experiment checks of the linear-ends / adiabatic-middle assumptions.

    ``linearity_ratio`` is the mean of |f''| / (|f'| / T) over the first 10 %
    of the pulse; ``endpoint_ratio`` is the same quantity at t = 0+.
    """
    T = shape.duration
    if shape.kind is ShapeKind.RECTANGULAR:
        return ShapeDiagnostics(shape, math.inf, 0.0, 0.0, (), False)
    t = np.linspace(0.0, 0.1 * T, 401)
    d1 = np.abs(shape.f(t, 1))
    d2 = np.abs(shape.f(t, 2))
    ratio = d2 * T / d1
    lin = float(integrate.trapezoid(ratio, t) / (0.1 * T))
    slope = shape.slope0()
    end_ratio = float(abs(shape.f(0.0, 2)) * T / abs(slope))

    # roots of f'' in the first half, reported as offsets from the center
    grid = np.linspace(0.0, shape.half, n)
    if shape.has_cusp:
        grid = grid[:-1]
    g2 = shape.f(grid, 2)
    offsets = []
    for i in np.nonzero(np.sign(g2[:-1]) * np.sign(g2[1:]) < 0)[0]:
        root = optimize.brentq(lambda s: float(shape.f(s, 2)), grid[i], grid[i + 1], xtol=1e-14)
        off = shape.half - root
        if 0.0 < off < shape.half:
            offsets.append(off)
    jump = 0.0
    if shape.has_cusp:
        jump = shape.f_one_sided(shape.half, 1, -1) - shape.f_one_sided(shape.half, 1, +1)
    return ShapeDiagnostics(shape, slope, end_ratio, lin, tuple(sorted(offsets)), shape.has_cusp, jump)


def catalog() -> list[tuple[str, str]]:
    return [(k.value, _FORMULAS[k]) for k in ShapeKind]


def write_csv(shape: PulseShape, path, n: int = 201) -> Path:
    path = Path(path)
    t, om = shape.sample(n)
    with path.open("w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["t_seconds", "omega_rad_per_s"])
        for ti, oi in zip(t, om):
            w.writerow([repr(float(ti)), repr(float(oi))])
    return path
