"""Reference two-level dynamics for H(t) = 1/2 [[-Delta, Omega(t)], [Omega(t), Delta]].

The exact propagator is obtained with an adaptive Dormand-Prince 5(4)
integrator that runs a whole batch of detunings (and peak Rabi
frequencies) in lock-step. A fixed-step RK4 integrator compiled with numba
serves as an independent cross-check.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numba
import numpy as np
from scipy import integrate

from .errors import StepFailure
from .shapes import PulseShape

HADAMARD = np.array([[-1.0, 1.0], [1.0, 1.0]]) / math.sqrt(2.0)


@dataclass(frozen=True)
class DriveParams:
    shape: PulseShape
    detuning: float = 0.0

    def __post_init__(self):
        if not math.isfinite(self.detuning):
            raise ValueError("detuning must be finite")

    @property
    def duration(self) -> float:
        return self.shape.duration

    def omega(self, t):
        return self.shape.omega0 * self.shape.f(t)


def su2(a: complex, b: complex) -> np.ndarray:
    """[[a, b], [-b*, a*]]."""
    return np.array([[a, b], [-np.conj(b), np.conj(a)]], dtype=complex)


def hamiltonian(params: DriveParams, t: float, rotated: bool = False) -> np.ndarray:
    om = float(params.omega(t))
    dl = params.detuning
    h = 0.5 * np.array([[-dl, om], [om, dl]], dtype=complex)
    if rotated:
        return HADAMARD @ h @ HADAMARD
    return h


# Dormand-Prince 5(4) tableau.
_C = np.array([0.0, 1 / 5, 3 / 10, 4 / 5, 8 / 9, 1.0, 1.0])
_A = [
    [],
    [1 / 5],
    [3 / 40, 9 / 40],
    [44 / 45, -56 / 15, 32 / 9],
    [19372 / 6561, -25360 / 2187, 64448 / 6561, -212 / 729],
    [9017 / 3168, -355 / 33, 46732 / 5247, 49 / 176, -5103 / 18656],
    [35 / 384, 0.0, 500 / 1113, 125 / 192, -2187 / 6784, 11 / 84],
]
_B5 = np.array([35 / 384, 0.0, 500 / 1113, 125 / 192, -2187 / 6784, 11 / 84, 0.0])
_B4 = np.array([5179 / 57600, 0.0, 7571 / 16695, 393 / 640, -92097 / 339200, 187 / 2100, 1 / 40])
_E = _B5 - _B4


def _rhs(psi, om, dl):
    # d psi/dt = -i H psi for each column, batch along axis 0
    u, v = psi[:, 0], psi[:, 1]
    du = -0.5j * (-dl * u + om * v)
    dv = -0.5j * (om * u + dl * v)
    return np.stack((du, dv), axis=1)


def _dp45(f_env, omega0, detuning, t0, t1, tol, psi0):
    """Integrate the batch of states psi0 (N, 2) or (N, 2, 2) from t0 to t1."""
    y = np.array(psi0, dtype=complex)
    if t1 == t0:
        return y, 0
    span = t1 - t0
    scale = float(np.max(np.abs(omega0)) + np.max(np.abs(detuning)) + 1.0 / span)
    h = min(span, 0.1 * tol ** 0.2 / scale)
    hmin = 1e-14 * span
    t = t0
    steps = 0
    om0 = omega0.reshape((-1,) + (1,) * (y.ndim - 2))
    dl = detuning.reshape((-1,) + (1,) * (y.ndim - 2))
    k = [None] * 7
    k[0] = _rhs(y, om0 * f_env(t), dl)
    while t < t1:
        if t + h > t1:
            h = t1 - t
        for s in range(1, 7):
            ys = y + h * sum(a * k[j] for j, a in enumerate(_A[s]) if a)
            k[s] = _rhs(ys, om0 * f_env(t + _C[s] * h), dl)
        y5 = y + h * sum(b * k[j] for j, b in enumerate(_B5) if b)
        err = h * np.max(np.abs(sum(e * k[j] for j, e in enumerate(_E) if e)))
        ratio = err / tol
        if ratio <= 1.0:
            t += h
            y = y5
            k[0] = k[6]  # FSAL
            steps += 1
        factor = 0.9 * ratio ** -0.2 if ratio > 0 else 5.0
        h *= min(5.0, max(0.2, factor))
        if h < hmin and t < t1:
            raise StepFailure(f"step size underflow at t = {t}")
    return y, steps


def _envelope(shape: PulseShape):
    # scalar closure; avoids the array machinery for each stage call
    return lambda t: float(shape.f(t))


def _batch(shape: PulseShape, detunings, omega0s):
    dl = np.atleast_1d(np.asarray(detunings, dtype=float))
    om = np.atleast_1d(np.asarray(shape.omega0 if omega0s is None else omega0s, dtype=float))
    dl, om = np.broadcast_arrays(dl, om)
    return dl.ravel().copy(), om.ravel().copy()


_CHUNK = 48


def _polar(u):
    """Nearest unitary to each matrix in a (N, 2, 2) batch."""
    w, _, vh = np.linalg.svd(u)
    return w @ vh


def propagate_batch(shape: PulseShape, detunings, t0=0.0, t1=None, tol=1e-10,
                    omega0s=None, correct=True):
    """Exact propagators U(t1, t0) for many detunings (and optionally omega0 values).

    Returns an array of shape (N, 2, 2). The full matrix is integrated.
    """
    if t1 is None:
        t1 = shape.duration
    if not 1e-13 <= tol <= 1e-6:
        raise ValueError("tol must lie in [1e-13, 1e-6]")
    if not 0.0 <= t0 <= t1 <= shape.duration:
        raise ValueError("need 0 <= t0 <= t1 <= T")
    dl, om = _batch(shape, detunings, omega0s)
    y = np.empty((dl.size, 2, 2), dtype=complex)
    # lock-step batches take the step of their stiffest member, so group
    # members of similar eigenfrequency scale
    order = np.argsort(np.hypot(dl, om), kind="stable")
    env = _envelope(shape)
    for start in range(0, dl.size, _CHUNK):
        idx = order[start:start + _CHUNK]
        u0 = np.broadcast_to(np.eye(2, dtype=complex), (idx.size, 2, 2))
        # columns of U evolve independently; integrate both at once
        y[idx], _ = _dp45(env, om[idx], dl[idx], t0, t1, tol, u0)
    if correct:
        drift = np.max(np.abs(np.einsum("nji,njk->nik", y.conj(), y) - np.eye(2)))
        if drift > tol:
            y = _polar(y)
    return y


def propagate_exact(params: DriveParams, t0: float = 0.0, t1: float | None = None,
                    tol: float = 1e-10, correct: bool = True) -> np.ndarray:
    """Exact 2x2 propagator U(t1, t0) by adaptive embedded Runge-Kutta."""
    return propagate_batch(params.shape, [params.detuning], t0, t1, tol, correct=correct)[0]


def transition_probability(shape: PulseShape, detunings, tol=1e-10, omega0s=None):
    u = propagate_batch(shape, detunings, tol=tol, omega0s=omega0s)
    return np.abs(u[:, 0, 1]) ** 2


@numba.njit(cache=True)
def _rk4_loop(om_samples, dl, h, n_steps):
    u11 = 1.0 + 0j
    u21 = 0j
    u12 = 0j
    u22 = 1.0 + 0j
    for i in range(n_steps):
        o0 = om_samples[2 * i]
        o1 = om_samples[2 * i + 1]
        o2 = om_samples[2 * i + 2]
        res = np.empty(4, dtype=np.complex128)
        col = 0
        for a, b in ((u11, u21), (u12, u22)):
            k1a = -0.5j * (-dl * a + o0 * b)
            k1b = -0.5j * (o0 * a + dl * b)
            a2 = a + 0.5 * h * k1a
            b2 = b + 0.5 * h * k1b
            k2a = -0.5j * (-dl * a2 + o1 * b2)
            k2b = -0.5j * (o1 * a2 + dl * b2)
            a3 = a + 0.5 * h * k2a
            b3 = b + 0.5 * h * k2b
            k3a = -0.5j * (-dl * a3 + o1 * b3)
            k3b = -0.5j * (o1 * a3 + dl * b3)
            a4 = a + h * k3a
            b4 = b + h * k3b
            k4a = -0.5j * (-dl * a4 + o2 * b4)
            k4b = -0.5j * (o2 * a4 + dl * b4)
            res[2 * col] = a + h / 6.0 * (k1a + 2 * k2a + 2 * k3a + k4a)
            res[2 * col + 1] = b + h / 6.0 * (k1b + 2 * k2b + 2 * k3b + k4b)
            col += 1
        u11, u21, u12, u22 = res[0], res[1], res[2], res[3]
    return u11, u12, u21, u22


def propagate_rk4(params: DriveParams, t0: float = 0.0, t1: float | None = None,
                  n_steps: int = 1_000_000) -> np.ndarray:
    """Fixed-step classical RK4 propagator; independent oracle for propagate_exact."""
    if t1 is None:
        t1 = params.duration
    h = (t1 - t0) / n_steps
    t = t0 + 0.5 * h * np.arange(2 * n_steps + 1)
    om = params.shape.omega0 * params.shape.f(np.clip(t, 0.0, params.duration))
    u11, u12, u21, u22 = _rk4_loop(np.ascontiguousarray(om, dtype=float), float(params.detuning), h, n_steps)
    return np.array([[u11, u12], [u21, u22]])


@dataclass(frozen=True)
class AdiabaticQuantities:
    theta: float
    vartheta: float
    lambda_split: float
    eta: float


def mixing_angles(omega: float, detuning: float) -> tuple[float, float]:
    """(theta, vartheta) with theta in [0, pi/2] and 2 vartheta = pi/2 - 2 theta."""
    if omega == 0.0 and detuning == 0.0:
        # degenerate point: the omega -> 0+ limit on resonance
        return math.pi / 4, 0.0
    two_theta = math.atan2(omega, detuning)
    return 0.5 * two_theta, 0.25 * math.pi - 0.5 * two_theta


def adiabatic_phase(params: DriveParams, t_from: float, t_to: float) -> float:
    """Integral of Lambda(t) = sqrt(Delta^2 + Omega^2) between two times."""
    shape = params.shape
    if t_to == t_from:
        return 0.0
    dl = params.detuning
    lam_max = math.hypot(dl, shape.omega0)
    tol = 1e-12 * max(lam_max, 1e-300) * shape.duration
    pts = None
    if shape.has_cusp and min(t_from, t_to) < shape.half < max(t_from, t_to):
        pts = [shape.half]
    val, _ = integrate.quad(lambda t: math.hypot(dl, shape.omega0 * float(shape.f(t))),
                            t_from, t_to, epsabs=tol, epsrel=1e-13, limit=200, points=pts)
    return float(val)


_GL_X, _GL_W = np.polynomial.legendre.leggauss(16)
_GRADING = 40


def _graded_nodes(t_from: float, t_to: float):
    """Gauss-Legendre nodes on panels halving toward t_from.

    Near a zero of Omega the integrand sqrt(Delta^2 + Omega^2) has branch
    points a distance ~|Delta|/Omega' off the real axis; geometric panels
    keep every panel's nodes well separated from them for any Delta.
    """
    span = t_to - t_from
    edges = t_from + span * np.concatenate(([0.0], 2.0 ** -np.arange(_GRADING, -1, -1)))
    a, b = edges[:-1, None], edges[1:, None]
    nodes = 0.5 * (a + b) + 0.5 * (b - a) * _GL_X
    weights = 0.5 * (b - a) * _GL_W
    return nodes.ravel(), weights.ravel()


def adiabatic_phase_batch(shape: PulseShape, detunings, t_from: float = 0.0, t_to: float | None = None):
    """Vectorised adiabatic phase for many detunings; graded toward ``t_from``."""
    if t_to is None:
        t_to = shape.half
    dl = np.asarray(detunings, dtype=float)
    if t_to == t_from:
        return np.zeros_like(dl)
    nodes, weights = _graded_nodes(t_from, t_to)
    om = shape.omega0 * shape.f(nodes)
    return np.sqrt(dl[..., None] ** 2 + om**2) @ weights


def adiabatic_quantities(params: DriveParams, t: float, t_ref: float = 0.0) -> AdiabaticQuantities:
    om = float(params.omega(t))
    theta, vartheta = mixing_angles(om, params.detuning)
    return AdiabaticQuantities(theta, vartheta, math.hypot(params.detuning, om),
                               adiabatic_phase(params, t_ref, t))


def adiabatic_propagator(theta_i: float, theta_f: float, eta: float) -> np.ndarray:
    """Adiabatic-following propagator [[c, d], [-d*, c*]] in the bare basis."""
    em = np.exp(-0.5j * eta)
    ep = np.exp(0.5j * eta)
    si, ci = math.sin(theta_i), math.cos(theta_i)
    sf, cf = math.sin(theta_f), math.cos(theta_f)
    c = em * si * sf + ep * ci * cf
    d = em * ci * sf - ep * si * cf
    return su2(c, d)
