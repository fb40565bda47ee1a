"""Complex special functions: log-gamma, Kummer's M and Weber's D_nu.

All routines work on Python complex scalars. They are pure and hold no
module-level mutable state.
"""

from __future__ import annotations

import cmath
import math
from dataclasses import dataclass

import numpy as np

from .errors import AccuracyError, PoleError

EPS = np.finfo(float).eps

# Lanczos coefficients, g = 7, n = 9.
_LANCZOS_G = 7.0
_LANCZOS_P = (
    0.99999999999980993,
    676.5203681218851,
    -1259.1392167224028,
    771.32342877765313,
    -176.61502916214059,
    12.507343278686905,
    -0.13857109526572012,
    9.9843695780195716e-6,
    1.5056327351493116e-7,
)
_HALF_LOG_2PI = 0.5 * math.log(2.0 * math.pi)
# Below this real part the argument is shifted upward before the Lanczos sum.
_SHIFT_TARGET = 7.0


def _is_pole(z: complex) -> bool:
    # exact test: near a pole the recurrence still gives log Gamma accurately
    return z.imag == 0.0 and z.real <= 0.0 and z.real == math.floor(z.real)


def _lanczos(z: complex) -> complex:
    w = z - 1.0
    acc = complex(_LANCZOS_P[0])
    for k in range(1, len(_LANCZOS_P)):
        acc += _LANCZOS_P[k] / (w + k)
    t = w + _LANCZOS_G + 0.5
    return _HALF_LOG_2PI + (w + 0.5) * cmath.log(t) - t + cmath.log(acc)


def log_gamma(z: complex) -> complex:
    """Principal branch of ln Gamma(z).

    The imaginary part is continuous in ``z`` away from the negative real
    axis, i.e. it is *not* wrapped into (-pi, pi]. This is the branch the
    phase formulas of the LMSZ propagator need.
    """
    z = complex(z)
    if _is_pole(z):
        raise PoleError(f"Gamma has a pole at {z}")
    if z.real >= _SHIFT_TARGET:
        return _lanczos(z)
    # upward recurrence: ln G(z) = ln G(z+n) - sum ln(z+k), principal logs
    n = int(math.ceil(_SHIFT_TARGET - z.real))
    shift = complex(0.0)
    for k in range(n):
        shift += cmath.log(z + k)
    return _lanczos(z + n) - shift


def log_gamma_array(z) -> np.ndarray:
    """Vectorised :func:`log_gamma` for arrays with Re z > 0; same branch."""
    z = np.asarray(z, dtype=complex)
    if np.any(z.real <= 0):
        raise ValueError("log_gamma_array needs Re z > 0")
    n = np.ceil(np.maximum(_SHIFT_TARGET - z.real, 0.0)).astype(int)
    shift = np.zeros_like(z)
    for k in range(int(n.max(initial=0))):
        shift += np.where(k < n, np.log(z + k), 0.0)
    zz = z + n
    w = zz - 1.0
    acc = np.full_like(z, _LANCZOS_P[0])
    for k in range(1, len(_LANCZOS_P)):
        acc += _LANCZOS_P[k] / (w + k)
    t = w + _LANCZOS_G + 0.5
    return _HALF_LOG_2PI + (w + 0.5) * np.log(t) - t + np.log(acc) - shift


def arg_gamma(z: complex) -> float:
    """Continuous-branch argument of Gamma(z), the imaginary part of log_gamma."""
    return log_gamma(z).imag


def rgamma(z: complex) -> complex:
    """1/Gamma(z), returning 0 at the poles."""
    z = complex(z)
    if _is_pole(z):
        return 0j
    return cmath.exp(-log_gamma(z))


@dataclass(frozen=True)
class KummerResult:
    value: complex
    rel_error: float
    terms: int

    @property
    def precision_loss(self) -> bool:
        return self.rel_error > 1e-8


def kummer_m(a, b, z, *, full_output: bool = False, max_terms: int = 20000):
    """Kummer's confluent hypergeometric function M(a, b, z) by its power series.

    Terms are summed until the latest one drops below 1e-17 of the partial
    sum while the term ratio is contracting. With ``full_output`` a
    :class:`KummerResult` is returned whose ``rel_error`` estimates the
    rounding loss from cancellation, ``eps * sum|t_k| / |sum t_k|``.
    """
    a, b, z = complex(a), complex(b), complex(z)
    if _is_pole(b):
        raise PoleError(f"M(a, b, z) undefined for b = {b}")
    total = 1.0 + 0j
    abs_total = 1.0
    term = 1.0 + 0j
    k = 0
    while True:
        ratio = (a + k) * z / ((b + k) * (k + 1))
        term *= ratio
        k += 1
        total += term
        mag = abs(term)
        abs_total += mag
        if mag == 0.0:
            break
        if mag < 1e-17 * abs(total) and abs(ratio) < 1.0:
            break
        if k >= max_terms:
            raise AccuracyError(f"Kummer series did not converge in {max_terms} terms")
    scale = abs(total)
    rel = math.inf if scale == 0.0 else EPS * (abs_total / scale + k**0.5)
    if full_output:
        return KummerResult(total, rel, k)
    return total


@dataclass(frozen=True)
class WeberResult:
    value: complex
    rel_error: float
    method: str


def _log_prefactor(nu: complex) -> tuple[complex, complex]:
    """Logs of the D_nu(0) and D'_nu(0) magnitudes, without the 1/Gamma factors."""
    log2 = math.log(2.0)
    half_log_pi = 0.5 * math.log(math.pi)
    return 0.5 * nu * log2 + half_log_pi, 0.5 * (nu + 1.0) * log2 + half_log_pi


def _safe_exp(w: complex) -> complex:
    if w.real > 700.0:
        raise AccuracyError(f"overflow evaluating exp({w})")
    return cmath.exp(w)


def _weber_initial(nu: complex) -> tuple[complex, complex]:
    """D_nu(0) and dD_nu/dz at 0."""
    l0, l1 = _log_prefactor(nu)
    g0 = (1.0 - nu) / 2.0
    g1 = -nu / 2.0
    w0 = 0j if _is_pole(g0) else _safe_exp(l0 - log_gamma(g0))
    w1 = 0j if _is_pole(g1) else -_safe_exp(l1 - log_gamma(g1))
    return w0, w1


def _weber_series(nu: complex, z: complex) -> WeberResult:
    # D_nu(z) = 2^{nu/2} e^{-z^2/4} [ sqrt(pi)/G((1-nu)/2) M(-nu/2, 1/2, z^2/2)
    #                                - sqrt(2 pi) z / G(-nu/2) M((1-nu)/2, 3/2, z^2/2) ]
    zz = z * z / 2.0
    l0, l1 = _log_prefactor(nu)
    gauss = -z * z / 4.0
    parts = []
    err_abs = 0.0
    for arg_g, lpre, a, b, sign, mult in (
        ((1.0 - nu) / 2.0, l0, -nu / 2.0, 0.5, 1.0, 1.0),
        (-nu / 2.0, l1, (1.0 - nu) / 2.0, 1.5, -1.0, z),
    ):
        if _is_pole(arg_g) or mult == 0:
            continue
        lg = log_gamma(arg_g)
        expo = lpre - lg + gauss
        coef = sign * mult * _safe_exp(expo)
        m = kummer_m(a, b, zz, full_output=True)
        part = coef * m.value
        parts.append(part)
        # series rounding (m.rel_error) plus the exponent's absolute error
        err_abs += abs(part) * (m.rel_error + EPS * (abs(expo) + abs(lg) + 1.0))
    value = sum(parts, 0j)
    scale = abs(value)
    if scale == 0.0 or not (math.isfinite(scale) and math.isfinite(err_abs)):
        return WeberResult(value, math.inf, "series")
    # factor 4 covers rounding in the Gamma and exponential evaluations
    rel = 4.0 * err_abs / scale
    return WeberResult(value, rel, "series")


def _taylor_march(nu: complex, z: complex, reach: float, init=None) -> tuple[complex, float, float]:
    """March w'' = (z^2/4 - nu - 1/2) w from 0 to z by local Taylor expansions.

    The coefficient is a quadratic polynomial, so around any point z0 the
    Taylor coefficients obey a three-term recurrence and each step is an
    exact series re-expansion truncated at rounding level. ``reach`` caps
    |h| * sqrt(|q|) per step, which bounds cancellation inside a step.
    ``init`` overrides the initial (w, w') at 0.
    Returns (w(z), peak |w| along the path, accumulated rounding estimate).
    """
    w, dw = _weber_initial(nu) if init is None else init
    peak = abs(w)
    rnd = 0.0
    length = abs(z)
    direction = z / length
    s = 0.0
    while s < length:
        z0 = s * direction
        q0 = z0 * z0 / 4.0 - nu - 0.5
        qmax = abs(q0) + abs(z0) * 0.5 * 1.0 + 0.25
        h_len = min(length - s, reach / max(math.sqrt(qmax), 1e-3), 4.0)
        # the bound on |q| must hold across the step, so refine once
        qmax = abs(q0) + 0.5 * abs(z0) * h_len + 0.25 * h_len * h_len
        h_len = min(h_len, reach / max(math.sqrt(qmax), 1e-3))
        h = h_len * direction
        q1 = z0 / 2.0
        c = [w, dw]
        val = w + dw * h
        der = dw
        hn1 = h  # h^(n+1)
        abs_sum = abs(w) + abs(dw * h)
        n = 0
        quiet = 0
        while True:
            cn2 = q0 * c[n] + (q1 * c[n - 1] if n >= 1 else 0.0) + (0.25 * c[n - 2] if n >= 2 else 0.0)
            cn2 /= (n + 2) * (n + 1)
            c.append(cn2)
            term = cn2 * hn1 * h
            val += term
            der += (n + 2) * cn2 * hn1
            hn1 *= h
            abs_sum += abs(term)
            n += 1
            if abs(term) < 1e-18 * abs_sum:
                quiet += 1
                if quiet >= 3:
                    break
            else:
                quiet = 0
            if n > 400:
                raise AccuracyError("Taylor step did not converge")
        w, dw = val, der
        rnd += EPS * abs_sum * n**0.5
        peak = max(peak, abs(w))
        s += h_len
    return w, peak, rnd


def _weber_ode(nu: complex, z: complex) -> WeberResult:
    """D_nu(z) by integrating the Weber equation from the closed-form data at 0."""
    w0, w1 = _weber_initial(nu)
    if z == 0:
        return WeberResult(w0, 4 * EPS, "ode")
    fine, peak, rnd = _taylor_march(nu, z, 1.0, (w0, w1))
    other, _, _ = _taylor_march(nu, z, 1.7, (w0, w1))
    mag = abs(fine)
    if mag == 0.0:
        return WeberResult(fine, math.inf, "ode")
    # errors in the data at 0 and rounding along the path grow like the
    # basis solutions, which dominate a recessive D_nu by the factor cond
    u, _, _ = _taylor_march(nu, z, 1.0, (1.0 + 0j, 0j))
    v, _, _ = _taylor_march(nu, z, 1.0, (0j, 1.0 + 0j))
    cond = (abs(w0) * abs(u) + abs(w1) * abs(v)) / mag
    l0, l1 = _log_prefactor(nu)
    init_err = EPS * (abs(l0) + abs(l1) + abs(log_gamma((1.0 - nu) / 2.0 + 1.0)) + abs(log_gamma(1.0 - nu / 2.0)) + 4.0)
    rel = abs(fine - other) / mag + cond * (init_err + rnd / max(peak, mag))
    return WeberResult(fine, rel, "ode")


_SERIES_ACCEPT = 1e-11
_TARGET = 1e-8


def weber_d(nu, z, *, method: str = "auto", full_output: bool = False):
    """Weber's parabolic cylinder function D_nu(z) for complex order and argument.

    ``method="auto"`` uses the two-Kummer representation when its
    cancellation estimate is below 1e-11 and otherwise integrates the
    Weber equation from z = 0, where the initial data are closed-form.
    ``"series"`` and ``"ode"`` force a route. Raises :class:`AccuracyError`
    when the chosen route's error estimate exceeds 1e-8.
    """
    nu, z = complex(nu), complex(z)
    if not (cmath.isfinite(nu) and cmath.isfinite(z)):
        raise ValueError("weber_d needs finite inputs")
    if method not in ("auto", "series", "ode"):
        raise ValueError(f"unknown method {method!r}")
    res = None
    if method == "series":
        res = _weber_series(nu, z)
    elif method == "auto":
        try:
            res = _weber_series(nu, z)
        except AccuracyError:
            res = None
        if res is not None and not res.rel_error <= _SERIES_ACCEPT:
            res = None
    if res is None:
        res = _weber_ode(nu, z)
    if not res.rel_error <= _TARGET or not cmath.isfinite(res.value):
        raise AccuracyError(
            f"D_{nu}({z}): {res.method} route error estimate {res.rel_error:.2e}"
        )
    return res if full_output else res.value
