"""Line profiles, excitation landscapes and feature extraction.

A profile is the transition probability against detuning for a fixed
pulse. Features read off a profile are the half-width (outermost crossing
of P = 1/2), the satellite maxima outside the main lobe, the decay exponent
of the satellite envelope and, across a set of peak Rabi frequencies, the
power-broadening exponent.
"""

from __future__ import annotations

import csv
import json
import math
from dataclasses import dataclass, field
from enum import Enum
from pathlib import Path

import numpy as np
from scipy import interpolate, optimize, signal

from .dynamics import DriveParams, propagate_batch, transition_probability
from .errors import FeatureNotFound, UnsupportedKind
from .integrated_model import _edge_slope, amplitude_factor, chi_phases_array, integrated_curve
from .shapes import PulseShape, ShapeKind, area
from .split_model import SplitMode, split_envelope, split_probability

SCHEMA_VERSION = 1

# satellites must stand out from their surroundings by this fraction of
# their own height, and lie above the solver's noise floor
SATELLITE_PROMINENCE = 1e-4
SATELLITE_FLOOR = 1e-13

# values quoted alongside the computed half-width root
CLAIMED_DELTA_HALF = 3.78
CLAIMED_COEFFICIENT = 13.4


class Method(str, Enum):
    EXACT = "exact"
    SPLIT = "split"
    INTEGRATED = "integrated"
    CLOSED_FORM = "closed_form"


def rabi_formula(shape: PulseShape, detunings) -> np.ndarray:
    """Closed-form probability of a rectangular pulse, Omega^2/Lambda^2 sin^2(Lambda T/2)."""
    if shape.kind is not ShapeKind.RECTANGULAR:
        raise UnsupportedKind("the closed-form profile exists only for rectangular pulses")
    dl = np.asarray(detunings, dtype=float)
    om = shape.omega0
    lam = np.hypot(om, dl)
    with np.errstate(invalid="ignore", divide="ignore"):
        p = np.where(lam > 0, (om / np.where(lam > 0, lam, 1.0)) ** 2, 0.0)
    return p * np.sin(0.5 * lam * shape.duration) ** 2


def exact_envelope(shape: PulseShape, detunings, tol: float = 1e-10) -> np.ndarray:
    """Largest exact probability over an extra adiabatic phase inserted at mid-pulse.

    With U = U2 Phi U1 split at T/2 and Phi diagonal in the eigenbasis of
    H(T/2), max over the phase of |U12| is sum_k |U2'_1k| |U1'_k2|. This is
    the exact counterpart of the amplitude factor: P oscillates beneath it
    as the peak Rabi frequency moves the accumulated phase.
    """
    dl = np.asarray(detunings, dtype=float)
    half = shape.half
    u1 = propagate_batch(shape, dl, 0.0, half, tol)
    u2 = propagate_batch(shape, dl, half, shape.duration, tol)
    om = shape.omega0 * float(shape.f(half))
    h = 0.5 * np.stack([np.stack([-dl, np.full_like(dl, om)], -1),
                        np.stack([np.full_like(dl, om), dl], -1)], -2)
    _, v = np.linalg.eigh(h)
    a = np.abs(np.einsum("nk,nkj->nj", u2[:, 0, :], v))
    b = np.abs(np.einsum("nkj,nk->nj", v.conj(), u1[:, :, 1]))
    return np.minimum((a * b).sum(axis=1) ** 2, 1.0)


def probabilities(shape: PulseShape, detunings, method="exact", *, lam: float | None = None,
                  mode=None, tol: float = 1e-10) -> np.ndarray:
    """Transition probability for each detuning (rad/s) by the chosen method."""
    method = Method(method)
    dl = np.asarray(detunings, dtype=float)
    if method is Method.EXACT:
        return transition_probability(shape, dl, tol=tol)
    if method is Method.CLOSED_FORM:
        return rabi_formula(shape, dl)
    if method is Method.INTEGRATED:
        return integrated_curve(shape, dl, SplitMode.SLOPE if mode is None else mode)
    mode = SplitMode.AREA if mode is None else mode
    return np.array([split_probability(DriveParams(shape, float(d)), lam, mode) for d in dl])


@dataclass(frozen=True)
class Profile:
    """Transition probability against detuning for one pulse and one method."""

    method: Method
    detunings: np.ndarray
    probabilities: np.ndarray
    shape: PulseShape
    grid: dict = field(default_factory=dict)
    options: dict = field(default_factory=dict)

    def __post_init__(self):
        d = np.asarray(self.detunings, dtype=float)
        p = np.asarray(self.probabilities, dtype=float)
        if d.shape != p.shape or d.ndim != 1 or d.size == 0:
            raise ValueError("detunings and probabilities must be equal-length 1-D arrays")
        if np.any(np.diff(d) <= 0):
            raise ValueError("detunings must be strictly increasing")
        if np.any(p < -1e-9) or np.any(p > 1 + 1e-9):
            raise ValueError("probabilities outside [0, 1]")
        object.__setattr__(self, "detunings", d)
        object.__setattr__(self, "probabilities", p)

    @property
    def rows(self) -> list[tuple[float, float]]:
        return list(zip(self.detunings.tolist(), self.probabilities.tolist()))

    def evaluate(self, detunings) -> np.ndarray:
        """Re-evaluate the underlying model at other detunings."""
        return probabilities(self.shape, detunings, self.method, **self.options)

    def metadata(self) -> dict:
        sh = self.shape
        return {
            "schema_version": SCHEMA_VERSION,
            "shape": sh.kind.value,
            "tau_s": sh.tau,
            "duration_s": sh.duration,
            "omega0_rad_per_s": sh.omega0,
            "area_rad": area(sh),
            "method": self.method.value,
            "grid": dict(self.grid),
            "options": {k: (v.value if isinstance(v, Enum) else v) for k, v in self.options.items()},
        }

    def to_csv(self, path) -> tuple[Path, Path]:
        """Write ``detuning_rad_per_s, probability`` rows and a JSON sidecar."""
        path = Path(path)
        write_columns(path, self.detunings, {"probability": self.probabilities})
        side = path.with_suffix(".json")
        side.write_text(json.dumps(self.metadata(), indent=2))
        return path, side


def write_columns(path, detunings, columns: dict) -> Path:
    path = Path(path)
    names = list(columns)
    with path.open("w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["detuning_rad_per_s", *names])
        for i, d in enumerate(detunings):
            w.writerow([repr(float(d)), *(repr(float(columns[n][i])) for n in names)])
    return path


def detuning_profile(shape: PulseShape, grid, method="exact", *, lam=None, mode=None,
                     tol: float = 1e-10) -> Profile:
    """Profile over ``grid`` (detunings in rad/s, strictly increasing)."""
    dl = np.asarray(grid, dtype=float)
    if dl.ndim != 1 or dl.size == 0:
        raise ValueError("grid must be a non-empty 1-D sequence")
    method = Method(method)
    opts = {"tol": tol} if method is Method.EXACT else {}
    if method is Method.SPLIT:
        opts = {"lam": lam, "mode": SplitMode.AREA if mode is None else SplitMode(mode)}
    elif method is Method.INTEGRATED and mode is not None:
        opts = {"mode": SplitMode(mode)}
    p = probabilities(shape, dl, method, **opts)
    spec = {"min": float(dl[0]), "max": float(dl[-1]), "count": int(dl.size), "units": "rad_per_s"}
    return Profile(method, dl, np.clip(p, 0.0, 1.0), shape, spec, opts)


@dataclass(frozen=True)
class Ridge:
    omega0: float
    area: float
    probability: float


@dataclass(frozen=True)
class Landscape:
    shape: PulseShape
    method: Method
    omega0s: np.ndarray
    detunings: np.ndarray
    probabilities: np.ndarray  # (len(omega0s), len(detunings))
    ridges: tuple

    @property
    def profiles(self) -> list[Profile]:
        return [Profile(self.method, self.detunings, np.clip(row, 0.0, 1.0), self.shape.with_omega0(om))
                for om, row in zip(self.omega0s, self.probabilities)]


def _ridges(shape, omega0s, column) -> tuple:
    """Maxima of the resonant column with P >= 1/2, endpoints included."""
    out = []
    n = len(column)
    for i in range(n):
        left = column[i - 1] if i > 0 else -np.inf
        right = column[i + 1] if i < n - 1 else -np.inf
        if column[i] >= 0.5 and column[i] >= left and column[i] > right:
            out.append(Ridge(float(omega0s[i]), area(shape.with_omega0(omega0s[i])), float(column[i])))
    return tuple(out)


def landscape(shape: PulseShape, omega0_grid, detuning_grid, method="exact", *, tol=1e-10,
              lam=None, mode=None) -> Landscape:
    """Probability over a grid of peak Rabi frequencies and detunings.

    Ridges are the local maxima along omega0 of the column nearest to
    resonance; for a sine pulse they sit at areas pi, 3 pi, ...
    """
    om = np.asarray(omega0_grid, dtype=float)
    dl = np.asarray(detuning_grid, dtype=float)
    if om.size == 0 or dl.size == 0:
        raise ValueError("grids must be non-empty")
    method = Method(method)
    if method is Method.EXACT:
        oo, dd = np.meshgrid(om, dl, indexing="ij")
        p = transition_probability(shape, dd.ravel(), tol=tol, omega0s=oo.ravel()).reshape(oo.shape)
    else:
        p = np.array([probabilities(shape.with_omega0(o), dl, method, lam=lam, mode=mode) for o in om])
    j = int(np.argmin(np.abs(dl)))
    return Landscape(shape, method, om, dl, p, _ridges(shape, om, p[:, j]))


@dataclass(frozen=True)
class ProfileFeatures:
    half_width: float
    satellites: tuple
    wing_exponent: float | None
    broadening_exponent: float | None = None


def _vertex(x, y):
    """Vertex of the parabola through three points."""
    (x0, x1, x2), (y0, y1, y2) = x, y
    den = (x0 - x1) * (x0 - x2) * (x1 - x2)
    a = (x2 * (y1 - y0) + x1 * (y0 - y2) + x0 * (y2 - y1)) / den
    b = (x2 * x2 * (y0 - y1) + x1 * x1 * (y2 - y0) + x0 * x0 * (y1 - y2)) / den
    c = (x1 * x2 * (x1 - x2) * y0 + x2 * x0 * (x2 - x0) * y1 + x0 * x1 * (x0 - x1) * y2) / den
    if a >= 0:
        i = int(np.argmax(y))
        return x[i], y[i]
    xv = -b / (2 * a)
    return xv, c - b * b / (4 * a)


def _crossings(profile: Profile) -> tuple[float | None, float | None, float]:
    d, p = profile.detunings, profile.probabilities
    ipk = int(np.argmax(p))
    if p[ipk] < 0.5:
        raise FeatureNotFound("profile never reaches 1/2")
    spline = interpolate.CubicSpline(d, p - 0.5)
    above = p >= 0.5
    right = left = None
    hi = np.nonzero(above[ipk:])[0]
    if hi.size and ipk + hi[-1] + 1 < d.size:
        i = ipk + hi[-1]
        right = optimize.brentq(spline, d[i], d[i + 1], xtol=1e-12 * (abs(d[i]) + 1e-300) + 1e-300)
    lo = np.nonzero(above[:ipk + 1])[0]
    if lo.size and lo[0] > 0:
        i = lo[0]
        left = optimize.brentq(spline, d[i - 1], d[i], xtol=1e-12 * (abs(d[i]) + 1e-300) + 1e-300)
    return left, right, float(d[ipk])


def _half_width(profile: Profile) -> tuple[float, float, float]:
    left, right, center = _crossings(profile)
    if left is None and right is None:
        raise FeatureNotFound("profile does not cross 1/2 inside the grid")
    if left is not None and right is not None:
        return 0.5 * (right - left), left, right
    if right is not None:
        return right - center, center, right
    return center - left, left, center


def refine_maxima(evaluate, positions, spacing: float, rounds: int = 3) -> tuple[np.ndarray, np.ndarray]:
    """Polish local maxima by repeated five-point parabolic fits, all peaks batched."""
    x = np.asarray(positions, dtype=float).copy()
    h = 0.5 * spacing
    y = None
    offs = np.array([-2.0, -1.0, 0.0, 1.0, 2.0])
    for _ in range(rounds):
        pts = x[:, None] + h * offs
        vals = np.asarray(evaluate(pts.ravel())).reshape(pts.shape)
        for k in range(x.size):
            c = np.polyfit(offs, vals[k], 2)
            if c[0] < 0:
                step = -c[1] / (2 * c[0])
                step = float(np.clip(step, -2.0, 2.0))
            else:
                step = float(offs[np.argmax(vals[k])])
            x[k] += step * h
        h *= 0.25
    y = np.asarray(evaluate(x))
    return x, y


def find_satellites(profile: Profile, refine: int = 0) -> list[tuple[float, float]]:
    """Satellite maxima outside the main lobe as (position rad/s, magnitude), sorted by |position|.

    ``refine`` innermost satellites on each side are polished by
    re-evaluating the model; the rest use parabolic interpolation of the grid.
    """
    d, p = profile.detunings, profile.probabilities
    _, left, right = _half_width(profile)
    idx, props = signal.find_peaks(p, prominence=0.0)
    keep = []
    for i, prom in zip(idx, props["prominences"]):
        if p[i] < SATELLITE_FLOOR or p[i] >= 0.5 or prom < SATELLITE_PROMINENCE * p[i]:
            continue
        if left < d[i] < right:
            continue
        # parabola in log P is close to exact near a smooth maximum
        x, ly = _vertex(d[i - 1:i + 2], np.log(np.maximum(p[i - 1:i + 2], 1e-300)))
        keep.append([float(x), float(math.exp(ly))])
    keep.sort(key=lambda s: abs(s[0]))
    if refine and keep:
        spacing = float(np.median(np.diff(d)))
        chosen = []
        for side in (1, -1):
            chosen += [k for k, s in enumerate(keep) if np.sign(s[0]) == side][:refine]
        xs, ys = refine_maxima(profile.evaluate, [keep[k][0] for k in chosen], spacing)
        for k, x, y in zip(chosen, xs, ys):
            keep[k] = [float(x), float(y)]
        keep.sort(key=lambda s: abs(s[0]))
    return [tuple(s) for s in keep]


def loglog_slope(x, y) -> float:
    """Unweighted least-squares slope of log y against log x."""
    x = np.log(np.abs(np.asarray(x, dtype=float)))
    y = np.log(np.asarray(y, dtype=float))
    if x.size < 2:
        raise FeatureNotFound("need at least two points for a log-log regression")
    return float(np.polyfit(x, y, 1)[0])


def wing_exponent(satellites, wing_range=None) -> float:
    """Log-log slope of satellite magnitudes against |detuning|.

    The innermost satellite on each side is dropped as part of the
    transition region; ``wing_range`` = (lo, hi) restricts |detuning|.
    """
    sats = list(satellites)
    pos = [s for s in sats if s[0] > 0][1:]
    neg = [s for s in sats if s[0] < 0][1:]
    use = pos + neg
    if wing_range is not None:
        lo, hi = wing_range
        use = [s for s in use if lo <= abs(s[0]) <= hi]
    if len(use) < 2:
        raise FeatureNotFound("not enough satellites in the wing")
    return loglog_slope([s[0] for s in use], [s[1] for s in use])


def extract_features(profile: Profile, *, refine: int = 0, wing_range=None) -> ProfileFeatures:
    """Half-width, satellites and wing exponent of a profile."""
    hw, _, _ = _half_width(profile)
    sats = find_satellites(profile, refine)
    if len(sats) < 3:
        raise FeatureNotFound(f"found {len(sats)} satellites, need at least 3")
    return ProfileFeatures(hw, tuple(sats), wing_exponent(sats, wing_range))


def envelope(shape: PulseShape, detunings, method="exact", *, tol: float = 1e-10,
             lam=None, mode=None) -> np.ndarray:
    """Upper envelope of the profile: P maximised over the mid-pulse phase.

    For the integrated model this is the amplitude factor, for the
    rectangular closed form Omega^2 / Lambda^2.
    """
    method = Method(method)
    dl = np.asarray(detunings, dtype=float)
    if method is Method.EXACT:
        return exact_envelope(shape, dl, tol)
    if method is Method.CLOSED_FORM:
        rabi_formula(shape, dl[:0])
        return shape.omega0**2 / (shape.omega0**2 + dl**2)
    if method is Method.INTEGRATED:
        k0 = _edge_slope(shape, SplitMode.SLOPE if mode is None else mode)
        scale = shape.duration if mode is not None and SplitMode(mode) is SplitMode.LITERAL else 1.0
        delta = dl * scale / (2.0 * math.sqrt(k0))
        c1, c2 = chi_phases_array(delta)
        cm = c1 - c2
        return np.sin(cm) ** 2 + np.exp(-2.0 * math.pi * delta**2) * np.cos(cm) ** 2
    mode = SplitMode.AREA if mode is None else mode
    return np.array([split_envelope(DriveParams(shape, float(d)), lam, mode) for d in dl])


def half_width(shape: PulseShape, method="exact", *, definition: str = "envelope",
               span: float | None = None, count: int = 200, tol: float = 1e-10,
               lam=None, mode=None) -> float:
    """Half-width at P = 1/2, root-polished with the model itself.

    ``definition="envelope"`` uses the outermost 1/2 crossing of
    :func:`envelope`, which is smooth in omega0; ``"crossing"`` uses the
    profile itself and jumps as Rabi maxima move through the 1/2 level.
    Only Delta >= 0 is scanned (profiles are even), over [0, span]; the
    default span is 1.2 omega0 + 40 / T.
    """
    if definition not in ("envelope", "crossing"):
        raise ValueError(f"unknown half-width definition {definition!r}")
    fn = envelope if definition == "envelope" else probabilities
    if span is None:
        span = 1.2 * shape.omega0 + 40.0 / shape.duration

    def g(x):
        return np.asarray(fn(shape, x, method, lam=lam, mode=mode, tol=tol)) - 0.5

    d = np.linspace(0.0, span, count)
    above = np.nonzero(g(d) >= 0.0)[0]
    if above.size == 0:
        raise FeatureNotFound("profile never reaches 1/2")
    i = above[-1]
    if i + 1 >= d.size:
        raise FeatureNotFound("profile still above 1/2 at the edge of the scan")
    return optimize.brentq(lambda x: float(g([x])[0]), d[i], d[i + 1], xtol=1e-10 * span)


@dataclass(frozen=True)
class Broadening:
    omega0s: np.ndarray
    half_widths: np.ndarray
    exponent: float


def broadening(shape: PulseShape, omega0s, method="exact", **kw) -> Broadening:
    """Half-width against peak Rabi frequency and its log-log slope.

    Keyword arguments go to :func:`half_width`.
    """
    om = np.asarray(omega0s, dtype=float)
    hw = np.array([half_width(shape.with_omega0(o), method, **kw) for o in om])
    return Broadening(om, hw, loglog_slope(om, hw))


def broadening_exponent(land: Landscape) -> float:
    """Power-broadening exponent from the outermost 1/2 crossings of a landscape's profiles.

    Rows that never reach 1/2 are skipped. Crossing half-widths jump with
    the resonant phase, so :func:`broadening` is the smoother estimate.
    """
    om, hw = [], []
    for o, prof in zip(land.omega0s, land.profiles):
        try:
            hw.append(_half_width(prof)[0])
            om.append(o)
        except FeatureNotFound:
            continue
    return loglog_slope(om, hw)


@dataclass(frozen=True)
class DeltaHalf:
    root: float
    claimed: float = CLAIMED_DELTA_HALF
    claimed_coefficient: float = CLAIMED_COEFFICIENT

    @property
    def coefficient(self) -> float:
        """Delta_1/2 T / sqrt(Omega0 T) for the sine pulse, 2 sqrt(pi) delta_1/2."""
        return 2.0 * math.sqrt(math.pi) * self.root

    @property
    def claimed_implied_coefficient(self) -> float:
        return 2.0 * math.sqrt(math.pi) * self.claimed

    def predicted_half_width(self, k0: float) -> float:
        """Delta_1/2 = 2 delta_1/2 sqrt(k0) in rad/s for edge slope k0 (rad/s^2)."""
        return 2.0 * self.root * math.sqrt(k0)


def delta_half_solve(tol: float = 1e-8) -> DeltaHalf:
    """Root of sin^2 chi_- + exp(-2 pi delta^2) cos^2 chi_- = 1/2 by bisection."""
    root = optimize.bisect(lambda x: amplitude_factor(x) - 0.5, 0.0, 3.0, xtol=tol)
    return DeltaHalf(float(root))
