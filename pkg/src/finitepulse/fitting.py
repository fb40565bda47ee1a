"""Fits of measured or synthetic line profiles.

The model probability P(Delta - offset) of either approximation is passed
through the linear readout correction P_final = eps1 + eps2 (2P - 1) and
matched to data by least squares with Nelder-Mead.

Parameters that change the model curve itself (the matching point lambda of
the split model and an optional global omega0 scale) are optimised in an
outer loop; for each trial value the curve is tabulated once on a dense
grid and splined, and (eps1, eps2, offset) are fitted against the spline
with restarts. Integrated-model fits are finally polished on the exact
curve.
"""

from __future__ import annotations

import csv
import json
import math
from dataclasses import dataclass, field
from enum import Enum
from pathlib import Path

import numpy as np
from scipy import interpolate, optimize

from .analysis import SCHEMA_VERSION, probabilities
from .errors import InsufficientData, MissingColumn, NonConvergence, ParseError, SingularJacobian
from .shapes import PulseShape
from .split_model import SplitMode

UNIT_FACTORS = {"rad_per_s": 1.0, "hz": 2.0 * math.pi, "mhz": 2.0 * math.pi * 1e6}

EPS_SLACK = 0.05
PENALTY = 1e3


class FitMethod(str, Enum):
    SPLIT = "split"
    INTEGRATED = "integrated"


def apply_correction(p, eps1: float, eps2: float, clamp: bool = False):
    """eps1 + eps2 (2p - 1), optionally clipped to [0, 1]."""
    out = eps1 + eps2 * (2.0 * np.asarray(p, dtype=float) - 1.0)
    if clamp:
        out = np.clip(out, 0.0, 1.0)
    return out[()] if np.ndim(out) == 0 else out


@dataclass(frozen=True)
class FitModel:
    """Fitted (or trial) parameters on top of a fixed, calibrated pulse."""

    method: FitMethod
    eps1: float
    eps2: float
    resonance_offset: float
    fixed: PulseShape
    lam: float | None = None
    omega_scale: float = 1.0
    mode: SplitMode | None = None

    def __post_init__(self):
        if self.method is FitMethod.SPLIT:
            if self.lam is None or not 0.0 < self.lam <= 0.5 * self.fixed.duration * (1 + 1e-12):
                raise ValueError("split fits need lambda in (0, T/2]")

    @property
    def shape(self) -> PulseShape:
        return self.fixed.with_omega0(self.fixed.omega0 * self.omega_scale)

    def raw(self, detunings) -> np.ndarray:
        """Uncorrected model probability at the given detunings (rad/s)."""
        d = np.asarray(detunings, dtype=float) - self.resonance_offset
        return probabilities(self.shape, d, self.method.value, lam=self.lam, mode=self.mode)

    def predict(self, detunings, clamp: bool = False) -> np.ndarray:
        return apply_correction(self.raw(detunings), self.eps1, self.eps2, clamp)

    def to_dict(self) -> dict:
        return {
            "method": self.method.value,
            "eps1": self.eps1,
            "eps2": self.eps2,
            "resonance_offset_rad_per_s": self.resonance_offset,
            "lambda_s": self.lam,
            "omega_scale": self.omega_scale,
            "mode": None if self.mode is None else SplitMode(self.mode).value,
            "shape": self.fixed.kind.value,
            "tau_s": self.fixed.tau,
            "duration_s": self.fixed.duration,
            "omega0_rad_per_s": self.fixed.omega0,
        }


@dataclass(frozen=True)
class FitConfig:
    """Fit settings. ``seed`` drives the restart starting points."""

    method: FitMethod = FitMethod.INTEGRATED
    mode: SplitMode | None = None
    fit_lambda: bool = True
    lam: float | None = None
    free_omega_scale: bool = False
    restarts: int = 5
    seed: int = 0
    max_evals: int = 4000
    lambda_grid: int = 10
    enforce_range: bool = True


@dataclass
class FitResult:
    model: FitModel
    mae: float
    sdrf: float | None
    residuals: np.ndarray
    covariance: np.ndarray | None
    parameter_names: tuple
    iterations: int
    converged: bool
    message: str = ""
    extras: dict = field(default_factory=dict)

    def to_dict(self) -> dict:
        return {
            "schema_version": SCHEMA_VERSION,
            "model": self.model.to_dict(),
            "mae": self.mae,
            "sdrf_rad_per_s": self.sdrf,
            "residuals": self.residuals.tolist(),
            "parameter_names": list(self.parameter_names),
            "covariance": None if self.covariance is None else self.covariance.tolist(),
            "iterations": self.iterations,
            "converged": self.converged,
            "message": self.message,
        }

    def to_json(self, path=None) -> str:
        text = json.dumps(self.to_dict(), indent=2)
        if path is not None:
            Path(path).write_text(text)
        return text


def metrics(residuals, jacobian=None, offset_index: int = 2) -> tuple[float, float | None]:
    """(MAE, SDRF) from residuals and, if given, the residual Jacobian.

    SDRF is the linearised standard error of the resonance offset,
    sqrt(s^2 [(J^T J)^-1]_oo) with s^2 = RSS / (n - p).
    """
    r = np.asarray(residuals, dtype=float)
    mae = float(np.mean(np.abs(r))) if r.size else 0.0
    if jacobian is None:
        return mae, None
    cov = covariance(r, jacobian)
    return mae, float(math.sqrt(max(cov[offset_index, offset_index], 0.0)))


def covariance(residuals, jacobian) -> np.ndarray:
    r = np.asarray(residuals, dtype=float)
    j = np.asarray(jacobian, dtype=float)
    n, p = j.shape
    if n <= p:
        raise SingularJacobian("need more residuals than parameters")
    # column scaling makes the rank test independent of parameter units
    norms = np.linalg.norm(j, axis=0)
    if np.any(norms == 0.0) or not np.all(np.isfinite(norms)):
        raise SingularJacobian("a parameter has no effect on the residuals")
    js = j / norms
    jtj = js.T @ js
    if np.linalg.matrix_rank(jtj, tol=1e-12 * np.max(np.abs(jtj))) < p:
        raise SingularJacobian("J^T J is rank-deficient")
    s2 = float(r @ r) / (n - p)
    return s2 * np.linalg.inv(jtj) / np.outer(norms, norms)


def ingest_csv(path, units: str = "rad_per_s", column: str | None = None) -> np.ndarray:
    """Read (detuning, probability) rows, convert detunings to rad/s and sort.

    The detuning column is the first whose name starts with ``detuning``;
    the probability column is ``column``, else ``probability``, else the
    first starting with ``probability``. Sorting is stable on ties.
    """
    if units not in UNIT_FACTORS:
        raise ValueError(f"units must be one of {sorted(UNIT_FACTORS)}")
    with Path(path).open(newline="") as fh:
        reader = csv.reader(fh)
        try:
            header = [h.strip() for h in next(reader)]
        except StopIteration:
            raise ParseError("empty file", line=1) from None
        det = next((i for i, h in enumerate(header) if h.lower().startswith("detuning")), None)
        if det is None:
            raise MissingColumn("no detuning column")
        if column is not None:
            if column not in header:
                raise MissingColumn(column)
            prob = header.index(column)
        elif "probability" in header:
            prob = header.index("probability")
        else:
            prob = next((i for i, h in enumerate(header) if h.lower().startswith("probability")), None)
        if prob is None:
            raise MissingColumn("no probability column")
        rows = []
        for lineno, row in enumerate(reader, start=2):
            if not row or all(not c.strip() for c in row):
                continue
            try:
                d = float(row[det])
                p = float(row[prob])
            except (ValueError, IndexError):
                raise ParseError(f"bad row {row!r}", line=lineno) from None
            if not (math.isfinite(d) and math.isfinite(p)):
                raise ParseError("non-finite value", line=lineno)
            rows.append((d * UNIT_FACTORS[units], p))
    if not rows:
        raise ParseError("no data rows", line=2)
    data = np.array(rows, dtype=float)
    return data[np.argsort(data[:, 0], kind="stable")]


# ---------------------------------------------------------------- internals

def _as_data(data) -> tuple[np.ndarray, np.ndarray]:
    arr = np.asarray(data, dtype=float)
    if arr.ndim != 2 or arr.shape[1] != 2:
        raise ValueError("data must be a sequence of (detuning, probability) pairs")
    if not np.all(np.isfinite(arr)):
        raise ValueError("data must be finite")
    return arr[:, 0], arr[:, 1]


def _penalty(e1, e2) -> float:
    # keeps eps1 +- eps2 inside the probability range with slack
    lo, hi = -EPS_SLACK, 1.0 + EPS_SLACK
    v = 0.0
    for x in (e1 + e2, e1 - e2):
        v += max(0.0, lo - x) ** 2 + max(0.0, x - hi) ** 2
    return PENALTY * v


class _Curve:
    """Uncorrected model curve for fixed outer parameters, splined on |Delta|."""

    def __init__(self, shape: PulseShape, method: FitMethod, lam, mode, reach: float):
        T = shape.duration
        step = (0.01 if method is FitMethod.INTEGRATED else 0.1) / T
        n = int(min(max(reach / step, 50), 6000)) + 1
        grid = np.linspace(0.0, reach, n)
        vals = probabilities(shape, grid, method.value, lam=lam, mode=mode)
        self._spline = interpolate.CubicSpline(grid, vals, bc_type=((1, 0.0), "not-a-knot"))
        self.reach = reach

    def __call__(self, d):
        return self._spline(np.minimum(np.abs(d), self.reach))


def _inner_fit(curve, d, y, T, starts, max_evals, enforce):
    """Nelder-Mead over (eps1, eps2, offset*T) from several starts; best result."""

    def obj(x):
        e1, e2, o = x
        m = e1 + e2 * (2.0 * curve(d - o / T) - 1.0)
        return float(np.mean((m - y) ** 2)) + (_penalty(e1, e2) if enforce else 0.0)

    best = None
    evals = 0
    for x0 in starts:
        res = optimize.minimize(obj, x0, method="Nelder-Mead",
                                bounds=[(0.0, 1.0), (0.0, 1.0), (None, None)],
                                options={"xatol": 1e-10, "fatol": 1e-16, "maxfev": max_evals})
        evals += res.nfev
        if best is None or res.fun < best.fun:
            best = res
    return best, evals


def _starts(d, y, T, n, seed):
    """Deterministic restart points: a data-driven guess plus seeded jitter."""
    rng = np.random.default_rng(seed)
    o0 = float(d[np.argmax(y)]) * T
    span = max(float(np.ptp(d)) * T, 1.0)
    lo, hi = float(np.min(y)), float(np.max(y))
    e2 = max(0.5 * (hi - lo), 0.05)
    e1 = 0.5 * (hi + lo)
    pts = [np.array([e1, e2, o0])]
    for _ in range(max(n, 1) - 1):
        pts.append(np.array([
            np.clip(e1 + rng.uniform(-0.1, 0.1), 0.0, 1.0),
            np.clip(e2 + rng.uniform(-0.1, 0.1), 0.0, 1.0),
            o0 + rng.uniform(-0.02, 0.02) * span,
        ]))
    return pts


def _jacobian(fun, x, scales, upper=None):
    """Central differences with step 1e-6 * scale; one-sided at an upper bound."""
    cols = []
    f0 = None
    for k in range(len(x)):
        h = 1e-6 * scales[k]
        xp = np.array(x, dtype=float)
        xm = xp.copy()
        if upper is not None and upper[k] is not None and xp[k] + h > upper[k]:
            if f0 is None:
                f0 = fun(np.array(x, dtype=float))
            xm[k] -= h
            cols.append((f0 - fun(xm)) / h)
            continue
        xp[k] += h
        xm[k] -= h
        cols.append((fun(xp) - fun(xm)) / (2.0 * h))
    return np.column_stack(cols)


def fit(data, method="integrated", config: FitConfig | None = None, *, shape: PulseShape) -> FitResult:
    """Least-squares fit of a line profile; deterministic for a fixed config.

    ``data`` holds (detuning rad/s, probability) pairs; ``shape`` is the
    calibrated pulse (omega0 and duration are held fixed unless the config
    frees a global omega0 scale).
    """
    if config is None:
        config = FitConfig(method=FitMethod(method))
    method = FitMethod(method)
    d, y = _as_data(data)
    T = shape.duration
    fit_lam = method is FitMethod.SPLIT and config.fit_lambda
    n_free = 3 + int(fit_lam) + int(config.free_omega_scale)
    if d.size < n_free + 2:
        raise InsufficientData(f"{d.size} points for {n_free} free parameters")
    mode = config.mode
    if method is FitMethod.SPLIT and mode is None:
        mode = SplitMode.AREA
    reach = float(np.max(np.abs(d))) + 0.25 * float(np.ptp(d)) + 5.0 / T
    starts = _starts(d, y, T, config.restarts, config.seed)
    enforce = config.enforce_range
    total = 0
    cache = {}
    incumbent = [None]

    def profile(outer, full=False):
        # best inner fit for the outer parameters (lambda / T, omega scale);
        # trial outer points warm-start from the best inner solution so far
        nonlocal total
        key = tuple(round(float(v), 12) for v in outer) + (full,)
        if key in cache:
            return cache[key]
        k = 0
        lam = config.lam if config.lam is not None else (0.25 * T if method is FitMethod.SPLIT else None)
        if fit_lam:
            lam = float(outer[k]) * T
            k += 1
        scale = float(outer[k]) if config.free_omega_scale else 1.0
        curve = _Curve(shape.with_omega0(shape.omega0 * scale), method, lam, mode, reach)
        trial = starts if full or incumbent[0] is None else [incumbent[0].x, starts[0]]
        res, ev = _inner_fit(curve, d, y, T, trial, config.max_evals, enforce)
        total += ev
        if incumbent[0] is None or res.fun < incumbent[0].fun:
            incumbent[0] = res
        cache[key] = (res, lam, scale)
        return cache[key]

    outer_bounds = []
    if fit_lam:
        outer_bounds.append((1e-3, 0.5))
    if config.free_omega_scale:
        outer_bounds.append((0.5, 2.0))

    converged = True
    if outer_bounds:
        # coarse scan over the outer box, then Nelder-Mead from the two best
        axes = [np.linspace(lo + 0.1 * (hi - lo), hi, config.lambda_grid if i == 0 and fit_lam else 5)
                for i, (lo, hi) in enumerate(outer_bounds)]
        mesh = np.stack(np.meshgrid(*axes, indexing="ij"), -1).reshape(-1, len(axes))
        o0 = min(mesh, key=lambda o: profile(o)[0].fun)
        step = [0.5 * (a[1] - a[0]) if a.size > 1 else 0.05 for a in axes]
        simplex = np.vstack([o0] + [o0 + np.eye(len(o0))[i] * step[i] for i in range(len(o0))])
        simplex = np.clip(simplex, [b[0] for b in outer_bounds], [b[1] for b in outer_bounds])
        r = optimize.minimize(lambda o: profile(o)[0].fun, o0, method="Nelder-Mead", bounds=outer_bounds,
                              options={"xatol": 1e-5, "fatol": 1e-15, "maxfev": 200,
                                       "initial_simplex": simplex})
        converged &= bool(r.success)
        inner, lam, scale = profile(r.x, full=True)
    else:
        inner, lam, scale = profile((), full=True)
    converged &= bool(inner.success)
    e1, e2, o = inner.x

    model = FitModel(method, float(e1), float(e2), float(o) / T, shape, lam, scale, mode)
    if method is FitMethod.INTEGRATED:
        # polish against the exact model curve rather than its spline
        sh = model.shape

        def exact_obj(x):
            m = apply_correction(probabilities(sh, d - x[2] / T, "integrated", mode=mode), x[0], x[1])
            return float(np.mean((m - y) ** 2)) + (_penalty(x[0], x[1]) if enforce else 0.0)

        r = optimize.minimize(exact_obj, inner.x, method="Nelder-Mead",
                              bounds=[(0.0, 1.0), (0.0, 1.0), (None, None)],
                              options={"xatol": 1e-11, "fatol": 1e-18, "maxfev": config.max_evals})
        total += r.nfev
        converged &= bool(r.success)
        e1, e2, o = r.x
        model = FitModel(method, float(e1), float(e2), float(o) / T, shape, lam, scale, mode)

    residuals = model.predict(d) - y
    names = ["eps1", "eps2", "resonance_offset"]
    x = [model.eps1, model.eps2, model.resonance_offset]
    scales = [1.0, 1.0, 1.0 / T]
    upper = [None, None, None]
    if fit_lam:
        names.append("lambda")
        x.append(model.lam)
        scales.append(T)
        upper.append(0.5 * T)
    if config.free_omega_scale:
        names.append("omega_scale")
        x.append(model.omega_scale)
        scales.append(1.0)
        upper.append(None)

    def resid(v):
        kw = dict(zip(names, v))
        m = FitModel(method, kw["eps1"], kw["eps2"], kw["resonance_offset"], shape,
                     kw.get("lambda", model.lam), kw.get("omega_scale", model.omega_scale), mode)
        return m.predict(d) - y

    message = "ok" if converged else "optimizer hit its evaluation limit"
    cov = None
    try:
        cov = covariance(residuals, _jacobian(resid, x, scales, upper))
        sdrf = float(math.sqrt(max(cov[2, 2], 0.0)))
    except SingularJacobian as exc:
        sdrf = None
        message += f"; SDRF omitted: {exc}"
    result = FitResult(model, float(np.mean(np.abs(residuals))), sdrf, residuals, cov, tuple(names),
                       total, converged, message)
    if not converged:
        raise NonConvergence(message, best=result)
    return result
