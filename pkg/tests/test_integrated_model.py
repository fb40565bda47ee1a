import math

import mpmath as mp
import numpy as np
import pytest
from hypothesis import given, settings, strategies as st
from scipy import integrate

from finitepulse.dynamics import DriveParams
from finitepulse.integrated_model import (amplitude_factor, chi_large_delta, chi_phases, chi_phases_array,
                                          chi_small_delta, delta_param, eta_prime, half_lmsz_ai,
                                          integrated_curve, integrated_params, integrated_probability,
                                          nu_phase, params_from, probability_from, strong_asymptotics)
from finitepulse.shapes import TABLE_I, calibrate_area, make_shape
from finitepulse.split_model import SplitMode, SplitParams, lmsz_cayley_klein

mp.mp.dps = 30
SINE_PI = calibrate_area(make_shape("sine", 1, 1), math.pi)


def chi_oracle(delta):
    d2 = mp.mpf(delta) ** 2
    base = d2 / 2 - d2 / 2 * mp.log(d2 / 2)
    c1 = base + mp.im(mp.loggamma(mp.mpc(0.5, d2 / 2)))
    c2 = base + mp.im(mp.loggamma(mp.mpc(0, d2 / 2))) + mp.pi / 4
    return float(c1), float(c2)


def test_delta_param_examples():
    assert delta_param(DriveParams(SINE_PI, 0.0)) == 0
    k0 = math.pi**3 / 2
    assert abs(SINE_PI.omega0 * SINE_PI.slope0() - k0) < 1e-12
    assert abs(k0 - 15.503) < 1e-3
    assert abs(delta_param(DriveParams(SINE_PI, 2 * math.sqrt(k0))) - 1) < 1e-12
    dl = 2 * math.sqrt(math.pi * SINE_PI.omega0 * math.sqrt(2) / 2)
    assert abs(dl - 6.623) < 2e-3  # printed value is rounded
    assert abs(delta_param(DriveParams(SINE_PI, dl), SplitMode.LITERAL) - 1) < 1e-12


def test_chi_resonant_limits():
    ch = chi_phases(0.0)
    assert ch.chi1 == 0 and abs(ch.chi_minus - math.pi / 4) < 1e-15


@pytest.mark.parametrize("delta", [0.05, 0.5, 1.0, 2.5, 10.0])
def test_chi_matches_oracle(delta):
    c1, c2 = chi_oracle(delta)
    ch = chi_phases(delta)
    assert abs(ch.chi1 - c1) < 1e-11 and abs(ch.chi2 - c2) < 1e-11
    assert abs(ch.chi_plus - (ch.chi1 + ch.chi2)) < 1e-14


def test_chi_minus_example_values():
    # the oracle gives 0.616625; a rounded 0.612 is within 1 %
    cm = chi_phases(0.5).chi_minus
    assert abs(cm - 0.6166252881532145) < 1e-11
    assert abs(cm - 0.612) / 0.612 < 0.01
    assert abs(chi_phases(10.0).chi_minus - 1 / 400) / (1 / 400) < 0.05


def test_expansions():
    for d in (0.05, 0.1):
        ex, sm = chi_phases(d), chi_small_delta(d)
        assert abs(ex.chi1 - sm.chi1) < 5 * d**4 * (1 + abs(math.log(d)))
        assert abs(ex.chi2 - sm.chi2) < 5 * d**4 * (1 + abs(math.log(d)))
    ratio = abs(chi_phases(0.05).chi1 - chi_small_delta(0.05).chi1) / abs(chi_phases(0.1).chi1 - chi_small_delta(0.1).chi1)
    assert ratio < 0.1  # quartic, allowing for logs
    for d in (5.0, 10.0):
        ex, lg = chi_phases(d), chi_large_delta(d)
        assert abs(ex.chi1 - lg.chi1) < 1 / d**4 and abs(ex.chi2 - lg.chi2) < 1 / d**4
    big = abs(chi_phases(5.0).chi_minus - chi_large_delta(5.0).chi_minus)
    bigger = abs(chi_phases(10.0).chi_minus - chi_large_delta(10.0).chi_minus)
    # at least quartic convergence (chi_- converges faster, as delta^-6)
    assert big / bigger > 14


def test_chi_array_matches_scalar():
    d = np.array([-3.0, 0.0, 1e-4, 0.48, 7.0])
    c1, c2 = chi_phases_array(d)
    for di, a, b in zip(d, c1, c2):
        ch = chi_phases(float(di))
        assert abs(a - ch.chi1) < 1e-12 and abs(b - ch.chi2) < 1e-12


def test_half_lmsz_examples():
    assert np.allclose(half_lmsz_ai(0.0), np.eye(2), atol=1e-15)
    u = half_lmsz_ai(8.0)
    assert abs(abs(u[0, 1]) - 1 / math.sqrt(2)) < 1e-12
    for d in (0.3, 1.7, -2.2):
        u = half_lmsz_ai(d)
        assert np.allclose(u.conj().T @ u, np.eye(2), atol=1e-14)
        assert abs(np.linalg.det(u) - 1) < 1e-14


def test_integrated_probability_examples():
    assert abs(integrated_probability(DriveParams(SINE_PI, 0.0)) - 1) < 1e-12
    direct = probability_from(0.7, 2.3, "a")
    for form in "abcd":
        assert abs(probability_from(0.7, 2.3, form) - direct) < 1e-12
    # large-detuning wing
    ref = 1 / (16 * 3.0**4)
    assert abs(probability_from(3.0, 0.0) - ref) / ref < 0.1


@settings(max_examples=300, deadline=None)
@given(st.floats(-5, 5), st.floats(0, 4 * math.pi))
def test_forms_and_bounds(delta, eta):
    vals = [probability_from(delta, eta, f) for f in "abcd"]
    assert max(vals) - min(vals) < 1e-10
    amp = amplitude_factor(delta)
    assert -1e-15 <= vals[0] <= amp + 1e-12 <= 1 + 1e-12
    assert probability_from(-delta, eta) == probability_from(delta, eta)


def test_nu_phase_no_overflow():
    assert math.isfinite(nu_phase(30.0, chi_phases(30.0).chi_minus))


def test_amplitude_is_shape_independent():
    a = integrated_params(DriveParams(SINE_PI, 5.0))
    g = make_shape("gaussian", 0.3, 1.0, 7.0)
    k = g.omega0 * g.slope0()
    b = integrated_params(DriveParams(g, 2 * a.delta * math.sqrt(k)))
    assert abs(a.delta - b.delta) < 1e-12
    assert abs(a.amplitude - b.amplitude) < 1e-12


def test_integrated_curve_matches_scalar():
    d = np.linspace(-30, 30, 41)
    for kind in TABLE_I:
        sh = calibrate_area(make_shape(kind, 1, 1), math.pi)
        curve = integrated_curve(sh, d)
        scalar = [integrated_probability(DriveParams(sh, float(x))) for x in d]
        assert np.max(np.abs(curve - scalar)) < 1e-10


def test_params_from_round_trip():
    p = params_from(0.8, 1.9)
    assert abs(p.chi_plus - (p.chi1 + p.chi2)) < 1e-14
    assert abs(p.chi_minus - (p.chi1 - p.chi2)) < 1e-14


def test_strong_asymptotics_examples():
    sa = strong_asymptotics(2.0, 0.0)
    assert abs(sa.eta_prime - 2) < 1e-14 and abs(sa.xi1 + 1) < 1e-14
    assert abs(sa.a - np.exp(-0.25j * 4)) < 1e-12
    assert abs(sa.a - lmsz_cayley_klein(SplitParams(0.0, 2.0, 1.0, 0.0)).a) < 1e-12
    assert abs(strong_asymptotics(3.0, 1.5).zeta - math.pi / 8) < 1e-14
    quad = integrate.quad(lambda u: math.sqrt(u * u + 4), 0, 2, epsabs=1e-13)[0]
    assert abs(eta_prime(2.0, 1.0) - quad) < 1e-12
    assert abs(eta_prime(2.0, 1.0) - 4.5911) < 1e-4


@settings(max_examples=100, deadline=None)
@given(st.floats(0, 10), st.floats(-10, 10))
def test_strong_asymptotics_invariants(alpha, delta):
    sa = strong_asymptotics(alpha, delta)
    assert abs(abs(sa.q) ** 2 + abs(sa.s) ** 2 - 1) < 1e-14
    assert 0 <= abs(sa.zeta) <= math.pi / 4 + 1e-15


def test_strong_asymptotics_converges_to_weber_pair():
    # the reconstruction is an asymptotic series: its error falls roughly as 1/(alpha^2 + delta^2)
    errs = []
    for r2 in (25.0, 100.0, 400.0):
        worst = 0.0
        for ang in np.linspace(0.1, 1.4, 6):
            al, de = math.sqrt(r2) * math.cos(ang), math.sqrt(r2) * math.sin(ang)
            ck = lmsz_cayley_klein(SplitParams(0.0, al, 1.0, de))
            sa = strong_asymptotics(al, de)
            worst = max(worst, abs(sa.a - ck.a), abs(sa.b - ck.b))
        errs.append(worst)
    assert errs[0] > errs[1] > errs[2]
    assert errs[2] < 1e-3
