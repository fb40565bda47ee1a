import json
import math

import mpmath as mp
import numpy as np
import pytest
from scipy import optimize, signal

from finitepulse import analysis as an
from finitepulse.errors import FeatureNotFound
from finitepulse.integrated_model import amplitude_factor
from finitepulse.shapes import TABLE_I, calibrate_area, make_shape

mp.mp.dps = 30
RECT_PI = make_shape("rectangular", 1, 1, math.pi)
SINE_PI = calibrate_area(make_shape("sine", 1, 1), math.pi)


def rect_closed_form(dt):
    x = np.sqrt(math.pi**2 + np.asarray(dt) ** 2)
    return (math.pi / x) ** 2 * np.sin(0.5 * x) ** 2


def test_rabi_formula_and_exact_agree():
    d = np.linspace(-20, 20, 81)
    assert np.max(np.abs(an.rabi_formula(RECT_PI, d) - rect_closed_form(d))) < 1e-15
    assert np.max(np.abs(an.probabilities(RECT_PI, d, "exact") - rect_closed_form(d))) < 1e-9
    assert abs(an.probabilities(RECT_PI, [0.0], "exact")[0] - 1) < 1e-10


def test_exact_envelope_rectangular_is_lorentzian():
    d = np.linspace(0, 30, 31)
    om = math.pi
    assert np.max(np.abs(an.exact_envelope(RECT_PI, d) - om**2 / (om**2 + d**2))) < 1e-9


def test_profile_symmetry_and_rows():
    prof = an.detuning_profile(SINE_PI, np.linspace(-30, 30, 501), "exact")
    assert len(prof.rows) == 501
    assert np.max(np.abs(prof.probabilities - prof.probabilities[::-1])) < 1e-9


def test_profile_validation():
    with pytest.raises(ValueError):
        an.Profile(an.Method.EXACT, [0.0, 0.0], [0.1, 0.2], SINE_PI)
    with pytest.raises(ValueError):
        an.Profile(an.Method.EXACT, [0.0, 1.0], [0.1, 1.2], SINE_PI)


def test_profile_csv_and_sidecar(tmp_path):
    prof = an.detuning_profile(SINE_PI, np.linspace(-5, 5, 11), "integrated")
    csv_path, side = prof.to_csv(tmp_path / "p.csv")
    lines = csv_path.read_text().splitlines()
    assert lines[0] == "detuning_rad_per_s,probability" and len(lines) == 12
    meta = json.loads(side.read_text())
    assert meta["schema_version"] == an.SCHEMA_VERSION and meta["method"] == "integrated"


def test_integrated_vs_exact_sine_deviation():
    d = np.linspace(-30, 30, 501)
    dev = np.abs(an.probabilities(SINE_PI, d, "integrated") - an.probabilities(SINE_PI, d, "exact"))
    # the largest error sits on the flank of the main lobe
    assert dev.max() < 0.025
    assert abs(abs(d[np.argmax(dev)]) - 3.7) < 0.3
    assert dev.mean() < 0.005


@pytest.mark.xfail(strict=True, reason="measured max deviation is 0.0235 on the main-lobe flank")
def test_integrated_vs_exact_sine_within_two_percent():
    d = np.linspace(-30, 30, 501)
    dev = np.abs(an.probabilities(SINE_PI, d, "integrated") - an.probabilities(SINE_PI, d, "exact"))
    assert dev.max() <= 0.02


def test_landscape_columns_and_ridges():
    land = an.landscape(RECT_PI, [math.pi], [-1.0, 0.0, 1.0])
    assert abs(land.probabilities[0, 1] - 1) < 1e-10
    sine = make_shape("sine", 1, 1)
    three = an.landscape(sine, [3 * math.pi * math.pi / 2], [0.0])
    assert abs(three.probabilities[0, 0] - 1) < 1e-9
    om = np.linspace(0.0, 9 * math.pi * math.pi / 2, 181)
    ridged = an.landscape(sine, om, [0.0])
    assert len(ridged.ridges) >= 5
    areas = [r.area / math.pi for r in ridged.ridges]
    assert np.allclose(areas[:5], [1, 3, 5, 7, 9], atol=0.1)
    assert len(ridged.profiles) == om.size


def test_landscape_methods_agree_in_shape():
    sine = make_shape("sine", 1, 1)
    om = np.array([5.0, 10.0])
    d = np.linspace(-10, 10, 21)
    a = an.landscape(sine, om, d, "exact").probabilities
    b = an.landscape(sine, om, d, "integrated").probabilities
    assert a.shape == b.shape == (2, 21)
    assert np.mean(np.abs(a - b)) < 0.05


def test_rectangular_features_closed_form():
    prof = an.detuning_profile(RECT_PI, np.linspace(-40, 40, 801), "closed_form")
    feats = an.extract_features(prof, refine=2)
    x = optimize.brentq(lambda v: math.tan(0.5 * v) - 0.5 * v, 2 * math.pi + 1e-6, 3 * math.pi - 1e-6)
    pos = math.sqrt(x * x - math.pi**2)
    first = [s for s in feats.satellites if s[0] > 0][0]
    assert abs(first[0] - pos) < 1e-6 and abs(first[0] - 8.42) < 0.02
    assert abs(first[1] - 0.1164) < 5e-4
    hw = optimize.brentq(lambda v: rect_closed_form(v) - 0.5, 0.1, 5)
    assert abs(feats.half_width - hw) < 1e-6 and abs(hw - 2.51) < 0.01


def test_sine_first_satellite_exact():
    prof = an.detuning_profile(SINE_PI, np.linspace(-20, 20, 201), "exact")
    sats = an.find_satellites(prof, refine=1)
    first = [s for s in sats if s[0] > 0][0]
    assert abs(first[0] - 11.1) < 0.5
    # the exact magnitude is 0.01801, just above the 0.0148 +/- 0.003 window
    assert abs(first[1] - 0.018014) < 2e-5


def test_refine_maxima_on_known_function():
    f = lambda x: np.cos(np.asarray(x) - 0.3)  # noqa: E731
    xs, ys = an.refine_maxima(f, [0.25], 0.05)
    assert abs(xs[0] - 0.3) < 1e-7 and abs(ys[0] - 1) < 1e-12


def test_wing_exponents_closed_form_and_exact():
    rect = an.detuning_profile(RECT_PI, np.linspace(0, 300, 3001), "closed_form")
    assert abs(an.extract_features(rect, wing_range=(30, 300)).wing_exponent + 2) < 0.05
    sine = an.detuning_profile(SINE_PI, np.linspace(0, 300, 601), "exact")
    assert abs(an.extract_features(sine, wing_range=(30, 300)).wing_exponent + 4) < 0.1


def test_satellites_respect_prominence_and_floor():
    d = np.linspace(-30, 30, 301)
    p = 0.5 * np.exp(-d**2) + 1e-15 * (1 + np.cos(d))
    prof = an.Profile(an.Method.EXACT, d, p, SINE_PI)
    assert an.find_satellites(prof) == []


def test_loglog_and_wing_need_points():
    with pytest.raises(FeatureNotFound):
        an.loglog_slope([1.0], [1.0])
    with pytest.raises(FeatureNotFound):
        an.wing_exponent([(5.0, 0.1), (-5.0, 0.1)])
    assert abs(an.loglog_slope([1, 10, 100], [1, 1e-2, 1e-4]) + 2) < 1e-12


def test_half_width_definitions():
    hw_cf = an.half_width(RECT_PI, "closed_form")
    assert abs(hw_cf - math.pi) < 1e-8  # envelope pi^2 / (pi^2 + d^2) = 1/2
    hw_cross = an.half_width(RECT_PI, "closed_form", definition="crossing")
    assert abs(hw_cross - optimize.brentq(lambda v: rect_closed_form(v) - 0.5, 0.1, 5)) < 1e-8
    with pytest.raises(ValueError):
        an.half_width(RECT_PI, definition="fwhm")


def test_broadening_closed_form_rectangular_is_linear():
    b = an.broadening(make_shape("rectangular", 1, 1), np.geomspace(20, 200, 4), "closed_form")
    assert abs(b.exponent - 1) < 1e-6


def test_broadening_integrated_sine_is_square_root():
    b = an.broadening(make_shape("sine", 1, 1), np.geomspace(20, 200, 4), "integrated")
    assert abs(b.exponent - 0.5) < 1e-6


def test_delta_half_against_oracle():
    def chi_minus(d):
        d2 = mp.mpf(d) ** 2
        return mp.im(mp.loggamma(mp.mpc(0.5, d2 / 2))) - mp.im(mp.loggamma(mp.mpc(0, d2 / 2))) - mp.pi / 4

    amp = lambda d: mp.sin(chi_minus(d)) ** 2 + mp.exp(-2 * mp.pi * d**2) * mp.cos(chi_minus(d)) ** 2  # noqa: E731
    ref = float(mp.findroot(lambda d: amp(d) - 0.5, 0.48))
    dh = an.delta_half_solve(1e-8)
    assert abs(dh.root - ref) < 1e-8
    # a rounded 0.477 is within 1 %
    assert abs(dh.root - 0.477) / 0.477 < 0.01
    assert abs(amplitude_factor(0.0) - 1) < 1e-15
    assert abs(dh.coefficient - 2 * math.sqrt(math.pi) * ref) < 1e-7
    assert abs(dh.claimed_implied_coefficient - 13.4) < 0.01


def test_delta_half_predicts_exact_half_width():
    dh = an.delta_half_solve()
    for w in (20.0, 80.0):
        sh = make_shape("sine", 1, 1, w)
        pred = dh.predicted_half_width(w * sh.slope0())
        assert abs(pred / an.half_width(sh, "exact") - 1) < 0.15


def test_satellite_magnitudes_across_shapes():
    # at equal delta the amplitude factor is shape independent; satellite maxima
    # still differ because the adiabatic phase differs between shapes
    mags = []
    for kind in TABLE_I:
        s = calibrate_area(make_shape(kind, 1, 1), math.pi)
        k0 = s.omega0 * s.slope0()
        prof = an.detuning_profile(s, np.linspace(0.3, 6, 400) * 2 * math.sqrt(k0), "exact")
        i = [j for j in signal.find_peaks(prof.probabilities)[0] if prof.probabilities[j] < 0.5][0]
        mags.append(prof.probabilities[i])
    assert max(mags) / min(mags) < 1.5


@pytest.mark.xfail(strict=True, reason="first-satellite magnitudes span 0.0148 to 0.0214 (factor 1.45)")
def test_satellite_magnitudes_within_twenty_percent():
    mags = []
    for kind in TABLE_I:
        s = calibrate_area(make_shape(kind, 1, 1), math.pi)
        k0 = s.omega0 * s.slope0()
        prof = an.detuning_profile(s, np.linspace(0.3, 6, 400) * 2 * math.sqrt(k0), "exact")
        i = [j for j in signal.find_peaks(prof.probabilities)[0] if prof.probabilities[j] < 0.5][0]
        mags.append(prof.probabilities[i])
    assert max(mags) / min(mags) <= 1.2
