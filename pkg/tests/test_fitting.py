import json
import math

import numpy as np
import pytest

from finitepulse import analysis as an
from finitepulse.errors import InsufficientData, MissingColumn, NonConvergence, ParseError, SingularJacobian
from finitepulse.fitting import (FitConfig, FitModel, FitMethod, apply_correction, covariance, fit, ingest_csv,
                                 metrics)
from finitepulse.shapes import calibrate_area, make_shape

SINE_PI = calibrate_area(make_shape("sine", 1, 1), math.pi)
D = np.linspace(-30, 30, 121)


def synthetic(eps1, eps2, offset, shape=SINE_PI, method="integrated", d=D):
    return np.column_stack([d, apply_correction(an.probabilities(shape, d - offset, method), eps1, eps2)])


def test_apply_correction_examples():
    p = np.linspace(0, 1, 7)
    assert np.allclose(apply_correction(p, 0.5, 0.5), p)
    assert apply_correction(0.5, 0.13, 0.77) == pytest.approx(0.13)
    assert apply_correction(1.0, 0.05, 0.45) == pytest.approx(0.50)
    assert apply_correction(1.0, 0.9, 0.5, clamp=True) == 1.0


def test_noiseless_roundtrip_out_of_range_truth():
    # (0.05, 0.45) maps P = 0 to -0.4, outside the penalised range, so the penalty is off
    res = fit(synthetic(0.05, 0.45, 0.0), "integrated", FitConfig(enforce_range=False), shape=SINE_PI)
    m = res.model
    assert abs(m.eps1 - 0.05) < 1e-6 and abs(m.eps2 - 0.45) < 1e-6 and abs(m.resonance_offset) < 1e-6
    assert res.mae < 1e-8
    assert len(res.residuals) == D.size


def test_noiseless_roundtrip_in_range():
    res = fit(synthetic(0.48, 0.46, 0.2), "integrated", shape=SINE_PI)
    assert abs(res.model.eps1 - 0.48) < 1e-6 and abs(res.model.resonance_offset - 0.2) < 1e-6
    assert res.sdrf is not None and res.sdrf >= 0


def test_insufficient_data():
    with pytest.raises(InsufficientData):
        fit(synthetic(0.5, 0.5, 0.0, d=np.array([-1.0, 0.0, 1.0])), "split", shape=SINE_PI)


def test_metrics_examples():
    assert metrics(np.zeros(5))[0] == 0
    assert metrics([0.01, -0.03])[0] == pytest.approx(0.02)
    assert metrics([0.01, -0.03])[1] is None


def test_covariance_is_scale_invariant():
    rng = np.random.default_rng(1)
    j = rng.normal(size=(50, 3))
    r = rng.normal(size=50)
    c1 = covariance(r, j)
    c2 = covariance(r, j * np.array([1.0, 1e-8, 1e6]))
    assert np.allclose(np.diag(c2) * np.array([1.0, 1e-16, 1e12]), np.diag(c1), rtol=1e-8)
    with pytest.raises(SingularJacobian):
        covariance(r, np.column_stack([j[:, 0], j[:, 0], j[:, 1]]))


def test_sdrf_matches_spread_of_refits():
    clean = synthetic(0.48, 0.46, 0.2)[:, 1]
    rng = np.random.default_rng(0)
    offsets, sdrfs = [], []
    for _ in range(100):
        res = fit(np.column_stack([D, clean + rng.normal(0, 0.01, D.size)]), "integrated", shape=SINE_PI)
        offsets.append(res.model.resonance_offset)
        sdrfs.append(res.sdrf)
    ratio = np.mean(sdrfs) / np.std(offsets, ddof=1)
    assert 1 / 1.5 < ratio < 1.5


def test_fit_beats_null_model_and_is_deterministic():
    rng = np.random.default_rng(3)
    data = synthetic(0.47, 0.45, -0.3)
    data[:, 1] += rng.normal(0, 0.02, D.size)
    a = fit(data, "integrated", FitConfig(seed=7), shape=SINE_PI)
    b = fit(data, "integrated", FitConfig(seed=7), shape=SINE_PI)
    assert a.mae <= np.mean(np.abs(data[:, 1] - data[:, 1].mean()))
    assert a.to_json() == b.to_json()


def test_split_fit_recovers_lambda_region():
    data = synthetic(0.5, 0.5, 0.0, method="split", d=np.linspace(-30, 30, 61))
    res = fit(data, "split", FitConfig(method=FitMethod.SPLIT), shape=SINE_PI)
    assert res.mae < 1e-3
    assert 0 < res.model.lam <= 0.5
    assert "lambda" in " ".join(res.parameter_names)


def test_fixed_lambda_split_fit():
    data = synthetic(0.5, 0.5, 0.0, method="split", d=np.linspace(-20, 20, 41))
    res = fit(data, "split", FitConfig(method=FitMethod.SPLIT, fit_lambda=False, lam=0.25), shape=SINE_PI)
    assert res.model.lam == 0.25 and res.mae < 1e-6


def test_free_omega_scale():
    data = synthetic(0.5, 0.5, 0.0, shape=SINE_PI.with_omega0(SINE_PI.omega0 * 1.1))
    res = fit(data, "integrated", FitConfig(free_omega_scale=True), shape=SINE_PI)
    assert abs(res.model.omega_scale - 1.1) < 1e-4


def test_non_convergence_carries_best():
    with pytest.raises(NonConvergence) as info:
        fit(synthetic(0.48, 0.46, 0.2), "integrated", FitConfig(max_evals=5, restarts=1), shape=SINE_PI)
    assert info.value.best is not None and not info.value.best.converged


def test_fit_model_validation():
    with pytest.raises(ValueError):
        FitModel(FitMethod.SPLIT, 0.5, 0.5, 0.0, SINE_PI, lam=None)


def test_result_json_fields():
    res = fit(synthetic(0.5, 0.5, 0.0), "integrated", shape=SINE_PI)
    d = json.loads(res.to_json())
    assert d["schema_version"] == an.SCHEMA_VERSION
    assert {"mae", "sdrf_rad_per_s", "model", "residuals"} <= set(d)


def test_ingest_units_and_sorting(tmp_path):
    p = tmp_path / "d.csv"
    p.write_text("detuning_mhz,probability\n1.0,0.2\n-1.0,0.3\n1.0,0.4\n")
    data = ingest_csv(p, "mhz")
    assert data[0, 0] == pytest.approx(-2 * math.pi * 1e6)
    assert data[1, 0] == pytest.approx(2 * math.pi * 1e6)
    assert list(data[1:, 1]) == [0.2, 0.4]  # stable on ties
    assert ingest_csv(p, "hz")[1, 0] == pytest.approx(2 * math.pi)


def test_ingest_errors(tmp_path):
    p = tmp_path / "bad.csv"
    p.write_text("detuning_rad_per_s,other\n1,2\n")
    with pytest.raises(MissingColumn):
        ingest_csv(p)
    q = tmp_path / "bad2.csv"
    q.write_text("detuning_rad_per_s,probability\n1,0.2\nx,0.3\n")
    with pytest.raises(ParseError) as info:
        ingest_csv(q)
    assert info.value.line == 3
    with pytest.raises(ValueError):
        ingest_csv(q, "ghz")


def test_ingest_picks_named_column(tmp_path):
    p = tmp_path / "multi.csv"
    an.write_columns(p, [0.0, 1.0], {"probability_exact": [0.9, 0.5], "probability_integrated": [0.8, 0.4]})
    assert list(ingest_csv(p)[:, 1]) == [0.9, 0.5]
    assert list(ingest_csv(p, column="probability_integrated")[:, 1]) == [0.8, 0.4]
