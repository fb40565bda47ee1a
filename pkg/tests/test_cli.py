import json
import math
import xml.etree.ElementTree as ET

import numpy as np
import pytest

from finitepulse import cli, validation
from finitepulse.fitting import ingest_csv


def run(args, tmp_path):
    return cli.main([*args, "--outdir", str(tmp_path), "--quiet"])


def test_parsers():
    assert cli.parse_duration("42.67ns") == pytest.approx(42.67e-9)
    assert cli.parse_duration("1e-8") == pytest.approx(1e-8)
    assert cli.parse_duration("3 us") == pytest.approx(3e-6)
    assert cli.parse_area("pi") == pytest.approx(math.pi)
    assert cli.parse_area("3pi") == pytest.approx(3 * math.pi)
    assert cli.parse_area("3*pi/2") == pytest.approx(1.5 * math.pi)
    assert cli.parse_area("pi/2") == pytest.approx(0.5 * math.pi)
    assert cli.parse_area("1.25") == pytest.approx(1.25)
    assert np.allclose(cli.parse_grid("-30:30:5"), [-30, -15, 0, 15, 30])
    for bad in ("fast", "3 parsecs"):
        with pytest.raises(cli.UsageError):
            cli.parse_duration(bad)
    for bad in ("2pix", "", "/2"):
        with pytest.raises(cli.UsageError):
            cli.parse_area(bad)
    for bad in ("1:2", "2:1:5", "a:b:c"):
        with pytest.raises(cli.UsageError):
            cli.parse_grid(bad)


def test_profile_multi_method_roundtrip_into_fit(tmp_path):
    rc = run(["profile", "--shape", "sine", "--area", "pi", "--duration", "42.67ns", "--grid", "-30:30:501",
              "--method", "exact,integrated", "--plot"], tmp_path)
    assert rc == 0
    lines = (tmp_path / "profile.csv").read_text().splitlines()
    assert len(lines) == 502
    assert lines[0].split(",") == ["detuning_rad_per_s", "probability_exact", "probability_integrated"]
    meta = json.loads((tmp_path / "profile.json").read_text())
    assert meta["schema_version"] == 1 and set(meta["methods"]) == {"exact", "integrated"}
    ET.parse(tmp_path / "profile.svg")

    rc = run(["fit", "--input", str(tmp_path / "profile.csv"), "--units", "rad_per_s", "--duration", "42.67ns",
              "--method", "integrated", "--column", "probability_integrated"], tmp_path)
    assert rc == 0
    res = json.loads((tmp_path / "fit.json").read_text())
    assert res["mae"] < 1e-8 and res["sdrf_rad_per_s"] is not None
    assert res["schema_version"] == 1


def test_fit_mhz_input(tmp_path):
    d = np.linspace(-150, 150, 61)  # MHz around a 42.67 ns pulse
    T = 42.67e-9
    from finitepulse import analysis as an
    from finitepulse.shapes import calibrate_area, make_shape

    sh = calibrate_area(make_shape("sine", T, T), math.pi)
    p = an.probabilities(sh, d * 2 * math.pi * 1e6, "integrated")
    data = tmp_path / "data.csv"
    data.write_text("detuning_mhz,probability\n" + "\n".join(f"{a},{b}" for a, b in zip(d, p)))
    assert run(["fit", "--input", str(data), "--units", "mhz", "--duration", "42.67ns"], tmp_path) == 0
    res = json.loads((tmp_path / "fit.json").read_text())
    assert "mae" in res and "sdrf_rad_per_s" in res


def test_output_dir_from_environment(tmp_path, monkeypatch):
    monkeypatch.setenv(cli.OUTPUT_ENV, str(tmp_path / "env"))
    assert cli.main(["profile", "--grid", "-5:5:11", "--method", "integrated", "--quiet"]) == 0
    assert (tmp_path / "env" / "profile.csv").exists()


def test_landscape_rabi_analyze_shapes(tmp_path, capsys):
    assert run(["landscape", "--omega0-grid", "2:20:4", "--grid", "-10:10:11", "--plot"], tmp_path) == 0
    assert (tmp_path / "landscape.csv").read_text().count("\n") == 1 + 4 * 11
    ET.parse(tmp_path / "landscape.svg")
    assert run(["rabi", "--omega0-grid", "0:20:11", "--detunings", "0,5", "--plot"], tmp_path) == 0
    head = (tmp_path / "rabi.csv").read_text().splitlines()[0]
    assert head == "omega0_rad_per_s,area_rad,probability_dt_0,probability_dt_5"
    assert run(["analyze", "--shape", "rectangular", "--method", "closed_form", "--grid", "0:300:1501",
                "--refine", "1"], tmp_path) == 0
    out = json.loads((tmp_path / "analysis.json").read_text())
    assert abs(out["satellites"][0]["detuning_rad_per_s"] - 8.42) < 0.02
    assert abs(out["wing_exponent"] + 2) < 0.1
    assert run(["shapes", "sample", "--shape", "gaussian", "--tau", "0.3", "--plot"], tmp_path) == 0
    assert (tmp_path / "shape_gaussian.csv").exists()
    assert cli.main(["shapes", "list"]) == 0
    assert "lorentzian2" in capsys.readouterr().out


def test_usage_errors_exit_one(tmp_path, capsys):
    with pytest.raises(SystemExit) as info:
        cli.main(["profile", "--method"])
    assert info.value.code == 1
    assert "usage" in capsys.readouterr().err
    with pytest.raises(SystemExit) as info:
        cli.main([])
    assert info.value.code == 1
    assert run(["profile", "--omega0", "10"], tmp_path) == 1
    assert run(["profile", "--area", "2pix"], tmp_path) == 1
    assert run(["profile", "--method", "magic"], tmp_path) == 1


def test_numeric_errors_exit_one(tmp_path, capsys):
    missing = tmp_path / "nope.csv"
    missing.write_text("detuning_rad_per_s,other\n1,2\n")
    assert run(["fit", "--input", str(missing), "--units", "rad_per_s"], tmp_path) == 1
    assert "MissingColumn" in capsys.readouterr().err


def test_validate_exit_codes(tmp_path, monkeypatch):
    ok = [validation.CriterionResult(1, "stub", True)]
    monkeypatch.setattr(validation, "run_all", lambda seed=0, echo=None: ok)
    assert run(["validate"], tmp_path) == 0
    bad = [validation.CriterionResult(1, "stub", False)]
    monkeypatch.setattr(validation, "run_all", lambda seed=0, echo=None: bad)
    assert run(["validate", "--seed", "3"], tmp_path) == 2
    report = json.loads((tmp_path / "validation.json").read_text())
    assert report["seed"] == 3 and report["passed"] is False


def test_profile_csv_ingests_unchanged(tmp_path):
    assert run(["profile", "--grid", "-10:10:21", "--method", "closed_form", "--shape", "rectangular"], tmp_path) == 0
    data = ingest_csv(tmp_path / "profile.csv", "rad_per_s")
    assert data.shape == (21, 2) and abs(data[10, 1] - 1) < 1e-12
