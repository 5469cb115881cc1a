import csv
import json
import subprocess
import sys

import numpy as np
import pytest

from awp_lab import scenario
from awp_lab.cli import EXIT_OK, EXIT_RUNTIME, EXIT_VALIDATION, main
from awp_lab.scenario import bundled_scenarios

BUNDLED = sorted(bundled_scenarios())

BAD = """name = "bad"
protocol = "raw"

[grid]
n = 32
dx = -1e-6

[crystal]
type = "degenerate_type1"
L = -1e-3
n_o = 1.6551
lambda_p = 405e-9
"""


def _manifest(d):
    return json.loads((d / "manifest.json").read_text())


def _units_everywhere(obj):
    """Every numeric leaf sits in a {"value", "unit"} pair."""
    if isinstance(obj, dict):
        if set(obj) == {"value", "unit"}:
            return isinstance(obj["unit"], str)
        return all(_units_everywhere(v) for v in obj.values())
    if isinstance(obj, list):
        return all(_units_everywhere(v) for v in obj)
    return not isinstance(obj, (int, float)) or isinstance(obj, bool)


def test_list_scenarios(capsys):
    assert main(["list-scenarios"]) == EXIT_OK
    out = capsys.readouterr().out
    for name in ("ssi-kernel", "hom-dip", "thin-mirror", "beamlike-kernel", "qiup-single-mode"):
        assert name in out


@pytest.mark.parametrize("name", BUNDLED)
def test_every_bundled_scenario_runs_with_units(name, tmp_path):
    assert main(["run", name, "--output-dir", str(tmp_path)]) == EXIT_OK
    m = _manifest(tmp_path)
    assert m["name"] == name
    assert m["metrics"]
    assert _units_everywhere(m)
    for f in m["files"]:
        assert (tmp_path / f).exists()
    assert not list(tmp_path.glob("*.tmp"))


def test_ssi_kernel_width(tmp_path):
    assert main(["run", "ssi-kernel", "--output-dir", str(tmp_path)]) == EXIT_OK
    m = _manifest(tmp_path)["metrics"]
    L, lam, n_o = 1e-3, 810e-9, 1.6551
    ref = 0.770 * np.sqrt(L * lam / n_o)
    assert m["psf_fwhm"]["unit"] == "m"
    assert abs(m["psf_fwhm"]["value"] / ref - 1) <= 0.01


def test_hom_dip_csv(tmp_path):
    assert main(["run", "hom-dip", "--output-dir", str(tmp_path)]) == EXIT_OK
    with open(tmp_path / "hom_scan.csv", newline="") as fh:
        rows = list(csv.reader(fh))
    assert rows[0] == ["d_m", "P"]
    data = np.array(rows[1:], dtype=float)
    zero = data[data[:, 0] == 0.0]
    assert len(zero) == 1 and zero[0, 1] < 1e-9
    assert np.all((data[:, 1] >= 0) & (data[:, 1] <= 0.5 + 1e-12))


def test_negative_length_lists_every_violation(tmp_path, capsys):
    cfg = tmp_path / "bad.toml"
    cfg.write_text(BAD)
    assert main(["run", str(cfg), "--output-dir", str(tmp_path / "out")]) == EXIT_VALIDATION
    err = capsys.readouterr().err
    assert "crystal.L must be > 0" in err
    assert "grid.dx must be > 0" in err
    assert not (tmp_path / "out" / "manifest.json").exists()


def test_parse_error_names_the_line(tmp_path, capsys):
    cfg = tmp_path / "broken.toml"
    cfg.write_text('name = "x"\nprotocol = = "raw"\n')
    assert main(["run", str(cfg)]) == EXIT_VALIDATION
    assert "line 2" in capsys.readouterr().err


def test_two_protocol_selectors_rejected(tmp_path, capsys):
    cfg = tmp_path / "two.toml"
    cfg.write_text('name = "two"\nprotocol = "hom"\n[hom]\ns = 3e-5\n[gi]\nM = 1.0\n')
    assert main(["run", str(cfg)]) == EXIT_VALIDATION
    assert "exactly one protocol selector" in capsys.readouterr().err


@pytest.mark.parametrize("argv", [
    ["frobnicate"],
    ["run"],
    ["run", "no-such-scenario"],
    ["run", "ssi-kernel", "--threads", "0"],
    ["run", "ssi-kernel", "--grid-override", "n=abc"],
    ["run", "ssi-kernel", "--grid-override", "depth=3"],
    ["run", "hom-dip", "--grid-override", "n=64"],
    ["dump-field-info", "/nonexistent.awpf"],
])
def test_validation_exit_code(argv, tmp_path):
    assert main(argv + (["--output-dir", str(tmp_path)] if argv[0] == "run" and len(argv) > 1 else [])) \
        == EXIT_VALIDATION


def test_bad_thread_env(monkeypatch, tmp_path):
    monkeypatch.setenv("AWP_LAB_THREADS", "abc")
    assert main(["run", "hom-dip", "--output-dir", str(tmp_path)]) == EXIT_VALIDATION


def test_grid_override_reaches_manifest(tmp_path):
    assert main(["run", "ssi-kernel", "--grid-override", "n=64,dx=2e-6", "--output-dir", str(tmp_path)]) == EXIT_OK
    g = _manifest(tmp_path)["grid"]
    assert g["nx"]["value"] == 64 and g["dx"]["value"] == 2e-6


def test_runs_are_bit_identical(tmp_path):
    a, b = tmp_path / "a", tmp_path / "b"
    for d in (a, b):
        assert main(["run", "ssi-kernel", "--emit-plots-data", "--output-dir", str(d)]) == EXIT_OK
    names = sorted(p.name for p in a.iterdir())
    assert names == sorted(p.name for p in b.iterdir())
    assert "cross_section_x.csv" in names
    for n in names:
        assert (a / n).read_bytes() == (b / n).read_bytes(), n


def test_dump_field_info(tmp_path, capsys):
    assert main(["run", "ssi-kernel", "--output-dir", str(tmp_path)]) == EXIT_OK
    capsys.readouterr()
    assert main(["dump-field-info", str(tmp_path / "conditional.awpf")]) == EXIT_OK
    info = json.loads(capsys.readouterr().out)
    m = _manifest(tmp_path)["metrics"]
    assert info["nx"]["value"] == 128 and info["dx"]["value"] == 1e-6
    assert info["lambda_vac"]["value"] == pytest.approx(810e-9, rel=1e-12)
    assert info["norm2"]["value"] == pytest.approx(m["total_intensity"]["value"], rel=1e-12)


# oracle comparison -----------------------------------------------------------------------


def _report(d):
    return json.loads((d / "oracle_report.json").read_text())


def test_oracle_degenerate_passes(tmp_path):
    assert main(["oracle-compare", "ssi-kernel", "--output-dir", str(tmp_path)]) == EXIT_OK
    r = _report(tmp_path)
    assert r["passed"] and not r["trivial"]
    assert r["relative_l2"]["value"] <= 0.02


def test_oracle_beamlike_tilt(tmp_path):
    assert main(["oracle-compare", "beamlike-kernel", "--output-dir", str(tmp_path)]) == EXIT_OK
    r = _report(tmp_path)
    assert r["tilt_relative_error"]["value"] <= 0.01
    assert r["tilt_slope_kernel"]["value"] != 0.0
    assert r["relative_l2"]["value"] <= 0.02


def test_oracle_thin_is_trivial(tmp_path):
    assert main(["oracle-compare", "thin-mirror", "--output-dir", str(tmp_path)]) == EXIT_OK
    r = _report(tmp_path)
    assert r["passed"] and r["trivial"]


def test_oracle_rejects_oversize_grid(tmp_path, capsys):
    argv = ["oracle-compare", "ssi-kernel", "--grid-override", "n=256", "--output-dir", str(tmp_path)]
    assert main(argv) == EXIT_VALIDATION
    assert "128x128" in capsys.readouterr().err


def test_oracle_rejects_other_protocols(tmp_path):
    assert main(["oracle-compare", "hom-dip", "--output-dir", str(tmp_path)]) == EXIT_VALIDATION


def test_failed_comparison_is_a_runtime_failure(tmp_path, monkeypatch):
    monkeypatch.setattr(scenario, "L2_TOL", 0.0)
    assert main(["oracle-compare", "ssi-kernel", "--output-dir", str(tmp_path)]) == EXIT_RUNTIME
    assert _report(tmp_path)["passed"] is False


def test_console_script_entry_point(tmp_path):
    out = subprocess.run([sys.executable, "-m", "awp_lab.cli", "run", "hom-dip", "--output-dir", str(tmp_path)],
                         capture_output=True, text=True)
    assert out.returncode == 0, out.stderr
    assert "P_at_zero" in out.stdout
    bad = tmp_path / "bad.toml"
    bad.write_text(BAD)
    out = subprocess.run([sys.executable, "-m", "awp_lab.cli", "run", str(bad)], capture_output=True, text=True)
    assert out.returncode == 2 and "crystal.L" in out.stderr
