import json
import subprocess
import sys
from pathlib import Path

import pytest

from kamforge import cli
from kamforge.config import format_config, parse_config, parse_config_text
from kamforge.errors import ConfigError

ROOT = Path(__file__).resolve().parents[1]
GOLDEN = ROOT / "configs" / "golden_mean.ini"

SMALL = """\
[run]
ell = 2
omega = 1.0, 1.618033988749895
J = 1.0
rho0 = 0.5
kappa0 = 0.6
fourier_cutoff = 10
taylor_degree = 3
eps_scale = 1e-4
max_steps = 3
diophantine_cutoff = 20

[verify]
t_final = 2.0
samples = 2
oracle = false

[mode.a]
nu = 1, 0
terms = 0 0 0.5 0.0
"""


def write(tmp_path, text, name="run.ini"):
    p = tmp_path / name
    p.write_text(text)
    return p


# --- config ---------------------------------------------------------------------


def test_golden_config_parses():
    cfg = parse_config(GOLDEN)
    assert cfg.ell == 2 and cfg.fourier_cutoff == 12
    f = cfg.perturbation_series()
    assert f.coefficient((1, 0), (0, 0)) == pytest.approx(0.5e-4)
    assert f.coefficient((-1, 1), (0, 0)) == pytest.approx(0.5e-4)
    assert f.is_real_symmetric()


def test_format_roundtrip():
    cfg = parse_config(GOLDEN)
    again = parse_config_text(format_config(cfg))
    assert again == cfg


def test_conjugate_partner_filled_in():
    cfg = parse_config_text(SMALL.replace("0 0 0.5 0.0", "0 0 0.5 0.25"))
    f = cfg.perturbation_series()
    assert f.coefficient((-1, 0), (0, 0)) == pytest.approx(1e-4 * (0.5 - 0.25j))


def test_nonconjugate_partner_rejected():
    text = SMALL + "\n[mode.b]\nnu = -1, 0\nterms = 0 0 0.4 0.0\n"
    with pytest.raises(ConfigError) as info:
        parse_config_text(text)
    assert info.value.field == "perturbation"


def test_nonzero_mean_rejected_with_line():
    text = SMALL + "\n[mode.mean]\nnu = 0, 0\nterms = 0 0 1.0 0.0\n"
    with pytest.raises(ConfigError) as info:
        parse_config_text(text)
    assert info.value.field == "perturbation"
    assert text.splitlines()[info.value.line - 1].startswith("terms")


def test_fourier_cutoff_above_diophantine_cutoff():
    with pytest.raises(ConfigError) as info:
        parse_config_text(SMALL.replace("diophantine_cutoff = 20", "diophantine_cutoff = 5"))
    assert info.value.field == "diophantine_cutoff"
    assert info.value.line == 11


@pytest.mark.parametrize(
    "old,new,field,line",
    [
        ("kappa0 = 0.6", "kappa0 = -1", "kappa0", 6),
        ("J = 1.0", "J = x", "j", 4),
        ("samples = 2", "sample = 2", "sample", 15),
        ("nu = 1, 0", "nu = 1, 0, 0", "perturbation", 19),
        ("terms = 0 0 0.5 0.0", "terms = 0 9 0.5 0.0", "perturbation", 20),
    ],
)
def test_config_errors_carry_field_and_line(old, new, field, line):
    with pytest.raises(ConfigError) as info:
        parse_config_text(SMALL.replace(old, new))
    assert info.value.field == field
    assert info.value.line == line


def test_malformed_ini_line():
    with pytest.raises(ConfigError) as info:
        parse_config_text("[run]\nell = 2\nnot a pair\n")
    assert info.value.line == 3


def test_unknown_section():
    with pytest.raises(ConfigError) as info:
        parse_config_text(SMALL + "\n[extra]\nx = 1\n")
    assert info.value.field == "extra"


# --- commands -------------------------------------------------------------------


def test_certify_golden(capsys):
    assert cli.main(["certify", "--config", str(GOLDEN)]) == 0
    data = json.loads(capsys.readouterr().out)
    assert data["overall"] is True
    assert {c["name"] for c in data["checks"]} >= {"twist_small_divisor", "strip_width", "shift_solubility"}


def test_config_error_exit_code(tmp_path, capsys):
    p = write(tmp_path, SMALL.replace("diophantine_cutoff = 20", "diophantine_cutoff = 5"))
    assert cli.main(["certify", "--config", str(p)]) == 1
    err = capsys.readouterr().err
    assert "diophantine_cutoff" in err and "line 11" in err


def test_resonant_frequency_exit_code(tmp_path, capsys):
    p = write(tmp_path, SMALL.replace("1.0, 1.618033988749895", "1.0, 1.0"))
    assert cli.main(["certify", "--config", str(p)]) == 2
    assert "resonant" in capsys.readouterr().err


def test_run_not_applicable_writes_report(tmp_path, capsys):
    p = write(tmp_path, SMALL.replace("J = 1.0", "J = 2.5"))
    out = tmp_path / "out"
    assert cli.main(["run", "--config", str(p), "--out", str(out)]) == 2
    rep = json.loads((out / "report.json").read_text())
    assert rep["stop_reason"] == "NotApplicable"
    assert rep["certificate"]["overall"] is False


def test_run_then_verify(tmp_path, capsys):
    p = write(tmp_path, SMALL)
    out = tmp_path / "out"
    assert cli.main(["run", "--config", str(p), "--out", str(out)]) == 0
    summary = json.loads(capsys.readouterr().out.strip().splitlines()[-1])
    assert summary["stop_reason"] == "MaxSteps" and summary["steps"] == 3
    rep = json.loads((out / "report.json").read_text())
    assert rep["format_version"] == cli.FORMAT_VERSION
    assert len(rep["step_reports"]) == 3
    assert "oracle" not in rep["verification"]
    assert (out / "trace.csv").read_text().startswith("n,rho_n")
    for name in ("Xi_1.txt", "Xi_2.txt", "Delta_1.txt", "Delta_2.txt", "embedding.json"):
        assert (out / "torus" / name).exists()

    assert cli.main(["verify", "--config", str(p), "--out", str(out), "--flow"]) == 0
    ver = json.loads(capsys.readouterr().out)["verification"]
    assert ver["defect"]["sup_defect"] < 1e-8
    assert ver["flow_distance"] < 1e-8


def test_embedding_roundtrip(tmp_path):
    from kamforge.driver import TorusEmbedding

    emb = TorusEmbedding.zero(2, 4, [1.0, 2.0])
    cli.dump_embedding(emb, tmp_path)
    back = cli.load_embedding(tmp_path)
    assert back.N == 4 and list(back.omega) == [1.0, 2.0]


def test_verify_zero_embedding_unperturbed(tmp_path, capsys):
    from kamforge.driver import TorusEmbedding

    text = SMALL.replace("eps_scale = 1e-4", "eps_scale = 0.0")
    p = write(tmp_path, text)
    cli.dump_embedding(TorusEmbedding.zero(2, 10, [1.0, 1.618033988749895]), tmp_path / "zero")
    assert cli.main(["verify", "--config", str(p), "--torus", str(tmp_path / "zero")]) == 0
    ver = json.loads(capsys.readouterr().out)["verification"]
    assert ver["defect"]["sup_defect"] == 0.0


def test_oracle_command(tmp_path, capsys):
    text = SMALL.replace("samples = 2", "samples = 2\noracle_cutoff = 4")
    p = write(tmp_path, text)
    assert cli.main(["oracle", "--config", str(p), "--out", str(tmp_path)]) == 0
    data = json.loads(capsys.readouterr().out)
    assert data["residual"] < 1e-12
    assert (tmp_path / "oracle" / "embedding.json").exists()


def test_missing_config_file(tmp_path, capsys):
    assert cli.main(["certify", "--config", str(tmp_path / "nope.ini")]) == 1


def test_module_entry_point():
    res = subprocess.run([sys.executable, "-m", "kamforge.cli", "--help"], capture_output=True, text=True)
    assert res.returncode == 0
    assert "certify" in res.stdout
