import json
import math
from types import SimpleNamespace

import pytest

from kamforge.certificate import ANCHORS, Certificate, check_initial, check_step


def test_golden_initial_passes():
    cert = check_initial(1.01, 0.5, 0.6, 1.0, 1e-4)
    assert cert.overall
    assert cert.first_failure is None
    assert [c.name for c in cert.checks] == ["twist_small_divisor", "strip_width", "shift_solubility"]


@pytest.mark.parametrize(
    "kwargs,name",
    [
        ({"J": 2.5}, "twist_small_divisor"),
        ({"kappa0": 0.8}, "strip_width"),
        ({"eps0": 0.05}, "shift_solubility"),
        ({"J": 0.0}, "shift_solubility"),
    ],
)
def test_initial_failures(kwargs, name):
    args = dict(C0=1.01, rho0=0.5, kappa0=0.6, J=1.0, eps0=1e-4) | kwargs
    cert = check_initial(**args)
    assert not cert.overall
    assert cert.first_failure.name == name


def test_gates_are_strict():
    # exp(kappa) = 2 exactly sits on the boundary and fails
    assert not check_initial(1.0, 0.5, math.log(2.0), 1.0, 1e-4)["strip_width"].passed
    assert not check_initial(1.0, 1.0, 0.5, 1.0, 1e-4)["twist_small_divisor"].passed
    assert not check_initial(1.0, 0.5, 0.5, 1.0, 0.5 / 16)["shift_solubility"].passed


def test_action_independent_shift_skips_theta():
    cert = check_initial(1.0, 0.5, 0.5, 0.0, 1e-4, action_independent=True)
    assert cert["shift_solubility"].lhs == 0.0
    assert cert.overall


def test_mixed_gate_optional():
    cert = check_initial(1.0, 0.5, 0.5, 1.0, 1e-4, phi_mixed_norm=1.5)
    assert cert.first_failure.name == "generating_mixed_initial"


def _report(mixed=0.01, delta=1e-4, xi=1e-4, margin=0.9):
    return SimpleNamespace(phi_norms=(0, 0, mixed, 0), delta_norm=delta, xi_norm=xi, injectivity_margin=margin)


STATE = SimpleNamespace(delta_n=0.006, rho_n=0.5)


@pytest.mark.parametrize(
    "report,name",
    [
        (_report(mixed=1.0), "mixed_derivative"),
        (_report(delta=0.006), "angle_correction"),
        (_report(xi=0.125), "action_correction"),
        (_report(margin=0.49), "injectivity"),
    ],
)
def test_step_failures(report, name):
    cert = check_step(report, STATE)
    assert cert.first_failure.name == name


def test_step_pass_and_margin_boundary():
    assert check_step(_report(margin=0.5), STATE).overall


def test_json_roundtrip_and_anchors():
    cert = check_initial(1.0, 0.5, 0.5, 0.0, 1e-4)
    data = json.loads(cert.to_json())
    assert data["overall"] is False
    assert data["stage"] == "initial"
    theta = next(c for c in data["checks"] if c["name"] == "shift_solubility")
    assert theta["lhs"] == "inf"
    for c in data["checks"]:
        assert c["anchor"] == ANCHORS[c["name"]]
        assert set(c) == {"name", "lhs", "rhs", "pass", "anchor"}


def test_unknown_check_name():
    with pytest.raises(KeyError):
        Certificate().add("nope", 0, 1, True)
    with pytest.raises(KeyError):
        Certificate()["nope"]
