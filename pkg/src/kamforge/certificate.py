"""Applicability conditions checked with measured norms."""
from __future__ import annotations

import json
import math
from dataclasses import dataclass, field

THETA_LIMIT = 1.0 / 16.0
STRIP_LIMIT = 2.0

# condition name -> anchor label naming the inequality it encodes
ANCHORS = {
    "twist_small_divisor": "initial gate: C0 rho0 J < 1",
    "strip_width": "initial gate: exp(kappa0) < 2",
    "shift_solubility": "initial gate: theta0 = eps0 / (rho0 J) < 1/16",
    "generating_mixed_initial": "solubility gate: |d2_A'alpha Phi_0| < 1",
    "mixed_derivative": "solubility gate: |d2_A'alpha Phi_n| < 1",
    "angle_correction": "map bound: |Delta| < delta_n",
    "action_correction": "map bound: rho_n/2 + |Xi| < 3 rho_n/4",
    "injectivity": "injectivity bracket >= 1/2",
}


@dataclass
class Check:
    name: str
    lhs: float
    rhs: float
    passed: bool
    anchor: str

    def to_dict(self):
        return {"name": self.name, "lhs": _num(self.lhs), "rhs": _num(self.rhs),
                "pass": bool(self.passed), "anchor": self.anchor}


def _num(x):
    x = float(x)
    return x if math.isfinite(x) else str(x)


@dataclass
class Certificate:
    checks: list = field(default_factory=list)
    stage: str = ""

    @property
    def overall(self):
        return all(c.passed for c in self.checks)

    @property
    def first_failure(self):
        return next((c for c in self.checks if not c.passed), None)

    def add(self, name, lhs, rhs, passed):
        self.checks.append(Check(name, float(lhs), float(rhs), bool(passed), ANCHORS[name]))

    def __getitem__(self, name):
        for c in self.checks:
            if c.name == name:
                return c
        raise KeyError(name)

    def to_dict(self):
        out = {"checks": [c.to_dict() for c in self.checks], "overall": self.overall}
        if self.stage:
            out["stage"] = self.stage
        return out

    def to_json(self):
        return json.dumps(self.to_dict(), sort_keys=True)


def check_initial(C0, rho0, kappa0, J, eps0, phi_mixed_norm=None, action_independent=False):
    """Twist, strip and shift gates, plus the ``Phi_0`` mixed-derivative gate when its norm is supplied.

    With ``action_independent`` the shift equation is trivial (the angle
    average has no gradient) and ``theta0`` is recorded as 0.
    """
    cert = Certificate(stage="initial")
    cert.add("twist_small_divisor", C0 * rho0 * J, 1.0, C0 * rho0 * J < 1.0)
    cert.add("strip_width", math.exp(kappa0), STRIP_LIMIT, math.exp(kappa0) < STRIP_LIMIT)
    if action_independent or eps0 == 0:
        theta = 0.0
    elif J > 0 and rho0 > 0:
        theta = eps0 / (rho0 * J)
    else:
        theta = math.inf
    cert.add("shift_solubility", theta, THETA_LIMIT, theta < THETA_LIMIT)
    if phi_mixed_norm is not None:
        cert.add("generating_mixed_initial", phi_mixed_norm, 1.0, phi_mixed_norm < 1.0)
    return cert


def check_step(report, state):
    """Gates checked inside every step.

    ``report`` is anything carrying ``phi_norms``, ``delta_norm``,
    ``xi_norm`` and ``injectivity_margin``; ``state`` supplies ``delta_n``
    and ``rho_n``.
    """
    cert = Certificate(stage="step")
    mixed = report.phi_norms[2]
    cert.add("mixed_derivative", mixed, 1.0, mixed < 1.0)
    cert.add("angle_correction", report.delta_norm, state.delta_n, report.delta_norm < state.delta_n)
    quarter = 0.25 * state.rho_n
    cert.add("action_correction", report.xi_norm, quarter, report.xi_norm < quarter)
    cert.add("injectivity", report.injectivity_margin, 0.5, report.injectivity_margin >= 0.5)
    return cert
