"""Iteration of the renormalization step, map composition and convergence tests."""
from __future__ import annotations

import csv
import enum
import io
import math
from dataclasses import dataclass, field

import numpy as np

from . import series as S
from .certificate import check_initial, check_step
from .errors import DomainCollapsed, KamError, NotApplicable, NotEnoughData
from .series import FourierTaylorSeries, PolydiskDomain
from .step import (
    Hamiltonian,
    Tolerances,
    build_generating,
    kolmogorov_step,
    solve_shift,
    step_diagnostics,
)

SCHEDULE_OFFSET = 10
TRACE_HEADER = (
    "n", "rho_n", "kappa_n", "delta_n", "eps_n", "eta_n", "theta_n",
    "eps_term1", "eps_term2", "eps_term3", "cancel_residual",
)


def schedule(n, kappa0):
    """``(delta_n, kappa_{n+1})``: the strip loss at step ``n`` and the width left after it.

    ``delta_n = kappa0 / (n + 10)**2`` and
    ``kappa_{n+1} = kappa0 (1 - 4 sum_{m<=n} (m + 10)**-2)``.
    """
    if n < 0:
        raise ValueError("n must be nonnegative")
    delta = kappa0 / (n + SCHEDULE_OFFSET) ** 2
    loss = math.fsum(1.0 / (m + SCHEDULE_OFFSET) ** 2 for m in range(n + 1))
    return delta, kappa0 * (1.0 - 4.0 * loss)


def kappa_limit(kappa0):
    """Limit width ``kappa0 (1 - 4 (pi^2/6 - sum_{m<10} m^-2))``."""
    head = math.fsum(1.0 / m**2 for m in range(1, SCHEDULE_OFFSET))
    return kappa0 * (1.0 - 4.0 * (math.pi**2 / 6.0 - head))


@dataclass(frozen=True)
class IterationState:
    n: int
    rho_n: float
    kappa_n: float
    delta_n: float
    eps_n: float
    eta_n: float
    theta_n: float
    C0: float
    J: float

    @classmethod
    def measure(cls, n, H, kappa0):
        delta, _ = schedule(n, kappa0)
        eps = S.epsilon_norm(H.f, H.dom).epsilon
        if eps == 0.0:
            theta = 0.0
        else:
            theta = eps / (H.J * H.dom.rho) if H.J > 0 else math.inf
        return cls(n, H.dom.rho, H.dom.kappa, delta, eps, eps * H.freq.C0, theta, H.freq.C0, H.J)

    def to_dict(self):
        return dict(self.__dict__)


class StopReason(enum.Enum):
    TargetReached = "TargetReached"
    MaxSteps = "MaxSteps"
    ConditionFailed = "ConditionFailed"
    DomainCollapsed = "DomainCollapsed"


@dataclass
class IterationTrace:
    states: list = field(default_factory=list)
    step_reports: list = field(default_factory=list)
    stop_reason: StopReason | None = None
    certificates: list = field(default_factory=list)
    failure: str = ""

    @property
    def etas(self):
        return [s.eta_n for s in self.states]

    @property
    def deltas(self):
        return [s.delta_n for s in self.states]

    def summary(self):
        last = self.states[-1]
        return {
            "steps": len(self.step_reports),
            "stop_reason": self.stop_reason.value if self.stop_reason else None,
            "failure": self.failure,
            "final_eta": last.eta_n,
            "final_eps": last.eps_n,
            "final_theta": last.theta_n,
            "final_rho": last.rho_n,
            "final_kappa": last.kappa_n,
            "etas": self.etas,
        }


@dataclass
class TorusEmbedding:
    """``alpha' -> (a_inf + Xi_inf(alpha'), alpha' + Delta_inf(alpha'))``.

    ``omega`` is the frequency the torus is parameterized by (rigid rotation
    in ``alpha'``).
    """

    a_inf: np.ndarray
    Xi_inf: list
    Delta_inf: list
    history: list = field(default_factory=list)
    omega: np.ndarray | None = None

    @property
    def ell(self):
        return len(self.a_inf)

    @property
    def N(self):
        return self.Xi_inf[0].N

    @classmethod
    def zero(cls, ell, N, omega=None):
        z = [FourierTaylorSeries.zeros(ell, N, 0) for _ in range(ell)]
        return cls(np.zeros(ell), z, [g.copy() for g in z], [], None if omega is None else np.asarray(omega, float))

    def evaluate(self, theta):
        """Points ``(A, alpha)`` of the torus for angles ``theta`` of shape ``(ell,)`` or ``(ell, P)``."""
        theta = np.asarray(theta, dtype=float)
        th = theta.reshape(self.ell, -1)
        A0 = np.zeros_like(th)
        A = self.a_inf[:, None] + np.stack([np.atleast_1d(S.evaluate(x, A0, th)).real for x in self.Xi_inf])
        alpha = th + np.stack([np.atleast_1d(S.evaluate(x, A0, th)).real for x in self.Delta_inf])
        if theta.ndim == 1:
            return A[:, 0], alpha[:, 0]
        return A, alpha

    def action_coefficients(self, j):
        """Fourier coefficients of the full action component ``a_j + Xi_j`` keyed by ``nu``."""
        out = self.Xi_inf[j].coeffs[0].copy()
        out[(self.N,) * self.ell] += self.a_inf[j]
        return out

    def angle_coefficients(self, j):
        return self.Delta_inf[j].coeffs[0].copy()


@dataclass(frozen=True)
class DriverConfig:
    max_steps: int = 10
    target_eta: float = 1e-25
    tolerances: Tolerances = Tolerances()
    rho_floor_ratio: float = 1e-100


def _gate(state, certificates):
    def check(diag, stage):
        cert = check_step(diag, state)
        cert.stage = stage
        certificates.append(cert)
        if not cert.overall:
            first = cert.first_failure
            raise NotApplicable(f"step {state.n} gate failed: {first.name}", condition=first.name, certificate=cert)

    return check


def certify(H):
    """Initial certificate for ``H``, including the mixed-derivative gate on ``Phi_0``.

    The generating function is only built when the arithmetic gates pass.
    """
    state = IterationState.measure(0, H, H.dom.kappa)
    trivial_shift = H.J == 0 and all(g.is_zero() for g in S.gradient_A(H.f.average()))
    cert = check_initial(state.C0, H.dom.rho, H.dom.kappa, H.J, state.eps_n, action_independent=trivial_shift)
    if cert.overall:
        try:
            a = solve_shift(H.f.average(), H.J, H.dom, eps=state.eps_n)
            Phi = build_generating(H, a, state.delta_n)
            mixed = step_diagnostics(Phi, None, None, H.dom, state.delta_n, strict=False).phi_norms[2]
        except KamError:
            mixed = math.inf
        cert.add("generating_mixed_initial", mixed, 1.0, mixed < 1.0)
    return cert


def run(H0, config=DriverConfig()):
    """Iterate the step until the target, the step budget, or a failed gate.

    Returns ``(trace, embedding, maps)``.

    Raises
    ------
    NotApplicable
        If the initial conditions fail; the exception carries the certificate.
    """
    kappa0, rho0 = H0.dom.kappa, H0.dom.rho
    trace = IterationTrace()
    state = IterationState.measure(0, H0, kappa0)
    cert = certify(H0)
    trace.certificates.append(cert)
    if not cert.overall:
        first = cert.first_failure
        raise NotApplicable(f"initial condition failed: {first.name}", condition=first.name, certificate=cert)

    H = H0
    maps = []
    trace.states.append(state)
    rho_floor = config.rho_floor_ratio * rho0
    while True:
        if state.eta_n < config.target_eta:
            trace.stop_reason = StopReason.TargetReached
            break
        if state.n >= config.max_steps:
            trace.stop_reason = StopReason.MaxSteps
            break
        try:
            res = kolmogorov_step(H, state, config.tolerances, rho_floor=rho_floor,
                                  check=_gate(state, trace.certificates))
        except DomainCollapsed as exc:
            trace.stop_reason = StopReason.DomainCollapsed
            trace.failure = str(exc)
            break
        except KamError as exc:
            trace.stop_reason = StopReason.ConditionFailed
            trace.failure = str(exc)
            break
        H = res.H
        maps.append(res.cmap)
        trace.step_reports.append(res.report)
        state = IterationState.measure(state.n + 1, H, kappa0)
        trace.states.append(state)

    N = H0.f.N
    embedding = compose_maps(maps, omega=H0.omega) if maps else TorusEmbedding.zero(H0.ell, N, H0.omega)
    return trace, embedding, maps


def _correction_norm(cmap):
    dom = cmap.source_dom
    return max(S.majorant_norm(cmap.Xi, dom), S.majorant_norm(cmap.Delta, dom))


def compose_maps(maps, omega=None, grid=None):
    """Compose ``K_0 o K_1 o ... o K_n`` on the torus ``A' = 0``.

    The composition is done pointwise on an angle grid (default twice the
    Fourier cutoff, to keep aliasing of products out of the retained modes)
    and transformed back.
    """
    if not maps:
        raise ValueError("compose_maps needs at least one map")
    ell = len(maps[0].a)
    N = maps[0].Xi[0].N
    M = grid or S.angle_grid_size(2 * N)
    theta = S.angle_grid(ell, M).reshape(ell, -1)
    A = np.zeros_like(theta)
    alpha = theta.copy()
    for cmap in reversed(maps):
        Xi = np.stack([np.atleast_1d(S.evaluate(x, A, alpha)).real for x in cmap.Xi])
        De = np.stack([np.atleast_1d(S.evaluate(x, A, alpha)).real for x in cmap.Delta])
        A = A + np.asarray(cmap.a, float)[:, None] + Xi
        alpha = alpha + De
    a_inf = np.sum([np.asarray(m.a, float) for m in maps], axis=0)
    shape = (M,) * ell
    Xi_inf = [S.from_grid_values((A[j] - a_inf[j]).reshape((1,) + shape), N)[0] for j in range(ell)]
    Delta_inf = [S.from_grid_values((alpha[j] - theta[j]).reshape((1,) + shape), N)[0] for j in range(ell)]
    history = [(tuple(float(x) for x in m.a), _correction_norm(m)) for m in maps]
    return TorusEmbedding(a_inf, Xi_inf, Delta_inf, history, None if omega is None else np.asarray(omega, float))


def rescale(H, eta, rho0=None, kappa0=None):
    """Blow the actions up by ``eta**-1/2`` and view the result on ``(rho0/2, kappa0/2)``.

    ``omega.A' + eta**1/2 J/2 A'.A' + eta**-1/2 f(eta**1/2 A', alpha)``.
    """
    if not eta > 0:
        raise ValueError("eta must be positive")
    rho0 = H.dom.rho if rho0 is None else rho0
    kappa0 = H.dom.kappa if kappa0 is None else kappa0
    s = math.sqrt(eta)
    deg = np.asarray(H.f.monomials).sum(axis=1)
    factor = s ** (deg.astype(float) - 1.0) if eta != 1 else np.ones(len(deg))
    coeffs = H.f.coeffs * factor.reshape((-1,) + (1,) * H.ell)
    f = FourierTaylorSeries(H.ell, H.f.N, H.f.d, coeffs, real=H.f.real)
    return Hamiltonian(H.J * s, H.freq, f, PolydiskDomain(H.ell, 0.5 * rho0, 0.5 * kappa0))


def rescaled_size(H):
    """Epsilon-norm of ``H - omega.A`` on ``H.dom`` (twist included)."""
    ell = H.ell
    quad = FourierTaylorSeries.zeros(ell, H.f.N, max(H.f.d, 2))
    for j in range(ell):
        quad.set_coefficient((0,) * ell, tuple(2 if i == j else 0 for i in range(ell)), 0.5 * H.J)
    f = H.f if H.f.d >= 2 else H.f.with_truncation(d=2)
    return S.epsilon_norm(quad + f, H.dom).epsilon


def _eta_sequence(trace):
    etas = trace.etas if isinstance(trace, IterationTrace) else list(trace)
    out = []
    for e in etas:
        if not e > 0:
            break
        out.append(float(e))
    return out


def fit_quadratic_law(etas, deltas, fit=(0, 1)):
    """Fit ``eta_{n+1} = K eta_n**2 delta_n**-c`` on two transitions.

    ``c`` is constrained to be nonnegative; if the unconstrained solution is
    negative, ``c = 0`` and ``K`` is the larger of the two ratios.  Returns a
    dict with ``K``, ``c``, the ratios ``eta_{n+1} / (eta_n**2 delta_n**-c)``
    for every transition and ``holds`` per transition.
    """
    etas = [float(e) for e in etas]
    n_tr = len(etas) - 1
    if n_tr < 2 or max(fit) >= n_tr:
        raise NotEnoughData("need at least two transitions to fit the law")
    i, j = fit
    r = [etas[k + 1] / etas[k] ** 2 for k in range(n_tr)]
    li, lj = math.log(deltas[i]), math.log(deltas[j])
    if li != lj:
        c = (math.log(r[i]) - math.log(r[j])) / (lj - li)
    else:
        c = 0.0
    if c < 0 or not math.isfinite(c):
        c = 0.0
        K = max(r[i], r[j])
    else:
        K = r[i] * deltas[i] ** c
    ratios = [etas[k + 1] / (etas[k] ** 2 * deltas[k] ** (-c)) for k in range(n_tr)]
    holds = [x <= K * (1 + 1e-12) for x in ratios]
    orders = [math.log(etas[k + 1]) / math.log(etas[k]) if 0 < etas[k] < 1 and etas[k + 1] > 0 else math.nan
              for k in range(n_tr)]
    return {"K": K, "c": c, "ratios": ratios, "holds": holds, "orders": orders}


def check_superexponential(trace, mu, deltas=None):
    """Test ``log log (1/eta_n)`` against an affine law with slope at least ``log(1 + mu)``.

    ``trace`` is an :class:`IterationTrace` or a sequence of ``eta_n``.
    Returns ``(ok, fitted)``; ``fitted`` holds the slope, intercept, the
    implied ``gamma_bar`` of ``eta_n ~ (gamma_bar eta_0)**((1+s)**n)`` and,
    when step widths are known, the quadratic-law ratios.

    Raises
    ------
    NotEnoughData
        With fewer than three completed steps.
    """
    if not 0 < mu < 0.5:
        raise ValueError("mu must lie in (0, 1/2)")
    etas = _eta_sequence(trace)
    if isinstance(trace, IterationTrace) and deltas is None:
        deltas = trace.deltas
    if len(etas) < 4:
        raise NotEnoughData(f"need at least 3 completed steps, have {max(len(etas) - 1, 0)}")
    if any(e >= 1 for e in etas):
        return False, {"reason": "eta >= 1"}
    n = np.arange(len(etas), dtype=float)
    y = np.log(np.log(1.0 / np.array(etas)))
    slope, intercept = np.polyfit(n, y, 1)
    fit = slope * n + intercept
    rel = float(np.max(np.abs(y - fit) / np.abs(fit)))
    ok = bool(rel <= 0.2 and slope >= math.log1p(mu))
    fitted = {
        "slope": float(slope),
        "intercept": float(intercept),
        "growth": float(math.expm1(slope)),
        "max_relative_deviation": rel,
        "gamma_bar": float(math.exp(-math.exp(intercept)) / etas[0]),
    }
    if deltas is not None:
        try:
            fitted["quadratic_law"] = fit_quadratic_law(etas, deltas[: len(etas)])
        except NotEnoughData:
            pass
    return ok, fitted


def trace_to_csv(trace, path_or_file=None):
    """Write one row per state; returns the CSV text."""
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(TRACE_HEADER)
    for k, s in enumerate(trace.states):
        if k < len(trace.step_reports):
            rep = trace.step_reports[k]
            extra = list(rep.term_norms) + [rep.cancellation_residual]
        else:
            extra = [math.nan] * 4
        vals = [s.rho_n, s.kappa_n, s.delta_n, s.eps_n, s.eta_n, s.theta_n] + extra
        w.writerow([str(s.n)] + [format(float(v), ".16e") for v in vals])
    text = buf.getvalue()
    if path_or_file is not None:
        if hasattr(path_or_file, "write"):
            path_or_file.write(text)
        else:
            with open(path_or_file, "w", encoding="utf-8", newline="") as fh:
                fh.write(text)
    return text
