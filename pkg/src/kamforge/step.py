"""One renormalization step: shift, generating function, canonical map, pushforward.

Given ``H = J/2 A.A + omega.A + f(A, alpha)`` the step

1. solves the shift ``a = -grad fbar(a) / J`` (``fbar`` is the angle average),
2. builds the generating function ``Phi(A', alpha)`` whose mode ``nu`` is
   ``-f_nu(A'+a) / (i omega.nu) * (1 - q + q**2)`` with
   ``q = J (A'+a).nu / (omega.nu)``; the divisors never depend on ``A'``,
3. inverts ``alpha' = alpha + d_A' Phi(A', alpha)`` for
   ``alpha = alpha' + Delta(A', alpha')`` and sets
   ``Xi(A', alpha') = d_alpha Phi(A', alpha' + Delta)``,
4. writes the new perturbation as the sum of three remainders in the mixed
   variables ``(A', alpha)`` and re-expresses it in ``(A', alpha')``.

The first remainder is the explicit cubic term left over when the geometric
series ``1 / (1 + q)`` is replaced by ``1 - q + q**2``:

    (omega + J (A'+a)) . d_alpha Phi + f(A'+a, alpha) - fbar(A'+a)
        = - sum_{nu != 0} f_nu(A'+a) q**3 exp(i nu.alpha).
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from . import series as S
from .diophantine import RESONANCE_RTOL, FrequencyVector
from .errors import (
    DimensionMismatch,
    DomainCollapsed,
    InjectivityFailed,
    InversionDiverged,
    ResonantMode,
    ShiftConditionFailed,
    ShiftDiverged,
)
from .series import FourierTaylorSeries, PolydiskDomain

MAX_SWEEPS = 64
THETA_GATE = 1.0 / 16.0


@dataclass(frozen=True)
class Tolerances:
    """Solver tolerances.  ``shift`` and ``inversion`` are relative to the size of the solution."""

    shift: float = 1e-15
    inversion: float = 1e-14
    composition: float = 1e-6
    oracle: float = 1e-12

    def __post_init__(self):
        for name in ("shift", "inversion", "composition", "oracle"):
            if not getattr(self, name) > 0:
                raise ValueError(f"tolerance {name} must be positive")


@dataclass(frozen=True)
class Hamiltonian:
    """``J/2 A.A + omega.A + f(A, alpha)`` on the polydisk ``dom``."""

    J: float
    freq: FrequencyVector
    f: FourierTaylorSeries
    dom: PolydiskDomain

    def __post_init__(self):
        if not self.J >= 0:
            raise ValueError("twist J must be nonnegative")
        if not (self.f.ell == self.freq.ell == self.dom.ell):
            raise DimensionMismatch("Hamiltonian components disagree on ell")
        if self.f.coefficient((0,) * self.f.ell, (0,) * self.f.ell) != 0:
            raise ValueError("perturbation must have zero angle-average at A = 0")
        if not self.f.real:
            raise ValueError("perturbation must be flagged real-valued")

    @property
    def ell(self):
        return self.f.ell

    @property
    def omega(self):
        return self.freq.vector

    def with_perturbation(self, f, dom=None):
        return Hamiltonian(self.J, self.freq, f, self.dom if dom is None else dom)

    def evaluate(self, A, alpha):
        A = np.asarray(A, dtype=complex)
        Am = A.reshape(self.ell, -1)
        h = 0.5 * self.J * np.sum(Am * Am, axis=0) + self.omega @ Am
        val = h + np.atleast_1d(S.evaluate(self.f, A, alpha))
        return complex(val[0]) if A.ndim == 1 else val


@dataclass
class CanonicalMap:
    """``A = A' + a + Xi(A', alpha')``, ``alpha = alpha' + Delta(A', alpha')``."""

    a: np.ndarray
    Xi: list
    Delta: list
    source_dom: PolydiskDomain
    target_dom: PolydiskDomain

    @classmethod
    def identity(cls, ell, N, d, dom):
        z = [FourierTaylorSeries.zeros(ell, N, d) for _ in range(ell)]
        return cls(np.zeros(ell), z, [g.copy() for g in z], dom, dom)

    def apply(self, A1, alpha1):
        A1 = np.asarray(A1, dtype=complex).reshape(len(self.a), -1)
        alpha1 = np.asarray(alpha1, dtype=complex).reshape(len(self.a), -1)
        A = A1 + self.a[:, None] + np.stack([S.evaluate(x, A1, alpha1) for x in self.Xi])
        alpha = alpha1 + np.stack([S.evaluate(x, A1, alpha1) for x in self.Delta])
        return A, alpha


@dataclass
class StepDiagnostics:
    phi_norms: tuple
    delta_norm: float = 0.0
    xi_norm: float = 0.0
    injectivity_margin: float = 1.0


@dataclass
class StepReport:
    """Measured quantities of one step.

    ``term_norms`` are epsilon-norms of the three remainders on the new
    action radius; ``term_sup_norms`` are their majorants on the same
    domain.
    """

    eps_new: float
    term_norms: tuple
    term_sup_norms: tuple = (0.0, 0.0, 0.0)
    cancellation_residual: float = 0.0
    phi_norms: tuple = (0.0, 0.0, 0.0, 0.0)
    delta_norm: float = 0.0
    xi_norm: float = 0.0
    injectivity_margin: float = 1.0
    a: tuple = ()
    shift_residual: float = 0.0
    energy_shift: float = 0.0
    truncation_tail: float = 0.0
    composition_factor: float = 1.0
    rho_new: float = 0.0
    kappa_new: float = 0.0

    def to_dict(self):
        return {
            "eps_new": self.eps_new,
            "term_norms": list(self.term_norms),
            "term_sup_norms": list(self.term_sup_norms),
            "cancellation_residual": self.cancellation_residual,
            "phi_norms": list(self.phi_norms),
            "delta_norm": self.delta_norm,
            "xi_norm": self.xi_norm,
            "injectivity_margin": self.injectivity_margin,
            "a": [float(x) for x in self.a],
            "energy_shift": self.energy_shift,
            "truncation_tail": self.truncation_tail,
            "rho_new": self.rho_new,
            "kappa_new": self.kappa_new,
        }


# ----------------------------------------------------------------------------
# shift


def solve_shift(fbar, J, dom, tol=1e-15, eps=None, max_iter=MAX_SWEEPS):
    """Solve ``a = -grad fbar(a) / J`` by fixed-point iteration from ``a = -grad fbar(0) / J``.

    The solubility gate ``theta = eps / (J rho) < 1/16`` is enforced, with
    ``eps`` defaulting to the epsilon-norm of ``fbar``.  ``tol`` is relative
    to ``|a|``; the iteration also stops once the residual stops shrinking.
    """
    ell = fbar.ell
    grad = S.gradient_A(fbar.average())
    if all(g.is_zero() for g in grad):
        return np.zeros(ell)
    if J == 0:
        raise ShiftConditionFailed("shift equation needs J > 0 when the average depends on A")
    if eps is None:
        eps = S.epsilon_norm(fbar, dom).epsilon
    theta = eps / (J * dom.rho)
    if not theta < THETA_GATE:
        raise ShiftConditionFailed(f"theta = {theta:.3e} >= 1/16")

    def rhs(a):
        return np.array([-S.evaluate(g, a, np.zeros(ell)).real / J for g in grad])

    a = rhs(np.zeros(ell))
    prev = math.inf
    for _ in range(max_iter):
        new = rhs(a)
        res = float(np.max(np.abs(new - a)))
        a = new
        if res <= tol * max(float(np.max(np.abs(a))), 1e-300) or res == 0.0:
            break
        if res >= prev:
            if res <= 1e3 * tol * float(np.max(np.abs(a))):
                break
            raise ShiftDiverged(f"shift iteration stalled at residual {res:.3e}")
        prev = res
    else:
        raise ShiftDiverged("shift iteration did not converge")
    if np.any(np.abs(a) >= dom.rho / 16):
        raise ShiftConditionFailed(f"|a| = {np.max(np.abs(a)):.3e} >= rho/16")
    return a


# ----------------------------------------------------------------------------
# generating function


def _divisors(freq, N, ell, support=None):
    nu_box = S._modes(ell, N)[0]
    D = np.tensordot(freq.vector, nu_box, axes=(0, 0))
    l1 = np.sum(np.abs(nu_box), axis=0)
    bad = (np.abs(D) <= RESONANCE_RTOL * np.max(np.abs(freq.vector)) * l1) & (l1 > 0)
    if support is not None:
        bad &= support
    if np.any(bad):
        nu = tuple(int(x) for x in np.argwhere(bad)[0] - N)
        raise ResonantMode(f"divisor omega.nu vanishes at nu={nu}", nu=nu)
    D = D.copy()
    D[l1 == 0] = 1.0
    D[bad | (np.abs(D) == 0)] = 1.0
    return D


def _modewise_product(x, y, ell, d):
    _, _, _, kept, _ = S._basis(ell, d)
    out = np.zeros_like(x)
    for a, b, c in kept:
        out[c] += x[a] * y[b]
    return out


def q_powers(freq, J, a, ell, N, d, max_power=3):
    """Per-mode polynomials ``q**p`` on the monomial basis, ``p = 0..max_power``.

    ``q = J (A' + a).nu / (omega.nu)``; the ``nu = 0`` slot is left at zero
    for every ``p > 0``.
    """
    mono, index, _, _, _ = S._basis(ell, d)
    nu_box = S._modes(ell, N)[0]
    D = _divisors(freq, N, ell, support=np.zeros(nu_box.shape[1:], dtype=bool))
    zero = (N,) * ell
    shape = (len(mono),) + nu_box.shape[1:]
    q = np.zeros(shape, dtype=complex)
    q[0] = J * np.tensordot(np.asarray(a, dtype=float), nu_box, axes=(0, 0)) / D
    if d >= 1:
        for j in range(ell):
            e = tuple(1 if i == j else 0 for i in range(ell))
            q[index[e]] = J * nu_box[j] / D
    q[(slice(None),) + zero] = 0.0
    one = np.zeros(shape, dtype=complex)
    one[0] = 1.0
    powers = [one, q]
    for _ in range(2, max_power + 1):
        powers.append(_modewise_product(powers[-1], q, ell, d))
    return powers[: max_power + 1]


def build_generating(H, a, delta=None):
    """Generating function with the divisor expanded to second order in the twist.

    ``delta`` is accepted for symmetry with :func:`generating_bound`; it does
    not change the result.
    """
    f = H.f
    ell, N, d = f.ell, f.N, f.d
    if H.freq.verified_cutoff < N:
        raise ValueError("frequency vector not verified up to the Fourier cutoff")
    g = S.taylor_shift(f, a)
    support = np.any(g.coeffs != 0, axis=0)
    D = _divisors(H.freq, N, ell, support=support)
    p0, p1, p2 = q_powers(H.freq, H.J, a, ell, N, d, max_power=2)
    poly = p0 - p1 + p2
    prod = _modewise_product(g.coeffs, poly, ell, d)
    coeffs = -prod / (1j * D)[None]
    coeffs[(slice(None),) + (N,) * ell] = 0.0
    phi = FourierTaylorSeries(ell, N, d, coeffs, real=f.real)
    return phi.symmetrized() if phi.real else phi


def generating_bound(H, a, delta):
    """Mode-sum upper bound of ``||Phi||`` on ``(3/4 rho, kappa - delta)``.

    Uses ``|f_nu|`` measured on the action disk of radius ``3/4 rho`` and
    ``1/|omega.nu| <= C0 |nu|**exponent``.
    """
    f = H.f
    ell, N = f.ell, f.N
    dom = H.dom.shrink(rho=0.75 * H.dom.rho, kappa=H.dom.kappa - delta)
    g = S.taylor_shift(f, a)
    fnu = S.fourier_mode_norms(g, dom.shrink(kappa=0.0))
    nu_box, l1, mask, _, _ = S._modes(ell, N)
    D = np.abs(np.tensordot(H.freq.vector, nu_box, axes=(0, 0)))
    D[l1 == 0] = 1.0
    qbar = H.J * (np.abs(np.tensordot(np.asarray(a, float), nu_box, axes=(0, 0))) + dom.rho * l1) / D
    terms = fnu * H.freq.C0 * l1.astype(float) ** H.freq.exponent * (1 + qbar + qbar**2)
    terms *= np.exp(dom.kappa * l1)
    terms[l1 == 0] = 0.0
    return float(np.sum(terms[mask]))


# ----------------------------------------------------------------------------
# canonical map


def invert_angle_map(Phi, dom=None, tol=1e-14, max_sweeps=MAX_SWEEPS, comp_tol=1e-6):
    """Solve ``Delta = -d_A' Phi(A', alpha' + Delta)`` by fixed-point sweeps.

    Each sweep composes ``d_A' Phi`` with the current ``Delta``.  The
    sweep-to-sweep change, measured as a majorant on ``dom`` (the l1 norm if
    ``dom`` is None), must fall below ``tol`` times the size of the first
    iterate.

    Raises
    ------
    InversionDiverged
        If the change grows between sweeps or the sweep budget runs out.
    """
    ell = Phi.ell
    grad = S.gradient_A(Phi)
    delta = [-g for g in grad]
    if all(g.is_zero() for g in delta):
        return delta

    def size(gs):
        return S.majorant_norm(gs, dom) if dom is not None else max(S.l1_norm(g) for g in gs)

    ref = size(delta)
    if Phi.is_angle_independent():
        return delta
    prev = math.inf
    for sweep in range(max_sweeps):
        new = [-S.compose_angle(g, delta, tol=comp_tol) for g in grad]
        res = size([n - o for n, o in zip(new, delta)])
        delta = new
        if res <= tol * ref:
            return delta
        if res >= prev:
            # rounding floor: the contraction has stalled at noise level
            if res <= 1e3 * tol * ref:
                return delta
            raise InversionDiverged(f"angle inversion not contracting (sweep {sweep}, residual {res:.3e})")
        prev = res
    raise InversionDiverged("angle inversion exhausted its sweep budget")


def build_action_map(Phi, Delta, comp_tol=1e-6):
    """``Xi_j(A', alpha') = d_alpha_j Phi(A', alpha' + Delta(A', alpha'))``."""
    return [S.compose_angle(S.partial_alpha(Phi, j), Delta, tol=comp_tol) for j in range(Phi.ell)]


def step_diagnostics(Phi, Delta, Xi, dom, delta, strict=True):
    """Derivative majorants of ``Phi`` and the injectivity margin.

    The four ``Phi`` norms (``d_alpha``, ``d_A'``, mixed, ``d_A' d_A'``) are
    measured on ``(2/3 rho, kappa - 2 delta)``; ``Delta`` and ``Xi`` on
    ``(1/2 rho, kappa - 3 delta)``.  The margin is
    ``1 - ell exp(|d_A' Phi|) |d2 Phi| - (pi ell / 2) |d2 Phi|`` with
    ``d2 Phi`` the mixed derivative.
    """
    ell = Phi.ell
    d2 = dom.shrink(rho=2.0 * dom.rho / 3.0, kappa=dom.kappa - 2 * delta)
    d3 = dom.shrink(rho=0.5 * dom.rho, kappa=dom.kappa - 3 * delta)
    da = S.gradient_alpha(Phi)
    dA = S.gradient_A(Phi)
    n_alpha = S.majorant_norm(da, d2)
    n_A = S.majorant_norm(dA, d2)
    n_mixed = max(S.majorant_norm(S.partial_A(da[i], j), d2) for i in range(ell) for j in range(ell))
    n_AA = max(S.majorant_norm(S.partial_A(dA[i], j), d2) for i in range(ell) for j in range(ell))
    margin = 1.0 - ell * math.exp(n_A) * n_mixed - 0.5 * math.pi * ell * n_mixed
    diag = StepDiagnostics(
        (n_alpha, n_A, n_mixed, n_AA),
        S.majorant_norm(Delta, d3) if Delta else 0.0,
        S.majorant_norm(Xi, d3) if Xi else 0.0,
        margin,
    )
    if strict and margin < 0.5:
        raise InjectivityFailed(f"injectivity margin {margin:.3e} < 1/2", report=diag)
    return diag


# ----------------------------------------------------------------------------
# pushforward


def remainder_terms(H, a, Phi):
    """The three remainders in mixed variables ``(A', alpha)``.

    Returns ``(T1, T2, T3, r)``: the cubic leftover, the Taylor remainder of
    the angle average about ``a``, the action-substitution remainder, and
    the residual linear coefficient ``J a + grad fbar(a)`` (zero when the
    shift is exact).
    """
    f = H.f
    ell, N, d = f.ell, f.N, f.d
    g = S.taylor_shift(f, a)
    _, _, _, p3 = q_powers(H.freq, H.J, a, ell, N, d, max_power=3)
    t1 = -_modewise_product(g.coeffs, p3, ell, d)
    t1[(slice(None),) + (N,) * ell] = 0.0
    T1 = FourierTaylorSeries(ell, N, d, t1, real=f.real)
    if T1.real:
        T1 = T1.symmetrized()

    gbar = g.average()
    T2 = gbar.taylor_part(range(2, d + 1))
    lin_index = [S._basis(ell, d)[1].get(tuple(1 if i == j else 0 for i in range(ell))) for j in range(ell)]
    zero = (N,) * ell
    r = np.array(
        [H.J * a[j] + (gbar.coeffs[(lin_index[j],) + zero].real if lin_index[j] is not None else 0.0)
         for j in range(ell)]
    )

    X = S.gradient_alpha(Phi)
    T3 = S.substitute_actions(g, X, increment=True)
    quad = FourierTaylorSeries.zeros(ell, N, d)
    for x in X:
        quad = quad + S.multiply(x, x)
    T3 = T3 + 0.5 * H.J * quad
    return T1, T2, T3, r


def _linear_series(r, ell, N, d):
    out = FourierTaylorSeries.zeros(ell, N, d)
    if d >= 1:
        for j in range(ell):
            out.set_coefficient((0,) * ell, tuple(1 if i == j else 0 for i in range(ell)), r[j])
    return out


def pushforward(H, cmap, Phi, state, comp_tol=1e-6, rho_floor=0.0):
    """Push ``H`` through ``cmap``; returns the new Hamiltonian and a :class:`StepReport`.

    ``state`` supplies ``eta_n`` and ``delta_n``.  The new domain is
    ``(rho * eta**0.5, kappa - 4 delta)``.
    """
    ell, N, d = H.f.ell, H.f.N, H.f.d
    a = np.asarray(cmap.a, dtype=float)
    delta = state.delta_n
    rho1 = H.dom.rho * math.sqrt(state.eta_n)
    kappa1 = H.dom.kappa - 4 * delta
    if rho1 < rho_floor:
        raise DomainCollapsed(f"new action radius {rho1:.3e} below floor {rho_floor:.3e}")
    if kappa1 <= 0:
        raise DomainCollapsed("angle strip exhausted")

    T1, T2, T3, r = remainder_terms(H, a, Phi)
    mixed = T1 + T2 + T3 + _linear_series(r, ell, N, d)
    f1 = S.compose_angle(mixed, cmap.Delta, tol=comp_tol)
    const = f1.coefficient((0,) * ell, (0,) * ell)
    f1.set_coefficient((0,) * ell, (0,) * ell, 0.0)
    f1 = f1.symmetrized()

    new_dom = PolydiskDomain(ell, rho1 if rho1 > 0 else H.dom.rho, kappa1)
    H1 = H.with_perturbation(f1, new_dom)

    term_dom = new_dom.shrink(kappa=H.dom.kappa - 3 * delta)
    terms = (T1, T2, T3)
    term_norms = tuple(S.epsilon_norm(t, term_dom).epsilon for t in terms)
    term_sup = tuple(S.majorant_norm(t, term_dom) for t in terms)
    # chain-rule factor relating norms in mixed variables to the composed ones
    dDelta = max(
        (S.majorant_norm(S.partial_alpha(g, j), term_dom) for g in cmap.Delta for j in range(ell)),
        default=0.0,
    )
    dDeltaA = max(
        (S.majorant_norm(S.partial_A(g, j), term_dom) for g in cmap.Delta for j in range(ell)),
        default=0.0,
    )
    fbar_a = S.evaluate(H.f.average(), a, np.zeros(ell)).real
    energy = 0.5 * H.J * float(a @ a) + float(H.omega @ a) + fbar_a + const.real
    eps_new = S.epsilon_norm(f1, new_dom).epsilon if rho1 > 0 else 0.0
    report = StepReport(
        eps_new=eps_new,
        term_norms=term_norms,
        term_sup_norms=term_sup,
        a=tuple(float(x) for x in a),
        shift_residual=float(np.max(np.abs(r))) if r.size else 0.0,
        energy_shift=energy,
        truncation_tail=f1.tail_bound,
        composition_factor=(1.0 + ell * dDelta) + ell * dDeltaA * rho1,
        rho_new=rho1,
        kappa_new=kappa1,
    )
    return H1, report


# ----------------------------------------------------------------------------
# cancellation check


def _sample_points(ell, radius, samples, seed):
    rng = np.random.default_rng(seed)
    A = rng.uniform(-radius, radius, size=(ell, samples))
    alpha = rng.uniform(0.0, 2 * np.pi, size=(ell, samples))
    return A, alpha


def verify_cancellation(H, a, Phi, radius=None, samples=256, seed=0):
    """Max pointwise gap between the first remainder and its closed form.

    The left side ``(omega + J(A'+a)) . d_alpha Phi + f(A'+a) - fbar(A'+a)``
    is evaluated from ``Phi`` and ``f``; the right side
    ``-sum f_nu(A'+a) q**3 e^{i nu.alpha}`` is summed mode by mode at each
    point.  Points are drawn with real ``|A'_j| <= radius`` (default half the
    action radius).
    """
    ell = H.ell
    a = np.asarray(a, dtype=float)
    radius = 0.5 * H.dom.rho if radius is None else radius
    A1, alpha = _sample_points(ell, radius, samples, seed)
    B = A1 + a[:, None]
    omega = H.omega
    lhs = np.zeros(samples, dtype=complex)
    for j in range(ell):
        lhs += (omega[j] + H.J * B[j]) * S.evaluate(S.partial_alpha(Phi, j), A1, alpha)
    lhs += S.evaluate(H.f, B, alpha) - S.evaluate(H.f.average(), B, np.zeros_like(alpha))

    rhs = np.zeros(samples, dtype=complex)
    mono = H.f.monomials
    monoB = S._monomial_values(B.astype(complex), mono)  # (P, K)
    N = H.f.N
    for nu in map(tuple, S._modes(ell, N)[4]):
        if not any(nu):
            continue
        c = H.f.coeffs[(slice(None),) + tuple(x + N for x in nu)]
        if not np.any(c):
            continue
        fnu = monoB @ c
        D = float(np.dot(omega, nu))
        q = H.J * (np.asarray(nu) @ B) / D
        rhs += -fnu * q**3 * np.exp(1j * (np.asarray(nu) @ alpha))
    return float(np.max(np.abs(lhs - rhs)))


# ----------------------------------------------------------------------------
# one complete step


@dataclass
class StepResult:
    H: Hamiltonian
    cmap: CanonicalMap
    Phi: FourierTaylorSeries
    report: StepReport
    diagnostics: StepDiagnostics


def kolmogorov_step(H, state, tolerances=Tolerances(), rho_floor=0.0, check=None):
    """Run shift, generating function, inversion and pushforward in sequence.

    ``check`` is an optional callable ``check(diagnostics, stage)`` invoked
    after the pre-inversion diagnostics (stage ``"phi"``) and after the map
    is built (stage ``"map"``); it may raise to stop the step.
    """
    dom = H.dom
    delta = state.delta_n
    a = solve_shift(H.f.average(), H.J, dom, tol=tolerances.shift, eps=state.eps_n)
    Phi = build_generating(H, a, delta)
    pre = step_diagnostics(Phi, None, None, dom, delta, strict=False)
    if check is not None:
        check(pre, "phi")
    if pre.injectivity_margin < 0.5:
        raise InjectivityFailed(f"injectivity margin {pre.injectivity_margin:.3e} < 1/2", report=pre)
    Delta = invert_angle_map(
        Phi, dom.shrink(rho=0.5 * dom.rho, kappa=dom.kappa - 3 * delta),
        tol=tolerances.inversion, comp_tol=tolerances.composition,
    )
    Xi = build_action_map(Phi, Delta, comp_tol=tolerances.composition)
    diag = step_diagnostics(Phi, Delta, Xi, dom, delta, strict=False)
    if check is not None:
        check(diag, "map")
    target = dom.shrink(rho=0.5 * dom.rho, kappa=dom.kappa - 3 * delta)
    cmap = CanonicalMap(np.asarray(a, dtype=float), Xi, Delta, target, dom)
    H1, report = pushforward(H, cmap, Phi, state, comp_tol=tolerances.composition, rho_floor=rho_floor)
    report.phi_norms = diag.phi_norms
    report.delta_norm = diag.delta_norm
    report.xi_norm = diag.xi_norm
    report.injectivity_margin = diag.injectivity_margin
    report.cancellation_residual = verify_cancellation(H, a, Phi, radius=report.rho_new or None)
    return StepResult(H1, cmap, Phi, report, diag)
