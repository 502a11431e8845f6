"""Independent checks of a computed torus: invariance defect, flow conjugacy, Newton oracle."""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy import integrate as sint

from . import series as S
from .diophantine import FrequencyVector, is_resonant
from .driver import TorusEmbedding
from .errors import OracleDiverged, Resonant
from .integrate import dopri5


@dataclass
class DefectReport:
    sup_defect: float
    grid_size: int
    per_component: np.ndarray

    def to_dict(self):
        return {
            "sup_defect": self.sup_defect,
            "grid_size": self.grid_size,
            "per_component": [float(x) for x in self.per_component],
        }


class _Field:
    """First (and optionally second) derivatives of ``f`` for pointwise evaluation."""

    def __init__(self, H, second=False):
        self.H = H
        ell = H.ell
        self.fA = S.gradient_A(H.f)
        self.fa = S.gradient_alpha(H.f)
        if second:
            self.faA = [[S.partial_A(self.fa[j], k) for k in range(ell)] for j in range(ell)]
            self.faa = [[S.partial_alpha(self.fa[j], k) for k in range(ell)] for j in range(ell)]
            self.fAA = [[S.partial_A(self.fA[j], k) for k in range(ell)] for j in range(ell)]

    @staticmethod
    def _ev(g, A, alpha):
        return np.atleast_1d(S.evaluate(g, A, alpha)).real

    def dH_dalpha(self, A, alpha):
        return np.stack([self._ev(g, A, alpha) for g in self.fa])

    def dH_dA(self, A, alpha):
        H = self.H
        return H.omega[:, None] + H.J * A + np.stack([self._ev(g, A, alpha) for g in self.fA])

    def table(self, blocks, A, alpha):
        return np.array([[self._ev(g, A, alpha) for g in row] for row in blocks])

    def vector_field(self, t, y):
        ell = self.H.ell
        A, alpha = y[:ell], y[ell:]
        return np.concatenate([-self.dH_dalpha(A, alpha), self.dH_dA(A, alpha)])


def _torus_omega(H, K, omega):
    if omega is not None:
        return np.asarray(getattr(omega, "vector", omega), dtype=float)
    if K.omega is not None:
        return np.asarray(K.omega, dtype=float)
    return H.omega


def invariance_defect(H, K, grid=None, omega=None):
    """Sup over an angle grid of ``(omega . d) K - X_H(K)``.

    ``X_H = (-d_alpha H, d_A H)``.  The rotation ``omega`` defaults to the
    embedding's own frequency, then to ``H``'s.
    """
    ell = H.ell
    w = _torus_omega(H, K, omega)
    M = grid or S.angle_grid_size(max(K.N, H.f.N))
    if M < 2 * K.N + 1:
        raise ValueError("grid must have at least 2N+1 points per dimension")
    theta = S.angle_grid(ell, M).reshape(ell, -1)
    A, alpha = K.evaluate(theta)
    zero = np.zeros_like(theta)

    def flow_derivative(g):
        d = sum(w[j] * S.partial_alpha(g, j) for j in range(ell))
        return np.atleast_1d(S.evaluate(d, zero, theta)).real

    field_ = _Field(H)
    dA = np.stack([flow_derivative(x) for x in K.Xi_inf]) + field_.dH_dalpha(A, alpha)
    dalpha = w[:, None] + np.stack([flow_derivative(x) for x in K.Delta_inf]) - field_.dH_dA(A, alpha)
    per = np.concatenate([np.max(np.abs(dA), axis=1), np.max(np.abs(dalpha), axis=1)])
    return DefectReport(float(np.max(per)), int(M), per)


def _wrap(x):
    return np.abs((x + np.pi) % (2 * np.pi) - np.pi)


def flow_conjugacy_test(H, K, t_final, integrator_tol=1e-12, samples=8, seed=0, omega=None):
    """Max distance between the flow of ``K(theta)`` and ``K(theta + omega t_final)``.

    Actions use the absolute difference, angles the distance on the circle.
    """
    if not t_final > 0:
        raise ValueError("t_final must be positive")
    ell = H.ell
    w = _torus_omega(H, K, omega)
    rng = np.random.default_rng(seed)
    theta0 = rng.uniform(0, 2 * np.pi, size=(ell, samples))
    A0, alpha0 = K.evaluate(theta0)
    field_ = _Field(H)
    y, _ = dopri5(field_.vector_field, 0.0, np.concatenate([A0, alpha0]), t_final,
                  atol=integrator_tol, rtol=integrator_tol)
    A1, alpha1 = K.evaluate(theta0 + w[:, None] * t_final)
    dist_A = np.abs(y[:ell] - A1)
    dist_alpha = _wrap(y[ell:] - alpha1)
    return float(max(np.max(dist_A), np.max(dist_alpha)))


def _bump(s):
    s = np.asarray(s, dtype=float)
    out = np.zeros_like(s)
    inside = (s > 0) & (s < 1)
    out[inside] = np.exp(-1.0 / (s[inside] * (1 - s[inside])))
    return out


_BUMP_MASS = sint.quad(lambda s: float(_bump(s)), 0.0, 1.0, epsabs=1e-15, epsrel=1e-14)[0]


def rotation_vector(H, K, t_final=100.0, integrator_tol=1e-12, samples=2, seed=1):
    """Rotation vector of the flow started on ``K``, by a weighted Birkhoff average of ``alpha-dot``.

    The weight ``exp(-1/(s(1-s)))`` with ``s = t / t_final`` makes the
    average converge faster than any power of ``t_final`` on a
    quasi-periodic orbit.  Returns one row per sample.
    """
    ell = H.ell
    rng = np.random.default_rng(seed)
    theta0 = rng.uniform(0, 2 * np.pi, size=(ell, samples))
    A0, alpha0 = K.evaluate(theta0)
    field_ = _Field(H)

    def rhs(t, y):
        z = y[: 2 * ell]
        v = field_.vector_field(t, z)
        return np.concatenate([v, _bump(t / t_final) * v[ell:]])

    y0 = np.concatenate([A0, alpha0, np.zeros((ell, samples))])
    y, _ = dopri5(rhs, 0.0, y0, t_final, atol=integrator_tol, rtol=integrator_tol)
    return (y[2 * ell:] / (t_final * _BUMP_MASS)).T


def _spectral_derivative(M):
    k = np.fft.fftfreq(M, d=1.0 / M)
    I = np.eye(M)
    return np.real(np.fft.ifft(1j * k[:, None] * np.fft.fft(I, axis=0), axis=0))


def _flow_operator(omega, M):
    ell = len(omega)
    D1 = _spectral_derivative(M)
    I = np.eye(M)
    L = np.zeros((M**ell, M**ell))
    for j in range(ell):
        mats = [D1 if i == j else I for i in range(ell)]
        term = mats[0]
        for m in mats[1:]:
            term = np.kron(term, m)
        L += omega[j] * term
    return L


def oracle_newton_torus(H, omega, N, tol=1e-12, angle_mean=None, max_iter=40):
    """Newton collocation for the invariant torus with frequency ``omega``.

    Unknowns are the torus values ``A(theta), D(theta)`` with
    ``alpha = theta + D`` at ``(2N+1)**ell`` grid points, plus ``ell``
    unfolding constants ``lam`` added to the action equations.  The phase is
    pinned by ``mean D_j = angle_mean_j`` (default 0).  The Jacobian is
    analytic.  Only used as a test oracle.

    Raises
    ------
    Resonant
        If ``omega . nu`` vanishes for a grid mode.
    OracleDiverged
        If the residual does not reach ``tol``.
    """
    w = np.asarray(getattr(omega, "vector", omega), dtype=float)
    ell = H.ell
    M = 2 * N + 1
    box = np.stack(np.meshgrid(*([np.arange(-N, N + 1)] * ell), indexing="ij")).reshape(ell, -1).T
    for nu in box:
        if np.any(nu) and is_resonant(w, nu):
            raise Resonant(f"omega is resonant at nu={tuple(int(x) for x in nu)}", nu=tuple(int(x) for x in nu))
    cmean = np.zeros(ell) if angle_mean is None else np.asarray(angle_mean, dtype=float)
    P = M**ell
    theta = S.angle_grid(ell, M).reshape(ell, -1)
    L = _flow_operator(w, M)
    fld = _Field(H, second=True)
    J = H.J
    n = 2 * ell * P + ell

    def unpack(x):
        A = x[: ell * P].reshape(ell, P)
        D = x[ell * P: 2 * ell * P].reshape(ell, P)
        return A, D, x[2 * ell * P:]

    def residual(x):
        A, D, lam = unpack(x)
        alpha = theta + D
        fa = np.stack([fld._ev(g, A, alpha) for g in fld.fa])
        fA = np.stack([fld._ev(g, A, alpha) for g in fld.fA])
        EA = A @ L.T + fa + lam[:, None]
        ED = D @ L.T + (H.omega - w)[:, None] - J * A - fA
        phase = D.mean(axis=1) - cmean
        return np.concatenate([EA.ravel(), ED.ravel(), phase])

    def jacobian(x):
        A, D, _ = unpack(x)
        alpha = theta + D
        faA = fld.table(fld.faA, A, alpha)
        faa = fld.table(fld.faa, A, alpha)
        fAA = fld.table(fld.fAA, A, alpha)
        Jm = np.zeros((n, n))
        for j in range(ell):
            rA = slice(j * P, (j + 1) * P)
            rD = slice(ell * P + j * P, ell * P + (j + 1) * P)
            for k in range(ell):
                cA = slice(k * P, (k + 1) * P)
                cD = slice(ell * P + k * P, ell * P + (k + 1) * P)
                blk = np.diag(faA[j, k])
                if j == k:
                    blk = blk + L
                Jm[rA, cA] = blk
                Jm[rA, cD] = np.diag(faa[j, k])
                blk = -np.diag(fAA[j, k])
                if j == k:
                    blk = blk - J * np.eye(P)
                Jm[rD, cA] = blk
                blk = -np.diag(faA[k, j])
                if j == k:
                    blk = blk + L
                Jm[rD, cD] = blk
            Jm[rA, 2 * ell * P + j] = 1.0
            Jm[2 * ell * P + j, rD] = 1.0 / P
        return Jm

    x = np.zeros(n)
    x[ell * P: 2 * ell * P] = np.repeat(cmean, P)
    r = residual(x)
    res = float(np.max(np.abs(r)))
    history = [(tuple(x[2 * ell * P:]), res)]
    for _ in range(max_iter):
        if res < tol:
            break
        try:
            step = np.linalg.solve(jacobian(x), -r)
        except np.linalg.LinAlgError as exc:
            raise OracleDiverged(f"singular Newton system: {exc}") from exc
        lam_step = 1.0
        while True:
            xn = x + lam_step * step
            rn = residual(xn)
            rn_max = float(np.max(np.abs(rn)))
            if rn_max < res or lam_step < 1e-4:
                break
            lam_step *= 0.5
        if not rn_max < res:
            raise OracleDiverged(f"Newton stagnated at residual {res:.3e}")
        x, r, res = xn, rn, rn_max
        history.append((tuple(x[2 * ell * P:]), res))
    else:
        if res >= tol:
            raise OracleDiverged(f"Newton did not reach tol: residual {res:.3e}")
    if res >= tol:
        raise OracleDiverged(f"Newton did not reach tol: residual {res:.3e}")

    A, D, lam = unpack(x)
    shape = (1,) + (M,) * ell
    a_inf = A.mean(axis=1)
    Xi = [S.from_grid_values((A[j] - a_inf[j]).reshape(shape), N)[0] for j in range(ell)]
    De = [S.from_grid_values(D[j].reshape(shape), N)[0] for j in range(ell)]
    emb = TorusEmbedding(a_inf, Xi, De, history, w)
    emb.unfolding = lam
    emb.residual = res
    return emb


def compare_embeddings(K1, K2, max_order):
    """Max coefficient gap over ``|nu|_1 <= max_order`` (actions include ``a_inf``)."""
    ell = K1.ell
    worst = 0.0
    nus = np.stack(np.meshgrid(*([np.arange(-max_order, max_order + 1)] * ell), indexing="ij")).reshape(ell, -1).T
    nus = nus[np.abs(nus).sum(axis=1) <= max_order]
    for j in range(ell):
        for getter in ("action_coefficients", "angle_coefficients"):
            c1, c2 = getattr(K1, getter)(j), getattr(K2, getter)(j)
            for nu in nus:
                v1 = c1[tuple(x + K1.N for x in nu)] if np.abs(nu).sum() <= K1.N else 0.0
                v2 = c2[tuple(x + K2.N for x in nu)] if np.abs(nu).sum() <= K2.N else 0.0
                worst = max(worst, abs(v1 - v2))
    return worst
