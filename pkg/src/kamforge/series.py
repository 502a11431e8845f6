"""Truncated Fourier-Taylor series in action-angle variables.

A series represents

    f(A, alpha) = sum_{nu, k} c[nu, k] * A**k * exp(i nu . alpha)

with Fourier modes restricted to the l1-ball ``|nu| <= N`` and Taylor
monomials of total degree ``|k| <= d``.  Coefficients are kept in a dense
array of shape ``(K, 2N+1, ..., 2N+1)`` where ``K`` counts monomials; mode
``nu`` sits at index ``nu + N`` along each Fourier axis.

Norms are coefficient majorants,

    ||f||_{rho, kappa} = sum |c[nu, k]| rho**|k| exp(kappa |nu|),

which bound the sup norm of ``f`` on the complex polydisk
``|A_j| <= rho, |Im alpha_j| <= kappa``.
"""
from __future__ import annotations

import functools
import itertools
import math
import os
from dataclasses import dataclass, field

import numpy as np
from scipy import fft as sfft
from scipy.special import comb

from .errors import CompositionOverflow, DimensionMismatch


def _workers():
    val = os.environ.get("KAMFORGE_THREADS")
    try:
        return max(1, int(val)) if val else 1
    except ValueError:
        return 1


# ----------------------------------------------------------------------------
# index tables


@functools.lru_cache(maxsize=None)
def monomials(ell, d):
    """Multi-indices ``k`` with ``|k| <= d``, ordered by degree then lexicographically."""
    out = [k for k in itertools.product(range(d + 1), repeat=ell) if sum(k) <= d]
    out.sort(key=lambda k: (sum(k), k))
    return tuple(out)


@functools.lru_cache(maxsize=None)
def _basis(ell, d):
    mono = monomials(ell, d)
    index = {k: i for i, k in enumerate(mono)}
    degree = np.array([sum(k) for k in mono], dtype=int)
    kept, dropped = [], []
    for a, ka in enumerate(mono):
        for b, kb in enumerate(mono):
            kc = tuple(x + y for x, y in zip(ka, kb))
            if sum(kc) <= d:
                kept.append((a, b, index[kc]))
            else:
                dropped.append((a, b))
    return mono, index, degree, tuple(kept), tuple(dropped)


@functools.lru_cache(maxsize=None)
def _modes(ell, N):
    axes = np.meshgrid(*([np.arange(-N, N + 1)] * ell), indexing="ij")
    nu_box = np.stack(axes) if ell else np.zeros((0,), dtype=int)
    l1 = np.sum(np.abs(nu_box), axis=0)
    mask = l1 <= N
    # lexicographic order of the diamond, matches C-order traversal of the box
    flat = np.flatnonzero(mask.ravel())
    nu_list = nu_box.reshape(ell, -1)[:, flat].T.copy()
    return nu_box, l1, mask, flat, nu_list


def angle_grid_size(N):
    """Smallest odd FFT-friendly grid length that resolves modes ``|nu_j| <= N``."""
    m = 2 * N + 1
    while True:
        if m % 2 == 1 and sfft.next_fast_len(m) == m:
            return m
        m += 1


def angle_grid(ell, M):
    """Uniform angle grid, shape ``(ell, M, ..., M)``."""
    t = 2.0 * np.pi * np.arange(M) / M
    return np.stack(np.meshgrid(*([t] * ell), indexing="ij"))


def _embed(coeffs, N, M):
    """Place box coefficients into an ``M``-periodic index layout."""
    ell = coeffs.ndim - 1
    idx = np.arange(-N, N + 1) % M
    out = np.zeros((coeffs.shape[0],) + (M,) * ell, dtype=complex)
    out[(slice(None),) + np.ix_(*([idx] * ell))] = coeffs
    return out


def _extract(periodic, N):
    M = periodic.shape[1]
    ell = periodic.ndim - 1
    idx = np.arange(-N, N + 1) % M
    return periodic[(slice(None),) + np.ix_(*([idx] * ell))]


def _to_grid(coeffs, N, M):
    ell = coeffs.ndim - 1
    axes = tuple(range(1, ell + 1))
    emb = _embed(coeffs, N, M)
    return sfft.ifftn(emb, axes=axes, workers=_workers()) * M**ell


def _from_grid(values, N):
    """Box coefficients of grid values and the l1 mass of every mode dropped."""
    ell = values.ndim - 1
    M = values.shape[1]
    axes = tuple(range(1, ell + 1))
    full = sfft.fftn(values, axes=axes, workers=_workers()) / M**ell
    box = _extract(full, N)
    _, _, mask, _, _ = _modes(ell, N)
    kept = np.where(mask, box, 0.0)
    dropped = float(np.sum(np.abs(full)) - np.sum(np.abs(kept)))
    return kept, max(dropped, 0.0)


# ----------------------------------------------------------------------------
# domain and series types


@dataclass(frozen=True)
class PolydiskDomain:
    """Complex polydisk ``|A_j - center_j| <= rho``, ``|Im alpha_j| <= kappa``."""

    ell: int
    rho: float
    kappa: float
    center: tuple = None

    def __post_init__(self):
        if self.ell < 1:
            raise ValueError("ell must be >= 1")
        if not self.rho > 0:
            raise ValueError("rho must be positive")
        if not self.kappa >= 0:
            raise ValueError("kappa must be nonnegative")
        c = (0.0,) * self.ell if self.center is None else tuple(float(x) for x in self.center)
        if len(c) != self.ell:
            raise DimensionMismatch("center has wrong length")
        object.__setattr__(self, "center", c)

    def shrink(self, rho=None, kappa=None):
        return PolydiskDomain(
            self.ell,
            self.rho if rho is None else rho,
            self.kappa if kappa is None else kappa,
            self.center,
        )

    @property
    def centered(self):
        return not any(self.center)


@dataclass(frozen=True)
class SeriesNorms:
    majorant: float
    grad_A: float
    grad_alpha: float
    epsilon: float


class FourierTaylorSeries:
    """Truncated Fourier-Taylor series; see the module docstring for layout.

    Parameters
    ----------
    ell : int
        Degrees of freedom.
    N : int
        Fourier cutoff on ``|nu|_1``.
    d : int
        Taylor degree cutoff on ``|k|``.
    coeffs : ndarray, optional
        Dense coefficients of shape ``(K, 2N+1, ..., 2N+1)``.  Entries
        outside the l1-ball are zeroed.
    real : bool
        Whether the series is flagged real-valued, i.e.
        ``c[-nu, k] == conj(c[nu, k])``.
    tail_bound : float
        Accumulated l1 mass of coefficients discarded by truncation.
    """

    __slots__ = ("ell", "N", "d", "coeffs", "real", "tail_bound")

    def __init__(self, ell, N, d, coeffs=None, real=True, tail_bound=0.0):
        self.ell = int(ell)
        self.N = int(N)
        self.d = int(d)
        shape = (len(monomials(self.ell, self.d)),) + (2 * self.N + 1,) * self.ell
        if coeffs is None:
            coeffs = np.zeros(shape, dtype=complex)
        else:
            coeffs = np.array(coeffs, dtype=complex)
            if coeffs.shape != shape:
                raise DimensionMismatch(f"coefficient array has shape {coeffs.shape}, expected {shape}")
            coeffs[:, ~_modes(self.ell, self.N)[2]] = 0.0
        self.coeffs = coeffs
        self.real = bool(real)
        self.tail_bound = float(tail_bound)

    # construction ---------------------------------------------------------

    @classmethod
    def zeros(cls, ell, N, d, real=True):
        return cls(ell, N, d, real=real)

    @classmethod
    def constant(cls, value, ell, N, d):
        f = cls(ell, N, d, real=np.isreal(value))
        f.coeffs[(0,) + (N,) * ell] = value
        return f

    @classmethod
    def from_terms(cls, ell, N, d, terms, real=None):
        """Build from ``{(nu, k): c}``.  Terms outside the truncation are rejected."""
        f = cls(ell, N, d, real=False)
        index = _basis(ell, d)[1]
        for (nu, k), c in terms.items():
            nu, k = tuple(int(x) for x in nu), tuple(int(x) for x in k)
            if len(nu) != ell or len(k) != ell:
                raise DimensionMismatch(f"term {(nu, k)} has wrong length")
            if sum(abs(x) for x in nu) > N or k not in index:
                raise ValueError(f"term {(nu, k)} outside truncation (N={N}, d={d})")
            f.coeffs[(index[k],) + tuple(x + N for x in nu)] += c
        f.real = f.is_real_symmetric() if real is None else bool(real)
        return f

    def copy(self):
        return FourierTaylorSeries(self.ell, self.N, self.d, self.coeffs.copy(), self.real, self.tail_bound)

    def _like(self, coeffs, real=None, tail=0.0):
        return FourierTaylorSeries(
            self.ell, self.N, self.d, coeffs, self.real if real is None else real, self.tail_bound + tail
        )

    def with_truncation(self, N=None, d=None):
        """Re-truncate (or zero-pad) to a different ``(N, d)``."""
        N = self.N if N is None else N
        d = self.d if d is None else d
        out = FourierTaylorSeries(self.ell, N, d, real=self.real, tail_bound=self.tail_bound)
        dst_index = _basis(self.ell, d)[1]
        src_mono = monomials(self.ell, self.d)
        m = min(N, self.N)
        sl_src = (slice(self.N - m, self.N + m + 1),) * self.ell
        sl_dst = (slice(N - m, N + m + 1),) * self.ell
        lost = 0.0
        for i, k in enumerate(src_mono):
            if k in dst_index:
                out.coeffs[(dst_index[k],) + sl_dst] = self.coeffs[(i,) + sl_src]
        total = np.sum(np.abs(self.coeffs))
        lost = total - np.sum(np.abs(out.coeffs))
        out.coeffs[:, ~_modes(self.ell, N)[2]] = 0.0
        out.tail_bound += max(float(lost), 0.0)
        return out

    # inspection -----------------------------------------------------------

    @property
    def monomials(self):
        return monomials(self.ell, self.d)

    def coefficient(self, nu, k):
        index = _basis(self.ell, self.d)[1]
        k = tuple(k)
        if k not in index or sum(abs(x) for x in nu) > self.N:
            return 0.0j
        return complex(self.coeffs[(index[k],) + tuple(x + self.N for x in nu)])

    def set_coefficient(self, nu, k, value):
        index = _basis(self.ell, self.d)[1]
        self.coeffs[(index[tuple(k)],) + tuple(x + self.N for x in nu)] = value

    def terms(self):
        """Nonzero ``(nu, k, c)`` triples sorted lexicographically by ``(nu, k)``."""
        mono = self.monomials
        nz = np.argwhere(self.coeffs != 0)
        out = []
        for row in nz:
            k = mono[row[0]]
            nu = tuple(int(x) - self.N for x in row[1:])
            out.append((nu, k, complex(self.coeffs[tuple(row)])))
        out.sort(key=lambda t: (t[0], t[1]))
        return out

    def is_zero(self):
        return not np.any(self.coeffs)

    def is_angle_independent(self):
        zero = (slice(None),) + (self.N,) * self.ell
        rest = self.coeffs.copy()
        rest[zero] = 0.0
        return not np.any(rest)

    def is_action_independent(self):
        return not np.any(self.coeffs[1:])

    def is_real_symmetric(self, rtol=1e-13):
        refl = np.conj(np.flip(self.coeffs, axis=tuple(range(1, self.ell + 1))))
        scale = np.max(np.abs(self.coeffs)) if self.coeffs.size else 0.0
        return bool(np.max(np.abs(refl - self.coeffs), initial=0.0) <= rtol * scale)

    def symmetrized(self):
        """Project onto real-valued series: ``(c[nu] + conj(c[-nu])) / 2``."""
        refl = np.conj(np.flip(self.coeffs, axis=tuple(range(1, self.ell + 1))))
        return self._like(0.5 * (self.coeffs + refl), real=True)

    def average(self):
        """Angle average (the ``nu = 0`` part) as a series."""
        out = np.zeros_like(self.coeffs)
        zero = (slice(None),) + (self.N,) * self.ell
        out[zero] = self.coeffs[zero]
        return self._like(out)

    def oscillating(self):
        out = self.coeffs.copy()
        out[(slice(None),) + (self.N,) * self.ell] = 0.0
        return self._like(out)

    def taylor_part(self, degrees):
        """Keep only monomials whose total degree is in ``degrees``."""
        deg = _basis(self.ell, self.d)[2]
        keep = np.isin(deg, list(degrees))
        out = self.coeffs.copy()
        out[~keep] = 0.0
        return self._like(out)

    def at_zero_action(self):
        """Restriction to ``A = 0`` as a Taylor-degree-0 series."""
        return FourierTaylorSeries(self.ell, self.N, 0, self.coeffs[:1].copy(), self.real, self.tail_bound)

    # arithmetic -----------------------------------------------------------

    def _check(self, other):
        if not isinstance(other, FourierTaylorSeries):
            return NotImplemented
        if other.ell != self.ell:
            raise DimensionMismatch(f"ell {self.ell} vs {other.ell}")
        if (other.N, other.d) != (self.N, self.d):
            raise DimensionMismatch(f"truncation ({self.N},{self.d}) vs ({other.N},{other.d})")
        return other

    def __add__(self, other):
        return add(self, other)

    __radd__ = __add__

    def __sub__(self, other):
        if isinstance(other, FourierTaylorSeries):
            return add(self, scale(other, -1.0))
        return add(self, -other)

    def __neg__(self):
        return scale(self, -1.0)

    def __mul__(self, other):
        if isinstance(other, FourierTaylorSeries):
            return multiply(self, other)
        return scale(self, other)

    __rmul__ = __mul__

    def __truediv__(self, value):
        return scale(self, 1.0 / value)

    def __repr__(self):
        return (
            f"FourierTaylorSeries(ell={self.ell}, N={self.N}, d={self.d}, "
            f"terms={int(np.count_nonzero(self.coeffs))}, real={self.real})"
        )


# ----------------------------------------------------------------------------
# norms and dimensional estimates


def _weights(f, dom):
    _, l1, _, _, _ = _modes(f.ell, f.N)
    deg = _basis(f.ell, f.d)[2]
    rw = dom.rho ** deg.astype(float)
    kw = np.exp(dom.kappa * l1)
    return rw.reshape((-1,) + (1,) * f.ell) * kw[None]


def majorant_norm(f, dom):
    """Coefficient majorant of ``f`` on ``dom``; an upper bound of ``max |f|`` there."""
    if isinstance(f, (list, tuple)):
        return max((majorant_norm(g, dom) for g in f), default=0.0)
    if f.ell != dom.ell:
        raise DimensionMismatch(f"series ell={f.ell}, domain ell={dom.ell}")
    if not dom.centered:
        f = taylor_shift(f, np.asarray(dom.center))
    return float(np.sum(np.abs(f.coeffs) * _weights(f, dom)))


def l1_norm(f):
    return float(np.sum(np.abs(f.coeffs)))


def epsilon_norm(f, dom):
    """All four norms, with ``epsilon = ||d_A f|| + ||d_alpha f|| / rho``.

    Gradient norms are the maximum over components of the majorant of the
    partial derivative.
    """
    if f.ell != dom.ell:
        raise DimensionMismatch(f"series ell={f.ell}, domain ell={dom.ell}")
    gA = max(majorant_norm(partial_A(f, j), dom) for j in range(f.ell))
    ga = max(majorant_norm(partial_alpha(f, j), dom) for j in range(f.ell))
    return SeriesNorms(majorant_norm(f, dom), gA, ga, gA + ga / dom.rho)


def cauchy_bound(norm_g, n, delta):
    """``n! * norm_g * delta**-n``."""
    if not delta > 0:
        raise ValueError("delta must be positive")
    return math.factorial(n) * norm_g * delta ** (-n)


def fourier_mode_norms(f, dom):
    """Majorant of each Fourier coefficient function ``f_nu(A)`` over the action disk."""
    if not dom.centered:
        f = taylor_shift(f, np.asarray(dom.center))
    deg = _basis(f.ell, f.d)[2]
    rw = (dom.rho ** deg.astype(float)).reshape((-1,) + (1,) * f.ell)
    return np.sum(np.abs(f.coeffs) * rw, axis=0)


def fourier_decay_check(f, dom):
    """True iff ``|f_nu| <= ||f|| exp(-kappa |nu|)`` for every stored mode."""
    _, l1, mask, _, _ = _modes(f.ell, f.N)
    norm = majorant_norm(f, dom)
    mode = fourier_mode_norms(f, dom)
    bound = norm * np.exp(-dom.kappa * l1)
    return bool(np.all(mode[mask] <= bound[mask] * (1 + 1e-12) + 1e-300))


# ----------------------------------------------------------------------------
# algebra


def add(f, g):
    if not isinstance(g, FourierTaylorSeries):
        out = f.coeffs.copy()
        out[(0,) + (f.N,) * f.ell] += g
        return f._like(out, real=f.real and np.isreal(g))
    f._check(g)
    return FourierTaylorSeries(
        f.ell, f.N, f.d, f.coeffs + g.coeffs, f.real and g.real, f.tail_bound + g.tail_bound
    )


def scale(f, c):
    return FourierTaylorSeries(
        f.ell, f.N, f.d, f.coeffs * c, f.real and bool(np.isreal(c)), f.tail_bound * abs(c)
    )


def multiply(f, g):
    """Product with convolution in ``nu`` and Cauchy product in ``k``, truncated to ``(N, d)``.

    The Fourier convolution runs on a zero-padded grid of length ``>= 4N+1``
    so no mode wraps around.  The discarded tail (Fourier modes beyond
    ``N`` plus a bound on Taylor terms beyond ``d``) is added to
    ``tail_bound``.
    """
    f._check(g)
    ell, N, d = f.ell, f.N, f.d
    _, _, _, kept, dropped = _basis(ell, d)
    P = sfft.next_fast_len(4 * N + 1)
    vf = _to_grid(f.coeffs, N, P)
    vg = _to_grid(g.coeffs, N, P)
    prod = np.zeros_like(vf)
    for a, b, c in kept:
        prod[c] += vf[a] * vg[b]
    coeffs, lost = _from_grid(prod, N)
    if dropped:
        nf = np.sum(np.abs(f.coeffs).reshape(f.coeffs.shape[0], -1), axis=1)
        ng = np.sum(np.abs(g.coeffs).reshape(g.coeffs.shape[0], -1), axis=1)
        lost += float(sum(nf[a] * ng[b] for a, b in dropped))
    out = FourierTaylorSeries(ell, N, d, coeffs, f.real and g.real, 0.0)
    if out.real:
        out = out.symmetrized()
    out.tail_bound = (
        lost + f.tail_bound * l1_norm(g) + g.tail_bound * l1_norm(f) + f.tail_bound * g.tail_bound
    )
    return out


def partial_alpha(f, j):
    """``d f / d alpha_j``: mode ``nu`` is multiplied by ``i nu_j``."""
    if not 0 <= j < f.ell:
        raise IndexError(j)
    nu_box = _modes(f.ell, f.N)[0]
    return f._like(f.coeffs * (1j * nu_box[j])[None])


def partial_A(f, j):
    """``d f / d A_j``: monomial ``A**k`` becomes ``k_j A**(k - e_j)``."""
    if not 0 <= j < f.ell:
        raise IndexError(j)
    mono, index, _, _, _ = _basis(f.ell, f.d)
    out = np.zeros_like(f.coeffs)
    for i, k in enumerate(mono):
        if k[j]:
            km = k[:j] + (k[j] - 1,) + k[j + 1 :]
            out[index[km]] += k[j] * f.coeffs[i]
    return f._like(out)


def gradient_A(f):
    return [partial_A(f, j) for j in range(f.ell)]


def gradient_alpha(f):
    return [partial_alpha(f, j) for j in range(f.ell)]


def _shift_matrix(ell, d, a):
    mono, index, _, _, _ = _basis(ell, d)
    S = np.zeros((len(mono), len(mono)), dtype=complex)
    for col, k in enumerate(mono):
        for i in itertools.product(*(range(kj + 1) for kj in k)):
            c = 1.0 + 0j
            for j in range(ell):
                c *= comb(k[j], i[j], exact=True) * a[j] ** (k[j] - i[j])
            S[index[i], col] += c
    return S


def taylor_shift(f, a):
    """``g(A', alpha) = f(A' + a, alpha)``, exact on polynomials of degree ``<= d``."""
    a = np.asarray(a, dtype=complex).ravel()
    if a.size != f.ell:
        raise DimensionMismatch("shift vector has wrong length")
    if not np.any(a):
        return f.copy()
    S = _shift_matrix(f.ell, f.d, a)
    out = np.tensordot(S, f.coeffs, axes=(1, 0))
    return f._like(out, real=f.real and bool(np.all(np.isreal(a))))


def substitute_actions(f, X, increment=False):
    """``f(A' + X(A', alpha), alpha)`` for a vector of series ``X``.

    Exact on the truncation subspace: ``f`` is a polynomial of degree
    ``d`` in the actions, so the Taylor expansion in ``X`` terminates.
    With ``increment=True`` only ``f(A' + X) - f(A')`` is returned, summed
    without forming the difference.
    """
    ell, d = f.ell, f.d
    out = FourierTaylorSeries.zeros(ell, f.N, d, real=f.real) if increment else f.copy()
    # multi-index Taylor expansion sum_m (d^m f) X^m / m!
    powers = {(0,) * ell: None}
    for m in monomials(ell, d)[1:]:
        j = next(i for i in range(ell) if m[i])
        prev = m[:j] + (m[j] - 1,) + m[j + 1 :]
        powers[m] = X[j] if powers[prev] is None else multiply(powers[prev], X[j])
        deriv = f
        for i in range(ell):
            for _ in range(m[i]):
                deriv = partial_A(deriv, i)
        if deriv.is_zero():
            continue
        fact = math.prod(math.factorial(x) for x in m)
        out = out + multiply(deriv, powers[m]) / fact
    return out


def compose_angle(f, delta, tol=1e-6):
    """``f(A', alpha' + Delta(A', alpha'))``.

    ``Delta`` is split into its action-independent part ``Delta0(alpha')``
    and the remainder ``Dt`` which vanishes at ``A' = 0``.  Each scaled
    derivative ``d_alpha^m f / m!`` is evaluated at the shifted angles
    ``alpha' + Delta0`` on a uniform grid and re-expanded with the FFT;
    the result is then combined with the powers ``Dt**m``.  Because
    ``Dt**m`` has Taylor degree ``>= |m|`` the expansion stops at
    ``|m| = d``.

    Raises
    ------
    CompositionOverflow
        If the Fourier mass discarded by the re-expansion exceeds
        ``tol`` times the l1 norm of ``f``.
    """
    ell, N, d = f.ell, f.N, f.d
    if len(delta) != ell:
        raise DimensionMismatch("delta must have ell components")
    for g in delta:
        f._check(g)
    if all(g.is_zero() for g in delta) or f.is_zero():
        return f.copy()
    # oversampled so that mass pushed past the cutoff is seen, not aliased
    M = angle_grid_size(2 * N)
    grid = angle_grid(ell, M)
    d0 = [g.at_zero_action() for g in delta]
    shift = np.stack([_to_grid(g.coeffs, N, M)[0] for g in d0])
    if all(g.real for g in delta):
        shift = shift.real
    x = (grid + shift).reshape(ell, -1)

    _, _, _, flat, nu_list = _modes(ell, N)
    E = np.exp(1j * (nu_list @ x)).T  # (G, nmodes)
    C = f.coeffs.reshape(f.coeffs.shape[0], -1)[:, flat].T  # (nmodes, K)

    dt = [g - g.taylor_part([0]) for g in delta]
    action_dependent = any(not g.is_zero() for g in dt)
    orders = monomials(ell, d) if action_dependent else monomials(ell, 0)

    out = FourierTaylorSeries.zeros(ell, N, d, real=f.real and all(g.real for g in delta))
    lost_total = 0.0
    powers = {}
    for m in orders:
        mult = np.ones(nu_list.shape[0], dtype=complex)
        for j in range(ell):
            if m[j]:
                mult *= (1j * nu_list[:, j]) ** m[j] / math.factorial(m[j])
        vals = (E @ (mult[:, None] * C)).T.reshape((C.shape[1],) + (M,) * ell)
        coeffs, lost = _from_grid(vals, N)
        term = FourierTaylorSeries(ell, N, d, coeffs, out.real)
        lost_total += lost
        if sum(m) == 0:
            out = out + term
            continue
        j = next(i for i in range(ell) if m[i])
        prev = m[:j] + (m[j] - 1,) + m[j + 1 :]
        powers[m] = dt[j] if sum(prev) == 0 else multiply(powers[prev], dt[j])
        out = out + multiply(term, powers[m])
    scale_ = l1_norm(f)
    if lost_total > tol * max(scale_, 1e-300):
        raise CompositionOverflow(
            f"angle composition discarded {lost_total:.3e} (relative {lost_total / scale_:.3e})"
        )
    if out.real:
        out = out.symmetrized()
    out.tail_bound += lost_total + f.tail_bound
    return out


# ----------------------------------------------------------------------------
# evaluation


def _monomial_values(A, mono):
    # A: (ell, P) -> (P, K)
    P = A.shape[1]
    out = np.ones((P, len(mono)), dtype=complex)
    for i, k in enumerate(mono):
        for j, kj in enumerate(k):
            if kj:
                out[:, i] *= A[j] ** kj
    return out


def evaluate(f, A, alpha):
    """Evaluate ``f`` at ``(A, alpha)``.

    ``A`` and ``alpha`` are vectors of length ``ell`` or arrays of shape
    ``(ell, P)``; the return value is a complex scalar or a length-``P``
    array accordingly.  Terms are accumulated in lexicographic ``(nu, k)``
    order.
    """
    A = np.asarray(A, dtype=complex)
    alpha = np.asarray(alpha, dtype=complex)
    scalar = A.ndim == 1
    A = A.reshape(f.ell, -1)
    alpha = alpha.reshape(f.ell, -1)
    _, _, _, flat, nu_list = _modes(f.ell, f.N)
    C = f.coeffs.reshape(f.coeffs.shape[0], -1)[:, flat]  # (K, nmodes)
    used = np.flatnonzero(np.any(C != 0, axis=0))
    if used.size == 0:
        res = np.zeros(A.shape[1], dtype=complex)
    else:
        E = np.exp(1j * (nu_list[used] @ alpha))  # (n, P)
        mono = _monomial_values(A, f.monomials)  # (P, K)
        res = np.einsum("kn,np,pk->p", C[:, used], E, mono)
    return complex(res[0]) if scalar else res


def grid_values(f, M=None):
    """Values on the uniform angle grid, shape ``(K, M, ..., M)`` (one slab per monomial)."""
    M = angle_grid_size(f.N) if M is None else M
    return _to_grid(f.coeffs, f.N, M)


def from_grid_values(values, N, d=0, real=True):
    """Inverse of :func:`grid_values`; returns the series and the dropped mass."""
    values = np.asarray(values, dtype=complex)
    coeffs, lost = _from_grid(values, N)
    out = FourierTaylorSeries(values.ndim - 1, N, d, coeffs, real, lost)
    return (out.symmetrized() if real else out), lost


# ----------------------------------------------------------------------------
# text dump


def dump_series(f, path_or_file):
    """Write ``ell N d`` then one ``nu.. k.. re im`` line per nonzero coefficient."""
    lines = [f"{f.ell} {f.N} {f.d}"]
    for nu, k, c in f.terms():
        ints = " ".join(str(x) for x in nu + k)
        lines.append(f"{ints} {c.real:.17g} {c.imag:.17g}")
    text = "\n".join(lines) + "\n"
    if hasattr(path_or_file, "write"):
        path_or_file.write(text)
    else:
        with open(path_or_file, "w", encoding="utf-8") as fh:
            fh.write(text)


def load_series(path_or_file):
    if hasattr(path_or_file, "read"):
        text = path_or_file.read()
    else:
        with open(path_or_file, encoding="utf-8") as fh:
            text = fh.read()
    rows = [ln.split() for ln in text.splitlines() if ln.strip()]
    if not rows or len(rows[0]) != 3:
        raise ValueError("series dump must start with 'ell N d'")
    ell, N, d = (int(x) for x in rows[0])
    terms = {}
    for lineno, row in enumerate(rows[1:], start=2):
        if len(row) != 2 * ell + 2:
            raise ValueError(f"line {lineno}: expected {2 * ell + 2} fields")
        nu = tuple(int(x) for x in row[:ell])
        k = tuple(int(x) for x in row[ell : 2 * ell])
        terms[(nu, k)] = complex(float(row[-2]), float(row[-1]))
    return FourierTaylorSeries.from_terms(ell, N, d, terms)
