"""Small divisors and the Diophantine constant of a frequency vector."""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import Resonant, ZeroMode

RESONANCE_RTOL = 1e-14
SAFETY = 1.01


@dataclass(frozen=True)
class FrequencyVector:
    """Frequency vector with a Diophantine constant checked up to ``verified_cutoff``.

    For every ``0 < |nu|_1 <= verified_cutoff`` the bound
    ``1 / |omega . nu| < C0 * |nu|**exponent`` holds.
    """

    omega: tuple
    C0: float
    exponent: float
    verified_cutoff: int

    def __post_init__(self):
        object.__setattr__(self, "omega", tuple(float(w) for w in self.omega))

    @property
    def ell(self):
        return len(self.omega)

    @property
    def vector(self):
        return np.array(self.omega)

    def divisor(self, nu):
        return small_divisor(self.omega, nu)


def small_divisor(omega, nu):
    """``omega . nu`` for a nonzero integer vector ``nu``."""
    nu = np.asarray(nu)
    if not np.any(nu):
        raise ZeroMode("small divisor undefined for nu = 0")
    return float(np.dot(np.asarray(omega, dtype=float), nu))


def lattice_shell(ell, cutoff):
    """All integer vectors with ``0 < |nu|_1 <= cutoff``, lexicographically ordered."""
    axes = np.meshgrid(*([np.arange(-cutoff, cutoff + 1)] * ell), indexing="ij")
    nus = np.stack([a.ravel() for a in axes], axis=1)
    l1 = np.abs(nus).sum(axis=1)
    return nus[(l1 > 0) & (l1 <= cutoff)]


def is_resonant(omega, nu):
    omega = np.asarray(omega, dtype=float)
    nu = np.asarray(nu)
    scale = np.max(np.abs(omega)) * np.abs(nu).sum()
    return abs(float(omega @ nu)) <= RESONANCE_RTOL * scale


def estimate_C0(omega, cutoff, exponent=None):
    """Smallest Diophantine constant valid up to ``cutoff``, with a 1% margin.

    Parameters
    ----------
    omega : array_like
        Frequencies, length ``ell``.
    cutoff : int
        Largest ``|nu|_1`` scanned exhaustively.
    exponent : float, optional
        Defaults to ``ell``.

    Returns
    -------
    FrequencyVector

    Raises
    ------
    Resonant
        If ``omega . nu`` vanishes (relative to ``|omega| |nu|``) for some
        scanned ``nu``.
    """
    omega = np.asarray(omega, dtype=float).ravel()
    if cutoff < 1:
        raise ValueError("cutoff must be >= 1")
    ell = omega.size
    exponent = float(ell if exponent is None else exponent)
    nus = lattice_shell(ell, cutoff)
    dots = np.abs(nus @ omega)
    l1 = np.abs(nus).sum(axis=1)
    bad = dots <= RESONANCE_RTOL * np.max(np.abs(omega)) * l1
    if np.any(bad):
        nu = tuple(int(x) for x in nus[np.argmax(bad)])
        raise Resonant(f"omega is resonant at nu={nu}", nu=nu)
    worst = np.max(1.0 / (dots * l1.astype(float) ** exponent))
    return FrequencyVector(tuple(omega), SAFETY * float(worst), exponent, int(cutoff))


def verify_diophantine(freq, cutoff=None):
    """Independent re-scan of the Diophantine inequality; returns the worst ratio (< 1 passes)."""
    cutoff = freq.verified_cutoff if cutoff is None else cutoff
    omega = freq.vector
    worst = 0.0
    for nu in lattice_shell(freq.ell, cutoff):
        lhs = 1.0 / abs(float(np.dot(omega, nu)))
        rhs = freq.C0 * float(np.abs(nu).sum()) ** freq.exponent
        worst = max(worst, lhs / rhs)
    return worst
