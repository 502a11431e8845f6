"""Adaptive Dormand-Prince 5(4) integrator for batches of trajectories."""
from __future__ import annotations

import numpy as np

from .errors import IntegrationFailed

_C = np.array([0.0, 1 / 5, 3 / 10, 4 / 5, 8 / 9, 1.0, 1.0])
_A = [
    [],
    [1 / 5],
    [3 / 40, 9 / 40],
    [44 / 45, -56 / 15, 32 / 9],
    [19372 / 6561, -25360 / 2187, 64448 / 6561, -212 / 729],
    [9017 / 3168, -355 / 33, 46732 / 5247, 49 / 176, -5103 / 18656],
    [35 / 384, 0.0, 500 / 1113, 125 / 192, -2187 / 6784, 11 / 84],
]
_B = np.array([35 / 384, 0.0, 500 / 1113, 125 / 192, -2187 / 6784, 11 / 84, 0.0])
_B4 = np.array([5179 / 57600, 0.0, 7571 / 16695, 393 / 640, -92097 / 339200, 187 / 2100, 1 / 40])
_E = _B - _B4

SAFETY = 0.9
MIN_FACTOR = 0.2
MAX_FACTOR = 5.0


def dopri5(rhs, t0, y0, t1, atol=1e-12, rtol=1e-12, h0=None, max_steps=1_000_000):
    """Integrate ``y' = rhs(t, y)`` from ``t0`` to ``t1``; returns ``(y(t1), steps)``.

    ``y0`` may have any shape; the error norm is the max over all entries,
    so a batch of trajectories shares one step sequence.
    """
    y = np.array(y0, dtype=float)
    t = float(t0)
    t1 = float(t1)
    if t1 == t:
        return y, 0
    direction = 1.0 if t1 > t else -1.0
    k1 = np.asarray(rhs(t, y), dtype=float)
    if h0 is None:
        scale = atol + rtol * np.abs(y)
        d0 = np.max(np.abs(y) / scale)
        d1 = np.max(np.abs(k1) / scale)
        h0 = 1e-6 if d0 < 1e-5 or d1 < 1e-5 else 0.01 * d0 / d1
        h0 = min(h0, abs(t1 - t))
    h = direction * abs(h0)
    steps = 0
    while direction * (t1 - t) > 0:
        if steps >= max_steps:
            raise IntegrationFailed(f"step budget exhausted at t={t:.6g}")
        if direction * (t + h - t1) > 0:
            h = t1 - t
        ks = [k1]
        for i in range(1, 7):
            yi = y + h * sum(a * k for a, k in zip(_A[i], ks) if a != 0.0)
            ks.append(np.asarray(rhs(t + _C[i] * h, yi), dtype=float))
        y_new = y + h * sum(b * k for b, k in zip(_B, ks) if b != 0.0)
        err = h * sum(e * k for e, k in zip(_E, ks) if e != 0.0)
        scale = atol + rtol * np.maximum(np.abs(y), np.abs(y_new))
        en = float(np.max(np.abs(err) / scale))
        if not np.isfinite(en):
            raise IntegrationFailed(f"non-finite state at t={t:.6g}")
        if en <= 1.0:
            t = t + h
            y = y_new
            k1 = ks[6]  # first-same-as-last
            steps += 1
            factor = MAX_FACTOR if en == 0 else min(MAX_FACTOR, SAFETY * en ** (-0.2))
        else:
            factor = max(MIN_FACTOR, SAFETY * en ** (-0.2))
        h = h * factor
        if abs(h) < 1e-14 * max(1.0, abs(t)):
            raise IntegrationFailed(f"step size underflow at t={t:.6g}")
    return y, steps
