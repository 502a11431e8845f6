"""Diophantine constants for the golden mean and a resonant frequency."""
import math

from kamforge.diophantine import estimate_C0, verify_diophantine
from kamforge.errors import Resonant

phi = (1 + math.sqrt(5)) / 2
for cutoff in (5, 20, 80):
    freq = estimate_C0([1.0, phi], cutoff)
    print(f"cutoff {cutoff:3d}: C0 = {freq.C0:.6f}, worst ratio {verify_diophantine(freq):.4f}")

try:
    estimate_C0([1.0, 1.0], 10)
except Resonant as exc:
    print("resonant:", exc, exc.nu)
