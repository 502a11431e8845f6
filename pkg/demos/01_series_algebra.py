"""Build a Fourier-Taylor series, take derivatives, multiply and measure norms."""
import numpy as np

from kamforge import series as S
from kamforge.series import FourierTaylorSeries as F
from kamforge.series import PolydiskDomain

# f(A, alpha) = (1 + A1) cos(alpha1) on a 2-torus, Fourier cutoff 6, Taylor degree 3
f = F.from_terms(2, 6, 3, {((1, 0), (0, 0)): 0.5, ((-1, 0), (0, 0)): 0.5,
                           ((1, 0), (1, 0)): 0.5, ((-1, 0), (1, 0)): 0.5})
dom = PolydiskDomain(2, rho=0.5, kappa=0.3)
print(f)
print("majorant norm      ", S.majorant_norm(f, dom))
print("epsilon norm       ", S.epsilon_norm(f, dom))

g = S.multiply(f, S.partial_alpha(f, 0))
print("f * d_alpha1 f has", len(g.terms()), "terms; tail", g.tail_bound)

A, alpha = np.array([0.1, 0.0]), np.array([0.3, 1.2])
print("f(A, alpha)        ", S.evaluate(f, A, alpha).real, "vs", (1 + 0.1) * np.cos(0.3))

shifted = S.compose_angle(f, [F.constant(0.2, 2, 6, 3), F.zeros(2, 6, 3)])
print("f(A, alpha + 0.2)  ", S.evaluate(shifted, A, alpha).real, "vs", (1 + 0.1) * np.cos(0.5))
