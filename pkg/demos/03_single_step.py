"""One renormalization step on the golden-mean Hamiltonian."""
import math

from kamforge import driver as D
from kamforge import series as S
from kamforge.diophantine import estimate_C0
from kamforge.step import Hamiltonian, kolmogorov_step

phi = (1 + math.sqrt(5)) / 2
eps = 1e-4
f = S.FourierTaylorSeries.from_terms(2, 12, 4, {
    ((1, 0), (0, 0)): eps / 2, ((-1, 0), (0, 0)): eps / 2,
    ((1, -1), (0, 0)): eps / 2, ((-1, 1), (0, 0)): eps / 2,
})
H = Hamiltonian(1.0, estimate_C0([1.0, phi], 40), f, S.PolydiskDomain(2, 0.5, 0.6))
state = D.IterationState.measure(0, H, 0.6)
print("before:", f"eta={state.eta_n:.3e} theta={state.theta_n:.3e} delta={state.delta_n:.4f}")

res = kolmogorov_step(H, state)
rep = res.report
print("remainder eps-norms      ", ", ".join(f"{x:.3e}" for x in rep.term_norms))
print("cancellation residual    ", f"{rep.cancellation_residual:.3e}")
print("injectivity margin       ", f"{rep.injectivity_margin:.6f}")
after = D.IterationState.measure(1, res.H, 0.6)
print("after: ", f"eta={after.eta_n:.3e} rho={after.rho_n:.3e} kappa={after.kappa_n:.4f}")
print("order log eta1 / log eta0 =", math.log(after.eta_n) / math.log(state.eta_n))
