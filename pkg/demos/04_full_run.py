"""Iterate to the target and inspect the convergence of eta_n."""
import math

from kamforge import driver as D
from kamforge.config import parse_config
from pathlib import Path

cfg = parse_config(Path(__file__).resolve().parents[1] / "configs" / "golden_mean.ini")
H = cfg.hamiltonian()
print("certificate:", D.certify(H).to_json())
trace, emb, maps = D.run(H, D.DriverConfig(max_steps=cfg.max_steps, target_eta=cfg.target_eta))
print("stop:", trace.stop_reason.value)
for s in trace.states:
    print(f"  n={s.n}  eta={s.eta_n:.3e}  theta={s.theta_n:.3e}  rho={s.rho_n:.3e}  kappa={s.kappa_n:.4f}")
ok, fitted = D.check_superexponential(trace, 0.25)
print("superexponential (mu = 1/4):", ok, f"growth={fitted['growth']:.3f}")
etas = trace.etas
print("orders:", [round(math.log(b) / math.log(a), 4) for a, b in zip(etas, etas[1:])])
print("torus action offset a_inf =", emb.a_inf)
