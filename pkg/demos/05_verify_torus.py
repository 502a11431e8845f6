"""Check the computed torus three ways: invariance defect, flow conjugacy, Newton oracle."""
from pathlib import Path

from kamforge import driver as D
from kamforge import verifier as V
from kamforge.config import parse_config

cfg = parse_config(Path(__file__).resolve().parents[1] / "configs" / "golden_mean.ini")
H = cfg.hamiltonian()
trace, emb, _ = D.run(H, D.DriverConfig(max_steps=cfg.max_steps, target_eta=cfg.target_eta))

print("invariance defect:", f"{V.invariance_defect(H, emb).sup_defect:.3e}")
print("flow distance t=10:", f"{V.flow_conjugacy_test(H, emb, 10.0):.3e}")
print("rotation vector:  ", V.rotation_vector(H, emb).mean(axis=0))

mean = [emb.Delta_inf[j].coefficient((0, 0), (0, 0)).real for j in range(2)]
orc = V.oracle_newton_torus(H, H.freq, 10, angle_mean=mean)
print("oracle residual:  ", f"{orc.residual:.3e}")
print("coefficient gap:  ", f"{V.compare_embeddings(emb, orc, 8):.3e}")

bare = D.TorusEmbedding.zero(2, emb.N, H.omega)
print("defect of the unperturbed torus, for scale:", f"{V.invariance_defect(H, bare).sup_defect:.3e}")
