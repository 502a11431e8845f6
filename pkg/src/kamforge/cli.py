"""Command line front end: ``kamforge run|certify|verify|oracle``."""
from __future__ import annotations

import argparse
import json
import math
import sys
from pathlib import Path

import numpy as np

from . import driver as D
from . import series as S
from . import verifier as V
from .config import literal_gate, parse_config
from .errors import ConfigError, KamError, NotApplicable, Resonant

FORMAT_VERSION = 1
EXIT_OK, EXIT_ERROR, EXIT_NOT_APPLICABLE = 0, 1, 2
ORACLE_MAX_UNKNOWNS = 6000


def _clean(obj):
    """JSON-safe copy: numpy scalars to Python, non-finite floats to strings."""
    if isinstance(obj, dict):
        return {str(k): _clean(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_clean(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return _clean(obj.tolist())
    if isinstance(obj, (np.floating, float)):
        x = float(obj)
        return x if math.isfinite(x) else str(x)
    if isinstance(obj, np.integer):
        return int(obj)
    if isinstance(obj, complex):
        return [_clean(obj.real), _clean(obj.imag)]
    return obj


def write_json(path, obj):
    text = json.dumps(_clean(obj), sort_keys=True, indent=2, ensure_ascii=False, allow_nan=False) + "\n"
    Path(path).write_text(text, encoding="utf-8")


def dump_embedding(emb, directory):
    """Write ``Xi_j.txt``, ``Delta_j.txt`` (1-based ``j``) and ``embedding.json``."""
    directory = Path(directory)
    directory.mkdir(parents=True, exist_ok=True)
    for j in range(emb.ell):
        S.dump_series(emb.Xi_inf[j], directory / f"Xi_{j + 1}.txt")
        S.dump_series(emb.Delta_inf[j], directory / f"Delta_{j + 1}.txt")
    meta = {
        "format_version": FORMAT_VERSION,
        "ell": emb.ell,
        "N": emb.N,
        "a_inf": [float(x) for x in emb.a_inf],
        "omega": None if emb.omega is None else [float(x) for x in emb.omega],
        "history": [{"a": list(a), "correction": c} for a, c in emb.history
                    if isinstance(a, (tuple, list))],
    }
    write_json(directory / "embedding.json", meta)


def load_embedding(directory):
    directory = Path(directory)
    meta = json.loads((directory / "embedding.json").read_text(encoding="utf-8"))
    ell = meta["ell"]
    Xi = [S.load_series(directory / f"Xi_{j + 1}.txt") for j in range(ell)]
    De = [S.load_series(directory / f"Delta_{j + 1}.txt") for j in range(ell)]
    omega = None if meta.get("omega") is None else np.array(meta["omega"], dtype=float)
    hist = [(tuple(h["a"]), h["correction"]) for h in meta.get("history", [])]
    return D.TorusEmbedding(np.array(meta["a_inf"], dtype=float), Xi, De, hist, omega)


def _verification(H, emb, cfg):
    v = cfg.verify
    out = {"defect": V.invariance_defect(H, emb).to_dict()}
    out["flow_distance"] = V.flow_conjugacy_test(H, emb, v.t_final, v.integrator_tol, v.samples, seed=cfg.seeds[0])
    out["flow_t_final"] = v.t_final
    rot = V.rotation_vector(H, emb, integrator_tol=v.integrator_tol, seed=cfg.seeds[0])
    out["rotation_vector"] = rot.mean(axis=0)
    out["rotation_relative_error"] = float(np.max(np.abs(rot - H.omega)) / np.max(np.abs(H.omega)))
    unknowns = 2 * H.ell * (2 * v.oracle_cutoff + 1) ** H.ell
    if v.oracle and unknowns <= ORACLE_MAX_UNKNOWNS:
        mean = [emb.Delta_inf[j].coefficient((0,) * H.ell, (0,) * H.ell).real for j in range(H.ell)]
        orc = V.oracle_newton_torus(H, H.freq, v.oracle_cutoff, cfg.tolerances.oracle, angle_mean=mean)
        order = min(8, v.oracle_cutoff, emb.N)
        out["oracle"] = {
            "cutoff": v.oracle_cutoff,
            "residual": orc.residual,
            "max_coefficient_gap": V.compare_embeddings(emb, orc, order),
            "compared_order": order,
        }
    return out


def cmd_run(cfg, out, args):
    out.mkdir(parents=True, exist_ok=True)
    H = cfg.hamiltonian()
    dcfg = D.DriverConfig(
        max_steps=args.max_steps if args.max_steps is not None else cfg.max_steps,
        target_eta=args.target_eta if args.target_eta is not None else cfg.target_eta,
        tolerances=cfg.tolerances,
    )
    report = {"format_version": FORMAT_VERSION, "command": "run"}
    try:
        trace, emb, _ = D.run(H, dcfg)
    except NotApplicable as exc:
        report.update(certificate=exc.certificate.to_dict(), stop_reason="NotApplicable",
                      trace={"steps": 0, "failure": str(exc)})
        write_json(out / "report.json", report)
        print(f"not applicable: {exc}", file=sys.stderr)
        return EXIT_NOT_APPLICABLE

    report["certificate"] = trace.certificates[0].to_dict()
    report["step_certificates"] = [c.to_dict() for c in trace.certificates[1:]]
    report["trace"] = trace.summary()
    report["stop_reason"] = trace.stop_reason.value
    report["step_reports"] = [r.to_dict() for r in trace.step_reports]
    gate = literal_gate(cfg, trace.states[0].eta_n, trace.states[0].delta_n)
    if gate is not None:
        report["literal_gate"] = {"gamma9": cfg.gamma9, "c9": cfg.c9, "lhs": gate, "pass": gate < 1}
    if len(trace.states) >= 4:
        ok, fitted = D.check_superexponential(trace, 0.25)
        report["convergence"] = {"superexponential_mu_0_25": ok, **fitted}
    D.trace_to_csv(trace, out / "trace.csv")
    dump_embedding(emb, out / "torus")
    if trace.stop_reason in (D.StopReason.TargetReached, D.StopReason.MaxSteps):
        report["verification"] = _verification(H, emb, cfg)
        code = EXIT_OK
    else:
        print(f"stopped: {trace.stop_reason.value}: {trace.failure}", file=sys.stderr)
        code = EXIT_NOT_APPLICABLE
    write_json(out / "report.json", report)
    print(json.dumps({"stop_reason": trace.stop_reason.value, "steps": len(trace.step_reports),
                      "final_eta": _clean(trace.states[-1].eta_n)}))
    return code


def cmd_certify(cfg, out, args):
    H = cfg.hamiltonian()
    cert = D.certify(H)
    print(cert.to_json())
    return EXIT_OK if cert.overall else EXIT_NOT_APPLICABLE


def cmd_verify(cfg, out, args):
    H = cfg.hamiltonian()
    emb = load_embedding(args.torus or out / "torus")
    rep = V.invariance_defect(H, emb)
    result = {"format_version": FORMAT_VERSION, "verification": {"defect": rep.to_dict()}}
    if args.flow:
        v = cfg.verify
        result["verification"]["flow_distance"] = V.flow_conjugacy_test(
            H, emb, v.t_final, v.integrator_tol, v.samples, seed=cfg.seeds[0])
    print(json.dumps(_clean(result), sort_keys=True))
    return EXIT_OK


def cmd_oracle(cfg, out, args):
    H = cfg.hamiltonian()
    emb = V.oracle_newton_torus(H, H.freq, cfg.verify.oracle_cutoff, cfg.tolerances.oracle)
    dump_embedding(emb, out / "oracle")
    result = {"format_version": FORMAT_VERSION, "residual": emb.residual,
              "newton_iterations": len(emb.history) - 1, "a_inf": emb.a_inf}
    print(json.dumps(_clean(result), sort_keys=True))
    return EXIT_OK


COMMANDS = {"run": cmd_run, "certify": cmd_certify, "verify": cmd_verify, "oracle": cmd_oracle}


def build_parser():
    p = argparse.ArgumentParser(prog="kamforge", description="Renormalization-group KAM torus engine.")
    p.add_argument("command", choices=sorted(COMMANDS))
    p.add_argument("--config", required=True, help="run configuration (INI)")
    p.add_argument("--out", default="out", help="output directory (default: out)")
    p.add_argument("--max-steps", type=int, default=None)
    p.add_argument("--target-eta", type=float, default=None)
    p.add_argument("--torus", default=None, help="embedding directory for verify (default: <out>/torus)")
    p.add_argument("--flow", action="store_true", help="verify: also run the flow conjugacy test")
    return p


def main(argv=None):
    args = build_parser().parse_args(argv)
    try:
        cfg = parse_config(args.config)
        return COMMANDS[args.command](cfg, Path(args.out), args)
    except ConfigError as exc:
        where = f" (line {exc.line})" if exc.line else ""
        print(f"config error in {exc.field}{where}: {exc}", file=sys.stderr)
        return EXIT_ERROR
    except (NotApplicable, Resonant) as exc:
        print(f"not applicable: {exc}", file=sys.stderr)
        return EXIT_NOT_APPLICABLE
    except (KamError, OSError, ValueError) as exc:
        print(f"error: {type(exc).__name__}: {exc}", file=sys.stderr)
        return EXIT_ERROR


if __name__ == "__main__":
    sys.exit(main())
