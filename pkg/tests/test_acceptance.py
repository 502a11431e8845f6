"""Acceptance criteria, one marker per criterion; a PASS/FAIL line per criterion is printed at the end."""
import filecmp
import math
import subprocess
import sys
from pathlib import Path

import numpy as np
import pytest

from kamforge import cli
from kamforge import driver as D
from kamforge import series as S
from kamforge import verifier as V
from kamforge.certificate import check_initial
from kamforge.config import format_config, parse_config
from kamforge.step import build_generating, kolmogorov_step, solve_shift, verify_cancellation

from conftest import KAPPA0, coupled_f, golden_f

CONFIG = Path(__file__).resolve().parents[1] / "configs" / "golden_mean.ini"
EPS0 = 1e-4


def report(label, ok, detail):
    print(f"{'PASS' if ok else 'FAIL'} {label}: {detail}")


# 1 -------------------------------------------------------------------------

C1 = pytest.mark.criterion(1, "quadratic convergence law on the golden-mean fixture")


@C1
def test_c1_run_completes_four_steps(golden_run):
    trace, _, _ = golden_run
    steps = len(trace.step_reports)
    report("c1 steps", steps >= 4, f"{steps} steps, stop={trace.stop_reason.value}")
    assert trace.stop_reason is D.StopReason.TargetReached
    assert steps >= 4


@C1
def test_c1_quadratic_law_fitted_on_first_two_steps(golden_run):
    trace, _, _ = golden_run
    law = D.fit_quadratic_law(trace.etas, trace.deltas, fit=(0, 1))
    later = law["holds"][2:]
    report("c1 quadratic law", all(later),
           f"K={law['K']:.4g} c={law['c']:.3g} ratios={['%.3g' % r for r in law['ratios']]} "
           f"orders={['%.4f' % o for o in law['orders']]}")
    assert len(later) >= 1
    assert all(later), (
        f"eta_(n+1) <= K eta_n^2 delta_n^-c violated: ratios {law['ratios']} exceed K={law['K']:.4g}; "
        f"measured orders log eta_(n+1)/log eta_n = {law['orders']}"
    )


@C1
def test_c1_superexponential_mu_quarter(golden_run):
    trace, _, _ = golden_run
    ok, fitted = D.check_superexponential(trace, 0.25)
    report("c1 superexponential", ok, f"slope={fitted['slope']:.4f} growth={fitted['growth']:.4f}")
    assert ok


# 2 -------------------------------------------------------------------------

C2 = pytest.mark.criterion(2, "first-remainder cancellation")


@C2
def test_c2_cancellation_residual_at_step_zero(golden_H):
    H = golden_H
    a = solve_shift(H.f.average(), H.J, H.dom)
    res = verify_cancellation(H, a, build_generating(H, a))
    report("c2 J=1", res <= 1e-10 * EPS0, f"residual={res:.3e} bound={1e-10 * EPS0:.1e}")
    assert res <= 1e-10 * EPS0


@C2
def test_c2_cancellation_vanishes_without_twist(make_hamiltonian):
    H = make_hamiltonian(golden_f(EPS0), J=0.0)
    a = np.zeros(2)
    res = verify_cancellation(H, a, build_generating(H, a))
    bound = 16 * np.finfo(float).eps * EPS0
    report("c2 J=0", res <= bound, f"residual={res:.3e} rounding bound={bound:.1e}")
    assert res <= bound


# 3 -------------------------------------------------------------------------

C3 = pytest.mark.criterion(3, "integrable warm-up collapses in one step")


@C3
def test_c3_integrable_one_step(make_hamiltonian):
    f = S.FourierTaylorSeries.from_terms(2, 12, 4, {((1, 0), (0, 0)): 0.005, ((-1, 0), (0, 0)): 0.005})
    H = make_hamiltonian(f, J=0.0)
    state = D.IterationState.measure(0, H, KAPPA0)
    res = kolmogorov_step(H, state)
    eps0, eps1 = state.eps_n, res.report.eps_new
    ok = eps1 <= 1e-9 * eps0
    report("c3", ok, f"eps0={eps0:.3e} eps1={eps1:.3e}")
    assert ok


# 4 -------------------------------------------------------------------------

C4 = pytest.mark.criterion(4, "torus correctness")


@C4
def test_c4_invariance_defect(golden_H, golden_run):
    _, emb, _ = golden_run
    rep = V.invariance_defect(golden_H, emb)
    report("c4 defect", rep.sup_defect <= 1e-8, f"sup defect={rep.sup_defect:.3e}")
    assert rep.sup_defect <= 1e-8


@C4
def test_c4_flow_conjugacy(golden_H, golden_run):
    _, emb, _ = golden_run
    dist = V.flow_conjugacy_test(golden_H, emb, t_final=10.0, integrator_tol=1e-12, samples=8)
    report("c4 flow", dist <= 1e-6, f"distance at t=10: {dist:.3e}")
    assert dist <= 1e-6


@C4
def test_c4_oracle_agreement(golden_H, golden_run):
    _, emb, _ = golden_run
    mean = [emb.Delta_inf[j].coefficient((0, 0), (0,)).real for j in range(2)]
    orc = V.oracle_newton_torus(golden_H, golden_H.freq, 10, tol=1e-12, angle_mean=mean)
    gap = V.compare_embeddings(emb, orc, 8)
    report("c4 oracle", gap <= 1e-8 and orc.residual < 1e-12,
           f"max gap |nu|<=8: {gap:.3e}, oracle residual {orc.residual:.3e}")
    assert orc.residual < 1e-12
    assert gap <= 1e-8


# 5 -------------------------------------------------------------------------

C5 = pytest.mark.criterion(5, "quadratic smallness of remainders T2 and T3")


@C5
def test_c5_remainder_scaling(make_hamiltonian):
    lams = (1.0, 0.5, 0.25)
    norms = []
    for lam in lams:
        H = make_hamiltonian(coupled_f(EPS0 * lam))
        state = D.IterationState.measure(0, H, KAPPA0)
        norms.append(kolmogorov_step(H, state).report.term_sup_norms)
    norms = np.array(norms)
    x = np.log(lams)
    for idx, label in ((1, "(2)"), (2, "(3)")):
        slope = np.polyfit(x, np.log(norms[:, idx]), 1)[0]
        pair = np.log(norms[:-1, idx] / norms[1:, idx]) / np.log(2.0)
        ok = abs(slope - 2.0) <= 0.2 and np.all(np.abs(pair - 2.0) <= 0.2)
        report(f"c5 term {label}", ok, f"fitted exponent {slope:.3f}, pairwise {np.round(pair, 3).tolist()}")
        assert abs(slope - 2.0) <= 0.2
        assert np.all(np.abs(pair - 2.0) <= 0.2)


# 6 -------------------------------------------------------------------------

C6 = pytest.mark.criterion(6, "dimensional estimates on random series")


def random_series(rng, ell=2, N=4, d=3, nterms=10):
    terms = {}
    mono = S.monomials(ell, d)
    for _ in range(nterms):
        nu = tuple(int(x) for x in rng.integers(-2, 3, size=ell))
        while sum(abs(x) for x in nu) > N:
            nu = tuple(int(x) for x in rng.integers(-2, 3, size=ell))
        k = mono[rng.integers(len(mono))]
        c = complex(rng.normal(), rng.normal())
        terms[(nu, k)] = terms.get((nu, k), 0) + c
        neg = (tuple(-x for x in nu), k)
        if neg[0] != nu:
            terms[neg] = terms.get(neg, 0) + np.conj(c)
        else:
            terms[(nu, k)] = terms[(nu, k)].real
    return S.FourierTaylorSeries.from_terms(ell, N, d, terms)


@C6
def test_c6_cauchy_and_fourier_decay():
    rng = np.random.default_rng(6)
    worst = 0.0
    for _ in range(100):
        f = random_series(rng)
        rho, kappa = rng.uniform(0.1, 1.0), rng.uniform(0.05, 0.7)
        dom = S.PolydiskDomain(2, rho, kappa)
        norm = S.majorant_norm(f, dom)
        assert S.fourier_decay_check(f, dom)
        for frac in (0.5, 0.75):
            inner = dom.shrink(rho=frac * rho)
            for j in range(2):
                lhs = S.majorant_norm(S.partial_A(f, j), inner)
                rhs = S.cauchy_bound(norm, 1, rho - frac * rho)
                worst = max(worst, lhs / rhs if rhs else 0.0)
                assert lhs <= rhs * (1 + 1e-12)
                lhs2 = S.majorant_norm(S.partial_A(S.partial_A(f, j), j), inner)
                assert lhs2 <= S.cauchy_bound(norm, 2, rho - frac * rho) * (1 + 1e-12)
            kin = dom.shrink(kappa=frac * kappa)
            for j in range(2):
                lhs = S.majorant_norm(S.partial_alpha(f, j), kin)
                assert lhs <= S.cauchy_bound(norm, 1, kappa - frac * kappa) * (1 + 1e-12)
    report("c6 cauchy/decay", True, f"100 series, worst Cauchy ratio {worst:.3f}")


@C6
def test_c6_majorant_domination():
    rng = np.random.default_rng(66)
    worst = 0.0
    for _ in range(100):
        f = random_series(rng)
        rho, kappa = rng.uniform(0.1, 1.0), rng.uniform(0.05, 0.7)
        dom = S.PolydiskDomain(2, rho, kappa)
        r = rho * np.sqrt(rng.uniform(0, 1, 2))
        A = r * np.exp(2j * np.pi * rng.uniform(0, 1, 2))
        alpha = rng.uniform(0, 2 * np.pi, 2) + 1j * rng.uniform(-kappa, kappa, 2)
        val = abs(S.evaluate(f, A, alpha))
        bound = S.majorant_norm(f, dom)
        worst = max(worst, val / bound)
        assert val <= bound * (1 + 1e-12)
    report("c6 domination", True, f"100 pairs, worst |f|/majorant {worst:.3f}")


# 7 -------------------------------------------------------------------------

C7 = pytest.mark.criterion(7, "initial gates and certify exit codes")


def _config_variant(tmp_path, name, **changes):
    cfg = parse_config(CONFIG)
    for k, v in changes.items():
        setattr(cfg, k, v)
    path = tmp_path / f"{name}.ini"
    path.write_text(format_config(cfg), encoding="utf-8")
    return path, cfg


@C7
def test_c7_gate_arithmetic_examples():
    theta = check_initial(1.0, 0.5, 0.6, 1.0, 0.05)
    kappa = check_initial(1.0, 0.5, 0.8, 1.0, 1e-4)
    ok_case = check_initial(1.0, 0.5, 0.6, 1.0, 1e-4)
    report("c7 arithmetic", (not theta.overall) and (not kappa.overall) and ok_case.overall,
           f"theta0={theta['shift_solubility'].lhs:.3g}, exp(0.8)={kappa['strip_width'].lhs:.4f}")
    assert ok_case.overall
    assert theta.first_failure.name == "shift_solubility"
    assert theta["shift_solubility"].lhs == pytest.approx(0.1)
    assert kappa.first_failure.name == "strip_width"
    assert kappa["strip_width"].lhs == pytest.approx(math.exp(0.8))


@C7
@pytest.mark.parametrize(
    "name,changes",
    [
        ("golden", {}),
        ("theta", {"eps_scale": 0.05}),
        ("theta_edge_ok", {"eps_scale": 2e-3}),
        ("kappa", {"kappa0": 0.8}),
        ("kappa_edge_ok", {"kappa0": 0.69}),
        ("twist", {"J": 2.5}),
        ("small_rho", {"rho0": 0.1, "eps_scale": 1e-5}),
    ],
)
def test_c7_certify_exit_code_iff_gate_fails(tmp_path, capsys, name, changes):
    path, cfg = _config_variant(tmp_path, name, **changes)
    H = cfg.hamiltonian()
    eps0 = S.epsilon_norm(H.f, H.dom).epsilon
    expected = check_initial(H.freq.C0, cfg.rho0, cfg.kappa0, cfg.J, eps0)
    code = cli.main(["certify", "--config", str(path)])
    capsys.readouterr()
    want = 0 if expected.overall else 2
    failing = expected.first_failure.name if expected.first_failure else None
    report(f"c7 certify {name}", code == want, f"exit {code}, first failing gate {failing}")
    assert code == want


# 8 -------------------------------------------------------------------------

C8 = pytest.mark.criterion(8, "schedule soundness")


@C8
def test_c8_kappa_stays_above_half():
    kappa0 = KAPPA0
    n_max = 10**6
    m = np.arange(n_max + 1, dtype=float)
    kappas = kappa0 * (1 - 4 * np.cumsum((m + 10) ** -2))
    tail = 4 * (np.sum((m + 10) ** -2) - np.cumsum((m + 10) ** -2))
    ok = bool(np.all(kappas > kappa0 / 2))
    report("c8 kappa_n > kappa0/2", ok, f"min over n<=1e6: {kappas.min() / kappa0:.6f} kappa0")
    assert ok
    assert np.all(tail < 4 / (m + 10))
    for n in (0, 1, 7, 123, 4567):
        assert D.schedule(n, kappa0)[1] == pytest.approx(kappas[n], rel=1e-13)
    assert kappas[-1] > D.kappa_limit(kappa0) > kappa0 / 2


@C8
def test_c8_first_width_exact():
    ok = all(D.schedule(0, k)[1] == 0.96 * k for k in (0.6, 0.5, 1.0, 0.3))
    report("c8 kappa_1", ok, f"kappa_1 = {D.schedule(0, KAPPA0)[1]!r} for kappa0 = {KAPPA0}")
    assert D.schedule(0, KAPPA0) == (KAPPA0 / 100, 0.96 * KAPPA0)
    assert ok


# 9 -------------------------------------------------------------------------

C9 = pytest.mark.criterion(9, "determinism")


@C9
def test_c9_repeated_runs_byte_identical(tmp_path):
    outs = []
    for i in range(2):
        out = tmp_path / f"run{i}"
        proc = subprocess.run(
            [sys.executable, "-m", "kamforge.cli", "run", "--config", str(CONFIG), "--out", str(out)],
            capture_output=True, text=True, timeout=300,
        )
        assert proc.returncode == 0, proc.stderr
        outs.append(out)
    files = ["trace.csv", "report.json"] + [f"torus/{n}" for n in
                                            ("Xi_1.txt", "Xi_2.txt", "Delta_1.txt", "Delta_2.txt", "embedding.json")]
    same = {f: filecmp.cmp(outs[0] / f, outs[1] / f, shallow=False) for f in files}
    report("c9", all(same.values()), ", ".join(f"{k}={'same' if v else 'DIFF'}" for k, v in same.items()))
    assert all(same.values())
