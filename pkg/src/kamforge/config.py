"""Run configuration: an INI file with ``[run]``, ``[tolerances]``, ``[verify]`` and ``[mode.*]`` sections.

Example::

    [run]
    ell = 2
    omega = 1.0, 1.618033988749895
    J = 1.0
    rho0 = 0.5
    kappa0 = 0.6
    fourier_cutoff = 12
    taylor_degree = 4
    eps_scale = 1e-4
    diophantine_cutoff = 40

    [mode.a]
    nu = 1, 0
    terms = 0 0 0.5 0.0

Each ``terms`` entry is ``k_1 .. k_ell re im`` and entries are separated
by ``;``.  A mode ``nu`` without its partner ``-nu`` gets the complex
conjugate filled in; if both are given they must be conjugate.
"""
from __future__ import annotations

import configparser
import math
import re
from dataclasses import dataclass, field

import numpy as np

from .diophantine import estimate_C0
from .errors import ConfigError
from .series import FourierTaylorSeries, PolydiskDomain
from .step import Hamiltonian, Tolerances

RUN_KEYS = {
    "ell": int,
    "omega": "floats",
    "j": float,
    "rho0": float,
    "kappa0": float,
    "fourier_cutoff": int,
    "taylor_degree": int,
    "eps_scale": float,
    "max_steps": int,
    "target_eta": float,
    "diophantine_cutoff": int,
    "seeds": "ints",
    "gamma9": float,
    "c9": float,
}
RUN_REQUIRED = ("ell", "omega", "j", "rho0", "kappa0", "fourier_cutoff", "taylor_degree", "diophantine_cutoff")
TOL_KEYS = ("shift", "inversion", "composition", "oracle")
VERIFY_KEYS = {"t_final": float, "integrator_tol": float, "samples": int, "oracle_cutoff": int, "oracle": "bool"}
MODE_KEYS = ("nu", "terms")


@dataclass
class VerifySettings:
    t_final: float = 10.0
    integrator_tol: float = 1e-12
    samples: int = 8
    oracle_cutoff: int = 10
    oracle: bool = True


@dataclass
class RunConfig:
    ell: int
    omega: tuple
    J: float
    rho0: float
    kappa0: float
    fourier_cutoff: int
    taylor_degree: int
    perturbation: list
    eps_scale: float = 1.0
    max_steps: int = 10
    target_eta: float = 1e-25
    tolerances: Tolerances = field(default_factory=Tolerances)
    diophantine_cutoff: int = 40
    seeds: tuple = (0,)
    verify: VerifySettings = field(default_factory=VerifySettings)
    gamma9: float | None = None
    c9: float | None = None

    def perturbation_series(self):
        ell, N, d = self.ell, self.fourier_cutoff, self.taylor_degree
        terms = {}
        for nu, entries in self.perturbation:
            for k, c in entries:
                terms[(nu, k)] = terms.get((nu, k), 0) + self.eps_scale * c
        return FourierTaylorSeries.from_terms(ell, N, d, terms, real=True)

    def frequency(self):
        return estimate_C0(self.omega, self.diophantine_cutoff)

    def hamiltonian(self):
        dom = PolydiskDomain(self.ell, self.rho0, self.kappa0)
        return Hamiltonian(self.J, self.frequency(), self.perturbation_series(), dom)


def _line_of(text, section, key=None):
    """1-based line of ``[section]`` or of ``key`` inside it (0 if not found)."""
    current = None
    for i, raw in enumerate(text.splitlines(), start=1):
        line = raw.strip()
        m = re.match(r"\[(.+)\]$", line)
        if m:
            current = m.group(1).strip()
            if key is None and current == section:
                return i
            continue
        if key is not None and current == section:
            name = re.split(r"[=:]", line, maxsplit=1)[0].strip().lower()
            if name == key:
                return i
    return 0


def _convert(kind, value):
    if kind == "floats":
        return tuple(float(x) for x in value.replace(",", " ").split())
    if kind == "ints":
        return tuple(int(x) for x in value.replace(",", " ").split())
    if kind == "bool":
        v = value.strip().lower()
        if v in ("1", "true", "yes", "on"):
            return True
        if v in ("0", "false", "no", "off"):
            return False
        raise ValueError(f"not a boolean: {value!r}")
    return kind(value)


def _parse_terms(value, ell):
    out = []
    for chunk in value.split(";"):
        chunk = chunk.strip()
        if not chunk:
            continue
        parts = chunk.split()
        if len(parts) != ell + 2:
            raise ValueError(f"term {chunk!r} needs {ell} exponents then re im")
        k = tuple(int(x) for x in parts[:ell])
        if any(x < 0 for x in k):
            raise ValueError("exponents must be nonnegative")
        out.append((k, complex(float(parts[ell]), float(parts[ell + 1]))))
    return out


def parse_config(path):
    """Read and validate a run configuration.

    Raises
    ------
    ConfigError
        With ``line`` set for syntax problems and ``field`` naming the
        offending entry for invariant violations.
    """
    try:
        with open(path, encoding="utf-8") as fh:
            text = fh.read()
    except OSError as exc:
        raise ConfigError(f"cannot read config: {exc}", field="path") from exc
    return parse_config_text(text)


def parse_config_text(text):
    cp = configparser.ConfigParser(interpolation=None, inline_comment_prefixes=("#",))
    try:
        cp.read_string(text)
    except configparser.Error as exc:
        line = getattr(exc, "lineno", None)
        if line is None and getattr(exc, "errors", None):
            line = exc.errors[0][0]
        raise ConfigError(f"malformed config: {exc}", line=line) from exc

    def fail(msg, section, key=None, fld=None):
        raise ConfigError(msg, field=fld or key or section, line=_line_of(text, section, key))

    for sec in cp.sections():
        if sec not in ("run", "tolerances", "verify") and not sec.startswith("mode."):
            fail(f"unknown section [{sec}]", sec)
    if not cp.has_section("run"):
        raise ConfigError("missing [run] section", field="run", line=0)

    run = {}
    for key, value in cp.items("run"):
        if key not in RUN_KEYS:
            fail(f"unknown key {key!r} in [run]", "run", key)
        try:
            run[key] = _convert(RUN_KEYS[key], value)
        except ValueError as exc:
            fail(f"bad value for {key}: {exc}", "run", key)
    for key in RUN_REQUIRED:
        if key not in run:
            fail(f"missing required key {key!r}", "run", fld=key)

    tol = {}
    if cp.has_section("tolerances"):
        for key, value in cp.items("tolerances"):
            if key not in TOL_KEYS:
                fail(f"unknown key {key!r} in [tolerances]", "tolerances", key)
            try:
                tol[key] = float(value)
            except ValueError as exc:
                fail(f"bad value for {key}: {exc}", "tolerances", key)
            if not tol[key] > 0:
                fail(f"tolerance {key} must be positive", "tolerances", key)

    ver = {}
    if cp.has_section("verify"):
        for key, value in cp.items("verify"):
            if key not in VERIFY_KEYS:
                fail(f"unknown key {key!r} in [verify]", "verify", key)
            try:
                ver[key] = _convert(VERIFY_KEYS[key], value)
            except ValueError as exc:
                fail(f"bad value for {key}: {exc}", "verify", key)

    ell = run["ell"]
    if ell < 1:
        fail("ell must be >= 1", "run", "ell")
    if len(run["omega"]) != ell:
        fail(f"omega needs {ell} entries", "run", "omega")
    if run["j"] < 0:
        fail("J must be nonnegative", "run", "j", fld="J")
    for key in ("rho0", "kappa0"):
        if not run[key] > 0:
            fail(f"{key} must be positive", "run", key)
    N, d = run["fourier_cutoff"], run["taylor_degree"]
    if N < 1:
        fail("fourier_cutoff must be >= 1", "run", "fourier_cutoff")
    if d < 0:
        fail("taylor_degree must be >= 0", "run", "taylor_degree")
    if run["diophantine_cutoff"] < N:
        fail("diophantine_cutoff must be at least fourier_cutoff", "run", "diophantine_cutoff")
    if "max_steps" in run and run["max_steps"] < 0:
        fail("max_steps must be nonnegative", "run", "max_steps")
    if "target_eta" in run and not run["target_eta"] > 0:
        fail("target_eta must be positive", "run", "target_eta")
    if ("gamma9" in run) != ("c9" in run):
        fail("gamma9 and c9 must be given together", "run", "gamma9" if "gamma9" in run else "c9")

    modes = {}
    for sec in cp.sections():
        if not sec.startswith("mode."):
            continue
        for key in cp[sec]:
            if key not in MODE_KEYS:
                fail(f"unknown key {key!r} in [{sec}]", sec, key)
        if "nu" not in cp[sec] or "terms" not in cp[sec]:
            fail(f"[{sec}] needs nu and terms", sec, fld="perturbation")
        try:
            nu = _convert("ints", cp[sec]["nu"])
        except ValueError as exc:
            fail(f"bad nu: {exc}", sec, "nu", fld="perturbation")
        if len(nu) != ell:
            fail(f"nu needs {ell} entries", sec, "nu", fld="perturbation")
        if sum(abs(x) for x in nu) > N:
            fail(f"mode {nu} exceeds fourier_cutoff", sec, "nu", fld="perturbation")
        try:
            entries = _parse_terms(cp[sec]["terms"], ell)
        except ValueError as exc:
            fail(f"bad terms: {exc}", sec, "terms", fld="perturbation")
        if any(sum(k) > d for k, _ in entries):
            fail("monomial degree exceeds taylor_degree", sec, "terms", fld="perturbation")
        if nu in modes:
            fail(f"mode {nu} given twice", sec, "nu", fld="perturbation")
        modes[nu] = (sec, dict(entries))

    zero = (0,) * ell
    for nu, (sec, entries) in modes.items():
        if nu == zero:
            if abs(entries.get(zero, 0)) != 0:
                fail("perturbation mean at A = 0 must vanish", sec, "terms", fld="perturbation")
            if any(abs(c.imag) > 0 for c in entries.values()):
                fail("angle-average terms must be real", sec, "terms", fld="perturbation")
            continue
        partner = tuple(-x for x in nu)
        if partner in modes:
            other = modes[partner][1]
            keys = set(entries) | set(other)
            for k in keys:
                a, b = entries.get(k, 0j), other.get(k, 0j)
                if abs(a - np.conj(b)) > 1e-14 * max(abs(a), abs(b), 1e-300):
                    fail(f"modes {nu} and {partner} are not complex conjugate", sec, "terms", fld="perturbation")

    perturbation = []
    for nu in sorted(modes):
        entries = modes[nu][1]
        perturbation.append((nu, sorted(entries.items())))
        partner = tuple(-x for x in nu)
        if nu != zero and partner not in modes:
            perturbation.append((partner, sorted((k, complex(np.conj(c))) for k, c in entries.items())))
    perturbation.sort()

    seeds = run.get("seeds", (0,))
    return RunConfig(
        ell=ell,
        omega=tuple(run["omega"]),
        J=run["j"],
        rho0=run["rho0"],
        kappa0=run["kappa0"],
        fourier_cutoff=N,
        taylor_degree=d,
        perturbation=perturbation,
        eps_scale=run.get("eps_scale", 1.0),
        max_steps=run.get("max_steps", 10),
        target_eta=run.get("target_eta", 1e-25),
        tolerances=Tolerances(**tol),
        diophantine_cutoff=run["diophantine_cutoff"],
        seeds=tuple(seeds) if seeds else (0,),
        verify=VerifySettings(**ver),
        gamma9=run.get("gamma9"),
        c9=run.get("c9"),
    )


def format_config(cfg):
    """Serialize a :class:`RunConfig` back to INI text (round-trips through :func:`parse_config_text`)."""
    def floats(xs):
        return ", ".join(repr(float(x)) for x in xs)

    lines = [
        "[run]",
        f"ell = {cfg.ell}",
        f"omega = {floats(cfg.omega)}",
        f"J = {cfg.J!r}",
        f"rho0 = {cfg.rho0!r}",
        f"kappa0 = {cfg.kappa0!r}",
        f"fourier_cutoff = {cfg.fourier_cutoff}",
        f"taylor_degree = {cfg.taylor_degree}",
        f"eps_scale = {cfg.eps_scale!r}",
        f"max_steps = {cfg.max_steps}",
        f"target_eta = {cfg.target_eta!r}",
        f"diophantine_cutoff = {cfg.diophantine_cutoff}",
        f"seeds = {', '.join(str(s) for s in cfg.seeds)}",
    ]
    if cfg.gamma9 is not None:
        lines += [f"gamma9 = {cfg.gamma9!r}", f"c9 = {cfg.c9!r}"]
    t = cfg.tolerances
    lines += ["", "[tolerances]"] + [f"{k} = {getattr(t, k)!r}" for k in TOL_KEYS]
    v = cfg.verify
    lines += ["", "[verify]"] + [f"{k} = {getattr(v, k)!r}" for k in VERIFY_KEYS if k != "oracle"]
    lines.append(f"oracle = {str(v.oracle).lower()}")
    for i, (nu, entries) in enumerate(cfg.perturbation):
        terms = "; ".join(" ".join(str(x) for x in k) + f" {c.real!r} {c.imag!r}" for k, c in entries)
        lines += ["", f"[mode.{i}]", f"nu = {', '.join(str(x) for x in nu)}", f"terms = {terms}"]
    return "\n".join(lines) + "\n"


def literal_gate(cfg, eta0, delta0):
    """``gamma9 eta0 delta0**-c9`` when a literal pair is configured, else None."""
    if cfg.gamma9 is None:
        return None
    return cfg.gamma9 * eta0 * delta0 ** (-cfg.c9) if delta0 > 0 else math.inf
