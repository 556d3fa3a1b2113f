"""Configuration-driven experiment runs, norm sweeps and pulse spectra.

Configs are INI documents::

    [problem]
    preset = ising-qft        ; or heisenberg-t, custom
    qubits = 2
    basis = pwc               ; or hermite
    K = 32
    T = 8

    [target]
    source = reachable        ; qft, identity, free, matrix or reachable
    seed = 100
    norm = 2.0

    [solver]
    algorithm = newton        ; or bfgs
    epsilon = 1e-4
    fluence_bound = 20
    initial_norm = auto       ; or a number
    seeds = 1, 2, 3
    max_iter = 100

    [output]
    directory = runs/demo
    spectrum = false

Dense matrices (custom drift/controls, matrix targets) live in text files
with a first line ``N`` followed by the entries in row-major order, one row
per line as ``re im`` pairs.
"""
from __future__ import annotations

import configparser
import csv
import json
import logging
import os
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass, field, fields
from pathlib import Path
from typing import Optional

import numpy as np

from . import __version__
from .errors import ConfigError, InvalidInputError
from .model import (
    PRESETS,
    ControlSystem,
    ProblemSpec,
    make_basis,
    qft_matrix,
    random_pulse,
    synthesize,
)
from .objective import TargetSpec, evaluate, ill_conditioning
from .propagation import propagate
from .solver import (
    CONVERGED,
    bfgs_grape_solve,
    find_best_initial_norm,
    newton_raphson_solve,
    reachable_target,
)

log = logging.getLogger(__name__)

ITERATION_COLUMNS = ("iter", "gate_error", "geodesic_error", "pulse_norm", "radius",
                     "ratio", "accepted", "wall_seconds")
SWEEP_COLUMNS = ("norm", "seed", "ill_conditioning", "time_to_eps", "final_norm")
OUTPUT_ENV = "GATESYNTH_OUTPUT_DIR"


def fmt(x) -> str:
    """17 significant digits; booleans as 0/1."""
    if isinstance(x, (bool, np.bool_)):
        return "1" if x else "0"
    if isinstance(x, (int, np.integer)):
        return str(int(x))
    if x is None:
        return "nan"
    return "%.17g" % float(x)


# --- matrix files --------------------------------------------------------------------------

def write_matrix(path, m) -> None:
    m = np.asarray(m, dtype=complex)
    n = m.shape[0]
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        fh.write(f"{n}\n")
        for row in m:
            fh.write(" ".join(f"{fmt(z.real)} {fmt(z.imag)}" for z in row) + "\n")


def read_matrix(path) -> np.ndarray:
    with open(path, encoding="utf-8") as fh:
        tokens = fh.read().split()
    if not tokens:
        raise ConfigError(f"{path}: empty matrix file")
    try:
        n = int(tokens[0])
        vals = np.array([float(t) for t in tokens[1:]])
    except ValueError as exc:
        raise ConfigError(f"{path}: {exc}") from None
    if n < 1 or vals.size != 2 * n * n:
        raise ConfigError(f"{path}: expected {2 * n * n} numbers after the header, got {vals.size}")
    return (vals[0::2] + 1j * vals[1::2]).reshape(n, n)


# --- configuration -------------------------------------------------------------------------

@dataclass
class ExperimentConfig:
    preset: str = "ising-qft"
    qubits: int = 2
    basis: str = "pwc"
    K: int = 32
    T: float = 8.0
    drift: Optional[str] = None
    controls: list = field(default_factory=list)
    target_source: str = "reachable"
    target_file: Optional[str] = None
    target_seed: int = 100
    target_norm: float = 2.0
    projector: str = "su"
    env_dim: Optional[int] = None
    algorithm: str = "newton"
    epsilon: float = 1e-4
    fluence_bound: Optional[float] = None
    initial_norm: str = "auto"
    seeds: list = field(default_factory=lambda: [1])
    max_iter: int = 100
    grid_size: int = 12
    samples_per_norm: int = 3
    output_dir: Optional[str] = None
    spectrum: bool = False

    def validate(self) -> "ExperimentConfig":
        if self.preset not in (*PRESETS, "custom"):
            raise ConfigError(f"unknown preset {self.preset!r}")
        if self.basis not in ("pwc", "hermite"):
            raise ConfigError(f"unknown basis {self.basis!r}")
        if self.algorithm not in ("newton", "bfgs"):
            raise ConfigError(f"unknown algorithm {self.algorithm!r}")
        if self.target_source not in ("qft", "identity", "free", "matrix", "reachable"):
            raise ConfigError(f"unknown target source {self.target_source!r}")
        if self.projector not in ("su", "subsystem"):
            raise ConfigError(f"unknown projector {self.projector!r}")
        positive = {"qubits": self.qubits, "K": self.K, "T": self.T, "epsilon": self.epsilon,
                    "max_iter": self.max_iter, "grid_size": self.grid_size,
                    "samples_per_norm": self.samples_per_norm, "target_norm": self.target_norm}
        if self.fluence_bound is not None:
            positive["fluence_bound"] = self.fluence_bound
        for name, value in positive.items():
            if not value > 0:
                raise ConfigError(f"{name} must be positive")
        if self.initial_norm != "auto":
            try:
                if float(self.initial_norm) < 0:
                    raise ConfigError("initial_norm must be non-negative")
            except ValueError:
                raise ConfigError(f"initial_norm must be 'auto' or a number, got {self.initial_norm!r}") from None
        if not self.seeds:
            raise ConfigError("at least one seed is required")
        if self.preset == "custom" and (not self.drift or not self.controls):
            raise ConfigError("custom preset needs drift and controls files")
        if self.target_source == "matrix" and not self.target_file:
            raise ConfigError("matrix target needs a file")
        if self.projector == "subsystem" and not self.env_dim:
            raise ConfigError("subsystem projector needs env_dim")
        return self

    def to_dict(self) -> dict:
        return asdict(self)

    @classmethod
    def from_dict(cls, d: dict) -> "ExperimentConfig":
        names = {f.name for f in fields(cls)}
        unknown = set(d) - names
        if unknown:
            raise ConfigError(f"unknown config fields: {sorted(unknown)}")
        return cls(**d).validate()


_KEYS = {
    # (section, key): (field, parser)
    ("problem", "preset"): ("preset", str),
    ("problem", "qubits"): ("qubits", int),
    ("problem", "basis"): ("basis", str),
    ("problem", "k"): ("K", int),
    ("problem", "t"): ("T", float),
    ("problem", "drift"): ("drift", str),
    ("problem", "controls"): ("controls", lambda s: [p.strip() for p in s.split(",") if p.strip()]),
    ("target", "source"): ("target_source", str),
    ("target", "file"): ("target_file", str),
    ("target", "seed"): ("target_seed", int),
    ("target", "norm"): ("target_norm", float),
    ("target", "projector"): ("projector", str),
    ("target", "env_dim"): ("env_dim", int),
    ("solver", "algorithm"): ("algorithm", str),
    ("solver", "epsilon"): ("epsilon", float),
    ("solver", "fluence_bound"): ("fluence_bound", float),
    ("solver", "initial_norm"): ("initial_norm", str),
    ("solver", "seeds"): ("seeds", lambda s: [int(p) for p in s.replace(",", " ").split()]),
    ("solver", "max_iter"): ("max_iter", int),
    ("solver", "grid_size"): ("grid_size", int),
    ("solver", "samples_per_norm"): ("samples_per_norm", int),
    ("output", "directory"): ("output_dir", str),
    ("output", "spectrum"): ("spectrum", lambda s: s.strip().lower() in ("1", "true", "yes", "on")),
}


def parse_config(text: str, base_dir: Optional[Path] = None) -> ExperimentConfig:
    """Parse an INI config; relative file paths resolve against ``base_dir``."""
    cp = configparser.ConfigParser(inline_comment_prefixes=(";", "#"))
    try:
        cp.read_string(text)
    except configparser.Error as exc:
        raise ConfigError(str(exc)) from None
    values = {}
    for section in cp.sections():
        for key, raw in cp.items(section):
            spec = _KEYS.get((section.lower(), key.lower()))
            if spec is None:
                raise ConfigError(f"unknown key [{section}] {key}")
            name, conv = spec
            try:
                values[name] = conv(raw)
            except ValueError as exc:
                raise ConfigError(f"[{section}] {key}: {exc}") from None
    if base_dir is not None:
        for name in ("drift", "target_file"):
            if values.get(name):
                values[name] = str((base_dir / values[name]).resolve())
        if values.get("controls"):
            values["controls"] = [str((base_dir / c).resolve()) for c in values["controls"]]
    return ExperimentConfig(**values).validate()


def load_config(path) -> ExperimentConfig:
    path = Path(path)
    try:
        text = path.read_text(encoding="utf-8")
    except OSError as exc:
        raise ConfigError(f"cannot read config {path}: {exc}") from None
    return parse_config(text, path.parent)


def build_problem(cfg: ExperimentConfig) -> ProblemSpec:
    if cfg.preset == "custom":
        system = ControlSystem(read_matrix(cfg.drift), np.stack([read_matrix(c) for c in cfg.controls]))
        problem = ProblemSpec(system, make_basis(cfg.basis, cfg.K, cfg.T), None, cfg.epsilon,
                              cfg.fluence_bound, name="custom")
    else:
        problem = PRESETS[cfg.preset](qubits=cfg.qubits, K=cfg.K, T=cfg.T, basis=cfg.basis,
                                      epsilon=cfg.epsilon, fluence_bound=cfg.fluence_bound)
    n = problem.system.dim
    if cfg.target_source == "qft":
        V = qft_matrix(n)
    elif cfg.target_source == "identity":
        V = np.eye(n)
    elif cfg.target_source == "free":
        # drift-only evolution: reached exactly by the zero pulse
        V = propagate(problem.system, problem.basis, np.zeros(problem.n_params)).final
    elif cfg.target_source == "matrix":
        V = read_matrix(cfg.target_file)
    else:
        V = reachable_target(problem, cfg.target_seed, cfg.target_norm).V
    if V.shape != (n, n):
        raise ConfigError(f"target is {V.shape[0]}x{V.shape[1]}, system dimension is {n}")
    try:
        if cfg.projector == "subsystem":
            problem.target = TargetSpec(V, "subsystem", env_dim=cfg.env_dim)
        else:
            problem.target = TargetSpec(V)
    except InvalidInputError as exc:
        raise ConfigError(str(exc)) from None
    return problem


def resolve_initial_norm(cfg: ExperimentConfig, problem: ProblemSpec) -> float:
    if cfg.initial_norm != "auto":
        return float(cfg.initial_norm)
    return find_best_initial_norm(problem, cfg.fluence_bound, cfg.grid_size, cfg.samples_per_norm, seed=0)


def resolve_output_dir(cfg: ExperimentConfig, out: Optional[str] = None) -> Path:
    return Path(out or cfg.output_dir or os.environ.get(OUTPUT_ENV) or "runs")


# --- spectra -------------------------------------------------------------------------------

@dataclass
class SpectrumTable:
    omega: np.ndarray
    power: np.ndarray  # (R, len(omega))


def pulse_spectrum(basis, a, grid_size: Optional[int] = None) -> SpectrumTable:
    """Power spectrum ``|f_r(omega)|^2`` of each control on a symmetric angular grid.

    The pulses are sampled at ``grid_size`` cell centres over ``[0, T]``
    (default ``8 K``) and transformed with the DFT scaled by the sample
    spacing.  The unpaired Nyquist bin of an even grid is dropped.
    """
    n = int(grid_size or 8 * basis.K)
    if n < 2:
        raise InvalidInputError("grid_size must be at least 2")
    dt = basis.T / n
    t = (np.arange(n) + 0.5) * dt
    f = np.atleast_2d(synthesize(basis, a, t))
    spec = np.fft.fftshift(np.fft.fft(f, axis=-1), axes=-1) * dt
    omega = np.fft.fftshift(np.fft.fftfreq(n, d=dt)) * 2 * np.pi
    if n % 2 == 0:
        spec, omega = spec[:, 1:], omega[1:]
    return SpectrumTable(omega, np.abs(spec) ** 2)


def write_spectrum(path, table: SpectrumTable) -> None:
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["omega"] + [f"power_{r + 1}" for r in range(table.power.shape[0])])
        for i, om in enumerate(table.omega):
            w.writerow([fmt(om)] + [fmt(p) for p in table.power[:, i]])


# --- runs ----------------------------------------------------------------------------------

def write_iterations(path, report) -> None:
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(ITERATION_COLUMNS)
        for rec in report.records:
            w.writerow([fmt(rec.index), fmt(rec.gate_error), fmt(rec.geodesic_error),
                        fmt(rec.pulse_norm), fmt(rec.radius), fmt(rec.ratio),
                        fmt(rec.accepted), fmt(rec.wall_seconds)])


def solve(cfg: ExperimentConfig, problem: ProblemSpec, a0, seed):
    fn = newton_raphson_solve if cfg.algorithm == "newton" else bfgs_grape_solve
    return fn(problem, a0, max_iter=cfg.max_iter, seed=seed)


def _run_one(cfg: ExperimentConfig, seed: int, rho: float, out_dir: str) -> dict:
    problem = build_problem(cfg)
    a0 = random_pulse(problem.basis, problem.system.n_controls, rho, seed)
    report = solve(cfg, problem, a0, seed)
    out = Path(out_dir)
    files = [out / f"run_seed{seed}.csv", out / f"summary_seed{seed}.json"]
    write_iterations(files[0], report)
    summary = {
        "status": report.status,
        "seed": seed,
        "algorithm": cfg.algorithm,
        "problem": problem.name,
        "iterations": report.iterations,
        "initial_norm": rho,
        "final_error": report.final_error,
        "final_geodesic_error": report.accepted[-1].geodesic_error,
        "final_norm": report.final_norm,
        "total_seconds": report.wall_seconds,
        "config": cfg.to_dict(),
        "version": __version__,
    }
    with open(files[1], "w", encoding="utf-8", newline="\n") as fh:
        json.dump(summary, fh, indent=2, sort_keys=True)
        fh.write("\n")
    if cfg.spectrum:
        files.append(out / f"spectrum_seed{seed}.csv")
        write_spectrum(files[-1], pulse_spectrum(problem.basis, report.final_a))
    return {"seed": seed, "status": report.status, "files": [str(f) for f in files]}


def _map(fn, jobs, workers: int):
    if workers <= 1 or len(jobs) <= 1:
        return [fn(*job) for job in jobs]
    with ProcessPoolExecutor(max_workers=workers) as pool:
        futures = [pool.submit(fn, *job) for job in jobs]
        return [f.result() for f in futures]


def run_experiment(cfg: ExperimentConfig, out_dir=None, workers: int = 1, seed_offset: int = 0):
    """Run one solve per seed; returns ``(exit_status, files)``.

    Exit status is 0 iff every run converged.
    """
    problem = build_problem(cfg)
    rho = resolve_initial_norm(cfg, problem)
    out = resolve_output_dir(cfg, out_dir)
    out.mkdir(parents=True, exist_ok=True)
    seeds = [s + seed_offset for s in cfg.seeds]
    results = _map(_run_one, [(cfg, s, rho, str(out)) for s in seeds], workers)
    files = [f for r in results for f in r["files"]]
    ok = all(r["status"] == CONVERGED for r in results)
    return (0 if ok else 1), files


def _sweep_cell(cfg: ExperimentConfig, index: int, rho: float, seed: int, out_dir: str) -> dict:
    problem = build_problem(cfg)
    a0 = random_pulse(problem.basis, problem.system.n_controls, rho, seed)
    ill = ill_conditioning(evaluate(problem, a0).jacobian)
    report = solve(cfg, problem, a0, seed)
    path = Path(out_dir) / f"sweep_n{index}_seed{seed}.csv"
    write_iterations(path, report)
    t = report.time_to(problem.epsilon)
    return {"norm": rho, "seed": seed, "ill_conditioning": ill,
            "time_to_eps": float("nan") if t is None else t,
            "final_norm": report.final_norm, "status": report.status, "file": str(path)}


def campaign_norm_sweep(cfg: ExperimentConfig, norms, out_dir=None, workers: int = 1,
                        seed_offset: int = 0):
    """Ill-conditioning, time to tolerance and final norm for every norm and seed.

    Writes one iteration CSV per cell and an aggregate ``sweep.csv`` ordered
    by (norm, seed).  Returns ``(exit_status, rows, files)``.
    """
    norms = [float(n) for n in norms]
    if not norms:
        raise ConfigError("norm grid is empty")
    out = resolve_output_dir(cfg, out_dir)
    out.mkdir(parents=True, exist_ok=True)
    seeds = [s + seed_offset for s in cfg.seeds]
    jobs = [(cfg, i, rho, s, str(out)) for i, rho in enumerate(norms) for s in seeds]
    rows = _map(_sweep_cell, jobs, workers)
    rows.sort(key=lambda r: (r["norm"], r["seed"]))
    agg = out / "sweep.csv"
    with open(agg, "w", encoding="utf-8", newline="\n") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(SWEEP_COLUMNS)
        for r in rows:
            w.writerow([fmt(r[c]) for c in SWEEP_COLUMNS])
    files = [r["file"] for r in rows] + [str(agg)]
    ok = all(r["status"] == CONVERGED for r in rows)
    return (0 if ok else 1), rows, files
