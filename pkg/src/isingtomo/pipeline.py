"""In-process composition of the reconstruction workflow.

The CLI stages (generate data, solve, reconstruct, benchmark) are thin file
wrappers around the functions here, so a file-mediated run and a single
process run with the same config produce the same numbers.
"""

from __future__ import annotations

import logging
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass, field, fields

import numpy as np
import yaml

from . import ising, reconstruction, tomography, vqe
from .errors import IsingTomoError

log = logging.getLogger(__name__)

STATES = ("correlated", "anti_correlated")
NOISE = ("exact", "poisson")
BENCHMARK_COLUMNS = ("method", "state", "noise", "seed", "fidelity", "final_energy",
                     "evaluations", "elapsed_ms", "status")


class ConfigError(ValueError):
    pass


@dataclass
class RunConfig:
    state: str = "correlated"
    weights: list | None = None
    noise: str = "exact"
    mean_counts: float = 1000.0
    ansatz: str = "ry"
    depth: int = 1
    method: str = "nelder-mead-multistart"
    budget: int = 80000
    restarts: int = 4
    shots: int = 0
    tolerance: float = 1e-6
    patience: int = 50
    sample_shots: int = 4096
    aggregation: str = "top1"
    beta: float | None = None
    encoding_scale: float = 2.0
    seed: int = 0
    out: str = "out"
    # benchmark only
    seeds: list = field(default_factory=lambda: [0, 1, 2])
    noise_levels: list = field(default_factory=lambda: [0, 1000])
    states: list = field(default_factory=lambda: list(STATES))
    methods: list = field(default_factory=lambda: list(reconstruction.METHODS))
    jobs: int = 1

    def __post_init__(self):
        if self.state not in STATES or any(s not in STATES for s in self.states):
            raise ConfigError(f"state must be one of {STATES}")
        if self.noise not in NOISE:
            raise ConfigError(f"noise must be one of {NOISE}")
        if self.aggregation not in reconstruction.AGGREGATIONS:
            raise ConfigError(f"aggregation must be one of {reconstruction.AGGREGATIONS}")
        if self.ansatz not in vqe.FAMILIES:
            raise ConfigError(f"ansatz must be one of {tuple(vqe.FAMILIES)}")
        if any(m not in reconstruction.METHODS for m in self.methods):
            raise ConfigError(f"methods must be drawn from {reconstruction.METHODS}")
        if self.sample_shots < 1 or self.depth < 1 or self.jobs < 1:
            raise ConfigError("sample_shots, depth and jobs must be positive")
        if not self.mean_counts > 0 or self.encoding_scale <= 0:
            raise ConfigError("mean_counts and encoding_scale must be positive")
        try:
            self.optimizer_config()
        except ValueError as exc:
            raise ConfigError(str(exc)) from exc

    @classmethod
    def from_mapping(cls, d: dict | None, **overrides) -> "RunConfig":
        d = dict(d or {})
        d.update({k: v for k, v in overrides.items() if v is not None})
        known = {f.name for f in fields(cls)}
        unknown = sorted(set(d) - known)
        if unknown:
            raise ConfigError(f"unknown config keys: {', '.join(unknown)}")
        try:
            return cls(**d)
        except TypeError as exc:
            raise ConfigError(str(exc)) from exc

    @classmethod
    def load(cls, path, **overrides) -> "RunConfig":
        with open(path, encoding="utf-8") as fh:
            try:
                d = yaml.safe_load(fh)
            except yaml.YAMLError as exc:
                raise ConfigError(f"cannot parse config {path}: {exc}") from exc
        if d is not None and not isinstance(d, dict):
            raise ConfigError("config file must be a flat key/value mapping")
        return cls.from_mapping(d, **overrides)

    def to_mapping(self) -> dict:
        return asdict(self)

    def optimizer_config(self, seed: int | None = None) -> vqe.OptimizerConfig:
        return vqe.OptimizerConfig(self.method, self.budget, self.restarts,
                                   self.seed if seed is None else seed,
                                   self.shots, self.tolerance, self.patience)

    def ansatz_spec(self, n_qubits: int) -> vqe.AnsatzSpec:
        return vqe.AnsatzSpec(self.ansatz, self.depth, n_qubits)


@dataclass
class DataBundle:
    rho: np.ndarray
    exact: tomography.MeasurementVector
    counts: tomography.CountRecord
    measured: tomography.MeasurementVector


@dataclass
class SolveResult:
    model: ising.IsingModel
    spec: vqe.AnsatzSpec
    theta: np.ndarray
    trace: vqe.ConvergenceTrace
    distribution: vqe.BitstringDistribution
    final_energy: float


_PROJECTORS = None


def projectors() -> tomography.ProjectorSet:
    global _PROJECTORS
    if _PROJECTORS is None:
        _PROJECTORS = tomography.two_qubit_projector_set()
    return _PROJECTORS


def measurement_matrix() -> tomography.MeasurementMatrix:
    return tomography.measurement_matrix(projectors())


def generate_data(state: str, weights=None, mean_counts: float = 1000.0,
                  noise: str = "exact", seed: int = 0) -> DataBundle:
    """Ground-truth state, its exact probabilities and (noisy or expected) counts."""
    rho = tomography.bell_state(state, weights)
    exact = tomography.forward_probabilities(rho, projectors())
    if noise == "poisson":
        counts = tomography.simulate_counts(exact, mean_counts, seed)
        measured = tomography.normalize_counts(counts, "synthetic-noisy")
    else:
        counts = tomography.expected_counts(exact, mean_counts)
        measured = exact
    return DataBundle(rho, exact, counts, measured)


def build_model(m, scale: float = 2.0) -> ising.IsingModel:
    qf = ising.quadratic_form(measurement_matrix(), m, scale=scale)
    return ising.ising_coefficients(qf)


def solve(model: ising.IsingModel, cfg: RunConfig, seed: int | None = None) -> SolveResult:
    seed = cfg.seed if seed is None else seed
    spec = cfg.ansatz_spec(model.n)
    theta, trace = vqe.optimize(model, spec, cfg.optimizer_config(seed))
    dist = vqe.sample_bitstrings(spec, theta, cfg.sample_shots, seed)
    final = vqe.energy_expectation(spec, theta, model)
    log.info("solve: %d evaluations, final energy %.6g, converged=%s", len(trace), final, trace.converged)
    return SolveResult(model, spec, theta, trace, dist, final)


def reconstruct_solution(sol: SolveResult, reference, cfg: RunConfig,
                         reference_label: str | None = None) -> reconstruction.ReconstructionReport:
    return reconstruction.reconstruct(sol.distribution, reference, cfg.aggregation, sol.model,
                                      cfg.beta, "vqe", reference_label)


def run_pipeline(cfg: RunConfig) -> tuple[DataBundle, SolveResult, reconstruction.ReconstructionReport]:
    """Data generation, Ising mapping, VQE solve and reconstruction in one process."""
    data = generate_data(cfg.state, cfg.weights, cfg.mean_counts, cfg.noise, cfg.seed)
    measured = data.measured
    if cfg.noise == "exact":
        # Through files the exact route reads back the expected counts.
        measured = tomography.normalize_counts(data.counts)
    model = build_model(measured, cfg.encoding_scale)
    sol = solve(model, cfg)
    report = reconstruct_solution(sol, data.rho, cfg, cfg.state)
    return data, sol, report


def _cell(args):
    method, state, noise_level, seed, cfg = args
    row = {"method": method, "state": state, "noise": "exact" if noise_level == 0 else noise_level,
           "seed": seed, "fidelity": "", "final_energy": "", "evaluations": "", "elapsed_ms": "",
           "status": "ok"}
    t0 = time.perf_counter()
    try:
        noise = "exact" if noise_level == 0 else "poisson"
        data = generate_data(state, cfg.weights, noise_level or cfg.mean_counts, noise, seed)
        m = data.measured
        if method in ("vqe", "brute-force"):
            model = build_model(m, cfg.encoding_scale)
            if method == "vqe":
                sol = solve(model, cfg, seed)
                rep = reconstruct_solution(sol, data.rho, cfg)
                row.update(fidelity=rep.fidelity_vs_reference, final_energy=sol.final_energy,
                           evaluations=len(sol.trace))
            else:
                bits, energy = ising.brute_force_minimum(model)
                rho_hat = reconstruction.physical_projection(reconstruction.guess_from_bits(bits))
                row.update(fidelity=reconstruction.fidelity(rho_hat, data.rho), final_energy=energy,
                           evaluations=1 << model.n)
        elif method == "linear-inversion":
            rho_hat = reconstruction.linear_inversion(measurement_matrix(), m)
            row.update(fidelity=reconstruction.fidelity(rho_hat, data.rho), evaluations=1)
        else:
            res = reconstruction.mle_rhor(measurement_matrix(), m)
            row.update(fidelity=reconstruction.fidelity(res.rho, data.rho), evaluations=res.iterations)
            if not res.converged:
                row["status"] = "not-converged"
    except (IsingTomoError, ValueError, ArithmeticError) as exc:
        row["status"] = f"error: {type(exc).__name__}: {exc}"
    row["elapsed_ms"] = round(1e3 * (time.perf_counter() - t0), 3)
    return row


def benchmark(cfg: RunConfig) -> list[dict]:
    """One row per (state, noise level, seed, method), in that nesting order."""
    cells = [(method, state, level, seed, cfg)
             for state in cfg.states
             for level in cfg.noise_levels
             for seed in cfg.seeds
             for method in cfg.methods]
    if cfg.jobs > 1:
        with ProcessPoolExecutor(max_workers=cfg.jobs) as pool:
            return list(pool.map(_cell, cells))
    return [_cell(c) for c in cells]
