"""Variational minimization of a diagonal Ising Hamiltonian.

The ansatz uses single-qubit rotations only, so the prepared state is always a
product state and each qubit is simulated as its own 2-vector. For a product
state ``<Z_j Z_k> = <Z_j><Z_k>``, so the analytic energy is the Ising energy
evaluated at the vector of single-qubit ``<Z>`` values.

Parameter layout is qubit-major, then layer, then gate within the block:
``theta.reshape(n_qubits, depth, gates_per_block)``.
"""

from __future__ import annotations

import csv
import json
import time
from dataclasses import dataclass, field

import numpy as np
from scipy.optimize import minimize

from .errors import DimensionMismatch, EmptyDistribution, IndexOutOfRange, LayoutMismatch, ParseError
from .ising import IsingModel, bits_to_str, energy_of_spins, spins, str_to_bits

FAMILIES = {"ry": ("ry",), "rz_ry_rz": ("rz", "ry", "rz")}
METHODS = ("nelder-mead-multistart", "spsa")
PATIENCE_PER_PARAMETER = 5


@dataclass(frozen=True)
class AnsatzSpec:
    family: str
    depth: int
    n_qubits: int

    def __post_init__(self):
        if self.family not in FAMILIES:
            raise LayoutMismatch(f"unknown ansatz family {self.family!r}")
        if self.depth < 1 or self.n_qubits < 1:
            raise LayoutMismatch("depth and n_qubits must be at least 1")

    @property
    def gates(self) -> tuple[str, ...]:
        return FAMILIES[self.family]

    @property
    def n_params(self) -> int:
        return self.n_qubits * self.depth * len(self.gates)


@dataclass(frozen=True)
class ProductState:
    amplitudes: np.ndarray  # shape (n, 2): (alpha_j, beta_j)

    @property
    def n(self) -> int:
        return self.amplitudes.shape[0]

    def z_expectations(self) -> np.ndarray:
        p = np.abs(self.amplitudes) ** 2
        return p[:, 0] - p[:, 1]

    def one_probabilities(self) -> np.ndarray:
        return np.abs(self.amplitudes[:, 1]) ** 2


@dataclass
class BitstringDistribution:
    counts: dict[str, int]
    total_shots: int

    def __post_init__(self):
        if sum(self.counts.values()) != self.total_shots:
            raise ValueError("counts do not sum to total_shots")
        lengths = {len(b) for b in self.counts}
        if len(lengths) > 1:
            raise DimensionMismatch(f"mixed bitstring lengths {sorted(lengths)}")

    @property
    def n_bits(self) -> int:
        if not self.counts:
            raise EmptyDistribution("distribution has no samples")
        return len(next(iter(self.counts)))

    def mode(self) -> str:
        """Most frequent bitstring; ties go to the lowest integer value."""
        if not self.counts:
            raise EmptyDistribution("distribution has no samples")
        return min(self.counts, key=lambda b: (-self.counts[b], int(b, 2)))

    def to_dict(self) -> dict:
        ordered = sorted(self.counts.items(), key=lambda kv: int(kv[0], 2))
        return {"total_shots": self.total_shots, "counts": dict(ordered)}

    @classmethod
    def from_dict(cls, d: dict) -> "BitstringDistribution":
        try:
            counts = {str(k): int(v) for k, v in d["counts"].items()}
            for k in counts:
                str_to_bits(k)
            return cls(counts, int(d["total_shots"]))
        except (KeyError, TypeError, ValueError, AttributeError) as exc:
            raise ParseError(f"malformed distribution: {exc}") from exc

    def save(self, path) -> None:
        with open(path, "w", encoding="utf-8") as fh:
            json.dump(self.to_dict(), fh, indent=1)
            fh.write("\n")

    @classmethod
    def load(cls, path) -> "BitstringDistribution":
        with open(path, encoding="utf-8") as fh:
            try:
                return cls.from_dict(json.load(fh))
            except json.JSONDecodeError as exc:
                raise ParseError(exc.msg, exc.lineno) from exc


@dataclass
class OptimizerConfig:
    method: str = "nelder-mead-multistart"
    budget: int = 80000
    restarts: int = 4
    seed: int = 0
    shots: int = 0
    tolerance: float = 1e-6
    patience: int = 50

    def __post_init__(self):
        if self.method not in METHODS:
            raise ValueError(f"unknown optimizer method {self.method!r}; choose from {METHODS}")
        if self.budget < 1 or self.restarts < 1 or self.patience < 1:
            raise ValueError("budget, restarts and patience must be at least 1")
        if self.shots < 0:
            raise ValueError("shots must be >= 0 (0 selects analytic mode)")


@dataclass
class ConvergenceTrace:
    energies: list = field(default_factory=list)
    best_energies: list = field(default_factory=list)
    elapsed_ms: list = field(default_factory=list)
    restarts: list = field(default_factory=list)
    converged: bool = False

    def __len__(self):
        return len(self.energies)

    @property
    def best_energy(self) -> float:
        return self.best_energies[-1] if self.best_energies else np.inf

    def write_csv(self, path) -> None:
        with open(path, "w", encoding="utf-8", newline="") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(["iteration", "energy", "best_energy", "elapsed_ms"])
            for i, (e, b, t) in enumerate(zip(self.energies, self.best_energies, self.elapsed_ms)):
                w.writerow([i, repr(float(e)), repr(float(b)), f"{t:.3f}"])

    @classmethod
    def read_csv(cls, path) -> "ConvergenceTrace":
        tr = cls()
        with open(path, encoding="utf-8") as fh:
            for row in csv.DictReader(fh):
                tr.energies.append(float(row["energy"]))
                tr.best_energies.append(float(row["best_energy"]))
                tr.elapsed_ms.append(float(row["elapsed_ms"]))
        return tr


def _ry(theta):
    c, s = np.cos(theta / 2), np.sin(theta / 2)
    return np.array([[c, -s], [s, c]], dtype=complex).transpose(2, 0, 1)


def _rz(theta):
    out = np.zeros((len(theta), 2, 2), dtype=complex)
    out[:, 0, 0] = np.exp(-0.5j * theta)
    out[:, 1, 1] = np.exp(0.5j * theta)
    return out


_GATES = {"ry": _ry, "rz": _rz}


def prepare_state(spec: AnsatzSpec, theta) -> ProductState:
    theta = np.asarray(theta, dtype=float)
    if theta.shape != (spec.n_params,):
        raise LayoutMismatch(f"{theta.size} angles for an ansatz with {spec.n_params} parameters")
    angles = theta.reshape(spec.n_qubits, spec.depth, len(spec.gates))
    amp = np.zeros((spec.n_qubits, 2), dtype=complex)
    amp[:, 0] = 1.0
    for layer in range(spec.depth):
        for g, name in enumerate(spec.gates):
            amp = np.einsum("nij,nj->ni", _GATES[name](angles[:, layer, g]), amp)
    return ProductState(amp)


def expect_z(state: ProductState, j: int) -> float:
    if not 0 <= j < state.n:
        raise IndexOutOfRange(f"qubit {j} out of range for {state.n} qubits")
    a, b = state.amplitudes[j]
    return float(abs(a) ** 2 - abs(b) ** 2)


def _sample_bits(state: ProductState, shots: int, rng) -> np.ndarray:
    return (rng.random((shots, state.n)) < state.one_probabilities()).astype(np.int8)


def energy_expectation(spec: AnsatzSpec, theta, model: IsingModel, shots: int = 0, seed=None) -> float:
    """``<psi(theta)|H|psi(theta)>``.

    ``shots=0`` evaluates it exactly; otherwise bitstrings are sampled, each
    mapped to spins (0 -> +1, 1 -> -1), and the sample mean is returned.
    """
    if spec.n_qubits != model.n:
        raise DimensionMismatch(f"ansatz has {spec.n_qubits} qubits, model has {model.n}")
    state = prepare_state(spec, theta)
    if shots <= 0:
        return float(energy_of_spins(state.z_expectations(), model))
    bits = _sample_bits(state, shots, np.random.default_rng(seed))
    return float(np.mean(energy_of_spins(spins(bits), model)))


def sample_bitstrings(spec: AnsatzSpec, theta, shots: int, seed=None) -> BitstringDistribution:
    if shots < 1:
        raise ValueError("shots must be at least 1")
    state = prepare_state(spec, theta)
    bits = _sample_bits(state, shots, np.random.default_rng(seed))
    rows, counts = np.unique(bits, axis=0, return_counts=True)
    dist = {bits_to_str(r): int(c) for r, c in zip(rows, counts)}
    return BitstringDistribution(dist, shots)


class _Stop(Exception):
    pass


class _Objective:
    """Energy callable that records the trace and enforces stopping rules."""

    def __init__(self, spec, model, cfg: OptimizerConfig, trace: ConvergenceTrace, t0: float):
        self.spec, self.model, self.cfg, self.trace, self.t0 = spec, model, cfg, trace, t0
        # One simplex shrink costs n_params evaluations, so the window has to grow with n.
        self.patience = max(cfg.patience, PATIENCE_PER_PARAMETER * spec.n_params)
        self.best_theta = None
        self.best_energy = np.inf
        self.restart = 0
        self.limit = 0
        self._count = 0
        self.begin_run()

    def begin(self, restart: int, evaluations: int):
        self.restart = restart
        self.limit = evaluations
        self._count = 0
        self.begin_run()

    def begin_run(self):
        self.run_best = np.inf
        self.run_best_theta = None
        self._last_improvement = self._count

    @property
    def remaining(self) -> int:
        return self.limit - self._count

    @property
    def stalled(self) -> bool:
        return self._count - self._last_improvement >= self.patience

    def __call__(self, theta) -> float:
        if self._count >= self.limit:
            raise _Stop
        if self.cfg.shots > 0:
            seed = np.random.SeedSequence((self.cfg.seed, len(self.trace)))
            e = energy_expectation(self.spec, theta, self.model, self.cfg.shots, seed)
        else:
            e = energy_expectation(self.spec, theta, self.model)
        self._count += 1
        if e < self.run_best - self.cfg.tolerance:
            self._last_improvement = self._count
        if e < self.run_best:
            self.run_best = e
            self.run_best_theta = np.array(theta, dtype=float)
        if e < self.best_energy:
            self.best_energy = e
            self.best_theta = np.array(theta, dtype=float)
        tr = self.trace
        tr.energies.append(e)
        tr.best_energies.append(self.best_energy)
        tr.elapsed_ms.append(1e3 * (time.perf_counter() - self.t0))
        tr.restarts.append(self.restart)
        if self.stalled:
            raise _Stop
        return e


def _nelder_mead(obj: _Objective, x0, rng, step=0.25):
    """Nelder-Mead, re-seeded from its incumbent whenever the simplex stalls.

    Each re-run starts a fresh simplex of edge ``step`` around the best point
    of the previous run; the loop ends when a re-run fails to improve on it by
    more than ``tolerance`` or the restart's budget is spent.
    """
    x, best = np.array(x0, dtype=float), np.inf
    simplex = None
    while True:
        obj.begin_run()
        try:
            res = minimize(obj, x, method="Nelder-Mead",
                           options={"maxfev": obj.remaining, "adaptive": True, "xatol": 1e-10,
                                    "fatol": 1e-12, "initial_simplex": simplex})
            run_x, run_best = res.x, res.fun
        except _Stop:
            if obj.remaining <= 0:
                raise
            run_x, run_best = obj.run_best_theta, obj.run_best
        if obj.remaining <= 0:
            raise _Stop
        if run_best > best - obj.cfg.tolerance:
            return
        x, best = run_x, run_best
        simplex = np.vstack([x, x + step * np.eye(x.size)])


def _spsa(obj: _Objective, x0, rng, alpha=0.602, gamma=0.101, c=0.2, first_step=0.5):
    x = np.array(x0, dtype=float)
    iters = max(1, obj.limit // 2)
    big_a = 0.1 * iters
    # Calibrate the gain so the first update moves each angle by about first_step.
    grads = []
    for _ in range(min(5, max(1, iters // 10))):
        delta = rng.choice([-1.0, 1.0], size=x.size)
        grads.append(abs(obj(x + c * delta) - obj(x - c * delta)) / (2 * c))
    a = first_step * (big_a + 1) ** alpha / max(np.mean(grads), 1e-12)
    for k in range(iters):
        ak = a / (k + 1 + big_a) ** alpha
        ck = c / (k + 1) ** gamma
        delta = rng.choice([-1.0, 1.0], size=x.size)
        g = (obj(x + ck * delta) - obj(x - ck * delta)) / (2 * ck) * delta
        x = x - ak * g


def optimize(model: IsingModel, spec: AnsatzSpec, config: OptimizerConfig | None = None):
    """Minimize the ansatz energy for ``model``.

    Restarts run one after another, each with ``budget // restarts``
    evaluations and its own seeded initial angles drawn from ``[0, pi]``. A
    restart stops early once its best energy has improved by less than
    ``tolerance`` over ``patience`` consecutive evaluations (at least
    ``PATIENCE_PER_PARAMETER`` per parameter).

    Returns
    -------
    theta : ndarray
        Best parameters seen over all evaluations.
    trace : ConvergenceTrace
        One record per evaluation; ``trace.converged`` is False when every
        restart ran out of budget before meeting the stopping rule.
    """
    cfg = config or OptimizerConfig()
    if spec.n_qubits != model.n:
        raise DimensionMismatch(f"ansatz has {spec.n_qubits} qubits, model has {model.n}")
    trace = ConvergenceTrace()
    obj = _Objective(spec, model, cfg, trace, time.perf_counter())
    per_restart = max(1, cfg.budget // cfg.restarts)
    run = _nelder_mead if cfg.method == "nelder-mead-multistart" else _spsa
    for r, child in enumerate(np.random.SeedSequence(cfg.seed).spawn(cfg.restarts)):
        rng = np.random.default_rng(child)
        x0 = rng.uniform(0.0, np.pi, spec.n_params)
        obj.begin(r, per_restart)
        try:
            run(obj, x0, rng)
            finished = run is _nelder_mead
        except _Stop:
            finished = obj.stalled and obj.remaining > 0
        trace.converged |= finished
    return obj.best_theta, trace


def statevector(spec: AnsatzSpec, theta) -> np.ndarray:
    """Full ``2**n`` amplitude vector of the product state (small ``n`` only).

    Qubit 0 is the most significant tensor factor, matching the bitstring
    convention.
    """
    amp = prepare_state(spec, theta).amplitudes
    psi = np.ones(1, dtype=complex)
    for a in amp:
        psi = np.kron(psi, a)
    return psi


def modal_bitstring(dist: BitstringDistribution) -> np.ndarray:
    return str_to_bits(dist.mode())
