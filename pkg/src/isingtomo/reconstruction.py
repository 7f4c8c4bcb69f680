"""From sampled bitstrings (or raw data) to physical density matrices.

A bitstring of length ``d**2`` is reshaped row-major into a ``d x d`` guess
``P`` of 0/1 entries, aggregated over the sampled distribution, and mapped to a
valid state by ``P^dag P / tr(P^dag P)``. Linear inversion and the RrhoR
maximum-likelihood iteration serve as classical baselines.
"""

from __future__ import annotations

import json
from dataclasses import dataclass

import numpy as np

from . import linalg
from .errors import DimensionMismatch, EmptyDistribution, MissingModel, ParseError, RankDeficient, ZeroMatrix
from .ising import IsingModel, energy_of_spins, spins, str_to_bits
from .tomography import check_density_matrix, values
from .vqe import BitstringDistribution

AGGREGATIONS = ("top1", "count_weighted", "boltzmann")
METHODS = ("vqe", "brute-force", "linear-inversion", "mle")
SPECTRAL_CUTOFF = 1e-13


def _side(n_bits: int) -> int:
    d = int(round(np.sqrt(n_bits)))
    if d * d != n_bits:
        raise DimensionMismatch(f"bitstring length {n_bits} is not a perfect square")
    return d


def guess_from_bits(bits) -> np.ndarray:
    bits = np.asarray(bits, dtype=float)
    d = _side(bits.size)
    return linalg.unvec(bits, d)


def aggregate_bitstrings(dist: BitstringDistribution, mode: str = "top1",
                         model: IsingModel | None = None, beta: float | None = None) -> np.ndarray:
    """Collapse a bitstring distribution into a real guess matrix in [0, 1].

    ``top1`` takes the modal bitstring, ``count_weighted`` the shot-weighted
    mean, and ``boltzmann`` the mean over distinct observed bitstrings with
    weights ``exp(-beta * E(b))``. The default ``beta`` is ``1 / |E_min|``
    over the observed energies; when ``E_min`` is zero this is the
    zero-temperature limit (uniform over the lowest-energy observations).
    """
    if not dist.counts or dist.total_shots == 0:
        raise EmptyDistribution("distribution has no samples")
    if mode not in AGGREGATIONS:
        raise ValueError(f"unknown aggregation {mode!r}; choose from {AGGREGATIONS}")
    if mode == "top1":
        return guess_from_bits(str_to_bits(dist.mode()))

    keys = sorted(dist.counts, key=lambda b: int(b, 2))
    bits = np.array([str_to_bits(k) for k in keys], dtype=float)
    _side(bits.shape[1])
    if mode == "count_weighted":
        w = np.array([dist.counts[k] for k in keys], dtype=float)
    else:
        if model is None:
            raise MissingModel("boltzmann aggregation needs the Ising model")
        e = energy_of_spins(spins(bits), model)
        e_min = e.min()
        if beta is None:
            beta = 1.0 / abs(e_min) if abs(e_min) > 1e-12 else np.inf
        if np.isinf(beta):
            w = (e <= e_min + 1e-12 * max(1.0, abs(e_min))).astype(float)
        else:
            w = np.exp(-beta * (e - e_min))
    w = w / w.sum()
    return guess_from_bits(w @ bits)


def physical_projection(p) -> np.ndarray:
    p = np.asarray(p, dtype=complex)
    g = linalg.dagger(p) @ p
    tr = np.trace(g).real
    if tr <= 0:
        raise ZeroMatrix("guess matrix is identically zero")
    rho = g / tr
    return 0.5 * (rho + linalg.dagger(rho))


def fidelity(rho, sigma) -> float:
    """Uhlmann fidelity ``(tr sqrt(sqrt(rho) sigma sqrt(rho)))**2``, clipped to [0, 1]."""
    rho, sigma = linalg.as_matrix(rho), linalg.as_matrix(sigma)
    if rho.shape != sigma.shape:
        raise DimensionMismatch(f"cannot compare {rho.shape} with {sigma.shape}")
    sr = linalg.matrix_sqrt_psd(rho)
    inner = sr @ sigma @ sr
    inner = 0.5 * (inner + linalg.dagger(inner))
    w = linalg.clip_eigenvalues(linalg.hermitian_eig(inner).eigenvalues, atol=1e-9)
    # Roundoff leaves eigenvalues near 1e-16 whose square roots would add ~1e-8.
    w[w < SPECTRAL_CUTOFF * max(w.max(initial=0.0), 1.0)] = 0.0
    f = float(np.sum(np.sqrt(w)) ** 2)
    if f > 1 + 1e-9:
        raise ValueError(f"fidelity {f} exceeds 1; inputs are not normalized states")
    return min(max(f, 0.0), 1.0)


def project_to_state(rho) -> np.ndarray:
    """Hermitize, clip negative eigenvalues and renormalize the trace."""
    rho = np.asarray(rho, dtype=complex)
    rho = 0.5 * (rho + linalg.dagger(rho))
    w, v = np.linalg.eigh(rho)
    w = np.clip(w, 0.0, None)
    if w.sum() <= 0:
        raise ZeroMatrix("estimate has no positive spectrum")
    out = (v * (w / w.sum())) @ linalg.dagger(v)
    return 0.5 * (out + linalg.dagger(out))


def linear_inversion(t_matrix, m) -> np.ndarray:
    t = np.asarray(getattr(t_matrix, "t", t_matrix), dtype=complex)
    mv = values(m)
    if t.shape[0] != mv.shape[0]:
        raise DimensionMismatch(f"T has {t.shape[0]} rows, m has {mv.shape[0]} entries")
    if np.linalg.matrix_rank(t, tol=1e-10) < t.shape[1]:
        raise RankDeficient("measurement matrix is not informationally complete")
    d = _side(t.shape[1])
    rho = linalg.unvec(np.linalg.pinv(t) @ mv, d)
    return project_to_state(rho)


@dataclass
class MLEResult:
    rho: np.ndarray
    iterations: int
    converged: bool


def mle_rhor(t_matrix, m, max_iters: int = 5000, tol: float = 1e-10, rho0=None) -> MLEResult:
    """Iterative RrhoR maximum-likelihood estimate.

    ``R = sum_k m_k / tr(P_k rho) P_k`` and ``rho <- R rho R / tr(R rho R)``.
    Stops when the Frobenius norm of the update drops below ``tol``; if
    ``max_iters`` is hit first the last iterate is returned with
    ``converged=False``.
    """
    t = np.asarray(getattr(t_matrix, "t", t_matrix), dtype=complex)
    mv = values(m)
    if np.any(mv < 0):
        raise ValueError("measurement frequencies must be nonnegative")
    if t.shape[0] != mv.shape[0]:
        raise DimensionMismatch(f"T has {t.shape[0]} rows, m has {mv.shape[0]} entries")
    d = _side(t.shape[1])
    # Row k of T is conj(vec(P_k)), so P_k = conj(unvec(row)).
    projectors = np.conjugate(t).reshape(-1, d, d)
    rho = np.eye(d, dtype=complex) / d if rho0 is None else np.array(rho0, dtype=complex)
    for it in range(1, max_iters + 1):
        probs = np.real(t @ linalg.vec(rho))
        ratio = np.where(mv > 0, mv / np.maximum(probs, 1e-300), 0.0)
        r = np.einsum("k,kij->ij", ratio, projectors)
        new = r @ rho @ r
        new = new / np.trace(new).real
        new = 0.5 * (new + linalg.dagger(new))
        step = np.linalg.norm(new - rho)
        rho = new
        if step < tol:
            return MLEResult(rho, it, True)
    return MLEResult(rho, max_iters, False)


@dataclass
class ReconstructionReport:
    rho_hat: np.ndarray
    fidelity_vs_reference: float | None
    method: str
    aggregation: str | None = None
    reference_label: str | None = None
    trace_path: str | None = None
    guess: np.ndarray | None = None

    def to_dict(self) -> dict:
        return {
            "method": self.method,
            "aggregation": self.aggregation,
            "fidelity": self.fidelity_vs_reference,
            "reference": self.reference_label,
            "trace": self.trace_path,
            "rho_hat": matrix_to_pairs(self.rho_hat),
        }

    @classmethod
    def from_dict(cls, d: dict) -> "ReconstructionReport":
        try:
            return cls(pairs_to_matrix(d["rho_hat"]), d["fidelity"], d["method"],
                       d.get("aggregation"), d.get("reference"), d.get("trace"))
        except (KeyError, TypeError, ValueError) as exc:
            raise ParseError(f"malformed report: {exc}") from exc

    def save(self, path) -> None:
        with open(path, "w", encoding="utf-8") as fh:
            json.dump(self.to_dict(), fh, indent=1)
            fh.write("\n")

    @classmethod
    def load(cls, path) -> "ReconstructionReport":
        with open(path, encoding="utf-8") as fh:
            return cls.from_dict(json.load(fh))

    def write_heatmap(self, path) -> None:
        """One ``row,col,re,im`` line per matrix entry."""
        with open(path, "w", encoding="utf-8", newline="\n") as fh:
            fh.write("row,col,re,im\n")
            for (i, j), z in np.ndenumerate(self.rho_hat):
                fh.write(f"{i},{j},{float(z.real)!r},{float(z.imag)!r}\n")


def matrix_to_pairs(a) -> list:
    a = np.asarray(a, dtype=complex)
    return [[[float(z.real), float(z.imag)] for z in row] for row in a]


def pairs_to_matrix(pairs) -> np.ndarray:
    arr = np.asarray(pairs, dtype=float)
    if arr.ndim != 3 or arr.shape[2] != 2:
        raise ParseError("expected nested (re, im) pairs")
    return arr[..., 0] + 1j * arr[..., 1]


def save_state(rho, path, label: str = "") -> None:
    with open(path, "w", encoding="utf-8") as fh:
        json.dump({"label": label, "rho": matrix_to_pairs(rho)}, fh, indent=1)
        fh.write("\n")


def load_state(path):
    """Returns ``(rho, label)`` from a state file written by :func:`save_state`."""
    with open(path, encoding="utf-8") as fh:
        try:
            d = json.load(fh)
        except json.JSONDecodeError as exc:
            raise ParseError(exc.msg, exc.lineno) from exc
    if "rho" in d:
        rho, label = pairs_to_matrix(d["rho"]), d.get("label", "")
    elif "rho_hat" in d:
        rho, label = pairs_to_matrix(d["rho_hat"]), d.get("method", "")
    else:
        raise ParseError("state file has no 'rho' entry")
    return check_density_matrix(rho, atol=1e-8), label


def reconstruct(dist: BitstringDistribution, reference=None, aggregation: str = "top1",
                model: IsingModel | None = None, beta: float | None = None, method: str = "vqe",
                reference_label: str | None = None, trace_path: str | None = None) -> ReconstructionReport:
    if method not in METHODS:
        raise ValueError(f"unknown method {method!r}")
    if model is not None and dist.counts and model.n != dist.n_bits:
        raise DimensionMismatch(f"model has {model.n} qubits, bitstrings have {dist.n_bits} bits")
    guess = aggregate_bitstrings(dist, aggregation, model, beta)
    rho_hat = physical_projection(guess)
    f = None
    if reference is not None:
        reference = np.asarray(reference, dtype=complex)
        if reference.shape != rho_hat.shape:
            raise DimensionMismatch(f"reference is {reference.shape}, reconstruction is {rho_hat.shape}")
        f = fidelity(rho_hat, reference)
    return ReconstructionReport(rho_hat, f, method, aggregation, reference_label, trace_path, guess)
