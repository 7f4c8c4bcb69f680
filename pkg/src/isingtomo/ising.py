"""Least-squares tomography cost as a diagonal Ising Hamiltonian.

Each real entry of ``vec(rho)`` becomes one binary variable ``p_j``, read off
a spin as ``p_j = (1 - z_j) / 2`` (bit 0 is spin +1). Substituting into

    f(p) = p^T Q p - 2 Re(t)^T p + m^T m,   Q = T^dag T,  t = T^dag m

gives ``H = sum_{j<k} J_jk z_j z_k + sum_j h_j z_j + offset`` with

    J_jk   = Re(Q_jk) / 2                                 (j < k)
    h_j    = -1/2 sum_k Re(Q_jk) + Re(t_j)
    offset = 1/4 sum_jk Re(Q_jk) + 1/4 sum_j Q_jj + m^T m - sum_j Re(t_j)

and ``H(b) == f(p(b))`` exactly for every bitstring ``b``. The diagonal term in
the offset comes from ``z_j**2 = 1``.

Bitstrings are indexed MSB-first: bit ``j`` of the integer ``i`` is
``(i >> (n - 1 - j)) & 1``, so enumeration order is lexicographic.
"""

from __future__ import annotations

import json
from dataclasses import dataclass

import numpy as np

from .errors import DimensionMismatch, ParseError, TooManyQubits
from .tomography import values

RESIDUE_TOL = 1e-10
MAX_BRUTE_FORCE_QUBITS = 24


@dataclass(frozen=True)
class QuadraticForm:
    q: np.ndarray
    t: np.ndarray
    constant: float
    scale: float = 1.0


@dataclass(frozen=True)
class IsingModel:
    """Ising Hamiltonian with a dense symmetric, zero-diagonal coupling table.

    ``j[a, b]`` is the coefficient of ``Z_a Z_b`` for ``a < b``; the lower
    triangle mirrors it.
    """

    j: np.ndarray
    h: np.ndarray
    offset: float

    def __post_init__(self):
        j = np.asarray(self.j, dtype=float)
        h = np.asarray(self.h, dtype=float)
        n = h.shape[0]
        if j.shape != (n, n):
            raise DimensionMismatch(f"couplings {j.shape} do not match {n} fields")
        if not np.allclose(j, j.T, rtol=0, atol=1e-12):
            raise ValueError("coupling table must be symmetric")
        if np.any(np.diag(j) != 0):
            raise ValueError("self-couplings are not allowed")
        if not (np.all(np.isfinite(j)) and np.all(np.isfinite(h)) and np.isfinite(self.offset)):
            raise ValueError("non-finite Ising coefficient")
        object.__setattr__(self, "j", j)
        object.__setattr__(self, "h", h)
        object.__setattr__(self, "offset", float(self.offset))

    @property
    def n(self) -> int:
        return self.h.shape[0]

    def couplings(self):
        """Nonzero ``(j, k, J_jk)`` triples with ``j < k``."""
        a, b = np.nonzero(np.triu(self.j, 1))
        return [(int(x), int(y), float(self.j[x, y])) for x, y in zip(a, b)]

    def to_dict(self) -> dict:
        return {
            "n": self.n,
            "couplings": [list(c) for c in self.couplings()],
            "fields": [float(x) for x in self.h],
            "offset": self.offset,
        }

    @classmethod
    def from_dict(cls, d: dict) -> "IsingModel":
        try:
            n = int(d["n"])
            h = np.asarray(d["fields"], dtype=float)
            j = np.zeros((n, n))
            for a, b, val in d["couplings"]:
                a, b = int(a), int(b)
                if a == b or not (0 <= a < n and 0 <= b < n):
                    raise ParseError(f"bad coupling index pair ({a}, {b})")
                j[a, b] = j[b, a] = float(val)
            offset = float(d["offset"])
        except (KeyError, TypeError, ValueError) as exc:
            raise ParseError(f"malformed Ising model: {exc}") from exc
        if h.shape != (n,):
            raise ParseError(f"expected {n} fields, got {h.size}")
        return cls(j, h, offset)

    def save(self, path) -> None:
        with open(path, "w", encoding="utf-8") as fh:
            json.dump(self.to_dict(), fh, indent=1)
            fh.write("\n")

    @classmethod
    def load(cls, path) -> "IsingModel":
        with open(path, encoding="utf-8") as fh:
            try:
                d = json.load(fh)
            except json.JSONDecodeError as exc:
                raise ParseError(exc.msg, exc.lineno) from exc
        return cls.from_dict(d)


def _real(x) -> np.ndarray:
    x = np.asarray(x)
    if np.iscomplexobj(x):
        # Only Re() enters the coefficients; imaginary parts are dropped.
        return np.ascontiguousarray(x.real)
    return x.astype(float)


def quadratic_form(t_matrix, m, scale: float = 1.0) -> QuadraticForm:
    """Expand ``||scale * m - T p||^2`` into ``(Q, t, constant)``.

    With ``scale`` different from 1 the binary variables encode
    ``scale * vec(rho)``: a two-qubit maximally entangled state has entries
    ``1/2``, so ``scale=2`` makes its support pattern an exact 0/1 solution.
    """
    t_mat = np.asarray(getattr(t_matrix, "t", t_matrix), dtype=complex)
    mv = values(m) * scale
    if t_mat.ndim != 2 or t_mat.shape[0] != mv.shape[0]:
        raise DimensionMismatch(f"T has shape {t_mat.shape}, m has length {mv.shape[0]}")
    td = t_mat.conj().T
    return QuadraticForm(td @ t_mat, td @ mv, float(np.vdot(mv, mv).real), float(scale))


def cost(p, qf: QuadraticForm) -> float:
    p = np.asarray(p, dtype=float)
    if p.shape != (qf.q.shape[0],):
        raise DimensionMismatch(f"p has length {p.size}, form has {qf.q.shape[0]} variables")
    return float((p @ qf.q @ p).real - 2 * np.vdot(qf.t, p).real + qf.constant)


def residual_cost(p, t_matrix, m, scale: float = 1.0) -> float:
    """``||scale * m - T p||^2`` computed directly, without expanding the square."""
    t_mat = np.asarray(getattr(t_matrix, "t", t_matrix))
    r = scale * values(m) - t_mat @ np.asarray(p, dtype=float)
    return float(np.vdot(r, r).real)


def ising_coefficients(qf: QuadraticForm) -> IsingModel:
    q = _real(qf.q)
    t = _real(qf.t)
    n = q.shape[0]
    j = 0.5 * q
    np.fill_diagonal(j, 0.0)
    j = 0.5 * (j + j.T)
    h = -0.5 * q.sum(axis=1) + t
    offset = 0.25 * q.sum() + 0.25 * np.trace(q) + qf.constant - t.sum()
    j[np.abs(j) < RESIDUE_TOL * max(1.0, np.abs(q).max(initial=0.0))] = 0.0
    if n == 0:
        return IsingModel(np.zeros((0, 0)), np.zeros(0), offset)
    return IsingModel(j, h, offset)


def spins(bits) -> np.ndarray:
    """Map bits to spins: 0 -> +1, 1 -> -1. Works on any array shape."""
    return 1.0 - 2.0 * np.asarray(bits, dtype=float)


def bits_from_spins(z) -> np.ndarray:
    return (np.asarray(z) < 0).astype(np.int8)


def energy_of_spins(z, model: IsingModel) -> np.ndarray:
    """Energy for spin (or spin-expectation) vectors; last axis is the qubit."""
    z = np.asarray(z, dtype=float)
    if z.shape[-1] != model.n:
        raise DimensionMismatch(f"{z.shape[-1]} spins for a {model.n}-qubit model")
    return 0.5 * np.einsum("...i,ij,...j->...", z, model.j, z) + z @ model.h + model.offset


def energy_of_bitstring(b, model: IsingModel) -> float:
    b = np.asarray(b)
    if b.ndim != 1:
        raise DimensionMismatch("expected a single bitstring")
    return float(energy_of_spins(spins(b), model))


def index_to_bits(i: int, n: int) -> np.ndarray:
    return np.array([(i >> (n - 1 - k)) & 1 for k in range(n)], dtype=np.int8)


def bits_to_index(b) -> int:
    out = 0
    for bit in b:
        out = (out << 1) | int(bit)
    return out


def bits_to_str(b) -> str:
    return "".join(str(int(x)) for x in b)


def str_to_bits(s: str) -> np.ndarray:
    if not s or set(s) - {"0", "1"}:
        raise ParseError(f"not a bitstring: {s!r}")
    return np.array([int(c) for c in s], dtype=np.int8)


def _all_bits(start: int, stop: int, n: int) -> np.ndarray:
    idx = np.arange(start, stop, dtype=np.int64)
    shifts = np.arange(n - 1, -1, -1, dtype=np.int64)
    return ((idx[:, None] >> shifts) & 1).astype(np.int8)


def all_energies(model: IsingModel, chunk: int = 1 << 16):
    """Yield ``(start_index, energies)`` blocks over all ``2**n`` bitstrings."""
    n = model.n
    total = 1 << n
    for start in range(0, total, chunk):
        stop = min(total, start + chunk)
        yield start, energy_of_spins(spins(_all_bits(start, stop, n)), model)


def brute_force_minimum(model: IsingModel, tie_tol: float = 1e-12):
    """Exhaustive ground state of ``model``.

    Returns ``(bits, energy)``. Energies within ``tie_tol`` (relative to
    ``max(1, |E|)``) of the minimum count as ties, resolved in favour of the
    smallest integer value of the bitstring.
    """
    n = model.n
    if n > MAX_BRUTE_FORCE_QUBITS:
        raise TooManyQubits(f"{n} qubits exceeds the enumeration limit of {MAX_BRUTE_FORCE_QUBITS}")
    best_i, best_e = 0, np.inf
    for start, e in all_energies(model):
        k = int(np.argmin(e))
        emin = e[k]
        if emin < best_e - tie_tol * max(1.0, abs(best_e) if np.isfinite(best_e) else 1.0):
            first = int(np.flatnonzero(e <= emin + tie_tol * max(1.0, abs(emin)))[0])
            best_i, best_e = start + first, float(e[first])
    return index_to_bits(best_i, n), best_e
