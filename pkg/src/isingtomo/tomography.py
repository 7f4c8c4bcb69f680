"""Measurement model for two-photon OAM qubit tomography.

Each photon is a logical qubit with ``|l> -> |0>`` and ``|-l> -> |1>``.
It is projected onto the six Pauli eigenstates in the fixed order
``z+, z-, x+, x-, y+, y-``; the joint settings are all 36 tensor products,
photon A outer and photon B inner. Index ``k = 6 * a + b``.

Outcomes are grouped by basis pair: for fixed Pauli bases on both photons the
four sign combinations form one complete projective measurement. Count
normalization works per group.
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass

import numpy as np

from . import linalg
from .errors import (
    DimensionMismatch,
    EmptyGroup,
    InvalidFlux,
    InvalidWeights,
    MissingSetting,
    ParseError,
)

SINGLE_LABELS = ("z+", "z-", "x+", "x-", "y+", "y-")
BASES = ("z", "x", "y")
SOURCES = ("synthetic-exact", "synthetic-noisy", "ingested")

_S = 1 / np.sqrt(2)
_KETS = (
    np.array([1, 0], dtype=complex),
    np.array([0, 1], dtype=complex),
    np.array([_S, _S], dtype=complex),
    np.array([_S, -_S], dtype=complex),
    np.array([_S, 1j * _S], dtype=complex),
    np.array([_S, -1j * _S], dtype=complex),
)

TWO_QUBIT_LABELS = tuple(a + b for a, b in itertools.product(SINGLE_LABELS, SINGLE_LABELS))
COUNT_HEADER = "label,setting_a,setting_b,coincidences"


@dataclass(frozen=True)
class ProjectorSet:
    projectors: tuple[np.ndarray, ...]
    labels: tuple[str, ...]

    def __len__(self):
        return len(self.projectors)

    @property
    def dim(self) -> int:
        return self.projectors[0].shape[0]


@dataclass(frozen=True)
class MeasurementMatrix:
    t: np.ndarray
    projector_labels: tuple[str, ...]

    @property
    def shape(self):
        return self.t.shape

    @property
    def dim(self) -> int:
        """Side length of the density matrix the rows act on."""
        return int(round(np.sqrt(self.t.shape[1])))


@dataclass(frozen=True)
class MeasurementVector:
    m: np.ndarray
    source: str = "synthetic-exact"

    def __post_init__(self):
        if self.source not in SOURCES:
            raise ValueError(f"unknown source {self.source!r}")

    def __len__(self):
        return len(self.m)


@dataclass(eq=False)
class CountRecord:
    counts: np.ndarray
    labels: tuple[str, ...] = TWO_QUBIT_LABELS
    metadata: str = ""

    def __post_init__(self):
        self.counts = np.asarray(self.counts, dtype=np.int64)
        self.labels = tuple(self.labels)
        if self.counts.shape != (len(self.labels),):
            raise DimensionMismatch(
                f"{self.counts.size} counts for {len(self.labels)} labels")
        if np.any(self.counts < 0):
            raise ValueError("counts must be nonnegative")

    def __eq__(self, other):
        if not isinstance(other, CountRecord):
            return NotImplemented
        return (self.labels == other.labels
                and np.array_equal(self.counts, other.counts)
                and self.metadata == other.metadata)


def values(m) -> np.ndarray:
    """Raw float array behind a MeasurementVector or array-like."""
    return np.asarray(getattr(m, "m", m), dtype=float)


def single_qubit_projectors() -> ProjectorSet:
    projectors = tuple(np.outer(k, k.conj()) for k in _KETS)
    return ProjectorSet(projectors, SINGLE_LABELS)


def two_qubit_projector_set() -> ProjectorSet:
    single = single_qubit_projectors().projectors
    projectors = tuple(linalg.kron(a, b) for a, b in itertools.product(single, single))
    return ProjectorSet(projectors, TWO_QUBIT_LABELS)


def measurement_matrix(ps: ProjectorSet) -> MeasurementMatrix:
    """Stack ``conj(vec(P_k))`` as rows so that ``T @ vec(rho) = tr(P_k rho)``."""
    if len(ps) == 0:
        raise DimensionMismatch("empty projector set")
    shapes = {p.shape for p in ps.projectors}
    if len(shapes) != 1:
        raise DimensionMismatch(f"projectors differ in shape: {sorted(shapes)}")
    t = np.array([np.conjugate(linalg.vec(p)) for p in ps.projectors])
    return MeasurementMatrix(t, tuple(ps.labels))


def basis_groups() -> list[np.ndarray]:
    """Indices of the 9 basis-pair groups, each ordered (++, +-, -+, --)."""
    groups = []
    for u, v in itertools.product(range(3), range(3)):
        idx = [6 * (2 * u + sa) + (2 * v + sb) for sa in (0, 1) for sb in (0, 1)]
        groups.append(np.array(idx))
    return groups


def bell_state(kind: str = "correlated", weights=None) -> np.ndarray:
    """Density matrix of a (weighted) two-qubit Bell-type pure state.

    ``correlated`` is ``w0|00> + w1|11>`` and ``anti_correlated`` is
    ``w0|01> + w1|10>``; the weights are amplitudes and get normalized.
    """
    if weights is None:
        weights = (1.0, 1.0)
    w = np.asarray(weights, dtype=float)
    if w.shape != (2,) or np.any(w < 0) or not np.any(w > 0) or not np.all(np.isfinite(w)):
        raise InvalidWeights(f"weights must be two nonnegative reals, not both zero: {weights!r}")
    w = w / np.linalg.norm(w)
    psi = np.zeros(4, dtype=complex)
    if kind == "correlated":
        psi[0], psi[3] = w
    elif kind == "anti_correlated":
        psi[1], psi[2] = w
    else:
        raise InvalidWeights(f"unknown Bell state kind {kind!r}")
    return np.outer(psi, psi.conj())


def check_density_matrix(rho, atol: float = linalg.ATOL) -> np.ndarray:
    """Validate Hermiticity, unit trace and positivity; returns the array."""
    rho = linalg.as_matrix(rho)
    w, _ = linalg.hermitian_eig(rho, atol=atol)
    if abs(np.trace(rho) - 1) > atol:
        raise ValueError(f"trace {np.trace(rho).real:.12g} != 1")
    linalg.clip_eigenvalues(w, atol=atol)
    return rho


def forward_probabilities(rho, ps: ProjectorSet) -> MeasurementVector:
    rho = linalg.as_matrix(rho)
    if rho.shape != (ps.dim, ps.dim):
        raise DimensionMismatch(f"state is {rho.shape}, projectors are {ps.dim}x{ps.dim}")
    m = np.array([np.trace(p @ rho).real for p in ps.projectors])
    return MeasurementVector(m, "synthetic-exact")


def simulate_counts(m, mean_counts_per_group: float, seed: int) -> CountRecord:
    """Poisson coincidence counts with mean ``mean_counts_per_group * m[k]``."""
    if not mean_counts_per_group > 0:
        raise InvalidFlux(f"mean counts must be positive, got {mean_counts_per_group}")
    probs = np.clip(values(m), 0.0, None)
    rng = np.random.default_rng(seed)
    counts = rng.poisson(mean_counts_per_group * probs)
    return CountRecord(counts, TWO_QUBIT_LABELS, f"poisson mean={mean_counts_per_group:g} seed={seed}")


def expected_counts(m, mean_counts_per_group: float) -> CountRecord:
    """Noise-free counts, ``rint(mean * m)``."""
    if not mean_counts_per_group > 0:
        raise InvalidFlux(f"mean counts must be positive, got {mean_counts_per_group}")
    counts = np.rint(mean_counts_per_group * np.clip(values(m), 0.0, None))
    return CountRecord(counts.astype(np.int64), TWO_QUBIT_LABELS, f"exact mean={mean_counts_per_group:g}")


def normalize_counts(c: CountRecord, source: str = "ingested") -> MeasurementVector:
    counts = np.asarray(c.counts, dtype=float)
    if counts.shape != (36,):
        raise DimensionMismatch(f"expected 36 counts, got {counts.shape}")
    m = np.empty_like(counts)
    for g, idx in enumerate(basis_groups()):
        total = counts[idx].sum()
        if total <= 0:
            labels = ", ".join(c.labels[i] for i in idx)
            raise EmptyGroup(f"basis group {g} ({labels}) has no counts")
        m[idx] = counts[idx] / total
    return MeasurementVector(m, source)


def save_counts(c: CountRecord, path) -> None:
    lines = [f"# {line}" for line in c.metadata.split("\n")] if c.metadata else []
    lines.append(COUNT_HEADER)
    for label, n in zip(c.labels, c.counts):
        lines.append(f"{label},{label[:2]},{label[2:]},{int(n)}")
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        fh.write("\n".join(lines) + "\n")


def load_counts(path) -> CountRecord:
    """Read a coincidence-count file.

    Rows may appear in any order; the returned record uses the canonical
    label order. Comment lines (``#``) before the header become metadata.
    """
    found: dict[str, int] = {}
    meta: list[str] = []
    header_seen = False
    with open(path, encoding="utf-8") as fh:
        for lineno, raw in enumerate(fh, start=1):
            line = raw.rstrip("\r\n")
            if not line.strip():
                continue
            if line.startswith("#"):
                if not header_seen:
                    meta.append(line[2:] if line.startswith("# ") else line[1:])
                continue
            if not header_seen:
                if [f.strip() for f in line.split(",")] != COUNT_HEADER.split(","):
                    raise ParseError(f"expected header {COUNT_HEADER!r}", lineno)
                header_seen = True
                continue
            fields = [f.strip() for f in line.split(",")]
            if len(fields) != 4:
                raise ParseError(f"expected 4 fields, got {len(fields)}", lineno)
            label, sa, sb, n = fields
            if label not in TWO_QUBIT_LABELS:
                raise ParseError(f"unknown setting label {label!r}", lineno)
            if (sa, sb) != (label[:2], label[2:]):
                raise ParseError(f"settings {sa},{sb} disagree with label {label}", lineno)
            if label in found:
                raise ParseError(f"duplicate setting {label}", lineno)
            try:
                count = int(n)
            except ValueError:
                raise ParseError(f"coincidences {n!r} is not an integer", lineno) from None
            if count < 0:
                raise ParseError(f"negative coincidences {count}", lineno)
            found[label] = count
    if not header_seen:
        raise ParseError("missing header line")
    missing = [lab for lab in TWO_QUBIT_LABELS if lab not in found]
    if missing:
        raise MissingSetting(f"missing settings: {', '.join(missing)}")
    counts = np.array([found[lab] for lab in TWO_QUBIT_LABELS], dtype=np.int64)
    return CountRecord(counts, TWO_QUBIT_LABELS, "\n".join(meta))


def save_probabilities(m, path) -> None:
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        fh.write("label,probability\n")
        for label, p in zip(TWO_QUBIT_LABELS, values(m)):
            fh.write(f"{label},{float(p)!r}\n")


def load_probabilities(path) -> MeasurementVector:
    found = {}
    with open(path, encoding="utf-8") as fh:
        for lineno, raw in enumerate(fh, start=1):
            line = raw.strip()
            if not line or line.startswith("#") or line == "label,probability":
                continue
            try:
                label, p = (f.strip() for f in line.split(","))
                found[label] = float(p)
            except ValueError:
                raise ParseError(f"malformed row {line!r}", lineno) from None
    missing = [lab for lab in TWO_QUBIT_LABELS if lab not in found]
    if missing:
        raise MissingSetting(f"missing settings: {', '.join(missing)}")
    return MeasurementVector(np.array([found[lab] for lab in TWO_QUBIT_LABELS]), "synthetic-exact")


def load_measurements(path) -> MeasurementVector:
    """Load either a count file (normalized per group) or a probability file."""
    with open(path, encoding="utf-8") as fh:
        for line in fh:
            if line.strip() and not line.startswith("#"):
                first = line.strip()
                break
        else:
            raise ParseError("file is empty")
    if first == "label,probability":
        return load_probabilities(path)
    return normalize_counts(load_counts(path))
