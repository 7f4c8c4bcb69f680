import itertools

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from isingtomo import ising
from isingtomo.errors import DimensionMismatch, TooManyQubits


def loop_energy(bits, model):
    """Ising energy by explicit double loop over j<k."""
    z = [1 - 2 * b for b in bits]
    e = model.offset
    for j in range(model.n):
        e += model.h[j] * z[j]
        for k in range(j + 1, model.n):
            e += model.j[j, k] * z[j] * z[k]
    return e


def random_form(rng, n, rows=None):
    rows = rows or n + 2
    t = rng.normal(size=(rows, n)) + 1j * rng.normal(size=(rows, n))
    m = rng.uniform(0, 1, rows)
    return t, m, ising.quadratic_form(t, m)


def test_quadratic_form_identity_measurement():
    qf = ising.quadratic_form(np.eye(4), [1, 0, 0, 0])
    np.testing.assert_array_equal(qf.q, np.eye(4))
    np.testing.assert_array_equal(qf.t, [1, 0, 0, 0])
    assert qf.constant == 1


def test_quadratic_form_psd(tmat):
    qf = ising.quadratic_form(tmat, np.full(36, 0.25))
    assert np.allclose(qf.q, qf.q.conj().T)
    assert np.linalg.eigvalsh(qf.q).min() > -1e-10
    assert qf.constant >= 0


def test_quadratic_form_dimension_mismatch(tmat):
    with pytest.raises(DimensionMismatch):
        ising.quadratic_form(tmat, np.zeros(35))
    with pytest.raises(DimensionMismatch):
        ising.cost(np.zeros(3), ising.quadratic_form(tmat, np.zeros(36)))


def test_cost_matches_residual(rng, tmat, phi_plus):
    rho, m, qf, _ = phi_plus
    assert abs(ising.cost(np.zeros(16), qf) - qf.constant) < 1e-15
    # Unscaled encoding: the exact real solution has zero residual.
    qf1 = ising.quadratic_form(tmat, m)
    assert abs(ising.cost(rho.real.ravel(), qf1)) < 1e-12
    assert abs(ising.cost(2 * rho.real.ravel(), qf)) < 1e-12
    for _ in range(20):
        p = rng.normal(size=16)
        direct = ising.residual_cost(p, tmat, m, scale=2.0)
        assert abs(ising.cost(p, qf) - direct) < 1e-10
        assert ising.cost(p, qf) >= -1e-10


def test_one_variable_case():
    q, tau, c = 3.0, 0.7, 1.3
    qf = ising.QuadraticForm(np.array([[q]]), np.array([tau]), c)
    model = ising.ising_coefficients(qf)
    assert abs(model.h[0] - (-q / 2 + tau)) < 1e-15
    assert abs(model.offset - (q / 2 + c - tau)) < 1e-15
    assert abs(ising.energy_of_bitstring([0], model) - c) < 1e-15
    assert abs(ising.energy_of_bitstring([1], model) - (q - 2 * tau + c)) < 1e-14


def test_diagonal_q_has_no_couplings():
    qf = ising.QuadraticForm(np.diag([1.0, 2.0, 3.0]), np.array([0.1, 0.2, 0.3]), 0.5)
    assert ising.ising_coefficients(qf).couplings() == []


def test_imaginary_antisymmetric_part_ignored(rng):
    _, _, qf = random_form(rng, 5)
    a = rng.normal(size=(5, 5))
    skew = 1j * (a - a.T)
    m1 = ising.ising_coefficients(qf)
    m2 = ising.ising_coefficients(ising.QuadraticForm(qf.q + skew, qf.t, qf.constant))
    np.testing.assert_array_equal(m1.j, m2.j)
    np.testing.assert_array_equal(m1.h, m2.h)
    assert m1.offset == m2.offset


@given(st.integers(2, 8), st.integers(0, 2**32 - 1))
@settings(max_examples=40, deadline=None)
def test_mapping_identity_property(n, seed):
    rng = np.random.default_rng(seed)
    t, m, qf = random_form(rng, n)
    model = ising.ising_coefficients(qf)
    for bits in itertools.product((0, 1), repeat=n):
        p = np.array(bits, dtype=float)
        assert abs(ising.energy_of_bitstring(bits, model) - ising.residual_cost(p, t, m)) < 1e-9


def test_mapping_identity_tomography_exhaustive(tmat, phi_plus):
    _, m, qf, model = phi_plus
    enumerated = np.concatenate([e for _, e in ising.all_energies(model)])
    bits = ising._all_bits(0, 1 << 16, 16).astype(float)
    direct = np.einsum("bi,ij,bj->b", bits, qf.q.real, bits) - 2 * bits @ qf.t.real + qf.constant
    residual = np.sum(np.abs(2 * m.m[None, :] - bits @ tmat.t.T) ** 2, axis=1)
    assert np.max(np.abs(enumerated - residual)) < 1e-9
    assert np.max(np.abs(direct - residual)) < 1e-9


def test_energy_examples(rng):
    _, _, qf = random_form(rng, 6)
    model = ising.ising_coefficients(qf)
    zero = np.zeros(6, dtype=int)
    expected = np.triu(model.j, 1).sum() + model.h.sum() + model.offset
    assert abs(ising.energy_of_bitstring(zero, model) - expected) < 1e-12
    for _ in range(20):
        b = rng.integers(0, 2, 6)
        assert abs(ising.energy_of_bitstring(b, model) - loop_energy(b, model)) < 1e-12
        j = int(rng.integers(6))
        z = 1 - 2 * b
        flipped = b.copy()
        flipped[j] ^= 1
        delta = -2 * z[j] * (model.h[j] + sum(model.j[j, k] * z[k] for k in range(6) if k != j))
        got = ising.energy_of_bitstring(flipped, model) - ising.energy_of_bitstring(b, model)
        assert abs(got - delta) < 1e-12
    with pytest.raises(DimensionMismatch):
        ising.energy_of_bitstring([0, 1], model)


def test_bit_conventions():
    assert ising.bits_to_index([1, 0, 0]) == 4
    np.testing.assert_array_equal(ising.index_to_bits(6, 4), [0, 1, 1, 0])
    assert ising.bits_to_str([1, 0, 1]) == "101"
    np.testing.assert_array_equal(ising.str_to_bits("011"), [0, 1, 1])
    np.testing.assert_array_equal(ising.spins([0, 1]), [1, -1])
    np.testing.assert_array_equal(ising._all_bits(0, 4, 2), [[0, 0], [0, 1], [1, 0], [1, 1]])


def test_brute_force_single_spin():
    model = ising.IsingModel(np.zeros((1, 1)), np.array([-1.0]), 0.0)
    bits, e = ising.brute_force_minimum(model)
    assert list(bits) == [0] and e == -1.0


def test_brute_force_tie_breaking():
    model = ising.IsingModel(np.zeros((3, 3)), np.zeros(3), 2.0)
    bits, e = ising.brute_force_minimum(model)
    assert list(bits) == [0, 0, 0] and e == 2.0
    # Two degenerate ground states 011 and 110: lowest integer wins.
    j = np.zeros((3, 3))
    j[0, 2] = j[2, 0] = 1.0
    model = ising.IsingModel(j, np.array([0.0, 1.0, 0.0]), 0.0)
    energies = {b: loop_energy(b, model) for b in itertools.product((0, 1), repeat=3)}
    best = min(energies.values())
    ties = sorted(b for b, e in energies.items() if abs(e - best) < 1e-12)
    bits, e = ising.brute_force_minimum(model)
    assert tuple(bits) == ties[0] and len(ties) > 1


def test_brute_force_matches_enumeration(rng):
    for n in range(2, 9):
        _, _, qf = random_form(rng, n)
        model = ising.ising_coefficients(qf)
        energies = {b: loop_energy(b, model) for b in itertools.product((0, 1), repeat=n)}
        bits, e = ising.brute_force_minimum(model)
        assert abs(e - min(energies.values())) < 1e-12
        assert abs(energies[tuple(bits)] - e) < 1e-12


def test_brute_force_chunked_equals_serial(rng):
    _, _, qf = random_form(rng, 10)
    model = ising.ising_coefficients(qf)
    full = np.concatenate([e for _, e in ising.all_energies(model, chunk=1 << 10)])
    chunked = np.concatenate([e for _, e in ising.all_energies(model, chunk=37)])
    np.testing.assert_array_equal(full, chunked)
    bits, e = ising.brute_force_minimum(model)
    assert ising.bits_to_index(bits) == int(np.argmin(full))


def test_brute_force_bell_patterns(phi_plus, psi_plus, rng):
    for inst, ones in ((phi_plus, {0, 3, 12, 15}), (psi_plus, {5, 6, 9, 10})):
        model = inst[3]
        bits, e = ising.brute_force_minimum(model)
        assert set(np.flatnonzero(bits)) == ones
        assert abs(e) < 1e-9
        for _ in range(1000):
            assert e <= ising.energy_of_bitstring(rng.integers(0, 2, 16), model) + 1e-12


def test_unscaled_encoding_is_degenerate(tmat, projector_set):
    # With per-group normalized data and no rescaling, the empty pattern and
    # the Bell support pattern have the same cost m^T m.
    from isingtomo import tomography
    rho = tomography.bell_state("correlated")
    m = tomography.forward_probabilities(rho, projector_set)
    qf = ising.quadratic_form(tmat, m)
    p = np.zeros(16)
    p[[0, 3, 12, 15]] = 1
    assert abs(ising.cost(p, qf) - ising.cost(np.zeros(16), qf)) < 1e-12


def test_quarter_coupling_energy_scale(tmat, projector_set):
    """The quarter-coupling convention puts the Bell ground state at -8.5.

    That convention uses Re(Q_jk)/4 on a j<k sum and leave the diagonal
    Q_jj/4 out of the offset; with data scaled by 2 the Bell support pattern
    is their ground state at -8.5 and single-bit errors sit at -7.5.
    """
    from isingtomo import tomography
    for kind, ones in (("correlated", [0, 3, 12, 15]), ("anti_correlated", [5, 6, 9, 10])):
        m = 2 * tomography.forward_probabilities(tomography.bell_state(kind), projector_set).m
        q = (tmat.t.conj().T @ tmat.t).real
        t = (tmat.t.conj().T @ m).real
        j = q / 4
        np.fill_diagonal(j, 0)
        quarter = ising.IsingModel(j, -0.5 * q.sum(1) + t, q.sum() / 4 + m @ m - t.sum())
        bits, e = ising.brute_force_minimum(quarter)
        assert list(np.flatnonzero(bits)) == ones
        assert abs(e - (-8.5)) < 1e-9
        energies = np.sort(np.concatenate([x for _, x in ising.all_energies(quarter)]))
        assert abs(energies[1] - (-7.5)) < 1e-9


def test_too_many_qubits():
    model = ising.IsingModel(np.zeros((25, 25)), np.zeros(25), 0.0)
    with pytest.raises(TooManyQubits):
        ising.brute_force_minimum(model)


def test_model_serialization_roundtrip(tmp_path, phi_plus):
    model = phi_plus[3]
    model.save(tmp_path / "m.json")
    back = ising.IsingModel.load(tmp_path / "m.json")
    np.testing.assert_array_equal(back.j, model.j)
    np.testing.assert_array_equal(back.h, model.h)
    assert back.offset == model.offset
    d = model.to_dict()
    assert set(d) == {"n", "couplings", "fields", "offset"}
    assert all(a < b for a, b, _ in d["couplings"])


def test_model_validation():
    with pytest.raises(ValueError):
        ising.IsingModel(np.eye(2), np.zeros(2), 0.0)
    with pytest.raises(ValueError):
        ising.IsingModel(np.array([[0, 1], [2, 0]]), np.zeros(2), 0.0)
    with pytest.raises(ValueError):
        ising.IsingModel(np.zeros((2, 2)), np.array([np.inf, 0]), 0.0)
