from math import sqrt

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from onewayrep.fock import (
    DimensionError,
    FockBasis,
    annihilation,
    creation,
    from_json,
    function_of_number,
    number_operator,
    partial_trace,
    projector_from_states,
    random_density_matrix,
    tensor_embed,
    to_json,
)


def lowering_element(basis, mode, out_idx, in_idx):
    """<out| a_mode |in> straight from the occupation vectors."""
    n_in = basis.occupation(in_idx)
    n_out = basis.occupation(out_idx)
    m = mode - 1
    if n_in[m] == 0:
        return 0.0
    expected = list(n_in)
    expected[m] -= 1
    return sqrt(n_in[m]) if tuple(expected) == n_out else 0.0


@given(st.integers(1, 3), st.integers(0, 4))
def test_dimension_and_round_trip(modes, cutoff):
    b = FockBasis(modes, cutoff)
    assert b.dim == (cutoff + 1) ** modes
    for k in range(b.dim):
        assert b.index(b.occupation(k)) == k


def test_index_order_is_lexicographic_first_mode_slowest():
    b = FockBasis(2, 2)
    assert [b.occupation(k) for k in range(4)] == [(0, 0), (0, 1), (0, 2), (1, 0)]


@pytest.mark.parametrize("modes,cutoff", [(0, 2), (2, -1), (1.5, 2)])
def test_invalid_basis(modes, cutoff):
    with pytest.raises(ValueError):
        FockBasis(modes, cutoff)


def test_ladder_examples():
    b = FockBasis(1, 3)
    a = annihilation(b, 1)
    assert np.allclose(a @ b.ket(1), b.ket(0))
    assert np.allclose(a @ b.ket(3), sqrt(3) * b.ket(2))
    assert np.allclose(a @ b.ket(0), 0)


def test_two_mode_matrix_element_by_enumeration():
    b = FockBasis(2, 4)
    a1 = annihilation(b, 1)
    assert np.allclose(a1 @ b.ket(4, 0), 2 * b.ket(3, 0))
    for mode in (1, 2):
        a = annihilation(b, mode)
        oracle = np.array([[lowering_element(b, mode, i, j) for j in range(b.dim)] for i in range(b.dim)])
        assert np.max(np.abs(a - oracle)) <= 1e-15


def test_mode_out_of_range():
    b = FockBasis(2, 2)
    with pytest.raises(ValueError):
        annihilation(b, 0)
    with pytest.raises(ValueError):
        annihilation(b, 3)


def test_number_operator_examples():
    b3 = FockBasis(3, 3)
    assert np.allclose(number_operator(b3) @ b3.ket(1, 1, 1), 3 * b3.ket(1, 1, 1))
    b1 = FockBasis(1, 3)
    assert np.allclose(number_operator(b1) @ b1.ket(0), 0)
    b2 = FockBasis(2, 4)
    assert np.allclose(number_operator(b2) @ b2.ket(2, 2), 4 * b2.ket(2, 2))
    total = sum(creation(b2, m) @ annihilation(b2, m) for m in (1, 2))
    assert np.allclose(total, number_operator(b2))


def test_commutator_is_identity_below_cutoff():
    for b in (FockBasis(1, 5), FockBasis(2, 3)):
        for m in range(1, b.modes + 1):
            a, ad = annihilation(b, m), creation(b, m)
            comm = a @ ad - ad @ a
            keep = b.occupations[:, m - 1] < b.cutoff
            sub = comm[np.ix_(keep, keep)]
            assert np.max(np.abs(sub - np.eye(keep.sum()))) <= 1e-12


def test_function_of_number_examples():
    b = FockBasis(1, 3)
    assert np.allclose(function_of_number(b, lambda n: 1.0**n), np.eye(4))
    damp = function_of_number(b, lambda n: sqrt(0.81) ** n)
    assert abs(damp[2, 2] - 0.81) <= 1e-15


@pytest.mark.parametrize("modes,cutoff", [(1, 4), (2, 3), (3, 2)])
def test_number_function_shifts_through_lowering(modes, cutoff):
    rng = np.random.default_rng(7)
    b = FockBasis(modes, cutoff)
    eta = rng.uniform(0.05, 0.95)
    f_n = function_of_number(b, lambda n: eta**n)
    f_nm1 = function_of_number(b, lambda n: eta ** (n - 1))
    for m in range(1, modes + 1):
        a = annihilation(b, m)
        assert np.max(np.abs(f_n @ a - a @ f_nm1)) <= 1e-12


def test_projector_examples():
    b = FockBasis(1, 3)
    p = projector_from_states([b.ket(1)])
    assert np.trace(p).real == pytest.approx(1)
    b3 = FockBasis(3, 3)
    one = (b3.ket(0, 0, 3) + b3.ket(0, 3, 0) + b3.ket(3, 0, 0)) / sqrt(3)
    p = projector_from_states([b3.ket(1, 1, 1), one])
    assert np.trace(p).real == pytest.approx(2, abs=1e-12)
    assert np.max(np.abs(p @ p - p)) <= 1e-12
    assert np.max(np.abs(p - p.conj().T)) <= 1e-12


def test_projector_rejects_non_orthogonal():
    b = FockBasis(1, 3)
    with pytest.raises(ValueError, match="Gram entry"):
        projector_from_states([b.ket(1), (b.ket(1) + b.ket(2)) / sqrt(2)])


def partial_trace_loop(rho, da, db):
    out = np.zeros((da, da), dtype=complex)
    for i in range(da):
        for j in range(da):
            out[i, j] = sum(rho[i * db + k, j * db + k] for k in range(db))
    return out


def test_partial_trace_examples():
    rng = np.random.default_rng(1)
    rho_a = random_density_matrix(3, rng)
    vac = np.array([1, 0, 0, 0], dtype=complex)
    assert np.max(np.abs(partial_trace(tensor_embed(rho_a, vac), [3, 4], keep=[0]) - rho_a)) <= 1e-12
    bell = np.array([1, 0, 0, 1]) / sqrt(2)
    assert np.allclose(partial_trace(np.outer(bell, bell), [2, 2], keep=[0]), np.eye(2) / 2)


def test_partial_trace_matches_loop_and_preserves_trace():
    rng = np.random.default_rng(2)
    for _ in range(50):
        rho = random_density_matrix(12, rng)
        out = partial_trace(rho, [3, 4], keep=[0])
        assert np.max(np.abs(out - partial_trace_loop(rho, 3, 4))) <= 1e-12
        assert abs(np.trace(out) - np.trace(rho)) <= 1e-12
        other = partial_trace(rho, [3, 4], keep=[1])
        assert abs(np.trace(other) - 1) <= 1e-12


def test_partial_trace_dimension_mismatch():
    with pytest.raises(DimensionError):
        partial_trace(np.eye(6), [2, 2], keep=[0])


@settings(max_examples=25)
@given(st.integers(0, 2**32 - 1))
def test_embed_then_trace_recovers_input(seed):
    rng = np.random.default_rng(seed)
    rho = random_density_matrix(4, rng)
    anc = rng.normal(size=3) + 1j * rng.normal(size=3)
    anc /= np.linalg.norm(anc)
    assert np.max(np.abs(partial_trace(tensor_embed(rho, anc), [4, 3], keep=[0]) - rho)) <= 1e-12


def test_json_round_trip():
    b = FockBasis(2, 2)
    op = annihilation(b, 2) + 1j * creation(b, 1)
    basis, back = from_json(to_json(b, op))
    assert basis == b
    assert np.array_equal(back, op)
    assert to_json(b, b.ket(1, 0))["entries"][3] == [1.0, 0.0]
