from math import log, pi, sqrt

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from onewayrep.fock import FockBasis, binomial_survival, ket_bra, random_density_matrix
from onewayrep.loss import (
    LindbladParams,
    StepSizeError,
    apply_channel,
    build_loss_channel,
    lindblad_evolve,
    photon_number,
    representation_equivalence_report,
    stinespring_loss,
)

B1 = FockBasis(1, 3)


def number_state(b, *occ):
    v = b.ket(*occ)
    return ket_bra(v, v)


def test_identity_at_unit_transmissivity():
    ch = build_loss_channel(FockBasis(2, 2), 1.0)
    assert len(ch) == 1
    assert np.allclose(ch.kraus_ops[0], np.eye(9))


def test_single_loss_matrix_element():
    ch = build_loss_channel(B1, 0.75)
    assert abs(ch.op((1,))[0, 1] - 0.5) <= 1e-15


@pytest.mark.parametrize("basis", [B1, FockBasis(2, 4), FockBasis(3, 3)])
@pytest.mark.parametrize("eta", [0.1, 0.5, 0.93])
def test_completeness(basis, eta):
    assert build_loss_channel(basis, eta).completeness_residual() <= 1e-12


@pytest.mark.parametrize("eta", [0.0, -0.2, 1.5])
def test_eta_out_of_range(eta):
    with pytest.raises(ValueError):
        build_loss_channel(B1, eta)


def test_vacuum_is_fixed():
    for eta in (0.2, 0.7):
        out = apply_channel(build_loss_channel(B1, eta), number_state(B1, 0))
        assert np.allclose(out, number_state(B1, 0))


def test_one_photon_by_hand():
    out = apply_channel(build_loss_channel(B1, 0.6), number_state(B1, 1))
    assert np.max(np.abs(out - (0.6 * number_state(B1, 1) + 0.4 * number_state(B1, 0)))) <= 1e-15


@pytest.mark.parametrize("eta", [0.15, 0.5, 0.88])
def test_number_states_follow_binomial_survival(eta):
    ch = build_loss_channel(B1, eta)
    for n in range(4):
        out = apply_channel(ch, number_state(B1, n))
        diag = np.real(np.diag(out))
        expected = [binomial_survival(n, k, eta) if k <= n else 0.0 for k in range(4)]
        assert np.max(np.abs(diag - expected)) <= 1e-14
        assert np.max(np.abs(out - np.diag(np.diag(out)))) <= 1e-15
    assert np.real(apply_channel(ch, number_state(B1, 3))[3, 3]) == pytest.approx(eta**3, abs=1e-15)


def test_multimode_is_tensor_product():
    b = FockBasis(2, 2)
    eta = 0.7
    rho = np.kron(number_state(FockBasis(1, 2), 2), number_state(FockBasis(1, 2), 1))
    out = apply_channel(build_loss_channel(b, eta), rho)
    single = build_loss_channel(FockBasis(1, 2), eta)
    expected = np.kron(
        apply_channel(single, number_state(FockBasis(1, 2), 2)),
        apply_channel(single, number_state(FockBasis(1, 2), 1)),
    )
    assert np.max(np.abs(out - expected)) <= 1e-15


@settings(max_examples=30, deadline=None)
@given(st.floats(0.01, 1.0), st.floats(0.01, 1.0), st.integers(0, 2**32 - 1))
def test_channels_compose_multiplicatively(e1, e2, seed):
    b = FockBasis(2, 2)
    rho = random_density_matrix(b.dim, np.random.default_rng(seed))
    twice = apply_channel(build_loss_channel(b, e1), apply_channel(build_loss_channel(b, e2), rho))
    once = apply_channel(build_loss_channel(b, e1 * e2), rho)
    assert np.max(np.abs(twice - once)) <= 1e-10


@settings(max_examples=30, deadline=None)
@given(st.floats(0.01, 1.0), st.integers(0, 2**32 - 1))
def test_trace_positivity_and_photon_number(eta, seed):
    b = FockBasis(2, 3)
    rho = random_density_matrix(b.dim, np.random.default_rng(seed))
    out = apply_channel(build_loss_channel(b, eta), rho)
    assert abs(np.trace(out) - 1) <= 1e-10
    assert np.linalg.eigvalsh(out).min() >= -1e-10
    assert photon_number(b, out) <= photon_number(b, rho) + 1e-12


def test_beamsplitter_limits():
    rho = random_density_matrix(4, np.random.default_rng(3))
    assert np.max(np.abs(stinespring_loss(B1, rho, 0.0) - rho)) <= 1e-12
    out = stinespring_loss(B1, rho, pi / 2)
    assert np.max(np.abs(out - number_state(B1, 0))) <= 1e-12


def test_beamsplitter_half_transmission():
    out = stinespring_loss(B1, number_state(B1, 1), pi / 4)
    assert np.max(np.abs(out - 0.5 * (number_state(B1, 1) + number_state(B1, 0)))) <= 1e-12


def test_beamsplitter_needs_room_for_lost_photons():
    with pytest.raises(ValueError):
        stinespring_loss(B1, number_state(B1, 1), 0.3, env_cutoff=2)


def test_beamsplitter_multimode_matches_kraus():
    b = FockBasis(2, 2)
    rho = random_density_matrix(b.dim, np.random.default_rng(4))
    eta = 0.37
    out = stinespring_loss(b, rho, np.arccos(sqrt(eta)))
    assert np.max(np.abs(out - apply_channel(build_loss_channel(b, eta), rho))) <= 1e-12


def test_lindblad_zero_time():
    rho = random_density_matrix(4, np.random.default_rng(5))
    assert np.array_equal(lindblad_evolve(B1, rho, LindbladParams(1.0, 0.0)), rho)


def test_lindblad_half_life():
    out = lindblad_evolve(B1, number_state(B1, 1), LindbladParams(1.0, log(2)))
    assert np.max(np.abs(out - 0.5 * (number_state(B1, 1) + number_state(B1, 0)))) <= 1e-6


def test_lindblad_conserves_trace():
    rng = np.random.default_rng(6)
    batch = np.array([random_density_matrix(4, rng) for _ in range(5)])
    out = lindblad_evolve(B1, batch, LindbladParams(2.0, 0.4))
    assert np.max(np.abs(np.trace(out, axis1=1, axis2=2) - 1)) <= 1e-8


def test_lindblad_multimode_matches_kraus():
    b = FockBasis(2, 2)
    rho = random_density_matrix(b.dim, np.random.default_rng(8))
    out = lindblad_evolve(b, rho, LindbladParams.for_eta(0.6))
    assert np.max(np.abs(out - apply_channel(build_loss_channel(b, 0.6), rho))) <= 1e-6


def test_lindblad_flags_coarse_step():
    with pytest.raises(StepSizeError):
        lindblad_evolve(B1, number_state(B1, 3), LindbladParams(1.0, 2.0, step=0.5))


@pytest.mark.parametrize("params", [(-1.0, 1.0), (1.0, -1.0)])
def test_lindblad_params_validated(params):
    with pytest.raises(ValueError):
        LindbladParams(*params)
    with pytest.raises(ValueError):
        LindbladParams(1.0, 1.0, step=0.0)


def test_equivalence_report():
    r = representation_equivalence_report(1.0, B1)
    assert r["kraus_vs_stinespring"] <= 1e-12 and r["kraus_vs_lindblad"] <= 1e-12
    r = representation_equivalence_report(0.5, B1)
    assert r["kraus_vs_stinespring"] <= 1e-10
    assert r["kraus_vs_lindblad"] <= 1e-6
