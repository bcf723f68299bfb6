"""Repeater Hamiltonians, their unitaries and the recovery channel.

Both architectures build ``H`` as a sum of rank-one projectors onto
mutually orthonormal vectors, so ``H`` is itself a projector and the
evolution for time ``pi`` is the reflection ``U = 1 - 2H``.

Joint vectors are ordered system first: ``kron(system, ancilla)``.

Direct architecture
    The ancilla is an abstract ``K(M+1)``-level system with orthonormal
    labels ``(k, i)``; ``(k, 0)`` plays the role of the fiducial ``|k>_a``
    and ``(k, i)`` of ``|k^(i)>_a``. Label ``(k, i)`` sits at index
    ``(k - 1)(M + 1) + i``.

Swap architecture
    The ancilla is the logical qubit itself (labels ``|0>_a``, ``|1>_a``);
    ``CodeSpec.isometry`` maps it back into the Fock space when needed.

Sign conventions: on the two-dimensional span of ``x = |j>|k^(i)>`` and
``y = |j^(i)>|k>`` the direct unitary maps ``y -> x`` and ``x -> y`` with
no extra phase, and the same holds for the swap pair
``|0^(i)>|1>_a <-> |1^(i)>|0>_a``. Only the singlet-like combinations
pick up a ``-1``: ``U_swap`` is the exchange operator between the
``i``-th error space and the ancilla qubit, so the input
``|psi>_s |psi>_a`` is returned unchanged while an antisymmetric input
``(|0>|1> - |1>|0>)/sqrt(2)`` flips sign.
"""

from dataclasses import dataclass
from math import sqrt

import numpy as np

from . import config
from .codes import error_spaces
from .fock import dagger, partial_trace, random_state
from .loss import KrausChannel


class RepeaterError(ValueError):
    pass


@dataclass(frozen=True, eq=False)
class RepeaterSpec:
    code: object
    kind: str
    ancilla_dim: int
    hamiltonian: np.ndarray
    unitary: np.ndarray
    projector_rank: int
    spaces: object
    K: int = None

    @property
    def system_dim(self):
        return self.code.basis.dim

    @property
    def joint_dim(self):
        return self.system_dim * self.ancilla_dim

    def ancilla_label(self, k, i):
        """Direct architecture: index of ancilla label ``(k, i)``."""
        if self.kind != "direct":
            raise RepeaterError("ancilla labels (k, i) exist only for the direct architecture")
        return (k - 1) * (self.code.modes + 1) + i

    def ancilla_ket(self, k, i):
        v = np.zeros(self.ancilla_dim, dtype=complex)
        v[self.ancilla_label(k, i)] = 1.0
        return v

    def idempotency_residual(self):
        h = self.hamiltonian
        return float(np.max(np.abs(h @ h - h)))

    def unitarity_residual(self):
        u = self.unitary
        return float(np.max(np.abs(dagger(u) @ u - np.eye(len(u)))))


def unitary_from_projector(h, tol=None):
    """``exp(i pi H) = 1 - 2H`` for an idempotent ``H``."""
    tol = config.ACCUM if tol is None else tol
    h = np.asarray(h)
    res = float(np.max(np.abs(h @ h - h), initial=0.0))
    if res > tol:
        raise RepeaterError(f"H is not a projector (|H^2 - H| = {res:.2e})")
    return np.eye(len(h), dtype=complex) - 2 * h


def _projector_sum(vectors):
    v = np.column_stack(vectors)
    return v @ dagger(v)


def _system_words(code, spaces, i):
    return code.codewords if i == 0 else spaces.vectors[i - 1]


def build_direct(code, K=1, spaces=None):
    """Direct-transfer Hamiltonian with a ``K``-dimensional fiducial ancilla.

    ``K = 1`` gives the minimal variant. The no-error case is left out, so
    ``H`` annihilates every code-space input.
    """
    if int(K) != K or K < 1:
        raise RepeaterError(f"K must be a positive integer, got {K}")
    spaces = error_spaces(code) if spaces is None else spaces
    m = code.modes
    adim = K * (m + 1)

    def anc(k, i):
        v = np.zeros(adim, dtype=complex)
        v[(k - 1) * (m + 1) + i] = 1.0
        return v

    vecs = []
    for k in range(1, K + 1):
        for i in range(1, m + 1):
            for j in (0, 1):
                vecs.append(
                    (np.kron(code.codewords[j], anc(k, i)) - np.kron(spaces.vectors[i - 1][j], anc(k, 0)))
                    / sqrt(2)
                )
    h = _projector_sum(vecs)
    return RepeaterSpec(code, "direct", adim, h, unitary_from_projector(h), len(vecs), spaces, K)


def build_swap(code, spaces=None):
    """Swap Hamiltonian; index 0 is the unerrored code space."""
    spaces = error_spaces(code) if spaces is None else spaces
    anc = np.eye(2, dtype=complex)
    vecs = []
    for i in range(code.modes + 1):
        w0, w1 = _system_words(code, spaces, i)
        vecs.append((np.kron(w0, anc[1]) - np.kron(w1, anc[0])) / sqrt(2))
    h = _projector_sum(vecs)
    return RepeaterSpec(code, "swap", 2, h, unitary_from_projector(h), len(vecs), spaces)


def _random_qubit(rng):
    return random_state(2, rng)


def verify_transfer_action(spec, trials=100, rng=None):
    """Max deviation of ``U(|psi^(i)>|phi>)`` from ``|psi>|phi^(i)>``.

    Covers every error index ``i = 1..M`` plus ``i = 0``, where the input
    sits in code space and must come out untouched.
    """
    if spec.kind != "direct":
        raise RepeaterError("transfer action applies to the direct architecture")
    rng = np.random.default_rng(config.DEFAULT_SEED) if rng is None else rng
    code, spaces, u = spec.code, spec.spaces, spec.unitary
    worst = 0.0
    for i in range(code.modes + 1):
        sys_in = _system_words(code, spaces, i)
        for _ in range(trials):
            alpha, beta = _random_qubit(rng)
            gam = random_state(spec.K, rng)
            phi = sum(g * spec.ancilla_ket(k, 0) for k, g in enumerate(gam, start=1))
            phi_i = sum(g * spec.ancilla_ket(k, i) for k, g in enumerate(gam, start=1))
            psi_i = alpha * sys_in[0] + beta * sys_in[1]
            psi = alpha * code.logical0 + beta * code.logical1
            out = u @ np.kron(psi_i, phi)
            worst = max(worst, float(np.max(np.abs(out - np.kron(psi, phi_i)))))
    return worst


def verify_swap_action(spec, trials=100, rng=None):
    """Max deviation of ``U(|psi^(i)>|phi>)`` from ``|phi^(i)>|psi>``, ``i = 0..M``."""
    if spec.kind != "swap":
        raise RepeaterError("swap action applies to the swap architecture")
    rng = np.random.default_rng(config.DEFAULT_SEED) if rng is None else rng
    code, spaces, u = spec.code, spec.spaces, spec.unitary
    worst = 0.0
    for i in range(code.modes + 1):
        w0, w1 = _system_words(code, spaces, i)
        for _ in range(trials):
            alpha, beta = _random_qubit(rng)
            g0, g1 = _random_qubit(rng)
            out = u @ np.kron(alpha * w0 + beta * w1, np.array([g0, g1]))
            target = np.kron(g0 * w0 + g1 * w1, np.array([alpha, beta]))
            worst = max(worst, float(np.max(np.abs(out - target))))
    return worst


def verify_action(spec, trials=100, rng=None):
    if spec.kind == "direct":
        return verify_transfer_action(spec, trials, rng)
    return verify_swap_action(spec, trials, rng)


def recovery_channel(code, spaces=None):
    """The ``M + 1`` Kraus operators returning each error space to code space.

    ``R^(0) = 1 - sum_i P^(i)`` leaves everything outside the error spaces
    alone; ``R^(i) = |0_L><0^(i)| + |1_L><1^(i)|``.
    """
    spaces = error_spaces(code) if spaces is None else spaces
    r0 = np.eye(code.basis.dim, dtype=complex) - sum(spaces.projectors)
    ops = [r0]
    for w0, w1 in spaces.vectors:
        ops.append(np.outer(code.logical0, w0.conj()) + np.outer(code.logical1, w1.conj()))
    return KrausChannel(code.basis, tuple(ops), tuple((i,) for i in range(code.modes + 1)))


def dilated_recovery(spec, rho, ancilla_state=None):
    """System output of the repeater unitary with a fresh ancilla, ancilla discarded.

    For the swap architecture the outgoing carrier is the ancilla, so the
    system is traced out instead and the logical qubit is re-embedded into
    the Fock space through the code isometry.
    """
    code = spec.code
    if spec.kind == "direct":
        phi = spec.ancilla_ket(1, 0) if ancilla_state is None else ancilla_state
        anc = np.outer(phi, phi.conj())
        joint = spec.unitary @ np.kron(rho, anc) @ dagger(spec.unitary)
        return partial_trace(joint, [spec.system_dim, spec.ancilla_dim], keep=[0])
    phi = np.array([1, 0], dtype=complex) if ancilla_state is None else ancilla_state
    anc = np.outer(phi, phi.conj())
    joint = spec.unitary @ np.kron(rho, anc) @ dagger(spec.unitary)
    logical = partial_trace(joint, [spec.system_dim, 2], keep=[1])
    v = code.isometry
    return v @ logical @ dagger(v)
