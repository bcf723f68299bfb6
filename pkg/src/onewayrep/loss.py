"""Pure-loss channel in Kraus, beamsplitter and master-equation form.

The three descriptions are tied together by ``eta = cos(phi)**2 =
exp(-gamma * t)``. Production code uses the Kraus form; the other two
exist to cross-check it.
"""

from dataclasses import dataclass, field
from itertools import product
from math import ceil, factorial, log, sqrt

import numpy as np
from scipy.linalg import expm

from . import config
from .fock import (
    FockBasis,
    DimensionError,
    annihilation,
    dagger,
    number_operator,
    partial_trace,
    random_density_matrix,
)


class StepSizeError(RuntimeError):
    """Raised when halving the integrator step moves the result too much."""


@dataclass(frozen=True)
class KrausChannel:
    basis: FockBasis
    kraus_ops: tuple
    labels: tuple = field(default=())

    def __post_init__(self):
        for k in self.kraus_ops:
            if k.shape != (self.basis.dim, self.basis.dim):
                raise DimensionError(
                    f"Kraus operator of shape {k.shape} does not match dimension {self.basis.dim}"
                )

    def __len__(self):
        return len(self.kraus_ops)

    def stacked(self):
        return np.array(self.kraus_ops)

    def completeness_residual(self):
        total = sum(dagger(k) @ k for k in self.kraus_ops)
        return float(np.max(np.abs(total - np.eye(self.basis.dim))))

    def op(self, label):
        """Kraus operator for a loss pattern ``(k_1, ..., k_M)``."""
        return self.kraus_ops[self.labels.index(tuple(label))]


def _check_eta(eta):
    if not 0 < eta <= 1:
        raise ValueError(f"transmissivity must lie in (0, 1], got {eta}")


def single_mode_kraus(cutoff, eta, k):
    """``A_k = (1-eta)^(k/2) / sqrt(k!) * sqrt(eta)^N a^k`` on one mode."""
    n = np.arange(cutoff + 1)
    a = np.diag(np.sqrt(np.arange(1, cutoff + 1)), k=1).astype(complex)
    damp = np.diag(np.sqrt(eta) ** n).astype(complex)
    return (1 - eta) ** (k / 2) / sqrt(factorial(k)) * damp @ np.linalg.matrix_power(a, k)


def build_loss_channel(basis, eta):
    """Kraus set of the ``M``-mode pure-loss channel at transmissivity ``eta``.

    Built as the tensor product of single-mode sets and labelled by the
    number of photons lost in each mode. Operators that vanish identically
    (every ``k > 0`` when ``eta == 1``) are dropped.
    """
    _check_eta(eta)
    single = [single_mode_kraus(basis.cutoff, eta, k) for k in range(basis.cutoff + 1)]
    ops, labels = [], []
    for pattern in product(range(basis.cutoff + 1), repeat=basis.modes):
        op = np.ones((1, 1), dtype=complex)
        for k in pattern:
            op = np.kron(op, single[k])
        if not np.any(op):
            continue
        ops.append(op)
        labels.append(pattern)
    return KrausChannel(basis, tuple(ops), tuple(labels))


def apply_kraus(kraus, rho):
    """``sum_k K rho K^dagger``; ``rho`` may carry leading batch axes."""
    kraus = np.asarray(kraus)
    rho = np.asarray(rho)
    extra = (None,) * (rho.ndim - 2)
    left = kraus[(slice(None),) + extra]
    right = np.conj(np.swapaxes(kraus, -1, -2))[(slice(None),) + extra]
    return (left @ rho[None] @ right).sum(axis=0)


def apply_channel(ch, rho):
    rho = np.asarray(rho)
    if rho.shape[-2:] != (ch.basis.dim, ch.basis.dim):
        raise DimensionError(
            f"state of shape {rho.shape[-2:]} does not match channel dimension {ch.basis.dim}"
        )
    return apply_kraus(ch.stacked(), rho)


def photon_number(basis, rho):
    return float(np.real(np.trace(number_operator(basis) @ rho)))


def beamsplitter(basis, mode, phi, env_cutoff):
    """``exp[i phi (a^dagger b + a b^dagger)]`` on system (x) one environment mode."""
    a = annihilation(basis, mode)
    b = np.diag(np.sqrt(np.arange(1, env_cutoff + 1)), k=1).astype(complex)
    eye_s = np.eye(basis.dim)
    eye_e = np.eye(env_cutoff + 1)
    gen = np.kron(dagger(a), eye_e) @ np.kron(eye_s, b)
    gen = gen + dagger(gen)
    return expm(1j * phi * gen)


def stinespring_loss(basis, rho, phi, env_cutoff=None):
    """Loss through a beamsplitter per mode with the environment in vacuum.

    Each mode meets its own vacuum environment mode, which is traced out
    before the next one is attached. Photon number is conserved by the
    coupling and the environment starts empty, so the truncated evolution
    is exact as long as ``env_cutoff >= basis.cutoff``.
    """
    env_cutoff = basis.cutoff if env_cutoff is None else env_cutoff
    if env_cutoff < basis.cutoff:
        raise ValueError(
            f"environment cutoff {env_cutoff} cannot hold up to {basis.cutoff} lost photons"
        )
    rho = np.asarray(rho, dtype=complex)
    vac = np.zeros((env_cutoff + 1, env_cutoff + 1), dtype=complex)
    vac[0, 0] = 1.0
    dims = [basis.dim, env_cutoff + 1]
    for mode in range(1, basis.modes + 1):
        u = beamsplitter(basis, mode, phi, env_cutoff)
        joint = u @ np.kron(rho, vac) @ dagger(u)
        rho = partial_trace(joint, dims, keep=[0])
    return rho


@dataclass(frozen=True)
class LindbladParams:
    gamma: float
    t: float
    step: float = None

    def __post_init__(self):
        if self.gamma < 0 or self.t < 0:
            raise ValueError("gamma and t must be non-negative")
        if self.step is None:
            object.__setattr__(self, "step", 1e-3 / self.gamma if self.gamma > 0 else 1e-3)
        if self.step <= 0:
            raise ValueError(f"step must be positive, got {self.step}")

    @classmethod
    def for_eta(cls, eta, gamma=1.0, step=None):
        _check_eta(eta)
        return cls(gamma, -log(eta) / gamma, step)


def _rk4(rho, lowering, gamma, dt, nsteps):
    lowering_dag = [dagger(a) for a in lowering]
    num = sum(ad @ a for ad, a in zip(lowering_dag, lowering))

    def rhs(r):
        out = -(num @ r + r @ num)
        for a, ad in zip(lowering, lowering_dag):
            out = out + 2 * (a @ r @ ad)
        return 0.5 * gamma * out

    for _ in range(nsteps):
        k1 = rhs(rho)
        k2 = rhs(rho + 0.5 * dt * k1)
        k3 = rhs(rho + 0.5 * dt * k2)
        k4 = rhs(rho + dt * k3)
        rho = rho + (dt / 6.0) * (k1 + 2 * k2 + 2 * k3 + k4)
    return rho


def lindblad_evolve(basis, rho, params, check=True, tol=1e-8):
    """Integrate the photon-loss master equation with fixed-step RK4.

    The step is shrunk so an integer number of steps lands exactly on
    ``params.t``. With ``check`` the run is repeated at half the step and
    :class:`StepSizeError` is raised if any entry moves by more than
    ``tol``; the finer result is returned.
    """
    rho = np.asarray(rho, dtype=complex)
    if params.t == 0 or params.gamma == 0:
        return rho.copy()
    lowering = [annihilation(basis, m) for m in range(1, basis.modes + 1)]
    nsteps = max(1, ceil(params.t / params.step - 1e-9))
    coarse = _rk4(rho, lowering, params.gamma, params.t / nsteps, nsteps)
    if not check:
        return coarse
    fine = _rk4(rho, lowering, params.gamma, params.t / (2 * nsteps), 2 * nsteps)
    shift = float(np.max(np.abs(fine - coarse)))
    if shift > tol:
        raise StepSizeError(f"halving the step changed the result by {shift:.2e} (> {tol:.0e})")
    return fine


def representation_equivalence_report(eta, basis, n_states=20, seed=None, step=None):
    """Largest entrywise gap between the three loss descriptions.

    Runs a fixed battery of random density matrices through the Kraus
    channel, the beamsplitter dilation at ``phi = arccos(sqrt(eta))`` and
    the master equation at ``gamma * t = -ln(eta)``.
    """
    _check_eta(eta)
    seed = config.DEFAULT_SEED if seed is None else seed
    rng = np.random.default_rng(seed)
    battery = np.array([random_density_matrix(basis.dim, rng) for _ in range(n_states)])
    kraus_out = apply_channel(build_loss_channel(basis, eta), battery)
    phi = float(np.arccos(np.sqrt(eta)))
    stine_out = np.array([stinespring_loss(basis, r, phi) for r in battery])
    lind_out = lindblad_evolve(basis, battery, LindbladParams.for_eta(eta, step=step))
    return {
        "eta": eta,
        "modes": basis.modes,
        "cutoff": basis.cutoff,
        "n_states": n_states,
        "seed": seed,
        "kraus_vs_stinespring": float(np.max(np.abs(kraus_out - stine_out))),
        "kraus_vs_lindblad": float(np.max(np.abs(kraus_out - lind_out))),
    }
