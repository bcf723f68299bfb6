"""Truncated multimode Fock space and dense operator algebra.

Every operator, state and density matrix in the package is a plain
complex numpy array indexed in the flat order defined by
:class:`FockBasis`: lexicographic in the occupation vector
``(n_1, ..., n_M)`` with ``n_1`` varying slowest. The truncation keeps at
most ``cutoff`` photons *per mode*, so the dimension is
``(cutoff + 1) ** modes``. That growth is the scaling limit of the dense
representation; the codes handled here need at most 64 dimensions.
"""

from dataclasses import dataclass
from functools import cached_property
from itertools import product
from math import factorial

import numpy as np

from . import config


class DimensionError(ValueError):
    pass


@dataclass(frozen=True)
class FockBasis:
    modes: int
    cutoff: int

    def __post_init__(self):
        if int(self.modes) != self.modes or self.modes < 1:
            raise ValueError(f"modes must be a positive integer, got {self.modes!r}")
        if int(self.cutoff) != self.cutoff or self.cutoff < 0:
            raise ValueError(f"cutoff must be a non-negative integer, got {self.cutoff!r}")

    @property
    def dim(self):
        return (self.cutoff + 1) ** self.modes

    @cached_property
    def occupations(self):
        """Array of shape ``(dim, modes)``; row ``k`` is the occupation of index ``k``."""
        occ = np.array(list(product(range(self.cutoff + 1), repeat=self.modes)), dtype=int)
        occ.setflags(write=False)
        return occ

    @cached_property
    def total_photons(self):
        n = self.occupations.sum(axis=1)
        n.setflags(write=False)
        return n

    def index(self, occupation):
        occupation = tuple(int(n) for n in occupation)
        if len(occupation) != self.modes:
            raise DimensionError(f"expected {self.modes} occupations, got {len(occupation)}")
        idx = 0
        for n in occupation:
            if not 0 <= n <= self.cutoff:
                raise ValueError(f"occupation {occupation} exceeds cutoff {self.cutoff}")
            idx = idx * (self.cutoff + 1) + n
        return idx

    def occupation(self, index):
        if not 0 <= index < self.dim:
            raise IndexError(f"index {index} out of range for dimension {self.dim}")
        return tuple(int(n) for n in self.occupations[index])

    def ket(self, *occupation):
        """Number state ``|n_1, ..., n_M>``."""
        v = np.zeros(self.dim, dtype=complex)
        v[self.index(occupation)] = 1.0
        return v

    def identity(self):
        return np.eye(self.dim, dtype=complex)


def _single_mode_lowering(cutoff):
    return np.diag(np.sqrt(np.arange(1, cutoff + 1)), k=1).astype(complex)


def annihilation(basis, mode):
    """Lowering operator on ``mode`` (1-based, as in ``a_1 ... a_M``)."""
    if not 1 <= mode <= basis.modes:
        raise ValueError(f"mode must lie in 1..{basis.modes}, got {mode}")
    eye = np.eye(basis.cutoff + 1, dtype=complex)
    out = np.ones((1, 1), dtype=complex)
    for m in range(1, basis.modes + 1):
        out = np.kron(out, _single_mode_lowering(basis.cutoff) if m == mode else eye)
    return out


def creation(basis, mode):
    return annihilation(basis, mode).conj().T


def number_operator(basis, mode=None):
    """Total photon number, or the occupation of one mode when ``mode`` is given."""
    if mode is None:
        return np.diag(basis.total_photons.astype(complex))
    if not 1 <= mode <= basis.modes:
        raise ValueError(f"mode must lie in 1..{basis.modes}, got {mode}")
    return np.diag(basis.occupations[:, mode - 1].astype(complex))


def function_of_number(basis, f):
    """Diagonal operator ``f(N)`` with ``N`` the total photon number."""
    values = np.array([f(int(n)) for n in basis.total_photons], dtype=complex)
    return np.diag(values)


def projector_from_states(states, tol=None):
    """Sum of ``|s><s|`` over a list of mutually orthonormal vectors."""
    tol = config.ACCUM if tol is None else tol
    vecs = np.array([np.asarray(s, dtype=complex) for s in states])
    if vecs.ndim != 2:
        raise DimensionError("states must be equal-length vectors")
    gram = vecs.conj() @ vecs.T
    dev = np.abs(gram - np.eye(len(vecs)))
    if dev.max(initial=0.0) > tol:
        i, j = np.unravel_index(np.argmax(dev), dev.shape)
        raise ValueError(
            f"states are not orthonormal: Gram entry ({i}, {j}) = {gram[i, j]:.3e}"
        )
    return vecs.T @ vecs.conj()


def ket_bra(u, v):
    return np.outer(u, np.conj(v))


def tensor_embed(rho, ancilla):
    """``rho (x) ancilla``; a 1-D ``ancilla`` is taken as a pure state."""
    ancilla = np.asarray(ancilla, dtype=complex)
    if ancilla.ndim == 1:
        ancilla = ket_bra(ancilla, ancilla)
    return np.kron(rho, ancilla)


def partial_trace(rho, dims, keep):
    """Trace out every subsystem not listed in ``keep``.

    ``dims`` gives the subsystem dimensions in tensor order; their product
    must equal the size of ``rho``.
    """
    dims = [int(d) for d in dims]
    rho = np.asarray(rho)
    total = int(np.prod(dims))
    if rho.shape != (total, total):
        raise DimensionError(f"partition {dims} does not match matrix of shape {rho.shape}")
    keep = sorted(set(keep))
    if any(not 0 <= k < len(dims) for k in keep):
        raise DimensionError(f"keep={keep} out of range for {len(dims)} subsystems")
    n = len(dims)
    t = rho.reshape(dims + dims)
    letters = "abcdefghijklmnopqrstuvwxyz"
    rows = list(letters[:n])
    cols = list(letters[n : 2 * n])
    for k in range(n):
        if k not in keep:
            cols[k] = rows[k]
    out = "".join(rows[k] for k in keep) + "".join(cols[k] for k in keep)
    kept = int(np.prod([dims[k] for k in keep])) if keep else 1
    return np.einsum("".join(rows) + "".join(cols) + "->" + out, t).reshape(kept, kept)


def dagger(op):
    return np.conj(op).T


def is_hermitian(op, tol=None):
    tol = config.EXACT if tol is None else tol
    return bool(np.max(np.abs(op - dagger(op)), initial=0.0) <= tol)


def unitarity_residual(op):
    return float(np.max(np.abs(dagger(op) @ op - np.eye(op.shape[0]))))


def is_unitary(op, tol=None):
    tol = config.EXACT if tol is None else tol
    return unitarity_residual(op) <= tol


def check_density_matrix(rho, trace_tol=None, herm_tol=None, psd_tol=None):
    """Raise ``ValueError`` unless ``rho`` is a valid density matrix."""
    trace_tol = config.ACCUM if trace_tol is None else trace_tol
    herm_tol = config.EXACT if herm_tol is None else herm_tol
    psd_tol = config.ACCUM if psd_tol is None else psd_tol
    rho = np.asarray(rho)
    if rho.ndim != 2 or rho.shape[0] != rho.shape[1]:
        raise ValueError(f"density matrix must be square, got shape {rho.shape}")
    tr = np.trace(rho)
    if abs(tr - 1) > trace_tol:
        raise ValueError(f"trace {tr:.6g} differs from 1")
    if not is_hermitian(rho, herm_tol):
        raise ValueError("density matrix is not Hermitian")
    lo = np.linalg.eigvalsh(0.5 * (rho + dagger(rho))).min()
    if lo < -psd_tol:
        raise ValueError(f"density matrix has negative eigenvalue {lo:.3e}")
    return rho


def random_density_matrix(dim, rng, rank=None):
    """Random mixed state from a complex Ginibre matrix."""
    rank = dim if rank is None else rank
    g = rng.normal(size=(dim, rank)) + 1j * rng.normal(size=(dim, rank))
    rho = g @ dagger(g)
    return rho / np.trace(rho).real


def random_state(dim, rng):
    v = rng.normal(size=dim) + 1j * rng.normal(size=dim)
    return v / np.linalg.norm(v)


def binomial_survival(n, k, eta):
    """Probability that exactly ``k`` of ``n`` photons survive transmissivity ``eta``."""
    return factorial(n) / (factorial(k) * factorial(n - k)) * eta**k * (1 - eta) ** (n - k)


def to_json(basis, array):
    """Serialize a state or operator as ``{basis, shape, entries}``.

    ``entries`` is the row-major flattening as ``[re, im]`` pairs.
    """
    array = np.asarray(array, dtype=complex)
    return {
        "basis": {"modes": basis.modes, "cutoff": basis.cutoff},
        "shape": list(array.shape),
        "entries": [[float(z.real), float(z.imag)] for z in array.ravel()],
    }


def from_json(obj):
    basis = FockBasis(int(obj["basis"]["modes"]), int(obj["basis"]["cutoff"]))
    flat = np.array([complex(re, im) for re, im in obj["entries"]])
    return basis, flat.reshape(obj["shape"])
