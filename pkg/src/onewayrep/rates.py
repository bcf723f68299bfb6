"""Secret-key rates of repeater chains against the repeaterless bound.

A chain is a sequence of identical segments. Each segment loses light
with total transmissivity ``eta = eta_c * eta_s`` (coupling times fibre)
and ends in a repeater, modelled by its recovery channel. Alice keeps
qubit A of ``(|0, 0_L> + |1, 1_L>)/sqrt(2)`` and sends the encoded half B
down the chain.

Conventions
    * The benchmark is the repeaterless bound of the bare fibre over the
      full distance; coupling loss is charged to the repeater scheme.
    * Rates are divided by the number of modes ``M`` unless
      ``per_mode=False``.
    * The key rate of a chain state is ``p_in * max(0, 1 - H(lambda))``:
      ``p_in`` is the weight of B in code space and ``lambda`` the Bell
      diagonal of the conditional logical state (six-state protocol,
      asymptotic one-way rate with sifting factors set to one).
"""

from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from functools import lru_cache
from math import isfinite, log, sqrt

import numpy as np

from .codes import code_photon_number, error_probabilities
from .fock import dagger
from .loss import KrausChannel, apply_kraus, build_loss_channel
from .repeater import recovery_channel

DEFAULT_ALPHA = 0.2
MAX_SEGMENTS = 10_000
ZERO_RATE = 1e-12
SEP_BOUNDS = (0.1, 50.0)
SEP_TOL = 0.01

DEFAULT_ETA_C_RANGE = (0.85, 1.0, 0.001)
DEFAULT_SEP_RANGE = (0.5, 30.0, 0.1)
# The single-mode code only beats the bound for very short separations
# and nearly perfect coupling; its default grid zooms in there.
SINGLE_MODE_ETA_C = (0.9995, 1.0, 0.00001)
SINGLE_MODE_SEP = (0.005, 0.1, 0.005)


class NotNumberEigenspaceError(ValueError):
    """The code space is not an eigenspace of the total photon number."""


def repeaterless_bound(eta):
    """``log2(1 / (1 - eta))`` bits per mode; ``inf`` at ``eta == 1``."""
    if not 0 < eta <= 1:
        raise ValueError(f"transmissivity must lie in (0, 1], got {eta}")
    if eta == 1:
        return float("inf")
    return -np.log1p(-eta) / log(2)


def fibre_transmissivity(x, alpha=DEFAULT_ALPHA):
    return 10 ** (-alpha * x / 10)


def repeaterless_bound_km(x, alpha=DEFAULT_ALPHA):
    if x <= 0:
        raise ValueError(f"distance must be positive, got {x}")
    return repeaterless_bound(fibre_transmissivity(x, alpha))


@dataclass(frozen=True, eq=False)
class SegmentModel:
    code: object
    eta_c: float
    L: float
    alpha: float = DEFAULT_ALPHA

    def __post_init__(self):
        if not 0 < self.eta_c <= 1:
            raise ValueError(f"coupling efficiency must lie in (0, 1], got {self.eta_c}")
        if self.L <= 0:
            raise ValueError(f"separation must be positive, got {self.L}")
        if self.alpha < 0:
            raise ValueError(f"attenuation must be non-negative, got {self.alpha}")

    @property
    def eta_s(self):
        return fibre_transmissivity(self.L, self.alpha)

    @property
    def eta(self):
        return self.eta_c * self.eta_s


def _require_number_code(code):
    n = code_photon_number(code)
    if n is None:
        raise NotNumberEigenspaceError(
            f"code {code.name!r} is not a photon-number eigenspace; simulate the chain instead"
        )
    return n


@lru_cache(maxsize=64)
def _single_loss_weight(code):
    # On code space N = n, so each c_i equals (1 - eta) eta^(n-1) times a
    # fixed mean occupation; recover that factor once from the general formula.
    n = _require_number_code(code)
    ref = 0.5
    return n, sum(error_probabilities(code, ref)) / ((1 - ref) * ref ** (n - 1))


def success_probability(code, eta):
    """Weight returned to code space by one loss-plus-recovery segment.

    ``eta^n`` (no loss) plus the single-loss probabilities ``c_i``.
    Accepts scalar or array ``eta``.
    """
    n, w = _single_loss_weight(code)
    eta = np.asarray(eta, dtype=float)
    if np.any((eta <= 0) | (eta > 1)):
        raise ValueError("transmissivity must lie in (0, 1]")
    out = eta**n + w * (1 - eta) * eta ** (n - 1)
    return float(out) if out.ndim == 0 else out


def asymptotic_beat(code, eta_c, L, alpha=DEFAULT_ALPHA):
    eta_s = fibre_transmissivity(L, alpha)
    return success_probability(code, eta_c * eta_s) > eta_s


def _compress(ops, tol=1e-14):
    """Minimal Kraus set of the same channel (canonical Kraus form)."""
    ops = np.asarray(ops)
    r, d, _ = ops.shape
    _, s, wh = np.linalg.svd(ops.reshape(r, d * d), full_matrices=False)
    keep = s > tol * max(1.0, s[0])
    return s[keep, None, None] * wh[keep].reshape(-1, d, d)


@lru_cache(maxsize=4096)
def _segment_ops(code, eta):
    loss = build_loss_channel(code.basis, eta)
    rec = recovery_channel(code)
    ops = [r @ a for r in rec.kraus_ops for a in loss.kraus_ops]
    return _compress(ops)


def segment_channel(model):
    """Loss at ``eta_c * eta_s`` followed by the recovery channel, on B alone."""
    ops = _segment_ops(model.code, float(model.eta))
    return KrausChannel(model.code.basis, tuple(ops), tuple((k,) for k in range(len(ops))))


@dataclass(frozen=True, eq=False)
class ChainState:
    """Joint state of qubit A and the Fock space of B after ``n`` segments."""

    code: object
    rho: np.ndarray
    n: int

    @property
    def dim_b(self):
        return self.code.basis.dim

    def logical_block(self):
        """Unnormalized state of A and the logical qubit carried by B."""
        v = np.kron(np.eye(2), self.code.isometry)
        return dagger(v) @ self.rho @ v

    def in_code_weight(self):
        return float(np.real(np.trace(self.logical_block())))

    def conditional_logical_state(self):
        block = self.logical_block()
        p = float(np.real(np.trace(block)))
        return p, (block / p if p > 0 else block)


def initial_chain_state(code):
    psi = (np.kron([1, 0], code.logical0) + np.kron([0, 1], code.logical1)) / sqrt(2)
    return ChainState(code, np.outer(psi, psi.conj()), 0)


def _apply_on_b(ops, rho, dim_b):
    blocks = rho.reshape(2, dim_b, 2, dim_b).transpose(0, 2, 1, 3)
    out = (ops[:, None, None] @ blocks[None] @ np.conj(np.swapaxes(ops, -1, -2))[:, None, None]).sum(axis=0)
    return out.transpose(0, 2, 1, 3).reshape(2 * dim_b, 2 * dim_b)


def iterate_chain(model, n):
    """Yield the chain state after 0, 1, ..., ``n`` segments."""
    if n < 0:
        raise ValueError(f"segment count must be non-negative, got {n}")
    state = initial_chain_state(model.code)
    yield state
    ops = np.array(segment_channel(model).kraus_ops)
    rho = state.rho
    for k in range(1, n + 1):
        rho = _apply_on_b(ops, rho, state.dim_b)
        yield ChainState(model.code, rho, k)


def simulate_chain(model, n):
    for state in iterate_chain(model, n):
        pass
    return state


def single_mode_coefficients(eta):
    """Population survival ``s`` and coherence factor ``c`` of one segment."""
    s = 3 * eta**2 - 2 * eta**3
    c = eta**2 + (1 - eta) * sqrt(3) * eta
    return s, c


def single_mode_closed_form(eta, n):
    """Closed-form chain state for the single-mode code (basis ``A (x) |0..3>``)."""
    s, c = single_mode_coefficients(eta)
    rho = np.zeros((8, 8), dtype=complex)
    a0b1, a1b1, a1b3 = 1, 5, 7
    rho[a0b1, a0b1] = 0.5
    rho[a1b1, a1b1] = 0.5 * (1 - s**n)
    rho[a1b3, a1b3] = 0.5 * s**n
    rho[a0b1, a1b3] = rho[a1b3, a0b1] = 0.5 * c**n
    return rho


def bell_coefficients(rho2):
    """Bell-basis diagonal ``(Phi+, Phi-, Psi+, Psi-)`` of a two-qubit state.

    Equivalent to twirling away every off-diagonal Bell-basis term.
    """
    rho2 = np.asarray(rho2)
    d00, d01, d10, d11 = np.real(np.diagonal(rho2, axis1=-2, axis2=-1)).T
    phi = np.real(rho2[..., 0, 3])
    psi = np.real(rho2[..., 1, 2])
    return np.stack(
        [0.5 * (d00 + d11) + phi, 0.5 * (d00 + d11) - phi, 0.5 * (d01 + d10) + psi, 0.5 * (d01 + d10) - psi],
        axis=-1,
    )


def shannon_entropy(p):
    p = np.clip(np.asarray(p, dtype=float), 0.0, None)
    with np.errstate(divide="ignore", invalid="ignore"):
        terms = np.where(p > 0, -p * np.log2(np.where(p > 0, p, 1.0)), 0.0)
    return terms.sum(axis=-1)


def hashing_rate(lam):
    """``max(0, 1 - H(lambda))`` for Bell-diagonal weights ``lambda``."""
    r = 1.0 - shannon_entropy(lam)
    return np.where(r > ZERO_RATE, r, 0.0)


def six_state_rate(rho2):
    """Asymptotic six-state key rate of a normalized two-qubit state."""
    rho2 = np.asarray(rho2)
    if rho2.shape != (4, 4):
        raise ValueError(f"expected a 4x4 two-qubit state, got shape {rho2.shape}")
    if abs(np.trace(rho2) - 1) > 1e-8:
        raise ValueError("two-qubit state is not normalized")
    return float(hashing_rate(bell_coefficients(rho2)))


def depolarized_bell_coefficients(qber):
    return np.array([1 - 1.5 * qber, qber / 2, qber / 2, qber / 2])


def chain_key_rate(state):
    """Secret bits per channel use (not yet per mode) of a chain state."""
    p, rho2 = state.conditional_logical_state()
    return p * six_state_rate(rho2) if p > 0 else 0.0


def chain_rate_per_mode(model, n, method="auto", per_mode=True):
    """Key rate after ``n`` segments.

    ``method="closed"`` uses ``p_s ** n`` (photon-number eigenspace codes
    only), ``"simulate"`` propagates the full density matrix, ``"auto"``
    picks the closed form when it applies.
    """
    if n < 1:
        raise ValueError(f"need at least one segment, got {n}")
    if method == "auto":
        method = "closed" if code_photon_number(model.code) is not None else "simulate"
    if method == "closed":
        rate = success_probability(model.code, model.eta) ** n
    elif method == "simulate":
        rate = chain_key_rate(simulate_chain(model, n))
    else:
        raise ValueError(f"unknown method {method!r}")
    return rate / model.code.modes if per_mode else rate


def logical_transfer(code, eta):
    """Action of one segment on the logical block, as a 4x4 matrix.

    Entry ``[(x, y), (a, b)]`` is ``<x_L| S(|a_L><b_L|) |y_L>``. Iterating
    it reproduces the chain's logical block exactly as long as nothing
    that left code space ever returns to it, which holds for the
    recovery channel because loss only removes photons.
    """
    ops = _segment_ops(code, float(eta))
    v = code.isometry
    t = np.zeros((4, 4), dtype=complex)
    for a in range(2):
        for b in range(2):
            out = apply_kraus(ops, np.outer(v[:, a], v[:, b].conj()))
            t[:, 2 * a + b] = (dagger(v) @ out @ v).ravel()
    return t


def _chain_rates_from_transfer(transfers, n_max):
    """Per-segment rates for a batch of logical transfer matrices.

    Returns an iterator over ``n = 1..n_max`` of rate arrays.
    """
    power = np.broadcast_to(np.eye(4, dtype=complex), transfers.shape).copy()
    for _ in range(n_max):
        power = transfers @ power
        # rho2[(a, x), (b, y)] = T^n[(x, y), (a, b)] / 2
        rho2 = 0.5 * power.reshape(-1, 2, 2, 2, 2).transpose(0, 3, 1, 4, 2).reshape(-1, 4, 4)
        p = np.real(np.trace(rho2, axis1=1, axis2=2))
        safe = np.where(p > 0, p, 1.0)
        lam = bell_coefficients(rho2 / safe[:, None, None])
        yield np.where(p > 0, p * hashing_rate(lam), 0.0)


def _nonasymptotic_beats(code, eta_c, L, alpha, n_max):
    """Whether some ``n <= n_max`` gives a chain rate above the bound at ``nL``.

    Vectorized over matching arrays ``eta_c`` and ``L``.
    """
    eta_c = np.atleast_1d(np.asarray(eta_c, dtype=float))
    L = np.broadcast_to(np.asarray(L, dtype=float), eta_c.shape)
    eta = eta_c * fibre_transmissivity(L, alpha)
    transfers = np.array([logical_transfer(code, e) for e in eta])
    beats = np.zeros(eta.shape, dtype=bool)
    alive = np.ones(eta.shape, dtype=bool)
    for n, rate in enumerate(_chain_rates_from_transfer(transfers, n_max), start=1):
        rate = rate / code.modes
        bound = -np.log1p(-fibre_transmissivity(n * L, alpha)) / log(2)
        beats |= rate > bound
        alive &= rate > ZERO_RATE
        if not np.any(alive & ~beats):
            break
    return beats


def beat_predicate(code, eta_c, L, alpha=DEFAULT_ALPHA, n_max=MAX_SEGMENTS):
    """Vectorized beat flag: asymptotic for number codes, otherwise some finite ``n``."""
    eta_c = np.atleast_1d(np.asarray(eta_c, dtype=float))
    L = np.broadcast_to(np.asarray(L, dtype=float), eta_c.shape)
    n_photons = code_photon_number(code)
    if n_photons is None:
        return _nonasymptotic_beats(code, eta_c, L, alpha, n_max)
    eta_s = fibre_transmissivity(L, alpha)
    return np.asarray(success_probability(code, eta_c * eta_s) > eta_s, dtype=bool)


def grid_from_range(lo, hi, step):
    """Inclusive arithmetic grid, robust to floating-point round-off."""
    if step <= 0 or hi < lo:
        raise ValueError(f"malformed range {lo}:{hi}:{step}")
    count = int(np.floor((hi - lo) / step + 1e-9)) + 1
    return np.round(lo + step * np.arange(count), 12)


@dataclass
class RegionResult:
    code: str
    eta_c: np.ndarray
    L: np.ndarray
    alpha: float
    beats: np.ndarray
    boundary: np.ndarray
    n_max: int = MAX_SEGMENTS
    meta: dict = field(default_factory=dict)

    @property
    def monotone(self):
        """No column switches from beating back to not beating as ``eta_c`` grows."""
        b = self.beats.astype(int)
        return bool(np.all(np.diff(b, axis=0) >= 0))

    @property
    def is_empty(self):
        return not bool(self.beats.any())

    def boundary_flags(self):
        """True at the lowest beating ``eta_c`` of each separation column."""
        below = np.vstack([np.zeros((1, self.beats.shape[1]), dtype=bool), self.beats[:-1]])
        return self.beats & ~below

    def min_eta_c(self):
        """Smallest bisected threshold over all separations, and where it occurs."""
        finite = np.isfinite(self.boundary)
        if not finite.any():
            return float("nan"), float("nan")
        j = int(np.nanargmin(np.where(finite, self.boundary, np.nan)))
        return float(self.boundary[j]), float(self.L[j])

    @property
    def max_tolerable_coupling_loss(self):
        eta_c, _ = self.min_eta_c()
        return 1.0 - eta_c if isfinite(eta_c) else float("nan")

    @property
    def grid_max_tolerable_coupling_loss(self):
        rows = np.flatnonzero(self.beats.any(axis=1))
        return float(1.0 - self.eta_c[rows[0]]) if rows.size else float("nan")


def _bisect_boundary(code, L, alpha, n_max, lo=0.0, hi=1.0, iters=40):
    """Threshold ``eta_c`` for every separation in ``L`` (``nan`` when even 1 fails)."""
    L = np.asarray(L, dtype=float)
    top = beat_predicate(code, np.full(L.shape, hi), L, alpha, n_max)
    lo_arr = np.full(L.shape, lo)
    hi_arr = np.full(L.shape, hi)
    for _ in range(iters):
        active = top & (hi_arr - lo_arr > 1e-9)
        if not active.any():
            break
        mid = 0.5 * (lo_arr + hi_arr)
        ok = np.zeros(L.shape, dtype=bool)
        ok[active] = beat_predicate(code, mid[active], L[active], alpha, n_max)
        hi_arr = np.where(active & ok, mid, hi_arr)
        lo_arr = np.where(active & ~ok, mid, lo_arr)
    return np.where(top, hi_arr, np.nan)


def _scan_columns(args):
    code, eta_c, L, alpha, n_max, lo = args
    ec, ll = np.meshgrid(eta_c, L, indexing="ij")
    beats = beat_predicate(code, ec.ravel(), ll.ravel(), alpha, n_max).reshape(ec.shape)
    boundary = _bisect_boundary(code, L, alpha, n_max, lo=lo)
    return beats, boundary


def region_scan(code, eta_c_grid, L_grid, alpha=DEFAULT_ALPHA, n_max=MAX_SEGMENTS, jobs=1):
    """Beat flags over an ``(eta_c, L)`` grid plus the bisected threshold per ``L``.

    Separation columns are independent; with ``jobs > 1`` they are split
    into contiguous chunks, evaluated in worker processes and merged back
    in grid order, so the result does not depend on ``jobs``.
    """
    eta_c = np.asarray(eta_c_grid, dtype=float)
    L = np.asarray(L_grid, dtype=float)
    if eta_c.size == 0 or L.size == 0:
        raise ValueError("scan grids must be non-empty")
    # Single-mode thresholds live far above zero; start bisection near the grid.
    lo = 0.0 if code_photon_number(code) is not None else max(0.0, 2 * eta_c.min() - 1)
    chunks = [c for c in np.array_split(L, max(1, min(jobs, L.size))) if c.size]
    tasks = [(code, eta_c, c, alpha, n_max, lo) for c in chunks]
    if jobs > 1 and len(tasks) > 1:
        with ProcessPoolExecutor(max_workers=jobs) as pool:
            parts = list(pool.map(_scan_columns, tasks))
    else:
        parts = [_scan_columns(t) for t in tasks]
    beats = np.concatenate([p[0] for p in parts], axis=1)
    boundary = np.concatenate([p[1] for p in parts])
    return RegionResult(code.name, eta_c, L, alpha, beats, boundary, n_max)


def golden_section_max(f, lo, hi, tol=SEP_TOL):
    """Maximize a unimodal ``f`` on ``[lo, hi]``; ties move toward ``lo``."""
    inv_phi = (sqrt(5) - 1) / 2
    a, b = lo, hi
    c = b - inv_phi * (b - a)
    d = a + inv_phi * (b - a)
    fc, fd = f(c), f(d)
    while b - a > tol:
        if fc >= fd:
            b, d, fd = d, c, fc
            c = b - inv_phi * (b - a)
            fc = f(c)
        else:
            a, c, fc = c, d, fd
            d = a + inv_phi * (b - a)
            fd = f(d)
    return 0.5 * (a + b)


def _log_rate_at(code, eta_c, L, alpha, x, per_mode):
    model = SegmentModel(code, eta_c, L, alpha)
    if code_photon_number(code) is not None:
        ps = success_probability(code, model.eta)
        val = (x / L) * log(ps) if ps > 0 else -np.inf
        return val - (log(code.modes) if per_mode else 0.0)
    rate = chain_rate_per_mode(model, max(1, round(x / L)), per_mode=per_mode)
    return log(rate) if rate > 0 else -np.inf


def optimal_separation(code, eta_c, x, alpha=DEFAULT_ALPHA, bounds=SEP_BOUNDS, per_mode=True):
    """Separation maximizing the key rate at distance ``x``.

    For photon-number eigenspace codes the segment count is treated as the
    continuous ``x / L``, which makes the optimum independent of ``x``;
    other codes use the nearest whole number of segments.
    """
    return golden_section_max(lambda L: _log_rate_at(code, eta_c, L, alpha, x, per_mode), *bounds)


@dataclass
class RateCurve:
    code: str
    eta_c: float
    alpha: float
    L: float
    optimized: bool
    per_mode: bool
    points: list

    def crossover(self):
        """Distance where the repeater rate first overtakes the bound for good.

        Linear interpolation of ``log(rate / bound)`` between samples; ``None``
        if the repeater never ends above the bound.
        """
        gaps = [
            (x, log(rate) - log(bound)) if rate > 0 else (x, -np.inf)
            for x, _, _, rate, bound in self.points
        ]
        if not gaps or gaps[-1][1] <= 0:
            return None
        k = len(gaps) - 1
        while k > 0 and gaps[k - 1][1] > 0:
            k -= 1
        if k == 0:
            return gaps[0][0]
        (x0, g0), (x1, g1) = gaps[k - 1], gaps[k]
        if not isfinite(g0):
            return x1
        return x0 + (x1 - x0) * (-g0) / (g1 - g0)


def rate_vs_distance(code, eta_c, x_max, L=None, optimize=False, alpha=DEFAULT_ALPHA, per_mode=True):
    """Chain key rate and repeaterless bound at every ``x = n L <= x_max``."""
    if x_max <= 0:
        raise ValueError(f"x_max must be positive, got {x_max}")
    if optimize:
        L = optimal_separation(code, eta_c, x_max, alpha, per_mode=per_mode)
    elif L is None:
        raise ValueError("give a separation or ask for optimization")
    model = SegmentModel(code, eta_c, L, alpha)
    n_max = int(np.floor(x_max / L + 1e-9))
    points = []
    if code_photon_number(code) is not None:
        ps = success_probability(code, model.eta)
        rates = [ps**n / (code.modes if per_mode else 1) for n in range(1, n_max + 1)]
    else:
        rates = []
        for state in iterate_chain(model, n_max):
            if state.n:
                rates.append(chain_key_rate(state) / (code.modes if per_mode else 1))
    for n, rate in zip(range(1, n_max + 1), rates):
        x = n * L
        points.append((x, n, L, rate, repeaterless_bound_km(x, alpha)))
    return RateCurve(code.name, eta_c, alpha, L, optimize, per_mode, points)
