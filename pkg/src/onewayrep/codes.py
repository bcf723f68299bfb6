"""Loss-protecting bosonic codes and their Knill-Laflamme validation."""

import json
from dataclasses import dataclass
from math import sqrt

import jsonschema
import numpy as np

from . import config
from .fock import FockBasis, annihilation, creation, dagger, function_of_number, projector_from_states

CODE_DIM = 2

CODE_FILE_SCHEMA = {
    "type": "object",
    "required": ["modes", "cutoff", "logical0", "logical1"],
    "additionalProperties": False,
    "properties": {
        "name": {"type": "string"},
        "modes": {"type": "integer", "minimum": 1},
        "cutoff": {"type": "integer", "minimum": 0},
        "logical0": {"$ref": "#/definitions/codeword"},
        "logical1": {"$ref": "#/definitions/codeword"},
    },
    "definitions": {
        "codeword": {
            "type": "array",
            "minItems": 1,
            "items": {
                "type": "object",
                "required": ["occupation", "re"],
                "additionalProperties": False,
                "properties": {
                    "occupation": {"type": "array", "items": {"type": "integer", "minimum": 0}},
                    "re": {"type": "number"},
                    "im": {"type": "number"},
                },
            },
        }
    },
}


class CodeError(ValueError):
    pass


@dataclass(frozen=True, eq=False)
class CodeSpec:
    """Two logical codewords in a truncated Fock space."""

    basis: FockBasis
    logical0: np.ndarray
    logical1: np.ndarray
    name: str = "custom"

    def __post_init__(self):
        for label, v in (("logical0", self.logical0), ("logical1", self.logical1)):
            if np.shape(v) != (self.basis.dim,):
                raise CodeError(f"{label} has shape {np.shape(v)}, expected ({self.basis.dim},)")
            if abs(np.linalg.norm(v) - 1) > config.EXACT:
                raise CodeError(f"{label} is not normalized (norm {np.linalg.norm(v):.12g})")
        overlap = np.vdot(self.logical0, self.logical1)
        if abs(overlap) > config.EXACT:
            raise CodeError(f"codewords are not orthogonal: <0_L|1_L> = {overlap:.3g}")

    @property
    def modes(self):
        return self.basis.modes

    @property
    def d(self):
        return CODE_DIM

    @property
    def codewords(self):
        return (self.logical0, self.logical1)

    @property
    def isometry(self):
        """``|0_L><0| + |1_L><1|``, embedding a logical qubit into the Fock space."""
        return np.column_stack(self.codewords)

    @property
    def projector(self):
        return projector_from_states(self.codewords)


def _superpose(basis, terms):
    v = sum(amp * basis.ket(*occ) for occ, amp in terms)
    return np.asarray(v, dtype=complex)


def builtin_code(name):
    """One of the example codes ``single-mode``, ``two-mode`` or ``three-mode``.

    The per-mode cutoff equals the largest single-mode occupation in any
    codeword, so loss (which only removes photons) never leaves the space.
    """
    if name == "single-mode":
        b = FockBasis(1, 3)
        return CodeSpec(b, b.ket(1), b.ket(3), name)
    if name == "two-mode":
        b = FockBasis(2, 4)
        zero = _superpose(b, [((4, 0), 1 / sqrt(2)), ((0, 4), 1 / sqrt(2))])
        return CodeSpec(b, zero, b.ket(2, 2), name)
    if name == "three-mode":
        b = FockBasis(3, 3)
        one = _superpose(b, [((0, 0, 3), 1 / sqrt(3)), ((0, 3, 0), 1 / sqrt(3)), ((3, 0, 0), 1 / sqrt(3))])
        return CodeSpec(b, b.ket(1, 1, 1), one, name)
    raise CodeError(f"unknown code {name!r}; choose from {', '.join(BUILTIN_CODES)}")


BUILTIN_CODES = ("single-mode", "two-mode", "three-mode")


def code_from_dict(obj):
    try:
        jsonschema.validate(obj, CODE_FILE_SCHEMA)
    except jsonschema.ValidationError as exc:
        raise CodeError(f"invalid code description: {exc.message}") from None
    basis = FockBasis(obj["modes"], obj["cutoff"])
    words = []
    for key in ("logical0", "logical1"):
        v = np.zeros(basis.dim, dtype=complex)
        for term in obj[key]:
            occ = term["occupation"]
            if len(occ) != basis.modes:
                raise CodeError(f"{key}: occupation {occ} does not have {basis.modes} modes")
            if max(occ) > basis.cutoff:
                raise CodeError(f"{key}: occupation {occ} exceeds cutoff {basis.cutoff}")
            v[basis.index(occ)] += complex(term["re"], term.get("im", 0.0))
        words.append(v)
    return CodeSpec(basis, words[0], words[1], obj.get("name", "custom"))


def code_to_dict(code):
    out = {"name": code.name, "modes": code.modes, "cutoff": code.basis.cutoff}
    for key, v in (("logical0", code.logical0), ("logical1", code.logical1)):
        out[key] = [
            {"occupation": list(code.basis.occupation(i)), "re": float(v[i].real), "im": float(v[i].imag)}
            for i in np.flatnonzero(np.abs(v) > 0)
        ]
    return out


def load_custom_code(path):
    with open(path) as fh:
        return code_from_dict(json.load(fh))


def resolve_code(name_or_path):
    if name_or_path in BUILTIN_CODES:
        return builtin_code(name_or_path)
    if name_or_path.endswith(".json"):
        return load_custom_code(name_or_path)
    return builtin_code(name_or_path)


@dataclass(frozen=True, eq=False)
class ErrorFamily:
    """Single-photon-loss operators ``E_1..E_M`` and the no-loss operator ``E_0``."""

    eta: float
    no_loss: np.ndarray
    single_loss: tuple


def error_family(basis, eta):
    if not 0 < eta <= 1:
        raise ValueError(f"transmissivity must lie in (0, 1], got {eta}")
    damp = function_of_number(basis, lambda n: sqrt(eta) ** n)
    ops = tuple(sqrt(1 - eta) * damp @ annihilation(basis, i) for i in range(1, basis.modes + 1))
    return ErrorFamily(eta, damp, ops)


@dataclass
class KLReport:
    code: str
    eta: float
    include_no_loss: bool
    residual: float
    worst_pair: tuple
    c: list
    tol: float
    orthogonality_residual: float = 0.0

    @property
    def passed(self):
        return self.residual <= self.tol

    def as_dict(self):
        return {
            "code": self.code,
            "eta": self.eta,
            "include_no_loss": self.include_no_loss,
            "pass": self.passed,
            "residual": self.residual,
            "worst_pair": list(self.worst_pair),
            "c": self.c,
            "orthogonality_residual": self.orthogonality_residual,
            "tol": self.tol,
        }


def kl_check(code, errors, include_no_loss=False, tol=None):
    """Residual of ``P E_i^dagger E_j P = delta_ij c_i P`` over all pairs.

    ``c_i`` is fitted as ``Tr(P E_i^dagger E_i P) / d``. Operators are
    labelled by mode index, with 0 standing for the no-loss operator.

    ``orthogonality_residual`` isolates the off-diagonal half of the
    conditions (distinct errors, or distinct codewords under the same
    error, must not overlap); it stays small for codes whose codewords are
    merely damped by different amounts.
    """
    tol = config.ACCUM if tol is None else tol
    p = code.projector
    ops = list(enumerate(errors.single_loss, start=1))
    if include_no_loss:
        ops.insert(0, (0, errors.no_loss))
    c = {}
    for i, e in ops:
        c[i] = float(np.real(np.trace(p @ dagger(e) @ e @ p))) / code.d
    v = code.isometry
    residual, worst, ortho = 0.0, (ops[0][0], ops[0][0]), 0.0
    for i, ei in ops:
        for j, ej in ops:
            block = p @ dagger(ei) @ ej @ p
            target = c[i] * p if i == j else 0.0
            r = float(np.max(np.abs(block - target)))
            if r > residual:
                residual, worst = r, (i, j)
            small = dagger(v) @ block @ v
            if i == j:
                small = small - np.diag(np.diag(small))
            ortho = max(ortho, float(np.max(np.abs(small))))
    return KLReport(
        code.name, errors.eta, include_no_loss, residual, worst, [c[i] for i, _ in ops], tol, ortho
    )


def error_probabilities(code, eta):
    """Probability ``c_i`` of losing exactly one photon from mode ``i``.

    Evaluates ``(1 - eta)/d * Tr(P a_i^dagger a_i eta^(N-1))``.
    """
    if not 0 < eta <= 1:
        raise ValueError(f"transmissivity must lie in (0, 1], got {eta}")
    p = code.projector
    damp = function_of_number(code.basis, lambda n: eta ** (n - 1))
    out = []
    for i in range(1, code.modes + 1):
        ni = creation(code.basis, i) @ annihilation(code.basis, i)
        out.append((1 - eta) / code.d * float(np.real(np.trace(p @ ni @ damp))))
    return out


@dataclass(frozen=True, eq=False)
class ErrorSpaces:
    """Normalized images ``|j^(i)>`` of the codewords and projectors ``P^(i)``.

    ``vectors[i - 1]`` holds ``(|0^(i)>, |1^(i)>)`` for mode ``i``.
    """

    vectors: tuple
    projectors: tuple

    def gram_deviation(self, code):
        allv = list(code.codewords) + [v for pair in self.vectors for v in pair]
        g = np.array(allv).conj() @ np.array(allv).T
        return float(np.max(np.abs(g - np.eye(len(allv)))))


# Reference transmissivity for building error spaces when the caller does
# not supply a family; the normalized images do not depend on it for
# correctable codes.
REFERENCE_ETA = 0.5


def error_spaces(code, errors=None, tol=None):
    """Orthonormal error-space bases and projectors for single-photon loss.

    Only the orthogonality half of the Knill-Laflamme conditions is
    required: the normalized images of the codewords must be orthonormal
    across modes and orthogonal to code space. ``P^(i)`` is assembled from
    the normalized images, which coincides with
    ``E_i P E_i^dagger / (Tr(E_i P E_i^dagger) / 2)`` whenever the full
    conditions hold and stays a projector when they do not (single-mode
    code, whose two codewords lose a photon with different probability).
    """
    tol = config.ACCUM if tol is None else tol
    errors = error_family(code.basis, REFERENCE_ETA) if errors is None else errors
    if errors.eta == 1:
        raise CodeError("single-loss operators vanish at eta = 1; use eta < 1")
    vectors = []
    for e in errors.single_loss:
        pair = []
        for w in code.codewords:
            img = e @ w
            norm = np.linalg.norm(img)
            if norm <= tol:
                raise CodeError("a codeword is annihilated by a single-loss operator")
            pair.append(img / norm)
        vectors.append(tuple(pair))
    spaces = ErrorSpaces(tuple(vectors), tuple(np.outer(w0, w0.conj()) + np.outer(w1, w1.conj()) for w0, w1 in vectors))
    dev = spaces.gram_deviation(code)
    if dev > tol:
        raise CodeError(
            f"error spaces of code {code.name!r} are not mutually orthogonal (Gram deviation {dev:.2e})"
        )
    return spaces


def code_photon_number(code, tol=None):
    """Total photon number ``n`` if ``N P = n P``, else ``None``."""
    tol = config.EXACT if tol is None else tol
    n_of = code.basis.total_photons
    support = set()
    for w in code.codewords:
        support.update(int(n) for n in n_of[np.abs(w) > tol])
    if len(support) != 1:
        return None
    n = support.pop()
    p = code.projector
    num = np.diag(n_of.astype(complex))
    return n if np.max(np.abs(num @ p - n * p)) <= tol else None


def is_number_eigenspace(code, tol=None):
    return code_photon_number(code, tol) is not None
