"""
State constructors and state-space geometry.

Covers Bloch parametrisations of qubits and qutrits, positivity and Omega_3
membership, purity and linear entropy, and every state family the detection
schemes are exercised on (one/two/three-parameter qutrits, Schmidt pure states,
two-qutrit mixtures, isotropic and two-qubit Werner states). Also parses the
JSON state format consumed by the command line.
"""

import json
from dataclasses import dataclass
from enum import Enum
from typing import Any, Callable, Dict, Mapping, Sequence, Tuple, Union

import numpy as np

from src import config
from src.core_utils import NumericalError, PositivityError, ValidationError, as_real_vector, require_unit_interval
from src.su_algebra import (
    SQRT3,
    HermitianOperator,
    as_matrix,
    gellmann,
    gellmann_stack,
    pauli_stack,
    star,
)

ALLOWED_DIMS = config.ALLOWED_DIMS


# =============================================================================
# DOMAIN TYPES
# =============================================================================

@dataclass(frozen=True, eq=False)
class DensityMatrix:
    """A validated density matrix: Hermitian, unit trace, positive semidefinite."""
    op: HermitianOperator

    @classmethod
    def from_matrix(cls, matrix, tol: float = config.POSITIVITY_TOL) -> "DensityMatrix":
        """Validate and wrap a raw matrix.

        Raises:
            ValidationError: Wrong shape or dimension, trace != 1.
            NumericalError: Not Hermitian, as for observables.
            PositivityError: Smallest eigenvalue below -tol.
        """
        m = np.array(matrix, dtype=complex)
        if m.ndim != 2 or m.shape[0] != m.shape[1]:
            raise ValidationError(f"density matrix must be square, got shape {m.shape}")
        if m.shape[0] not in ALLOWED_DIMS:
            raise ValidationError(f"density matrix dimension must be one of {ALLOWED_DIMS}, got {m.shape[0]}")
        if np.max(np.abs(m - m.conj().T)) > config.TRACE_TOL:
            raise NumericalError("density matrix is not Hermitian")
        m = (m + m.conj().T) / 2
        trace = float(np.trace(m).real)
        if abs(trace - 1.0) > config.TRACE_TOL:
            raise ValidationError(f"density matrix must have unit trace, got {trace:.12g}")
        min_eig = float(np.linalg.eigvalsh(m)[0])
        if min_eig < -tol:
            raise PositivityError("state is not positive semidefinite", min_eigenvalue=min_eig)
        m.setflags(write=False)
        return cls(HermitianOperator(m))

    @property
    def matrix(self) -> np.ndarray:
        return self.op.matrix

    @property
    def dim(self) -> int:
        return self.op.dim

    def eigenvalues(self) -> np.ndarray:
        return self.op.eigenvalues()


@dataclass(frozen=True, eq=False)
class BlochVector:
    """Real Bloch coefficients: 3 components for a qubit, 8 for a qutrit."""
    n: np.ndarray

    @property
    def dim(self) -> int:
        return 2 if self.n.size == 3 else 3

    def norm_sq(self) -> float:
        return float(self.n @ self.n)

    def to_list(self):
        return [float(x) for x in self.n]


@dataclass(frozen=True)
class SchmidtCoeffs:
    """Real nonnegative Schmidt coefficients k_1..k_m (m = 2 or 3), sum k_i^2 = 1."""
    k: Tuple[float, ...]

    def __post_init__(self):
        if len(self.k) not in (2, 3):
            raise ValidationError(f"Schmidt coefficients need 2 or 3 entries, got {len(self.k)}")
        if any(not np.isfinite(x) for x in self.k):
            raise ValidationError("Schmidt coefficients must be finite")
        if any(x < 0 for x in self.k):
            raise ValidationError("Schmidt coefficients must be nonnegative")
        total = sum(x * x for x in self.k)
        if abs(total - 1.0) > config.NORM_TOL:
            raise ValidationError(f"Schmidt coefficients must satisfy sum k^2 = 1, got {total:.12g}")

    @classmethod
    def of(cls, values: Sequence[float]) -> "SchmidtCoeffs":
        return cls(tuple(float(x) for x in values))

    @property
    def local_dim(self) -> int:
        return len(self.k)

    def ket(self) -> np.ndarray:
        """The vector sum_i k_i |ii> in C^(d*d)."""
        d = self.local_dim
        psi = np.zeros(d * d, dtype=complex)
        for i, ki in enumerate(self.k):
            psi[i * d + i] = ki
        return psi


@dataclass(frozen=True)
class MixtureParam:
    """Weight p and the two Schmidt pure components of p|psi1><psi1| + (1-p)|psi2><psi2|."""
    p: float
    psi1: SchmidtCoeffs
    psi2: SchmidtCoeffs

    def __post_init__(self):
        require_unit_interval(self.p, "p")
        if self.psi1.local_dim != self.psi2.local_dim:
            raise ValidationError("mixture components must have the same local dimension")

    @classmethod
    def of(cls, p: float, k_a: Sequence[float], k_b: Sequence[float]) -> "MixtureParam":
        return cls(float(p), SchmidtCoeffs.of(k_a), SchmidtCoeffs.of(k_b))


class Omega3Label(str, Enum):
    INTERIOR = "Interior"
    BOUNDARY = "Boundary"
    EXTREMAL = "Extremal"
    OUTSIDE = "Outside"


# =============================================================================
# BLOCH PARAMETRISATIONS
# =============================================================================

def qubit_density(n: Sequence[float]) -> DensityMatrix:
    """(I + n.sigma)/2.

    Raises:
        PositivityError: If |n| > 1 beyond tolerance.
    """
    vec = as_real_vector(n, 3, "n")
    norm_sq = float(vec @ vec)
    if norm_sq > 1.0 + config.POSITIVITY_TOL:
        raise PositivityError(f"qubit Bloch vector outside the unit ball (|n|^2 = {norm_sq:.12g})",
                              min_eigenvalue=(1.0 - np.sqrt(norm_sq)) / 2, admissible="|n| <= 1")
    m = (np.eye(2) + np.einsum("i,iab->ab", vec, pauli_stack())) / 2
    return DensityMatrix.from_matrix(m)


def qutrit_density(n: Sequence[float]) -> DensityMatrix:
    """(I + sqrt(3) n.lambda)/3.

    Raises:
        PositivityError: If the smallest eigenvalue is below -1e-10.
    """
    vec = as_real_vector(n, 8, "n")
    m = (np.eye(3) + SQRT3 * np.einsum("i,iab->ab", vec, gellmann_stack())) / 3
    return DensityMatrix.from_matrix(m)


def density_from_bloch(bloch: BlochVector) -> DensityMatrix:
    return qubit_density(bloch.n) if bloch.n.size == 3 else qutrit_density(bloch.n)


def bloch_of(rho: Union[DensityMatrix, np.ndarray]) -> BlochVector:
    """Inverse of the qubit/qutrit constructors.

    Qubit n_i = tr(rho sigma_i); qutrit n_i = (sqrt(3)/2) tr(rho lambda_i).
    """
    m = as_matrix(rho)
    if m.shape == (2, 2):
        n = np.einsum("iab,ba->i", pauli_stack(), m).real
    elif m.shape == (3, 3):
        n = (SQRT3 / 2) * np.einsum("iab,ba->i", gellmann_stack(), m).real
    else:
        raise ValidationError(f"Bloch vectors exist for dimension 2 or 3 only, got {m.shape[0]}")
    return BlochVector(n)


# =============================================================================
# PURITY AND MIXEDNESS
# =============================================================================

def purity(rho: Union[DensityMatrix, np.ndarray]) -> float:
    m = as_matrix(rho)
    return float(np.einsum("ab,ba->", m, m).real)


def is_pure(rho: Union[DensityMatrix, np.ndarray], tol: float = config.PURITY_TOL) -> bool:
    return 1.0 - purity(rho) < tol


def linear_entropy(rho: Union[DensityMatrix, np.ndarray]) -> float:
    """(d/(d-1)) (1 - tr rho^2) with d the full system dimension."""
    m = as_matrix(rho)
    d = m.shape[0]
    return max(0.0, (d / (d - 1)) * (1.0 - purity(m)))


def omega3_membership(n: Sequence[float], tol: float = config.MEMBERSHIP_TOL) -> Omega3Label:
    """Locate a qutrit Bloch vector relative to Omega_3.

    Positivity of (I + sqrt(3) n.lambda)/3 is equivalent to n.n <= 1 together
    with 3 n.n - 2 (n*n).n <= 1. The most specific label is returned.
    """
    vec = as_real_vector(n, 8, "n")
    nn = float(vec @ vec)
    nstar = star(vec, vec)
    cubic = 3.0 * nn - 2.0 * float(nstar @ vec)
    if abs(nn - 1.0) < tol and float(np.max(np.abs(nstar - vec))) < tol:
        return Omega3Label.EXTREMAL
    if abs(cubic - 1.0) < tol and nn <= 1.0 + tol:
        return Omega3Label.BOUNDARY
    if cubic < 1.0 and nn < 1.0:
        return Omega3Label.INTERIOR
    return Omega3Label.OUTSIDE


# =============================================================================
# SINGLE-QUTRIT FAMILIES
# =============================================================================

def admissible_range(i: int) -> Tuple[float, float]:
    """Interval of v for which n = v e_i is a valid qutrit Bloch vector."""
    mu = np.linalg.eigvalsh(SQRT3 * gellmann(i).matrix)
    lo = max(-1.0 / m for m in mu if m > config.ALGEBRA_TOL)
    hi = min(-1.0 / m for m in mu if m < -config.ALGEBRA_TOL)
    return float(lo), float(hi)


def _qutrit_components(indices: Sequence[int], values: Sequence[float], expected: int,
                       label: str) -> BlochVector:
    idx = [int(i) for i in indices]
    vals = [float(v) for v in values]
    if len(idx) != expected or len(vals) != expected:
        raise ValidationError(f"{label} needs {expected} indices and {expected} values")
    if any(not 1 <= i <= 8 for i in idx):
        raise ValidationError(f"{label}: indices must lie in 1..8, got {idx}")
    if len(set(idx)) != expected:
        raise ValidationError(f"{label}: indices must be distinct, got {idx}")
    n = np.zeros(8)
    for i, v in zip(idx, vals):
        n[i - 1] = v
    qutrit_density(n)
    return BlochVector(n)


def one_param_qutrit(i: int, v: float) -> BlochVector:
    """Qutrit Bloch vector with only n_i = v nonzero.

    Raises:
        PositivityError: With the admissible range of v when it is violated.
    """
    gellmann(i)
    lo, hi = admissible_range(int(i))
    try:
        return _qutrit_components([i], [v], 1, "one_param_qutrit")
    except PositivityError as e:
        raise PositivityError(f"one_param_qutrit({i}, {v}): positivity violated",
                              min_eigenvalue=e.min_eigenvalue,
                              admissible=f"n_{i} in [{lo:.12g}, {hi:.12g}]") from e


def two_param_qutrit(indices: Sequence[int], values: Sequence[float]) -> BlochVector:
    return _qutrit_components(indices, values, 2, "two_param_qutrit")


def three_param_qutrit(indices: Sequence[int], values: Sequence[float]) -> BlochVector:
    return _qutrit_components(indices, values, 3, "three_param_qutrit")


# =============================================================================
# BIPARTITE FAMILIES
# =============================================================================

def _projector(psi: np.ndarray) -> np.ndarray:
    return np.outer(psi, psi.conj())


def schmidt_pure(k: Union[SchmidtCoeffs, Sequence[float]]) -> DensityMatrix:
    """Projector onto sum_i k_i |ii> (two qubits for 2 coefficients, two qutrits for 3)."""
    coeffs = k if isinstance(k, SchmidtCoeffs) else SchmidtCoeffs.of(k)
    return DensityMatrix.from_matrix(_projector(coeffs.ket()))


def mixture(m: MixtureParam) -> DensityMatrix:
    """p |psi1><psi1| + (1-p) |psi2><psi2|."""
    rho = m.p * _projector(m.psi1.ket()) + (1.0 - m.p) * _projector(m.psi2.ket())
    return DensityMatrix.from_matrix(rho)


def isotropic(p: float, local_dim: int = 3) -> DensityMatrix:
    """p |phi><phi| + ((1-p)/d^2) I with |phi> the maximally entangled state.

    local_dim defaults to 3 (two qutrits); local_dim=2 gives the two-qubit
    isotropic family.
    """
    p = require_unit_interval(p, "p")
    if local_dim not in (2, 3):
        raise ValidationError(f"isotropic states are defined for local_dim 2 or 3, got {local_dim}")
    phi = SchmidtCoeffs.of([1.0 / np.sqrt(local_dim)] * local_dim).ket()
    dim = local_dim * local_dim
    return DensityMatrix.from_matrix(p * _projector(phi) + (1.0 - p) / dim * np.eye(dim))


def singlet() -> np.ndarray:
    return np.array([0.0, 1.0, -1.0, 0.0], dtype=complex) / np.sqrt(2.0)


def werner_qubit(p: float) -> DensityMatrix:
    """((1-p)/4) I + p rho_singlet, positive for p in [-1/3, 1]."""
    p = float(p)
    if not np.isfinite(p):
        raise ValidationError("p must be finite")
    try:
        return DensityMatrix.from_matrix((1.0 - p) / 4 * np.eye(4) + p * _projector(singlet()))
    except PositivityError as e:
        raise PositivityError(f"werner_qubit({p}): positivity violated", min_eigenvalue=e.min_eigenvalue,
                              admissible="p in [-1/3, 1]") from e


# =============================================================================
# RANDOM STATES
# =============================================================================

def _check_dim(dim: int) -> int:
    if dim not in ALLOWED_DIMS:
        raise ValidationError(f"dimension must be one of {ALLOWED_DIMS}, got {dim}")
    return int(dim)


def _gaussian_ket(rng: np.random.Generator, dim: int) -> np.ndarray:
    psi = rng.standard_normal(dim) + 1j * rng.standard_normal(dim)
    return psi / np.linalg.norm(psi)


def random_pure(dim: int, seed=None) -> DensityMatrix:
    """Projector onto a normalised complex-Gaussian vector."""
    rng = np.random.default_rng(seed)
    return DensityMatrix.from_matrix(_projector(_gaussian_ket(rng, _check_dim(dim))))


def random_density(dim: int, seed=None) -> DensityMatrix:
    """Mixture of dim independent random pure states with Dirichlet(1, ..., 1) weights.

    This is a fixed mixing construction, not a canonical measure on states.
    """
    rng = np.random.default_rng(seed)
    dim = _check_dim(dim)
    kets = [_gaussian_ket(rng, dim) for _ in range(dim)]
    weights = rng.dirichlet(np.ones(dim))
    rho = sum(w * _projector(k) for w, k in zip(weights, kets))
    return DensityMatrix.from_matrix(rho)


def random_hermitian(dim: int, seed=None) -> HermitianOperator:
    rng = np.random.default_rng(seed)
    g = rng.standard_normal((dim, dim)) + 1j * rng.standard_normal((dim, dim))
    return HermitianOperator.from_matrix((g + g.conj().T) / 2)


def random_qutrit_bloch(seed=None) -> BlochVector:
    """Bloch vector of a random_density qutrit, i.e. a point of Omega_3."""
    return bloch_of(random_density(3, seed))


# =============================================================================
# JSON STATE FORMAT
# =============================================================================

def _field(params: Mapping[str, Any], name: str, context: str) -> Any:
    if name not in params:
        raise ValidationError(f"{context}: missing field '{name}'")
    return params[name]


def _family_one_param(params):
    return density_from_bloch(one_param_qutrit(_field(params, "index", "one_param"),
                                                _field(params, "value", "one_param")))


def _family_two_param(params):
    return density_from_bloch(two_param_qutrit(_field(params, "indices", "two_param"),
                                                _field(params, "values", "two_param")))


def _family_three_param(params):
    return density_from_bloch(three_param_qutrit(_field(params, "indices", "three_param"),
                                                  _field(params, "values", "three_param")))


def _family_schmidt(params):
    return schmidt_pure(SchmidtCoeffs.of(_field(params, "k", "schmidt")))


def _family_mixture(params):
    return mixture(MixtureParam.of(_field(params, "p", "mixture"), _field(params, "k_a", "mixture"),
                                   _field(params, "k_b", "mixture")))


def _family_isotropic(params):
    return isotropic(_field(params, "p", "isotropic"), int(params.get("local_dim", 3)))


def _family_werner(params):
    return werner_qubit(_field(params, "p", "werner_qubit"))


FAMILY_BUILDERS: Dict[str, Callable[[Mapping[str, Any]], DensityMatrix]] = {
    "one_param": _family_one_param,
    "two_param": _family_two_param,
    "three_param": _family_three_param,
    "schmidt": _family_schmidt,
    "mixture": _family_mixture,
    "isotropic": _family_isotropic,
    "werner_qubit": _family_werner,
}


def state_from_json(source: Union[str, Mapping[str, Any]]) -> DensityMatrix:
    """Build a state from the JSON state format.

    Accepted shapes::

        {"kind": "bloch", "dim": 2|3, "n": [...]}
        {"kind": "density", "dim": D, "re": [[...]], "im": [[...]]}
        {"kind": "family", "name": "<family>", "params": {...}}

    Raises:
        ValidationError: Malformed JSON or missing/invalid fields (names the field).
        PositivityError: The described state is not positive.
    """
    if isinstance(source, str):
        try:
            obj = json.loads(source)
        except json.JSONDecodeError as e:
            raise ValidationError(f"state: malformed JSON ({e.msg} at position {e.pos})") from e
    else:
        obj = source
    if not isinstance(obj, Mapping):
        raise ValidationError("state: expected a JSON object")

    kind = _field(obj, "kind", "state")
    if kind == "bloch":
        dim = _field(obj, "dim", "state")
        n = _field(obj, "n", "state")
        if dim == 2:
            return qubit_density(as_real_vector(n, 3, "n"))
        if dim == 3:
            return qutrit_density(as_real_vector(n, 8, "n"))
        raise ValidationError(f"state: field 'dim' must be 2 or 3 for Bloch input, got {dim!r}")
    if kind == "density":
        dim = _field(obj, "dim", "state")
        try:
            re = np.asarray(_field(obj, "re", "state"), dtype=float)
            im = np.asarray(obj.get("im", np.zeros_like(re)), dtype=float)
        except (TypeError, ValueError) as e:
            raise ValidationError(f"state: fields 're'/'im' must be numeric matrices ({e})") from e
        if re.shape != (dim, dim) or im.shape != (dim, dim):
            raise ValidationError(f"state: fields 're'/'im' must be {dim}x{dim}")
        return DensityMatrix.from_matrix(re + 1j * im)
    if kind == "family":
        name = _field(obj, "name", "state")
        if name not in FAMILY_BUILDERS:
            raise ValidationError(f"state: unknown family name '{name}' (known: {', '.join(FAMILY_BUILDERS)})")
        params = obj.get("params", {})
        if not isinstance(params, Mapping):
            raise ValidationError("state: field 'params' must be an object")
        try:
            return FAMILY_BUILDERS[name](params)
        except (TypeError, ValueError) as e:
            raise ValidationError(f"state: invalid params for family '{name}' ({e})") from e
    raise ValidationError(f"state: field 'kind' must be bloch, density or family, got {kind!r}")


def describe_state(rho: DensityMatrix) -> Dict[str, Any]:
    """Small summary used in CLI payloads."""
    info: Dict[str, Any] = {
        "dim": rho.dim,
        "purity": purity(rho),
        "linear_entropy": linear_entropy(rho),
        "min_eigenvalue": float(rho.eigenvalues()[0]),
    }
    if rho.dim in (2, 3):
        info["bloch"] = bloch_of(rho).to_list()
    if rho.dim == 3:
        info["omega3"] = omega3_membership(bloch_of(rho).n).value
    return info
