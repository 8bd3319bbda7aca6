"""
Operator bases and SU(3) algebra for the GUR mixedness witness.

This module provides:
- Pauli, Gell-Mann and spin-1 matrices
- The SU(3) structure constants, computed once from trace formulas
- The star (symmetric) and wedge (antisymmetric) products on R^8
- Kronecker products, basis decomposition and unitary conjugation

Gell-Mann indices are 1-based everywhere in the public API (lambda_1 ... lambda_8),
matching how observables are named on the command line.
"""

from dataclasses import dataclass
from functools import lru_cache
from itertools import product
from typing import Dict, Sequence, Tuple, Union

import numpy as np
from scipy.stats import unitary_group

from src import config
from src.core_utils import NumericalError, ValidationError

SQRT3 = np.sqrt(3.0)

# Pair of 0-based matrix positions (row, col) per off-diagonal Gell-Mann matrix
_SYMMETRIC = {1: (0, 1), 4: (0, 2), 6: (1, 2)}
_ANTISYMMETRIC = {2: (0, 1), 5: (0, 2), 7: (1, 2)}


# =============================================================================
# HERMITIAN OPERATOR
# =============================================================================

def _check_shape(shape: Tuple[int, ...]) -> None:
    if len(shape) != 2 or shape[0] != shape[1]:
        raise ValidationError(f"operator must be square, got shape {shape}")
    if shape[0] not in config.ALLOWED_DIMS:
        raise ValidationError(f"operator dimension must be one of {config.ALLOWED_DIMS}, got {shape[0]}")


@dataclass(frozen=True, eq=False)
class HermitianOperator:
    """A dim x dim complex Hermitian matrix tagged with its dimension.

    Every operator is square with dim in config.ALLOWED_DIMS; construction
    raises ValidationError otherwise. Construct through :meth:`from_matrix`
    to get the Hermiticity check as well.
    """
    matrix: np.ndarray

    def __post_init__(self):
        _check_shape(np.shape(self.matrix))

    @classmethod
    def from_matrix(cls, matrix, tol: float = config.HERMITIAN_TOL) -> "HermitianOperator":
        m = np.array(matrix, dtype=complex)
        _check_shape(m.shape)
        scale = max(1.0, float(np.max(np.abs(m))))
        if np.max(np.abs(m - m.conj().T)) > tol * scale:
            raise NumericalError("operator is not Hermitian")
        m.setflags(write=False)
        return cls(m)

    @property
    def dim(self) -> int:
        return self.matrix.shape[0]

    def trace(self) -> float:
        return float(np.trace(self.matrix).real)

    def eigenvalues(self) -> np.ndarray:
        return np.linalg.eigvalsh(self.matrix)


OperatorLike = Union[HermitianOperator, np.ndarray]


def as_matrix(op: OperatorLike) -> np.ndarray:
    """Return the raw complex matrix behind an operator-like input."""
    if isinstance(op, HermitianOperator):
        return op.matrix
    if hasattr(op, "op"):  # DensityMatrix
        return op.op.matrix
    return np.asarray(op, dtype=complex)


def _frozen(m: np.ndarray) -> HermitianOperator:
    m = np.array(m, dtype=complex)
    m.setflags(write=False)
    return HermitianOperator(m)


# =============================================================================
# BASES
# =============================================================================

def pauli(axis: str) -> HermitianOperator:
    """Standard Pauli matrix for axis 'x', 'y' or 'z'."""
    axis = str(axis).lower()
    if axis == "x":
        return _frozen([[0, 1], [1, 0]])
    if axis == "y":
        return _frozen([[0, -1j], [1j, 0]])
    if axis == "z":
        return _frozen([[1, 0], [0, -1]])
    raise ValidationError(f"unknown Pauli axis '{axis}' (expected x, y or z)")


@lru_cache(maxsize=None)
def _gellmann_matrix(i: int) -> np.ndarray:
    m = np.zeros((3, 3), dtype=complex)
    if i in _SYMMETRIC:
        r, c = _SYMMETRIC[i]
        m[r, c] = m[c, r] = 1.0
    elif i in _ANTISYMMETRIC:
        r, c = _ANTISYMMETRIC[i]
        m[r, c] = -1j
        m[c, r] = 1j
    elif i == 3:
        m[0, 0], m[1, 1] = 1.0, -1.0
    else:
        m[0, 0] = m[1, 1] = 1.0 / SQRT3
        m[2, 2] = -2.0 / SQRT3
    m.setflags(write=False)
    return m


def gellmann(i: int) -> HermitianOperator:
    """Standard Gell-Mann matrix lambda_i, 1 <= i <= 8.

    Normalised so that tr(lambda_k lambda_l) = 2 delta_kl.

    Raises:
        ValidationError: If i is outside 1..8.
    """
    try:
        idx = int(i)
    except (TypeError, ValueError):
        idx = None
    if isinstance(i, bool) or idx is None or idx != i or not 1 <= idx <= 8:
        raise ValidationError(f"Gell-Mann index must be in 1..8, got {i!r}")
    return HermitianOperator(_gellmann_matrix(idx))


def gellmann_stack() -> np.ndarray:
    """All eight Gell-Mann matrices as an array of shape (8, 3, 3)."""
    return np.stack([_gellmann_matrix(i) for i in range(1, 9)])


def pauli_stack() -> np.ndarray:
    """sigma_x, sigma_y, sigma_z as an array of shape (3, 2, 2)."""
    return np.stack([pauli(a).matrix for a in "xyz"])


def spin1(axis: str) -> HermitianOperator:
    """Spin-1 matrices with S_z = diag(1, 0, -1)."""
    axis = str(axis).lower()
    s = 1.0 / np.sqrt(2.0)
    if axis == "x":
        return _frozen(s * np.array([[0, 1, 0], [1, 0, 1], [0, 1, 0]]))
    if axis == "y":
        return _frozen(s * np.array([[0, -1j, 0], [1j, 0, -1j], [0, 1j, 0]]))
    if axis == "z":
        return _frozen(np.diag([1.0, 0.0, -1.0]))
    raise ValidationError(f"unknown spin-1 axis '{axis}' (expected x, y or z)")


def basis_with_identity(dim: int) -> np.ndarray:
    """{I, sigma_i} for dim 2 or {I, lambda_i} for dim 3, stacked."""
    if dim == 2:
        return np.concatenate([np.eye(2, dtype=complex)[None], pauli_stack()])
    if dim == 3:
        return np.concatenate([np.eye(3, dtype=complex)[None], gellmann_stack()])
    raise ValidationError(f"no single-party basis for dimension {dim}")


def direction_operator(coeffs: Sequence[float]) -> HermitianOperator:
    """Return a.lambda for a in R^8 or r.sigma for r in R^3."""
    vec = np.asarray(coeffs, dtype=float).reshape(-1)
    if vec.size == 3:
        return _frozen(np.einsum("i,iab->ab", vec, pauli_stack()))
    if vec.size == 8:
        return _frozen(np.einsum("i,iab->ab", vec, gellmann_stack()))
    raise ValidationError(f"direction must have 3 or 8 components, got {vec.size}")


# =============================================================================
# STRUCTURE CONSTANTS
# =============================================================================

@dataclass(frozen=True, eq=False)
class StructureConstants:
    """Symmetric d and antisymmetric f tensors of SU(3).

    Arrays are 0-based with shape (8, 8, 8); use :meth:`d_value` and
    :meth:`f_value` for the conventional 1-based indexing.
    """
    d: np.ndarray
    f: np.ndarray

    def d_value(self, j: int, k: int, l: int) -> float:
        return float(self.d[j - 1, k - 1, l - 1])

    def f_value(self, j: int, k: int, l: int) -> float:
        return float(self.f[j - 1, k - 1, l - 1])


@lru_cache(maxsize=1)
def structure_constants() -> StructureConstants:
    """Compute d_jkl = tr({l_j, l_k} l_l)/4 and f_jkl = tr([l_j, l_k] l_l)/(4i).

    Cached after the first call; the returned arrays are read-only.
    """
    lam = gellmann_stack()
    prod_jk = np.einsum("jab,kbc->jkac", lam, lam)
    anti = prod_jk + prod_jk.transpose(1, 0, 2, 3)
    comm = prod_jk - prod_jk.transpose(1, 0, 2, 3)
    d = 0.25 * np.einsum("jkab,lba->jkl", anti, lam)
    f = np.einsum("jkab,lba->jkl", comm, lam) / 4j
    if np.max(np.abs(d.imag)) > config.ALGEBRA_TOL or np.max(np.abs(f.imag)) > config.ALGEBRA_TOL:
        raise NumericalError("structure constants came out complex")
    d_real = np.ascontiguousarray(d.real)
    f_real = np.ascontiguousarray(f.real)
    d_real.setflags(write=False)
    f_real.setflags(write=False)
    return StructureConstants(d=d_real, f=f_real)


def _pair(u, v) -> Tuple[np.ndarray, np.ndarray]:
    a = np.asarray(u, dtype=float).reshape(-1)
    b = np.asarray(v, dtype=float).reshape(-1)
    if a.size != 8 or b.size != 8:
        raise ValidationError(f"SU(3) vector products need length-8 vectors, got {a.size} and {b.size}")
    return a, b


def star(u: Sequence[float], v: Sequence[float]) -> np.ndarray:
    """Symmetric product (u*v)_j = sqrt(3) d_jkl u_k v_l."""
    a, b = _pair(u, v)
    return SQRT3 * np.einsum("jkl,k,l->j", structure_constants().d, a, b)


def wedge(u: Sequence[float], v: Sequence[float]) -> np.ndarray:
    """Antisymmetric product (u^v)_k = f_ijk u_i v_j."""
    a, b = _pair(u, v)
    return np.einsum("ijk,i,j->k", structure_constants().f, a, b)


# =============================================================================
# PRODUCTS, DECOMPOSITION, CONJUGATION
# =============================================================================

def commutator(a: OperatorLike, b: OperatorLike) -> np.ndarray:
    ma, mb = as_matrix(a), as_matrix(b)
    return ma @ mb - mb @ ma


def anticommutator(a: OperatorLike, b: OperatorLike) -> np.ndarray:
    ma, mb = as_matrix(a), as_matrix(b)
    return ma @ mb + mb @ ma


def tensor(a: OperatorLike, b: OperatorLike) -> HermitianOperator:
    """Kronecker product a (x) b."""
    return _frozen(np.kron(as_matrix(a), as_matrix(b)))


def decompose(op: OperatorLike) -> Tuple[np.ndarray, float]:
    """Expand a single-party operator over {I, lambda_1..lambda_8} (or {I, sigma}).

    Coefficients are c_0 = tr(op)/d and c_i = tr(op B_i)/2. Non-Hermitian input
    yields complex coefficients; callers that expect Hermitian operators read
    the real part.

    Args:
        op: A 3x3 (or 2x2) operator.

    Returns:
        (coefficients, residual) where residual is the largest entrywise
        reconstruction error.

    Example:
        >>> coeffs, res = decompose(gellmann(3).matrix @ gellmann(3).matrix)
        >>> coeffs[0], coeffs[8]   # 2/3 and 1/sqrt(3)
    """
    m = as_matrix(op)
    dim = m.shape[0]
    basis = basis_with_identity(dim)
    norms = np.array([dim] + [2.0] * (len(basis) - 1))
    coeffs = np.einsum("iab,ba->i", basis, m) / norms
    recon = np.einsum("i,iab->ab", coeffs, basis)
    residual = float(np.max(np.abs(recon - m)))
    if np.all(np.abs(coeffs.imag) <= config.ALGEBRA_TOL):
        coeffs = coeffs.real
    return coeffs, residual


@lru_cache(maxsize=None)
def product_basis(d: int) -> np.ndarray:
    """The d^4 products B_i (x) B_j, row-major in (i, j), with B_0 = I."""
    single = basis_with_identity(d)
    return np.stack([np.kron(single[i], single[j])
                     for i, j in product(range(len(single)), repeat=2)])


def decompose_product(op: OperatorLike, d: int) -> Tuple[np.ndarray, float]:
    """Expand a bipartite operator over {B_i (x) B_j} with B_0 = I.

    Returns:
        (coefficients, residual), coefficients shaped (d^2, d^2) and indexed
        [i, j] for B_i (x) B_j.
    """
    m = as_matrix(op)
    if m.shape != (d * d, d * d):
        raise ValidationError(f"expected a {d * d}x{d * d} operator, got {m.shape}")
    basis = product_basis(d)
    n = d * d
    single_norms = np.array([d] + [2.0] * (n - 1))
    norms = np.outer(single_norms, single_norms).reshape(-1)
    coeffs = np.einsum("iab,ba->i", basis, m) / norms
    recon = np.einsum("i,iab->ab", coeffs, basis)
    residual = float(np.max(np.abs(recon - m)))
    return coeffs.reshape(n, n), residual


def is_unitary(u: np.ndarray, tol: float = config.UNITARY_TOL) -> bool:
    u = np.asarray(u, dtype=complex)
    if u.ndim != 2 or u.shape[0] != u.shape[1]:
        return False
    return bool(np.max(np.abs(u @ u.conj().T - np.eye(u.shape[0]))) <= tol)


def conjugate(op: OperatorLike, u: np.ndarray) -> HermitianOperator:
    """Return u op u^dagger.

    Raises:
        NumericalError: If u is not unitary within UNITARY_TOL.
        ValidationError: On dimension mismatch.
    """
    m = as_matrix(op)
    u = np.asarray(u, dtype=complex)
    if u.shape != m.shape:
        raise ValidationError(f"unitary shape {u.shape} does not match operator {m.shape}")
    if not is_unitary(u):
        raise NumericalError("conjugation matrix is not unitary")
    return _frozen(u @ m @ u.conj().T)


def random_unitary(dim: int, seed=None) -> np.ndarray:
    """Haar-random unitary from scipy.stats.unitary_group.

    ``seed`` may be an int, None or a numpy Generator, which is drawn from in place.
    """
    return unitary_group.rvs(int(dim), random_state=np.random.default_rng(seed))


def product_label(i: int, j: int, d: int) -> str:
    """Readable label for B_i (x) B_j, e.g. 'l1*l2' or 'l3*I'."""
    prefix = "s" if d == 2 else "l"
    axis = {1: "x", 2: "y", 3: "z"}

    def name(k: int) -> str:
        if k == 0:
            return "I"
        return f"{prefix}{axis[k]}" if d == 2 else f"{prefix}{k}"

    return f"{name(i)}*{name(j)}"


def observable_catalogue() -> Dict[str, HermitianOperator]:
    """Named observables accepted on the command line."""
    named: Dict[str, HermitianOperator] = {f"lambda{i}": gellmann(i) for i in range(1, 9)}
    for axis in "xyz":
        named[f"sigma{axis}"] = pauli(axis)
        named[f"spin{axis}"] = spin1(axis)
    return named
