"""
Operational purity tests built on the uncertainty functional Q.

- run_qutrit_scheme: the sequential single-qutrit test. A = lambda_3 is held
  fixed while B walks through the pairs (l7, l6), (l5, l4), (l1, l2); two
  successive below-epsilon values within one pair mean Pure.
- measurement_budget: which expectation values each step consumes, derived
  from the operator algebra rather than tabulated.
- classify_two_qutrit: the two-qutrit test, maximising Q over the
  theta2 = theta3 + theta4 setting family.
- blind_spot: the band of mixed states a finite epsilon misses.
- budget_table: tomography vs. uncertainty-based measurement counts.
"""

import math
from dataclasses import dataclass, field, replace
from enum import Enum
from functools import lru_cache
from itertools import product
from typing import Any, Callable, Dict, FrozenSet, List, Optional, Tuple, Union

import numpy as np

from src import config
from src.core_utils import ConfigurationError, ValidationError, log
from src.optimize import bisect
from src.state_space import (
    BlochVector,
    DensityMatrix,
    admissible_range,
    density_from_bloch,
    isotropic,
    one_param_qutrit,
    qubit_density,
)
from src.su_algebra import (
    HermitianOperator,
    as_matrix,
    conjugate,
    decompose,
    decompose_product,
    gellmann,
    is_unitary,
    pauli,
    product_label,
)
from src.uncertainty import (
    SettingFamily,
    constrained_two_qutrit,
    q_max_over_settings,
    q_oracle,
)


class PurityVerdict(str, Enum):
    PURE = "Pure"
    MIXED = "Mixed"


# =============================================================================
# SCHEME CONFIGURATION
# =============================================================================

@dataclass(frozen=True, eq=False)
class SchemeConfig:
    """Settings for the sequential single-qutrit test.

    Attributes:
        epsilon: Threshold below which Q counts as zero.
        pair_sequence: Ordered (first, second) Gell-Mann indices for B.
        fixed_a: Gell-Mann index of the fixed observable A.
        strict_pairs: Declare Mixed as soon as a pair splits (first member
            below epsilon, second not) instead of moving to the next pair.
        basis: Optional 3x3 unitary U; every observable becomes U lambda U^dagger.
    """
    epsilon: float = config.DEFAULT_EPSILON
    pair_sequence: Tuple[Tuple[int, int], ...] = config.DEFAULT_PAIR_SEQUENCE
    fixed_a: int = config.DEFAULT_FIXED_A
    strict_pairs: bool = False
    basis: Optional[np.ndarray] = None

    def __post_init__(self):
        eps = float(self.epsilon)
        if not np.isfinite(eps) or eps <= 0:
            raise ConfigurationError(f"epsilon must be a positive number, got {self.epsilon}")
        try:
            pairs = tuple((int(a), int(b)) for a, b in self.pair_sequence)
            fixed_a = int(self.fixed_a)
        except (TypeError, ValueError) as e:
            raise ConfigurationError(f"pair_sequence must hold pairs of Gell-Mann indices ({e})") from e
        if not pairs:
            raise ConfigurationError("pair_sequence must not be empty")
        flat = [i for pair in pairs for i in pair]
        if any(not 1 <= i <= 8 for i in flat + [fixed_a]):
            raise ConfigurationError("observable indices must lie in 1..8")
        if len(set(flat)) != len(flat):
            raise ConfigurationError(f"pairs must use distinct indices, got {pairs}")
        if fixed_a in flat:
            raise ConfigurationError(f"fixed_a = {fixed_a} also appears in a pair")
        basis = self.basis
        if basis is not None:
            basis = np.asarray(basis, dtype=complex)
            if basis.shape != (3, 3) or not is_unitary(basis):
                raise ConfigurationError("basis must be a 3x3 unitary")
        object.__setattr__(self, "epsilon", eps)
        object.__setattr__(self, "pair_sequence", pairs)
        object.__setattr__(self, "fixed_a", fixed_a)
        object.__setattr__(self, "basis", basis)

    def observable(self, index: int) -> np.ndarray:
        op = gellmann(index)
        if self.basis is None:
            return op.matrix
        return conjugate(op, self.basis).matrix

    def conjugated(self, u: np.ndarray) -> "SchemeConfig":
        """Same scheme with every observable additionally conjugated by u."""
        u = np.asarray(u, dtype=complex)
        return replace(self, basis=u if self.basis is None else u @ self.basis)


# =============================================================================
# MEASUREMENT BUDGET
# =============================================================================

@dataclass(frozen=True)
class SchemeStep:
    a: int
    b: int
    q: float
    below: bool

    def to_dict(self) -> Dict[str, Any]:
        return {"a": self.a, "b": self.b, "q": self.q, "below": self.below}


@dataclass
class MeasurementBudget:
    """Expectation values newly required at each step, and their running total."""
    per_step_new: List[FrozenSet[int]] = field(default_factory=list)
    cumulative_total: int = 0

    @property
    def required(self) -> FrozenSet[int]:
        return frozenset().union(*self.per_step_new) if self.per_step_new else frozenset()

    def to_dict(self) -> Dict[str, Any]:
        return {"per_step": [sorted(s) for s in self.per_step_new], "total": self.cumulative_total}


OperatorSpec = Union[int, np.ndarray, HermitianOperator]


def _generated(ma: np.ndarray, mb: np.ndarray) -> Tuple[np.ndarray, ...]:
    """A, B, A^2, B^2, i[A,B] and {A,B}: everything Q is assembled from."""
    ab, ba = ma @ mb, mb @ ma
    return ma, mb, ma @ ma, mb @ mb, 1j * (ab - ba), ab + ba


def _as_operator(x: OperatorSpec, basis: Optional[np.ndarray]) -> np.ndarray:
    if isinstance(x, (int, np.integer)):
        op = gellmann(int(x))
        return op.matrix if basis is None else conjugate(op, basis).matrix
    return as_matrix(x)


def step_requirements(a: OperatorSpec, b: OperatorSpec, basis: Optional[np.ndarray] = None) -> FrozenSet[int]:
    """Basis indices with nonzero coefficient in any operator generated by (A, B).

    Integer arguments are Gell-Mann indices; matrices are expanded over the
    Pauli (2x2) or Gell-Mann (3x3) basis. With a basis unitary U the expansion
    is taken over the conjugated basis U B_i U^dagger.
    """
    ma, mb = _as_operator(a, basis), _as_operator(b, basis)
    required = set()
    for op in _generated(ma, mb):
        if basis is not None:
            op = basis.conj().T @ op @ basis
        coeffs, _ = decompose(op)
        required.update(k for k in range(1, len(coeffs)) if abs(coeffs[k]) > config.COEFFICIENT_TOL)
    return frozenset(required)


def product_requirements(a: np.ndarray, b: np.ndarray, d: int) -> Tuple[FrozenSet[Tuple[int, int]], FrozenSet[Tuple[int, int]]]:
    """Bipartite analogue of step_requirements.

    Returns:
        (tensor_terms, local_terms): (i, j) index pairs of B_i (x) B_j with
        nonzero coefficient. Tensor terms have both factors non-identity;
        local terms have exactly one.
    """
    tensor_terms, local_terms = set(), set()
    for op in _generated(as_matrix(a), as_matrix(b)):
        coeffs, _ = decompose_product(op, d)
        for i, j in zip(*np.nonzero(np.abs(coeffs) > config.COEFFICIENT_TOL)):
            if i and j:
                tensor_terms.add((int(i), int(j)))
            elif i or j:
                local_terms.add((int(i), int(j)))
    return frozenset(tensor_terms), frozenset(local_terms)


def measurement_budget(steps, basis: Optional[np.ndarray] = None) -> MeasurementBudget:
    """Count the distinct expectation values a sequence of steps consumes.

    Args:
        steps: A SchemeTrace, a SchemeStep, a single (a, b) pair, or a
            sequence of SchemeSteps / (a, b) pairs.
        basis: Optional basis unitary (taken from the trace when omitted).

    Returns:
        MeasurementBudget whose per-step sets hold only newly added indices.
    """
    if isinstance(steps, SchemeTrace):
        basis = steps.basis if basis is None else basis
        steps = steps.steps
    if isinstance(steps, SchemeStep):
        steps = [steps]
    elif isinstance(steps, tuple) and len(steps) == 2 and isinstance(steps[0], (int, np.integer)):
        steps = [steps]

    seen: set = set()
    per_step: List[FrozenSet[int]] = []
    for step in steps:
        a, b = (step.a, step.b) if isinstance(step, SchemeStep) else step
        new = step_requirements(a, b, basis) - seen
        seen |= new
        per_step.append(frozenset(new))
    return MeasurementBudget(per_step, len(seen))


# =============================================================================
# SINGLE-QUTRIT SCHEME
# =============================================================================

@dataclass
class SchemeTrace:
    steps: List[SchemeStep]
    verdict: PurityVerdict
    budget: MeasurementBudget
    epsilon: float
    strict_pairs: bool = False
    basis: Optional[np.ndarray] = None

    def to_dict(self) -> Dict[str, Any]:
        return {
            "verdict": self.verdict.value,
            "epsilon": self.epsilon,
            "strict_pairs": self.strict_pairs,
            "steps": [s.to_dict() for s in self.steps],
            "budget": self.budget.to_dict(),
        }


def _qutrit_state(state) -> np.ndarray:
    if isinstance(state, BlochVector):
        state = density_from_bloch(state)
    elif not isinstance(state, DensityMatrix):
        state = DensityMatrix.from_matrix(state)
    if state.dim != 3:
        raise ValidationError(f"the sequential scheme is qutrit-only, got a dimension-{state.dim} state")
    return state.matrix


def run_qutrit_scheme(state, scheme: Optional[SchemeConfig] = None) -> SchemeTrace:
    """Run the sequential single-qutrit purity test.

    For each pair (first, second): Q(A, first) is evaluated; if it is below
    epsilon, Q(A, second) follows, and both below epsilon ends the run with
    Pure. A pair that fails moves the test on to the next pair (or, with
    strict_pairs, ends it with Mixed once its first member passed). Mixed
    is returned when no pair succeeds.

    Args:
        state: BlochVector, DensityMatrix or 3x3 matrix.
        scheme: SchemeConfig (defaults when omitted).

    Returns:
        SchemeTrace with every evaluated step and its measurement budget.

    Raises:
        ValidationError: The state is not a valid qutrit state.
        PositivityError: The state is not positive.
    """
    rho = _qutrit_state(state)
    cfg = scheme or SchemeConfig()
    eps = cfg.epsilon
    a = cfg.observable(cfg.fixed_a)

    def evaluate(index: int) -> SchemeStep:
        q = q_oracle(rho, a, cfg.observable(index)).q
        return SchemeStep(cfg.fixed_a, index, q, q < eps)

    steps: List[SchemeStep] = []
    verdict = PurityVerdict.MIXED
    for first, second in cfg.pair_sequence:
        steps.append(evaluate(first))
        if not steps[-1].below:
            continue
        steps.append(evaluate(second))
        if steps[-1].below:
            verdict = PurityVerdict.PURE
            break
        if cfg.strict_pairs:
            break

    budget = measurement_budget(steps, cfg.basis)
    log(f"[-] scheme: {verdict.value} after {len(steps)} step(s), {budget.cumulative_total} expectation values")
    return SchemeTrace(steps, verdict, budget, eps, cfg.strict_pairs, cfg.basis)


def detection_statistic(state, scheme: Optional[SchemeConfig] = None) -> float:
    """min over pairs of max(Q(A, first), Q(A, second)).

    In the default mode the scheme returns Pure exactly when this is below
    epsilon.
    """
    rho = _qutrit_state(state)
    cfg = scheme or SchemeConfig()
    a = cfg.observable(cfg.fixed_a)
    return min(max(q_oracle(rho, a, cfg.observable(first)).q, q_oracle(rho, a, cfg.observable(second)).q)
               for first, second in cfg.pair_sequence)


# =============================================================================
# TWO-QUTRIT CLASSIFIER
# =============================================================================

GENERIC_ANGLES = (0.37, 1.21, 2.53)


@lru_cache(maxsize=None)
def family_requirements(pair: Tuple[int, int] = (1, 2),
                        constrained: bool = True) -> Tuple[Tuple[Tuple[int, int], ...], Tuple[Tuple[int, int], ...]]:
    """Tensor and local expectation values any setting of the family can consume.

    Taken as the union over generic test angles, where no coefficient
    vanishes by accident.
    """
    family = SettingFamily.two_qutrit(pair[0], pair[1], constrained=constrained)
    names = family.free_angles()
    tensor_terms, local_terms = set(), set()
    for values in product(GENERIC_ANGLES, repeat=len(names)):
        a, b = family.with_angles(dict(zip(names, values))).matrices()
        t, loc = product_requirements(a, b, 3)
        tensor_terms |= t
        local_terms |= loc
    return tuple(sorted(tensor_terms)), tuple(sorted(local_terms))


@dataclass
class TwoQutritVerdict:
    verdict: PurityVerdict
    q_max: float
    argmax: SettingFamily
    epsilon: float
    expectations_used: List[str]
    local_expectations: List[str]

    def to_dict(self) -> Dict[str, Any]:
        return {
            "verdict": self.verdict.value,
            "q_max": self.q_max,
            "epsilon": self.epsilon,
            "argmax": self.argmax.to_dict(),
            "expectations_used": self.expectations_used,
            "local_expectations": self.local_expectations,
        }


def classify_two_qutrit(rho, epsilon: float = config.DEFAULT_EPSILON, grid: int = config.DEFAULT_GRID,
                        refine_rounds: int = config.DEFAULT_REFINE_ROUNDS, pair: Tuple[int, int] = (1, 2),
                        constrained: bool = True) -> TwoQutritVerdict:
    """Classify a two-qutrit state by maximising Q over product settings.

    With ``constrained`` (the default) theta2 = theta3 + theta4, so every
    Schmidt pure state has Q = 0 and q_max >= epsilon signals mixedness.
    Settings with theta3 within DEGENERATE_ANGLE_GAP of 0 or pi are skipped.
    Note that mixtures of Schmidt states also give Q = 0 on that manifold;
    ``constrained=False`` frees theta2 and exposes them.

    Raises:
        ValidationError: rho is not a 9x9 state.
        ConfigurationError: epsilon is not positive.
    """
    if not isinstance(rho, DensityMatrix):
        rho = DensityMatrix.from_matrix(rho)
    if rho.dim != 9:
        raise ValidationError(f"classify_two_qutrit needs a two-qutrit (9x9) state, got dimension {rho.dim}")
    if not epsilon > 0:
        raise ConfigurationError(f"epsilon must be positive, got {epsilon}")

    if constrained:
        family = constrained_two_qutrit(tuple(pair))
    else:
        family = SettingFamily.two_qutrit(pair[0], pair[1], gap=config.DEGENERATE_ANGLE_GAP)
    q_max, argmax = q_max_over_settings(rho, family, grid=grid, refine_rounds=refine_rounds)
    verdict = PurityVerdict.MIXED if q_max >= epsilon else PurityVerdict.PURE

    tensor_terms, local_terms = family_requirements(tuple(pair), constrained)
    log(f"[-] two-qutrit: {verdict.value} (q_max = {q_max:.6g}, {len(tensor_terms)} tensor expectations)")
    return TwoQutritVerdict(
        verdict=verdict,
        q_max=q_max,
        argmax=argmax,
        epsilon=float(epsilon),
        expectations_used=[product_label(i, j, 3) for i, j in tensor_terms],
        local_expectations=[product_label(i, j, 3) for i, j in local_terms],
    )


# =============================================================================
# BUDGET TABLE
# =============================================================================

@dataclass(frozen=True)
class BudgetRow:
    system: str
    tomography_printed: int
    tomography_computed: int
    gur_printed: str
    gur_min: int
    gur_max: int

    def to_dict(self) -> Dict[str, Any]:
        return {
            "system": self.system,
            "tomography_printed": self.tomography_printed,
            "tomography_computed": self.tomography_computed,
            "gur_printed": self.gur_printed,
            "gur_computed_min": self.gur_min,
            "gur_computed_max": self.gur_max,
        }


QUARTER_TURNS = tuple(k * np.pi / 4 for k in range(8))


def _same_axis(x: float, y: float) -> bool:
    """Planar directions x and y coincide up to sign."""
    return abs(math.sin(x - y)) < 1e-12


def _two_qubit_counts() -> List[int]:
    counts = []
    for phi_m, phi_n, phi_p, phi_q in product(QUARTER_TURNS, repeat=4):
        if _same_axis(phi_m, phi_p) or _same_axis(phi_n, phi_q):
            continue
        a, b = SettingFamily.planar_two_qubit(phi_m, phi_n, phi_p, phi_q, free=()).matrices()
        counts.append(len(product_requirements(a, b, 2)[0]))
    return counts


def _two_qutrit_counts() -> List[int]:
    template = constrained_two_qutrit()
    counts = []
    for theta3, theta4 in product(QUARTER_TURNS, repeat=2):
        if abs(math.sin(theta3)) < 1e-12:
            continue
        a, b = template.with_angles({"theta3": theta3, "theta4": theta4}).matrices()
        counts.append(len(product_requirements(a, b, 3)[0]))
    return counts


def budget_table() -> List[BudgetRow]:
    """Tomography vs. uncertainty-based measurement counts for the four systems.

    Computed uncertainty-based counts come from the operator algebra over
    representative settings: the (sigma_z, sigma_x) pair for one qubit, planar
    settings with no shared local axis for two qubits, the first pair and the
    full traversal of the sequential scheme for one qutrit, and constrained
    settings with theta3 away from 0 and pi for two qutrits.
    """
    qubit = len(step_requirements(pauli("z").matrix, pauli("x").matrix))
    two_qubit = _two_qubit_counts()
    first_level = run_qutrit_scheme(one_param_qutrit(8, -1.0)).budget.cumulative_total
    full = run_qutrit_scheme(np.eye(3) / 3).budget.cumulative_total
    two_qutrit = _two_qutrit_counts()
    return [
        BudgetRow("single qubit", 3, 2 ** 2 - 1, "3", qubit, qubit),
        BudgetRow("two qubit", 15, 2 ** 4 - 1, "3-5", min(two_qubit), max(two_qubit)),
        BudgetRow("single qutrit", 8, 3 ** 2 - 1, "4-8", first_level, full),
        BudgetRow("two qutrit", 80, 3 ** 4 - 1, "4-8", min(two_qutrit), max(two_qutrit)),
    ]


# =============================================================================
# EPSILON BLIND SPOTS
# =============================================================================

BLIND_SPOT_FAMILIES = ("qubit_orthogonal", "isotropic", "one_param_qutrit")


@dataclass
class BlindSpot:
    """Mixed states of a one-parameter family that a given epsilon calls Pure.

    ``interval`` runs from the pure endpoint to ``threshold``. When the
    statistic never reaches epsilon the whole family is blind and
    ``full_range`` is set.
    """
    family: str
    parameter: str
    epsilon: float
    pure_endpoint: float
    far_endpoint: float
    threshold: Optional[float]
    interval: Tuple[float, float]
    full_range: bool
    statistic_at_threshold: Optional[float]
    printed_threshold: Optional[float] = None
    statistic_at_printed: Optional[float] = None

    def to_dict(self) -> Dict[str, Any]:
        return {
            "family": self.family,
            "parameter": self.parameter,
            "epsilon": self.epsilon,
            "pure_endpoint": self.pure_endpoint,
            "far_endpoint": self.far_endpoint,
            "threshold": self.threshold,
            "interval": list(self.interval),
            "full_range": self.full_range,
            "statistic_at_threshold": self.statistic_at_threshold,
            "printed_threshold": self.printed_threshold,
            "statistic_at_printed": self.statistic_at_printed,
        }


def _printed_root(scale: float) -> Callable[[float], Optional[float]]:
    def threshold(eps: float) -> Optional[float]:
        x = 1.0 - scale * eps
        return math.sqrt(x) if x >= 0 else None
    return threshold


def _blind_spot_setup(family: str, index: Optional[int], grid: int):
    """(parameter name, pure endpoint, far endpoint, statistic, printed threshold)."""
    if family == "qubit_orthogonal":
        a, b = pauli("z").matrix, pauli("x").matrix

        def statistic(n: float) -> float:
            return q_oracle(qubit_density([0.0, 0.0, n]), a, b).q

        return "n", 1.0, 0.0, statistic, _printed_root(2.0 / 3.0)

    if family == "isotropic":
        template = constrained_two_qutrit()

        def statistic(p: float) -> float:
            return q_max_over_settings(isotropic(p), template, grid=grid)[0]

        return "p", 1.0, 0.0, statistic, _printed_root(1.5)

    if family == "one_param_qutrit":
        index = 8 if index is None else int(index)
        if index != 8:
            raise ValidationError(f"one_param_qutrit({index}) has no pure endpoint; only index 8 does")
        lo, hi = admissible_range(8)
        scheme = SchemeConfig()

        def statistic(v: float) -> float:
            return detection_statistic(one_param_qutrit(8, v), scheme)

        return "n8", lo, hi, statistic, lambda eps: None

    raise ValidationError(f"unknown blind-spot family '{family}' (known: {', '.join(BLIND_SPOT_FAMILIES)})")


def blind_spot(family: str, epsilon: float = config.DEFAULT_EPSILON, index: Optional[int] = None,
               grid: int = config.BLIND_SPOT_GRID, scan_points: int = 64) -> BlindSpot:
    """Locate the parameter band near the pure endpoint where Q stays below epsilon.

    The statistic (Q, q_max or the scheme statistic, per family) is scanned
    from the pure endpoint outward; the first crossing of epsilon is then
    bisected to BISECTION_TOL. The printed closed-form threshold, where one
    exists, is evaluated alongside for comparison.

    Args:
        family: qubit_orthogonal, isotropic or one_param_qutrit.
        epsilon: Detection threshold.
        index: Gell-Mann index for one_param_qutrit (only 8 is accepted).
        grid: Optimizer grid for families that maximise over settings.
        scan_points: Coarse scan resolution before bisection.

    Raises:
        ConfigurationError: epsilon not positive.
        ValidationError: Unknown family or unsupported index.
    """
    eps = float(epsilon)
    if not np.isfinite(eps) or eps <= 0:
        raise ConfigurationError(f"epsilon must be positive, got {epsilon}")
    name, pure, far, statistic, printed = _blind_spot_setup(family, index, grid)

    xs = np.linspace(pure, far, scan_points + 1)
    crossing = next((k for k in range(1, len(xs)) if statistic(xs[k]) >= eps), None)

    if crossing is None:
        threshold, stat_at = None, None
        interval = (min(pure, far), max(pure, far))
        log(f"[!] {family}: statistic never reaches epsilon = {eps:g}; every state reads Pure")
    else:
        threshold = float(bisect(lambda x: statistic(x) - eps, xs[crossing - 1], xs[crossing]))
        stat_at = float(statistic(threshold))
        interval = (min(pure, threshold), max(pure, threshold))
        log(f"[-] {family}: blind for {name} in [{interval[0]:.12g}, {interval[1]:.12g}]")

    printed_threshold = printed(eps)
    stat_printed = None
    if printed_threshold is not None and min(pure, far) <= printed_threshold <= max(pure, far):
        stat_printed = float(statistic(printed_threshold))

    return BlindSpot(
        family=family,
        parameter=name,
        epsilon=eps,
        pure_endpoint=float(pure),
        far_endpoint=float(far),
        threshold=threshold,
        interval=(float(interval[0]), float(interval[1])),
        full_range=crossing is None,
        statistic_at_threshold=stat_at,
        printed_threshold=printed_threshold,
        statistic_at_printed=stat_printed,
    )
