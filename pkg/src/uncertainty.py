"""
The Robertson-Schroedinger uncertainty functional Q and its closed forms.

Q(A, B, rho) = Var(A) Var(B) - |<[A,B]>/2|^2 - |<{A,B}>/2 - <A><B>|^2

This module provides:
- The exact matrix evaluation of Q (the ground truth every closed form is
  checked against)
- The qubit and general-qutrit closed forms built from star/wedge products
- A registry of printed family formulas, evaluated literally
- Observable setting families and a deterministic settings maximizer
- The concordance engine comparing printed formulas with the matrix oracle
"""

import math
from dataclasses import dataclass, field, replace
from enum import Enum
from itertools import product
from typing import Any, Callable, Dict, List, Mapping, Optional, Sequence, Tuple

import numpy as np
from tqdm import tqdm

from src import config
from src.core_utils import (
    NumericalError,
    PositivityError,
    ValidationError,
    as_real_vector,
    log,
    require_unit,
    require_unit_interval,
)
from src.optimize import golden_section_max
from src.state_space import (
    MixtureParam,
    SchmidtCoeffs,
    isotropic,
    linear_entropy,
    mixture,
    one_param_qutrit,
    qubit_density,
    qutrit_density,
    random_qutrit_bloch,
    schmidt_pure,
    three_param_qutrit,
    two_param_qutrit,
)
from src.su_algebra import (
    SQRT3,
    HermitianOperator,
    anticommutator,
    as_matrix,
    commutator,
    decompose,
    direction_operator,
    gellmann,
    gellmann_stack,
    pauli,
    star,
    wedge,
)

TWO_PI = 2.0 * np.pi
INV_GOLDEN = (math.sqrt(5.0) - 1.0) / 2.0


# =============================================================================
# EXPECTATION VALUES AND THE ORACLE
# =============================================================================

@dataclass(frozen=True)
class QReport:
    """Q together with its variance, commutator and anticommutator breakdown."""
    var_a: float
    var_b: float
    commutator_term: float
    anticommutator_term: float
    q: float
    mean_a: float
    mean_b: float

    def to_dict(self) -> Dict[str, float]:
        return {
            "q": self.q,
            "var_a": self.var_a,
            "var_b": self.var_b,
            "commutator_term": self.commutator_term,
            "anticommutator_term": self.anticommutator_term,
            "mean_a": self.mean_a,
            "mean_b": self.mean_b,
        }


def _check_pair(rho: np.ndarray, op: np.ndarray, name: str) -> None:
    if op.shape != rho.shape:
        raise ValidationError(f"{name} has shape {op.shape}, state has {rho.shape}")


def _trace_real(rho: np.ndarray, op: np.ndarray) -> float:
    val = np.einsum("ab,ba->", rho, op)
    scale = max(1.0, float(np.max(np.abs(op))))
    if abs(val.imag) > config.EXPECTATION_IMAG_TOL * scale:
        raise NumericalError(f"expectation value has imaginary part {val.imag:.3e}")
    return float(val.real)


def expectation(rho, a) -> float:
    """tr(rho A), real for Hermitian A."""
    r, m = as_matrix(rho), as_matrix(a)
    _check_pair(r, m, "observable")
    return _trace_real(r, m)


def variance(rho, a) -> float:
    """<A^2> - <A>^2, clamped at 0 from below."""
    r, m = as_matrix(rho), as_matrix(a)
    _check_pair(r, m, "observable")
    mean = _trace_real(r, m)
    second = _trace_real(r, m @ m)
    var = second - mean * mean
    if var < config.VARIANCE_FLOOR * max(1.0, second):
        raise NumericalError(f"variance is negative beyond rounding ({var:.3e})")
    return max(0.0, var)


def _q_components(r: np.ndarray, ma: np.ndarray, mb: np.ndarray) -> QReport:
    mean_a = _trace_real(r, ma)
    mean_b = _trace_real(r, mb)
    var_a = max(0.0, _trace_real(r, ma @ ma) - mean_a * mean_a)
    var_b = max(0.0, _trace_real(r, mb @ mb) - mean_b * mean_b)
    ab = ma @ mb
    ba = mb @ ma
    comm = np.einsum("ab,ba->", r, ab - ba) / 2
    commutator_term = float(abs(comm) ** 2)
    cov = _trace_real(r, ab + ba) / 2 - mean_a * mean_b
    anticommutator_term = cov * cov
    q = var_a * var_b - commutator_term - anticommutator_term
    return QReport(var_a, var_b, commutator_term, anticommutator_term, q, mean_a, mean_b)


def _require_hermitian(m: np.ndarray, name: str) -> None:
    scale = max(1.0, float(np.max(np.abs(m))))
    if np.max(np.abs(m - m.conj().T)) > config.HERMITIAN_TOL * scale:
        raise NumericalError(f"{name} is not Hermitian")


def q_oracle(rho, a, b) -> QReport:
    """Exact matrix evaluation of Q(A, B, rho).

    Args:
        rho: DensityMatrix or raw matrix.
        a: First observable (HermitianOperator or matrix).
        b: Second observable.

    Returns:
        QReport with q >= -1e-10 for any valid state.

    Raises:
        ValidationError: Dimension mismatch.
        NumericalError: Non-Hermitian observable or complex expectation.
    """
    r, ma, mb = as_matrix(rho), as_matrix(a), as_matrix(b)
    _check_pair(r, ma, "A")
    _check_pair(r, mb, "B")
    _require_hermitian(ma, "A")
    _require_hermitian(mb, "B")
    return _q_components(r, ma, mb)


# =============================================================================
# CLOSED FORMS
# =============================================================================

def q_qubit_closed(r_hat: Sequence[float], t_hat: Sequence[float], n: Sequence[float]) -> float:
    """(1 - (r.t)^2)(1 - |n|^2) for spins A = r.sigma, B = t.sigma."""
    r = as_real_vector(r_hat, 3, "r")
    t = as_real_vector(t_hat, 3, "t")
    nv = as_real_vector(n, 3, "n")
    require_unit(r, "r")
    require_unit(t, "t")
    if nv @ nv > 1.0 + config.POSITIVITY_TOL:
        raise PositivityError("qubit Bloch vector outside the unit ball", admissible="|n| <= 1")
    return float((1.0 - (r @ t) ** 2) * (1.0 - nv @ nv))


def q_qutrit_closed(a_hat: Sequence[float], b_hat: Sequence[float], n: Sequence[float]) -> float:
    """General single-qutrit Q for A = a.lambda, B = b.lambda, written with star and wedge.

    Evaluated term by term:
    (4/9)(1 - c^2) + (4/9)(alpha + beta - 2 c gamma)
    + (4/9)(alpha beta - gamma^2 + 4 c x y - 2 x^2 - 2 y^2 - 3 w^2)
    - (4/9)(2 alpha y^2 + 2 beta x^2 - 4 gamma x y)
    with alpha = (a*a).n, beta = (b*b).n, gamma = (a*b).n, x = a.n, y = b.n,
    c = a.b and w = (a^b).n.
    """
    a = as_real_vector(a_hat, 8, "a")
    b = as_real_vector(b_hat, 8, "b")
    nv = as_real_vector(n, 8, "n")
    require_unit(a, "a")
    require_unit(b, "b")
    qutrit_density(nv)

    c = float(a @ b)
    alpha = float(star(a, a) @ nv)
    beta = float(star(b, b) @ nv)
    gamma = float(star(a, b) @ nv)
    x = float(a @ nv)
    y = float(b @ nv)
    w = float(wedge(a, b) @ nv)

    k = 4.0 / 9.0
    return (k * (1.0 - c * c)
            + k * (alpha + beta - 2.0 * c * gamma)
            + k * (alpha * beta - gamma * gamma + 4.0 * c * x * y - 2.0 * x * x - 2.0 * y * y - 3.0 * w * w)
            - k * (2.0 * alpha * y * y + 2.0 * beta * x * x - 4.0 * gamma * x * y))


# =============================================================================
# PRINTED FAMILY FORMULAS
# =============================================================================

@dataclass(frozen=True)
class PrintedFormula:
    """One printed closed-form expression, evaluated exactly as written."""
    formula_id: str
    params: Tuple[str, ...]
    evaluate: Callable[[Mapping[str, float]], float]
    validate: Callable[[Mapping[str, float]], None]
    summary: str


def _need(params: Mapping[str, Any], names: Sequence[str], formula_id: str) -> None:
    missing = [n for n in names if n not in params]
    if missing:
        raise ValidationError(f"{formula_id}: missing parameter(s) {', '.join(missing)}")


def _p_only(params):
    require_unit_interval(params["p"], "p")


def _schmidt_groups(*groups: Tuple[str, ...]) -> Callable[[Mapping[str, float]], None]:
    def check(params):
        for names in groups:
            SchmidtCoeffs.of([params[n] for n in names])
        if "p" in params:
            require_unit_interval(params["p"], "p")
    return check


def _check_k1_k6(params):
    for name in ("k1", "k6"):
        v = float(params[name])
        if not 0.0 <= v <= 1.0:
            raise ValidationError(f"{name} must lie in [0, 1], got {v}")
    require_unit_interval(params["p"], "p")


def _qutrit_components(*indices: int) -> Callable[[Mapping[str, float]], None]:
    def check(params):
        values = [params[f"n{i}"] for i in indices]
        if len(indices) == 1:
            one_param_qutrit(indices[0], values[0])
        elif len(indices) == 2:
            two_param_qutrit(indices, values)
        else:
            three_param_qutrit(indices, values)
    return check


def _qubit_vectors(params):
    require_unit(as_real_vector(params["r"], 3, "r"), "r")
    require_unit(as_real_vector(params["t"], 3, "t"), "t")
    qubit_density(params["n"])


def _qutrit_vectors(params):
    require_unit(as_real_vector(params["a"], 8, "a"), "a")
    require_unit(as_real_vector(params["b"], 8, "b"), "b")
    qutrit_density(params["n"])


def _f_parabolic2_l5(v):
    n3, n4 = v["n3"], v["n4"]
    return (2.0 / 9.0) * (2.0 + SQRT3 * n3) * (1.0 - 2.0 * n3 ** 2) - n4 ** 2 / 3.0


def _f_parabolic2_l4(v):
    n3, n4 = v["n3"], v["n4"]
    return (4.0 - 8.0 * n3 ** 2 - 4.0 * SQRT3 * n3 ** 3 - 11.0 * n4 ** 2
            + 2.0 * SQRT3 * n3 * (1.0 + 4.0 * n4 ** 2)) / 9.0


def _f_parabolic3(inner: str, outer: str):
    def f(v):
        n3, ni, no = v["n3"], v[inner], v[outer]
        return (4.0 - 8.0 * n3 ** 2 - 4.0 * SQRT3 * n3 ** 3 - 3.0 * ni ** 2 - 11.0 * no ** 2
                + 2.0 * SQRT3 * n3 * (1.0 + 4.0 * no ** 2)) / 9.0
    return f


def _f_schmidt_pure_q(v):
    return 4.0 * v["k1"] ** 2 * v["k2"] ** 2 * v["k3"] ** 2 * math.sin(v["theta2"] - v["theta3"] - v["theta4"])


def _f_mixture_q(v):
    p = v["p"]
    return (4.0 * v["k1"] ** 2 * p * (1.0 - p)
            * (1.0 - v["k6"] ** 2 - 4.0 * v["k4"] ** 2 * v["k5"] ** 2 * (1.0 - p) * math.cos(v["theta3"] + v["theta4"]) ** 2)
            * math.sin(v["theta3"]) ** 2)


def _f_isotropic_q(v):
    p, t3, t4 = v["p"], v["theta3"], v["theta4"]
    inner = (-3.0 - 3.0 * p + 2.0 * p ** 2 + (-1.0 + p) * math.cos(2.0 * t3)
             + 2.0 * p ** 2 * math.cos(2.0 * (t3 + t4)))
    return (8.0 / 81.0) * (-1.0 + p) * inner ** 2 * math.sin(t3)


FORMULAS: Dict[str, PrintedFormula] = {}


def _register(formula_id, params, evaluate, validate, summary):
    FORMULAS[formula_id] = PrintedFormula(formula_id, tuple(params), evaluate, validate, summary)


_register("qubit_spin_pair", ("r", "t", "n"),
          lambda v: q_qubit_closed(v["r"], v["t"], v["n"]), _qubit_vectors,
          "(1 - (r.t)^2)(1 - |n|^2)")
_register("qutrit_general", ("a", "b", "n"),
          lambda v: q_qutrit_closed(v["a"], v["b"], v["n"]), _qutrit_vectors,
          "general single-qutrit star/wedge expansion")
_register("n8_family", ("n8",),
          lambda v: (4.0 / 9.0) * (2.0 - v["n8"]) * (1.0 + v["n8"]), _qutrit_components(8),
          "Q(l3,l7) = Q(l3,l6) = (4/9)(2 - n8)(1 + n8)")
_register("n1_family", ("n1",),
          lambda v: 4.0 / 9.0, _qutrit_components(1),
          "Q(l3,l7) = Q(l3,l6) = Q(l3,l5) = Q(l3,l4) = 4/9")
_register("parabolic2_l5", ("n3", "n4"), _f_parabolic2_l5, _qutrit_components(3, 4),
          "Q(l3,l5) = (2/9)(2 + sqrt3 n3)(1 - 2 n3^2) - n4^2/3")
_register("parabolic2_l4", ("n3", "n4"), _f_parabolic2_l4, _qutrit_components(3, 4),
          "Q(l3,l4) = (1/9)(4 - 8n3^2 - 4sqrt3 n3^3 - 11n4^2 + 2sqrt3 n3(1 + 4n4^2))")
_register("parabolic3_l5", ("n3", "n4", "n5"), _f_parabolic3("n4", "n5"), _qutrit_components(3, 4, 5),
          "Q(l3,l5) = (1/9)(4 - 8n3^2 - 4sqrt3 n3^3 - 3n4^2 - 11n5^2 + 2sqrt3 n3(1 + 4n5^2))")
_register("parabolic3_l4", ("n3", "n4", "n5"), _f_parabolic3("n5", "n4"), _qutrit_components(3, 4, 5),
          "Q(l3,l4) = (1/9)(4 - 8n3^2 - 4sqrt3 n3^3 - 3n5^2 - 11n4^2 + 2sqrt3 n3(1 + 4n4^2))")
_register("mixture_entropy", ("p",),
          lambda v: 1.5 * v["p"] * (1.0 - v["p"]), _p_only,
          "S_l(mixture) = (3/2) p (1 - p)")
_register("mixture_qmax", ("k1", "k6", "p"),
          lambda v: 4.0 * v["k1"] ** 2 * (1.0 - v["k6"] ** 2) * v["p"] * (1.0 - v["p"]), _check_k1_k6,
          "max Q(mixture) = 4 k1^2 (1 - k6^2) p (1 - p)")
_register("isotropic_entropy", ("p",),
          lambda v: (2.0 / 3.0) * (1.0 - v["p"] ** 2), _p_only,
          "S_l(isotropic) = (2/3)(1 - p^2)")
_register("isotropic_qmax", ("p",),
          lambda v: (16.0 / 81.0) * (1.0 - v["p"]) * (1.0 + 2.0 * v["p"]), _p_only,
          "max Q(isotropic) = (16/81)(1 - p)(1 + 2p)")
_register("schmidt_pure_q", ("k1", "k2", "k3", "theta2", "theta3", "theta4"),
          _f_schmidt_pure_q, _schmidt_groups(("k1", "k2", "k3")),
          "Q(pure) = 4 k1^2 k2^2 k3^2 sin(theta2 - theta3 - theta4)")
_register("mixture_q", ("k1", "k2", "k3", "k4", "k5", "k6", "p", "theta3", "theta4"),
          _f_mixture_q, _schmidt_groups(("k1", "k2", "k3"), ("k4", "k5", "k6")),
          "Q(mixture) = 4k1^2 p(1-p)(1 - k6^2 - 4k4^2k5^2(1-p)cos^2(theta3+theta4)) sin^2 theta3")
_register("isotropic_q", ("p", "theta3", "theta4"), _f_isotropic_q, _p_only,
          "Q(isotropic) = (8/81)(p-1)(-3-3p+2p^2+(p-1)cos2theta3+2p^2cos2(theta3+theta4))^2 sin theta3")


# External short ids for the printed formulas, matched case-insensitively.
FORMULA_ALIASES: Dict[str, str] = {
    "eq5": "qubit_spin_pair",
    "eq11": "qutrit_general",
    "f13": "n8_family",
    "f14": "n1_family",
    "f15a": "parabolic2_l5",
    "f15b": "parabolic2_l4",
    "f17a": "parabolic3_l5",
    "f17b": "parabolic3_l4",
    "eq21": "mixture_entropy",
    "f22": "mixture_qmax",
    "eq24": "isotropic_entropy",
    "f25": "isotropic_qmax",
    "f_pure2qt": "schmidt_pure_q",
    "f_mix": "mixture_q",
    "f_iso": "isotropic_q",
}


def resolve_formula_id(formula_id: str) -> str:
    """Map a short alias to its registered id; other ids pass through unchanged."""
    return FORMULA_ALIASES.get(str(formula_id).lower(), formula_id)


def q_family_formula(formula_id: str, params: Mapping[str, Any]) -> float:
    """Evaluate a printed formula literally after checking its admissible range.

    Raises:
        ValidationError: Unknown id, missing or out-of-range parameters.
        PositivityError: Parameters describe a non-positive state.
    """
    formula_id = resolve_formula_id(formula_id)
    if formula_id not in FORMULAS:
        raise ValidationError(f"unknown formula id '{formula_id}'")
    spec = FORMULAS[formula_id]
    _need(params, spec.params, formula_id)
    for name in spec.params:
        if name not in ("r", "t", "n", "a", "b") and not np.isfinite(float(params[name])):
            raise ValidationError(f"{formula_id}: parameter {name} must be finite")
    spec.validate(params)
    return float(spec.evaluate(params))


# =============================================================================
# SETTING FAMILIES
# =============================================================================

ALLOWED_PAIRS = ((1, 2), (3, 8), (4, 5), (6, 7))
PLANAR_ANGLES = ("phi_m", "phi_n", "phi_p", "phi_q")
TWO_QUTRIT_ANGLES = ("theta2", "theta3", "theta4")


def _planar(phi: float) -> np.ndarray:
    return math.cos(phi) * pauli("x").matrix + math.sin(phi) * pauli("y").matrix


def _wrap(angle: float) -> float:
    """Map an angle difference into (-pi, pi]."""
    return -((-angle + np.pi) % TWO_PI - np.pi)


@dataclass(frozen=True, eq=False)
class SettingFamily:
    """A parametrised pair of observables (A, B).

    Kinds:
        qubit_spins: A = r.sigma, B = t.sigma
        qutrit_pair: A = a.lambda, B = b.lambda
        planar_two_qubit: A = s(phi_m) (x) s(phi_n), B = s(phi_p) (x) s(phi_q),
            s(phi) = cos(phi) sigma_x + sin(phi) sigma_y
        two_qutrit: A = l_i (x) (cos t2 l_i + sin t2 l_j),
            B = (cos t3 l_i + sin t3 l_j) (x) (cos t4 l_i + sin t4 l_j)

    ``free`` names the angles the maximizer varies. With ``constrained`` set,
    theta2 is tied to theta3 + theta4. ``excluded`` lists (angle, centre)
    neighbourhoods of half-width ``gap`` that are never evaluated.
    """
    kind: str
    angles: Dict[str, float] = field(default_factory=dict)
    vectors: Tuple[np.ndarray, ...] = ()
    pair: Tuple[int, int] = (1, 2)
    constrained: bool = False
    free: Tuple[str, ...] = ()
    excluded: Tuple[Tuple[str, float], ...] = ()
    gap: float = 0.0

    # -- constructors ---------------------------------------------------------

    @classmethod
    def qubit_spins(cls, r_hat: Sequence[float], t_hat: Sequence[float]) -> "SettingFamily":
        r = as_real_vector(r_hat, 3, "r")
        t = as_real_vector(t_hat, 3, "t")
        require_unit(r, "r")
        require_unit(t, "t")
        return cls("qubit_spins", vectors=(r, t))

    @classmethod
    def qutrit_pair(cls, a_hat: Sequence[float], b_hat: Sequence[float]) -> "SettingFamily":
        a = as_real_vector(a_hat, 8, "a")
        b = as_real_vector(b_hat, 8, "b")
        require_unit(a, "a")
        require_unit(b, "b")
        return cls("qutrit_pair", vectors=(a, b))

    @classmethod
    def planar_two_qubit(cls, phi_m: float = 0.0, phi_n: float = 0.0, phi_p: float = 0.0,
                         phi_q: float = 0.0, free: Sequence[str] = PLANAR_ANGLES) -> "SettingFamily":
        free = tuple(free)
        if any(name not in PLANAR_ANGLES for name in free):
            raise ValidationError(f"planar_two_qubit free angles must come from {PLANAR_ANGLES}")
        angles = dict(zip(PLANAR_ANGLES, (float(phi_m), float(phi_n), float(phi_p), float(phi_q))))
        return cls("planar_two_qubit", angles=angles, free=free)

    @classmethod
    def two_qutrit(cls, i: int = 1, j: int = 2, theta2: float = 0.0, theta3: float = 0.0,
                   theta4: float = 0.0, constrained: bool = False, gap: float = 0.0,
                   free: Optional[Sequence[str]] = None) -> "SettingFamily":
        pair = (int(i), int(j))
        if pair not in ALLOWED_PAIRS:
            raise ValidationError(f"two_qutrit pair must be one of {ALLOWED_PAIRS}, got {pair}")
        if free is None:
            free = ("theta3", "theta4") if constrained else TWO_QUTRIT_ANGLES
        free = tuple(free)
        if constrained and "theta2" in free:
            raise ValidationError("theta2 is not free under the theta2 = theta3 + theta4 constraint")
        excluded = (("theta3", 0.0), ("theta3", np.pi)) if gap > 0 else ()
        angles = {"theta2": float(theta2), "theta3": float(theta3), "theta4": float(theta4)}
        return cls("two_qutrit", angles=angles, pair=pair, constrained=constrained, free=free,
                   excluded=excluded, gap=float(gap))

    # -- queries --------------------------------------------------------------

    def angle(self, name: str) -> float:
        if self.constrained and name == "theta2":
            return self.angles["theta3"] + self.angles["theta4"]
        return self.angles[name]

    def free_angles(self) -> Tuple[str, ...]:
        return self.free

    def with_angles(self, values: Mapping[str, float]) -> "SettingFamily":
        return replace(self, angles={**self.angles, **{k: float(v) for k, v in values.items()}})

    def is_excluded(self) -> bool:
        return any(abs(_wrap(self.angle(name) - centre)) < self.gap for name, centre in self.excluded)

    def matrices(self) -> Tuple[np.ndarray, np.ndarray]:
        """Raw (A, B) matrices for the current angles."""
        if self.kind == "qubit_spins":
            return direction_operator(self.vectors[0]).matrix, direction_operator(self.vectors[1]).matrix
        if self.kind == "qutrit_pair":
            return direction_operator(self.vectors[0]).matrix, direction_operator(self.vectors[1]).matrix
        if self.kind == "planar_two_qubit":
            m, n, p, q = (self.angle(k) for k in PLANAR_ANGLES)
            return np.kron(_planar(m), _planar(n)), np.kron(_planar(p), _planar(q))
        if self.kind == "two_qutrit":
            lam = gellmann_stack()
            li, lj = lam[self.pair[0] - 1], lam[self.pair[1] - 1]

            def mix(theta: float) -> np.ndarray:
                return math.cos(theta) * li + math.sin(theta) * lj

            a = np.kron(li, mix(self.angle("theta2")))
            b = np.kron(mix(self.angle("theta3")), mix(self.angle("theta4")))
            return a, b
        raise ValidationError(f"unknown setting family kind '{self.kind}'")

    def observables(self) -> Tuple[HermitianOperator, HermitianOperator]:
        a, b = self.matrices()
        return HermitianOperator.from_matrix(a), HermitianOperator.from_matrix(b)

    def to_dict(self) -> Dict[str, Any]:
        out: Dict[str, Any] = {"kind": self.kind}
        if self.kind == "two_qutrit":
            out["pair"] = list(self.pair)
            out["constrained"] = self.constrained
            out["angles"] = {k: self.angle(k) for k in TWO_QUTRIT_ANGLES}
        elif self.kind == "planar_two_qubit":
            out["angles"] = {k: self.angle(k) for k in PLANAR_ANGLES}
        else:
            out["vectors"] = [[float(x) for x in v] for v in self.vectors]
        return out


def constrained_two_qutrit(pair: Tuple[int, int] = (1, 2),
                           gap: float = config.DEGENERATE_ANGLE_GAP) -> SettingFamily:
    """two_qutrit template with theta2 = theta3 + theta4 and theta3 kept away from 0 and pi."""
    return SettingFamily.two_qutrit(pair[0], pair[1], constrained=True, gap=gap)


# =============================================================================
# SETTINGS MAXIMIZER
# =============================================================================

def q_max_over_settings(rho, family: SettingFamily, grid: int = config.DEFAULT_GRID,
                        refine_rounds: int = config.DEFAULT_REFINE_ROUNDS) -> Tuple[float, SettingFamily]:
    """Maximise Q over the free angles of a setting family.

    A uniform grid of ``grid`` points per free angle on [0, 2pi) is scanned in
    lexicographic order (ties keep the lowest grid index), then
    ``refine_rounds`` passes of coordinate-wise golden-section search refine
    the incumbent, halving the bracket each pass. Excluded neighbourhoods are
    never evaluated.

    Returns:
        (q_max, argmax) where argmax is the family with the maximising angles.

    Raises:
        ValidationError: grid below MIN_GRID.
        NumericalError: every grid point falls in an excluded neighbourhood.
    """
    r = as_matrix(rho)
    names = family.free_angles()

    def objective(values: Mapping[str, float]) -> float:
        candidate = family.with_angles(values)
        if candidate.is_excluded():
            return -np.inf
        a, b = candidate.matrices()
        _check_pair(r, a, "A")
        return _q_components(r, a, b).q

    if not names:
        return objective({}), family
    if grid < config.MIN_GRID:
        raise ValidationError(f"grid must be at least {config.MIN_GRID}, got {grid}")

    axis = TWO_PI * np.arange(grid) / grid
    best_q = -np.inf
    best: Dict[str, float] = {}
    for idx in product(range(grid), repeat=len(names)):
        values = {name: axis[k] for name, k in zip(names, idx)}
        val = objective(values)
        if val > best_q:
            best_q, best = val, values

    if not np.isfinite(best_q):
        raise NumericalError("every grid setting lies in an excluded neighbourhood")

    step = TWO_PI / grid
    for _ in range(refine_rounds):
        for name in names:
            centre = best[name]

            def line(x: float, name=name) -> float:
                return objective({**best, name: x})

            x, y = golden_section_max(line, centre - step, centre + step)
            if y > best_q:
                best_q = y
                best = {**best, name: float(x % TWO_PI)}
        step /= 2.0

    return float(best_q), family.with_angles(best)


# =============================================================================
# CONCORDANCE ENGINE
# =============================================================================

class Verdict(str, Enum):
    EXACT = "ExactMatch"
    PROPORTIONAL = "ProportionalMatch"
    MISMATCH = "Mismatch"


@dataclass
class ConcordanceReport:
    """Outcome of comparing one printed formula with the matrix oracle on a grid."""
    formula_id: str
    grid_size: int
    max_abs_diff: float
    fitted_ratio: Optional[float]
    ratio_spread: Optional[float]
    verdict: Verdict
    param_names: List[str] = field(default_factory=list)
    rows: List[Dict[str, float]] = field(default_factory=list)

    @property
    def verdict_label(self) -> str:
        if self.verdict == Verdict.PROPORTIONAL:
            return f"ProportionalMatch({self.fitted_ratio:.6g})"
        return self.verdict.value

    def to_dict(self) -> Dict[str, Any]:
        return {
            "formula_id": self.formula_id,
            "grid_size": self.grid_size,
            "max_abs_diff": self.max_abs_diff,
            "fitted_ratio": self.fitted_ratio,
            "ratio_spread": self.ratio_spread,
            "verdict": self.verdict.value,
            "verdict_label": self.verdict_label,
        }

    def csv_header(self) -> List[str]:
        return ["formula_id", *self.param_names, "formula_value", "oracle_value", "abs_diff", "ratio"]

    def csv_rows(self) -> List[List[Any]]:
        out = []
        for row in self.rows:
            out.append([self.formula_id, *(row["params"][n] for n in self.param_names),
                        row["formula"], row["oracle"], row["abs_diff"], row["ratio"]])
        return out


def classify_agreement(formula: np.ndarray, oracle: np.ndarray) -> Tuple[float, Optional[float], Optional[float], Verdict]:
    """Fit oracle/formula and classify the agreement.

    ExactMatch when every point agrees within EXACT_MATCH_TOL. ProportionalMatch
    when oracle/formula is constant within RATIO_SPREAD_TOL over points with
    |formula| > RATIO_FLOOR, the fitted ratio is nonzero, and the oracle
    vanishes wherever the formula does.
    """
    formula = np.asarray(formula, dtype=float)
    oracle = np.asarray(oracle, dtype=float)
    max_abs_diff = float(np.max(np.abs(formula - oracle)))
    mask = np.abs(formula) > config.RATIO_FLOOR

    fitted: Optional[float] = None
    spread: Optional[float] = None
    if np.any(mask):
        ratios = oracle[mask] / formula[mask]
        fitted = float(np.dot(formula[mask], oracle[mask]) / np.dot(formula[mask], formula[mask]))
        spread = float(np.max(ratios) - np.min(ratios))

    if max_abs_diff < config.EXACT_MATCH_TOL:
        return max_abs_diff, fitted, spread, Verdict.EXACT
    if (spread is not None and spread < config.RATIO_SPREAD_TOL and abs(fitted) > config.RATIO_FLOOR
            and np.all(np.abs(oracle[~mask]) < config.EXACT_MATCH_TOL)):
        return max_abs_diff, fitted, spread, Verdict.PROPORTIONAL
    return max_abs_diff, fitted, spread, Verdict.MISMATCH


# -- grid builders ------------------------------------------------------------
# Each builder yields (flat params for the CSV, formula value, oracle value).

GridRow = Tuple[Dict[str, float], float, float]

MIXTURE_PAIRS = (
    ((1.0, 0.0, 0.0), (0.0, 1.0, 0.0)),
    ((0.6, 0.8, 0.0), (0.0, 0.6, 0.8)),
    ((1.0 / SQRT3, 1.0 / SQRT3, 1.0 / SQRT3), (0.8, 0.0, 0.6)),
)


def _unit(rng: np.random.Generator, size: int) -> np.ndarray:
    v = rng.standard_normal(size)
    return v / np.linalg.norm(v)


def _flat(prefix: str, vec: np.ndarray) -> Dict[str, float]:
    return {f"{prefix}{i + 1}": float(x) for i, x in enumerate(vec)}


def _schmidt_flat(k_a, k_b=None) -> Dict[str, float]:
    out = {f"k{i + 1}": float(x) for i, x in enumerate(k_a)}
    if k_b is not None:
        out.update({f"k{i + 4}": float(x) for i, x in enumerate(k_b)})
    return out


def _random_schmidt(rng: np.random.Generator) -> np.ndarray:
    return np.abs(_unit(rng, 3))


def _lambda(i: int) -> np.ndarray:
    return gellmann(i).matrix


def _q_l3(rho, b: int) -> float:
    return q_oracle(rho, _lambda(3), _lambda(b)).q


def _grid_qubit_spin_pair(grid, rng) -> List[GridRow]:
    rows = []
    for _ in range(grid * grid):
        r, t = _unit(rng, 3), _unit(rng, 3)
        n = _unit(rng, 3) * rng.uniform() ** (1.0 / 3.0)
        formula = q_family_formula("qubit_spin_pair", {"r": r, "t": t, "n": n})
        oracle = q_oracle(qubit_density(n), direction_operator(r), direction_operator(t)).q
        rows.append(({**_flat("r", r), **_flat("t", t), **_flat("n", n)}, formula, oracle))
    return rows


def _grid_qutrit_general(grid, rng) -> List[GridRow]:
    rows = []
    for _ in range(grid * grid):
        a, b = _unit(rng, 8), _unit(rng, 8)
        n = random_qutrit_bloch(rng).n
        formula = q_family_formula("qutrit_general", {"a": a, "b": b, "n": n})
        oracle = q_oracle(qutrit_density(n), direction_operator(a), direction_operator(b)).q
        rows.append(({**_flat("a", a), **_flat("b", b), **_flat("n", n)}, formula, oracle))
    return rows


def _grid_single_index(formula_id: str, index: int, lo: float, hi: float, partners: Sequence[int]):
    def build(grid, rng) -> List[GridRow]:
        rows = []
        for v in np.linspace(lo, hi, grid):
            rho = qutrit_density(one_param_qutrit(index, v).n)
            formula = q_family_formula(formula_id, {f"n{index}": v})
            for b in partners:
                rows.append(({f"n{index}": float(v), "b": float(b)}, formula, _q_l3(rho, b)))
        return rows
    return build


def _grid_parabolic2(formula_id: str, b: int):
    def build(grid, rng) -> List[GridRow]:
        rows = []
        for n3 in np.linspace(-1.0 / SQRT3, 1.0 / SQRT3, grid):
            radius = math.sqrt(max(0.0, (1.0 + SQRT3 * n3) / 3.0))
            for s in np.linspace(-1.0, 1.0, grid):
                n4 = s * radius
                params = {"n3": float(n3), "n4": float(n4)}
                rho = qutrit_density(two_param_qutrit((3, 4), (n3, n4)).n)
                rows.append((params, q_family_formula(formula_id, params), _q_l3(rho, b)))
        return rows
    return build


def _grid_parabolic3(formula_id: str, b: int):
    def build(grid, rng) -> List[GridRow]:
        rows = []
        k = 0
        for n3 in np.linspace(-1.0 / SQRT3, 1.0 / SQRT3, grid):
            radius = math.sqrt(max(0.0, (1.0 + SQRT3 * n3) / 3.0))
            for frac in np.linspace(0.0, 1.0, grid):
                phi = TWO_PI * ((k * INV_GOLDEN) % 1.0)
                k += 1
                n4, n5 = frac * radius * math.cos(phi), frac * radius * math.sin(phi)
                params = {"n3": float(n3), "n4": float(n4), "n5": float(n5)}
                rho = qutrit_density(three_param_qutrit((3, 4, 5), (n3, n4, n5)).n)
                rows.append((params, q_family_formula(formula_id, params), _q_l3(rho, b)))
        return rows
    return build




def _grid_mixture_entropy(grid, rng) -> List[GridRow]:
    rows = []
    for k_a, k_b in MIXTURE_PAIRS:
        for p in np.linspace(0.0, 1.0, grid):
            rho = mixture(MixtureParam.of(p, k_a, k_b))
            params = {"p": float(p), **_schmidt_flat(k_a, k_b)}
            rows.append((params, q_family_formula("mixture_entropy", {"p": p}), linear_entropy(rho)))
    return rows


def _grid_mixture_qmax(grid, rng) -> List[GridRow]:
    rows = []
    template = constrained_two_qutrit()
    for k_a, k_b in MIXTURE_PAIRS:
        for p in np.linspace(0.0, 1.0, grid):
            rho = mixture(MixtureParam.of(p, k_a, k_b))
            q_max, _ = q_max_over_settings(rho, template, grid=config.CONCORDANCE_OPT_GRID)
            formula = q_family_formula("mixture_qmax", {"k1": k_a[0], "k6": k_b[2], "p": p})
            rows.append(({"p": float(p), **_schmidt_flat(k_a, k_b)}, formula, q_max))
    return rows


def _grid_isotropic_entropy(grid, rng) -> List[GridRow]:
    return [({"p": float(p)}, q_family_formula("isotropic_entropy", {"p": p}), linear_entropy(isotropic(p)))
            for p in np.linspace(0.0, 1.0, grid)]


def _grid_isotropic_qmax(grid, rng) -> List[GridRow]:
    template = constrained_two_qutrit()
    rows = []
    for p in np.linspace(0.0, 1.0, grid):
        q_max, _ = q_max_over_settings(isotropic(p), template, grid=config.CONCORDANCE_OPT_GRID)
        rows.append(({"p": float(p)}, q_family_formula("isotropic_qmax", {"p": p}), q_max))
    return rows


def _tied_setting(rng: np.random.Generator) -> Tuple[float, float, SettingFamily]:
    t3, t4 = rng.uniform(0.0, TWO_PI, size=2)
    return float(t3), float(t4), SettingFamily.two_qutrit(1, 2, theta3=t3, theta4=t4, constrained=True)


def _grid_schmidt_pure_q(grid, rng) -> List[GridRow]:
    rows = []
    for _ in range(grid * grid):
        k = _random_schmidt(rng)
        t3, t4, setting = _tied_setting(rng)
        params = {**_schmidt_flat(k), "theta2": setting.angle("theta2"), "theta3": t3, "theta4": t4}
        oracle = q_oracle(schmidt_pure(k), *setting.matrices()).q
        rows.append((params, q_family_formula("schmidt_pure_q", params), oracle))
    return rows


def _grid_mixture_q(grid, rng) -> List[GridRow]:
    rows = []
    for _ in range(grid * grid):
        k_a, k_b = _random_schmidt(rng), _random_schmidt(rng)
        p = float(rng.uniform())
        t3, t4, setting = _tied_setting(rng)
        params = {**_schmidt_flat(k_a, k_b), "p": p, "theta3": t3, "theta4": t4}
        oracle = q_oracle(mixture(MixtureParam.of(p, k_a, k_b)), *setting.matrices()).q
        rows.append((params, q_family_formula("mixture_q", params), oracle))
    return rows


def _grid_isotropic_q(grid, rng) -> List[GridRow]:
    rows = []
    for _ in range(grid * grid):
        p = float(rng.uniform())
        t3, t4, setting = _tied_setting(rng)
        params = {"p": p, "theta3": t3, "theta4": t4}
        oracle = q_oracle(isotropic(p), *setting.matrices()).q
        rows.append((params, q_family_formula("isotropic_q", params), oracle))
    return rows


# -- measurement-algebra identities ------------------------------------------

BASIS_LABELS = ("I", "l1", "l2", "l3", "l4", "l5", "l6", "l7", "l8")
_INV_2SQRT3 = 1.0 / (2.0 * SQRT3)


def _identity_operators() -> Dict[str, Tuple[Callable[[], np.ndarray], Dict[str, float]]]:
    l3, l6, l7 = (lambda: _lambda(3)), (lambda: _lambda(6)), (lambda: _lambda(7))
    return {
        "anticomm_l3_l7": (lambda: anticommutator(l3(), l7()), {"l7": -0.5}),
        "comm_l3_l7": (lambda: -1j * commutator(l3(), l7()), {"l6": 0.5}),
        "square_l3": (lambda: l3() @ l3(), {"I": 2.0 / 3.0, "l8": 1.0 / SQRT3}),
        "square_l7": (lambda: l7() @ l7(), {"I": 2.0 / 3.0, "l8": -_INV_2SQRT3, "l3": -0.5}),
        "comm_l3_l6": (lambda: -1j * commutator(l3(), l6()), {"l7": -0.5}),
        "anticomm_l3_l6": (lambda: anticommutator(l3(), l6()), {"l6": -0.5}),
        "square_l6": (lambda: l6() @ l6(), {"I": 2.0 / 3.0, "l8": -_INV_2SQRT3, "l3": -0.5}),
    }


ALGEBRA_IDENTITIES = _identity_operators()


def _grid_identity(identity_id: str):
    def build(grid, rng) -> List[GridRow]:
        make_op, printed = ALGEBRA_IDENTITIES[identity_id]
        coeffs, residual = decompose(make_op())
        if residual > config.ALGEBRA_TOL:
            raise NumericalError(f"{identity_id}: decomposition residual {residual:.3e}")
        coeffs = np.real_if_close(coeffs).real
        return [({"basis": float(k)}, float(printed.get(label, 0.0)), float(coeffs[k]))
                for k, label in enumerate(BASIS_LABELS)]
    return build


GRID_BUILDERS: Dict[str, Callable[[int, np.random.Generator], List[GridRow]]] = {
    "qubit_spin_pair": _grid_qubit_spin_pair,
    "qutrit_general": _grid_qutrit_general,
    "n8_family": _grid_single_index("n8_family", 8, -1.0, 0.5, (7, 6)),
    "n1_family": _grid_single_index("n1_family", 1, -1.0 / SQRT3, 1.0 / SQRT3, (7, 6, 5, 4)),
    "parabolic2_l5": _grid_parabolic2("parabolic2_l5", 5),
    "parabolic2_l4": _grid_parabolic2("parabolic2_l4", 4),
    "parabolic3_l5": _grid_parabolic3("parabolic3_l5", 5),
    "parabolic3_l4": _grid_parabolic3("parabolic3_l4", 4),
    "mixture_entropy": _grid_mixture_entropy,
    "mixture_qmax": _grid_mixture_qmax,
    "isotropic_entropy": _grid_isotropic_entropy,
    "isotropic_qmax": _grid_isotropic_qmax,
    "schmidt_pure_q": _grid_schmidt_pure_q,
    "mixture_q": _grid_mixture_q,
    "isotropic_q": _grid_isotropic_q,
    **{identity_id: _grid_identity(identity_id) for identity_id in ALGEBRA_IDENTITIES},
}

CONCORDANCE_IDS: Tuple[str, ...] = tuple(GRID_BUILDERS)


def concordance(formula_id: str, grid_spec: int = config.DEFAULT_CONCORDANCE_GRID) -> ConcordanceReport:
    """Compare one printed formula with the oracle on a deterministic grid.

    One-parameter families use ``grid_spec`` evenly spaced points, two-parameter
    families a grid_spec x grid_spec mesh, and higher-dimensional families
    grid_spec^2 seeded samples. Optimised quantities (mixture_qmax,
    isotropic_qmax) compare against q_max_over_settings on the constrained
    two-qutrit family. Each id draws from its own seed, so results do not
    depend on which other ids run. ``formula_id`` may also be a key of FORMULA_ALIASES.

    Raises:
        ValidationError: Unknown id or grid_spec < 2.
    """
    formula_id = resolve_formula_id(formula_id)
    if formula_id not in GRID_BUILDERS:
        raise ValidationError(f"unknown formula id '{formula_id}' (known: {', '.join(CONCORDANCE_IDS)})")
    if int(grid_spec) < 2:
        raise ValidationError(f"concordance grid must have at least 2 points, got {grid_spec}")
    rng = np.random.default_rng([config.CONCORDANCE_SEED, CONCORDANCE_IDS.index(formula_id)])
    grid_rows = GRID_BUILDERS[formula_id](int(grid_spec), rng)
    if not grid_rows:
        raise ValidationError(f"{formula_id}: empty valid grid")

    formula = np.array([row[1] for row in grid_rows])
    oracle = np.array([row[2] for row in grid_rows])
    max_abs_diff, fitted, spread, verdict = classify_agreement(formula, oracle)

    param_names = list(grid_rows[0][0].keys())
    rows = []
    for params, f_val, o_val in grid_rows:
        ratio = o_val / f_val if abs(f_val) > config.RATIO_FLOOR else None
        rows.append({"params": params, "formula": float(f_val), "oracle": float(o_val),
                     "abs_diff": float(abs(f_val - o_val)), "ratio": ratio})

    report = ConcordanceReport(formula_id, len(grid_rows), max_abs_diff, fitted, spread, verdict,
                               param_names, rows)
    log(f"[-] {formula_id}: {report.verdict_label} (max |diff| = {max_abs_diff:.3e})")
    return report


def concordance_all(grid_spec: int = config.DEFAULT_CONCORDANCE_GRID,
                    ids: Optional[Sequence[str]] = None) -> List[ConcordanceReport]:
    """Run the concordance suite over every registered id (or the given subset)."""
    selected = list(ids) if ids is not None else list(CONCORDANCE_IDS)
    return [concordance(fid, grid_spec) for fid in tqdm(selected, desc="concordance", disable=not config.VERBOSE)]
