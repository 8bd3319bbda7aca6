import numpy as np
import pytest

from conftest import unit_vector
from src.core_utils import NumericalError, PositivityError, ValidationError
from src.state_space import (
    MixtureParam,
    density_from_bloch,
    isotropic,
    linear_entropy,
    mixture,
    one_param_qutrit,
    qubit_density,
    qutrit_density,
    random_density,
    random_hermitian,
    random_qutrit_bloch,
    schmidt_pure,
    three_param_qutrit,
    two_param_qutrit,
    werner_qubit,
)
from src.su_algebra import SQRT3, conjugate, direction_operator, gellmann, pauli, random_unitary
from src.uncertainty import (
    ALLOWED_PAIRS,
    CONCORDANCE_IDS,
    FORMULA_ALIASES,
    FORMULAS,
    SettingFamily,
    Verdict,
    classify_agreement,
    concordance,
    constrained_two_qutrit,
    expectation,
    q_family_formula,
    q_max_over_settings,
    q_oracle,
    q_qubit_closed,
    q_qutrit_closed,
    resolve_formula_id,
    variance,
)

MAXIMALLY_MIXED = qutrit_density(np.zeros(8))


def lam(i):
    return gellmann(i).matrix


def test_maximally_mixed_qutrit_value():
    report = q_oracle(MAXIMALLY_MIXED, lam(3), lam(7))
    assert np.isclose(report.q, 4 / 9)
    assert np.isclose(report.var_a, 2 / 3)
    assert np.isclose(report.commutator_term, 0)


def test_same_observable_gives_zero(random_qutrit):
    assert abs(q_oracle(random_qutrit, lam(3), lam(3)).q) < 1e-12


def test_breakdown_recombines(rng):
    for dim in (2, 3, 4, 9):
        rho = random_density(dim, rng)
        r = q_oracle(rho, random_hermitian(dim, rng), random_hermitian(dim, rng))
        assert np.isclose(r.var_a * r.var_b - r.commutator_term - r.anticommutator_term, r.q, atol=1e-12)
        assert r.q >= -1e-10


def test_q_nonnegative_on_ten_thousand_seeded_samples():
    dims = (2, 3, 4, 9)
    worst = np.inf
    for i in range(10_000):
        rng = np.random.default_rng([2024, i])
        dim = dims[i % len(dims)]
        rho = random_density(dim, rng)
        q = q_oracle(rho, random_hermitian(dim, rng), random_hermitian(dim, rng)).q
        worst = min(worst, q)
        assert q >= -1e-10, (i, dim, q)
    assert worst >= -1e-10


def test_expectation_and_variance():
    rho = density_from_bloch(one_param_qutrit(8, -1.0))
    assert np.isclose(expectation(rho, lam(8)), -2 / SQRT3)
    assert variance(rho, lam(8)) == pytest.approx(0.0, abs=1e-15)
    assert variance(rho, lam(7)) == pytest.approx(1.0)


def test_oracle_errors(random_qutrit):
    with pytest.raises(ValidationError):
        q_oracle(random_qutrit, pauli("x"), pauli("z"))
    with pytest.raises(NumericalError):
        q_oracle(random_qutrit, np.triu(np.ones((3, 3))), lam(1))


def test_unitary_covariance(rng):
    for _ in range(20):
        rho = random_density(3, rng)
        a, b = random_hermitian(3, rng), random_hermitian(3, rng)
        u = random_unitary(3, rng)
        rotated = u @ rho.matrix @ u.conj().T
        q1 = q_oracle(rho, a, b).q
        q2 = q_oracle(rotated, conjugate(a, u), conjugate(b, u)).q
        assert abs(q1 - q2) < 1e-10 * max(1.0, abs(q1))


def test_qubit_closed_form_matches_oracle(rng):
    for _ in range(200):
        r, t = unit_vector(rng, 3), unit_vector(rng, 3)
        n = unit_vector(rng, 3) * rng.uniform()
        oracle = q_oracle(qubit_density(n), direction_operator(r), direction_operator(t)).q
        assert abs(q_qubit_closed(r, t, n) - oracle) < 1e-10


def test_orthogonal_spins_give_linear_entropy(rng):
    for _ in range(50):
        n = unit_vector(rng, 3) * rng.uniform()
        rho = qubit_density(n)
        assert abs(q_oracle(rho, pauli("z"), pauli("x")).q - linear_entropy(rho)) < 1e-10


def test_qubit_closed_form_validation():
    with pytest.raises(ValidationError):
        q_qubit_closed([1, 1, 0], [0, 0, 1], [0, 0, 0])
    with pytest.raises(PositivityError):
        q_qubit_closed([1, 0, 0], [0, 0, 1], [1, 1, 0])


def test_qutrit_closed_form_matches_oracle(rng):
    for _ in range(100):
        a, b = unit_vector(rng, 8), unit_vector(rng, 8)
        n = random_qutrit_bloch(rng).n
        oracle = q_oracle(qutrit_density(n), direction_operator(a), direction_operator(b)).q
        assert abs(q_qutrit_closed(a, b, n) - oracle) < 1e-10


# -- pure-state zeros ---------------------------------------------------------

@pytest.mark.parametrize("b", [7, 6])
def test_n8_pure_point(b):
    rho = density_from_bloch(one_param_qutrit(8, -1.0))
    assert abs(q_oracle(rho, lam(3), lam(b)).q) < 1e-9


@pytest.mark.parametrize("sign", [1, -1])
@pytest.mark.parametrize("b", [5, 4])
def test_two_param_pure_points(sign, b):
    rho = density_from_bloch(two_param_qutrit((3, 4), (1 / SQRT3, sign * np.sqrt(2 / 3))))
    assert abs(q_oracle(rho, lam(3), lam(b)).q) < 1e-9


@pytest.mark.parametrize("phi", np.linspace(0, 2 * np.pi, 7))
@pytest.mark.parametrize("b", [5, 4])
def test_three_param_pure_circle(phi, b):
    r = np.sqrt(2 / 3)
    rho = density_from_bloch(three_param_qutrit((3, 4, 5), (1 / SQRT3, r * np.cos(phi), r * np.sin(phi))))
    assert abs(q_oracle(rho, lam(3), lam(b)).q) < 1e-9


@pytest.mark.parametrize("pair", ALLOWED_PAIRS)
def test_schmidt_states_vanish_on_constraint(rng, pair):
    for _ in range(10):
        k = np.abs(unit_vector(rng, 3))
        t3, t4 = rng.uniform(0, 2 * np.pi, size=2)
        setting = SettingFamily.two_qutrit(*pair, theta3=t3, theta4=t4, constrained=True)
        assert abs(q_oracle(schmidt_pure(k), *setting.matrices()).q) < 1e-9


def test_planar_two_qubit_pure_states(rng):
    for _ in range(20):
        k = np.abs(unit_vector(rng, 2))
        angles = rng.uniform(0, 2 * np.pi, size=4)
        a, b = SettingFamily.planar_two_qubit(*angles, free=()).matrices()
        assert abs(q_oracle(schmidt_pure(k), a, b).q) < 1e-10


# -- printed formulas ---------------------------------------------------------

def test_formula_registry_literal_values():
    assert q_family_formula("n1_family", {"n1": 0.2}) == pytest.approx(4 / 9)
    assert q_family_formula("n8_family", {"n8": 0.0}) == pytest.approx(8 / 9)
    assert q_family_formula("isotropic_qmax", {"p": 0.5}) == pytest.approx(16 / 81)
    assert q_family_formula("mixture_entropy", {"p": 0.5}) == pytest.approx(0.375)
    assert q_family_formula("parabolic2_l5", {"n3": 0.0, "n4": 0.0}) == pytest.approx(4 / 9)


def test_formula_registry_errors():
    with pytest.raises(ValidationError):
        q_family_formula("eq99", {})
    with pytest.raises(ValidationError):
        q_family_formula("n8_family", {})
    with pytest.raises(PositivityError):
        q_family_formula("n8_family", {"n8": 0.7})
    with pytest.raises(ValidationError):
        q_family_formula("isotropic_qmax", {"p": 1.5})
    with pytest.raises(ValidationError):
        q_family_formula("schmidt_pure_q", {"k1": 1, "k2": 1, "k3": 0, "theta2": 0, "theta3": 0, "theta4": 0})


def test_every_formula_has_a_grid():
    assert set(FORMULAS) <= set(CONCORDANCE_IDS)


# -- settings optimizer --------------------------------------------------------

def test_isotropic_qmax_on_constraint():
    q_max, argmax = q_max_over_settings(isotropic(0.5), constrained_two_qutrit())
    assert q_max == pytest.approx(16 / 81, abs=1e-9)
    assert np.isclose(np.sin(argmax.angle("theta3")) ** 2, 1.0)


def test_optimizer_grid_convergence():
    family = constrained_two_qutrit()
    coarse, _ = q_max_over_settings(isotropic(0.3), family, grid=16)
    fine, _ = q_max_over_settings(isotropic(0.3), family, grid=64)
    assert abs(coarse - fine) < 1e-4


def test_optimizer_is_deterministic():
    family = constrained_two_qutrit()
    first = q_max_over_settings(isotropic(0.7), family)
    second = q_max_over_settings(isotropic(0.7), family)
    assert first[0] == second[0]
    assert first[1].angles == second[1].angles


def test_mixture_hidden_by_constraint_but_not_without_it():
    rho = mixture(MixtureParam.of(0.5, (1, 0, 0), (0, 1, 0)))
    constrained, _ = q_max_over_settings(rho, constrained_two_qutrit())
    assert constrained < 1e-9
    free, _ = q_max_over_settings(rho, SettingFamily.two_qutrit(1, 2, gap=1e-3))
    assert free == pytest.approx(1.0, abs=1e-9)


@pytest.mark.parametrize("p", [0.25, 0.5, 0.75])
def test_werner_qubit_detected_by_planar_settings(p):
    family = SettingFamily.planar_two_qubit(free=("phi_n", "phi_p", "phi_q"))
    q_max, _ = q_max_over_settings(werner_qubit(p), family, grid=8)
    assert q_max >= (1 - p) ** 2 * (1 + 2 * p) - 1e-9


def test_optimizer_validation():
    with pytest.raises(ValidationError):
        q_max_over_settings(isotropic(0.5), constrained_two_qutrit(), grid=4)
    with pytest.raises(ValidationError):
        SettingFamily.two_qutrit(1, 3)
    with pytest.raises(ValidationError):
        SettingFamily.two_qutrit(1, 2, constrained=True, free=("theta2",))


def test_excluded_neighbourhood():
    family = constrained_two_qutrit(gap=1e-3)
    assert family.with_angles({"theta3": 0.0}).is_excluded()
    assert family.with_angles({"theta3": np.pi + 5e-4}).is_excluded()
    assert not family.with_angles({"theta3": 0.1}).is_excluded()


def test_setting_to_dict_reports_tied_angle():
    setting = SettingFamily.two_qutrit(1, 2, theta3=0.5, theta4=0.25, constrained=True)
    assert setting.to_dict()["angles"]["theta2"] == pytest.approx(0.75)


# -- concordance ---------------------------------------------------------------

EXPECTED_VERDICTS = {
    "qubit_spin_pair": (Verdict.EXACT, None),
    "qutrit_general": (Verdict.EXACT, None),
    "n8_family": (Verdict.PROPORTIONAL, 0.5),
    "n1_family": (Verdict.EXACT, None),
    "parabolic2_l5": (Verdict.EXACT, None),
    "parabolic2_l4": (Verdict.EXACT, None),
    "parabolic3_l5": (Verdict.EXACT, None),
    "parabolic3_l4": (Verdict.EXACT, None),
    "mixture_entropy": (Verdict.MISMATCH, None),
    "mixture_qmax": (Verdict.MISMATCH, None),
    "isotropic_entropy": (Verdict.PROPORTIONAL, 1.5),
    "isotropic_qmax": (Verdict.EXACT, None),
    "schmidt_pure_q": (Verdict.EXACT, None),
    "mixture_q": (Verdict.MISMATCH, None),
    "isotropic_q": (Verdict.MISMATCH, None),
    "square_l3": (Verdict.EXACT, None),
    "square_l7": (Verdict.EXACT, None),
    "square_l6": (Verdict.EXACT, None),
    "anticomm_l3_l7": (Verdict.PROPORTIONAL, 2.0),
    "comm_l3_l7": (Verdict.PROPORTIONAL, 2.0),
    "comm_l3_l6": (Verdict.PROPORTIONAL, 2.0),
    "anticomm_l3_l6": (Verdict.PROPORTIONAL, 2.0),
}


def test_expected_verdicts_cover_every_id():
    assert set(EXPECTED_VERDICTS) == set(CONCORDANCE_IDS)


@pytest.mark.parametrize("formula_id", sorted(EXPECTED_VERDICTS))
def test_concordance_verdicts(formula_id):
    verdict, ratio = EXPECTED_VERDICTS[formula_id]
    report = concordance(formula_id, 8)
    assert report.verdict == verdict
    if verdict == Verdict.PROPORTIONAL:
        assert report.fitted_ratio == pytest.approx(ratio, rel=1e-9)
        assert report.ratio_spread < 1e-6


def test_concordance_rows_and_errors():
    report = concordance("n8_family", 8)
    assert report.grid_size == 16
    assert report.csv_header()[:3] == ["formula_id", "n8", "b"]
    vanishing = [row for row in report.rows if row["params"]["n8"] == -1.0]
    assert all(row["ratio"] is None for row in vanishing)
    with pytest.raises(ValidationError):
        concordance("n8_family", 1)
    with pytest.raises(ValidationError):
        concordance("eq99", 8)


def test_concordance_is_deterministic():
    first = concordance("qutrit_general", 4)
    second = concordance("qutrit_general", 4)
    assert first.rows == second.rows


def test_formula_aliases_resolve_to_registered_ids():
    assert set(FORMULA_ALIASES.values()) == set(FORMULAS)
    assert resolve_formula_id("eq5") == "qubit_spin_pair"
    assert resolve_formula_id("F15b") == "parabolic2_l4"
    assert resolve_formula_id("F_pure2qt") == "schmidt_pure_q"
    assert resolve_formula_id("n8_family") == "n8_family"
    assert resolve_formula_id("eq99") == "eq99"


@pytest.mark.parametrize("alias, canonical, params", [
    ("F13", "n8_family", {"n8": 0.0}),
    ("F14", "n1_family", {"n1": 0.2}),
    ("eq21", "mixture_entropy", {"p": 0.5}),
    ("eq24", "isotropic_entropy", {"p": 0.5}),
    ("F25", "isotropic_qmax", {"p": 0.5}),
])
def test_q_family_formula_accepts_aliases(alias, canonical, params):
    assert q_family_formula(alias, params) == q_family_formula(canonical, params)


def test_concordance_by_alias_matches_canonical_id():
    by_alias = concordance("eq5", 4)
    assert by_alias.formula_id == "qubit_spin_pair"
    assert by_alias.rows == concordance("qubit_spin_pair", 4).rows


def test_classify_agreement_rules():
    f = np.array([1.0, 2.0, 0.0])
    assert classify_agreement(f, f)[3] == Verdict.EXACT
    assert classify_agreement(f, 3 * f)[3] == Verdict.PROPORTIONAL
    assert classify_agreement(f, np.array([3.0, 6.0, 1.0]))[3] == Verdict.MISMATCH
    assert classify_agreement(f, np.zeros(3))[3] == Verdict.MISMATCH
