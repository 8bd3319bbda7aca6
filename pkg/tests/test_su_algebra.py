import numpy as np
import pytest

from src.core_utils import NumericalError, ValidationError
from src.su_algebra import (
    SQRT3,
    HermitianOperator,
    anticommutator,
    commutator,
    conjugate,
    decompose,
    decompose_product,
    direction_operator,
    gellmann,
    gellmann_stack,
    is_unitary,
    observable_catalogue,
    pauli,
    product_basis,
    product_label,
    random_unitary,
    spin1,
    star,
    structure_constants,
    tensor,
    wedge,
)


def test_gellmann_orthonormal_and_traceless():
    lam = gellmann_stack()
    gram = np.einsum("iab,jba->ij", lam, lam)
    np.testing.assert_allclose(gram, 2 * np.eye(8), atol=1e-14)
    np.testing.assert_allclose(np.trace(lam, axis1=1, axis2=2), 0, atol=1e-14)
    for m in lam:
        np.testing.assert_allclose(m, m.conj().T)


@pytest.mark.parametrize("bad", [0, 9, -1, 2.5, "x", None, True])
def test_gellmann_rejects_bad_index(bad):
    with pytest.raises(ValidationError):
        gellmann(bad)


def test_structure_constant_values():
    sc = structure_constants()
    assert np.isclose(sc.f_value(1, 2, 3), 1.0)
    assert np.isclose(sc.f_value(1, 4, 7), 0.5)
    assert np.isclose(sc.f_value(4, 5, 8), SQRT3 / 2)
    assert np.isclose(sc.f_value(3, 6, 7), -0.5)
    assert np.isclose(sc.d_value(1, 1, 8), 1 / SQRT3)
    assert np.isclose(sc.d_value(1, 4, 6), 0.5)
    assert np.isclose(sc.d_value(8, 8, 8), -1 / SQRT3)
    assert np.isclose(sc.d_value(3, 7, 7), -0.5)


def test_structure_constant_symmetries():
    sc = structure_constants()
    np.testing.assert_allclose(sc.d, sc.d.transpose(1, 0, 2), atol=1e-14)
    np.testing.assert_allclose(sc.d, sc.d.transpose(0, 2, 1), atol=1e-14)
    np.testing.assert_allclose(sc.f, -sc.f.transpose(1, 0, 2), atol=1e-14)
    np.testing.assert_allclose(sc.f, -sc.f.transpose(0, 2, 1), atol=1e-14)
    assert not sc.d.flags.writeable


def test_product_rules_reconstruct_every_pair():
    sc = structure_constants()
    lam = gellmann_stack()
    for j in range(8):
        for k in range(8):
            comm = commutator(lam[j], lam[k])
            anti = anticommutator(lam[j], lam[k])
            np.testing.assert_allclose(comm, 2j * np.einsum("l,lab->ab", sc.f[j, k], lam), atol=1e-13)
            expected = (4 / 3) * (j == k) * np.eye(3) + 2 * np.einsum("l,lab->ab", sc.d[j, k], lam)
            np.testing.assert_allclose(anti, expected, atol=1e-13)


def test_star_and_wedge():
    e = np.eye(8)
    np.testing.assert_allclose(star(e[7], e[7]), -e[7], atol=1e-14)
    np.testing.assert_allclose(wedge(e[0], e[1]), e[2], atol=1e-14)
    np.testing.assert_allclose(wedge(e[0], e[0]), 0, atol=1e-14)
    with pytest.raises(ValidationError):
        star(e[0][:3], e[0])


def test_decompose_squares():
    l3, l7 = gellmann(3).matrix, gellmann(7).matrix
    coeffs, residual = decompose(l3 @ l3)
    assert residual < 1e-12
    assert np.isclose(coeffs[0], 2 / 3)
    assert np.isclose(coeffs[8], 1 / SQRT3)
    coeffs, _ = decompose(l7 @ l7)
    np.testing.assert_allclose(coeffs, [2 / 3, 0, 0, -0.5, 0, 0, 0, 0, -1 / (2 * SQRT3)], atol=1e-14)


def test_decompose_qubit_operator():
    coeffs, residual = decompose(direction_operator([0.6, 0.0, 0.8]))
    np.testing.assert_allclose(coeffs, [0, 0.6, 0, 0.8], atol=1e-14)
    assert residual < 1e-14


def test_decompose_product_single_term():
    op = np.kron(gellmann(1).matrix, gellmann(2).matrix)
    coeffs, residual = decompose_product(op, 3)
    expected = np.zeros((9, 9))
    expected[1, 2] = 1.0
    np.testing.assert_allclose(coeffs, expected, atol=1e-14)
    assert residual < 1e-13
    with pytest.raises(ValidationError):
        decompose_product(op, 2)


@pytest.mark.parametrize("d", [2, 3])
def test_product_basis_is_orthogonal(d):
    basis = product_basis(d)
    assert basis.shape == (d ** 4, d ** 2, d ** 2)
    gram = np.einsum("iab,jba->ij", basis, basis)
    np.testing.assert_allclose(gram, np.diag(np.diag(gram)), atol=1e-13)
    np.testing.assert_allclose(basis[0], np.eye(d ** 2))


def test_random_unitary_is_seeded_and_unitary():
    u = random_unitary(3, seed=5)
    assert is_unitary(u)
    np.testing.assert_array_equal(u, random_unitary(3, seed=5))


@pytest.mark.parametrize("dim", [2, 3, 4, 9])
def test_random_unitary_draws_from_generator(dim):
    rng = np.random.default_rng(21)
    first, second = random_unitary(dim, rng), random_unitary(dim, rng)
    assert first.shape == (dim, dim)
    assert is_unitary(first) and is_unitary(second)
    assert not np.allclose(first, second)


def test_conjugate_checks_unitarity():
    with pytest.raises(NumericalError):
        conjugate(gellmann(1), 2 * np.eye(3))
    with pytest.raises(ValidationError):
        conjugate(gellmann(1), np.eye(2))


def test_hermitian_operator_rejects_non_hermitian():
    with pytest.raises(NumericalError):
        HermitianOperator.from_matrix([[0, 1], [0, 0]])
    with pytest.raises(ValidationError):
        HermitianOperator.from_matrix(np.zeros((2, 3)))


@pytest.mark.parametrize("dim", [1, 5, 6, 8, 27])
def test_hermitian_operator_rejects_other_dimensions(dim):
    with pytest.raises(ValidationError):
        HermitianOperator.from_matrix(np.eye(dim))
    with pytest.raises(ValidationError):
        HermitianOperator(np.eye(dim, dtype=complex))


def test_tensor_stays_within_allowed_dimensions():
    assert tensor(gellmann(1), gellmann(2)).dim == 9
    assert tensor(pauli("x"), pauli("z")).dim == 4
    with pytest.raises(ValidationError):
        tensor(tensor(gellmann(1), gellmann(2)), pauli("x"))
    with pytest.raises(ValidationError):
        tensor(gellmann(1), pauli("x"))


def test_spin1_commutation():
    sx, sy, sz = (spin1(a).matrix for a in "xyz")
    np.testing.assert_allclose(commutator(sx, sy), 1j * sz, atol=1e-14)


def test_labels_and_catalogue():
    assert product_label(1, 2, 3) == "l1*l2"
    assert product_label(3, 0, 3) == "l3*I"
    assert product_label(1, 0, 2) == "sx*I"
    names = observable_catalogue()
    assert {"lambda1", "lambda8", "sigmax", "sigmaz", "spiny"} <= set(names)


def test_direction_operator_length():
    with pytest.raises(ValidationError):
        direction_operator([1, 0, 0, 0, 0])
