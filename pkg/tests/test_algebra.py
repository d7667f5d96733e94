from fractions import Fraction

import pytest
from hypothesis import given
from strategies import (
    poisson_matrices,
    poly_elements,
    scalars,
    trig_elements,
    trig_units,
)

from dqw.algebra import (
    AlgebraElement,
    DiffOperator,
    E,
    GaussianRational,
    I,
    NotAUnit,
    PoissonStructure,
    Poly,
    Trig,
    const,
    generic,
    hamiltonian_field,
    is_poisson_vector_field,
    poisson_bracket,
    x,
)

T2, R2 = Trig(2), Poly(2)
PI = PoissonStructure.standard()


def test_gaussian_rational_field_ops():
    a = GaussianRational(Fraction(1, 2), 3)
    assert a * a.inverse() == 1
    assert I * I == -1
    assert str(GaussianRational(0, Fraction(-1, 2))) == "-i/2"


@given(scalars, scalars, scalars)
def test_scalars_distribute(a, b, c):
    assert a * (b + c) == a * b + a * c


def test_torus_bracket_oracle():
    assert poisson_bracket(E(1, 0), E(0, 1), PI) == -E(1, 1)


def test_poly_bracket_oracle():
    assert poisson_bracket(x(1, 2), x(2, 2), PI) == const(R2, 1)


def test_torus_units_and_non_units():
    assert E(2, -1).invert() == E(-2, 1)
    with pytest.raises(NotAUnit):
        (const(T2, 1) + E(1, 0)).invert()


@given(trig_elements(), trig_elements(), trig_elements())
def test_trig_product_is_commutative_and_associative(a, b, c):
    assert a * b == b * a
    assert (a * b) * c == a * (b * c)


@given(trig_units())
def test_monomial_units_invert(u):
    assert u * u.invert() == const(T2, 1)


@given(trig_elements(), trig_elements(), trig_elements(), poisson_matrices())
def test_bracket_jacobi_and_leibniz(a, b, c, pi):
    br = lambda f, g: poisson_bracket(f, g, pi)
    assert br(a, br(b, c)) + br(b, br(c, a)) + br(c, br(a, b)) == AlgebraElement.zero(T2)
    assert br(a, b * c) == br(a, b) * c + b * br(a, c)
    assert br(a, b) == -br(b, a)


@given(poly_elements(), poly_elements())
def test_poly_bracket_antisymmetric(a, b):
    assert poisson_bracket(a, b, PI) == -poisson_bracket(b, a, PI)


def test_poisson_structure_validation():
    assert PI.is_symplectic()
    assert not PoissonStructure([[0, 0], [0, 0]]).is_symplectic()
    with pytest.raises(ValueError):
        PoissonStructure([[0, 1], [1, 0]])


def test_hamiltonian_fields_are_poisson():
    X = hamiltonian_field(E(1, 1), PI)
    ok, _ = is_poisson_vector_field(X, PI)
    assert ok
    f = generic(T2, 0, 1)
    assert X(f) == poisson_bracket(E(1, 1), f, PI) or X(f) == poisson_bracket(f, E(1, 1), PI)


def test_non_poisson_field_has_witness():
    ok, witness = is_poisson_vector_field(DiffOperator.vector_field(T2, [E(1, 0), 0]), PI)
    assert not ok and witness is not None


def test_generic_readback_roundtrip():
    op = DiffOperator.vector_field(T2, [E(0, 1), I])
    f = generic(T2, 0, 1)
    assert DiffOperator.from_generic(T2, op(f)) == op
