from fractions import Fraction

import pytest
from hypothesis import given
from strategies import trig_elements

from dqw.algebra import (
    AlgebraElement,
    DiffOperator,
    E,
    I,
    PoissonStructure,
    Poly,
    Trig,
    const,
    x,
)
from dqw.derivations import (
    ClosedOneForm,
    FormalDerivation,
    NotClosed,
    UnsupportedModel,
    check_derivation,
    delta_one_form,
    inner_to_one_form,
    is_central,
    outer_class,
    quasi_inner,
    rho_one,
    split_poisson_field,
)
from dqw.formal import FormalSeries, moyal
from dqw.starexp import inner_automorphism

T2, R2 = Trig(2), Poly(2)
PI = PoissonStructure.standard()
S = moyal(T2, PI, 6)
S4 = moyal(T2, PI, 4)


def test_constant_field_is_derivation():
    assert check_derivation(S, FormalDerivation.constant(DiffOperator.partial(T2, 0), 6)).passed


def test_non_poisson_field_fails_at_first_order():
    sp = moyal(R2, PI, 6)
    rep = check_derivation(sp, FormalDerivation.constant(DiffOperator.vector_field(R2, [x(1, 2), 0]), 6))
    assert not rep.passed and rep.failed_order == 1 and rep.witness


def test_quasi_inner_oracle():
    # (i/lambda) ad loses one order
    q = quasi_inner(S, E(1, 0)).apply(E(0, 1))
    assert q.order == 5
    zero = AlgebraElement.zero(T2)
    assert q == FormalSeries([E(1, 1), zero, E(1, 1) * Fraction(-1, 24), zero, E(1, 1) * Fraction(1, 1920), zero], 5)


def test_delta_of_constant_form():
    d = delta_one_form(S, ClosedOneForm(T2, [1, 0]))
    assert d.stages[1] == DiffOperator.partial(T2, 1, I)
    assert all(not st for k, st in enumerate(d.stages) if k != 1)


def test_inner_form_of_torus_unit():
    res = inner_to_one_form(S, E(1, 0))
    assert res.forms[0].constant == (I, 0)
    assert res.integral and res.higher_exact and res.verified


def test_inner_form_of_deformed_unit_is_exact():
    res = inner_to_one_form(S, FormalSeries([const(T2, 1), E(1, 1)], 6))
    assert all(f.is_exact() for f in res.forms)
    assert res.verified


def test_exponential_of_delta_matches_ad():
    res = inner_to_one_form(S4, E(0, 1))
    assert delta_one_form(S4, res.forms).exponential() == inner_automorphism(S4, E(0, 1))


@given(trig_elements(max_terms=2, radius=1))
def test_quasi_inner_are_derivations(h):
    assert check_derivation(S4, quasi_inner(S4, h)).passed


@given(trig_elements(max_terms=2, radius=1), trig_elements(max_terms=2, radius=1))
def test_derivation_bracket_is_derivation(a, b):
    D = quasi_inner(S4, a).bracket(rho_one(S4, DiffOperator.partial(T2, 1)))
    assert check_derivation(S4, D).passed


def test_rho_one_of_hamiltonian_is_quasi_inner():
    X = DiffOperator.vector_field(T2, [E(0, 1), 0])
    assert rho_one(S, X).stages == quasi_inner(S, E(0, 1, c=-I)).stages


def test_split_poisson_field():
    X = DiffOperator.partial(T2, 0) + DiffOperator.vector_field(T2, [E(0, 1), 0])
    Xc, H = split_poisson_field(X, PI)
    assert Xc == DiffOperator.partial(T2, 0)
    assert H


def test_outer_classes():
    oc = outer_class(S, FormalDerivation.constant(DiffOperator.partial(T2, 1), 6))
    assert not oc.inner and oc.field_classes[0] == (0, 1)
    assert outer_class(S, quasi_inner(S, E(1, 1))).inner


def test_outer_class_needs_torus():
    with pytest.raises(UnsupportedModel):
        outer_class(moyal(R2, PI, 2), FormalDerivation.constant(DiffOperator.partial(R2, 0), 2))


def test_central_elements():
    assert is_central(S, const(T2, 3))[0]
    ok, witness = is_central(S, E(1, 0))
    assert not ok and witness == E(0, 1)


def test_closed_forms():
    assert ClosedOneForm.exact(E(1, 1)).is_exact()
    assert not ClosedOneForm(T2, [1, 0]).is_exact()
    form = ClosedOneForm.from_components([E(1, 1) + 2, E(1, 1)])
    assert form.class_vector() == (2, 0)
    with pytest.raises(NotClosed):
        ClosedOneForm.from_components([E(0, 1), AlgebraElement.zero(T2)])
