import pytest
from hypothesis import given, settings
from strategies import small_fractions, trig_elements

from dqw.algebra import (
    DiffOperator,
    E,
    I,
    PoissonStructure,
    Poly,
    Trig,
    const,
    hamiltonian_field,
)
from dqw.bimodule import (
    BimoduleDeformation,
    NotAnEquivalence,
    NotQuantizable,
    check_bimodule_relations,
    deform_in_direction,
    equivalence_bimodule,
    moduli_descriptor,
    regular_bimodule,
    semiclassical_limit,
    twist_bimodule,
    twist_shift,
)
from dqw.connections import ContravariantConnection, curvature
from dqw.derivations import UnsupportedModel, rho_one
from dqw.formal import (
    ALGEBRAIC,
    BidiffCochain,
    Equivalence,
    FirstOrderMismatch,
    compute_tau,
    moyal,
)

T2 = Trig(2)
PI = PoissonStructure.standard()
S = moyal(T2, PI, 4)
S3 = moyal(T2, PI, 3)
d = ContravariantConnection(T2, PI)


def test_regular_bimodule_maps_to_d():
    R = regular_bimodule(S)
    assert check_bimodule_relations(R).passed
    assert semiclassical_limit(R) == d


def test_broken_right_action_fails_second_relation():
    bad_r1 = S.cochain(1) + BidiffCochain(T2, {((0, 0), (0, 0)): 1})
    B = BimoduleDeformation(S, S, S.cochains, [bad_r1] + S.cochains[1:])
    rep = check_bimodule_relations(B)
    assert "rel2" in rep.failures and rep.failures["rel2"][0] == 1


@pytest.mark.parametrize(
    "alpha",
    [DiffOperator.partial(T2, 1, I), DiffOperator.vector_field(T2, [E(0, 1), 1])],
    ids=["constant", "with-hamiltonian-part"],
)
def test_deform_in_direction_round_trip(alpha):
    B = deform_in_direction(S, d + alpha)
    assert check_bimodule_relations(B).passed
    assert semiclassical_limit(B) == d + alpha


def test_non_poisson_direction_is_rejected():
    with pytest.raises(NotQuantizable):
        deform_in_direction(S, d + DiffOperator.vector_field(T2, [E(1, 0), 0]))


def test_twist_example_in_algebraic_units():
    T = rho_one(S, DiffOperator.partial(T2, 1)).shift(1).exponential()
    Bt = twist_bimodule(regular_bimodule(S), T)
    assert check_bimodule_relations(Bt).passed
    S_alg = semiclassical_limit(Bt, ALGEBRAIC)
    assert S_alg.alpha == DiffOperator.partial(T2, 1, -1)
    assert twist_bimodule(Bt, T.inverse()).left == regular_bimodule(S).left


def random_equivalence(s, h, a, b):
    X = hamiltonian_field(h, PI) + DiffOperator.vector_field(T2, [a, b])
    return rho_one(s, X).shift(1).exponential()


@settings(max_examples=5)
@given(trig_elements(max_terms=2, radius=1), small_fractions, small_fractions)
def test_twist_identity_both_units(h, a, b):
    T = random_equivalence(S3, h, a, b)
    for B in (regular_bimodule(S3), deform_in_direction(S3, d + DiffOperator.partial(T2, 0, I))):
        Bt = twist_bimodule(B, T)
        assert semiclassical_limit(Bt, ALGEBRAIC) - semiclassical_limit(B, ALGEBRAIC) == twist_shift(T, ALGEBRAIC)
        assert semiclassical_limit(Bt) - semiclassical_limit(B) == twist_shift(T)


def test_twist_requires_self_equivalence():
    T = Equivalence.exp(T2, [DiffOperator.partial(T2, 1), DiffOperator(T2, {(2, 0): const(T2, 1)})], 3)
    with pytest.raises(NotAnEquivalence):
        twist_bimodule(regular_bimodule(S3), T)


def test_tau_sector_curvature():
    T = Equivalence.exp(T2, [DiffOperator.partial(T2, 1), DiffOperator(T2, {(2, 0): const(T2, 1)})], 3)
    B = equivalence_bimodule(S3, T)
    assert check_bimodule_relations(B).passed
    tau = compute_tau(B.star_left, S3)
    assert tau == BidiffCochain(T2)
    assert curvature(semiclassical_limit(B)) + tau == BidiffCochain(T2)


def test_first_order_mismatch():
    other = moyal(T2, PoissonStructure([[0, 2], [-2, 0]]), 2)
    s2 = moyal(T2, PI, 2)
    with pytest.raises(FirstOrderMismatch):
        semiclassical_limit(BimoduleDeformation(other, s2, other.cochains, s2.cochains))


def test_moduli_descriptors():
    assert moduli_descriptor(S).dimensions == [2] * 5
    assert moduli_descriptor(S, d + DiffOperator.partial(T2, 1, I)).dimensions == [2] * 5
    assert moduli_descriptor(moyal(Poly(2), PI, 3)).dimensions == [0] * 4
    with pytest.raises(UnsupportedModel):
        moduli_descriptor(moyal(Trig(2), PoissonStructure([[0, 0], [0, 0]]), 2))
