from fractions import Fraction

import pytest
from hypothesis import given
from hypothesis import strategies as st
from strategies import trig_elements

from dqw.algebra import AlgebraElement, E, I, PoissonStructure, Poly, Trig, const, x
from dqw.formal import FormalSeries, moyal
from dqw.starexp import (
    ExpArgument,
    NonzeroClassicalPart,
    NotNormalized,
    adjoint,
    check_exp_identities,
    exp_ad,
    inner_automorphism,
    star_exp,
    star_log,
)

T2, R2 = Trig(2), Poly(2)
PI = PoissonStructure.standard()
S6 = moyal(T2, PI, 6)
Z = AlgebraElement.zero(T2)


def lam(a, order=6):
    return ExpArgument(FormalSeries([Z, a], order))


def test_exp_of_lambda_mode_is_exponential_series():
    u = star_exp(S6, lam(E(1, 0)))
    assert u == FormalSeries([E(k, 0).scale(Fraction(1, _fact(k))) for k in range(7)], 6)


def _fact(k):
    out = 1
    for j in range(2, k + 1):
        out *= j
    return out


def test_adjoint_oracle():
    ad = adjoint(S6, E(1, 0), E(0, 1))
    assert ad == FormalSeries.exp_scalar(T2, -I, 6).cmul(FormalSeries.of(E(0, 1), 6))


def test_inner_automorphism_first_order():
    T = inner_automorphism(S6, E(1, 0))
    assert str(T.stages[0]) == "(-1)*d2"


def test_log_series_on_plane():
    sp = moyal(R2, PI, 6)
    H = star_log(sp, FormalSeries([const(R2, 1), x(1, 2)], 6))
    assert H.h == FormalSeries([AlgebraElement.zero(R2)] + [x(1, 2) ** k * Fraction((-1) ** (k + 1), k) for k in range(1, 7)], 6)


def test_exp_rejects_nonzero_classical_part():
    with pytest.raises(NonzeroClassicalPart):
        ExpArgument(FormalSeries([E(1, 0)], 3))


def test_log_rejects_unnormalized_units():
    with pytest.raises(NotNormalized):
        star_log(S6, FormalSeries.of(E(1, 0), 6))


def test_commuting_and_noncommuting_pairs():
    rep = check_exp_identities(S6, lam(E(1, 0)), lam(E(2, 0)))
    assert rep.passed and rep.commutator_vanishes and rep.commuting_additivity
    rep = check_exp_identities(S6, lam(E(1, 0)), lam(E(0, 1)))
    assert rep.passed and rep.commutator_vanishes is False and rep.commuting_additivity is None


S4 = moyal(T2, PI, 4)


@given(trig_elements(max_terms=2, radius=1), trig_elements(max_terms=2, radius=1))
def test_exp_identities_hold_for_random_arguments(h1, h2):
    H = ExpArgument(FormalSeries([Z, h1, h2], 4))
    assert check_exp_identities(S4, H).passed


@given(trig_elements(max_terms=2, radius=1), st.sampled_from([Fraction(1, 2), Fraction(-1), Fraction(2, 3)]))
def test_log_inverts_exp(h, t):
    H = ExpArgument(FormalSeries([Z, h], 4))
    assert star_log(S4, star_exp(S4, H, t)) == H.scale(t)


@given(trig_elements(max_terms=2, radius=1))
def test_exp_ad_matches_adjoint(h):
    H = ExpArgument(FormalSeries([Z, h], 4))
    f = FormalSeries.of(E(1, 1), 4)
    assert exp_ad(S4, H, f) == adjoint(S4, star_exp(S4, H), f)
