"""Bimodule deformations of the trivial module ``X = A`` and their semiclassical limits."""

from __future__ import annotations

from dataclasses import dataclass, field

from .algebra import (
    AlgebraElement,
    DiffOperator,
    Generic,
    I,
    Poly,
    Trig,
    find_witness,
    poisson_bracket,
)
from .connections import ContravariantConnection, is_poisson_derivation
from .derivations import NotDecomposable, UnsupportedModel, rho_one
from .formal import (
    STAR,
    BidiffCochain,
    Equivalence,
    FirstOrderMismatch,
    FormalSeries,
    StarProduct,
    extract_poisson,
    generic_series,
    twist_by_equivalence,
)


class NotQuantizable(ValueError):
    pass


class NotAnEquivalence(ValueError):
    pass


def _act(cochains, order, u: FormalSeries, v: FormalSeries) -> FormalSeries:
    """``sum lambda^r R_r(u, v)`` with ``R_0`` the plain product."""
    n = min(u.order, v.order, order)
    out = []
    for k in range(n + 1):
        acc = None
        for r in range(k + 1):
            for a in range(k - r + 1):
                b = k - r - a
                if not u[a] or not v[b]:
                    continue
                term = u[a] * v[b] if r == 0 else cochains[r - 1].apply(u[a], v[b])
                if term:
                    acc = term if acc is None else acc + term
        if acc is None:
            acc = (u[0] - u[0]) if isinstance(u.model, Generic) else (v[0] - v[0])
        out.append(acc)
    return FormalSeries(out)


class BimoduleDeformation:
    """Left action ``a .' x = sum lambda^r R'_r(a, x)`` over ``star_left`` and
    right action ``x . a = sum lambda^r R_r(x, a)`` over ``star_right``."""

    def __init__(self, star_left: StarProduct, star_right: StarProduct,
                 left: list[BidiffCochain], right: list[BidiffCochain], note: str = ""):
        self.star_left = star_left
        self.star_right = star_right
        self.order = min(star_left.order, star_right.order)
        model = star_right.model
        self.left = (list(left) + [BidiffCochain(model)] * self.order)[: self.order]
        self.right = (list(right) + [BidiffCochain(model)] * self.order)[: self.order]
        self.note = note

    @property
    def model(self):
        return self.star_right.model

    def left_action(self, a, x) -> FormalSeries:
        a, x = self.star_left._series(a), self.star_left._series(x)
        return _act(self.left, self.order, a, x)

    def right_action(self, x, a) -> FormalSeries:
        x, a = self.star_right._series(x), self.star_right._series(a)
        return _act(self.right, self.order, x, a)


def regular_bimodule(s: StarProduct) -> BimoduleDeformation:
    return BimoduleDeformation(s, s, s.cochains, s.cochains, "regular")


def equivalence_bimodule(s: StarProduct, T: Equivalence) -> BimoduleDeformation:
    """``A`` as a bimodule from ``s' = twist(s, T)`` to ``s``, transported along ``T``.

    ``a .' x = T(T^{-1}a * T^{-1}x)`` and ``x . b = T(T^{-1}x * b)``.
    """
    left_star = twist_by_equivalence(s, T)
    u, v = generic_series(s.model, 2, s.order)
    ti = T.apply_inverse
    lim = T.apply(s.multiply(ti(u), ti(v)))
    rim = T.apply(s.multiply(ti(u), v))
    n = min(s.order, T.order)
    left = [BidiffCochain.from_generic(s.model, lim[r]) for r in range(1, n + 1)]
    right = [BidiffCochain.from_generic(s.model, rim[r]) for r in range(1, n + 1)]
    return BimoduleDeformation(left_star, s, left, right, "transported")


@dataclass
class RelationReport:
    failures: dict = field(default_factory=dict)  # relation -> (order, witness)
    checked_order: int = 0

    @property
    def passed(self):
        return not self.failures

    def to_json(self):
        return {
            "status": "pass" if self.passed else "fail",
            "checked_order": self.checked_order,
            "failures": {
                k: {"order": r, "witness": [str(w) for w in wit] if wit else None}
                for k, (r, wit) in sorted(self.failures.items())
            },
        }


def check_bimodule_relations(B: BimoduleDeformation) -> RelationReport:
    a1, a2, x = generic_series(B.model, 3, B.order)
    sl, sr = B.star_left, B.star_right
    pairs = {
        "rel1": (B.left_action(sl.multiply(a1, a2), x), B.left_action(a1, B.left_action(a2, x))),
        "rel2": (B.right_action(x, sr.multiply(a1, a2)), B.right_action(B.right_action(x, a1), a2)),
        "rel3": (B.right_action(B.left_action(a1, x), a2), B.left_action(a1, B.right_action(x, a2))),
    }
    report = RelationReport(checked_order=B.order)
    for name, (lhs, rhs) in pairs.items():
        r = lhs.first_difference(rhs)
        if r is not None:
            report.failures[name] = (r, find_witness(lhs[r] - rhs[r], 3))
    return report


def semiclassical_limit(B: BimoduleDeformation, convention: str = STAR) -> ContravariantConnection:
    """``D(a, x) = (1/i)(R'_1(a, x) - R_1(x, a))``, normalized so the regular bimodule gives ``d``.

    With ``convention='algebraic'`` the ``1/i`` is dropped: the bracket becomes
    ``C_1(a, x) - C_1(x, a) = i{a, x}`` and ``alpha`` is ``i`` times the star one.
    """
    if B.order < 1:
        raise ValueError("semiclassical limit needs first-order data")
    if B.star_left.cochain(1) != B.star_right.cochain(1):
        raise FirstOrderMismatch("semiclassical limit requires C_1 = C_1'")
    pi = extract_poisson(B.star_right)
    model = B.model
    a, x = (g[0] for g in generic_series(model, 2, 0))
    raw = B.left[0].apply(a, x) - B.right[0].apply(x, a)
    if convention == STAR:
        rest = raw.scale(-I) - poisson_bracket(a, x, pi)
    else:
        rest = raw - poisson_bracket(a, x, pi).scale(I)
    return ContravariantConnection(model, pi, _multiplication_part(model, rest), convention)


def _multiplication_part(model, value) -> DiffOperator:
    """Read ``alpha`` off ``alpha(a) * x`` on generic ``(a, x)``."""
    dim = model.dim
    terms = {}
    for (bkey, mask, z), c in value.terms.items():
        if any(z[dim:]):
            raise ValueError("first-order data does not define a contravariant connection")
        terms[(bkey, 1, z[:dim])] = c
    return DiffOperator.from_generic(model, AlgebraElement(Generic(model, 1), terms))


def deform_in_direction(s: StarProduct, D: ContravariantConnection) -> BimoduleDeformation:
    """Right action ``x . a = x * exp(lambda * rho_1(-i alpha))(a)``, left action ``*``.

    The factor ``-i`` is what makes ``semiclassical_limit`` return ``D``.
    """
    alpha = D.alpha
    if alpha and not is_poisson_derivation(alpha, D.pi):
        raise NotQuantizable(f"{alpha} is not a Poisson derivation")
    if not alpha:
        return regular_bimodule(s)
    try:
        deriv = rho_one(s, alpha * (-I))
    except (NotDecomposable, ValueError) as exc:
        raise NotQuantizable(str(exc)) from exc
    T = Equivalence.exp(s.model, deriv.stages, s.order)
    x, a = generic_series(s, 2, s.order)
    image = s.multiply(x, T.apply(a))
    right = [BidiffCochain.from_generic(s.model, image[r]) for r in range(1, s.order + 1)]
    return BimoduleDeformation(s, s, s.cochains, right, f"direction {alpha}")


def twist_bimodule(B: BimoduleDeformation, T: Equivalence) -> BimoduleDeformation:
    """Left action pulled back along a self-equivalence: ``a .^ x = T^{-1}(a) .' x``."""
    if not T.is_self_equivalence(B.star_left):
        raise NotAnEquivalence("T is not a self-equivalence of the left product")
    a, x = generic_series(B.model, 2, B.order)
    image = B.left_action(T.apply_inverse(a), x)
    left = [BidiffCochain.from_generic(B.model, image[r]) for r in range(1, B.order + 1)]
    return BimoduleDeformation(B.star_left, B.star_right, left, B.right, f"twist({B.note})")


def twist_shift(T: Equivalence, convention: str = STAR) -> DiffOperator:
    """``S(twist(B, T)) - S(B)``: ``-T_1`` algebraically, ``i T_1`` in star units."""
    T1 = T.stages[0] if T.stages else DiffOperator.zero(T.model)
    return T1 * (-1) if convention != STAR else T1 * I


@dataclass
class ModuliDescriptor:
    dimensions: list
    lattice_rank: int | None
    order: int

    def to_json(self):
        return {"dimensions": self.dimensions, "lattice_rank": self.lattice_rank, "order": self.order}


def moduli_descriptor(s: StarProduct, D: ContravariantConnection | None = None) -> ModuliDescriptor:
    """Per-order dimension of ``H^1_pi``: the bimodule deformations in a fixed direction."""
    pi = extract_poisson(s)
    if not pi.is_symplectic():
        raise UnsupportedModel("moduli are described for symplectic structures")
    if isinstance(s.model, Trig):
        dim = s.model.dim
    elif isinstance(s.model, Poly):
        dim = 0
    else:
        raise UnsupportedModel(str(s.model))
    return ModuliDescriptor([dim] * (s.order + 1), None, s.order)
