"""Contravariant connections ``D_a(x) = {a, x} + alpha(a) x`` on the trivial line bundle."""

from __future__ import annotations

from dataclasses import dataclass

from .algebra import (
    ZERO,
    AlgebraElement,
    DiffOperator,
    GaussianRational,
    Generic,
    I,
    PoissonStructure,
    Trig,
    _invert,
    find_witness,
    generic,
    is_poisson_vector_field,
    poisson_bracket,
)
from .derivations import NotPoisson, UnsupportedModel, split_poisson_field
from .formal import STAR, BidiffCochain


class ContravariantConnection:
    """``D = d + alpha`` on ``X = A``; ``d_a(x) = {a, x}``."""

    def __init__(self, model, pi: PoissonStructure, alpha: DiffOperator | None = None, convention: str = STAR):
        self.model = model
        self.pi = pi
        self.alpha = alpha if alpha is not None else DiffOperator.zero(model)
        # 'algebraic' connections use the bracket i{a, x} (see semiclassical_limit)
        self.convention = convention

    @classmethod
    def canonical(cls, model, pi):
        return cls(model, pi)

    def apply(self, a: AlgebraElement, x: AlgebraElement) -> AlgebraElement:
        br = poisson_bracket(a, x, self.pi)
        if self.convention != STAR:
            br = br.scale(I)
        return br + self.alpha.apply(a) * x

    __call__ = apply

    def __add__(self, alpha: DiffOperator):
        return ContravariantConnection(self.model, self.pi, self.alpha + alpha, self.convention)

    def __sub__(self, other):
        if isinstance(other, ContravariantConnection):
            return self.alpha - other.alpha
        return ContravariantConnection(self.model, self.pi, self.alpha - other, self.convention)

    def __eq__(self, other):
        return (
            isinstance(other, ContravariantConnection)
            and self.pi == other.pi
            and self.convention == other.convention
            and self.alpha == other.alpha
        )

    __hash__ = None

    def __repr__(self):
        d = "d" if self.convention == STAR else "d_alg"
        return f"{d} + ({self.alpha})" if self.alpha else d


@dataclass
class AxiomReport:
    leibniz_first: bool
    leibniz_second: bool
    witness_first: tuple | None = None
    witness_second: tuple | None = None

    @property
    def passed(self):
        return self.leibniz_first and self.leibniz_second

    def to_json(self):
        return {
            "status": "pass" if self.passed else "fail",
            "axiom_i": self.leibniz_first,
            "axiom_ii": self.leibniz_second,
            "witness_i": [str(w) for w in self.witness_first] if self.witness_first else None,
            "witness_ii": [str(w) for w in self.witness_second] if self.witness_second else None,
        }


def check_connection_axioms(D: ContravariantConnection, pi: PoissonStructure | None = None) -> AxiomReport:
    """(i) ``D(ab,x) = D(a,x)b + D(b,x)a``; (ii) ``D(a,bx) = bD(a,x) + {a,b}x``."""
    if pi is not None and pi != D.pi:
        D = ContravariantConnection(D.model, pi, D.alpha, D.convention)
    a, b, x = (generic(D.model, k, 3) for k in range(3))
    first = D(a * b, x) - D(a, x) * b - D(b, x) * a
    br = poisson_bracket(a, b, D.pi)
    second = D(a, b * x) - b * D(a, x) - (br if D.convention == STAR else br.scale(I)) * x
    return AxiomReport(
        not first,
        not second,
        find_witness(first, 3) if first else None,
        find_witness(second, 3) if second else None,
    )


def curvature(D: ContravariantConnection, pi: PoissonStructure | None = None) -> BidiffCochain:
    """``curv(a,b) = {a, alpha(b)} - {b, alpha(a)} - alpha({a,b})``.

    This is ``D_a D_b - D_b D_a - D_{a,b}`` on the trivial bundle, read as a
    function; the cross-check against the operator form is in the tests.
    """
    pi = pi or D.pi
    a, b = generic(D.model, 0, 2), generic(D.model, 1, 2)
    al = D.alpha
    value = poisson_bracket(a, al(b), pi) - poisson_bracket(b, al(a), pi) - al(poisson_bracket(a, b, pi))
    return BidiffCochain.from_generic(D.model, value) if value else BidiffCochain(D.model)


def curvature_from_operators(D: ContravariantConnection) -> BidiffCochain:
    """``D_a D_b - D_b D_a - D_{a,b}`` evaluated on a generic ``x`` and divided by it."""
    a, b, x = (generic(D.model, k, 3) for k in range(3))
    value = D(a, D(b, x)) - D(b, D(a, x)) - D(poisson_bracket(a, b, D.pi), x)
    dim = D.model.dim
    terms = {}
    for (bkey, mask, z), c in value.terms.items():
        if mask != 0b111 or any(z[2 * dim:]):
            raise ArithmeticError("curvature is not a multiplication operator")
        terms[(bkey, 0b11, z[: 2 * dim])] = c
    stripped = AlgebraElement(Generic(D.model, 2), terms)
    return BidiffCochain.from_generic(D.model, stripped)


def is_poisson_derivation(alpha: DiffOperator, pi: PoissonStructure) -> bool:
    ok, _ = is_poisson_vector_field(alpha, pi)
    return ok


def _lattice_coordinates(alpha: DiffOperator, pi: PoissonStructure):
    """Solve ``alpha = i * pi^T k`` for ``k`` (constant fields only)."""
    comps = alpha.components()
    if any(not c.is_constant() for c in comps):
        return None
    w = [c.constant_part() for c in comps]
    inv = _invert([list(r) for r in zip(*pi.matrix)])
    n = len(w)
    return [sum((inv[j][k] * w[k] for k in range(n)), ZERO) * (-I) for j in range(n)]


def integral_witness(alpha: DiffOperator, pi: PoissonStructure):
    """A unit ``u`` with ``u^{-1}{u, .} = alpha``, or ``None``."""
    model = alpha.model
    if alpha and not is_poisson_derivation(alpha, pi):
        raise NotPoisson(f"{alpha} is not a Poisson derivation")
    if not alpha:
        return AlgebraElement.const(model, 1)
    if not isinstance(model, Trig):
        return None
    if not pi.is_symplectic():
        raise UnsupportedModel("lattice membership is decided for symplectic structures")
    k = _lattice_coordinates(alpha, pi)
    if k is None or any(c.im != 0 or c.re.denominator != 1 for c in k):
        return None
    u = AlgebraElement.monomial(model, tuple(int(c.re) for c in k))
    f = generic(model, 0, 1)
    assert u.invert() * poisson_bracket(u, f, pi) == alpha(f)
    return u


def integral_derivation(u: AlgebraElement, pi: PoissonStructure) -> DiffOperator:
    """``u^{-1}{u, .}``."""
    f = generic(u.model, 0, 1)
    return DiffOperator.from_generic(u.model, u.invert() * poisson_bracket(u, f, pi))


@dataclass(frozen=True)
class ConnectionClass:
    """``i k`` for the harmonic part ``alpha = i pi^T k``, reduced modulo ``i Z^m``.

    Integral connections (those with a unit witness) land on zero.
    """

    coords: tuple

    def is_zero(self):
        return not any(self.coords)

    def to_json(self):
        return [str(c) for c in self.coords]


def _reduce_mod_i(c: GaussianRational) -> GaussianRational:
    return GaussianRational(c.re, c.im - (c.im.numerator // c.im.denominator))


def connection_class(D: ContravariantConnection, pi: PoissonStructure | None = None) -> ConnectionClass:
    pi = pi or D.pi
    if not isinstance(D.model, Trig) or not pi.is_symplectic():
        raise UnsupportedModel("connection classes are computed on the symplectic torus")
    if D.alpha and not is_poisson_derivation(D.alpha, pi):
        raise NotPoisson("curvature differs from that of d")
    Xc, _ = split_poisson_field(D.alpha, pi) if D.alpha else (DiffOperator.zero(D.model), None)
    k = _lattice_coordinates(Xc, pi)
    return ConnectionClass(tuple(_reduce_mod_i(c * I) for c in k))


def isomorphism_witness(D1: ContravariantConnection, D2: ContravariantConnection):
    """A unit ``u`` with ``u * D2_a(x) = D1_a(u x)``, or ``None`` if none exists in the algebra."""
    beta = D2.alpha - D1.alpha
    if not beta:
        return AlgebraElement.const(D1.model, 1)
    _, H = split_poisson_field(beta, D1.pi)
    if H:
        return None  # the unit would be exp(H), outside the trig algebra
    v = integral_witness(beta, D1.pi)
    if v is None:
        return None
    u = v.invert()
    a, x = generic(D1.model, 0, 2), generic(D1.model, 1, 2)
    assert u * D2(a, x) == D1(a, u * x)
    return u
