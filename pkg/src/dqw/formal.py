"""Truncated formal series in lambda and star products built from bidifferential cochains."""

from __future__ import annotations

import math
from collections.abc import Callable, Sequence
from dataclasses import dataclass
from fractions import Fraction

from .algebra import (
    ONE,
    ZERO,
    AlgebraElement,
    DiffOperator,
    GaussianRational,
    Generic,
    I,
    ModelMismatch,
    PoissonStructure,
    Trig,
    find_witness,
    generic,
    scalar,
)

DEFAULT_ORDER = 6

STAR = "star"
ALGEBRAIC = "algebraic"


class NonConstantBracket(ValueError):
    pass


class FirstOrderMismatch(ValueError):
    pass


class FormalSeries:
    """``a_0 + a_1 lambda + ... + a_N lambda^N`` with algebra coefficients."""

    __slots__ = ("coeffs",)

    def __init__(self, coeffs: Sequence[AlgebraElement], order: int | None = None):
        coeffs = list(coeffs)
        if not coeffs:
            raise ValueError("a series needs at least one coefficient")
        model = coeffs[0].model
        for c in coeffs[1:]:
            if isinstance(c.model, Generic) and not isinstance(model, Generic):
                model = c.model
        coeffs = [c.lift(model) if c.model != model else c for c in coeffs]
        if order is not None:
            coeffs = coeffs[: order + 1]
            coeffs += [AlgebraElement.zero(model)] * (order + 1 - len(coeffs))
        self.coeffs = coeffs

    @classmethod
    def of(cls, a: AlgebraElement, order: int = DEFAULT_ORDER) -> FormalSeries:
        return cls([a], order)

    @classmethod
    def zero(cls, model, order: int = DEFAULT_ORDER):
        return cls([AlgebraElement.zero(model)], order)

    @classmethod
    def one(cls, model, order: int = DEFAULT_ORDER):
        return cls([AlgebraElement.const(model, 1)], order)

    @classmethod
    def scalars(cls, model, values, order: int | None = None):
        """Series with constant coefficients ``values[r]``."""
        return cls([AlgebraElement.const(model, v) for v in values], order)

    @classmethod
    def exp_scalar(cls, model, c, order: int = DEFAULT_ORDER):
        """``exp(c*lambda)`` truncated; the scalar phases of quantum-torus products."""
        c = scalar(c)
        return cls.scalars(model, [c ** r * Fraction(1, math.factorial(r)) for r in range(order + 1)])

    @property
    def order(self) -> int:
        return len(self.coeffs) - 1

    @property
    def model(self):
        return self.coeffs[0].model

    def __getitem__(self, r):
        return self.coeffs[r]

    def __iter__(self):
        return iter(self.coeffs)

    def __len__(self):
        return len(self.coeffs)

    def classical_limit(self) -> AlgebraElement:
        return self.coeffs[0]

    def truncate(self, order: int) -> FormalSeries:
        return FormalSeries(self.coeffs, order)

    def _promote(self, other):
        if isinstance(other, FormalSeries):
            return other
        if isinstance(other, AlgebraElement):
            return FormalSeries.of(other, self.order)
        if isinstance(other, (int, Fraction, GaussianRational)):
            return FormalSeries.of(AlgebraElement.const(self.model, other), self.order)
        return None

    def __add__(self, other):
        o = self._promote(other)
        if o is None:
            return NotImplemented
        n = min(self.order, o.order)
        return FormalSeries([a + b for a, b in zip(self.coeffs[: n + 1], o.coeffs[: n + 1])])

    __radd__ = __add__

    def __neg__(self):
        return FormalSeries([-a for a in self.coeffs])

    def __sub__(self, other):
        o = self._promote(other)
        if o is None:
            return NotImplemented
        return self + (-o)

    def __rsub__(self, other):
        return (-self) + other

    def scale(self, c):
        return FormalSeries([a.scale(c) for a in self.coeffs])

    def __mul__(self, c):
        if isinstance(c, (int, Fraction, GaussianRational)):
            return self.scale(c)
        if isinstance(c, AlgebraElement):
            return FormalSeries([a * c for a in self.coeffs])
        return NotImplemented

    __rmul__ = __mul__

    def shift(self, k: int = 1) -> FormalSeries:
        """Multiply by ``lambda^k``, keeping the truncation order."""
        z = AlgebraElement.zero(self.model)
        return FormalSeries([z] * k + self.coeffs[: len(self.coeffs) - k])

    def unshift(self, k: int = 1) -> FormalSeries:
        """Divide by ``lambda^k``; the top ``k`` orders are lost."""
        if any(self.coeffs[:k]):
            raise ValueError(f"series is not divisible by lambda^{k}")
        return FormalSeries(self.coeffs[k:])

    def cmul(self, other: FormalSeries) -> FormalSeries:
        """Undeformed (pointwise) Cauchy product."""
        n = min(self.order, other.order)
        out = []
        for k in range(n + 1):
            acc = AlgebraElement.zero(self.model)
            for a in range(k + 1):
                if self.coeffs[a] and other.coeffs[k - a]:
                    acc = acc + self.coeffs[a] * other.coeffs[k - a]
            out.append(acc)
        return FormalSeries(out)

    def map(self, fn) -> FormalSeries:
        return FormalSeries([fn(a) for a in self.coeffs])

    def __eq__(self, other):
        o = self._promote(other)
        if o is None:
            return NotImplemented
        n = min(self.order, o.order)
        return all(a == b for a, b in zip(self.coeffs[: n + 1], o.coeffs[: n + 1]))

    __hash__ = None

    def __bool__(self):
        return any(self.coeffs)

    def first_difference(self, other) -> int | None:
        o = self._promote(other)
        n = min(self.order, o.order)
        for r in range(n + 1):
            if self.coeffs[r] != o.coeffs[r]:
                return r
        return None

    def __str__(self):
        parts = []
        for r, a in enumerate(self.coeffs):
            if not a:
                continue
            s = str(a)
            if r == 0:
                parts.append(s)
            else:
                lam = "L" if r == 1 else f"L^{r}"
                parts.append(f"({s})*{lam}")
        return " + ".join(parts) if parts else "0"

    def __repr__(self):
        return f"FormalSeries<{self}>"


# --------------------------------------------------------------------------
# cochains


def _derivative_cache(f: AlgebraElement):
    cache = {}

    def get(alpha):
        d = cache.get(alpha)
        if d is None:
            j = next((j for j, e in enumerate(alpha) if e), None)
            if j is None:
                d = f
            else:
                smaller = list(alpha)
                smaller[j] -= 1
                prev = get(tuple(smaller))
                d = prev.derive(j) if prev else prev
            cache[alpha] = d
        return d

    return get


class BidiffCochain:
    """``(f, g) -> sum c_{L,R} * d^L f * d^R g``."""

    __slots__ = ("model", "terms")

    def __init__(self, model, terms=None):
        self.model = model
        clean = {}
        for (L, R), c in (terms or {}).items():
            L, R = tuple(L), tuple(R)
            if isinstance(c, (int, Fraction, GaussianRational)):
                c = AlgebraElement.const(model, c)
            if (L, R) in clean:
                c = clean[(L, R)] + c
            clean[(L, R)] = c
        self.terms = {k: v for k, v in clean.items() if v}

    @classmethod
    def from_generic(cls, base, image: AlgebraElement):
        """Read a cochain off its value on two generic exponentials ``(e_0, e_1)``."""
        dim = base.dim
        raw: dict = {}
        for (bkey, mask, z), c in image.terms.items():
            if mask != 0b11:
                raise ValueError("image is not bilinear in the generic slots")
            L, R = z[:dim], z[dim: 2 * dim]
            raw.setdefault((L, R), {})
            raw[(L, R)][bkey] = raw[(L, R)].get(bkey, ZERO) + c
        return cls(base, {lr: AlgebraElement(base, t) for lr, t in raw.items()})

    def apply(self, f: AlgebraElement, g: AlgebraElement) -> AlgebraElement:
        df = _derivative_cache(f)
        dg = _derivative_cache(g)
        model = f.model if isinstance(f.model, Generic) else g.model
        if isinstance(self.model, Generic):
            model = self.model
        out = AlgebraElement.zero(model)
        for (L, R), c in self.terms.items():
            a = df(L)
            if not a:
                continue
            b = dg(R)
            if not b:
                continue
            out = out + c * (a * b)
        return out

    __call__ = apply

    def transpose(self) -> BidiffCochain:
        return BidiffCochain(self.model, {(R, L): c for (L, R), c in self.terms.items()})

    def antisymmetrize(self) -> BidiffCochain:
        """``C(f,g) - C(g,f)``."""
        return self - self.transpose()

    def __add__(self, other):
        terms = dict(self.terms)
        for k, c in other.terms.items():
            terms[k] = terms[k] + c if k in terms else c
        return BidiffCochain(self.model, terms)

    def __neg__(self):
        return BidiffCochain(self.model, {k: -c for k, c in self.terms.items()})

    def __sub__(self, other):
        return self + (-other)

    def scale(self, c):
        return BidiffCochain(self.model, {k: v.scale(c) for k, v in self.terms.items()})

    def __eq__(self, other):
        if not isinstance(other, BidiffCochain):
            return NotImplemented
        return self.terms.keys() == other.terms.keys() and all(
            self.terms[k] == other.terms[k] for k in self.terms
        )

    __hash__ = None

    def __bool__(self):
        return bool(self.terms)

    def kills_constants(self) -> bool:
        zero = (0,) * self.model.dim
        return all(L != zero and R != zero for (L, R) in self.terms)

    def differential_order(self) -> int:
        return max((max(sum(L), sum(R)) for L, R in self.terms), default=0)

    def is_constant_coefficient(self) -> bool:
        return all(c.is_constant() for c in self.terms.values())

    def to_json(self):
        return [
            {"coeff": str(c), "left": list(L), "right": list(R)}
            for (L, R), c in sorted(self.terms.items())
        ]

    def __str__(self):
        if not self.terms:
            return "0"

        def d(alpha, name):
            s = "".join(f"d{j + 1}" * e for j, e in enumerate(alpha))
            return f"{s}{name}" if s else name

        parts = []
        for (L, R), c in sorted(self.terms.items()):
            parts.append(f"({c})*{d(L, 'f')}*{d(R, 'g')}")
        return " + ".join(parts)

    __repr__ = __str__


# --------------------------------------------------------------------------
# star products


class StarProduct:
    """``f * g = fg + sum_{r>=1} lambda^r C_r(f, g)`` truncated at ``order``."""

    def __init__(self, model, cochains: Sequence[BidiffCochain], order: int | None = None,
                 poisson: PoissonStructure | None = None, name: str = ""):
        self.model = model
        self.order = len(cochains) if order is None else order
        cochains = list(cochains)[: self.order]
        cochains += [BidiffCochain(model) for _ in range(self.order - len(cochains))]
        self.cochains = cochains
        self.poisson = poisson
        self.name = name

    def cochain(self, r: int) -> BidiffCochain:
        return self.cochains[r - 1]

    def is_unital(self) -> bool:
        return all(c.kills_constants() for c in self.cochains)

    def _series(self, f):
        if isinstance(f, FormalSeries):
            return f
        if isinstance(f, (int, Fraction, GaussianRational)):
            f = AlgebraElement.const(self.model, f)
        return FormalSeries.of(f, self.order)

    def multiply(self, f, g) -> FormalSeries:
        f, g = self._series(f), self._series(g)
        n = min(f.order, g.order, self.order)
        out = []
        for k in range(n + 1):
            acc = None
            for r in range(k + 1):
                for a in range(k - r + 1):
                    b = k - r - a
                    fa, gb = f.coeffs[a], g.coeffs[b]
                    if not fa or not gb:
                        continue
                    term = fa * gb if r == 0 else self.cochains[r - 1].apply(fa, gb)
                    if term:
                        acc = term if acc is None else acc + term
            if acc is None:
                acc = AlgebraElement.zero(f.model if isinstance(f.model, Generic) else g.model)
            out.append(acc)
        return FormalSeries(out)

    __call__ = multiply

    def commutator(self, f, g) -> FormalSeries:
        return self.multiply(f, g) - self.multiply(g, f)

    def with_cochains(self, cochains, name=None) -> StarProduct:
        return StarProduct(self.model, cochains, self.order, self.poisson, name or self.name)

    def __eq__(self, other):
        if not isinstance(other, StarProduct):
            return NotImplemented
        return self.model == other.model and self.order == other.order and all(
            a == b for a, b in zip(self.cochains, other.cochains)
        )

    __hash__ = None

    def __repr__(self):
        return f"StarProduct({self.name or 'custom'}, {self.model}, order={self.order})"


def star_multiply(s: StarProduct, f, g) -> FormalSeries:
    if isinstance(f, (FormalSeries, AlgebraElement)) and _model_of(f) not in (s.model,) and not isinstance(_model_of(f), Generic):
        raise ModelMismatch(f"{_model_of(f)} vs {s.model}")
    return s.multiply(f, g)


def _model_of(f):
    return f.model


def _constant_ops_mul(a: dict, b: dict) -> dict:
    out: dict = {}
    for (L1, R1), c1 in a.items():
        for (L2, R2), c2 in b.items():
            key = (tuple(x + y for x, y in zip(L1, L2)), tuple(x + y for x, y in zip(R1, R2)))
            out[key] = out.get(key, ZERO) + c1 * c2
    return {k: v for k, v in out.items() if v}


def moyal(model, poisson: PoissonStructure, order: int = DEFAULT_ORDER,
          corrections: Sequence[PoissonStructure] = ()) -> StarProduct:
    """Moyal-Weyl product ``exp((i lambda/2) pi_lambda^{ij} d_i (x) d_j)``.

    ``pi_lambda = poisson + lambda*corrections[0] + lambda^2*corrections[1] + ...``.
    """
    dim = model.dim
    if poisson.dim != dim:
        raise ValueError(f"Poisson structure of dim {poisson.dim} on {model}")
    half_i = GaussianRational(0, Fraction(1, 2))

    def unit(j):
        e = [0] * dim
        e[j] = 1
        return tuple(e)

    # X = sum_k lambda^{k+1} (i/2) pi_k ; stored as a list of constant operators by lambda-order
    X = [{} for _ in range(order + 1)]
    for k, p in enumerate([poisson, *corrections]):
        if k + 1 > order:
            break
        X[k + 1] = {(unit(i), unit(j)): half_i * v for i, j, v in p.entries()}
    total = [{} for _ in range(order + 1)]
    total[0] = {((0,) * dim, (0,) * dim): ONE}
    power = [dict(total[0])] + [{} for _ in range(order)]
    for n in range(1, order + 1):
        new = [{} for _ in range(order + 1)]
        for a in range(order + 1):
            if not power[a]:
                continue
            for b in range(1, order + 1 - a):
                if X[b]:
                    prod = _constant_ops_mul(power[a], X[b])
                    for key, v in prod.items():
                        new[a + b][key] = new[a + b].get(key, ZERO) + v
        power = new
        fact = Fraction(1, math.factorial(n))
        for r in range(order + 1):
            for key, v in power[r].items():
                total[r][key] = total[r].get(key, ZERO) + v * fact
    cochains = [BidiffCochain(model, total[r]) for r in range(1, order + 1)]
    name = "moyal" if not corrections else "moyal+corrections"
    return StarProduct(model, cochains, order, poisson, name)


def trivial_product(model, order: int = DEFAULT_ORDER) -> StarProduct:
    return StarProduct(model, [], order, PoissonStructure([[0] * model.dim for _ in range(model.dim)]), "trivial")


# --------------------------------------------------------------------------
# verification


@dataclass
class AssociativityReport:
    passed: bool
    checked_order: int
    failed_order: int | None = None
    witness: tuple | None = None

    def to_json(self):
        return {
            "status": "pass" if self.passed else "fail",
            "checked_order": self.checked_order,
            "failed_order": self.failed_order,
            "witness": [str(w) for w in self.witness] if self.witness else None,
        }


def generic_series(s_or_model, slots: int, order: int):
    model = s_or_model.model if isinstance(s_or_model, StarProduct) else s_or_model
    return [FormalSeries.of(generic(model, k, slots), order) for k in range(slots)]


def check_associativity(s: StarProduct) -> AssociativityReport:
    """Compare ``(f*g)*h`` and ``f*(g*h)`` on generic exponentials, order by order."""
    f, g, h = generic_series(s, 3, s.order)
    lhs = s.multiply(s.multiply(f, g), h)
    rhs = s.multiply(f, s.multiply(g, h))
    r = lhs.first_difference(rhs)
    if r is None:
        return AssociativityReport(True, s.order)
    witness = find_witness(lhs[r] - rhs[r], 3)
    return AssociativityReport(False, s.order, r, witness)


def check_unital(s: StarProduct) -> bool:
    e = generic_series(s, 1, s.order)[0]
    one = FormalSeries.one(s.model, s.order)
    return s.multiply(one, e) == e and s.multiply(e, one) == e


def extract_poisson(s: StarProduct, convention: str = STAR) -> PoissonStructure:
    """Bracket ``(1/i)(C_1(f,g) - C_1(g,f))``; with ``convention='algebraic'`` the 1/i is dropped."""
    dim = s.model.dim
    anti = s.cochain(1).antisymmetrize() if s.order >= 1 else BidiffCochain(s.model)
    factor = I.inverse() if convention == STAR else ONE
    mat = [[ZERO] * dim for _ in range(dim)]
    for (L, R), c in anti.terms.items():
        if sum(L) != 1 or sum(R) != 1:
            raise NonConstantBracket(f"antisymmetric part of C_1 has a term of order {L},{R}")
        if not c.is_constant():
            raise NonConstantBracket(f"coefficient {c} is not constant")
        v = c.constant_part() * factor
        mat[L.index(1)][R.index(1)] = v
    if any(not v.is_real() for row in mat for v in row):
        raise NonConstantBracket("bracket is not real in this convention")
    return PoissonStructure([[v.re for v in row] for row in mat])


def tau_from_cochains(s_prime: StarProduct, s: StarProduct) -> BidiffCochain:
    """``(C_2 - C_2')(a,b) - (C_2 - C_2')(b,a)``."""
    return (s.cochain(2) - s_prime.cochain(2)).antisymmetrize()


def tau_from_commutators(s_prime: StarProduct, s: StarProduct) -> BidiffCochain:
    """``lambda^{-2}([a,b]_* - [a,b]_*')`` at ``lambda = 0``."""
    order = min(s.order, s_prime.order, 2)
    a, b = generic_series(s, 2, order)
    diff = s.commutator(a, b) - s_prime.commutator(a, b)
    return BidiffCochain.from_generic(s.model, diff[2])


def compute_tau(s_prime: StarProduct, s: StarProduct) -> BidiffCochain:
    if s.order < 2 or s_prime.order < 2:
        raise ValueError("tau needs star products truncated at order >= 2")
    if s.cochain(1) != s_prime.cochain(1):
        raise FirstOrderMismatch("tau is only defined when C_1 = C_1'")
    tau = tau_from_cochains(s_prime, s)
    other = tau_from_commutators(s_prime, s)
    if tau != other:
        raise ArithmeticError("the two tau formulas disagree")
    return tau


# --------------------------------------------------------------------------
# equivalences


class Equivalence:
    """``T = id + sum_{r>=1} lambda^r T_r`` with differential-operator stages."""

    def __init__(self, model, stages: Sequence[DiffOperator], order: int | None = None):
        self.model = model
        self.order = len(stages) if order is None else order
        stages = list(stages)[: self.order]
        stages += [DiffOperator.zero(model) for _ in range(self.order - len(stages))]
        self.stages = stages

    @classmethod
    def identity(cls, model, order: int = DEFAULT_ORDER):
        return cls(model, [], order)

    @classmethod
    def from_map(cls, model, fn: Callable[[FormalSeries], FormalSeries], order: int):
        """Read ``T`` off its action on a generic exponential."""
        e = generic_series(model, 1, order)[0]
        image = fn(e)
        if DiffOperator.from_generic(model, image[0]) != DiffOperator.identity(model):
            raise ValueError("map does not reduce to the identity at lambda = 0")
        return cls(model, [DiffOperator.from_generic(model, image[r]) for r in range(1, image.order + 1)], order)

    @classmethod
    def exp(cls, model, derivation_stages: Sequence[DiffOperator], order: int):
        """``exp(lambda * D)`` with ``D = sum_j lambda^j D_j``."""
        def apply_D(f: FormalSeries) -> FormalSeries:
            out = []
            for n in range(f.order + 1):
                acc = AlgebraElement.zero(f.model)
                for j in range(min(n, len(derivation_stages) - 1) + 1):
                    if f.coeffs[n - j]:
                        acc = acc + derivation_stages[j].apply(f.coeffs[n - j])
                out.append(acc)
            return FormalSeries(out)

        def fn(f):
            total = f
            term = f
            for k in range(1, order + 1):
                term = apply_D(term).shift(1).scale(Fraction(1, k))
                if not term:
                    break
                total = total + term
            return total

        return cls.from_map(model, fn, order)

    def apply(self, f) -> FormalSeries:
        if isinstance(f, AlgebraElement):
            f = FormalSeries.of(f, self.order)
        n = min(f.order, self.order)
        out = []
        for k in range(n + 1):
            acc = f.coeffs[k]
            for r in range(1, k + 1):
                if self.stages[r - 1] and f.coeffs[k - r]:
                    acc = acc + self.stages[r - 1].apply(f.coeffs[k - r])
            out.append(acc)
        return FormalSeries(out)

    __call__ = apply

    def apply_inverse(self, f) -> FormalSeries:
        if isinstance(f, AlgebraElement):
            f = FormalSeries.of(f, self.order)
        n = min(f.order, self.order)
        g = []
        for k in range(n + 1):
            acc = f.coeffs[k]
            for r in range(1, k + 1):
                if self.stages[r - 1] and g[k - r]:
                    acc = acc - self.stages[r - 1].apply(g[k - r])
            g.append(acc)
        return FormalSeries(g)

    def inverse(self) -> Equivalence:
        return Equivalence.from_map(self.model, self.apply_inverse, self.order)

    def compose(self, other: Equivalence) -> Equivalence:
        """``self o other``."""
        return Equivalence.from_map(self.model, lambda f: self.apply(other.apply(f)),
                                    min(self.order, other.order))

    def kills_constants(self) -> bool:
        zero = (0,) * self.model.dim
        return all(zero not in t.terms for t in self.stages)

    def is_self_equivalence(self, s: StarProduct) -> bool:
        a, b = generic_series(s, 2, min(s.order, self.order))
        return self.apply(s.multiply(a, b)) == s.multiply(self.apply(a), self.apply(b))

    def __eq__(self, other):
        if not isinstance(other, Equivalence):
            return NotImplemented
        n = min(self.order, other.order)
        return all(a == b for a, b in zip(self.stages[:n], other.stages[:n]))

    __hash__ = None

    def __repr__(self):
        return "Equivalence(" + "; ".join(f"T{r + 1}={t}" for r, t in enumerate(self.stages) if t) + ")"


def twist_by_equivalence(s: StarProduct, T: Equivalence) -> StarProduct:
    """The product ``a *_T b = T(T^{-1}a * T^{-1}b)``."""
    order = min(s.order, T.order)
    a, b = generic_series(s, 2, order)
    image = T.apply(s.multiply(T.apply_inverse(a), T.apply_inverse(b)))
    cochains = [BidiffCochain.from_generic(s.model, image[r]) for r in range(1, order + 1)]
    return StarProduct(s.model, cochains, order, s.poisson, f"twist({s.name})")


def equivalence_first_order(T: Equivalence) -> DiffOperator:
    return T.stages[0] if T.stages else DiffOperator.zero(T.model)


# --------------------------------------------------------------------------
# automorphisms


def _matmul(a, b):
    return [[sum(a[i][k] * b[k][j] for k in range(len(b))) for j in range(len(b[0]))] for i in range(len(a))]


def _det(m) -> Fraction:
    from .algebra import _invert  # noqa: F401  (shared elimination)
    m = [list(map(Fraction, r)) for r in m]
    n = len(m)
    det = Fraction(1)
    for c in range(n):
        p = next((r for r in range(c, n) if m[r][c]), None)
        if p is None:
            return Fraction(0)
        if p != c:
            m[c], m[p] = m[p], m[c]
            det = -det
        det *= m[c][c]
        for r in range(c + 1, n):
            f = m[r][c] / m[c][c]
            m[r] = [x - f * y for x, y in zip(m[r], m[c])]
    return det


class AutomorphismSeed:
    """Linear automorphism ``psi(f) = f o M`` (torus: ``E[k] -> E[M^T k]``)."""

    def __init__(self, model, matrix):
        self.model = model
        self.matrix = tuple(tuple(Fraction(v) for v in row) for row in matrix)
        n = model.dim
        if len(self.matrix) != n or any(len(r) != n for r in self.matrix):
            raise ValueError(f"automorphism matrix must be {n}x{n}")
        det = _det(self.matrix)
        if isinstance(model, Trig):
            if any(v.denominator != 1 for r in self.matrix for v in r) or abs(det) != 1:
                raise ValueError("torus automorphisms need an integer matrix with det +-1")
        elif det == 0:
            raise ValueError("singular matrix")

    def inverse(self) -> AutomorphismSeed:
        from .algebra import _invert
        return AutomorphismSeed(self.model, _invert(self.matrix))

    def compose(self, other: AutomorphismSeed) -> AutomorphismSeed:
        """``self o other`` as algebra maps: ``f -> (f o M_other) o M_self``."""
        return AutomorphismSeed(self.model, _matmul(other.matrix, self.matrix))

    def apply(self, f: AlgebraElement) -> AlgebraElement:
        M = self.matrix
        n = self.model.dim
        if isinstance(self.model, Trig):
            return f.map_keys(lambda k: tuple(int(sum(M[i][j] * k[i] for i in range(n))) for j in range(n)))
        out = AlgebraElement.zero(self.model)
        lin = []
        for j in range(n):
            comp = AlgebraElement.zero(self.model)
            for i in range(n):
                if M[j][i]:
                    e = [0] * n
                    e[i] = 1
                    comp = comp + AlgebraElement.monomial(self.model, tuple(e), M[j][i])
            lin.append(comp)
        for key, c in f.terms.items():
            term = AlgebraElement.const(self.model, c)
            for j, e in enumerate(key):
                for _ in range(e):
                    term = term * lin[j]
            out = out + term
        return out

    __call__ = apply

    def derivative_substitution(self, alpha):
        """Expand ``prod_j (sum_i M_ij d_i)^{alpha_j}`` as {multi-index: coefficient}."""
        n = self.model.dim
        M = self.matrix
        poly = {(0,) * n: Fraction(1)}
        for j, e in enumerate(alpha):
            for _ in range(e):
                new: dict = {}
                for key, c in poly.items():
                    for i in range(n):
                        if M[i][j]:
                            k = list(key)
                            k[i] += 1
                            k = tuple(k)
                            new[k] = new.get(k, 0) + c * M[i][j]
                poly = {k: v for k, v in new.items() if v}
        return poly

    def __eq__(self, other):
        return isinstance(other, AutomorphismSeed) and self.matrix == other.matrix

    __hash__ = None


def pullback_by_automorphism(s: StarProduct, psi: AutomorphismSeed) -> StarProduct:
    """``a *^ b = psi^{-1}(psi(a) * psi(b))``."""
    inv = psi.inverse()
    cochains = []
    for C in s.cochains:
        terms: dict = {}
        for (L, R), c in C.terms.items():
            c2 = inv.apply(c)
            for L2, a in psi.derivative_substitution(L).items():
                for R2, b in psi.derivative_substitution(R).items():
                    key = (L2, R2)
                    v = c2.scale(a * b)
                    terms[key] = terms[key] + v if key in terms else v
        cochains.append(BidiffCochain(s.model, terms))
    M = psi.matrix
    pi = None
    if s.poisson is not None:
        P = s.poisson.matrix
        pi = PoissonStructure(_matmul(_matmul(M, P), [list(r) for r in zip(*M)]))
    return StarProduct(s.model, cochains, s.order, pi, f"pullback({s.name})")


# --------------------------------------------------------------------------
# units


def series_star_invert(s: StarProduct, u) -> FormalSeries:
    """Two-sided star inverse, solved order by order from ``u0^{-1}``."""
    u = s._series(u)
    n = min(u.order, s.order)
    inv0 = u.coeffs[0].invert()
    v = [inv0]
    for k in range(1, n + 1):
        acc = AlgebraElement.zero(s.model)
        for r in range(k + 1):
            for a in range(k - r + 1):
                b = k - r - a
                if b == k:
                    continue  # the unknown v_k enters only through u_0 v_k
                ua, vb = u.coeffs[a], v[b]
                if ua and vb:
                    acc = acc + (ua * vb if r == 0 else s.cochains[r - 1].apply(ua, vb))
        v.append(-(inv0 * acc))
    result = FormalSeries(v)
    one = FormalSeries.one(s.model, n)
    if s.multiply(u, result) != one or s.multiply(result, u) != one:
        raise ArithmeticError("star inverse failed to verify")
    return result
