"""Derivations of star products: quasi-inner ones, delta of closed one-forms,
recovery of one-forms from inner automorphisms, rho_1, and outer classes."""

from __future__ import annotations

from collections.abc import Sequence
from dataclasses import dataclass
from fractions import Fraction

from .algebra import (
    ZERO,
    AlgebraElement,
    DiffOperator,
    GaussianRational,
    I,
    PoissonStructure,
    Poly,
    Trig,
    _invert,
    find_witness,
    is_poisson_vector_field,
    scalar,
)
from .formal import (
    Equivalence,
    FormalSeries,
    StarProduct,
    extract_poisson,
    generic_series,
)
from .starexp import inner_automorphism


class UnsupportedModel(ValueError):
    pass


class NotPoisson(ValueError):
    pass


class NotDecomposable(ValueError):
    pass


class NotClosed(ValueError):
    pass


class FormalDerivation:
    """``D = sum_j lambda^j D_j`` acting on formal series."""

    def __init__(self, model, stages: Sequence[DiffOperator]):
        self.model = model
        self.stages = list(stages) or [DiffOperator.zero(model)]

    @property
    def order(self) -> int:
        return len(self.stages) - 1

    @classmethod
    def from_map(cls, model, fn, order: int) -> FormalDerivation:
        e = generic_series(model, 1, order)[0]
        image = fn(e)
        return cls(model, [DiffOperator.from_generic(model, c) for c in image])

    @classmethod
    def constant(cls, op: DiffOperator, order: int) -> FormalDerivation:
        """A lambda-independent derivation."""
        return cls(op.model, [op] + [DiffOperator.zero(op.model)] * order)

    def apply(self, f) -> FormalSeries:
        if isinstance(f, AlgebraElement):
            f = FormalSeries.of(f, self.order)
        n = min(f.order, self.order)
        out = []
        for k in range(n + 1):
            acc = AlgebraElement.zero(f.model)
            for j in range(k + 1):
                if self.stages[j] and f[k - j]:
                    acc = acc + self.stages[j].apply(f[k - j])
            out.append(acc)
        return FormalSeries(out)

    __call__ = apply

    def truncate(self, order):
        return FormalDerivation(self.model, self.stages[: order + 1])

    def _zip(self, other):
        n = min(self.order, other.order)
        return zip(self.stages[: n + 1], other.stages[: n + 1])

    def __add__(self, other):
        return FormalDerivation(self.model, [a + b for a, b in self._zip(other)])

    def __neg__(self):
        return FormalDerivation(self.model, [-a for a in self.stages])

    def __sub__(self, other):
        return self + (-other)

    def scale(self, c):
        return FormalDerivation(self.model, [a * c for a in self.stages])

    def shift(self, k=1):
        """Multiply by ``lambda^k``; the result is known ``k`` orders further."""
        return FormalDerivation(self.model, [DiffOperator.zero(self.model)] * k + self.stages)

    def bracket(self, other: FormalDerivation) -> FormalDerivation:
        n = min(self.order, other.order)
        return FormalDerivation.from_map(
            self.model, lambda f: self.apply(other.apply(f)) - other.apply(self.apply(f)), n
        )

    def exponential(self) -> Equivalence:
        """``e^D`` for ``D = O(lambda)``."""
        if self.stages[0]:
            raise ValueError("exponential needs a derivation vanishing at lambda = 0")
        order = self.order

        def fn(f):
            total, term = f, f
            for k in range(1, order + 1):
                term = self.apply(term).scale(Fraction(1, k))
                if not term:
                    break
                total = total + term
            return total

        return Equivalence.from_map(self.model, fn, order)

    def __eq__(self, other):
        if not isinstance(other, FormalDerivation):
            return NotImplemented
        return all(a == b for a, b in self._zip(other))

    __hash__ = None

    def __bool__(self):
        return any(self.stages)

    def __repr__(self):
        body = "; ".join(f"D{j}={d}" for j, d in enumerate(self.stages) if d)
        return f"FormalDerivation({body or '0'})"


@dataclass
class DerivationReport:
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


def check_derivation(s: StarProduct, D: FormalDerivation) -> DerivationReport:
    order = min(s.order, D.order)
    a, b = generic_series(s, 2, order)
    lhs = D.apply(s.multiply(a, b))
    rhs = s.multiply(D.apply(a), b) + s.multiply(a, D.apply(b))
    r = lhs.first_difference(rhs)
    if r is None:
        return DerivationReport(True, order)
    return DerivationReport(False, order, r, find_witness(lhs[r] - rhs[r], 2))


def quasi_inner(s: StarProduct, H) -> FormalDerivation:
    """``(i/lambda)[H, .]_*``; one order is lost to the division by lambda."""
    H = s._series(H)
    order = min(H.order, s.order)
    return FormalDerivation.from_map(
        s.model, lambda f: s.commutator(H, f).unshift(1).scale(I), order
    ).truncate(order - 1)


def is_central(s: StarProduct, f):
    """Return ``(True, None)`` or ``(False, g)`` with ``[f, g]_* != 0``."""
    f = s._series(f)
    e = generic_series(s, 1, min(f.order, s.order))[0]
    comm = s.commutator(f, e)
    r = next((k for k, c in enumerate(comm) if c), None)
    if r is None:
        return True, None
    return False, find_witness(comm[r], 1)[0]


# --------------------------------------------------------------------------
# closed one-forms


class ClosedOneForm:
    """``A = sum_j c_j dtheta_j + dg`` with constant vector ``c`` and potential ``g``.

    On the polynomial model every closed form is exact, so ``c`` is folded into ``g``.
    """

    def __init__(self, model, constant=None, potential: AlgebraElement | None = None):
        self.model = model
        constant = [scalar(c) for c in (constant or [0] * model.dim)]
        if len(constant) != model.dim:
            raise ValueError("constant vector has wrong length")
        potential = potential if potential is not None else AlgebraElement.zero(model)
        if isinstance(model, Poly) and any(constant):
            linear = AlgebraElement.zero(model)
            for j, c in enumerate(constant):
                e = [0] * model.dim
                e[j] = 1
                linear = linear + AlgebraElement.monomial(model, tuple(e), c)
            potential = potential + linear
            constant = [ZERO] * model.dim
        # the constant part of g is irrelevant
        self.potential = potential - potential.constant_part()
        self.constant = tuple(constant)

    @classmethod
    def zero(cls, model):
        return cls(model)

    @classmethod
    def exact(cls, g: AlgebraElement):
        return cls(g.model, None, g)

    @classmethod
    def from_components(cls, comps: Sequence[AlgebraElement]) -> ClosedOneForm:
        """Integrate ``sum a_j dtheta_j`` after checking closedness."""
        model = comps[0].model
        n = model.dim
        for i in range(n):
            for j in range(i + 1, n):
                if comps[i].derive(j) != comps[j].derive(i):
                    raise NotClosed(f"d_{j + 1} a_{i + 1} != d_{i + 1} a_{j + 1}")
        if isinstance(model, Trig):
            const = [a.constant_part() for a in comps]
            g_terms = {}
            for j, a in enumerate(comps):
                for k, c in a.terms.items():
                    if any(k) and k[j] and k not in g_terms:
                        g_terms[k] = c / GaussianRational(0, k[j])
            g = AlgebraElement(model, g_terms)
            form = cls(model, const, g)
        else:
            g_terms: dict = {}
            for j, a in enumerate(comps):
                for k, c in a.terms.items():
                    k2 = list(k)
                    k2[j] += 1
                    k2 = tuple(k2)
                    g_terms[k2] = g_terms.get(k2, ZERO) + c * Fraction(1, sum(k) + 1)
            form = cls(model, None, AlgebraElement(model, g_terms))
        if form.components() != list(comps):
            raise NotClosed("components do not integrate to a closed form")
        return form

    def components(self) -> list[AlgebraElement]:
        return [self.potential.derive(j) + self.constant[j] for j in range(self.model.dim)]

    def class_vector(self) -> tuple:
        return self.constant

    def is_exact(self) -> bool:
        return not any(self.constant)

    def __add__(self, other):
        return ClosedOneForm(
            self.model, [a + b for a, b in zip(self.constant, other.constant)], self.potential + other.potential
        )

    def __neg__(self):
        return ClosedOneForm(self.model, [-a for a in self.constant], -self.potential)

    def __sub__(self, other):
        return self + (-other)

    def scale(self, c):
        return ClosedOneForm(self.model, [a * scalar(c) for a in self.constant], self.potential.scale(c))

    def __eq__(self, other):
        return (
            isinstance(other, ClosedOneForm)
            and self.constant == other.constant
            and self.potential == other.potential
        )

    __hash__ = None

    def __bool__(self):
        return any(self.constant) or bool(self.potential)

    def __str__(self):
        parts = [f"({c})*dth{j + 1}" for j, c in enumerate(self.constant) if c]
        if self.potential:
            parts.append(f"d({self.potential})")
        return " + ".join(parts) or "0"

    __repr__ = __str__


def _linear_potential_commutator(s: StarProduct, j: int, f: FormalSeries) -> FormalSeries:
    """``[theta_j, f]_*`` for the coordinate ``theta_j``, which is not an element of the torus algebra.

    Only cochain terms that differentiate the coordinate exactly once survive;
    terms that do not differentiate a slot at all are excluded by unitality.
    """
    dim = s.model.dim
    ej = tuple(int(i == j) for i in range(dim))
    zero = (0,) * dim
    out = [AlgebraElement.zero(f.model)]
    for n in range(1, min(f.order, s.order) + 1):
        acc = AlgebraElement.zero(f.model)
        for r in range(1, n + 1):
            fa = f[n - r]
            if not fa:
                continue
            C = s.cochain(r)
            for (L, R), c in C.terms.items():
                if L == zero or R == zero:
                    raise ValueError("star product is not unital; the potential commutator is ill-defined")
                if L == ej:
                    d = fa.derive_multi(R)
                    if d:
                        acc = acc + c * d
                if R == ej:
                    d = fa.derive_multi(L)
                    if d:
                        acc = acc - c * d
        out.append(acc)
    return FormalSeries(out)


def _delta_map(s: StarProduct, A: ClosedOneForm):
    def fn(f):
        out = s.commutator(FormalSeries.of(A.potential, f.order), f) if A.potential else FormalSeries.zero(f.model, f.order)
        for j, c in enumerate(A.constant):
            if c:
                out = out + _linear_potential_commutator(s, j, f).scale(c)
        return out

    return fn


def delta_one_form(s: StarProduct, A) -> FormalDerivation:
    """``delta_A = [H, .]_*`` for a local potential ``dH = A``.

    ``A`` may be a single closed form or a list ``[A_0, A_1, ...]`` meaning
    ``sum_r lambda^r A_r``.
    """
    forms = [A] if isinstance(A, ClosedOneForm) else list(A)
    if not s.is_unital():
        raise ValueError("delta is only defined for unital products")
    order = s.order

    def fn(f):
        out = FormalSeries.zero(f.model, f.order)
        for r, form in enumerate(forms):
            if form and r <= order:
                out = out + _delta_map(s, form)(f).shift(r)
        return out

    return FormalDerivation.from_map(s.model, fn, order)


def _symplectic_inverse_transpose(s: StarProduct) -> tuple[PoissonStructure, list]:
    pi = extract_poisson(s)
    if not pi.is_symplectic():
        raise UnsupportedModel("needs a symplectic constant Poisson structure")
    pt = [list(r) for r in zip(*pi.matrix)]
    return pi, _invert(pt)


def _form_from_bracket_field(Y: DiffOperator, pinvT) -> ClosedOneForm:
    """Solve ``Y = i{H, .}`` for ``dH``: ``Y^k = i pi^{jk} a_j``."""
    if not Y.is_derivation() and Y:
        raise NotDecomposable(f"{Y} is not a first-order derivation")
    comps = Y.components()
    n = len(comps)
    a = []
    for j in range(n):
        acc = AlgebraElement.zero(Y.model)
        for k in range(n):
            if pinvT[j][k] and comps[k]:
                acc = acc + comps[k].scale(pinvT[j][k])
        a.append(acc.scale(-I))
    return ClosedOneForm.from_components(a)


def log_equivalence(T: Equivalence) -> FormalDerivation:
    """``log T = sum_k (-1)^{k+1} (T - id)^k / k``."""
    order = T.order

    def fn(f):
        total = FormalSeries.zero(f.model, f.order)
        power = f
        for k in range(1, order + 1):
            power = T.apply(power) - power
            if not power:
                break
            total = total + power.scale(Fraction((-1) ** (k + 1), k))
        return total

    return FormalDerivation.from_map(T.model, fn, order)


@dataclass
class InnerFormResult:
    forms: list
    integral: bool
    higher_exact: bool
    verified: bool

    def to_json(self):
        return {
            "forms": [str(f) for f in self.forms],
            "class_A0": [str(c) for c in self.forms[0].constant] if self.forms else [],
            "A0_integral": self.integral,
            "higher_orders_exact": self.higher_exact,
            "exp_delta_equals_Ad": self.verified,
        }


def inner_to_one_form(s: StarProduct, u) -> InnerFormResult:
    """Closed forms ``A = sum lambda^r A_r`` with ``e^{delta_A} = Ad(u)``.

    ``log Ad(u)`` is peeled order by order: the first-order commutator term
    of ``delta_{A_r}`` is ``i{H_r, .}``, which determines ``dH_r``.
    """
    _, pinvT = _symplectic_inverse_transpose(s)
    T = inner_automorphism(s, u)
    L = log_equivalence(T)
    N = s.order
    forms: list[ClosedOneForm] = []
    contributions = [DiffOperator.zero(s.model) for _ in range(N + 1)]
    for n in range(1, N + 1):
        residual = L.stages[n] - contributions[n]
        form = _form_from_bracket_field(residual, pinvT)
        forms.append(form)
        if form:
            d = delta_one_form(s, form)
            for k in range(1, N + 1 - (n - 1)):
                contributions[n - 1 + k] = contributions[n - 1 + k] + d.stages[k]
    integral = all(c.re == 0 and c.im.denominator == 1 for c in forms[0].constant) if forms else True
    higher_exact = all(f.is_exact() for f in forms[1:])
    verified = delta_one_form(s, forms).exponential() == T
    return InnerFormResult(forms, integral, higher_exact, verified)


# --------------------------------------------------------------------------
# rho_1 and outer classes


def split_poisson_field(X: DiffOperator, pi: PoissonStructure):
    """``X = X_const + X_H`` with ``X_H = {., H}``; returns ``(X_const, H)``."""
    if not pi.is_symplectic():
        raise NotDecomposable("Hamiltonian splitting needs a symplectic structure")
    comps = X.components()
    n = len(comps)
    const = [c.constant_part() for c in comps]
    rest = [c - k for c, k in zip(comps, const)]
    pinv = _invert(pi.matrix)
    # X_H^i = pi^{ij} d_j H  =>  dH = pi^{-1} X_H
    grad = []
    for j in range(n):
        acc = AlgebraElement.zero(X.model)
        for i in range(n):
            if pinv[j][i] and rest[i]:
                acc = acc + rest[i].scale(pinv[j][i])
        grad.append(acc)
    try:
        form = ClosedOneForm.from_components(grad)
    except NotClosed as exc:
        raise NotDecomposable(str(exc)) from exc
    if not form.is_exact():
        raise NotDecomposable("Hamiltonian part has a harmonic component")
    return DiffOperator.vector_field(X.model, const), form.potential


def rho_one(s: StarProduct, X: DiffOperator) -> FormalDerivation:
    """A star derivation ``L_X + O(lambda)`` with ``rho_1(X_H) = (i/lambda) ad(H)``."""
    ok, _ = is_poisson_vector_field(X, extract_poisson(s))
    if not ok:
        raise NotPoisson(f"{X} is not a Poisson vector field")
    pi = extract_poisson(s)
    Xc, H = split_poisson_field(X, pi)
    out = FormalDerivation.constant(Xc, s.order)
    if H:
        out = out + quasi_inner(s, H)
    if Xc and not check_derivation(s, FormalDerivation.constant(Xc, s.order)).passed:
        raise NotDecomposable("constant part is not a derivation of this product")
    return out


@dataclass
class OuterClass:
    field_classes: list  # per lambda-order: harmonic part of the leading Poisson field
    form_classes: list  # per lambda-order r: class of A_r with D = delta_A + inner
    inner: bool

    def to_json(self):
        return {
            "field_classes": [[str(c) for c in v] for v in self.field_classes],
            "form_classes": [[str(c) for c in v] for v in self.form_classes],
            "inner": self.inner,
        }


def outer_class(s: StarProduct, D: FormalDerivation) -> OuterClass:
    """Per-order class of a derivation modulo quasi-inner ones (symplectic torus)."""
    if not isinstance(s.model, Trig):
        raise UnsupportedModel("outer classes are computed on the torus model")
    pi, pinvT = _symplectic_inverse_transpose(s)
    if not check_derivation(s, D).passed:
        raise ValueError("input is not a derivation of the product")
    n = s.model.dim
    remaining = D
    order = D.order
    field_classes = []
    for r in range(order + 1):
        X = remaining.stages[r]
        if X and not X.is_derivation():
            raise ValueError(f"stage {r} is not a vector field")
        Xc, _ = split_poisson_field(X, pi) if X else (DiffOperator.zero(s.model), None)
        field_classes.append(tuple(c.constant_part() for c in Xc.components()))
        if X:
            corr = rho_one(s, X).shift(r)
            remaining = (remaining - corr).truncate(min(order, remaining.order, corr.order))
            order = remaining.order
    form_classes = []
    for w in field_classes[1:]:
        form_classes.append(tuple(
            -I * sum((pinvT[j][k] * w[k] for k in range(n)), ZERO) for j in range(n)
        ))
    inner = all(not any(v) for v in field_classes)
    return OuterClass(field_classes, form_classes, inner)
