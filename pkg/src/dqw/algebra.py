"""Exact scalars and commutative coefficient algebras.

Two concrete models are supported: polynomials on R^n (``Poly``) and
trigonometric polynomials on the torus T^m (``Trig``, monomials
``E[k] = exp(i k.theta)``).  A third, internal model (``Generic``) adjoins
formal exponentials ``e_s`` with ``d_j e_s = z_{s,j} e_s``.  Multidifferential
identities are checked by evaluating them on generic exponentials: a
multidifferential operator vanishes iff its value on ``(e_0, e_1, ...)`` is
zero, so one symbolic evaluation replaces an infinite family of tests.
"""

from __future__ import annotations

import itertools
from collections.abc import Sequence
from dataclasses import dataclass
from fractions import Fraction


class NotAUnit(ArithmeticError):
    """Raised when an element (or series) has no multiplicative inverse."""


class ModelMismatch(ValueError):
    pass


def _frac(x) -> Fraction:
    if isinstance(x, Fraction):
        return x
    if isinstance(x, (int, str)):
        return Fraction(x)
    raise TypeError(f"cannot convert {x!r} to a rational")


class GaussianRational:
    """An element ``re + im*i`` of Q(i)."""

    __slots__ = ("im", "re")

    def __init__(self, re=0, im=0):
        self.re = _frac(re)
        self.im = _frac(im)

    @classmethod
    def coerce(cls, x) -> GaussianRational:
        if isinstance(x, GaussianRational):
            return x
        if isinstance(x, (int, Fraction)):
            return cls(x, 0)
        if isinstance(x, complex):
            raise TypeError("floating-point complex numbers are not exact")
        raise TypeError(f"cannot convert {type(x).__name__} to GaussianRational")

    def __add__(self, other):
        try:
            o = GaussianRational.coerce(other)
        except TypeError:
            return NotImplemented
        return GaussianRational(self.re + o.re, self.im + o.im)

    __radd__ = __add__

    def __neg__(self):
        return GaussianRational(-self.re, -self.im)

    def __sub__(self, other):
        try:
            o = GaussianRational.coerce(other)
        except TypeError:
            return NotImplemented
        return GaussianRational(self.re - o.re, self.im - o.im)

    def __rsub__(self, other):
        return (-self) + other

    def __mul__(self, other):
        if isinstance(other, GaussianRational):
            a, b, c, d = self.re, self.im, other.re, other.im
            return GaussianRational(a * c - b * d, a * d + b * c)
        if isinstance(other, (int, Fraction)):
            return GaussianRational(self.re * other, self.im * other)
        return NotImplemented

    __rmul__ = __mul__

    def conjugate(self):
        return GaussianRational(self.re, -self.im)

    def norm(self) -> Fraction:
        return self.re * self.re + self.im * self.im

    def inverse(self):
        n = self.norm()
        if n == 0:
            raise ZeroDivisionError("inverse of zero")
        return GaussianRational(self.re / n, -self.im / n)

    def __truediv__(self, other):
        try:
            o = GaussianRational.coerce(other)
        except TypeError:
            return NotImplemented
        return self * o.inverse()

    def __rtruediv__(self, other):
        return GaussianRational.coerce(other) * self.inverse()

    def __pow__(self, n: int):
        if n < 0:
            return self.inverse() ** (-n)
        result = ONE
        base = self
        while n:
            if n & 1:
                result = result * base
            base = base * base
            n >>= 1
        return result

    def __bool__(self):
        return bool(self.re) or bool(self.im)

    def __eq__(self, other):
        try:
            o = GaussianRational.coerce(other)
        except TypeError:
            return NotImplemented
        return self.re == o.re and self.im == o.im

    def __hash__(self):
        if not self.im:
            return hash(self.re)
        return hash((self.re, self.im))

    def is_real(self) -> bool:
        return self.im == 0

    def is_integral(self) -> bool:
        return self.re.denominator == 1 and self.im.denominator == 1

    def __repr__(self):
        return f"GaussianRational({self.re}, {self.im})"

    def __str__(self):
        return format_scalar(self)


ONE = GaussianRational(1)
ZERO = GaussianRational(0)
I = GaussianRational(0, 1)


def format_scalar(c: GaussianRational) -> str:
    """Render in the expression grammar: ``3/4``, ``i``, ``2*i/5``, ``(1/2+i/3)``."""
    re, im = c.re, c.im

    def imag(v: Fraction) -> str:
        if v == 1:
            return "i"
        if v == -1:
            return "-i"
        num = v.numerator
        head = "i" if num == 1 else ("-i" if num == -1 else f"{num}*i")
        return head if v.denominator == 1 else f"{head}/{v.denominator}"

    if im == 0:
        return str(re)
    if re == 0:
        return imag(im)
    sign = "+" if im > 0 else "-"
    return f"({re}{sign}{imag(abs(im))})"


def scalar(x) -> GaussianRational:
    return GaussianRational.coerce(x)


# --------------------------------------------------------------------------
# models


@dataclass(frozen=True)
class Poly:
    """Polynomials in x1..xn; keys are exponent tuples."""

    dim: int

    kind = "poly"

    def zero_key(self):
        return (0,) * self.dim

    def mul_key(self, a, b):
        return tuple(x + y for x, y in zip(a, b))

    def derive_key(self, key, j):
        e = key[j]
        if e == 0:
            return ()
        k = list(key)
        k[j] = e - 1
        return ((GaussianRational(e), tuple(k)),)

    def format_key(self, key):
        parts = []
        for j, e in enumerate(key):
            if e == 1:
                parts.append(f"x{j + 1}")
            elif e:
                parts.append(f"x{j + 1}^{e}")
        return "*".join(parts)

    def __str__(self):
        return f"R^{self.dim}"


@dataclass(frozen=True)
class Trig:
    """Trigonometric polynomials on the m-torus; keys are frequency vectors."""

    dim: int

    kind = "torus"

    def zero_key(self):
        return (0,) * self.dim

    def mul_key(self, a, b):
        return tuple(x + y for x, y in zip(a, b))

    def derive_key(self, key, j):
        k = key[j]
        if k == 0:
            return ()
        return ((GaussianRational(0, k), key),)

    def format_key(self, key):
        if not any(key):
            return ""
        return "E[" + ",".join(str(k) for k in key) + "]"

    def __str__(self):
        return f"T^{self.dim}"


@dataclass(frozen=True)
class Generic:
    """``base`` with formal exponentials ``e_0 .. e_{slots-1}`` adjoined.

    Keys are ``(base_key, mask, z)`` where ``mask`` records which exponentials
    are present and ``z`` (length ``slots*dim``) is the exponent of the
    derivative variables ``z_{s,j}``.
    """

    base: Poly | Trig
    slots: int

    kind = "generic"

    @property
    def dim(self):
        return self.base.dim

    def zero_key(self):
        return (self.base.zero_key(), 0, (0,) * (self.slots * self.dim))

    def lift_key(self, key):
        return (key, 0, (0,) * (self.slots * self.dim))

    def mul_key(self, a, b):
        if a[1] & b[1]:
            raise ValueError("product of a generic exponential with itself")
        return (
            self.base.mul_key(a[0], b[0]),
            a[1] | b[1],
            tuple(x + y for x, y in zip(a[2], b[2])),
        )

    def derive_key(self, key, j):
        bkey, mask, z = key
        out = [(c, (k, mask, z)) for c, k in self.base.derive_key(bkey, j)]
        for s in range(self.slots):
            if mask >> s & 1:
                zz = list(z)
                zz[s * self.dim + j] += 1
                out.append((ONE, (bkey, mask, tuple(zz))))
        return out

    def format_key(self, key):
        bkey, mask, z = key
        parts = [self.base.format_key(bkey)]
        for s in range(self.slots):
            for j in range(self.dim):
                e = z[s * self.dim + j]
                if e:
                    parts.append(f"z{s}_{j + 1}" + (f"^{e}" if e > 1 else ""))
            if mask >> s & 1:
                parts.append(f"e{s}")
        return "*".join(p for p in parts if p)

    def __str__(self):
        return f"{self.base}+e[{self.slots}]"


# --------------------------------------------------------------------------
# elements


_SCALARS = (int, Fraction, GaussianRational)


class AlgebraElement:
    """Finite sum ``sum c_key * monomial(key)``; immutable."""

    __slots__ = ("model", "terms")

    def __init__(self, model, terms=None):
        self.model = model
        if terms is None:
            self.terms = {}
        else:
            self.terms = {k: v for k, v in terms.items() if v}

    @classmethod
    def _raw(cls, model, terms):
        obj = cls.__new__(cls)
        obj.model = model
        obj.terms = terms
        return obj

    @classmethod
    def const(cls, model, c=1):
        c = scalar(c)
        return cls._raw(model, {model.zero_key(): c} if c else {})

    @classmethod
    def monomial(cls, model, key, c=1):
        c = scalar(c)
        key = model.lift_key(tuple(key)) if isinstance(model, Generic) else tuple(key)
        return cls._raw(model, {key: c} if c else {})

    @classmethod
    def zero(cls, model):
        return cls._raw(model, {})

    # -- coercion

    def lift(self, model) -> AlgebraElement:
        if self.model == model:
            return self
        if isinstance(model, Generic) and model.base == self.model:
            return AlgebraElement._raw(
                model, {model.lift_key(k): v for k, v in self.terms.items()}
            )
        if isinstance(model, Generic) and isinstance(self.model, Generic) and model.base == self.model.base:
            # widen the number of generic slots
            pad = (0,) * ((model.slots - self.model.slots) * model.dim)
            if model.slots < self.model.slots:
                raise ModelMismatch(f"cannot narrow {self.model} to {model}")
            return AlgebraElement._raw(
                model, {(b, m, z + pad): v for (b, m, z), v in self.terms.items()}
            )
        raise ModelMismatch(f"cannot combine elements of {self.model} and {model}")

    def _common(self, other):
        if isinstance(other, _SCALARS):
            return self, AlgebraElement.const(self.model, other)
        if not isinstance(other, AlgebraElement):
            return None
        if self.model == other.model:
            return self, other
        if isinstance(self.model, Generic) and (
            other.model == self.model.base
            or (isinstance(other.model, Generic) and other.model.slots <= self.model.slots)
        ):
            return self, other.lift(self.model)
        if isinstance(other.model, Generic):
            return self.lift(other.model), other
        raise ModelMismatch(f"cannot combine elements of {self.model} and {other.model}")

    # -- arithmetic

    def __add__(self, other):
        pair = self._common(other)
        if pair is None:
            return NotImplemented
        a, b = pair
        terms = dict(a.terms)
        for k, v in b.terms.items():
            w = terms.get(k)
            if w is None:
                terms[k] = v
            else:
                w = w + v
                if w:
                    terms[k] = w
                else:
                    del terms[k]
        return AlgebraElement._raw(a.model, terms)

    __radd__ = __add__

    def __neg__(self):
        return AlgebraElement._raw(self.model, {k: -v for k, v in self.terms.items()})

    def __sub__(self, other):
        pair = self._common(other)
        if pair is None:
            return NotImplemented
        a, b = pair
        return a + (-b)

    def __rsub__(self, other):
        return (-self) + other

    def scale(self, c) -> AlgebraElement:
        c = scalar(c)
        if not c:
            return AlgebraElement._raw(self.model, {})
        return AlgebraElement._raw(self.model, {k: v * c for k, v in self.terms.items()})

    def __mul__(self, other):
        if isinstance(other, _SCALARS):
            return self.scale(other)
        pair = self._common(other)
        if pair is None:
            return NotImplemented
        a, b = pair
        mul_key = a.model.mul_key
        terms: dict = {}
        for ka, va in a.terms.items():
            for kb, vb in b.terms.items():
                k = mul_key(ka, kb)
                v = va * vb
                w = terms.get(k)
                terms[k] = v if w is None else w + v
        return AlgebraElement(a.model, terms)

    def __rmul__(self, other):
        if isinstance(other, _SCALARS):
            return self.scale(other)
        return NotImplemented

    def __pow__(self, n: int):
        if n < 0:
            return self.invert() ** (-n)
        result = AlgebraElement.const(self.model, 1)
        for _ in range(n):
            result = result * self
        return result

    def __eq__(self, other):
        if isinstance(other, _SCALARS):
            other = AlgebraElement.const(self.model, other)
        if not isinstance(other, AlgebraElement):
            return NotImplemented
        try:
            a, b = self._common(other)
        except ModelMismatch:
            return False
        return a.terms == b.terms

    __hash__ = None

    def __bool__(self):
        return bool(self.terms)

    def is_zero(self):
        return not self.terms

    # -- calculus

    def derive(self, j: int) -> AlgebraElement:
        """Partial derivative along direction ``j`` (0-based)."""
        if not 0 <= j < self.model.dim:
            raise IndexError(f"direction {j} out of range for {self.model}")
        terms: dict = {}
        dk = self.model.derive_key
        for k, v in self.terms.items():
            for c, k2 in dk(k, j):
                w = v * c
                old = terms.get(k2)
                terms[k2] = w if old is None else old + w
        return AlgebraElement(self.model, terms)

    def derive_multi(self, alpha: Sequence[int]) -> AlgebraElement:
        out = self
        for j, e in enumerate(alpha):
            for _ in range(e):
                out = out.derive(j)
                if not out.terms:
                    return out
        return out

    def constant_part(self) -> GaussianRational:
        return self.terms.get(self.model.zero_key(), ZERO)

    def is_constant(self) -> bool:
        zk = self.model.zero_key()
        return all(k == zk for k in self.terms)

    def is_unit(self) -> bool:
        try:
            self.invert()
        except NotAUnit:
            return False
        return True

    def invert(self) -> AlgebraElement:
        if not self.terms:
            raise NotAUnit("zero is not a unit")
        model = self.model
        if isinstance(model, Trig):
            if len(self.terms) != 1:
                raise NotAUnit(
                    f"{self} has {len(self.terms)} Fourier modes; only monomials c*E[k] are units"
                )
            (k, c), = self.terms.items()
            return AlgebraElement._raw(model, {tuple(-x for x in k): c.inverse()})
        if isinstance(model, Poly):
            if not self.is_constant():
                raise NotAUnit(f"{self} is not a nonzero constant polynomial")
            return AlgebraElement.const(model, self.constant_part().inverse())
        raise NotAUnit(f"inversion not supported in {model}")

    def map_keys(self, fn, model=None) -> AlgebraElement:
        terms: dict = {}
        for k, v in self.terms.items():
            k2 = fn(k)
            terms[k2] = terms.get(k2, ZERO) + v
        return AlgebraElement(model or self.model, terms)

    def support(self):
        return sorted(self.terms)

    # -- printing

    def __str__(self):
        return format_element(self)

    def __repr__(self):
        return f"<{self.model} {format_element(self)}>"


def format_element(a: AlgebraElement) -> str:
    if not a.terms:
        return "0"
    parts = []
    for k in sorted(a.terms, key=_key_order):
        c = a.terms[k]
        mono = a.model.format_key(k)
        if not mono:
            parts.append(format_scalar(c))
        elif c == 1:
            parts.append(mono)
        elif c == -1:
            parts.append("-" + mono)
        else:
            parts.append(f"{format_scalar(c)}*{mono}")
    out = parts[0]
    for p in parts[1:]:
        out += " - " + p[1:] if p.startswith("-") else " + " + p
    return out


def _key_order(k):
    if len(k) == 3 and isinstance(k[0], tuple):
        # generic key
        return (k[1], sum(k[2]), k[2], sum(map(abs, k[0])), k[0])
    return (sum(map(abs, k)), tuple(-x for x in k))


# --------------------------------------------------------------------------
# constructors and the operations of the public surface


def E(*k, c=1) -> AlgebraElement:
    """Trig monomial ``c*E[k]`` on the torus of dimension ``len(k)``."""
    if len(k) == 1 and isinstance(k[0], (tuple, list)):
        k = tuple(k[0])
    return AlgebraElement.monomial(Trig(len(k)), tuple(k), c)


def x(j: int, n: int) -> AlgebraElement:
    """Coordinate function x_j (1-based) on R^n."""
    key = [0] * n
    key[j - 1] = 1
    return AlgebraElement.monomial(Poly(n), tuple(key))


def const(model, c=1) -> AlgebraElement:
    return AlgebraElement.const(model, c)


def elem_mul(a: AlgebraElement, b: AlgebraElement) -> AlgebraElement:
    if a.model != b.model:
        raise ModelMismatch(f"{a.model} vs {b.model}")
    return a * b


def elem_derive(a: AlgebraElement, j: int) -> AlgebraElement:
    """Derivative along direction ``j``, counted from 1 as in d_1, d_2, ..."""
    if not 1 <= j <= a.model.dim:
        raise IndexError(f"direction {j} out of range 1..{a.model.dim}")
    return a.derive(j - 1)


def elem_invert(a: AlgebraElement) -> AlgebraElement:
    return a.invert()


def constant_part(a: AlgebraElement) -> GaussianRational:
    return a.constant_part()


def generic(base, slot: int, slots: int) -> AlgebraElement:
    """The formal exponential ``e_slot`` in ``Generic(base, slots)``."""
    model = Generic(base, slots)
    return AlgebraElement._raw(model, {(base.zero_key(), 1 << slot, (0,) * (slots * base.dim)): ONE})


# --------------------------------------------------------------------------
# Poisson structures


class PoissonStructure:
    """Constant antisymmetric bivector ``pi^{ij}`` with rational entries."""

    def __init__(self, matrix):
        m = [[_frac(v) for v in row] for row in matrix]
        n = len(m)
        if any(len(row) != n for row in m):
            raise ValueError("Poisson matrix must be square")
        for i in range(n):
            for j in range(n):
                if m[i][j] != -m[j][i]:
                    raise ValueError(f"Poisson matrix not antisymmetric at ({i},{j})")
        self.matrix = tuple(tuple(row) for row in m)

    @classmethod
    def standard(cls, n_pairs: int = 1, scale=1):
        """Darboux form: pi^{2k-1,2k} = scale."""
        n = 2 * n_pairs
        m = [[0] * n for _ in range(n)]
        for k in range(n_pairs):
            m[2 * k][2 * k + 1] = scale
            m[2 * k + 1][2 * k] = -scale
        return cls(m)

    @property
    def dim(self):
        return len(self.matrix)

    def __getitem__(self, ij):
        i, j = ij
        return self.matrix[i][j]

    def entries(self):
        for i, row in enumerate(self.matrix):
            for j, v in enumerate(row):
                if v:
                    yield i, j, v

    def __add__(self, other):
        return PoissonStructure(
            [[a + b for a, b in zip(r1, r2)] for r1, r2 in zip(self.matrix, other.matrix)]
        )

    def __mul__(self, c):
        return PoissonStructure([[a * c for a in row] for row in self.matrix])

    __rmul__ = __mul__

    def __eq__(self, other):
        return isinstance(other, PoissonStructure) and self.matrix == other.matrix

    def __hash__(self):
        return hash(self.matrix)

    def is_zero(self):
        return not any(v for row in self.matrix for v in row)

    def is_symplectic(self) -> bool:
        return _rank(self.matrix) == self.dim

    def inverse(self):
        return _invert(self.matrix)

    def tolist(self):
        return [[str(v) if v.denominator != 1 else int(v) for v in row] for row in self.matrix]

    def __repr__(self):
        return f"PoissonStructure({self.tolist()})"


def _rank(rows) -> int:
    m = [list(map(Fraction, r)) for r in rows]
    rank = 0
    ncols = len(m[0]) if m else 0
    for col in range(ncols):
        piv = next((r for r in range(rank, len(m)) if m[r][col]), None)
        if piv is None:
            continue
        m[rank], m[piv] = m[piv], m[rank]
        for r in range(len(m)):
            if r != rank and m[r][col]:
                f = m[r][col] / m[rank][col]
                m[r] = [a - f * b for a, b in zip(m[r], m[rank])]
        rank += 1
    return rank


def _invert(rows):
    n = len(rows)
    m = [list(map(Fraction, r)) + [Fraction(int(i == j)) for j in range(n)] for i, r in enumerate(rows)]
    for col in range(n):
        piv = next((r for r in range(col, n) if m[r][col]), None)
        if piv is None:
            raise ZeroDivisionError("singular matrix")
        m[col], m[piv] = m[piv], m[col]
        p = m[col][col]
        m[col] = [a / p for a in m[col]]
        for r in range(n):
            if r != col and m[r][col]:
                f = m[r][col]
                m[r] = [a - f * b for a, b in zip(m[r], m[col])]
    return [row[n:] for row in m]


def poisson_bracket(a: AlgebraElement, b: AlgebraElement, pi: PoissonStructure) -> AlgebraElement:
    """``{a,b} = pi^{ij} d_i a d_j b``."""
    model = a.model if isinstance(a.model, Generic) else b.model
    if model.dim != pi.dim:
        raise ValueError(f"Poisson structure of dim {pi.dim} on {model}")
    da = [a.derive(i) for i in range(pi.dim)]
    db = [b.derive(j) for j in range(pi.dim)]
    out = AlgebraElement.zero(model)
    for i, j, v in pi.entries():
        if da[i] and db[j]:
            out = out + (da[i] * db[j]).scale(v)
    return out


# --------------------------------------------------------------------------
# differential operators


class DiffOperator:
    """``f -> sum_alpha c_alpha * d^alpha f`` with coefficients in a base model."""

    __slots__ = ("model", "terms")

    def __init__(self, model, terms=None):
        self.model = model
        clean = {}
        for alpha, c in (terms or {}).items():
            alpha = tuple(alpha)
            if len(alpha) != model.dim:
                raise ValueError(f"multi-index {alpha} has wrong length for {model}")
            if isinstance(c, _SCALARS):
                c = AlgebraElement.const(model, c)
            if c:
                clean[alpha] = clean[alpha] + c if alpha in clean else c
        self.terms = {a: c for a, c in clean.items() if c}

    @classmethod
    def zero(cls, model):
        return cls(model)

    @classmethod
    def identity(cls, model):
        return cls(model, {(0,) * model.dim: 1})

    @classmethod
    def vector_field(cls, model, components):
        """``sum_j X^j d_j`` from a list of coefficient elements or scalars."""
        terms = {}
        for j, c in enumerate(components):
            alpha = [0] * model.dim
            alpha[j] = 1
            terms[tuple(alpha)] = c
        return cls(model, terms)

    @classmethod
    def partial(cls, model, j, c=1):
        """``c * d_j`` with ``j`` 0-based."""
        alpha = [0] * model.dim
        alpha[j] = 1
        return cls(model, {tuple(alpha): c})

    @classmethod
    def from_generic(cls, base, image: AlgebraElement, slot: int = 0):
        """Read the operator ``D`` off ``D(e_slot)`` computed in a generic model."""
        dim = base.dim
        terms: dict = {}
        for (bkey, mask, z), c in image.terms.items():
            if mask != 1 << slot:
                raise ValueError("image is not linear in the chosen generic slot")
            alpha = z[slot * dim:(slot + 1) * dim]
            if any(z[:slot * dim]) or any(z[(slot + 1) * dim:]):
                raise ValueError("image depends on other generic slots")
            terms.setdefault(alpha, {})[bkey] = terms.get(alpha, {}).get(bkey, ZERO) + c
        return cls(base, {a: AlgebraElement(base, t) for a, t in terms.items()})

    def apply(self, f: AlgebraElement) -> AlgebraElement:
        out = AlgebraElement.zero(f.model if isinstance(f.model, Generic) else self.model)
        for alpha, c in self.terms.items():
            d = f.derive_multi(alpha)
            if d:
                out = out + c * d
        return out

    __call__ = apply

    def order(self) -> int:
        return max((sum(a) for a in self.terms), default=0)

    def is_derivation(self) -> bool:
        """No zeroth-order part and first order only."""
        return all(sum(a) == 1 for a in self.terms)

    def components(self):
        """Coefficients ``X^j`` of a first-order operator."""
        out = []
        for j in range(self.model.dim):
            alpha = [0] * self.model.dim
            alpha[j] = 1
            out.append(self.terms.get(tuple(alpha), AlgebraElement.zero(self.model)))
        return out

    def compose(self, other: DiffOperator) -> DiffOperator:
        """``self o other``."""
        e = generic(self.model, 0, 1)
        return DiffOperator.from_generic(self.model, self.apply(other.apply(e)))

    def __add__(self, other):
        if not isinstance(other, DiffOperator):
            return NotImplemented
        terms = dict(self.terms)
        for a, c in other.terms.items():
            terms[a] = terms[a] + c if a in terms else c
        return DiffOperator(self.model, terms)

    def __neg__(self):
        return DiffOperator(self.model, {a: -c for a, c in self.terms.items()})

    def __sub__(self, other):
        return self + (-other)

    def __mul__(self, c):
        if isinstance(c, AlgebraElement):
            return DiffOperator(self.model, {a: v * c for a, v in self.terms.items()})
        return DiffOperator(self.model, {a: v.scale(c) for a, v in self.terms.items()})

    __rmul__ = __mul__

    def __eq__(self, other):
        if not isinstance(other, DiffOperator):
            return NotImplemented
        return self.model == other.model and self.terms.keys() == other.terms.keys() and all(
            self.terms[a] == other.terms[a] for a in self.terms
        )

    __hash__ = None

    def __bool__(self):
        return bool(self.terms)

    def __str__(self):
        if not self.terms:
            return "0"
        parts = []
        for alpha in sorted(self.terms, key=lambda a: (sum(a), tuple(-v for v in a))):
            d = "".join(f"d{j + 1}" * e for j, e in enumerate(alpha)) or "1"
            c = self.terms[alpha]
            cs = str(c)
            if cs == "1":
                parts.append(d)
            else:
                parts.append(f"({cs})*{d}")
        return " + ".join(parts)

    __repr__ = __str__


# --------------------------------------------------------------------------
# witness search for failed symbolic identities


def candidate_keys(model, radius: int = 1):
    """Small monomial keys, ordered so that unit vectors come first."""
    dim = model.dim
    if isinstance(model, Trig):
        keys = [k for k in itertools.product(range(-radius, radius + 1), repeat=dim) if any(k)]
        keys.sort(key=lambda k: (sum(map(abs, k)), tuple(-v for v in k)))
        return keys + [(0,) * dim]
    keys = [
        k
        for k in itertools.product(range(radius + 1), repeat=dim)
        if 0 < sum(k) <= radius
    ]
    keys.sort(key=lambda k: (sum(k), tuple(-v for v in k)))
    return [(0,) * dim] + keys


def evaluate_generic(image: AlgebraElement, keys: Sequence) -> AlgebraElement:
    """Specialize a generic trig expression at ``e_s = E[keys[s]]``."""
    model = image.model
    base = model.base
    if not isinstance(base, Trig):
        raise TypeError("evaluation at exponentials is defined for the torus model")
    dim = base.dim
    terms: dict = {}
    for (bkey, mask, z), c in image.terms.items():
        coeff = c
        key = list(bkey)
        for s in range(model.slots):
            if mask >> s & 1:
                for j in range(dim):
                    key[j] += keys[s][j]
            for j in range(dim):
                e = z[s * dim + j]
                if e:
                    coeff = coeff * GaussianRational(0, keys[s][j]) ** e
        if coeff:
            key = tuple(key)
            terms[key] = terms.get(key, ZERO) + coeff
    return AlgebraElement(base, terms)


def find_witness(difference: AlgebraElement, nslots: int):
    """Return concrete monomials on which a failing multilinear identity is nonzero.

    ``difference`` is the defect evaluated on generic exponentials.  For the
    torus the defect is a polynomial in the frequencies, so a small search box
    suffices; for polynomials, the componentwise-minimal derivative pattern
    gives a witness directly.
    """
    model = difference.model
    base = model.base
    dim = base.dim
    if not difference:
        return None
    if isinstance(base, Trig):
        for radius in (1, 2, 3):
            cands = candidate_keys(base, radius)
            for combo in itertools.product(cands, repeat=nslots):
                if evaluate_generic(difference, combo):
                    return tuple(AlgebraElement.monomial(base, k) for k in combo)
        return None
    patterns = {z for (_, _, z) in difference.terms}
    minimal = [
        p for p in patterns
        if not any(q != p and all(a <= b for a, b in zip(q, p)) for q in patterns)
    ]
    p = min(minimal, key=lambda z: (sum(z), z))
    return tuple(
        AlgebraElement.monomial(base, p[s * dim:(s + 1) * dim]) for s in range(nslots)
    )


def is_poisson_vector_field(X: DiffOperator, pi: PoissonStructure):
    """Check ``X{a,b} = {Xa,b} + {a,Xb}``.

    Returns ``(True, None)`` or ``(False, (a, b))`` with a concrete pair.
    """
    if not X.is_derivation():
        raise ValueError("expected a first-order derivation (no zeroth-order term)")
    a = generic(X.model, 0, 2)
    b = generic(X.model, 1, 2)
    defect = X(poisson_bracket(a, b, pi)) - poisson_bracket(X(a), b, pi) - poisson_bracket(a, X(b), pi)
    if not defect:
        return True, None
    return False, find_witness(defect, 2)


def hamiltonian_field(H: AlgebraElement, pi: PoissonStructure) -> DiffOperator:
    """``X_H = {., H}``."""
    dH = [H.derive(i) for i in range(pi.dim)]
    comps = []
    for j in range(pi.dim):
        c = AlgebraElement.zero(H.model)
        for i in range(pi.dim):
            if pi[j, i] and dH[i]:
                c = c + dH[i].scale(pi[j, i])
        comps.append(c)
    return DiffOperator.vector_field(H.model, comps)


def bracket_operator(a: AlgebraElement, pi: PoissonStructure) -> DiffOperator:
    """``{a, .}`` as a vector field."""
    return -hamiltonian_field(a, pi)
