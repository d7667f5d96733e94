"""Class-level Picard data: characteristic classes, the semidirect group law, images
and kernels of the classical-limit map, and the lattice non-surjectivity witness.

Order-0 class vectors are kept in reduced units (divided by 2*pi*i), so the
Picard action is translation by integer vectors.
"""

from __future__ import annotations

import itertools
import math
from collections import deque
from dataclasses import dataclass
from fractions import Fraction

from .algebra import ZERO, GaussianRational, Poly, Trig, _invert
from .derivations import UnsupportedModel

DEFAULT_CAP = 10_000


class CapExceeded(RuntimeError):
    pass


class NotReduced(ValueError):
    pass


class ZeroRank(ValueError):
    pass


Matrix = tuple  # tuple of integer row tuples


def _mat(rows) -> Matrix:
    return tuple(tuple(int(v) for v in r) for r in rows)


def identity(m: int) -> Matrix:
    return tuple(tuple(int(i == j) for j in range(m)) for i in range(m))


def matmul(a: Matrix, b: Matrix) -> Matrix:
    return tuple(
        tuple(sum(a[i][k] * b[k][j] for k in range(len(b))) for j in range(len(b[0])))
        for i in range(len(a))
    )


def matvec(a, v):
    zero = v[0] * 0 if v else 0
    return tuple(sum((a[i][k] * v[k] for k in range(len(v))), zero) for i in range(len(a)))


def det(a) -> int:
    """Integer determinant by cofactor expansion (small sizes only)."""
    n = len(a)
    if n == 0:
        return 1
    if n == 1:
        return a[0][0]
    if n == 2:
        return a[0][0] * a[1][1] - a[0][1] * a[1][0]
    return sum(
        (-1) ** j * a[0][j] * det([row[:j] + row[j + 1:] for row in a[1:]])
        for j in range(n)
        if a[0][j]
    )


def unimodular_inverse(a: Matrix) -> Matrix:
    if abs(det(a)) != 1:
        raise ValueError("matrix is not in GL(m, Z)")
    inv = _invert([[Fraction(v) for v in r] for r in a])
    return _mat(inv)


def _gr(v) -> GaussianRational:
    return GaussianRational.coerce(v)


# --------------------------------------------------------------------------
# characteristic classes


@dataclass(frozen=True)
class ClassSeries:
    """``(1/(i lambda)) omega + omega_0 + lambda omega_1 + ...`` as coordinate vectors."""

    omega: tuple
    terms: tuple
    reduced: bool = True

    def __post_init__(self):
        object.__setattr__(self, "omega", tuple(Fraction(v) for v in self.omega))
        terms = tuple(tuple(_gr(v) for v in t) for t in self.terms)
        object.__setattr__(self, "terms", terms)
        m = len(self.omega)
        if any(len(t) != m for t in terms):
            raise ValueError("all class vectors must have the ambient rank")

    @property
    def rank(self):
        return len(self.omega)

    def is_trivial(self):
        return not any(self.omega) and not any(v for t in self.terms for v in t)

    def to_json(self):
        return {
            "omega": [str(v) for v in self.omega],
            "terms": [[str(v) for v in t] for t in self.terms],
            "reduced": self.reduced,
        }


def class_pullback(c: ClassSeries, psi) -> ClassSeries:
    """Apply the pull-back matrix to every coefficient vector."""
    psi = _mat(psi)
    if abs(det(psi)) != 1:
        raise ValueError("pull-back must be unimodular")
    return ClassSeries(
        matvec(psi, c.omega) if c.omega else (),
        tuple(matvec(psi, t) if t else () for t in c.terms),
        c.reduced,
    )


def picard_act(c: ClassSeries, l) -> ClassSeries:
    """Translate the order-0 vector by the integer free part ``e(l)``."""
    if not c.reduced:
        raise NotReduced("the Picard action is integer translation only in reduced units")
    l = tuple(int(v) for v in l)
    if not c.terms:
        raise ValueError("class series has no order-0 term")
    first = tuple(a + b for a, b in zip(c.terms[0], l))
    return ClassSeries(c.omega, (first,) + c.terms[1:], c.reduced)


# --------------------------------------------------------------------------
# groups


class LatticeGroup:
    """Subgroup of GL(m, Z) generated by ``generators``; closed by breadth-first search."""

    def __init__(self, generators, cap: int = DEFAULT_CAP):
        gens = [_mat(g) for g in generators]
        if not gens:
            raise ValueError("at least one generator is needed (use the identity)")
        self.rank = len(gens[0])
        for g in gens:
            if len(g) != self.rank or abs(det(g)) != 1:
                raise ValueError(f"generator {g} is not in GL({self.rank}, Z)")
        self.generators = gens
        self.cap = cap
        self._closure = None

    @property
    def elements(self) -> list:
        if self._closure is None:
            self._closure = self._close()
        return self._closure

    def _close(self):
        start = identity(self.rank)
        seen = {start}
        order = [start]
        queue = deque([start])
        while queue:
            g = queue.popleft()
            for h in self.generators:
                k = matmul(g, h)
                if k not in seen:
                    if len(seen) >= self.cap:
                        raise CapExceeded(f"group closure exceeds {self.cap} elements")
                    seen.add(k)
                    order.append(k)
                    queue.append(k)
        return order

    def __len__(self):
        return len(self.elements)

    def __contains__(self, g):
        return _mat(g) in set(self.elements)


@dataclass(frozen=True)
class TorsionGroup:
    """Finite abelian group given by invariant factors ``d_1 | d_2 | ...``."""

    factors: tuple = ()

    def __post_init__(self):
        f = tuple(int(d) for d in self.factors)
        object.__setattr__(self, "factors", f)
        if any(d < 2 for d in f):
            raise ValueError("invariant factors must be at least 2")
        if any(b % a for a, b in itertools.pairwise(f)):
            raise ValueError("invariant factors must form a divisibility chain")

    def elements(self):
        return list(itertools.product(*(range(d) for d in self.factors)))

    def zero(self):
        return (0,) * len(self.factors)

    def add(self, s, t):
        return tuple((a + b) % d for a, b, d in zip(s, t, self.factors))

    def neg(self, s):
        return tuple(-a % d for a, d in zip(s, self.factors))

    def __len__(self):
        return math.prod(self.factors)


NO_TORSION = TorsionGroup()


@dataclass(frozen=True)
class PicardElement:
    """``(psi, l)`` with ``psi`` the pull-back matrix and ``l = (free, torsion)``.

    ``psi`` acts trivially on torsion at this level.
    """

    psi: Matrix
    free: tuple
    torsion: tuple = ()

    def __post_init__(self):
        object.__setattr__(self, "psi", _mat(self.psi))
        object.__setattr__(self, "free", tuple(int(v) for v in self.free))
        object.__setattr__(self, "torsion", tuple(int(v) for v in self.torsion))
        if abs(det(self.psi)) != 1:
            raise ValueError("psi must be in GL(m, Z)")
        if len(self.free) != len(self.psi):
            raise ValueError("free part must have the rank of psi")

    @classmethod
    def identity(cls, m: int, torsion: TorsionGroup = NO_TORSION):
        return cls(identity(m), (0,) * m, torsion.zero())

    def to_json(self):
        return {"psi": [list(r) for r in self.psi], "free": list(self.free), "torsion": list(self.torsion)}


def picard_group_law(x: PicardElement, y: PicardElement, torsion: TorsionGroup = NO_TORSION) -> PicardElement:
    """``(psi_1, l_1)(psi_2, l_2) = (psi_1 o psi_2, psi_2^* l_1 + l_2)``.

    Pull-backs compose contravariantly, so the stored matrix is ``psi_2 psi_1``.
    """
    if len(x.psi) != len(y.psi) or len(x.torsion) != len(y.torsion):
        raise ValueError("rank mismatch")
    free = tuple(a + b for a, b in zip(matvec(y.psi, x.free), y.free))
    return PicardElement(matmul(y.psi, x.psi), free, torsion.add(x.torsion, y.torsion))


def picard_inverse(x: PicardElement, torsion: TorsionGroup = NO_TORSION) -> PicardElement:
    inv = unimodular_inverse(x.psi)
    free = tuple(-v for v in matvec(inv, x.free))
    return PicardElement(inv, free, torsion.neg(x.torsion))


# --------------------------------------------------------------------------
# image and kernel of the classical limit


def _stabilizes(c: ClassSeries, psi) -> bool:
    if c.omega and matvec(psi, c.omega) != c.omega:
        return False
    return all(matvec(psi, t) == t for t in c.terms[1:] if t)


def _translation(c: ClassSeries, psi, sign: int):
    """``sign * (psi^* omega_0 - omega_0)`` if it is an integer vector, else ``None``."""
    w0 = c.terms[0] if c.terms else (ZERO,) * c.rank
    diff = [a - b for a, b in zip(matvec(psi, w0), w0)]
    if any(not d.is_integral() or d.im for d in diff):
        return None
    return tuple(sign * int(d.re) for d in diff)


def _admissible(c: ClassSeries, G: LatticeGroup, sign: int):
    if sign not in (1, -1):
        raise ValueError("sign flag must be +1 or -1")
    if not c.reduced:
        raise NotReduced("image computations need reduced units")
    for psi in G.elements:
        if _stabilizes(c, psi):
            t = _translation(c, psi, sign)
            if t is not None:
                yield psi, t


def image_clr(c: ClassSeries, G: LatticeGroup, torsion: TorsionGroup = NO_TORSION, sign: int = 1) -> set:
    """All ``l = (free, torsion)`` in the image of the restricted classical-limit map."""
    out = set()
    tors = torsion.elements()
    for _, t in _admissible(c, G, sign):
        out.update((t, s) for s in tors)
    return out


def image_cl(c: ClassSeries, G: LatticeGroup, torsion: TorsionGroup = NO_TORSION, sign: int = 1) -> set:
    out = set()
    tors = torsion.elements()
    for psi, t in _admissible(c, G, sign):
        out.update(PicardElement(psi, t, s) for s in tors)
    return out


def is_group_closed(elements, torsion: TorsionGroup = NO_TORSION) -> bool:
    elements = set(elements)
    return all(picard_group_law(x, y, torsion) in elements for x in elements for y in elements)


@dataclass(frozen=True)
class KernelDescriptor:
    """``C^m / (i Z^m)`` at order 0 plus ``lambda C^m[[lambda]]``; rank 0 means injective."""

    model: str
    quotient_rank: int
    lattice_rank: int
    higher_ranks: tuple
    order: int

    @property
    def injective(self):
        return self.quotient_rank == 0 and not any(self.higher_ranks)

    def same_class(self, u: list, v: list) -> bool:
        """Compare two coset representatives given as per-order coordinate vectors."""
        for r, (a, b) in enumerate(zip(u, v)):
            d = [_gr(x) - _gr(y) for x, y in zip(a, b)]
            if r == 0:
                if any(x.re or x.im.denominator != 1 for x in d):
                    return False
            elif any(d):
                return False
        return True

    def to_json(self):
        return {
            "model": self.model,
            "quotient_rank": self.quotient_rank,
            "lattice_rank": self.lattice_rank,
            "higher_ranks": list(self.higher_ranks),
            "order": self.order,
            "injective": self.injective,
        }


def kernel_descriptor(model, N: int) -> KernelDescriptor:
    """Kernel of the classical-limit map on the symplectic torus or flat space."""
    if isinstance(model, Trig):
        m = model.dim
        return KernelDescriptor(str(model), m, m, (m,) * N, N)
    if isinstance(model, Poly):
        return KernelDescriptor(str(model), 0, 0, (0,) * N, N)
    raise UnsupportedModel(str(model))


# --------------------------------------------------------------------------
# non-surjectivity witness


@dataclass(frozen=True)
class ExtendedRationalVector:
    """``v_j = sum_i coords[j][i] s_i`` with ``s_0 = 1`` and ``s_1..s_t`` independent over Q."""

    coords: tuple
    symbols: tuple = ()

    def __post_init__(self):
        width = 1 + len(self.symbols)
        rows = tuple(
            tuple(Fraction(x) for x in (r if isinstance(r, (list, tuple)) else (r,))) for r in self.coords
        )
        rows = tuple(r + (Fraction(0),) * (width - len(r)) for r in rows)
        if any(len(r) != width for r in rows):
            raise ValueError("coordinate rows must match the symbol count")
        object.__setattr__(self, "coords", rows)
        object.__setattr__(self, "symbols", tuple(self.symbols))

    @classmethod
    def rational(cls, values):
        return cls(tuple((Fraction(v),) for v in values))

    @property
    def rank(self):
        return len(self.coords)

    def part(self, i: int) -> tuple:
        return tuple(r[i] for r in self.coords)

    def __str__(self):
        names = ("1",) + self.symbols
        out = []
        for r in self.coords:
            bits = [f"{c}" if n == "1" else f"{c}*{n}" for c, n in zip(r, names) if c]
            out.append(" + ".join(bits) or "0")
        return "(" + ", ".join(out) + ")"


@dataclass
class WitnessCertificate:
    l: tuple
    kind: str  # "prime", "integral" or "zero"
    p: int | None = None
    a: tuple | None = None
    d: int | None = None
    verified: int | None = None  # oracle bound that confirmed it

    def to_json(self):
        out = {"l": list(self.l), "kind": self.kind, "verified_bound": self.verified}
        if self.kind == "prime":
            out.update({"p": self.p, "a": list(self.a), "d": self.d})
        return out


def _is_prime(n: int) -> bool:
    return n >= 2 and all(n % k for k in range(2, math.isqrt(n) + 1))


def witness_nonsurjective(v, oracle_bound: int | None = None) -> WitnessCertificate:
    """An integer ``l`` with ``l != A v - v`` for every ``A`` in GL(m, Z)."""
    if not isinstance(v, ExtendedRationalVector):
        v = ExtendedRationalVector.rational(v)
    m = v.rank
    if m == 0:
        raise ZeroRank("rank must be at least 1")
    r0 = v.part(0)
    if any(x.denominator != 1 for x in r0):
        d = math.lcm(*(x.denominator for x in r0))
        a = tuple(int(x * d) for x in r0)
        p = 2
        while not _is_prime(p) or d % p == 0 or any(x and x % p == 0 for x in a):
            p += 1
        dinv = pow(d, -1, p)
        l = tuple(-x * dinv % p for x in a)
        cert = WitnessCertificate(l, "prime", p, a, d)
        assert all(x * d % p for x in a if x % p) and d % p
    elif any(r0):
        cert = WitnessCertificate(tuple(int(x) for x in r0), "integral")
    else:
        cert = WitnessCertificate(tuple(int(i == 0) for i in range(m)), "zero")
    if oracle_bound is not None:
        if brute_force_orbit_check(v, cert.l, oracle_bound):
            raise AssertionError(f"certificate {cert} refuted by enumeration")
        cert.verified = oracle_bound
    return cert


def brute_force_orbit_check(v, l, bound: int) -> bool:
    """True iff some integer ``A`` with entries in ``[-bound, bound]`` and ``det A = +-1``
    satisfies ``A v - v = l`` (symbolic parts of ``v`` must then be fixed by ``A``)."""
    if not isinstance(v, ExtendedRationalVector):
        v = ExtendedRationalVector.rational(v)
    m = v.rank
    l = tuple(int(x) for x in l)
    width = len(v.coords[0])
    cols = [v.part(i) for i in range(width)]
    rng = range(-bound, bound + 1)
    # each row of A is constrained independently: A_j . r_0 = r_0j + l_j, A_j . r_i = r_ij
    rows = []
    for j in range(m):
        target = [cols[0][j] + l[j]] + [cols[i][j] for i in range(1, width)]
        cand = [
            row for row in itertools.product(rng, repeat=m)
            if all(sum(row[k] * cols[i][k] for k in range(m)) == target[i] for i in range(width))
        ]
        if not cand:
            return False
        rows.append(cand)
    return any(abs(det(A)) == 1 for A in itertools.product(*rows))
