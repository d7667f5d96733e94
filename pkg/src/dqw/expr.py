"""Expression grammar, model names, and star-product spec files.

Grammar::

    expr   := term (('+' | '-') term)*
    term   := unary (('*' | '/') unary)*
    unary  := ('-' | '+') unary | power
    power  := atom ('^' ['-'] INT)?
    atom   := NUMBER | 'i' | 'L' | 'E[' INT (',' INT)* ']' | 'x' INT | 'd' INT | '(' expr ')'

``L`` is the formal parameter; ``d<j>`` only appears in vector-field expressions.
"""

from __future__ import annotations

import json
import os
import re
from fractions import Fraction
from pathlib import Path

from .algebra import (
    ONE,
    AlgebraElement,
    DiffOperator,
    GaussianRational,
    I,
    NotAUnit,
    PoissonStructure,
    Poly,
    Trig,
)
from .derivations import ClosedOneForm
from .formal import (
    DEFAULT_ORDER,
    BidiffCochain,
    FormalSeries,
    StarProduct,
    check_unital,
    extract_poisson,
    moyal,
)


class ParseError(ValueError):
    def __init__(self, message: str, src: str, pos: int):
        self.src, self.pos = src, pos
        super().__init__(f"{message} at position {pos}\n  {src}\n  {' ' * pos}^")


class SpecError(ValueError):
    pass


def default_order() -> int:
    env = os.environ.get("DQW_ORDER")
    if env is None:
        return DEFAULT_ORDER
    try:
        n = int(env)
    except ValueError:
        raise SpecError(f"DQW_ORDER must be an integer, got {env!r}") from None
    if n < 0:
        raise SpecError("DQW_ORDER must be non-negative")
    return n


_MODEL_NAME = re.compile(r"^(torus|poly|T|R)\^?(\d+)$")


def model_from_name(name: str):
    """``torus2``, ``T^2``, ``poly4``, ``R^4``."""
    m = _MODEL_NAME.match(name.strip())
    if not m:
        raise SpecError(f"unknown model {name!r} (use torusN or polyN)")
    kind, dim = m.group(1), int(m.group(2))
    return Trig(dim) if kind in ("torus", "T") else Poly(dim)


# --------------------------------------------------------------------------
# tokens

_TOKEN = re.compile(
    r"\s*(?:(?P<num>\d+)|(?P<E>E\[)|(?P<var>[xd]\d+)|(?P<name>[iL])(?![A-Za-z0-9_])|(?P<op>[-+*/^(),\]]))"
)


def _tokenize(src: str):
    pos, out = 0, []
    while pos < len(src):
        if src[pos:].strip() == "":
            break
        m = _TOKEN.match(src, pos)
        if not m or m.end() == pos:
            start = pos + len(src[pos:]) - len(src[pos:].lstrip())
            raise ParseError(f"unexpected character {src[start]!r}", src, start)
        kind = m.lastgroup
        out.append((kind, m.group(kind), m.start(kind)))
        pos = m.end()
    out.append(("end", "", len(src)))
    return out


# --------------------------------------------------------------------------
# values: {(lambda power, derivative index or None): element coefficient}


class _Value:
    __slots__ = ("terms",)

    def __init__(self, terms):
        self.terms = {k: v for k, v in terms.items() if v}


class _Parser:
    def __init__(self, src: str, model, allow_fields: bool):
        self.src = src
        self.tokens = _tokenize(src)
        self.i = 0
        self.model = model
        self.allow_fields = allow_fields
        if model is None:
            xs = [int(v[1:]) for k, v, _ in self.tokens if k == "var" and v[0] == "x"]
            if xs:
                self.model = Poly(max(xs))

    # token helpers
    def peek(self):
        return self.tokens[self.i]

    def take(self):
        tok = self.tokens[self.i]
        self.i += 1
        return tok

    def expect(self, text):
        _, val, pos = self.take()
        if val != text:
            raise ParseError(f"expected {text!r}, found {val or 'end of input'!r}", self.src, pos)

    def fail(self, msg, pos=None):
        raise ParseError(msg, self.src, self.peek()[2] if pos is None else pos)

    # model handling
    def need_model(self, kind, dim, pos):
        if self.model is None:
            self.model = Trig(dim) if kind == "torus" else Poly(dim)
            return
        if kind == "torus" and not isinstance(self.model, Trig):
            self.fail(f"E[...] is not an element of {self.model}", pos)
        if kind == "poly" and not isinstance(self.model, Poly):
            self.fail(f"x{dim} is not an element of {self.model}", pos)
        if kind == "torus" and dim != self.model.dim:
            self.fail(f"E[...] needs {self.model.dim} entries", pos)
        if kind == "poly" and dim > self.model.dim:
            self.fail(f"x{dim} exceeds the dimension of {self.model}", pos)

    def const(self, c):
        return ("const", GaussianRational.coerce(c))

    # values are kept lazy ("const", c) until the model is known
    def parse(self):
        v = self.expr()
        kind, val, pos = self.peek()
        if kind != "end":
            self.fail(f"unexpected {val!r}", pos)
        return v

    def expr(self):
        v = self.term()
        while self.peek()[1] in ("+", "-"):
            op = self.take()[1]
            w = self.term()
            v = self.add(v, w, -1 if op == "-" else 1)
        return v

    def term(self):
        v = self.unary()
        while self.peek()[1] in ("*", "/"):
            _, op, pos = self.take()
            w = self.unary()
            if op == "*":
                v = self.mul(v, w, pos)
            else:
                v = self.div(v, w, pos)
        return v

    def unary(self):
        if self.peek()[1] == "-":
            self.take()
            return self.scale(self.unary(), -1)
        if self.peek()[1] == "+":
            self.take()
            return self.unary()
        return self.power()

    def power(self):
        v = self.atom()
        if self.peek()[1] == "^":
            _, _, pos = self.take()
            neg = False
            if self.peek()[1] == "-":
                self.take()
                neg = True
            kind, val, p = self.take()
            if kind != "num":
                self.fail("exponent must be an integer", p)
            v = self.pow(v, -int(val) if neg else int(val), pos)
        return v

    def atom(self):
        kind, val, pos = self.take()
        if kind == "num":
            return self.const(int(val))
        if kind == "name" and val == "i":
            return self.const(I)
        if kind == "name" and val == "L":
            return ("lam",)
        if kind == "E":
            ks = [self.signed_int()]
            while self.peek()[1] == ",":
                self.take()
                ks.append(self.signed_int())
            self.expect("]")
            self.need_model("torus", len(ks), pos)
            return _Value({(0, None): AlgebraElement.monomial(self.model, tuple(ks))})
        if kind == "var":
            j = int(val[1:])
            if j < 1:
                self.fail("indices start at 1", pos)
            if val[0] == "x":
                if isinstance(self.model, Trig):
                    self.fail(f"{val} is not an element of {self.model}", pos)
                self.need_model("poly", j, pos)
                e = [0] * self.model.dim
                e[j - 1] = 1
                return _Value({(0, None): AlgebraElement.monomial(self.model, tuple(e))})
            if not self.allow_fields:
                self.fail(f"derivative symbol {val} outside a vector-field expression", pos)
            return ("d", j - 1, pos)
        if val == "(":
            v = self.expr()
            self.expect(")")
            return v
        self.fail(f"unexpected {val or 'end of input'!r}", pos)

    def signed_int(self):
        sign = 1
        if self.peek()[1] == "-":
            self.take()
            sign = -1
        kind, val, pos = self.take()
        if kind != "num":
            self.fail("expected an integer", pos)
        return sign * int(val)

    # arithmetic on lazy values
    def materialize(self, v, pos=None):
        if isinstance(v, _Value):
            return v
        if self.model is None:
            self.fail("cannot infer the model; pass one explicitly", pos if pos is not None else 0)
        if v[0] == "const":
            return _Value({(0, None): AlgebraElement.const(self.model, v[1])})
        if v[0] == "lam":
            return _Value({(1, None): AlgebraElement.const(self.model, ONE)})
        if v[0] == "d":
            if v[1] >= self.model.dim:
                self.fail(f"d{v[1] + 1} exceeds the dimension of {self.model}", v[2])
            return _Value({(0, v[1]): AlgebraElement.const(self.model, ONE)})
        raise AssertionError(v)

    def add(self, v, w, sign):
        if _lazy_const(v, w):
            return ("const", v[1] + w[1] * sign)
        v, w = self.materialize(v), self.materialize(w)
        out = dict(v.terms)
        for k, c in w.terms.items():
            out[k] = out[k] + c.scale(sign) if k in out else c.scale(sign)
        return _Value(out)

    def scale(self, v, c):
        if isinstance(v, tuple) and v[0] == "const":
            return ("const", v[1] * c)
        v = self.materialize(v)
        return _Value({k: e.scale(c) for k, e in v.terms.items()})

    def mul(self, v, w, pos):
        if _lazy_const(v, w):
            return ("const", v[1] * w[1])
        if isinstance(v, tuple) and v[0] == "const":
            return self.scale(self.materialize(w, pos), v[1])
        if isinstance(w, tuple) and w[0] == "const":
            return self.scale(self.materialize(v, pos), w[1])
        v, w = self.materialize(v, pos), self.materialize(w, pos)
        out: dict = {}
        for (p, j), a in v.terms.items():
            for (q, k), b in w.terms.items():
                if j is not None and k is not None:
                    self.fail("only first-order vector fields are supported", pos)
                key = (p + q, j if j is not None else k)
                out[key] = out[key] + a * b if key in out else a * b
        return _Value(out)

    def div(self, v, w, pos):
        if isinstance(w, tuple) and w[0] == "const":
            if not w[1]:
                self.fail("division by zero", pos)
            return self.scale(v, w[1].inverse())
        w = self.materialize(w, pos)
        if set(w.terms) == {(0, None)} and w.terms[(0, None)].is_constant():
            c = w.terms[(0, None)].constant_part()
            return self.scale(v, c.inverse())
        self.fail("can only divide by a nonzero scalar", pos)

    def pow(self, v, n, pos):
        if isinstance(v, tuple) and v[0] == "const":
            if n < 0 and not v[1]:
                self.fail("division by zero", pos)
            return ("const", v[1] ** n)
        v = self.materialize(v, pos)
        if n < 0:
            if set(v.terms) != {(0, None)}:
                self.fail("negative powers need a unit of the algebra", pos)
            try:
                v = _Value({(0, None): v.terms[(0, None)].invert()})
            except NotAUnit as exc:
                self.fail(str(exc), pos)
            n = -n
        out = self.materialize(self.const(1))
        for _ in range(n):
            out = self.mul(out, v, pos)
        return out


def _lazy_const(v, w):
    return isinstance(v, tuple) and v[0] == "const" and isinstance(w, tuple) and w[0] == "const"


def _run(src: str, model, allow_fields: bool):
    p = _Parser(src, model, allow_fields)
    v = p.parse()
    if isinstance(v, tuple) and v[0] == "const" and p.model is None:
        raise ParseError("cannot infer the model of a pure scalar; pass one explicitly", src, 0)
    return p.model, p.materialize(v)


def parse_expression(src: str, model=None, order: int | None = None):
    """Parse to an ``AlgebraElement``, or a ``FormalSeries`` if ``L`` occurs."""
    model, v = _run(src, model, allow_fields=False)
    if not v.terms:
        return AlgebraElement.zero(model)
    top = max(p for p, _ in v.terms)
    if top == 0:
        return v.terms[(0, None)]
    coeffs = [v.terms.get((p, None), AlgebraElement.zero(model)) for p in range(top + 1)]
    order = default_order() if order is None else order
    return FormalSeries(coeffs, max(order, top))


def parse_series(src: str, model, order: int | None = None) -> FormalSeries:
    order = default_order() if order is None else order
    v = parse_expression(src, model, order)
    return v if isinstance(v, FormalSeries) else FormalSeries.of(v, order)


def parse_field(src: str, model=None) -> DiffOperator:
    """``E[0,1]*d1 + i*d2`` style first-order operators (no formal parameter)."""
    model, v = _run(src, model, allow_fields=True)
    comps: dict = {}
    for (p, j), c in v.terms.items():
        if p:
            raise ParseError("vector fields cannot depend on L", src, 0)
        if j is None:
            raise ParseError("every term of a vector field needs a derivative d<j>", src, 0)
        comps[j] = c
    return DiffOperator.vector_field(model, [comps.get(j, AlgebraElement.zero(model)) for j in range(model.dim)])


def parse_scalar(src: str) -> GaussianRational:
    v = parse_expression(src, Poly(1))
    if not v.is_constant():
        raise ParseError("expected a scalar", src, 0)
    return v.constant_part()


def parse_matrix(src: str) -> list:
    """JSON ``[[0,1],[-1,0]]`` or ``0,1;-1,0``; entries may be fractions."""
    src = src.strip()
    if src.startswith("["):
        rows = json.loads(src)
    else:
        rows = [r.split(",") for r in src.split(";")]
    return [[Fraction(str(v).strip()) for v in r] for r in rows]


def parse_form(src: str, model) -> ClosedOneForm:
    """``c1,c2;g=<expr>`` with either part optional."""
    const, pot = None, None
    for part in src.split(";"):
        part = part.strip()
        if not part:
            continue
        if part.startswith("g="):
            pot = parse_expression(part[2:], model)
            if isinstance(pot, FormalSeries):
                raise SpecError("the potential cannot depend on L")
        else:
            const = [parse_scalar(c) for c in part.split(",")]
    return ClosedOneForm(model, const, pot)


# --------------------------------------------------------------------------
# spec files


def _load(source):
    if isinstance(source, dict):
        return source
    text = Path(source).read_text()
    try:
        return json.loads(text)
    except json.JSONDecodeError as exc:
        raise SpecError(f"{source}: not valid JSON ({exc})") from None


def _model_from_spec(d) -> object:
    m = d.get("model")
    if isinstance(m, str):
        return model_from_name(m)
    if not isinstance(m, dict) or "type" not in m or "dim" not in m:
        raise SpecError("'model' must be {\"type\": \"torus\"|\"poly\", \"dim\": n}")
    if m["type"] not in ("torus", "poly"):
        raise SpecError(f"unknown model type {m['type']!r}")
    dim = m["dim"]
    if not isinstance(dim, int) or dim < 1:
        raise SpecError("model dim must be a positive integer")
    return Trig(dim) if m["type"] == "torus" else Poly(dim)


def _cochain_terms(model, items, where):
    terms = {}
    for t in items:
        if not isinstance(t, dict) or not {"coeff", "left", "right"} <= set(t):
            raise SpecError(f"{where}: each term needs coeff, left and right")
        L, R = tuple(t["left"]), tuple(t["right"])
        if len(L) != model.dim or len(R) != model.dim or any(not isinstance(v, int) or v < 0 for v in L + R):
            raise SpecError(f"{where}: multi-indices must be {model.dim} non-negative integers")
        c = parse_expression(str(t["coeff"]), model)
        if isinstance(c, FormalSeries):
            raise SpecError(f"{where}: coefficients cannot depend on L")
        key = (L, R)
        terms[key] = terms[key] + c if key in terms else c
    return BidiffCochain(model, terms)


def _cochain_list(model, entries, order, where):
    out = [BidiffCochain(model) for _ in range(order)]
    for e in entries:
        if not isinstance(e, dict) or "r" not in e or "terms" not in e:
            raise SpecError(f"{where}: cochain entries need 'r' and 'terms'")
        r = e["r"]
        if not isinstance(r, int) or r < 1:
            raise SpecError(f"{where}: 'r' must be a positive integer")
        if r <= order:
            out[r - 1] = out[r - 1] + _cochain_terms(model, e["terms"], f"{where} r={r}")
    return out


def load_product_spec(source, order: int | None = None) -> StarProduct:
    """Build and validate a star product from a JSON spec (path or dict)."""
    d = _load(source)
    if not isinstance(d, dict):
        raise SpecError("spec must be a JSON object")
    model = _model_from_spec(d)
    if "poisson" not in d:
        raise SpecError("missing 'poisson' field")
    try:
        pi = PoissonStructure(parse_matrix(json.dumps(d["poisson"])))
    except (ValueError, TypeError) as exc:
        raise SpecError(f"invalid 'poisson': {exc}") from None
    if pi.dim != model.dim:
        raise SpecError(f"'poisson' is {pi.dim}x{pi.dim} but the model has dim {model.dim}")
    if order is None:
        order = d.get("order", default_order()) if "DQW_ORDER" not in os.environ else default_order()
    if not isinstance(order, int) or order < 0:
        raise SpecError("'order' must be a non-negative integer")
    builtin = d.get("builtin")
    if builtin is not None:
        if builtin != "moyal":
            raise SpecError(f"unknown builtin {builtin!r}")
        corr = []
        for c in d.get("corrections", []):
            try:
                corr.append(PoissonStructure(parse_matrix(json.dumps(c))))
            except (ValueError, TypeError) as exc:
                raise SpecError(f"invalid correction: {exc}") from None
        return moyal(model, pi, order, corr)
    if "cochains" not in d:
        raise SpecError("spec needs 'cochains' or 'builtin'")
    s = StarProduct(model, _cochain_list(model, d["cochains"], order, "cochains"), order, pi, d.get("name", "custom"))
    if not s.is_unital() or not check_unital(s):
        raise SpecError("product is not unital: some cochain does not kill constants")
    if order >= 1 and extract_poisson(s) != pi:
        raise SpecError("'poisson' does not match the bracket of C_1")
    return s


def product_to_spec(s: StarProduct) -> dict:
    kind = "torus" if isinstance(s.model, Trig) else "poly"
    pi = extract_poisson(s)
    return {
        "model": {"type": kind, "dim": s.model.dim},
        "poisson": [[str(v) for v in row] for row in pi.matrix],
        "order": s.order,
        "cochains": [{"r": r + 1, "terms": c.to_json()} for r, c in enumerate(s.cochains) if c.terms],
    }
