"""``dqw`` command line: one subcommand per verification, deterministic reports."""

from __future__ import annotations

import argparse
import json
import random
import sys
import time
from fractions import Fraction
from pathlib import Path

from . import algebra, bimodule, classify, connections, derivations, formal, starexp
from .algebra import AlgebraElement, PoissonStructure, Trig
from .expr import (
    ParseError,
    SpecError,
    default_order,
    load_product_spec,
    model_from_name,
    parse_expression,
    parse_field,
    parse_form,
    parse_matrix,
    parse_series,
)

EXIT_OK, EXIT_FAIL, EXIT_USAGE = 0, 1, 2


class UsageError(Exception):
    pass


class Report:
    """``status`` is ``pass``, ``fail`` or ``value``; everything else goes in ``data``."""

    def __init__(self, command: str, status: str = "value", **data):
        self.command = command
        self.status = status
        self.data = data

    def to_dict(self):
        return {"command": self.command, "status": self.status, **self.data}

    def render(self, fmt: str) -> str:
        d = self.to_dict()
        if fmt == "json":
            return json.dumps(d, sort_keys=True, indent=2)
        lines = []
        _text(d, "", lines)
        return "\n".join(lines)

    @property
    def exit_code(self):
        return EXIT_FAIL if self.status in ("fail", "error") else EXIT_OK


def _text(value, prefix, lines):
    if isinstance(value, dict):
        for k in sorted(value):
            _text(value[k], f"{prefix}{k}." if isinstance(value[k], dict) else f"{prefix}{k}", lines)
        return
    if isinstance(value, list) and value and all(isinstance(v, (dict, list)) for v in value):
        for i, v in enumerate(value):
            _text(v, f"{prefix}[{i}].", lines)
        return
    shown = json.dumps(value, sort_keys=True) if isinstance(value, (list, bool)) or value is None else str(value)
    lines.append(f"{prefix.rstrip('.')}: {shown}")


def _series_json(f: formal.FormalSeries):
    return [str(c) for c in f.coeffs]


# --------------------------------------------------------------------------
# inputs


def _order(args):
    return args.order if args.order is not None else default_order()


def _product(args, source=None) -> formal.StarProduct:
    """A spec file path, or ``moyal:<model>`` for the standard bracket."""
    src = source or args.product
    if src.startswith("moyal:"):
        model = model_from_name(src.split(":", 1)[1])
        if model.dim % 2:
            raise SpecError("the builtin Moyal product needs an even dimension")
        return formal.moyal(model, PoissonStructure.standard(model.dim // 2), _order(args))
    path = Path(src)
    if not path.exists():
        raise SpecError(f"no such spec file: {src}")
    return load_product_spec(path, args.order)


def _json_file(path):
    p = Path(path)
    if not p.exists():
        raise SpecError(f"no such file: {path}")
    try:
        return json.loads(p.read_text())
    except json.JSONDecodeError as exc:
        raise SpecError(f"{path}: invalid JSON ({exc})") from None


# --------------------------------------------------------------------------
# commands


def cmd_assoc(args):
    s = _product(args)
    rep = formal.check_associativity(s)
    return Report("assoc", "pass" if rep.passed else "fail", product=repr(s), unital=formal.check_unital(s),
                  **{k: v for k, v in rep.to_json().items() if k != "status"})


def cmd_exp(args):
    s = _product(args)
    H = parse_series(args.h, s.model, s.order)
    t = Fraction(args.t)
    E = starexp.star_exp(s, H, t)
    data = {"h": str(H), "t": str(t), "exp": _series_json(E)}
    if args.check:
        G = parse_series(args.g, s.model, s.order) if args.g else None
        rep = starexp.check_exp_identities(s, H, G)
        data["identities"] = rep.to_json()
        return Report("exp", "pass" if rep.passed else "fail", **data)
    return Report("exp", **data)


def cmd_log(args):
    s = _product(args)
    u = parse_series(args.u, s.model, s.order)
    H = starexp.star_log(s, u)
    return Report("log", u=str(u), log=_series_json(H.h), roundtrip=True)


def cmd_tau(args):
    left, right = _product(args, args.left), _product(args, args.right)
    tau = formal.compute_tau(left, right)
    return Report("tau", tau=tau.to_json(), tau_text=str(tau),
                  cochain_formula=formal.tau_from_cochains(left, right).to_json(),
                  commutator_formula=formal.tau_from_commutators(left, right).to_json())


def cmd_delta(args):
    s = _product(args)
    A = parse_form(args.form, s.model)
    D = derivations.delta_one_form(s, A)
    rep = derivations.check_derivation(s, D)
    return Report("delta", "value" if rep.passed else "fail", form={"constant": [str(c) for c in A.constant],
                  "potential": str(A.potential)}, stages=[str(op) for op in D.stages], derivation=rep.passed)


def cmd_innerform(args):
    s = _product(args)
    u = parse_series(args.u, s.model, s.order)
    res = derivations.inner_to_one_form(s, u)
    return Report("innerform", "value" if res.verified else "fail", u=str(u), **_innerform_json(res))


def _innerform_json(res):
    return {
        "forms": [{"constant": [str(c) for c in A.constant], "potential": str(A.potential)} for A in res.forms],
        "integral": res.integral,
        "higher_exact": res.higher_exact,
        "verified": res.verified,
    }


def cmd_conn(args):
    model = model_from_name(args.model)
    pi = PoissonStructure(parse_matrix(args.pi))
    if pi.dim != model.dim:
        raise UsageError(f"--pi is {pi.dim}x{pi.dim} but the model has dim {model.dim}")
    alpha = parse_field(args.alpha, model) if args.alpha else algebra.DiffOperator.zero(model)
    D = connections.ContravariantConnection(model, pi, alpha)
    axioms = connections.check_connection_axioms(D)
    poisson = connections.is_poisson_derivation(alpha, pi)
    data = {"connection": repr(D), "axioms": axioms.to_json(), "alpha_is_poisson": poisson}
    if args.curvature:
        curv = connections.curvature(D)
        data["curvature"] = curv.to_json()
        data["curvature_text"] = str(curv)
    if args.cls:
        data["class"] = connections.connection_class(D).to_json() if poisson else None
    if args.witness:
        w = connections.integral_witness(alpha, pi) if poisson else None
        data["witness"] = None if w is None else str(w)
    return Report("conn", "value" if axioms.passed else "fail", **data)


def cmd_bimodule(args):
    s = _product(args)
    pi = formal.extract_poisson(s)
    data = {}
    if args.moduli:
        data["moduli"] = bimodule.moduli_descriptor(s).to_json()
    alpha = parse_field(args.direction, s.model) if args.direction else algebra.DiffOperator.zero(s.model)
    D = connections.ContravariantConnection(s.model, pi, alpha)
    B = bimodule.deform_in_direction(s, D)
    S = bimodule.semiclassical_limit(B)
    data.update(direction=repr(D), semiclassical_limit=repr(S), roundtrip=S == D,
                right_action=[c.to_json() for c in B.right])
    status = "value"
    if args.verify or not args.moduli:
        rel = bimodule.check_bimodule_relations(B)
        data["relations"] = rel.to_json()
        status = "pass" if rel.passed and S == D else "fail"
    return Report("bimodule", status, **data)


def _class_from_json(d):
    for key in ("rank", "terms"):
        if key not in d:
            raise SpecError(f"class file is missing {key!r}")
    rank = d["rank"]
    omega = d.get("omega", [0] * rank)
    terms = [[parse_expression(str(v), algebra.Poly(1)).constant_part() for v in t] for t in d["terms"]]
    sign = int(str(d.get("sign", "+1")))
    torsion = classify.TorsionGroup(tuple(d.get("torsion", ())))
    c = classify.ClassSeries([Fraction(str(v)) for v in omega], terms)
    if c.rank != rank:
        raise SpecError("'rank' does not match the vectors")
    return c, torsion, sign


def cmd_classify(args):
    if args.what == "kernel":
        model = model_from_name(args.model)
        return Report("classify kernel", descriptor=classify.kernel_descriptor(model, _order(args)).to_json())
    if not args.cls or not args.group:
        raise UsageError("classify image needs --class and --group")
    c, torsion, sign = _class_from_json(_json_file(args.cls))
    g = _json_file(args.group)
    gens = g.get("generators") if isinstance(g, dict) else g
    if not gens:
        raise SpecError("group file needs a non-empty 'generators' list")
    G = classify.LatticeGroup(gens, g.get("cap", classify.DEFAULT_CAP) if isinstance(g, dict) else classify.DEFAULT_CAP)
    image = sorted(classify.image_clr(c, G, torsion, sign))
    data = {"class": c.to_json(), "group_order": len(G), "image": [{"free": list(f), "torsion": list(t)} for f, t in image]}
    if args.full:
        full = classify.image_cl(c, G, torsion, sign)
        data["image_cl"] = sorted((e.to_json() for e in full), key=lambda e: json.dumps(e, sort_keys=True))
        data["group_closed"] = classify.is_group_closed(full, torsion)
    return Report("classify image", **data)


def _extended_vector(v_src: str, symbols_src: str | None):
    base = [Fraction(x.strip()) for x in v_src.split(",")]
    if not symbols_src:
        return classify.ExtendedRationalVector.rational(base)
    names, cols = [], []
    for part in symbols_src.split(";"):
        part = part.strip()
        if not part:
            continue
        if ":" not in part:
            raise UsageError(f"symbol spec {part!r} must look like name:c1,c2,...")
        name, coeffs = part.split(":", 1)
        col = [Fraction(x.strip()) for x in coeffs.split(",")]
        if len(col) != len(base):
            raise UsageError(f"symbol {name} has {len(col)} coefficients, expected {len(base)}")
        names.append(name.strip())
        cols.append(col)
    rows = [tuple([b] + [col[j] for col in cols]) for j, b in enumerate(base)]
    return classify.ExtendedRationalVector(tuple(rows), tuple(names))


def cmd_witness(args):
    v = _extended_vector(args.v, args.symbols)
    cert = classify.witness_nonsurjective(v, args.oracle_bound)
    return Report("witness", v=str(v), certificate=cert.to_json())


def cmd_selftest(args):
    """A small randomized run over each module; deterministic for a fixed seed."""
    rng = random.Random(args.seed)
    order = min(_order(args), 4)
    T2 = Trig(2)
    pi = PoissonStructure.standard()
    s = formal.moyal(T2, pi, order)
    checks = {}
    checks["associativity"] = formal.check_associativity(s).passed
    k = (rng.randint(-2, 2), rng.randint(-2, 2))
    H = formal.FormalSeries([AlgebraElement.zero(T2), AlgebraElement.monomial(T2, k, Fraction(rng.randint(1, 3)))], order)
    checks["exp_identities"] = starexp.check_exp_identities(s, H).passed
    a = rng.randint(-3, 3)
    D = connections.ContravariantConnection(T2, pi, algebra.DiffOperator.partial(T2, 1, algebra.I * a))
    checks["integral_witness"] = connections.integral_witness(D.alpha, pi) is not None
    B = bimodule.deform_in_direction(s, D)
    checks["bimodule_roundtrip"] = bimodule.semiclassical_limit(B) == D
    v = [Fraction(rng.randint(-5, 5), rng.randint(1, 6)) for _ in range(2)]
    cert = classify.witness_nonsurjective(v, 3)
    checks["witness"] = cert.verified == 3
    return Report("selftest", "pass" if all(checks.values()) else "fail", seed=args.seed,
                  sample={"k": list(k), "a": a, "v": [str(x) for x in v]}, checks=checks)


# --------------------------------------------------------------------------
# parser


class _ArgParser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        print(f"{self.prog}: error: {message}", file=sys.stderr)
        raise SystemExit(EXIT_USAGE)


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--format", choices=("json", "text"), default="text")
    common.add_argument("--order", type=int, default=None, help="truncation order (default: $DQW_ORDER or 6)")
    common.add_argument("--seed", type=int, default=0)
    common.add_argument("--timing", action="store_true", help="append elapsed seconds (breaks byte-identity)")

    p = _ArgParser(prog="dqw", description="Exact checks for formal deformation quantization.")
    sub = p.add_subparsers(dest="command", required=True, parser_class=_ArgParser)
    product_help = "star product spec file, or moyal:torus2 / moyal:poly2"

    q = sub.add_parser("assoc", parents=[common], help="check associativity and unitality")
    q.add_argument("--product", required=True, help=product_help)
    q.set_defaults(func=cmd_assoc)

    q = sub.add_parser("exp", parents=[common], help="star exponential")
    q.add_argument("--product", required=True, help=product_help)
    q.add_argument("--h", required=True, help="series with vanishing classical part")
    q.add_argument("--t", default="1")
    q.add_argument("--check", action="store_true", help="verify the exponential identities")
    q.add_argument("--g", help="second argument for the commuting additivity check")
    q.set_defaults(func=cmd_exp)

    q = sub.add_parser("log", parents=[common], help="star logarithm of 1 + O(L)")
    q.add_argument("--product", required=True, help=product_help)
    q.add_argument("--u", required=True)
    q.set_defaults(func=cmd_log)

    q = sub.add_parser("tau", parents=[common], help="second-order commutator difference")
    q.add_argument("--left", required=True, help=product_help)
    q.add_argument("--right", required=True, help=product_help)
    q.set_defaults(func=cmd_tau)

    q = sub.add_parser("delta", parents=[common], help="derivation of a closed one-form")
    q.add_argument("--product", required=True, help=product_help)
    q.add_argument("--form", required=True, help='"c1,c2;g=<expr>"')
    q.set_defaults(func=cmd_delta)

    q = sub.add_parser("innerform", parents=[common], help="one-form of an inner automorphism")
    q.add_argument("--product", default="moyal:torus2", help=product_help)
    q.add_argument("--u", required=True)
    q.set_defaults(func=cmd_innerform)

    q = sub.add_parser("conn", parents=[common], help="contravariant connection d + alpha")
    q.add_argument("--pi", required=True, help='"0,1;-1,0" or JSON')
    q.add_argument("--alpha", default="", help='vector field, e.g. "E[1,0]*d1"')
    q.add_argument("--model", default="torus2")
    q.add_argument("--curvature", action="store_true")
    q.add_argument("--class", dest="cls", action="store_true")
    q.add_argument("--witness", action="store_true")
    q.set_defaults(func=cmd_conn)

    q = sub.add_parser("bimodule", parents=[common], help="bimodule deformation in a direction")
    q.add_argument("--product", required=True, help=product_help)
    q.add_argument("--direction", default="", help="alpha as a vector field")
    q.add_argument("--verify", action="store_true")
    q.add_argument("--moduli", action="store_true")
    q.set_defaults(func=cmd_bimodule)

    q = sub.add_parser("classify", parents=[common], help="image or kernel of the classical limit")
    q.add_argument("what", choices=("image", "kernel"))
    q.add_argument("--class", dest="cls")
    q.add_argument("--group")
    q.add_argument("--full", action="store_true")
    q.add_argument("--model", default="torus2")
    q.set_defaults(func=cmd_classify)

    q = sub.add_parser("witness", parents=[common], help="lattice non-surjectivity certificate")
    q.add_argument("--v", required=True, help='"1/2,1/3"')
    q.add_argument("--symbols", help='"s:1/3,0;t:0,1" adds independent symbols')
    q.add_argument("--oracle-bound", type=int, default=None)
    q.set_defaults(func=cmd_witness)

    q = sub.add_parser("selftest", parents=[common], help="randomized smoke run")
    q.set_defaults(func=cmd_selftest)
    return p


_MATH_ERRORS = (
    ArithmeticError,
    formal.NonConstantBracket,
    formal.FirstOrderMismatch,
    starexp.NonzeroClassicalPart,
    starexp.NotNormalized,
    derivations.UnsupportedModel,
    derivations.NotPoisson,
    derivations.NotDecomposable,
    derivations.NotClosed,
    bimodule.NotQuantizable,
    bimodule.NotAnEquivalence,
    classify.CapExceeded,
    classify.NotReduced,
    classify.ZeroRank,
)


def run(argv=None, out=None) -> int:
    out = out or sys.stdout
    parser = build_parser()
    args = parser.parse_args(argv)
    if args.order is not None and args.order < 0:
        parser.error("--order must be non-negative")
    start = time.perf_counter()
    try:
        report = args.func(args)
    except (ParseError, SpecError, UsageError, OSError) as exc:
        print(f"dqw {args.command}: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except _MATH_ERRORS as exc:
        report = Report(args.command, "error", error=type(exc).__name__, message=str(exc))
    if args.timing:
        report.data["elapsed"] = round(time.perf_counter() - start, 3)
    print(report.render(args.format), file=out)
    return report.exit_code


def main():
    raise SystemExit(run())


if __name__ == "__main__":
    main()
