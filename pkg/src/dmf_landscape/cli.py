"""Command line front end: ``python -m dmf_landscape <subcommand> ...``.

Exit status is 0 on success, 1 for invalid input data or a domain error,
and 2 when a file cannot be read, parsed or written.
"""

from __future__ import annotations

import argparse
import sys

import numpy as np

from . import io as aio
from . import scalar
from .classify import (
    CertKind,
    ClauseNotApplicable,
    CritClass,
    certificate_direction,
    check_partially_benign,
    classify,
    global_min_value,
    spec_loss,
)
from .critical import (
    CriticalSpec,
    InvalidSpec,
    balancedness_residual,
    canonical_dressing,
    construct,
    enumerate_specs,
    random_dressing,
)
from .model import gradient, hessian_quadform, loss, rescale_F_to_G, stack_norm
from .problem import NumericFailure, Problem, ProblemError
from .verify import (
    DEFAULT_GRAD_TOL,
    NotCritical,
    classify_numerically,
    fd_gradient,
    gradient_descent,
    landscape_slice,
    probe_min_quadform,
)


class UsageError(ValueError):
    pass


# ------------------------------------------------------------------ loading

def load_problem(path) -> Problem:
    doc = aio.read_json(path)
    if isinstance(doc, dict) and "problem" in doc:
        doc = doc["problem"]
    return Problem.from_dict(doc)


def load_spec(args, problem=None):
    doc = aio.read_json(args.spec)
    if problem is None:
        if args.problem is not None:
            problem = load_problem(args.problem)
        elif isinstance(doc, dict) and "problem" in doc:
            problem = Problem.from_dict(doc["problem"])
        else:
            raise ProblemError("no problem given: pass --problem or embed one in the spec file",
                               "problem")
    if isinstance(doc, dict) and "specs" in doc:
        specs = doc["specs"]
        if not 0 <= args.index < len(specs):
            raise ProblemError(f"--index {args.index} out of range for {len(specs)} specs",
                               "index")
        doc = specs[args.index]
    elif isinstance(doc, dict) and "spec" in doc:
        doc = doc["spec"]
    try:
        spec = CriticalSpec.from_dict(doc)
    except (KeyError, TypeError) as exc:
        raise ProblemError(f"spec is missing or has a malformed field: {exc}", "spec") from exc
    return problem, spec


def load_stack(path, problem):
    doc = aio.read_json(path)
    try:
        W = aio.stack_from_json(doc, problem.shapes)
    except ValueError as exc:
        raise ProblemError(f"{path}: {exc}", "stack") from exc
    return W


def config_of(args) -> dict:
    return {k: v for k, v in sorted(vars(args).items()) if k not in ("func", "output")}


def emit(args, text):
    if getattr(args, "output", None):
        aio.write_atomic(args.output, text)
    else:
        sys.stdout.write(text)


def emit_json(args, payload: dict):
    emit(args, aio.dumps({"header": aio.header(config_of(args)), **payload}))


def emit_csv(args, columns, rows):
    h = aio.header(config_of(args))
    comments = [f"generator: {h['generator']}", f"created: {h['created']}",
                f"config: {aio.dumps(h['config']).replace(chr(10), ' ').strip()}"]
    emit(args, aio.csv_text(columns, rows, comments))


def make_dressing(args, problem):
    if args.dressing == "canonical":
        return canonical_dressing(problem)
    return random_dressing(problem, args.seed)


# -------------------------------------------------------------- subcommands

def cmd_analyze_roots(args):
    if args.sweep:
        if args.y_min is None or args.y_max is None:
            raise UsageError("--sweep needs --y-min and --y-max")
        ys = np.linspace(args.y_min, args.y_max, args.n)
        rows = []
        for p in scalar.sweep_profiles(ys, args.lam, args.depth, args.eq_tol):
            rows.append((p.y, p.kind.value, p.x_bar, p.x_under, p.x_hat))
        emit_csv(args, ["y", "kind", "x_bar", "x_underbar", "x_hat"], rows)
        return
    if args.y is None:
        raise UsageError("--y is required unless --sweep is given")
    prof = scalar.root_profile(args.y, args.lam, args.depth, args.tol, args.eq_tol)
    doc = {"profile": prof.to_dict()}
    if args.depth >= 3:
        th = scalar.thresholds(args.lam, args.depth)
        doc["thresholds"] = {"x_star": th.x_star, "y_star": th.y_star}
    emit_json(args, doc)


def cmd_construct(args):
    problem, spec = load_spec(args)
    W = construct(problem, spec, make_dressing(args, problem), args.coord)
    emit_json(args, {"problem": problem.to_dict(), "spec": spec.to_dict(),
                     "coord": args.coord, "stack": aio.stack_to_json(W)})


def cmd_enumerate(args):
    problem = load_problem(args.problem)
    fam = enumerate_specs(problem, max_specs=args.max_specs)
    specs = []
    for k, (s, labs) in enumerate(zip(fam.specs, fam.labels)):
        d = s.to_dict()
        d.update(id=k, labels=[lab.value for lab in labs],
                 assigned_y=[float(v) for v in s.assigned_y(problem)])
        specs.append(d)
    emit_json(args, {"problem": problem.to_dict(), "complete": fam.complete,
                     "caps": fam.caps, "count": len(specs), "specs": specs})


def _certificates(problem, spec, cls, coord):
    kinds = {
        CritClass.STRICT_SADDLE: [CertKind.S2, CertKind.MISALIGNMENT],
        CritClass.NON_STRICT_SADDLE: [CertKind.CUBIC],
    }.get(cls.kind, [])
    W = construct(problem, spec, coord=coord)
    out = []
    for kind in kinds:
        try:
            cert = certificate_direction(problem, spec, kind, coord=coord)
        except ClauseNotApplicable:
            continue
        d = cert.to_dict()
        d["exact_quadform"] = hessian_quadform(problem, W, cert.direction, coord)
        out.append(d)
    return out


def cmd_classify(args):
    problem, spec = load_spec(args)
    cls = classify(problem, spec, eq_tol=args.eq_tol)
    certs = [] if cls.kind is CritClass.UNSUPPORTED else _certificates(problem, spec, cls,
                                                                      args.coord)
    doc = cls.to_dict()
    doc.update(
        certificates=certs,
        expected_quadform=certs[0]["expected_quadform"] if certs else None,
        loss_F=spec_loss(problem, spec, "F"),
        global_min_F=global_min_value(problem, "F"),
        spec=spec.to_dict(),
    )
    emit_json(args, doc)


def cmd_check_lambda(args):
    problem = load_problem(args.problem)
    emit_json(args, {"report": check_partially_benign(problem, args.eq_tol).to_dict()})


def cmd_atlas(args):
    problem = load_problem(args.problem)
    fam = enumerate_specs(problem, max_specs=args.max_specs)
    if not fam.complete:
        print(f"warning: enumeration truncated at {args.max_specs} specs", file=sys.stderr)
    rows = []
    for k, spec in enumerate(fam.specs):
        cls = classify(problem, spec)
        W = construct(problem, spec)
        rep = probe_min_quadform(problem, W, args.probe_n, args.seed)
        rows.append((k, spec.r_sigma, cls.kind.value, loss(problem, W), rep.min_quadform))
    emit_csv(args, ["spec_id", "r_sigma", "class", "loss_F", "min_probe"], rows)


def cmd_verify(args):
    problem = load_problem(args.problem)
    W = load_stack(args.stack, problem)
    g = gradient(problem, W)
    gn = stack_norm(g)
    doc = {
        "loss_F": loss(problem, W),
        "grad_norm": gn,
        "balancedness_G": balancedness_residual(rescale_F_to_G(W, problem.lambdas)),
        "global_min_F": global_min_value(problem),
    }
    if args.fd:
        fd = fd_gradient(problem, W)
        doc["fd_grad_max_abs_diff"] = max(float(np.max(np.abs(a - b))) for a, b in zip(g, fd))
    try:
        doc["classification"] = classify_numerically(problem, W, grad_tol=args.grad_tol,
                                                     seed=args.seed).to_dict()
    except NotCritical as exc:
        doc["classification"] = None
        doc["note"] = str(exc)
    emit_json(args, doc)


def cmd_train(args):
    problem = load_problem(args.problem)
    res = gradient_descent(problem, args.seed, args.step, args.iters, args.grad_tol,
                           guard=not args.no_guard, scaled=not args.absolute_tol)
    emit_json(args, {"problem": problem.to_dict(), "result": res.to_dict(),
                     "stack": aio.stack_to_json(res.W)})


def cmd_probe(args):
    problem = load_problem(args.problem)
    W = load_stack(args.stack, problem)
    rep = probe_min_quadform(problem, W, args.n, args.seed, args.loss)
    emit_json(args, {"report": rep.to_dict()})


def cmd_landscape(args):
    problem = load_problem(args.problem)
    W = load_stack(args.ref, problem)
    grid = landscape_slice(problem, W, args.seed, args.range, args.res, args.loss)
    emit_csv(args, ["alpha", "beta", "value"], grid.rows())


# ------------------------------------------------------------------- parser

def _common_out(p):
    p.add_argument("-o", "--output", help="output path (default: standard output)")


def _spec_args(p):
    p.add_argument("--problem", help="problem JSON (optional when the spec file embeds one)")
    p.add_argument("--spec", required=True,
                   help="spec JSON: {sigma, pi}, a construct output, or an enumerate family")
    p.add_argument("--index", type=int, default=0,
                   help="entry to use when --spec is an enumerate family (default 0)")


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="dmf_landscape",
                                 description="Critical points of regularized deep matrix "
                                             "factorization.")
    sub = ap.add_subparsers(dest="command", required=True)

    p = sub.add_parser("analyze-roots", help="positive roots of f(.; y) and their labels")
    p.add_argument("--y", type=float, help="data singular value")
    p.add_argument("--lambda", dest="lam", type=float, required=True,
                   help="product of the layer weights")
    p.add_argument("--depth", type=int, required=True, help="number of layers L")
    p.add_argument("--tol", type=float, default=0.0,
                   help="relative bisection tolerance, 0 = machine precision (default 0)")
    p.add_argument("--eq-tol", type=float, default=scalar.DEFAULT_EQ_TOL,
                   help="relative band around y* reported as a double root (default 1e-9)")
    p.add_argument("--sweep", action="store_true", help="emit a CSV over a y grid")
    p.add_argument("--y-min", type=float)
    p.add_argument("--y-max", type=float)
    p.add_argument("--n", type=int, default=101, help="sweep points (default 101)")
    _common_out(p)
    p.set_defaults(func=cmd_analyze_roots)

    p = sub.add_parser("construct", help="build the weight stack of a critical spec")
    _spec_args(p)
    p.add_argument("--dressing", choices=["canonical", "random"], default="canonical")
    p.add_argument("--seed", type=int, default=0, help="seed for --dressing random")
    p.add_argument("--coord", choices=["F", "G"], default="F")
    _common_out(p)
    p.set_defaults(func=cmd_construct)

    p = sub.add_parser("enumerate", help="list every critical family of a problem")
    p.add_argument("--problem", required=True)
    p.add_argument("--max-specs", type=int, default=200_000)
    _common_out(p)
    p.set_defaults(func=cmd_enumerate)

    p = sub.add_parser("classify", help="classify one critical spec")
    _spec_args(p)
    p.add_argument("--coord", choices=["F", "G"], default="F",
                   help="coordinates of the reported certificates")
    p.add_argument("--eq-tol", type=float, default=scalar.DEFAULT_EQ_TOL)
    _common_out(p)
    p.set_defaults(func=cmd_classify)

    p = sub.add_parser("check-lambda", help="is the landscape partially benign?")
    p.add_argument("--problem", required=True)
    p.add_argument("--eq-tol", type=float, default=scalar.DEFAULT_EQ_TOL)
    _common_out(p)
    p.set_defaults(func=cmd_check_lambda)

    p = sub.add_parser("atlas", help="classify and probe every enumerated spec (CSV)")
    p.add_argument("--problem", required=True)
    p.add_argument("--probe-n", type=int, default=100)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--max-specs", type=int, default=200_000)
    _common_out(p)
    p.set_defaults(func=cmd_atlas)

    p = sub.add_parser("verify", help="gradient, balancedness and numeric class of a stack")
    p.add_argument("--problem", required=True)
    p.add_argument("--stack", required=True)
    p.add_argument("--fd", action="store_true", help="also compare with FD gradient")
    p.add_argument("--grad-tol", type=float, default=DEFAULT_GRAD_TOL)
    p.add_argument("--seed", type=int, default=0, help="seed for fallback probing")
    _common_out(p)
    p.set_defaults(func=cmd_verify)

    p = sub.add_parser("train", help="plain gradient descent on F from a random start")
    p.add_argument("--problem", required=True)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--step", type=float, default=1e-3)
    p.add_argument("--iters", type=int, default=200_000)
    p.add_argument("--grad-tol", type=float, default=DEFAULT_GRAD_TOL)
    p.add_argument("--absolute-tol", action="store_true",
                   help="do not scale --grad-tol by 1 + ||Y||_F")
    p.add_argument("--no-guard", action="store_true", help="disable step halving")
    _common_out(p)
    p.set_defaults(func=cmd_train)

    p = sub.add_parser("probe", help="extreme Hessian curvature over random directions")
    p.add_argument("--problem", required=True)
    p.add_argument("--stack", required=True)
    p.add_argument("--n", type=int, default=500)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--loss", choices=["F", "G"], default="F")
    _common_out(p)
    p.set_defaults(func=cmd_probe)

    p = sub.add_parser("landscape", help="two-direction loss slice around a stack (CSV)")
    p.add_argument("--problem", required=True)
    p.add_argument("--ref", required=True, help="reference stack JSON")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--range", type=float, default=1.0, help="half width of the grid")
    p.add_argument("--res", type=int, default=201, help="points per axis")
    p.add_argument("--loss", choices=["F", "G"], default="F")
    _common_out(p)
    p.set_defaults(func=cmd_landscape)
    return ap


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        args.func(args)
    except aio.ArtifactError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except OSError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except InvalidSpec as exc:
        c = exc.check
        print(f"error: invalid spec ({c.field}): {c.reason}", file=sys.stderr)
        return 1
    except ProblemError as exc:
        where = f" ({exc.field})" if exc.field else ""
        print(f"error{where}: {exc}", file=sys.stderr)
        return 1
    except (UsageError, ClauseNotApplicable, NotCritical, NumericFailure,
            scalar.UnsupportedDepth, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    return 0
