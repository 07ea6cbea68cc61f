"""Decision procedure for critical points plus descent certificates.

Order of tests for depth >= 3 (first hit wins):

1. a supported sigma_i is the smaller root of f(.; y_pi(i))   -> strict saddle
2. the supported y-values are not the top r_sigma values      -> strict saddle
3. some sigma_i is the double root at y = y*                  -> non-strict saddle
4. otherwise global min iff every sigma_i minimizes g(.; y_i), else spurious local min
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from enum import Enum

import numpy as np

from . import scalar
from .critical import (
    CriticalSpec,
    Dressing,
    InvalidSpec,
    dress,
    validate_spec,
    DEFAULT_SPEC_TOL,
)
from .model import to_coord
from .problem import Problem
from .scalar import RootLabel


class CritClass(str, Enum):
    GLOBAL_MIN = "GlobalMin"
    SPURIOUS_LOCAL_MIN = "SpuriousLocalMin"
    STRICT_SADDLE = "StrictSaddle"
    NON_STRICT_SADDLE = "NonStrictSaddle"
    UNSUPPORTED = "Unsupported"

    @property
    def is_local_min(self) -> bool:
        return self in (CritClass.GLOBAL_MIN, CritClass.SPURIOUS_LOCAL_MIN)


class Clause(str, Enum):
    SMALL_ROOT = "S2-root"
    MISALIGNED = "misaligned"
    DOUBLE_ROOT = "S3-root"
    IN_H = "aligned-S1-in-H"
    NOT_IN_H = "aligned-S1-not-in-H"
    TWO_LAYER_GLOBAL = "two-layer-closed-form"
    TWO_LAYER_SADDLE = "two-layer-not-closed-form"
    SCALAR = "scalar-case"


@dataclass(frozen=True)
class Classification:
    kind: CritClass
    clause: Clause
    labels: tuple = ()
    detail: str = ""
    tie_ambiguous: bool = False

    def to_dict(self):
        return {
            "class": self.kind.value,
            "clause": self.clause.value,
            "labels": [lab.value for lab in self.labels],
            "detail": self.detail,
            "tie_ambiguous": self.tie_ambiguous,
        }


def _value_tol(problem: Problem) -> float:
    y = problem.spectrum.y
    top = float(y[0]) if y.size else 0.0
    return problem.group_tol * max(1.0, top)


def support_labels(problem: Problem, spec: CriticalSpec, eq_tol=scalar.DEFAULT_EQ_TOL):
    """Root label of each supported sigma_i (the nearest root of f(.; y_pi(i)))."""
    ys = spec.assigned_y(problem)
    out = []
    for i in range(spec.r_sigma):
        roots = scalar.positive_roots(ys[i], problem.lam, problem.depth, eq_tol)
        if not roots:
            raise InvalidSpec(validate_spec(problem, spec))
        _, lab = min(roots, key=lambda r: abs(r[0] - spec.sigma[i]))
        out.append(lab)
    return tuple(out)


def is_aligned(problem: Problem, spec: CriticalSpec) -> bool:
    r = spec.r_sigma
    ys = np.sort(spec.assigned_y(problem)[:r])[::-1]
    top = problem.spectrum.y[:r]
    return bool(np.all(np.abs(ys - top) <= _value_tol(problem)))


def in_H(problem: Problem, sigma, tie_tol=scalar.DEFAULT_TIE_TOL) -> bool:
    y = problem.spectrum.y
    lam, L = problem.lam, problem.depth
    return all(
        scalar.is_scalar_argmin(float(sigma[i]), float(y[i]), lam, L, tie_tol)
        for i in range(problem.d_min)
    )


def _has_ties(problem: Problem, tie_tol) -> bool:
    y = problem.spectrum.y
    return any(
        scalar.scalar_argmin_g(float(y[i]), problem.lam, problem.depth, tie_tol).tie
        for i in range(problem.d_min)
    )


def _check(problem, spec, tol):
    report = validate_spec(problem, spec, tol)
    if not report:
        raise InvalidSpec(report)


def classify(problem: Problem, spec: CriticalSpec, eq_tol=scalar.DEFAULT_EQ_TOL,
             tie_tol=scalar.DEFAULT_TIE_TOL, spec_tol=DEFAULT_SPEC_TOL) -> Classification:
    if problem.is_scalar:
        return Classification(CritClass.UNSUPPORTED, Clause.SCALAR,
                              detail="all dimensions equal 1; theory assumes a matrix problem")
    if problem.depth == 2:
        return classify_L2(problem, spec, spec_tol)
    _check(problem, spec, spec_tol)
    labels = support_labels(problem, spec, eq_tol)
    if RootLabel.S2 in labels:
        i = labels.index(RootLabel.S2)
        return Classification(CritClass.STRICT_SADDLE, Clause.SMALL_ROOT, labels,
                              f"sigma[{i}] is the smaller root")
    if not is_aligned(problem, spec):
        return Classification(CritClass.STRICT_SADDLE, Clause.MISALIGNED, labels,
                              "supported y-values are not the largest ones")
    if RootLabel.S3 in labels:
        i = labels.index(RootLabel.S3)
        return Classification(CritClass.NON_STRICT_SADDLE, Clause.DOUBLE_ROOT, labels,
                              f"sigma[{i}] is the double root x*")
    ties = _has_ties(problem, tie_tol)
    if in_H(problem, spec.sigma, tie_tol):
        return Classification(CritClass.GLOBAL_MIN, Clause.IN_H, labels, tie_ambiguous=ties)
    return Classification(CritClass.SPURIOUS_LOCAL_MIN, Clause.NOT_IN_H, labels,
                          tie_ambiguous=ties)


def l2_optimal_sigma(problem: Problem) -> np.ndarray:
    """Closed-form global singular values (sqrt(lam) y_i - lam)_+^(1/2)."""
    y = problem.spectrum.y[: problem.d_min]
    lam = problem.lam
    return np.sqrt(np.clip(math.sqrt(lam) * y - lam, 0.0, None))


def classify_L2(problem: Problem, spec: CriticalSpec, spec_tol=DEFAULT_SPEC_TOL):
    _check(problem, spec, spec_tol)
    target = l2_optimal_sigma(problem)
    tol = 1e-8 * (1.0 + float(np.max(target, initial=0.0)))
    labels = (RootLabel.L2,) * spec.r_sigma
    if np.all(np.abs(spec.sigma - target) <= tol):
        return Classification(CritClass.GLOBAL_MIN, Clause.TWO_LAYER_GLOBAL, labels)
    return Classification(CritClass.STRICT_SADDLE, Clause.TWO_LAYER_SADDLE, labels)


@dataclass
class RegularizationReport:
    lam: float
    lambda_crit: list
    benign: bool
    violating: list = field(default_factory=list)
    eq_tol: float = scalar.DEFAULT_EQ_TOL

    def to_dict(self):
        return {
            "lambda": self.lam,
            "lambda_crit": self.lambda_crit,
            "benign": self.benign,
            "violating_indices": self.violating,
            "eq_tol": self.eq_tol,
        }


def check_partially_benign(problem: Problem, eq_tol=scalar.DEFAULT_EQ_TOL):
    """Is lam away from every lambda_crit(y_i), i < d_min?

    The test is made on y against y*(lam), so the answer agrees exactly with
    whether a double root shows up in ``root_profile`` at the same tolerance.
    """
    if problem.depth < 3:
        raise scalar.UnsupportedDepth("the benign condition needs depth >= 3")
    lam, L = problem.lam, problem.depth
    y_star = scalar.thresholds(lam, L).y_star
    crits, bad = [], []
    for i, yi in enumerate(problem.spectrum.y[: problem.d_min]):
        yi = float(yi)
        if yi <= 0:
            crits.append(None)
            continue
        crits.append(scalar.lambda_critical(yi, L))
        if abs(yi - y_star) <= eq_tol * y_star:
            bad.append(i)
    return RegularizationReport(lam, crits, not bad, bad, eq_tol)


class ClauseNotApplicable(ValueError):
    pass


class CertKind(str, Enum):
    S2 = "S2-descent"
    MISALIGNMENT = "misalignment-descent"
    CUBIC = "cubic-nonstrict"


@dataclass
class Certificate:
    direction: list
    expected_quadform: float
    kind: CertKind
    coord: str
    expected_cubic: float | None = None
    indices: tuple = ()

    def to_dict(self):
        return {
            "kind": self.kind.value,
            "coord": self.coord,
            "expected_quadform": self.expected_quadform,
            "expected_cubic": self.expected_cubic,
            "indices": list(self.indices),
        }


def _unit_slot_direction(problem: Problem, spec: CriticalSpec, i: int, sign: float):
    """Entry (i, i) in every layer of the simplified frame, with the pi transport."""
    Z = [np.zeros(s) for s in problem.shapes]
    for M in Z:
        M[i, i] = sign
    return _transport_pi(problem, spec, Z)


def _transport_pi(problem, spec, Z):
    L = problem.depth
    pi = spec.pi
    Z = [M.copy() for M in Z]
    # E_1 BlkD(P, I): column j of E_1 moves to column pi[j]
    P_in = np.eye(problem.dims[0])
    P_in[: len(pi), : len(pi)] = 0.0
    P_in[np.arange(len(pi)), list(pi)] = 1.0
    P_out = np.eye(problem.dims[-1])
    P_out[: len(pi), : len(pi)] = 0.0
    P_out[np.arange(len(pi)), list(pi)] = 1.0
    Z[0] = Z[0] @ P_in
    Z[L - 1] = P_out.T @ Z[L - 1]
    return Z


def _finish(problem, Z, dressing, coord, q_G, kind, cubic_G=None, idx=()):
    D = to_coord(problem, dress(problem, Z, dressing), coord)
    scale = 1.0 if coord == "G" else 1.0 / problem.lam
    cubic = None if cubic_G is None else cubic_G * scale
    return Certificate(D, q_G * scale, kind, coord, cubic, tuple(idx))


def certificate_direction(problem: Problem, spec: CriticalSpec, clause=None,
                          dressing: Dressing | None = None, coord="F",
                          eq_tol=scalar.DEFAULT_EQ_TOL) -> Certificate:
    """Explicit direction witnessing the class of ``spec``.

    ``clause`` may be a ``CertKind``; by default it follows the classification.
    Directions are built in the simplified frame and carried by the same
    orthogonal dressing as the point, so they apply to ``construct(..., dressing)``.
    """
    L, lam = problem.depth, problem.lam
    sq = math.sqrt(lam)
    ys = spec.assigned_y(problem)
    if clause is None:
        cls = classify(problem, spec, eq_tol)
        clause = {
            Clause.SMALL_ROOT: CertKind.S2,
            Clause.MISALIGNED: CertKind.MISALIGNMENT,
            Clause.DOUBLE_ROOT: CertKind.CUBIC,
            Clause.TWO_LAYER_SADDLE: None,
        }.get(cls.clause)
        if cls.clause is Clause.TWO_LAYER_SADDLE:
            clause = _l2_clause(problem, spec)
        if clause is None:
            raise ClauseNotApplicable(f"no descent certificate for class {cls.kind.value}")
    clause = CertKind(clause)

    if clause is CertKind.S2:
        # any slot whose scalar curvature f_x is negative
        best = None
        for i in range(problem.d_min):
            q = 2 * L * scalar.eval_f_dx(spec.sigma[i], ys[i], lam, L)
            if q < 0 and (best is None or q < best[1]):
                best = (i, q)
        if best is None:
            raise ClauseNotApplicable("no slot with negative scalar curvature")
        i, q = best
        Z = _unit_slot_direction(problem, spec, i, -1.0)
        return _finish(problem, Z, dressing, coord, q, clause, idx=(i,))

    if clause is CertKind.MISALIGNMENT:
        r = spec.r_sigma
        yall = problem.spectrum.y[list(spec.pi)]
        best = None
        for i in range(r):
            for j in range(r, problem.d_Y):
                q = 4 * sq * spec.sigma[i] ** (L - 2) * (yall[i] - yall[j])
                if q < 0 and (best is None or q < best[2]):
                    best = (i, j, q)
        if best is None:
            raise ClauseNotApplicable("spec is aligned")
        i, j, q = best
        Z = [np.zeros(s) for s in problem.shapes]
        Z[0][i, j] = 1.0
        Z[L - 1][j, i] = 1.0
        Z = _transport_pi(problem, spec, Z)
        return _finish(problem, Z, dressing, coord, q, clause, idx=(i, j))

    # cubic
    for i in range(spec.r_sigma):
        prof = scalar.root_profile(ys[i], lam, L, eq_tol=eq_tol)
        if prof.kind is scalar.RootKind.UNIQUE and L >= 3:
            s = spec.sigma[i]
            q = 2 * L * scalar.eval_f_dx(s, ys[i], lam, L)
            c3 = (L / 3.0) * scalar.eval_f_dxx(s, ys[i], lam, L)
            Z = _unit_slot_direction(problem, spec, i, 1.0)
            return _finish(problem, Z, dressing, coord, q, clause, c3, (i,))
    raise ClauseNotApplicable("no double root in the support")


def _l2_clause(problem, spec):
    L, lam = problem.depth, problem.lam
    ys = spec.assigned_y(problem)
    for i in range(problem.d_min):
        if scalar.eval_f_dx(spec.sigma[i], ys[i], lam, L) < 0:
            return CertKind.S2
    return CertKind.MISALIGNMENT


def global_min_value(problem: Problem, coord="F") -> float:
    y = problem.spectrum.y
    lam, L = problem.lam, problem.depth
    d = problem.d_min
    G = sum(scalar.min_g(float(v), lam, L) for v in y[:d]) + lam * float(np.sum(y[d:] ** 2))
    if coord == "G":
        return G
    if coord == "F":
        return G / lam
    raise ValueError(f"coord must be 'F' or 'G', got {coord!r}")


def spec_loss(problem: Problem, spec: CriticalSpec, coord="F") -> float:
    """Loss of a family member from its spec alone (dressing invariant)."""
    y = problem.spectrum.y
    lam, L = problem.lam, problem.depth
    ys = spec.assigned_y(problem)
    used = set()
    G = 0.0
    for i in range(problem.d_min):
        G += scalar.eval_g(float(spec.sigma[i]), float(ys[i]), lam, L)
        used.add(spec.pi[i])
    G += lam * sum(float(y[k]) ** 2 for k in range(problem.d_Y) if k not in used)
    return G if coord == "G" else G / lam


def classify_family(problem: Problem, specs, **kw):
    return [classify(problem, s, **kw) for s in specs]
