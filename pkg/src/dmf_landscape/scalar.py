"""One-dimensional theory behind every critical point.

Each singular value sigma of a critical point solves

    f(x; y) = x^(2L-1) - sqrt(lam) y x^(L-1) + lam x = 0

for some data singular value y.  For L >= 3 the positive roots are located
by bisection on the two monotone branches of

    v(x) = x^L / sqrt(lam) + sqrt(lam) x^(2-L),

which is decreasing on (0, x*) and increasing on (x*, inf) with v(x*) = y*.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from enum import Enum

import numpy as np

from .problem import NumericFailure

DEFAULT_EQ_TOL = 1e-9
DEFAULT_TIE_TOL = 1e-9


class UnsupportedDepth(ValueError):
    pass


class RootKind(str, Enum):
    NONE = "NoPositive"
    UNIQUE = "UniquePositive"
    TWO = "TwoPositive"


class RootLabel(str, Enum):
    S1 = "S1"
    S2 = "S2"
    S3 = "S3"
    L2 = "L2"  # the single positive root of the two-layer problem


def eval_f(x, y, lam, L):
    s = math.sqrt(lam)
    return x ** (2 * L - 1) - s * y * x ** (L - 1) + lam * x


def eval_f_dx(x, y, lam, L):
    s = math.sqrt(lam)
    return (2 * L - 1) * x ** (2 * L - 2) - s * (L - 1) * y * x ** (L - 2) + lam


def eval_f_dxx(x, y, lam, L):
    s = math.sqrt(lam)
    return (2 * L - 1) * (2 * L - 2) * x ** (2 * L - 3) - s * (L - 1) * (
        L - 2
    ) * y * x ** (L - 3)


def eval_g(x, y, lam, L):
    """Per-coordinate objective (x^L - sqrt(lam) y)^2 + lam L x^2."""
    return (x**L - math.sqrt(lam) * y) ** 2 + lam * L * x**2


def eval_g_dx(x, y, lam, L):
    return 2 * L * eval_f(x, y, lam, L)


def _threshold_constant(L):
    a = (L - 2) / L
    return a ** (L / (2 * L - 2)) + (1 / a) ** ((L - 2) / (2 * L - 2))


@dataclass(frozen=True)
class Thresholds:
    x_star: float
    y_star: float
    lam: float
    depth: int


def thresholds(lam: float, L: int) -> Thresholds:
    if L < 3:
        raise UnsupportedDepth(f"thresholds need depth >= 3, got {L}")
    if lam <= 0:
        raise ValueError("lam must be positive")
    root = lam ** (1.0 / (2 * L - 2))
    x_star = ((L - 2) / L) ** (1.0 / (2 * L - 2)) * root
    y_star = _threshold_constant(L) * root
    return Thresholds(x_star, y_star, lam, L)


def lambda_critical(y: float, L: int) -> float:
    """The product weight at which y becomes the threshold value y*."""
    if L < 3:
        raise UnsupportedDepth(f"lambda_critical needs depth >= 3, got {L}")
    if y <= 0:
        raise ValueError("lambda_critical needs y > 0")
    return y ** (2 * (L - 1)) * _threshold_constant(L) ** (-2 * (L - 1))


def v_curve(x, lam, L):
    s = math.sqrt(lam)
    return x**L / s + s * x ** (2 - L)


def bisect_monotone(fun, lo, hi, increasing, rtol=0.0, max_iter=4000):
    """Find x in [lo, hi] with fun(x) = 0 for a monotone ``fun``.

    Runs until the bracket is below ``rtol * hi`` or cannot shrink further.
    """
    flo, fhi = fun(lo), fun(hi)
    sign = 1.0 if increasing else -1.0
    if sign * flo > 0 or sign * fhi < 0:
        raise NumericFailure(
            f"bisection bracket [{lo!r}, {hi!r}] does not enclose a root "
            f"(values {flo!r}, {fhi!r})"
        )
    for _ in range(max_iter):
        mid = 0.5 * (lo + hi)
        if mid <= lo or mid >= hi or hi - lo <= rtol * hi:
            break
        if sign * fun(mid) < 0:
            lo = mid
        else:
            hi = mid
    # endpoint closer to the root
    return lo if abs(fun(lo)) <= abs(fun(hi)) else hi


@dataclass(frozen=True)
class RootProfile:
    y: float
    lam: float
    depth: int
    kind: RootKind
    x_bar: float | None = None
    x_under: float | None = None
    x_hat: float | None = None

    def labelled_roots(self):
        """Positive roots paired with their S-labels, largest first."""
        if self.kind is RootKind.TWO:
            return [(self.x_bar, RootLabel.S1), (self.x_under, RootLabel.S2)]
        if self.kind is RootKind.UNIQUE:
            label = RootLabel.L2 if self.depth == 2 else RootLabel.S3
            return [(self.x_hat, label)]
        return []

    def to_dict(self):
        return {
            "y": self.y,
            "lambda": self.lam,
            "depth": self.depth,
            "kind": self.kind.value,
            "roots": [
                {"value": x, "label": lab.value} for x, lab in self.labelled_roots()
            ],
            "x_bar": self.x_bar,
            "x_underbar": self.x_under,
            "x_hat": self.x_hat,
        }


def root_profile(y, lam, L, tol=0.0, eq_tol=DEFAULT_EQ_TOL) -> RootProfile:
    """Classify and locate the positive roots of f(.; y).

    ``tol`` is the relative bisection tolerance (0 runs to machine precision).
    Values of y within ``eq_tol * y*`` of y* are reported as the unique
    double root x*.  Depth 2 has the closed form sqrt(sqrt(lam) y - lam).
    """
    y = float(y)
    if y < 0:
        raise ValueError("y must be nonnegative")
    if L == 2:
        arg = math.sqrt(lam) * y - lam
        if arg > 0:
            return RootProfile(y, lam, L, RootKind.UNIQUE, x_hat=math.sqrt(arg))
        return RootProfile(y, lam, L, RootKind.NONE)
    th = thresholds(lam, L)
    if abs(y - th.y_star) <= eq_tol * th.y_star:
        return RootProfile(y, lam, L, RootKind.UNIQUE, x_hat=th.x_star)
    if y < th.y_star:
        return RootProfile(y, lam, L, RootKind.NONE)
    s = math.sqrt(lam)

    def gap(x):
        return v_curve(x, lam, L) - y

    upper = (s * y) ** (1.0 / L)
    lower = (s / y) ** (1.0 / (L - 2))
    x_bar = bisect_monotone(gap, th.x_star, max(upper, th.x_star), True, tol)
    x_under = bisect_monotone(gap, min(lower, th.x_star), th.x_star, False, tol)
    return RootProfile(y, lam, L, RootKind.TWO, x_bar=x_bar, x_under=x_under)


def positive_roots(y, lam, L, eq_tol=DEFAULT_EQ_TOL):
    return root_profile(y, lam, L, eq_tol=eq_tol).labelled_roots()


@dataclass(frozen=True)
class ScalarMinResult:
    y: float
    argmin_set: tuple
    min_value: float
    tie: bool


def scalar_argmin_g(y, lam, L, tie_tol=DEFAULT_TIE_TOL, eq_tol=DEFAULT_EQ_TOL):
    """Global minimizers of g(.; y) over x >= 0.

    Candidates are 0 and the positive roots of f that are local minima of g
    (the larger root, or the double root at y = y*).  All candidates within
    ``tie_band(y, lam, tie_tol)`` of the minimum are returned.
    """
    if L == 2:
        prof = root_profile(y, lam, L)
        cands = [0.0] + ([prof.x_hat] if prof.kind is RootKind.UNIQUE else [])
    else:
        prof = root_profile(y, lam, L, eq_tol=eq_tol)
        cands = [0.0]
        if prof.kind is RootKind.TWO:
            cands.append(prof.x_bar)
        elif prof.kind is RootKind.UNIQUE:
            cands.append(prof.x_hat)
    values = [eval_g(x, y, lam, L) for x in cands]
    best = min(values)
    band = tie_band(y, lam, tie_tol)
    winners = tuple(sorted((x for x, v in zip(cands, values) if v <= best + band),
                           reverse=True))
    return ScalarMinResult(float(y), winners, float(best), len(winners) > 1)


def tie_band(y, lam, tie_tol=DEFAULT_TIE_TOL) -> float:
    """Slack for comparing g values: tie_tol * lam * (1 + y^2).

    g carries an overall factor lam (it is lam times the per-coordinate
    F objective), so the slack scales with it; at lam = 1 this is
    tie_tol * (1 + y^2).
    """
    return tie_tol * lam * (1.0 + y * y)


def is_scalar_argmin(x, y, lam, L, tie_tol=DEFAULT_TIE_TOL) -> bool:
    res = scalar_argmin_g(y, lam, L, tie_tol)
    return eval_g(x, y, lam, L) <= res.min_value + tie_band(y, lam, tie_tol)


def min_g(y, lam, L) -> float:
    return scalar_argmin_g(y, lam, L).min_value


def sweep_profiles(y_values, lam, L, eq_tol=DEFAULT_EQ_TOL):
    return [root_profile(float(y), lam, L, eq_tol=eq_tol) for y in np.asarray(y_values)]
