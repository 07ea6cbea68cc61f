"""Closed-form critical points.

A critical family is indexed by a pair (sigma, pi): ``sigma`` is a
nonincreasing nonnegative vector of length d_min and ``pi`` a permutation of
range(d_Y) (0-based) such that every sigma[i] is a root of f(.; y[pi[i]]).
Members of the family differ by orthogonal "dressings" (see ``Dressing``).

In G coordinates each layer is Sigma = BlkD(diag(sigma), 0) dressed as

    W_1 = Q_2 Sigma BlkD(P, I) BlkD(O_1, ..., O_p, O_tail) V_Y^T
    W_l = Q_{l+1} Sigma Q_l^T                    (1 < l < L)
    W_L = U_Y BlkD(O_1^T, ..., O_p^T, Ohat_tail^T) BlkD(P^T, I) Sigma Q_L^T

with P[i, pi[i]] = 1.  F coordinates divide layer l by sqrt(lambda_l).
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass, field

import numpy as np
from scipy.linalg import block_diag

from . import scalar
from .model import to_coord
from .problem import Problem

DEFAULT_SPEC_TOL = 1e-8


@dataclass(frozen=True, eq=False)
class CriticalSpec:
    sigma: np.ndarray
    pi: tuple

    def __post_init__(self):
        sigma = np.array(self.sigma, dtype=float).reshape(-1)
        sigma.setflags(write=False)
        object.__setattr__(self, "sigma", sigma)
        object.__setattr__(self, "pi", tuple(int(p) for p in self.pi))

    @property
    def r_sigma(self) -> int:
        return int(np.count_nonzero(self.sigma > 0))

    def assigned_y(self, problem: Problem) -> np.ndarray:
        """Data singular values paired with each slot of sigma."""
        y = problem.spectrum.y
        return np.array([y[self.pi[i]] for i in range(len(self.sigma))])

    def key(self, problem: Problem, digits=12):
        ys = self.assigned_y(problem)[: self.r_sigma]
        return (tuple(np.round(self.sigma, digits)), tuple(np.round(ys, digits)))

    def to_dict(self):
        return {"sigma": [float(s) for s in self.sigma], "pi": list(self.pi)}

    @classmethod
    def from_dict(cls, doc):
        if not isinstance(doc, dict):
            raise ValueError("spec document must be a JSON object")
        unknown = set(doc) - {"sigma", "pi", "id", "labels", "assigned_y"}
        if unknown:
            raise ValueError(f"unknown spec keys: {sorted(unknown)}")
        return cls(doc["sigma"], doc["pi"])

    @classmethod
    def identity(cls, problem: Problem, sigma):
        return cls(sigma, range(problem.d_Y))


@dataclass(frozen=True)
class SpecCheck:
    ok: bool
    reason: str = ""
    index: int | None = None
    field: str | None = None

    def __bool__(self):
        return self.ok


class InvalidSpec(ValueError):
    def __init__(self, check: SpecCheck):
        super().__init__(check.reason)
        self.check = check


def root_residual(sigma_i, y, lam, L) -> float:
    """|f(sigma_i; y)| relative to the size of its three terms."""
    s = np.sqrt(lam)
    terms = (sigma_i ** (2 * L - 1), s * y * sigma_i ** (L - 1), lam * sigma_i)
    scale = sum(abs(t) for t in terms)
    if scale == 0.0:
        return 0.0
    return abs(terms[0] - terms[1] + terms[2]) / scale


def validate_spec(problem: Problem, spec: CriticalSpec, tol=DEFAULT_SPEC_TOL):
    d_min, d_Y = problem.d_min, problem.d_Y
    sigma = spec.sigma
    if sigma.shape != (d_min,):
        return SpecCheck(False, f"sigma has length {sigma.size}, expected d_min = {d_min}",
                         field="sigma")
    if sorted(spec.pi) != list(range(d_Y)):
        return SpecCheck(False, f"pi is not a permutation of range({d_Y})", field="pi")
    if np.any(sigma < 0) or not np.all(np.isfinite(sigma)):
        return SpecCheck(False, "sigma must be finite and nonnegative", field="sigma")
    for i in range(d_min - 1):
        if sigma[i] < sigma[i + 1]:
            return SpecCheck(False, f"sigma not nonincreasing at index {i}", i, "sigma")
    ys = spec.assigned_y(problem)
    for i in range(d_min):
        res = root_residual(sigma[i], ys[i], problem.lam, problem.depth)
        if res > tol:
            val = scalar.eval_f(sigma[i], ys[i], problem.lam, problem.depth)
            return SpecCheck(
                False,
                f"f(sigma[{i}]; y[pi[{i}]]) = {val:.3e} != 0 "
                f"(sigma = {sigma[i]!r}, y = {ys[i]!r})",
                i,
                "sigma",
            )
    return SpecCheck(True)


@dataclass(frozen=True)
class Dressing:
    """Orthogonal matrices parametrizing one member of a critical family.

    ``Q[k]`` is Q_{k+2} of size d_{k+1}; ``O`` are the per-group blocks;
    ``O_tail`` acts on the d_0 - r_Y trailing input directions and
    ``O_hat_tail`` on the d_L - r_Y trailing output directions.
    """

    Q: list
    O: list
    O_tail: np.ndarray
    O_hat_tail: np.ndarray

    def blocks(self):
        yield from self.Q
        yield from self.O
        yield self.O_tail
        yield self.O_hat_tail

    def orthogonality_residual(self) -> float:
        res = 0.0
        for B in self.blocks():
            if B.size:
                res = max(res, float(np.max(np.abs(B.T @ B - np.eye(B.shape[0])))))
        return res


def canonical_dressing(problem: Problem) -> Dressing:
    spec = problem.spectrum
    return Dressing(
        Q=[np.eye(d) for d in problem.dims[1:-1]],
        O=[np.eye(h) for h in spec.multiplicities],
        O_tail=np.eye(problem.dims[0] - spec.rank),
        O_hat_tail=np.eye(problem.dims[-1] - spec.rank),
    )


def _haar(rng, n):
    if n == 0:
        return np.eye(0)
    A = rng.standard_normal((n, n))
    Q, R = np.linalg.qr(A)
    return Q * np.sign(np.diag(R))


def random_dressing(problem: Problem, seed) -> Dressing:
    rng = np.random.default_rng(seed)
    spec = problem.spectrum
    return Dressing(
        Q=[_haar(rng, d) for d in problem.dims[1:-1]],
        O=[_haar(rng, h) for h in spec.multiplicities],
        O_tail=_haar(rng, problem.dims[0] - spec.rank),
        O_hat_tail=_haar(rng, problem.dims[-1] - spec.rank),
    )


def permutation_matrix(pi) -> np.ndarray:
    n = len(pi)
    P = np.zeros((n, n))
    P[np.arange(n), list(pi)] = 1.0
    return P


def _padded_perm(pi, n):
    """BlkD(P, I_{n - len(pi)})."""
    P = np.eye(n)
    k = len(pi)
    P[:k, :k] = permutation_matrix(pi)
    return P


def diag_block(sigma, shape) -> np.ndarray:
    S = np.zeros(shape)
    k = len(sigma)
    S[np.arange(k), np.arange(k)] = sigma
    return S


def simplified_stack(problem: Problem, spec: CriticalSpec) -> list:
    """Undressed G-coordinate point for the diagonal data matrix Sigma_Y."""
    L = problem.depth
    shapes = problem.shapes
    Pin = _padded_perm(spec.pi, problem.dims[0])
    Pout = _padded_perm(spec.pi, problem.dims[-1])
    Z = [diag_block(spec.sigma, s) for s in shapes]
    Z[0] = Z[0] @ Pin
    Z[L - 1] = Pout.T @ Z[L - 1]
    return Z


def _blkdiag(blocks) -> np.ndarray:
    # zero-width blocks are dropped, matching the omitted-block convention
    blocks = [B for B in blocks if B.size]
    return block_diag(*blocks) if blocks else np.eye(0)


def dress(problem: Problem, Z, dressing: Dressing | None = None) -> list:
    """Apply the orthogonal change of variables taking Sigma_Y-frame stacks to Y's.

    This map is linear and norm preserving, so it transports both points and
    directions and leaves loss values and Hessian forms unchanged.
    """
    dressing = canonical_dressing(problem) if dressing is None else dressing
    spec = problem.spectrum
    L = problem.depth
    O_in = _blkdiag([*dressing.O, dressing.O_tail])
    O_out = _blkdiag([*dressing.O, dressing.O_hat_tail])
    Q = dressing.Q  # Q[k] = Q_{k+2}
    out = []
    for l in range(L):  # 0-based layer index; layer l+1 in 1-based terms
        M = np.asarray(Z[l], dtype=float)
        left = spec.U @ O_out.T if l == L - 1 else Q[l]
        right = O_in @ spec.V.T if l == 0 else Q[l - 1].T
        out.append(left @ M @ right)
    return out


def construct(problem: Problem, spec: CriticalSpec, dressing: Dressing | None = None,
              coord: str = "F", tol=DEFAULT_SPEC_TOL) -> list:
    check = validate_spec(problem, spec, tol)
    if not check:
        raise InvalidSpec(check)
    W_G = dress(problem, simplified_stack(problem, spec), dressing)
    return to_coord(problem, W_G, coord)


def balancedness_residual(W) -> float:
    """max_l ||W_l W_l^T - W_{l+1}^T W_{l+1}||_F."""
    res = 0.0
    for A, B in zip(W[:-1], W[1:]):
        res = max(res, float(np.linalg.norm(A @ A.T - B.T @ B)))
    return res


@dataclass
class SpecFamily:
    specs: list
    labels: list  # per spec: tuple of RootLabel for the support
    complete: bool
    caps: dict = field(default_factory=dict)

    def __len__(self):
        return len(self.specs)

    def __iter__(self):
        return iter(self.specs)


def _group_roots(problem: Problem, eq_tol):
    """Per distinct positive data value: (group index, y, [(root, label), ...])."""
    spec = problem.spectrum
    out = []
    for g in range(spec.n_groups):
        yg = float(spec.y[spec.bounds[g]])
        roots = scalar.positive_roots(yg, problem.lam, problem.depth, eq_tol)
        out.append((g, yg, roots))
    return out


def spec_from_assignment(problem: Problem, entries) -> CriticalSpec:
    """Build a spec from (sigma value, group index) pairs for the support.

    Slots are sorted by sigma (descending).  Data indices inside a group are
    consumed in order; unused indices fill the remaining slots ascending.
    """
    spec = problem.spectrum
    entries = sorted(entries, key=lambda e: (-e[0], e[1]))
    next_free = {g: spec.bounds[g] for g in range(spec.n_groups)}
    sigma = np.zeros(problem.d_min)
    pi = []
    for i, (val, g) in enumerate(entries):
        sigma[i] = val
        pi.append(next_free[g])
        next_free[g] += 1
    used = set(pi)
    pi.extend(k for k in range(problem.d_Y) if k not in used)
    return CriticalSpec(sigma, pi)


def enumerate_specs(problem: Problem, max_specs=200_000, eq_tol=scalar.DEFAULT_EQ_TOL):
    """Every (sigma, y-assignment) critical family, one representative pi each.

    Families are counted per multiset of (group, root) choices; permutations
    inside a group of equal singular values give the same family.
    """
    groups = _group_roots(problem, eq_tol)
    d_min = problem.d_min
    mult = problem.spectrum.multiplicities
    # options per group: count vectors over that group's roots, total <= h_g
    per_group = []
    for g, _, roots in groups:
        h = mult[g]
        opts = []
        for counts in itertools.product(range(min(h, d_min) + 1), repeat=len(roots)):
            if sum(counts) <= h:
                opts.append(counts)
        per_group.append(opts)
    specs, labels = [], []
    complete = True

    def rec(g, chosen, used):
        nonlocal complete
        if len(specs) >= max_specs:
            complete = False
            return
        if g == len(groups):
            entries, labs = [], []
            for (gi, _, roots), counts in zip(groups, chosen):
                for (val, lab), c in zip(roots, counts):
                    entries.extend([(val, gi)] * c)
                    labs.extend([(val, lab)] * c)
            specs.append(spec_from_assignment(problem, entries))
            labels.append(tuple(lab for _, lab in sorted(labs, key=lambda e: -e[0])))
            return
        for counts in per_group[g]:
            k = sum(counts)
            if used + k <= d_min:
                rec(g + 1, chosen + [counts], used + k)

    rec(0, [], 0)
    return SpecFamily(specs, labels, complete, {"max_specs": max_specs})


def global_specs(problem: Problem, tie_tol=scalar.DEFAULT_TIE_TOL) -> list:
    """All sorted sigma with sigma_i a global minimizer of g(.; y_i), pi = id."""
    y = problem.spectrum.y
    L, lam = problem.depth, problem.lam
    choices = []
    for i in range(problem.d_min):
        res = scalar.scalar_argmin_g(float(y[i]), lam, L, tie_tol)
        choices.append(res.argmin_set)
    out = []
    seen = set()
    for combo in itertools.product(*choices):
        sig = np.array(combo, dtype=float)
        if np.any(np.diff(sig) > 0):
            continue
        key = tuple(sig)
        if key in seen:
            continue
        seen.add(key)
        out.append(CriticalSpec.identity(problem, sig))
    return out
