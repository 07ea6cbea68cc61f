"""Numerical oracles and experiments.

The finite-difference helpers only call ``model.loss`` so they stay
independent of the analytic gradient and Taylor-coefficient code.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from . import scalar
from .classify import (
    Certificate,
    CritClass,
    classify,
    global_min_value,
    spec_loss,
)
from .critical import spec_from_assignment, validate_spec
from .model import (
    _target_and_weights,
    check_stack,
    gradient,
    hessian_quadform,
    loss,
    rescale_F_to_G,
    stack_norm,
)
from .problem import NumericFailure, Problem

DEFAULT_GRAD_TOL = 1e-6
DEFAULT_PROBE_TOL = -1e-6
DEFAULT_MATCH_TOL = 1e-4
GUARD_SLACK = 1e-13


class NotCritical(ValueError):
    pass


def fd_gradient(problem: Problem, W, h=1e-6, which="F") -> list:
    W = [np.array(w, dtype=float) for w in W]
    out = []
    for Wl in W:
        G = np.zeros_like(Wl)
        for idx in np.ndindex(Wl.shape):
            old = Wl[idx]
            Wl[idx] = old + h
            fp = loss(problem, W, which)
            Wl[idx] = old - h
            fm = loss(problem, W, which)
            Wl[idx] = old
            G[idx] = (fp - fm) / (2 * h)
        out.append(G)
    return out


def _shift(W, D, t):
    return [w + t * d for w, d in zip(W, D)]


def fd_quadform(problem: Problem, W, D, t=1e-4, which="F") -> float:
    """Central second difference of t -> loss(W + tD)."""
    f0 = loss(problem, W, which)
    fp = loss(problem, _shift(W, D, t), which)
    fm = loss(problem, _shift(W, D, -t), which)
    return (fp - 2 * f0 + fm) / t**2


def random_unit_direction(problem: Problem, rng) -> list:
    D = [rng.standard_normal(s) for s in problem.shapes]
    n = stack_norm(D)
    return [d / n for d in D]


@dataclass
class CertificateCheck:
    kind: str
    expected: float
    exact: float
    fd: float

    def to_dict(self):
        return dict(kind=self.kind, expected=self.expected, exact=self.exact, fd=self.fd)


@dataclass
class ProbeReport:
    n_samples: int
    min_quadform: float
    max_quadform: float
    seed: int
    which: str = "F"
    certificates: list = field(default_factory=list)

    def to_dict(self):
        return {
            "n_samples": self.n_samples,
            "min_quadform": self.min_quadform,
            "max_quadform": self.max_quadform,
            "seed": self.seed,
            "loss": self.which,
            "certificates": [c.to_dict() for c in self.certificates],
        }


def probe_min_quadform(problem: Problem, W, n=500, seed=0, which="F",
                       certificates=()) -> ProbeReport:
    if n < 1:
        raise ValueError("n must be >= 1")
    check_stack(problem, W)
    rng = np.random.default_rng(seed)
    vals = np.array([
        hessian_quadform(problem, W, random_unit_direction(problem, rng), which)
        for _ in range(n)
    ])
    lo, hi = float(vals.min()), float(vals.max())
    checks = []
    for cert in certificates:
        if cert.coord != which:
            raise ValueError(f"certificate is in {cert.coord} coordinates, probe uses {which}")
        exact = hessian_quadform(problem, W, cert.direction, which)
        checks.append(CertificateCheck(cert.kind.value, cert.expected_quadform, exact,
                                       fd_quadform(problem, W, cert.direction, which=which)))
        # certificates are not unit length; fold in the normalized curvature
        lo = min(lo, exact / stack_norm(cert.direction) ** 2)
    return ProbeReport(n, lo, hi, seed, which, checks)


# ---------------------------------------------------------------- training

_TINY = np.finfo(float).tiny


class _FlatLayout:
    """Each run's stack stored as one row; layers are reshaped views of it."""

    def __init__(self, shapes, weights):
        self.shapes = [tuple(sh) for sh in shapes]
        sizes = [r * c for r, c in self.shapes]
        self.offsets = np.concatenate([[0], np.cumsum(sizes)]).astype(int)
        # per-entry regularization weight, so the penalty is one matvec
        self.wvec = np.concatenate([np.full(n, float(w)) for n, w in zip(sizes, weights)])

    def views(self, theta):
        return [theta[:, a:b].reshape(-1, r, c)
                for (r, c), a, b in zip(self.shapes, self.offsets[:-1], self.offsets[1:])]

    def pack(self, stacks):
        return np.stack([np.concatenate([np.asarray(w, dtype=float).ravel() for w in st])
                         for st in stacks])


def _flat_loss_grad(theta, layout, T):
    """Loss and gradient for a batch of packed stacks, theta of shape (B, N)."""
    W = layout.views(theta)
    L = len(W)
    prefix = [W[0]]
    for l in range(1, L):
        prefix.append(W[l] @ prefix[-1])
    R = prefix[-1] - T
    vals = np.einsum("bij,bij->b", R, R) + (theta * theta) @ layout.wvec
    g = np.empty_like(theta)
    G = layout.views(g)
    back = R  # W_{L:l+2}^T R, built from the top; the factor 2 is applied at the end
    for l in range(L - 1, 0, -1):
        np.matmul(back, prefix[l - 1].transpose(0, 2, 1), out=G[l])
        back = W[l].transpose(0, 2, 1) @ back
    G[0][...] = back
    g += layout.wvec * theta
    g *= 2.0
    return vals, g


def _batch_grad_norm(g):
    return np.sqrt(np.einsum("bn,bn->b", g, g))


def init_stack(problem: Problem, seed, scale=None) -> list:
    rng = np.random.default_rng(seed)
    s = 0.1 * np.sqrt(1.0 / max(problem.dims)) if scale is None else scale
    return [s * rng.standard_normal(sh) for sh in problem.shapes]


@dataclass
class TrainResult:
    iterations: int
    grad_norm: float
    loss: float
    trajectory: list
    seed: int | None
    step: float
    converged: bool
    diverged: bool = False
    halvings: int = 0
    classification: dict | None = None
    W: list | None = field(default=None, repr=False)

    def to_dict(self):
        return {
            "iterations": self.iterations,
            "grad_norm": self.grad_norm,
            "loss": self.loss,
            "trajectory": self.trajectory,
            "seed": self.seed,
            "step": self.step,
            "converged": self.converged,
            "diverged": self.diverged,
            "halvings": self.halvings,
            "classification": self.classification,
        }


def grad_threshold(problem: Problem, grad_tol=DEFAULT_GRAD_TOL, scaled=True) -> float:
    """Stopping level for ||grad F||: grad_tol, times (1 + ||Y||_F) when scaled."""
    if not scaled:
        return float(grad_tol)
    return grad_tol * (1.0 + float(np.linalg.norm(problem.Y)))


def gradient_descent_batch(problem: Problem, inits, step=1e-3, max_iter=200_000,
                           grad_tol=DEFAULT_GRAD_TOL, guard=True, record_every=1000,
                           check_every=50, seeds=None, which="F", scaled=True):
    """Fixed-step descent on several starting stacks at once.

    With ``guard`` the step of a run is halved (and the update undone)
    whenever its loss goes up by more than roundoff, so each recorded
    trajectory is nonincreasing up to ``GUARD_SLACK`` relative.
    Without it a run whose loss passes 1e12 is stopped and marked diverged.
    Runs leave the batch as soon as they stop.
    """
    B = len(inits)
    T, weights = _target_and_weights(problem, which)
    layout = _FlatLayout(problem.shapes, weights)
    thr = grad_threshold(problem, grad_tol, scaled)
    theta = layout.pack(inits)
    live = np.arange(B)  # original run index of each batch row
    steps = np.full(B, float(step))
    halvings = np.zeros(B, dtype=int)
    diverged = np.zeros(B, dtype=bool)
    final_iter = np.full(B, max_iter)
    final_W = [None] * B
    final_val = np.zeros(B)
    final_gn = np.zeros(B)
    vals, grad = _flat_loss_grad(theta, layout, T)
    traj = [[float(v)] for v in vals]

    def retire(rows, k, gn):
        nonlocal theta, grad, vals, live
        views = layout.views(theta)
        for r in rows:
            b = live[r]
            final_iter[b] = k
            final_W[b] = [v[r].copy() for v in views]
            final_val[b] = vals[r]
            final_gn[b] = gn[r]
            if traj[b][-1] != float(vals[r]):
                traj[b].append(float(vals[r]))
        keep = np.setdiff1d(np.arange(live.size), rows)
        theta, grad, vals, live = theta[keep], grad[keep], vals[keep], live[keep]

    gn = _batch_grad_norm(grad)
    retire(np.flatnonzero(gn <= thr), 0, gn)
    for k in range(1, max_iter + 1):
        if live.size == 0:
            break
        ntheta = theta - steps[live][:, None] * grad
        # decayed entries would otherwise sink into subnormals, which are very slow
        ntheta[np.abs(ntheta) < _TINY] = 0.0
        nvals, ngrad = _flat_loss_grad(ntheta, layout, T)
        if guard:
            # increases at roundoff level are not treated as increases
            bad = ~(nvals <= vals + GUARD_SLACK * (1.0 + np.abs(vals)))
            if bad.any():
                rows = np.flatnonzero(bad)
                steps[live[rows]] *= 0.5
                halvings[live[rows]] += 1
                ntheta[rows] = theta[rows]
                ngrad[rows] = grad[rows]
                nvals[rows] = vals[rows]
        theta, grad, vals = ntheta, ngrad, nvals
        if not guard:
            blow = ~np.isfinite(vals) | (vals > 1e12)
            if blow.any():
                rows = np.flatnonzero(blow)
                diverged[live[rows]] = True
                retire(rows, k, np.full(live.size, np.inf))
                continue
        if k % record_every == 0:
            for r, b in enumerate(live):
                traj[b].append(float(vals[r]))
        if k % check_every == 0:
            gn = _batch_grad_norm(grad)
            done = np.flatnonzero((gn <= thr) | (steps[live] < 1e-300))
            if done.size:
                retire(done, k, gn)
    if live.size:
        retire(np.arange(live.size), max_iter, _batch_grad_norm(grad))
    results = []
    for b in range(B):
        results.append(TrainResult(
            int(final_iter[b]), float(final_gn[b]), float(final_val[b]), traj[b],
            None if seeds is None else seeds[b], float(step),
            bool(final_gn[b] <= thr), bool(diverged[b]), int(halvings[b]), None, final_W[b],
        ))
    return results


def gradient_descent(problem: Problem, init=0, step=1e-3, max_iter=200_000,
                     grad_tol=DEFAULT_GRAD_TOL, guard=True, classify_terminal=True,
                     scaled=True, **kw) -> TrainResult:
    """Plain descent on F from a seed (random init) or an explicit stack."""
    if step <= 0:
        raise ValueError("step must be > 0")
    if isinstance(init, (int, np.integer)):
        seed, W0 = int(init), init_stack(problem, int(init))
    else:
        seed, W0 = None, [np.asarray(w, dtype=float) for w in init]
        check_stack(problem, W0)
    res = gradient_descent_batch(problem, [W0], step, max_iter, grad_tol, guard,
                                 seeds=[seed], scaled=scaled, **kw)[0]
    if classify_terminal and res.converged:
        res.classification = classify_numerically(
            problem, res.W, grad_tol=grad_tol, scaled=scaled).to_dict()
    return res


# ---------------------------------------------------- numeric classification

@dataclass
class NumericClassification:
    kind: CritClass
    matched: bool
    spec: object = None
    clause: str = ""
    sigma_layers: list = field(default_factory=list)
    sigma_product: list = field(default_factory=list)
    loss_gap: float | None = None
    min_probe: float | None = None

    def to_dict(self):
        return {
            "class": self.kind.value,
            "matched": self.matched,
            "unmatched": not self.matched,
            "clause": self.clause,
            "spec": None if self.spec is None else self.spec.to_dict(),
            "sigma_layers": self.sigma_layers,
            "sigma_product": self.sigma_product,
            "loss_gap": self.loss_gap,
            "min_probe": self.min_probe,
        }


def layer_sigma(problem: Problem, W) -> np.ndarray:
    """Shared singular values of the G-coordinate layers (median across layers)."""
    WG = rescale_F_to_G(W, problem.lambdas)
    d = problem.d_min
    sv = np.array([np.linalg.svd(w, compute_uv=False)[:d] for w in WG])
    return np.median(sv, axis=0)


def _product_pairs(problem: Problem, W):
    """(sigma, group) pairs read off U_Y^T W_{L:1} V_Y in G coordinates."""
    WG = rescale_F_to_G(W, problem.lambdas)
    P = WG[0]
    for w in WG[1:]:
        P = w @ P
    spec = problem.spectrum
    M = spec.U.T @ P @ spec.V
    L = problem.depth
    pairs = []
    for g in range(spec.n_groups):
        a, b = spec.bounds[g], spec.bounds[g + 1]
        block = M[a:b, a:b]
        ev = np.linalg.eigvalsh(0.5 * (block + block.T))
        for e in ev:
            pairs.append((max(float(e), 0.0) ** (1.0 / L), g))
    return pairs


def classify_numerically(problem: Problem, W, grad_tol=DEFAULT_GRAD_TOL,
                         match_tol=DEFAULT_MATCH_TOL, probe_n=200, seed=0, scaled=True):
    """Label a numerically critical F-coordinate stack.

    Each positive singular value of the end-to-end map, read in the data's
    singular basis, is snapped to the nearest root of f for its own data
    value.  The snapped spec is accepted when it validates and reproduces the
    loss; otherwise random curvature probing decides and ``matched`` is False.
    """
    check_stack(problem, W)
    thr = grad_threshold(problem, grad_tol, scaled)
    gn = stack_norm(gradient(problem, W))
    if gn > thr:
        raise NotCritical(f"gradient norm {gn:.3e} exceeds {thr:.3e}")
    lam, L = problem.lam, problem.depth
    sig_layers = layer_sigma(problem, W)
    pairs = _product_pairs(problem, W)
    scale = max(1.0, float(np.max(sig_layers, initial=0.0)))
    entries = []
    ok = True
    spec_y = problem.spectrum
    for s, g in pairs:
        if s <= match_tol * scale:
            continue
        yg = float(spec_y.y[spec_y.bounds[g]])
        roots = scalar.positive_roots(yg, lam, L)
        if not roots:
            ok = False
            break
        r, _ = min(roots, key=lambda rr: abs(rr[0] - s))
        if abs(r - s) > match_tol * max(1.0, r):
            ok = False
            break
        entries.append((r, g))
    if ok and len(entries) > problem.d_min:
        ok = False
    F = loss(problem, W)
    spec = None
    if ok:
        spec = spec_from_assignment(problem, entries)
        ok = bool(validate_spec(problem, spec))
    if ok:
        gap = F - spec_loss(problem, spec)
        if abs(gap) <= 1e-6 * (1.0 + abs(F)):
            cls = classify(problem, spec)
            return NumericClassification(cls.kind, True, spec, cls.clause.value,
                                         sig_layers.tolist(), [p[0] for p in pairs], gap)
    rep = probe_min_quadform(problem, W, probe_n, seed)
    if rep.min_quadform < DEFAULT_PROBE_TOL:
        kind = CritClass.STRICT_SADDLE
    elif F <= global_min_value(problem) + 1e-6 * (1.0 + abs(F)):
        kind = CritClass.GLOBAL_MIN
    else:
        kind = CritClass.SPURIOUS_LOCAL_MIN
    return NumericClassification(kind, False, None, "probe", sig_layers.tolist(),
                                 [p[0] for p in pairs], None, rep.min_quadform)


# -------------------------------------------------------------- landscapes

@dataclass
class LandscapeGrid:
    alphas: np.ndarray
    betas: np.ndarray
    values: np.ndarray  # values[i, j] = h(alphas[i], betas[j]) - h(0, 0)
    reference: float
    seed: int
    which: str = "F"
    directions: list = field(default_factory=list, repr=False)

    def rows(self):
        for i, a in enumerate(self.alphas):
            for j, b in enumerate(self.betas):
                yield float(a), float(b), float(self.values[i, j])


def _flat(D):
    return np.concatenate([d.ravel() for d in D])


def _unflat(v, shapes):
    out, k = [], 0
    for s in shapes:
        n = s[0] * s[1]
        out.append(v[k:k + n].reshape(s))
        k += n
    return out


def orthonormal_pair(problem: Problem, rng, max_tries=16):
    """Two Gaussian stacks made orthonormal by Gram-Schmidt."""
    for _ in range(max_tries):
        a = _flat([rng.standard_normal(s) for s in problem.shapes])
        b = _flat([rng.standard_normal(s) for s in problem.shapes])
        na = np.linalg.norm(a)
        if na == 0:
            continue
        a = a / na
        b = b - (a @ b) * a
        nb = np.linalg.norm(b)
        if nb <= 1e-8 * np.sqrt(a.size):
            continue
        b = b / nb
        b = b - (a @ b) * a  # second pass for exact orthogonality
        b = b / np.linalg.norm(b)
        return _unflat(a, problem.shapes), _unflat(b, problem.shapes)
    raise NumericFailure("could not draw two independent directions")


def landscape_slice(problem: Problem, W_ref, seed=0, half_range=1.0, resolution=201,
                    which="F", chunk=4096) -> LandscapeGrid:
    """h(a, b) = loss(W_ref + a D1 + b D2) - loss(W_ref) on a square grid.

    The grid includes the origin exactly when ``resolution`` is odd.
    """
    if resolution < 2:
        raise ValueError("resolution must be >= 2")
    check_stack(problem, W_ref)
    rng = np.random.default_rng(seed)
    D1, D2 = orthonormal_pair(problem, rng)
    grid = np.linspace(-half_range, half_range, resolution)
    if resolution % 2:
        grid[resolution // 2] = 0.0
    T, weights = _target_and_weights(problem, which)
    A, Bm = np.meshgrid(grid, grid, indexing="ij")
    a_all, b_all = A.ravel(), Bm.ravel()
    out = np.empty(a_all.size)
    for start in range(0, a_all.size, chunk):
        a = a_all[start:start + chunk][:, None, None]
        b = b_all[start:start + chunk][:, None, None]
        Ws = [w[None] + a * d1[None] + b * d2[None] for w, d1, d2 in zip(W_ref, D1, D2)]
        vals, _ = _loss_only(Ws, T, weights)
        out[start:start + chunk] = vals
    ref = float(_loss_only([np.asarray(w)[None] for w in W_ref], T, weights)[0][0])
    values = out.reshape(A.shape) - ref
    return LandscapeGrid(grid, grid.copy(), values, ref, seed, which, [D1, D2])


def _loss_only(W, T, weights):
    P = W[0]
    for Wl in W[1:]:
        P = Wl @ P
    R = P - T
    vals = np.einsum("bij,bij->b", R, R)
    for w, Wl in zip(weights, W):
        vals = vals + w * np.einsum("bij,bij->b", Wl, Wl)
    return vals, None


def cubic_profile(problem: Problem, W, cert: Certificate, t, which=None):
    """G(W + t D) - G(W) along a certificate, in the certificate's coordinates."""
    which = cert.coord if which is None else which
    base = loss(problem, W, which)
    return loss(problem, _shift(W, cert.direction, t), which) - base
