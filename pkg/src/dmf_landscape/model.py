"""Losses, gradients and exact directional Taylor coefficients.

Two objectives share one implementation:

* ``"F"``: ||W_L...W_1 - Y||^2 + sum_l lambda_l ||W_l||^2
* ``"G"``: ||W_L...W_1 - sqrt(lam) Y||^2 + lam sum_l ||W_l||^2, lam = prod lambda_l

A stack is a plain list of 2-D arrays, layer 1 first.
"""

from __future__ import annotations

import numpy as np

from .problem import Problem, ProblemError

LOSSES = ("F", "G")


def check_stack(problem: Problem, W, name="W"):
    if len(W) != problem.depth:
        raise ProblemError(f"{name} has {len(W)} layers, expected {problem.depth}", name)
    for l, (Wl, shape) in enumerate(zip(W, problem.shapes), start=1):
        if np.shape(Wl) != shape:
            raise ProblemError(
                f"{name}[{l}] has shape {np.shape(Wl)}, expected {shape}", name
            )


def _target_and_weights(problem: Problem, loss: str):
    if loss == "F":
        return problem.Y, problem.lambdas
    if loss == "G":
        lam = problem.lam
        return np.sqrt(lam) * problem.Y, np.full(problem.depth, lam)
    raise ValueError(f"loss must be one of {LOSSES}, got {loss!r}")


def end_to_end_product(W) -> np.ndarray:
    """W_L ... W_1."""
    P = np.asarray(W[0], dtype=float)
    for Wl in W[1:]:
        if Wl.shape[1] != P.shape[0]:
            raise ProblemError(
                f"cannot chain {Wl.shape} after {P.shape}", "W"
            )
        P = Wl @ P
    return P


def loss(problem: Problem, W, which: str = "F") -> float:
    check_stack(problem, W)
    T, weights = _target_and_weights(problem, which)
    R = end_to_end_product(W) - T
    reg = sum(w * float(np.sum(Wl * Wl)) for w, Wl in zip(weights, W))
    return float(np.sum(R * R)) + reg


def loss_F(problem, W):
    return loss(problem, W, "F")


def loss_G(problem, W):
    return loss(problem, W, "G")


def gradient(problem: Problem, W, which: str = "F") -> list:
    """grad_l = 2 W_{L:l+1}^T (W_{L:1} - T) W_{l-1:1}^T + 2 w_l W_l."""
    check_stack(problem, W)
    T, weights = _target_and_weights(problem, which)
    L = problem.depth
    # prefix[l] = W_l ... W_1 (prefix[0] = I), suffix[l] = W_L ... W_{l+1}
    prefix = [np.eye(problem.dims[0])]
    for Wl in W:
        prefix.append(Wl @ prefix[-1])
    suffix = [None] * (L + 1)
    suffix[L] = np.eye(problem.dims[-1])
    for l in range(L - 1, -1, -1):
        suffix[l] = suffix[l + 1] @ W[l]
    R = prefix[L] - T
    grads = []
    for l in range(L):
        # layer l+1 in 1-based terms: left factor W_{L:l+2}, right factor W_{l:1}
        left = suffix[l + 1]
        right = prefix[l]
        grads.append(2.0 * (left.T @ R @ right.T) + 2.0 * weights[l] * W[l])
    return grads


def grad_F(problem, W):
    return gradient(problem, W, "F")


def grad_G(problem, W):
    return gradient(problem, W, "G")


def stack_inner(A, B) -> float:
    return float(sum(np.sum(a * b) for a, b in zip(A, B)))


def stack_norm(A) -> float:
    return float(np.sqrt(stack_inner(A, A)))


def product_coefficients(W, D, order: int) -> list:
    """Matrix coefficients P_0..P_order of prod_l (W_l + t D_l) in powers of t."""
    coeffs = [np.asarray(W[0], dtype=float), np.asarray(D[0], dtype=float)]
    coeffs = coeffs[: order + 1]
    for Wl, Dl in zip(W[1:], D[1:]):
        n = len(coeffs)
        new = [Wl @ coeffs[0]]
        for k in range(1, min(n, order) + 1):
            term = Dl @ coeffs[k - 1]
            if k < n:
                term = term + Wl @ coeffs[k]
            new.append(term)
        coeffs = new
    return coeffs


def directional_coefficients(problem: Problem, W, D, which="F", order=None):
    """Exact coefficients c_0..c_order of t -> loss(W + tD).

    The loss is a polynomial of degree 2L in t; ``order`` defaults to 2L.
    """
    check_stack(problem, W)
    check_stack(problem, D, "D")
    T, weights = _target_and_weights(problem, which)
    L = problem.depth
    order = 2 * L if order is None else int(order)
    P = product_coefficients(W, D, min(order, L))
    R = [P[0] - T] + P[1:]
    c = np.zeros(order + 1)
    for a in range(len(R)):
        for b in range(len(R)):
            if a + b <= order:
                c[a + b] += float(np.sum(R[a] * R[b]))
    for w, Wl, Dl in zip(weights, W, D):
        c[0] += w * float(np.sum(Wl * Wl))
        if order >= 1:
            c[1] += 2.0 * w * float(np.sum(Wl * Dl))
        if order >= 2:
            c[2] += w * float(np.sum(Dl * Dl))
    return c


def hessian_quadform(problem: Problem, W, D, which="F") -> float:
    """Hessian bilinear form along D: twice the t^2 coefficient of loss(W + tD)."""
    return 2.0 * float(directional_coefficients(problem, W, D, which, order=2)[2])


def rescale_F_to_G(W, lambdas) -> list:
    return [np.sqrt(lam) * np.asarray(Wl, dtype=float) for lam, Wl in zip(lambdas, W)]


def rescale_G_to_F(W, lambdas) -> list:
    return [np.asarray(Wl, dtype=float) / np.sqrt(lam) for lam, Wl in zip(lambdas, W)]


def to_coord(problem: Problem, W_G, coord: str) -> list:
    """Map a G-coordinate stack into ``coord`` ("F" or "G")."""
    if coord == "G":
        return [np.asarray(w, dtype=float) for w in W_G]
    if coord == "F":
        return rescale_G_to_F(W_G, problem.lambdas)
    raise ValueError(f"coord must be 'F' or 'G', got {coord!r}")


def zeros_like_stack(problem: Problem) -> list:
    return [np.zeros(s) for s in problem.shapes]
