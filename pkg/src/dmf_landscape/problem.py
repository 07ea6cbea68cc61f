"""Problem data for regularized deep matrix factorization.

A problem is the tuple (d_0, ..., d_L), per-layer weights lambda_l > 0 and a
data matrix Y of shape (d_L, d_0).  The objective is

    F(W) = ||W_L ... W_1 - Y||_F^2 + sum_l lambda_l ||W_l||_F^2.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from functools import cached_property

import numpy as np

DEFAULT_GROUP_TOL = 1e-9


class ProblemError(ValueError):
    """Raised when problem data is malformed.  ``field`` names the culprit."""

    def __init__(self, message, field=None):
        super().__init__(message)
        self.field = field


class NumericFailure(RuntimeError):
    pass


@dataclass(frozen=True)
class SpectralDecomposition:
    """Full SVD of Y with singular values grouped into distinct-value blocks.

    ``bounds`` holds s_0 = 0 < s_1 < ... < s_p = r_Y, so block i covers the
    0-based slice ``bounds[i]:bounds[i + 1]``.
    """

    U: np.ndarray
    V: np.ndarray
    y: np.ndarray
    rank: int
    bounds: tuple
    d_min: int

    @property
    def n_groups(self) -> int:
        return len(self.bounds) - 1

    @property
    def multiplicities(self) -> tuple:
        return tuple(b - a for a, b in zip(self.bounds[:-1], self.bounds[1:]))

    @property
    def d_Y(self) -> int:
        return len(self.y)

    def group_of(self, index: int) -> int:
        """Group number of a 0-based singular value index (-1 for zeros)."""
        for g in range(self.n_groups):
            if self.bounds[g] <= index < self.bounds[g + 1]:
                return g
        return -1

    def sigma_matrix(self) -> np.ndarray:
        m, n = self.U.shape[0], self.V.shape[0]
        S = np.zeros((m, n))
        k = len(self.y)
        S[np.arange(k), np.arange(k)] = self.y
        return S


@dataclass(frozen=True, eq=False)
class Problem:
    dims: tuple
    lambdas: np.ndarray
    Y: np.ndarray
    group_tol: float = DEFAULT_GROUP_TOL
    _lam: float = field(init=False, repr=False)

    def __post_init__(self):
        dims = tuple(int(d) for d in self.dims)
        object.__setattr__(self, "dims", dims)
        if len(dims) < 3:
            raise ProblemError("need at least two layers (len(dims) >= 3)", "dims")
        if any(d < 1 for d in dims):
            raise ProblemError("every dimension must be >= 1", "dims")
        lambdas = np.asarray(self.lambdas, dtype=float).reshape(-1)
        if lambdas.shape != (len(dims) - 1,):
            raise ProblemError(
                f"expected {len(dims) - 1} lambdas, got {lambdas.size}", "lambdas"
            )
        if not np.all(np.isfinite(lambdas)) or np.any(lambdas <= 0):
            raise ProblemError("all lambdas must be finite and > 0", "lambdas")
        Y = np.asarray(self.Y, dtype=float)
        if Y.shape != (dims[-1], dims[0]):
            raise ProblemError(
                f"Y has shape {Y.shape}, expected (d_L, d_0) = {(dims[-1], dims[0])}",
                "Y",
            )
        if not np.all(np.isfinite(Y)):
            raise ProblemError("Y contains non-finite entries", "Y")
        lambdas.setflags(write=False)
        Y = Y.copy()
        Y.setflags(write=False)
        object.__setattr__(self, "lambdas", lambdas)
        object.__setattr__(self, "Y", Y)
        object.__setattr__(self, "_lam", float(np.prod(lambdas)))

    @property
    def depth(self) -> int:
        return len(self.dims) - 1

    @property
    def lam(self) -> float:
        """Product of the per-layer weights."""
        return self._lam

    @property
    def d_Y(self) -> int:
        return min(self.dims[0], self.dims[-1])

    @property
    def d_min(self) -> int:
        return min(self.dims)

    @property
    def is_scalar(self) -> bool:
        return max(self.dims) < 2

    @property
    def shapes(self) -> list:
        return [(self.dims[l + 1], self.dims[l]) for l in range(self.depth)]

    @cached_property
    def spectrum(self) -> SpectralDecomposition:
        return spectral_decompose(self, self.group_tol)

    @classmethod
    def from_singular_values(cls, dims, lambdas, singular_values, **kw):
        dims = tuple(int(d) for d in dims)
        sv = np.asarray(singular_values, dtype=float).reshape(-1)
        k = min(dims[0], dims[-1])
        if sv.size > k:
            raise ProblemError(
                f"{sv.size} singular values given but min(d_0, d_L) = {k}", "Y"
            )
        if np.any(sv < 0):
            raise ProblemError("singular values must be nonnegative", "Y")
        Y = np.zeros((dims[-1], dims[0]))
        Y[np.arange(sv.size), np.arange(sv.size)] = sv
        return cls(dims, lambdas, Y, **kw)

    @classmethod
    def from_dict(cls, doc: dict) -> "Problem":
        if not isinstance(doc, dict):
            raise ProblemError("problem document must be a JSON object")
        unknown = set(doc) - {"dims", "lambdas", "Y", "group_tol"}
        if unknown:
            raise ProblemError(f"unknown keys: {sorted(unknown)}", sorted(unknown)[0])
        for key in ("dims", "lambdas", "Y"):
            if key not in doc:
                raise ProblemError(f"missing key {key!r}", key)
        ydoc = doc["Y"]
        kw = {}
        if "group_tol" in doc:
            kw["group_tol"] = float(doc["group_tol"])
        if not isinstance(ydoc, dict) or len(ydoc) != 1:
            raise ProblemError(
                'Y must be {"dense": [[...]]} or {"singular_values": [...]}', "Y"
            )
        if "dense" in ydoc:
            try:
                Y = np.array(ydoc["dense"], dtype=float)
            except (TypeError, ValueError) as exc:
                raise ProblemError(f"Y.dense is not a numeric matrix: {exc}", "Y")
            if Y.ndim != 2:
                raise ProblemError("Y.dense must be a 2-D array", "Y")
            return cls(doc["dims"], doc["lambdas"], Y, **kw)
        if "singular_values" in ydoc:
            return cls.from_singular_values(
                doc["dims"], doc["lambdas"], ydoc["singular_values"], **kw
            )
        raise ProblemError(f"unknown Y form {sorted(ydoc)}", "Y")

    def to_dict(self) -> dict:
        doc = {
            "dims": list(self.dims),
            "lambdas": [float(v) for v in self.lambdas],
            "Y": {"dense": self.Y.tolist()},
        }
        if self.group_tol != DEFAULT_GROUP_TOL:
            doc["group_tol"] = self.group_tol
        return doc

    @classmethod
    def from_json(cls, text: str) -> "Problem":
        return cls.from_dict(json.loads(text))

    def with_lambdas(self, lambdas) -> "Problem":
        return Problem(self.dims, lambdas, self.Y, group_tol=self.group_tol)


def _fix_signs(U, V, k):
    # largest-magnitude entry of each left singular vector made positive
    for i in range(k):
        j = int(np.argmax(np.abs(U[:, i])))
        if U[j, i] < 0:
            U[:, i] *= -1.0
            V[:, i] *= -1.0


def spectral_decompose(problem: Problem, group_tol: float = DEFAULT_GROUP_TOL):
    Y = problem.Y
    m, n = Y.shape
    try:
        U, s, Vt = np.linalg.svd(Y, full_matrices=True)
    except np.linalg.LinAlgError as exc:
        raise NumericFailure(f"SVD did not converge: {exc}") from exc
    V = Vt.T.copy()
    U = U.copy()
    k = min(m, n)
    _fix_signs(U, V, k)
    s = np.array(s[:k], dtype=float)
    scale = max(1.0, float(s[0])) if k else 1.0
    s[s <= group_tol * scale] = 0.0
    rank = int(np.count_nonzero(s))
    bounds = [0]
    for i in range(1, rank):
        if abs(s[i - 1] - s[i]) > group_tol * scale:
            bounds.append(i)
    if rank:
        bounds.append(rank)
    for arr in (U, V, s):
        arr.setflags(write=False)
    return SpectralDecomposition(U, V, s, rank, tuple(bounds), problem.d_min)
