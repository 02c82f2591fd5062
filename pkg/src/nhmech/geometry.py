"""Chart-based differential-geometry primitives.

Everything works in a single global chart: configuration points, tangent
vectors and covectors are plain 1-D float arrays of length n.  Angles are
unwrapped reals; trigonometric functions take care of periodicity.

Provides numerical Jacobians (central differences or user-supplied analytic
maps), orthonormal nullspace bases of constraint matrices, the exterior
derivative of a one-form evaluated on a vector pair, Lie brackets of vector
fields, and the iterated-bracket rank test that certifies a distribution as
bracket-generating at a point.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable, Optional

import numpy as np
import scipy.linalg

from .errors import DegenerateConstraintsError, EvaluationDomainError

# Central-difference optimum for first derivatives.
CBRT_EPS = float(np.cbrt(np.finfo(float).eps))  # ~6.06e-6

DEFAULT_RANK_TOL = 1e-8


@dataclass(frozen=True)
class DiffStrategy:
    """How to differentiate a map: supplied analytic Jacobian or central FD.

    ``fd_step_scale`` multiplies a per-coordinate step max(1, |q_j|).
    """

    mode: str = "fd"  # "analytic" | "fd"
    fd_step_scale: float = CBRT_EPS

    def __post_init__(self):
        if self.mode not in ("analytic", "fd"):
            raise ValueError(f"unknown differentiation mode {self.mode!r}")
        if not self.fd_step_scale > 0:
            raise ValueError("fd_step_scale must be positive")


FD = DiffStrategy(mode="fd")
ANALYTIC = DiffStrategy(mode="analytic")


@dataclass(frozen=True)
class VectorField:
    """A vector field on Q: q |-> array of length n, plus optional analytic
    Jacobian q |-> (n, n) with J[i, j] = d eval_i / d q_j.  ``kernel`` is an
    opaque dispatch token for a compiled fast path, if one exists."""

    eval: Callable[[np.ndarray], np.ndarray]
    jacobian: Optional[Callable[[np.ndarray], np.ndarray]] = None
    kernel: Optional[object] = None

    def __call__(self, q: np.ndarray) -> np.ndarray:
        return np.asarray(self.eval(q), dtype=float)


def _check_finite(value, what: str) -> np.ndarray:
    value = np.asarray(value, dtype=float)
    if not np.all(np.isfinite(value)):
        raise EvaluationDomainError(f"{what} evaluated to a non-finite value")
    return value


def jacobian(
    f: Callable[[np.ndarray], np.ndarray],
    q: np.ndarray,
    strat: DiffStrategy | None = None,
    jac: Optional[Callable[[np.ndarray], np.ndarray]] = None,
) -> np.ndarray:
    """Jacobian matrix J[i, j] = d f_i / d q_j at q.

    With ``strat=None`` the supplied analytic ``jac`` is used when present,
    otherwise central finite differences with per-coordinate step
    h_j = fd_step_scale * max(1, |q_j|).
    """
    q = np.asarray(q, dtype=float)
    if strat is None:
        strat = ANALYTIC if jac is not None else FD
    if strat.mode == "analytic":
        if jac is None:
            raise ValueError("analytic differentiation requested but no Jacobian supplied")
        return _check_finite(jac(q), "analytic Jacobian")

    f0 = _check_finite(f(q), "map")
    m = f0.shape[0] if f0.ndim else 1
    n = q.shape[0]
    J = np.empty((m, n))
    for j in range(n):
        h = strat.fd_step_scale * max(1.0, abs(q[j]))
        qp = q.copy()
        qm = q.copy()
        qp[j] += h
        qm[j] -= h
        fp = _check_finite(f(qp), "map")
        fm = _check_finite(f(qm), "map")
        J[:, j] = (fp - fm) / (2.0 * h)
    return J


def nullspace_basis(A: np.ndarray, rank_tol: float = DEFAULT_RANK_TOL) -> np.ndarray:
    """Orthonormal basis of ker A, returned as rows of an (n-k, n) array.

    A must have full row rank k at the relative tolerance ``rank_tol``;
    otherwise the constraints are degenerate and we refuse to guess.
    """
    A = np.atleast_2d(np.asarray(A, dtype=float))
    k, n = A.shape
    if k == 0:
        return np.eye(n)
    if not np.all(np.isfinite(A)):
        raise EvaluationDomainError("constraint matrix has non-finite entries")
    svals = scipy.linalg.svdvals(A)
    if k > n or svals[-1] <= rank_tol * svals[0]:
        raise DegenerateConstraintsError(
            f"constraint matrix is rank-deficient (singular values {svals})"
        )
    basis = scipy.linalg.null_space(A, rcond=rank_tol)
    return basis.T  # rows are the kernel vectors


def d_oneform_pair(
    gamma,
    q: np.ndarray,
    v: np.ndarray,
    w: np.ndarray,
    strat: DiffStrategy | None = None,
) -> float:
    """Exterior derivative of the one-form gamma paired with (v, w) at q.

    d(gamma)(v, w) = sum_{i,j} (d gamma_i / d q_j) (v^j w^i - w^j v^i);
    antisymmetric in (v, w) by construction.  ``gamma`` may be a bare
    callable or anything with ``.gamma`` / ``.jacobian`` attributes.
    """
    eval_fn = getattr(gamma, "gamma", gamma)
    jac_fn = getattr(gamma, "jacobian", None)
    J = jacobian(eval_fn, q, strat, jac=jac_fn)
    v = np.asarray(v, dtype=float)
    w = np.asarray(w, dtype=float)
    return float(w @ J @ v - v @ J @ w)


def lie_bracket(
    X: VectorField,
    Y: VectorField,
    q: np.ndarray,
    strat: DiffStrategy | None = None,
) -> np.ndarray:
    """[X, Y](q) = J_Y(q) X(q) - J_X(q) Y(q).

    With ``strat=None`` each field's analytic Jacobian is used when present.
    """
    q = np.asarray(q, dtype=float)
    Jx = jacobian(X.eval, q, strat, jac=X.jacobian)
    Jy = jacobian(Y.eval, q, strat, jac=Y.jacobian)
    return Jy @ _check_finite(X.eval(q), "field") - Jx @ _check_finite(Y.eval(q), "field")


def _numeric_rank(vectors: list[np.ndarray], rank_tol: float) -> int:
    M = np.vstack(vectors)
    svals = scipy.linalg.svdvals(M)
    if svals.size == 0 or svals[0] == 0.0:
        return 0
    return int(np.sum(svals > rank_tol * svals[0]))


def kernel_frame(dist, q: np.ndarray, rank_tol: float = DEFAULT_RANK_TOL) -> list[VectorField]:
    """Smooth local frame spanning ker A near q.

    The SVD nullspace basis of A(q) is not a continuous function of q (sign
    and ordering can jump), so the basis fixed at the base point is
    transported by the smooth projector P(q') = I - A^T (A A^T)^{-1} A.
    At q itself the frame coincides with the SVD basis.  When the
    distribution carries an analytic derivative ``A_deriv`` the frame fields
    get analytic Jacobians, which keeps nested Lie brackets accurate.
    """
    q = np.asarray(q, dtype=float)
    base = nullspace_basis(dist.A(q), rank_tol)
    dA_fn = getattr(dist, "A_deriv", None)

    def make(v0: np.ndarray) -> VectorField:
        def eval_fn(qq: np.ndarray) -> np.ndarray:
            A = np.atleast_2d(np.asarray(dist.A(qq), dtype=float))
            if A.shape[0] == 0:
                return v0.copy()
            G = A @ A.T
            return v0 - A.T @ np.linalg.solve(G, A @ v0)

        jac_fn = None
        if dA_fn is not None:

            def jac_fn(qq: np.ndarray) -> np.ndarray:
                A = np.atleast_2d(np.asarray(dist.A(qq), dtype=float))
                n = qq.shape[0]
                if A.shape[0] == 0:
                    return np.zeros((n, n))
                dA = np.asarray(dA_fn(qq), dtype=float)  # (k, n, n), last axis d/dq_j
                G = A @ A.T
                u = np.linalg.solve(G, A @ v0)
                J = np.empty((n, n))
                for j in range(n):
                    dAj = dA[:, :, j]
                    dGj = dAj @ A.T + A @ dAj.T
                    J[:, j] = -dAj.T @ u - A.T @ np.linalg.solve(G, dAj @ v0 - dGj @ u)
                return J

        return VectorField(eval=eval_fn, jacobian=jac_fn)

    return [make(v.copy()) for v in base]


def bracket_generating_rank(
    dist,
    q: np.ndarray,
    max_depth: int = 3,
    rank_tol: float = DEFAULT_RANK_TOL,
    strat: DiffStrategy | None = None,
) -> tuple[int, int]:
    """Pointwise bracket-generating test at q.

    Starts from a smooth kernel frame of the constraint distribution and
    augments it depth by depth with Lie brackets of the frame against the
    previous layer, tracking the numerical rank of the accumulated span.
    Returns (rank, depth at which that rank was first reached); rank == n
    certifies the distribution as completely nonholonomic at this sample
    point only.

    Bracket fields at depth d are evaluated by d-fold nested differences;
    without analytic constraint derivatives the noise floor grows with
    depth, so directions much smaller than ~1e-6 of the leading singular
    value cannot be certified beyond depth 2.
    """
    q = np.asarray(q, dtype=float)
    n = q.shape[0]
    base_scale = (strat.fd_step_scale if strat is not None else CBRT_EPS)
    frame = kernel_frame(dist, q, rank_tol)
    if not frame:
        raise DegenerateConstraintsError("distribution has zero rank (k = n)")
    analytic_frames = frame[0].jacobian is not None

    vectors = [f(q) for f in frame]
    rank = _numeric_rank(vectors, rank_tol)
    depth_reached = 0
    if rank >= n:
        return rank, 0

    def _jac(F: VectorField, qq: np.ndarray, inner: DiffStrategy) -> np.ndarray:
        if F.jacobian is not None:
            return np.asarray(F.jacobian(qq), dtype=float)
        return jacobian(F.eval, qq, inner)

    def bracket_field(X: VectorField, W: VectorField, level: int) -> VectorField:
        # Widen the FD step with nesting depth to stay above the noise of
        # the inner evaluation; analytic frames push the growth one level out.
        widen = level - 2 if analytic_frames else level - 1
        inner = DiffStrategy("fd", base_scale * 50.0 ** max(0, widen))

        def eval_fn(qq: np.ndarray) -> np.ndarray:
            Jx = _jac(X, qq, inner)
            Jw = _jac(W, qq, inner)
            return Jw @ X(qq) - Jx @ W(qq)

        return VectorField(eval=eval_fn)

    # First layer: pairwise brackets within the frame (i < j suffices by
    # antisymmetry); deeper layers bracket the frame against the last layer.
    layer = [
        bracket_field(frame[i], frame[j], 1)
        for i in range(len(frame))
        for j in range(i + 1, len(frame))
    ]
    for depth in range(1, max_depth + 1):
        if depth > 1:
            layer = [bracket_field(f, w, depth) for f in frame for w in layer]
        new_vectors = [fld(q) for fld in layer]
        new_rank = _numeric_rank(vectors + new_vectors, rank_tol)
        if new_rank > rank:
            rank = new_rank
            depth_reached = depth
        vectors += new_vectors
        if rank >= n:
            break
    return rank, depth_reached
