"""Velocity constraints on T*Q and the constrained Hamiltonian vector field.

The distribution of admissible velocities is ker A(q) for a full-row-rank
k x n matrix A whose rows are the constraint one-forms.  Its image under
the Legendre transform is the constrained momentum space, the submanifold
of T*Q the constrained flow lives on.  The flow itself is the canonical
field plus reaction forces A^T lambda, with the multipliers chosen each
instant so that the constraint functions A(q) dH/dp stay zero.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass, field
from typing import Callable, Optional

import numpy as np
import scipy.linalg

from .errors import (
    ConstraintViolationError,
    EvaluationDomainError,
    RegularityError,
)
from .geometry import DiffStrategy, jacobian
from .mechanics import MechanicalSystem, hamiltonian_derivs, legendre_inv


@dataclass(frozen=True)
class ConstraintDistribution:
    """k linear velocity constraints: rows of A(q) annihilate admissible
    velocities.  ``A_deriv(q)`` -> (k, n, n) with [s, i, j] = dA[s, i]/dq_j.
    """

    k: int
    A: Callable[[np.ndarray], np.ndarray]
    A_deriv: Optional[Callable[[np.ndarray], np.ndarray]] = None

    def matrix(self, q: np.ndarray) -> np.ndarray:
        A = np.atleast_2d(np.asarray(self.A(q), dtype=float))
        if not np.all(np.isfinite(A)):
            raise EvaluationDomainError("constraint matrix has non-finite entries")
        if A.shape[0] != self.k:
            raise ValueError(f"A(q) returned {A.shape[0]} rows, expected {self.k}")
        return A

    def matrix_deriv(self, q: np.ndarray, strat: DiffStrategy | None = None) -> np.ndarray:
        if self.A_deriv is not None and (strat is None or strat.mode == "analytic"):
            return np.asarray(self.A_deriv(q), dtype=float)
        if strat is not None and strat.mode == "analytic":
            raise ValueError("analytic mode requested but A_deriv is missing")
        n = np.asarray(q).shape[0]
        fd = strat if strat is not None else DiffStrategy("fd")
        flat = jacobian(lambda qq: self.matrix(qq).ravel(), q, fd)  # (k*n, n)
        return flat.reshape(self.k, n, n)


def unconstrained(dim: int) -> ConstraintDistribution:
    """The k = 0 distribution (all of TQ)."""
    return ConstraintDistribution(
        k=0,
        A=lambda q: np.zeros((0, dim)),
        A_deriv=lambda q: np.zeros((0, dim, dim)),
    )


@dataclass(frozen=True)
class KernelSpec:
    """Dispatch token for a compiled fast path: kernel registry name plus
    the flat parameter tuple the kernel constructor expects."""

    name: str
    params: tuple


@dataclass(frozen=True)
class NonholonomicSystem:
    mech: MechanicalSystem
    dist: ConstraintDistribution
    # Optional configuration-domain guard; False means "evaluation here is
    # outside the valid chart" (e.g. snakeboard wheel-angle singularity).
    domain_guard: Optional[Callable[[np.ndarray], bool]] = None
    kernel: Optional[KernelSpec] = None

    @property
    def dim(self) -> int:
        return self.mech.dim

    @property
    def k(self) -> int:
        return self.dist.k

    def check_domain(self, q: np.ndarray) -> None:
        if self.domain_guard is not None and not self.domain_guard(np.asarray(q, dtype=float)):
            raise EvaluationDomainError(f"configuration {q} is outside the system domain")


def constraint_residual(sys: NonholonomicSystem, q: np.ndarray, p: np.ndarray) -> np.ndarray:
    """A(q) g^{-1} p: zero exactly when p is in the constrained momentum
    space (equivalently, when the velocity of p is admissible)."""
    sys.check_domain(q)
    if sys.k == 0:
        return np.zeros(0)
    return sys.dist.matrix(q) @ legendre_inv(sys.mech, q, p)


def in_constrained_momentum_space(
    sys: NonholonomicSystem, q: np.ndarray, p: np.ndarray, tol: float = 1e-10
) -> tuple[bool, np.ndarray]:
    """Membership test with the residual it was decided on."""
    residual = constraint_residual(sys, q, p)
    inside = bool(residual.size == 0 or np.max(np.abs(residual)) <= tol)
    return inside, residual


def regularity_matrix(sys: NonholonomicSystem, q: np.ndarray, p: np.ndarray) -> np.ndarray:
    """C(q) = A g^{-1} A^T; symmetric positive definite for any Riemannian
    metric, which is what guarantees a unique multiplier solve."""
    sys.check_domain(q)
    if sys.k == 0:
        return np.zeros((0, 0))
    A = sys.dist.matrix(q)
    Aginv = np.vstack([legendre_inv(sys.mech, q, row) for row in A])
    C = A @ Aginv.T
    return 0.5 * (C + C.T)


def project_momentum(sys: NonholonomicSystem, q: np.ndarray, p: np.ndarray) -> np.ndarray:
    """Least-squares correction p - A^T C^{-1} A g^{-1} p onto the
    constrained momentum space (used once, on initial conditions)."""
    p = np.asarray(p, dtype=float)
    if sys.k == 0:
        return p.copy()
    r = constraint_residual(sys, q, p)
    C = regularity_matrix(sys, q, p)
    A = sys.dist.matrix(q)
    return p - A.T @ np.linalg.solve(C, r)


def _multiplier_rhs(sys, q, p, strat) -> tuple[np.ndarray, np.ndarray, object]:
    d = hamiltonian_derivs(sys.mech, q, p, strat)
    A = sys.dist.matrix(q)
    dA = sys.dist.matrix_deriv(q, strat)
    v = d.H_p
    # d/dt [A dH/dp] = 0 along the forced flow, solved for the multipliers:
    b = A @ (d.H_pp @ d.H_q) - np.einsum("sij,i,j->s", dA, v, v) - A @ (d.H_pq @ v)
    return A, b, d


def multipliers(
    sys: NonholonomicSystem,
    q: np.ndarray,
    p: np.ndarray,
    strat: DiffStrategy | None = None,
    violation_tol: Optional[float] = None,
    on_violation: str = "raise",
) -> np.ndarray:
    """Constraint-force coefficients lambda with C lambda = b.

    The momentum is assumed to lie in the constrained momentum space; pass
    ``violation_tol`` to have that actually checked (warn or raise per
    ``on_violation``).
    """
    sys.check_domain(q)
    if sys.k == 0:
        return np.zeros(0)
    if violation_tol is not None:
        inside, residual = in_constrained_momentum_space(sys, q, p, violation_tol)
        if not inside:
            msg = f"momentum violates constraints: |residual| = {np.max(np.abs(residual)):.3e}"
            if on_violation == "warn":
                warnings.warn(msg)
            else:
                raise ConstraintViolationError(msg)
    A, b, d = _multiplier_rhs(sys, q, p, strat)
    C = A @ d.H_pp @ A.T
    try:
        cf = scipy.linalg.cho_factor(0.5 * (C + C.T), check_finite=False)
    except scipy.linalg.LinAlgError as exc:
        raise RegularityError(f"multiplier matrix is singular: {exc}") from exc
    return scipy.linalg.cho_solve(cf, b, check_finite=False)


def xh_nh(
    sys: NonholonomicSystem,
    q: np.ndarray,
    p: np.ndarray,
    strat: DiffStrategy | None = None,
) -> tuple[np.ndarray, np.ndarray]:
    """The constrained Hamiltonian vector field:
    qdot = dH/dp,  pdot = -dH/dq + A^T lambda."""
    sys.check_domain(q)
    if sys.k == 0:
        d = hamiltonian_derivs(sys.mech, q, p, strat)
        return d.H_p, -d.H_q
    A, b, d = _multiplier_rhs(sys, q, p, strat)
    C = A @ d.H_pp @ A.T
    try:
        cf = scipy.linalg.cho_factor(0.5 * (C + C.T), check_finite=False)
    except scipy.linalg.LinAlgError as exc:
        raise RegularityError(f"multiplier matrix is singular: {exc}") from exc
    lam = scipy.linalg.cho_solve(cf, b, check_finite=False)
    return d.H_p, -d.H_q + A.T @ lam


def canonical_field(
    sys: MechanicalSystem,
    q: np.ndarray,
    p: np.ndarray,
    strat: DiffStrategy | None = None,
) -> tuple[np.ndarray, np.ndarray]:
    """Unconstrained Hamilton's equations for the same Hamiltonian
    (reference implementation for the k = 0 limit)."""
    d = hamiltonian_derivs(sys, q, p, strat)
    return d.H_p, -d.H_q
