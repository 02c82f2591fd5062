"""Kinetic-minus-potential mechanical systems on T*Q.

A system is a Riemannian metric g(q) (mass/inertia matrix) plus a potential
V(q); the Hamiltonian H = p^T g^{-1} p / 2 + V is always derived from the
pair, never entered directly, so the Legendre transform p = g v and its
inverse are exact duals by construction.  Metric inverses are recomputed by
dense symmetric factorization at every evaluation: n <= 5 everywhere this
package is used, so clarity wins over caching.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable, NamedTuple, Optional

import numpy as np
import scipy.linalg

from .errors import EvaluationDomainError, MetricDegeneracyError
from .geometry import DiffStrategy, jacobian

# Condition-number guard for metric factorizations.
_MAX_METRIC_COND = 1e12


@dataclass(frozen=True)
class MechanicalSystem:
    """Metric + potential with optional analytic first derivatives.

    metric(q) -> (n, n) SPD array, potential(q) -> float.
    metric_deriv(q) -> (n, n, n) with [j] = dg/dq_j.
    potential_grad(q) -> (n,).
    """

    dim: int
    metric: Callable[[np.ndarray], np.ndarray]
    potential: Callable[[np.ndarray], float]
    metric_deriv: Optional[Callable[[np.ndarray], np.ndarray]] = None
    potential_grad: Optional[Callable[[np.ndarray], np.ndarray]] = None
    params: dict = field(default_factory=dict)


@dataclass(frozen=True)
class PhaseState:
    """A point (q, p) of T*Q tagged with a time."""

    q: np.ndarray
    p: np.ndarray
    t: float = 0.0

    def __post_init__(self):
        object.__setattr__(self, "q", np.asarray(self.q, dtype=float))
        object.__setattr__(self, "p", np.asarray(self.p, dtype=float))
        if self.q.shape != self.p.shape:
            raise ValueError("q and p must have the same length")

    def as_array(self) -> np.ndarray:
        return np.concatenate([self.q, self.p])


class HamiltonianDerivs(NamedTuple):
    H_q: np.ndarray   # (n,)   dH/dq
    H_p: np.ndarray   # (n,)   dH/dp = g^{-1} p
    H_pp: np.ndarray  # (n, n) d2H/dp dp = g^{-1}
    H_pq: np.ndarray  # (n, n) [i, j] = d2H/dp_i dq_j


def metric_at(sys: MechanicalSystem, q: np.ndarray) -> np.ndarray:
    g = np.asarray(sys.metric(q), dtype=float)
    if not np.all(np.isfinite(g)):
        raise EvaluationDomainError("metric evaluated to non-finite entries")
    return g


def _factor(g: np.ndarray):
    try:
        c, low = scipy.linalg.cho_factor(g, check_finite=False)
    except scipy.linalg.LinAlgError as exc:
        raise MetricDegeneracyError(f"metric is not positive definite: {exc}") from exc
    d = np.abs(np.diag(c))
    if d.min() == 0.0 or (d.max() / d.min()) ** 2 > _MAX_METRIC_COND:
        raise MetricDegeneracyError("metric is too ill-conditioned to invert")
    return c, low


def metric_inv(sys: MechanicalSystem, q: np.ndarray) -> np.ndarray:
    g = metric_at(sys, q)
    c, low = _factor(g)
    ginv = scipy.linalg.cho_solve((c, low), np.eye(g.shape[0]), check_finite=False)
    return 0.5 * (ginv + ginv.T)  # re-symmetrize roundoff


def legendre(sys: MechanicalSystem, q: np.ndarray, v: np.ndarray) -> np.ndarray:
    """Momentum of the velocity v: p = g(q) v."""
    return metric_at(sys, q) @ np.asarray(v, dtype=float)


def legendre_inv(sys: MechanicalSystem, q: np.ndarray, p: np.ndarray) -> np.ndarray:
    """Velocity of the momentum p: v = g(q)^{-1} p."""
    c, low = _factor(metric_at(sys, q))
    return scipy.linalg.cho_solve((c, low), np.asarray(p, dtype=float), check_finite=False)


def hamiltonian(sys: MechanicalSystem, q: np.ndarray, p: np.ndarray) -> float:
    """H(q, p) = p^T g(q)^{-1} p / 2 + V(q)."""
    p = np.asarray(p, dtype=float)
    V = float(sys.potential(q))
    if not np.isfinite(V):
        raise EvaluationDomainError("potential evaluated to a non-finite value")
    return 0.5 * float(p @ legendre_inv(sys, q, p)) + V


def hamiltonian_derivs(
    sys: MechanicalSystem,
    q: np.ndarray,
    p: np.ndarray,
    strat: DiffStrategy | None = None,
) -> HamiltonianDerivs:
    """First derivatives of H plus the second derivatives the constrained
    flow needs (H_pp = g^{-1} and the mixed block H_pq).

    Analytic metric/potential derivatives are used when the system ships
    them (or when ``strat`` forces analytic mode); otherwise central FD.
    """
    q = np.asarray(q, dtype=float)
    p = np.asarray(p, dtype=float)
    n = sys.dim
    ginv = metric_inv(sys, q)
    v = ginv @ p

    use_analytic_g = sys.metric_deriv is not None and (strat is None or strat.mode == "analytic")
    use_analytic_V = sys.potential_grad is not None and (strat is None or strat.mode == "analytic")
    if strat is not None and strat.mode == "analytic":
        if sys.metric_deriv is None or sys.potential_grad is None:
            raise ValueError("analytic mode requested but derivative maps are missing")

    if use_analytic_g:
        dg = np.asarray(sys.metric_deriv(q), dtype=float)  # (n, n, n), [j] = dg/dq_j
        # d(g^{-1})/dq_j = -g^{-1} (dg/dq_j) g^{-1}
        H_pq = np.empty((n, n))
        H_q_kin = np.empty(n)
        for j in range(n):
            w = dg[j] @ v
            H_pq[:, j] = -ginv @ w
            H_q_kin[j] = -0.5 * float(v @ w)
    else:
        fd = strat if strat is not None and strat.mode == "fd" else DiffStrategy("fd")
        H_pq = jacobian(lambda qq: legendre_inv(sys, qq, p), q, fd)
        H_q_kin = 0.5 * jacobian(
            lambda qq: np.array([p @ legendre_inv(sys, qq, p)]), q, fd
        )[0]

    if use_analytic_V:
        V_q = np.asarray(sys.potential_grad(q), dtype=float)
    else:
        fd = strat if strat is not None and strat.mode == "fd" else DiffStrategy("fd")
        V_q = jacobian(lambda qq: np.array([float(sys.potential(qq))]), q, fd)[0]

    return HamiltonianDerivs(H_q=H_q_kin + V_q, H_p=v, H_pp=ginv, H_pq=H_pq)
