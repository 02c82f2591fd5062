"""Verification and use of candidate one-forms q |-> gamma(q).

A candidate solves the constrained Hamilton-Jacobi problem when three
conditions hold: gamma(q) lies in the constrained momentum space at every
q, the exterior derivative d(gamma) vanishes on pairs of admissible
velocities, and H(q, gamma(q)) is one constant E.  When they do, the
first-order configuration-space flow qdot = g^{-1} gamma(q), lifted through
gamma, reproduces the full constrained phase-space flow; this module checks
the conditions on sampled points and measures that equivalence numerically.

All sampling-based checks certify behaviour at the sampled points only --
they are evidence, not a proof of the global statements.
"""

from __future__ import annotations

from dataclasses import dataclass, field as dataclass_field
from typing import Callable, Optional

import numpy as np

from .errors import EvaluationDomainError
from .geometry import (
    DiffStrategy,
    VectorField,
    bracket_generating_rank,
    d_oneform_pair,
    nullspace_basis,
)
from .integrate import IntegratorConfig, Trajectory, integrate_config, integrate_phase
from .mechanics import PhaseState, hamiltonian, legendre_inv
from .nonholo import (
    KernelSpec,
    NonholonomicSystem,
    constraint_residual,
    regularity_matrix,
)


@dataclass(frozen=True)
class OneFormCandidate:
    """Map q |-> covector gamma(q), optional analytic Jacobian
    J[i, j] = d gamma_i / d q_j, and the named constants it was built from."""

    gamma: Callable[[np.ndarray], np.ndarray]
    jacobian: Optional[Callable[[np.ndarray], np.ndarray]] = None
    params: dict = dataclass_field(default_factory=dict)
    kernel: Optional[KernelSpec] = None  # fast path for the reduced flow

    def __call__(self, q: np.ndarray) -> np.ndarray:
        out = np.asarray(self.gamma(q), dtype=float)
        if not np.all(np.isfinite(out)):
            raise EvaluationDomainError("one-form evaluated to a non-finite value")
        return out


@dataclass(frozen=True)
class CheckResult:
    name: str
    value: float
    tol: float

    @property
    def passed(self) -> bool:
        return bool(self.value <= self.tol)


@dataclass(frozen=True)
class Tolerances:
    membership: float = 1e-10
    dgamma: float = 1e-8
    energy_spread: float = 1e-8
    regularity_margin: float = 1e-10
    rank_tol: float = 1e-8


@dataclass
class VerificationReport:
    """Everything the condition and structure checks measured, with one
    verdict per condition.  Serializes to the JSON the CLI emits."""

    sample_points: np.ndarray
    m_residual_max: float
    dgamma_residual_max: float
    hj_energy_values: np.ndarray
    energy_spread: float
    bracket_rank: Optional[int] = None
    bracket_depth: Optional[int] = None
    bracket_full: Optional[bool] = None
    regularity_min_eig: Optional[float] = None
    verdicts: dict = dataclass_field(default_factory=dict)

    def conditions_passed(self) -> bool:
        names = ("membership", "dgamma", "hj_spread")
        return all(self.verdicts[n]["pass"] for n in names if n in self.verdicts)

    def structure_passed(self) -> bool:
        names = ("bracket_rank", "regularity")
        return all(self.verdicts[n]["pass"] for n in names if n in self.verdicts)

    def to_dict(self) -> dict:
        def clean(x):
            if isinstance(x, np.ndarray):
                return x.tolist()
            if isinstance(x, (np.floating, float)):
                return float(x)
            if isinstance(x, (np.integer, int)):
                return int(x)
            if isinstance(x, (np.bool_, bool)):
                return bool(x)
            return x

        return {
            "sample_points": self.sample_points.tolist(),
            "m_residual_max": clean(self.m_residual_max),
            "dgamma_residual_max": clean(self.dgamma_residual_max),
            "hj_energy_values": self.hj_energy_values.tolist(),
            "energy_spread": clean(self.energy_spread),
            "bracket_rank": clean(self.bracket_rank),
            "bracket_depth": clean(self.bracket_depth),
            "bracket_full": clean(self.bracket_full),
            "regularity_min_eig": clean(self.regularity_min_eig),
            "verdicts": {
                k: {kk: clean(vv) for kk, vv in v.items()}
                for k, v in self.verdicts.items()
            },
        }


def sample_box(box: np.ndarray, count: int, rng: np.random.Generator) -> np.ndarray:
    """Uniform samples from a per-coordinate box, rows are points."""
    box = np.asarray(box, dtype=float)
    u = rng.random((count, box.shape[0]))
    return box[:, 0] + u * (box[:, 1] - box[:, 0])


def verify_membership(
    sys: NonholonomicSystem,
    gamma: OneFormCandidate,
    points: np.ndarray,
    tol: float = 1e-10,
) -> CheckResult:
    """max over points of |A(q) g^{-1} gamma(q)|_inf."""
    worst = 0.0
    for q in np.atleast_2d(points):
        r = constraint_residual(sys, q, gamma(q))
        if r.size:
            worst = max(worst, float(np.max(np.abs(r))))
    return CheckResult("membership", worst, tol)


def verify_dgamma(
    sys: NonholonomicSystem,
    gamma: OneFormCandidate,
    points: np.ndarray,
    tol: float = 1e-8,
    strat: DiffStrategy | None = None,
    rank_tol: float = 1e-8,
) -> CheckResult:
    """max over points and admissible basis pairs (i < j) of
    |d(gamma)(v_i, v_j)|, the two-form obstruction the flow equivalence
    needs to vanish."""
    worst = 0.0
    for q in np.atleast_2d(points):
        basis = nullspace_basis(sys.dist.matrix(q), rank_tol)
        for i in range(basis.shape[0]):
            for j in range(i + 1, basis.shape[0]):
                val = d_oneform_pair(gamma, q, basis[i], basis[j], strat)
                worst = max(worst, abs(val))
    return CheckResult("dgamma", worst, tol)


def hj_residual(
    sys: NonholonomicSystem,
    gamma: OneFormCandidate,
    points: np.ndarray,
) -> tuple[float, float, np.ndarray]:
    """(E_est, spread, values): H(q, gamma(q)) at every point, the estimate
    taken from the first point, spread = max |H - E_est|."""
    points = np.atleast_2d(points)
    values = np.array([hamiltonian(sys.mech, q, gamma(q)) for q in points])
    E_est = float(values[0])
    spread = float(np.max(np.abs(values - E_est)))
    return E_est, spread, values


def reduced_field(sys: NonholonomicSystem, gamma: OneFormCandidate) -> VectorField:
    """The configuration-space flow q |-> g(q)^{-1} gamma(q)."""

    def eval_fn(q: np.ndarray) -> np.ndarray:
        return legendre_inv(sys.mech, q, gamma(q))

    return VectorField(eval=eval_fn, kernel=gamma.kernel)


def run_condition_checks(
    sys: NonholonomicSystem,
    gamma: OneFormCandidate,
    points: np.ndarray,
    tols: Tolerances = Tolerances(),
    strat: DiffStrategy | None = None,
    structure_points: int = 0,
    max_depth: int = 3,
) -> VerificationReport:
    """Run the three candidate conditions on the given points; optionally
    also the structural checks (bracket rank, multiplier-matrix SPD margin)
    on the first ``structure_points`` of them."""
    points = np.atleast_2d(np.asarray(points, dtype=float))
    membership = verify_membership(sys, gamma, points, tols.membership)
    dga = verify_dgamma(sys, gamma, points, tols.dgamma, strat, tols.rank_tol)
    E_est, spread, values = hj_residual(sys, gamma, points)
    report = VerificationReport(
        sample_points=points,
        m_residual_max=membership.value,
        dgamma_residual_max=dga.value,
        hj_energy_values=values,
        energy_spread=spread,
        verdicts={
            "membership": {"pass": membership.passed, "tol": tols.membership,
                           "value": membership.value},
            "dgamma": {"pass": dga.passed, "tol": tols.dgamma, "value": dga.value},
            "hj_spread": {"pass": spread <= tols.energy_spread,
                          "tol": tols.energy_spread, "value": spread,
                          "energy": E_est},
        },
    )
    if structure_points > 0:
        qs = points[:structure_points]
        add_structure_checks(sys, qs, report, tols, max_depth=max_depth,
                             gamma=gamma)
    return report


def add_structure_checks(
    sys: NonholonomicSystem,
    points: np.ndarray,
    report: VerificationReport,
    tols: Tolerances = Tolerances(),
    max_depth: int = 3,
    gamma: Optional[OneFormCandidate] = None,
) -> VerificationReport:
    """Bracket-generating rank and multiplier-matrix SPD margin at points."""
    n = sys.dim
    min_rank = n + 1
    max_depth_seen = 0
    min_eig = np.inf
    for q in np.atleast_2d(points):
        rank, depth = bracket_generating_rank(sys.dist, q, max_depth, tols.rank_tol)
        min_rank = min(min_rank, rank)
        max_depth_seen = max(max_depth_seen, depth)
        p = gamma(q) if gamma is not None else np.zeros(n)
        C = regularity_matrix(sys, q, p)
        if C.shape[0]:
            min_eig = min(min_eig, float(np.linalg.eigvalsh(C).min()))
    full = min_rank >= n
    report.bracket_rank = int(min_rank)
    report.bracket_depth = int(max_depth_seen)
    report.bracket_full = bool(full)
    report.regularity_min_eig = None if np.isinf(min_eig) else float(min_eig)
    report.verdicts["bracket_rank"] = {
        "pass": bool(full), "value": int(min_rank), "required": n,
        "depth": int(max_depth_seen),
    }
    reg_ok = bool(np.isinf(min_eig) or min_eig >= tols.regularity_margin)
    report.verdicts["regularity"] = {
        "pass": reg_ok, "value": report.regularity_min_eig,
        "tol": tols.regularity_margin,
    }
    return report


@dataclass
class EquivalenceResult:
    """Outcome of running the lifted reduced flow against the full flow."""

    max_gap: float
    times: np.ndarray
    gap: np.ndarray
    reduced: Trajectory
    lifted: np.ndarray
    full: Trajectory
    truncated: bool

    @property
    def termination(self) -> tuple[str, str]:
        return self.reduced.termination, self.full.termination


def theorem_equivalence_check(
    sys: NonholonomicSystem,
    gamma: OneFormCandidate,
    q0: np.ndarray,
    t_span,
    cfg: IntegratorConfig = IntegratorConfig(),
) -> EquivalenceResult:
    """Integrate the reduced flow from q0, lift it through gamma, and
    compare against the full constrained flow started at (q0, gamma(q0)).

    When the candidate satisfies all three conditions the two phase-space
    curves coincide up to integrator error; a candidate with non-constant
    H(q, gamma(q)) makes the gap grow.  Fixed-step RK4 only, so both runs
    share one time grid.
    """
    if cfg.method != "rk4":
        raise ValueError("equivalence check requires the rk4 method (shared time grid)")
    q0 = np.asarray(q0, dtype=float)
    p0 = gamma(q0)
    red = integrate_config(reduced_field(sys, gamma), q0, t_span, cfg)
    full = integrate_phase(sys, PhaseState(q0, p0), t_span, cfg, project=False)
    m = min(red.times.shape[0], full.times.shape[0])
    lifted = np.empty((m, 2 * sys.dim))
    for i in range(m):
        lifted[i, : sys.dim] = red.states[i]
        lifted[i, sys.dim :] = gamma(red.states[i])
    gap = np.max(np.abs(lifted - full.states[:m]), axis=1)
    truncated = red.termination != "completed" or full.termination != "completed"
    return EquivalenceResult(
        max_gap=float(gap.max()),
        times=red.times[:m],
        gap=gap,
        reduced=red,
        lifted=lifted,
        full=full,
        truncated=truncated,
    )
