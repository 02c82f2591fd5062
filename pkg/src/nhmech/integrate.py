"""ODE driving with monitor channels.

Two methods: classic fixed-step RK4 (last step clipped so the requested
end time is hit exactly) and an adaptive embedded Dormand-Prince 5(4) pair
(7 stages, FSAL, 5th-order solution propagated).  Trajectories record the
state every ``record_stride``-th step plus the final state, and phase-space
runs carry energy and per-constraint residual channels so that drift is
visible; nothing is ever projected or re-stabilized mid-run.

Integration loops run either on the compiled kernel extension (when the
system ships a registered kernel) or on a pure-Python fallback; results
agree to roundoff and the backend can be forced via IntegratorConfig.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from . import _kernels
from .errors import IntegrationError
from .geometry import DiffStrategy, VectorField
from .mechanics import PhaseState
from .nonholo import NonholonomicSystem, project_momentum

TERMINATION = {0: "completed", 1: "domain_exit", 2: "step_limit", 3: "nonfinite"}


@dataclass(frozen=True)
class IntegratorConfig:
    method: str = "rk4"  # "rk4" | "adaptive45"
    h: float = 1e-3      # rk4 step size; initial step for adaptive45
    rel_tol: float = 1e-10
    abs_tol: float = 1e-12
    max_steps: int = 10_000_000
    record_stride: int = 1
    backend: str = "auto"  # "auto" | "python" | "compiled"

    def __post_init__(self):
        if self.method not in ("rk4", "adaptive45"):
            raise ValueError(f"unknown method {self.method!r}")
        if not (self.h > 0 and self.rel_tol > 0 and self.abs_tol > 0):
            raise ValueError("step size and tolerances must be positive")
        if self.max_steps <= 0 or self.record_stride <= 0:
            raise ValueError("max_steps and record_stride must be positive")
        if self.backend not in ("auto", "python", "compiled"):
            raise ValueError(f"unknown backend {self.backend!r}")


@dataclass
class Trajectory:
    """Recorded integration output.

    ``states`` rows are (q, p) for phase-space runs or bare q for
    configuration-space runs; ``n_q`` is the coordinate count either way.
    """

    times: np.ndarray
    states: np.ndarray
    n_q: int
    monitors: dict = field(default_factory=dict)
    termination: str = "completed"

    @property
    def qs(self) -> np.ndarray:
        return self.states[:, : self.n_q]

    @property
    def ps(self) -> np.ndarray:
        return self.states[:, self.n_q :]

    @property
    def final_state(self) -> np.ndarray:
        return self.states[-1]


def adaptive_step_control(err_est: float, tol: float, h: float) -> float:
    """Standard elementary step controller for the embedded 4/5 pair."""
    if err_est == 0.0:
        return 5.0 * h
    return h * min(5.0, max(0.2, 0.9 * (tol / err_est) ** 0.2))


def _run(kern, z0: np.ndarray, t_span, cfg: IntegratorConfig):
    t0, t1 = float(t_span[0]), float(t_span[1])
    if t1 < t0:
        raise ValueError("t_span must be non-decreasing")
    if cfg.method == "rk4":
        times, states, code = _kernels.run_rk4(
            kern, z0, t0, t1, cfg.h, cfg.record_stride, cfg.max_steps
        )
    else:
        times, states, code = _kernels.run_dopri45(
            kern, z0, t0, t1, cfg.rel_tol, cfg.abs_tol, cfg.h,
            cfg.record_stride, cfg.max_steps,
        )
    if code == 3:
        raise IntegrationError(
            f"state became non-finite near t = {times[-1]:.6g}; "
            f"last finite state {states[-1]}"
        )
    return np.asarray(times), np.asarray(states), TERMINATION[code]


def _phase_kernel(sys: NonholonomicSystem, cfg: IntegratorConfig,
                  strat: DiffStrategy | None):
    if cfg.backend in ("auto", "compiled") and sys.kernel is not None:
        kern = _kernels.make_compiled_phase(sys.kernel)
        if kern is not None:
            return kern
    if cfg.backend == "compiled":
        raise ValueError("compiled backend requested but no compiled kernel is available")
    return _kernels.PyPhaseKernel(sys, strat)


def _config_kernel(fld: VectorField, cfg: IntegratorConfig):
    spec = getattr(fld, "kernel", None)
    if cfg.backend in ("auto", "compiled") and spec is not None:
        kern = _kernels.make_compiled_reduced(spec)
        if kern is not None:
            return kern
    if cfg.backend == "compiled":
        raise ValueError("compiled backend requested but no compiled kernel is available")
    return _kernels.PyReducedKernel(fld)


def integrate_phase(
    sys: NonholonomicSystem,
    z0: PhaseState,
    t_span,
    cfg: IntegratorConfig = IntegratorConfig(),
    strat: DiffStrategy | None = None,
    project: bool = True,
) -> Trajectory:
    """Integrate the constrained Hamiltonian flow from z0 over t_span.

    The initial momentum is projected onto the constrained momentum space
    (once; drift afterwards is monitored, never corrected).  Monitors:
    ``energy`` and ``c_res_1`` .. ``c_res_k`` at every recorded time.
    """
    q0 = np.asarray(z0.q, dtype=float)
    p0 = project_momentum(sys, q0, z0.p) if project else np.asarray(z0.p, dtype=float)
    kern = _phase_kernel(sys, cfg, strat)
    times, states, term = _run(kern, np.concatenate([q0, p0]), t_span, cfg)
    monitors = {"energy": np.array([kern.energy(z) for z in states])}
    res = np.array([kern.residual(z) for z in states])
    for s in range(sys.k):
        monitors[f"c_res_{s + 1}"] = res[:, s]
    return Trajectory(times=times, states=states, n_q=sys.dim,
                      monitors=monitors, termination=term)


def integrate_config(
    fld: VectorField,
    q0: np.ndarray,
    t_span,
    cfg: IntegratorConfig = IntegratorConfig(),
) -> Trajectory:
    """Integrate a first-order field on configuration space."""
    q0 = np.asarray(q0, dtype=float)
    kern = _config_kernel(fld, cfg)
    times, states, term = _run(kern, q0.copy(), t_span, cfg)
    return Trajectory(times=times, states=states, n_q=q0.shape[0], termination=term)
