"""Pure-Python integration kernels and step loops.

Mirrors the compiled extension's interface exactly: a kernel exposes
``eval(t, z) -> zdot`` (raising EvaluationDomainError outside the model's
domain) plus, for phase-space kernels, ``energy(z)`` and ``residual(z)``.
Loops return (times list, states list, status code) with status
0 = completed, 1 = domain_exit, 2 = step_limit, 3 = non-finite state.
"""

from __future__ import annotations

import numpy as np

from ..errors import EvaluationDomainError
from ..mechanics import hamiltonian
from ..nonholo import constraint_residual, xh_nh

_TINY_REL = 1e-12

# Dormand-Prince 5(4): 7 stages, first-same-as-last, 5th-order propagation.
# Coefficients from the standard published tableau.
DP_C = np.array([0.0, 1 / 5, 3 / 10, 4 / 5, 8 / 9, 1.0, 1.0])
DP_A = [
    [],
    [1 / 5],
    [3 / 40, 9 / 40],
    [44 / 45, -56 / 15, 32 / 9],
    [19372 / 6561, -25360 / 2187, 64448 / 6561, -212 / 729],
    [9017 / 3168, -355 / 33, 46732 / 5247, 49 / 176, -5103 / 18656],
    [35 / 384, 0.0, 500 / 1113, 125 / 192, -2187 / 6784, 11 / 84],
]
DP_B5 = np.array([35 / 384, 0.0, 500 / 1113, 125 / 192, -2187 / 6784, 11 / 84, 0.0])
DP_B4 = np.array(
    [5179 / 57600, 0.0, 7571 / 16695, 393 / 640, -92097 / 339200, 187 / 2100, 1 / 40]
)
DP_E = DP_B5 - DP_B4


class PyPhaseKernel:
    """Constrained-flow right-hand side built from the generic machinery."""

    is_compiled = False

    def __init__(self, sys, strat=None):
        self.sys = sys
        self.strat = strat
        self.n = sys.dim
        self.k = sys.k

    def eval(self, t, z):
        n = self.n
        qdot, pdot = xh_nh(self.sys, z[:n], z[n:], self.strat)
        return np.concatenate([qdot, pdot])

    def energy(self, z):
        return hamiltonian(self.sys.mech, z[: self.n], z[self.n :])

    def residual(self, z):
        return constraint_residual(self.sys, z[: self.n], z[self.n :])


class PyReducedKernel:
    """Configuration-space field wrapper."""

    is_compiled = False

    def __init__(self, fld):
        self.fld = fld

    def eval(self, t, q):
        out = np.asarray(self.fld.eval(q), dtype=float)
        if not np.all(np.isfinite(out)):
            raise EvaluationDomainError("field evaluated to a non-finite value")
        return out


def run_rk4(kern, z0, t0, t1, h, record_stride, max_steps):
    z = np.asarray(z0, dtype=float).copy()
    times = [t0]
    states = [z.copy()]
    total = t1 - t0
    if total == 0.0:
        return times, states, 0
    tiny = _TINY_REL * max(1.0, abs(t1))
    n_full = int(np.floor(total / h + 1e-12))
    rem = total - n_full * h
    plan_n = n_full + (1 if rem > tiny else 0)
    code = 0
    t_cur = t0
    for i in range(plan_n):
        if i >= max_steps:
            code = 2
            break
        t = t0 + i * h
        hs = h if i < n_full else rem
        try:
            k1 = kern.eval(t, z)
            k2 = kern.eval(t + 0.5 * hs, z + (0.5 * hs) * k1)
            k3 = kern.eval(t + 0.5 * hs, z + (0.5 * hs) * k2)
            k4 = kern.eval(t + hs, z + hs * k3)
        except EvaluationDomainError:
            code = 1
            break
        z_new = z + (hs / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4)
        if not np.all(np.isfinite(z_new)):
            code = 3
            break
        z = z_new
        t_cur = t1 if i == plan_n - 1 else t0 + (i + 1) * h
        if (i + 1) % record_stride == 0 or i == plan_n - 1:
            times.append(t_cur)
            states.append(z.copy())
    if times[-1] != t_cur:
        times.append(t_cur)
        states.append(z.copy())
    return times, states, code


def run_dopri45(kern, z0, t0, t1, rel_tol, abs_tol, h0, record_stride, max_steps):
    from ..integrate import adaptive_step_control  # local import to avoid a cycle

    z = np.asarray(z0, dtype=float).copy()
    times = [t0]
    states = [z.copy()]
    if t1 == t0:
        return times, states, 0
    tiny = _TINY_REL * max(1.0, abs(t1))
    h = min(h0, t1 - t0)
    code = 0
    t = t0
    nsteps = 0
    accepted = 0
    K = [None] * 7
    try:
        K[0] = kern.eval(t, z)
    except EvaluationDomainError:
        return times, states, 1
    while t1 - t > tiny:
        if nsteps >= max_steps:
            code = 2
            break
        h = min(h, t1 - t)
        clipped = h >= (t1 - t) - tiny
        nsteps += 1
        try:
            for s in range(1, 7):
                zs = z + h * sum(DP_A[s][j] * K[j] for j in range(s))
                K[s] = kern.eval(t + DP_C[s] * h, zs)
        except EvaluationDomainError:
            h *= 0.2
            if h < tiny:
                code = 1
                break
            continue
        z5 = zs  # 7th stage point is the 5th-order solution (FSAL row)
        err = float(h) * float(np.max(np.abs(sum(DP_E[j] * K[j] for j in range(7)))))
        tol = max(rel_tol * float(np.max(np.abs(z))), abs_tol)
        if np.isfinite(err) and err <= tol:
            t = t1 if clipped else t + h
            z = z5
            K[0] = K[6]
            accepted += 1
            if accepted % record_stride == 0 or t1 - t <= tiny:
                times.append(t)
                states.append(z.copy())
        h = adaptive_step_control(err if np.isfinite(err) else np.inf, tol, h)
        if h < tiny:
            code = 2
            break
    if times[-1] != t:
        times.append(t)
        states.append(z.copy())
    return times, states, code
