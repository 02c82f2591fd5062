# cython: boundscheck=False, wraparound=False, cdivision=True
"""Compiled right-hand sides for the shipped example systems plus the RK4
and Dormand-Prince 5(4) stepping loops.

Same interface and status codes as ``py_fallback``; every formula here is
cross-checked against the generic pure-Python machinery by the test suite.
"""

from libc.math cimport sin, cos, sqrt, fabs, floor, isfinite

import numpy as np

from nhmech.errors import EvaluationDomainError

cdef enum:
    MAXD = 16  # largest state vector a kernel may advance (phase dim 2n)

# Wheel-angle guard for the snakeboard constraint matrix (cot(phi) blows up).
cdef double SIN_GUARD = 1e-3


cdef class Kernel:
    """Base right-hand side: subclasses fill c_eval; n is the state size."""

    cdef public int n
    cdef readonly bint is_compiled

    def __cinit__(self, *args, **kwargs):
        self.is_compiled = True

    cdef int c_eval(self, double t, double* z, double* out) noexcept nogil:
        return 1

    def eval(self, double t, z):
        """Python-visible evaluation (used by tests and cross-validation)."""
        cdef double zi[MAXD]
        cdef double out[MAXD]
        cdef int i
        buf = np.ascontiguousarray(z, dtype=np.float64)
        cdef double[:] zv = buf
        for i in range(self.n):
            zi[i] = zv[i]
        if self.c_eval(t, zi, out) != 0:
            raise EvaluationDomainError("compiled kernel evaluated outside its domain")
        res = np.empty(self.n)
        cdef double[:] rv = res
        for i in range(self.n):
            rv[i] = out[i]
        return res


cdef class PhaseKernel(Kernel):
    """Adds the monitor channels phase-space trajectories carry."""

    cdef public int n_q
    cdef public int k

    cdef double c_energy(self, double* z) noexcept nogil:
        return 0.0

    cdef void c_residual(self, double* z, double* out) noexcept nogil:
        pass

    def energy(self, z):
        cdef double zi[MAXD]
        cdef int i
        buf = np.ascontiguousarray(z, dtype=np.float64)
        cdef double[:] zv = buf
        for i in range(self.n):
            zi[i] = zv[i]
        return self.c_energy(zi)

    def residual(self, z):
        cdef double zi[MAXD]
        cdef double out[MAXD]
        cdef int i
        buf = np.ascontiguousarray(z, dtype=np.float64)
        cdef double[:] zv = buf
        for i in range(self.n):
            zi[i] = zv[i]
        self.c_residual(zi, out)
        res = np.empty(self.k)
        cdef double[:] rv = res
        for i in range(self.k):
            rv[i] = out[i]
        return res


# ---------------------------------------------------------------------------
# vertical rolling disk: coords (x, y, phi, psi), metric diag(m, m, J, I),
# constraints dx = R cos(phi) dpsi, dy = R sin(phi) dpsi
# ---------------------------------------------------------------------------

cdef class DiskPhase(PhaseKernel):
    cdef double m, Imom, J, R

    def __init__(self, double m, double I, double J, double R):
        self.m = m; self.Imom = I; self.J = J; self.R = R
        self.n = 8; self.n_q = 4; self.k = 2

    cdef int c_eval(self, double t, double* z, double* out) noexcept nogil:
        cdef double c = cos(z[2]), s = sin(z[2])
        cdef double vx = z[4] / self.m, vy = z[5] / self.m
        cdef double vphi = z[6] / self.J, vpsi = z[7] / self.Imom
        cdef double R = self.R
        cdef double b1 = -R * s * vpsi * vphi
        cdef double b2 = R * c * vpsi * vphi
        cdef double C11 = 1.0 / self.m + R * R * c * c / self.Imom
        cdef double C12 = R * R * s * c / self.Imom
        cdef double C22 = 1.0 / self.m + R * R * s * s / self.Imom
        cdef double det = C11 * C22 - C12 * C12
        cdef double lam1 = (C22 * b1 - C12 * b2) / det
        cdef double lam2 = (C11 * b2 - C12 * b1) / det
        out[0] = vx; out[1] = vy; out[2] = vphi; out[3] = vpsi
        out[4] = lam1; out[5] = lam2; out[6] = 0.0
        out[7] = -R * c * lam1 - R * s * lam2
        return 0

    cdef double c_energy(self, double* z) noexcept nogil:
        return 0.5 * ((z[4] * z[4] + z[5] * z[5]) / self.m
                      + z[6] * z[6] / self.J + z[7] * z[7] / self.Imom)

    cdef void c_residual(self, double* z, double* out) noexcept nogil:
        cdef double vpsi = z[7] / self.Imom
        out[0] = z[4] / self.m - self.R * cos(z[2]) * vpsi
        out[1] = z[5] / self.m - self.R * sin(z[2]) * vpsi


cdef class DiskReduced(Kernel):
    cdef double m, Imom, J, R, gphi0, gpsi0

    def __init__(self, double m, double I, double J, double R,
                 double gphi0, double gpsi0):
        self.m = m; self.Imom = I; self.J = J; self.R = R
        self.gphi0 = gphi0; self.gpsi0 = gpsi0
        self.n = 4

    cdef int c_eval(self, double t, double* z, double* out) noexcept nogil:
        out[0] = self.gpsi0 * self.R * cos(z[2]) / self.Imom
        out[1] = self.gpsi0 * self.R * sin(z[2]) / self.Imom
        out[2] = self.gphi0 / self.J
        out[3] = self.gpsi0 / self.Imom
        return 0


# ---------------------------------------------------------------------------
# knife edge on an inclined plane: coords (x, y, phi), metric diag(m, m, J),
# V = -m g sin(alpha) x, constraint sin(phi) dx = cos(phi) dy
# ---------------------------------------------------------------------------

cdef class KnifePhase(PhaseKernel):
    cdef double m, J, grav, sa

    def __init__(self, double m, double J, double grav, double alpha):
        self.m = m; self.J = J; self.grav = grav; self.sa = sin(alpha)
        self.n = 6; self.n_q = 3; self.k = 1

    cdef int c_eval(self, double t, double* z, double* out) noexcept nogil:
        cdef double s = sin(z[2]), c = cos(z[2])
        cdef double vx = z[3] / self.m, vy = z[4] / self.m, vphi = z[5] / self.J
        cdef double b = -self.grav * self.sa * s - (c * vx + s * vy) * vphi
        cdef double lam = self.m * b
        out[0] = vx; out[1] = vy; out[2] = vphi
        out[3] = self.m * self.grav * self.sa + lam * s
        out[4] = -lam * c
        out[5] = 0.0
        return 0

    cdef double c_energy(self, double* z) noexcept nogil:
        return (0.5 * ((z[3] * z[3] + z[4] * z[4]) / self.m + z[5] * z[5] / self.J)
                - self.m * self.grav * self.sa * z[0])

    cdef void c_residual(self, double* z, double* out) noexcept nogil:
        out[0] = (sin(z[2]) * z[3] - cos(z[2]) * z[4]) / self.m


cdef class KnifeReduced(Kernel):
    cdef double m, J, grav, sa, gphi0, E, branch

    def __init__(self, double m, double J, double grav, double alpha,
                 double gphi0, double E, double branch):
        self.m = m; self.J = J; self.grav = grav; self.sa = sin(alpha)
        self.gphi0 = gphi0; self.E = E; self.branch = branch
        self.n = 3

    cdef int c_eval(self, double t, double* z, double* out) noexcept nogil:
        cdef double arg = (self.m * (2.0 * self.E - self.gphi0 * self.gphi0 / self.J)
                           + 2.0 * self.m * self.m * self.grav * self.sa * z[0])
        if arg < 0.0:
            return 1
        cdef double f = self.branch * sqrt(arg)
        out[0] = f * cos(z[2]) / self.m
        out[1] = f * sin(z[2]) / self.m
        out[2] = self.gphi0 / self.J
        return 0


# ---------------------------------------------------------------------------
# snakeboard: coords (x, y, theta, psi, phi); constant block metric
# diag(m, m, [[m r^2, J0], [J0, J0]], 2 J1); constraints
# dx + r cot(phi) cos(theta) dtheta = 0, dy + r cot(phi) sin(theta) dtheta = 0
# ---------------------------------------------------------------------------

cdef class BoardPhase(PhaseKernel):
    cdef double m, r, J0, J1, K

    def __init__(self, double m, double r, double J0, double J1):
        self.m = m; self.r = r; self.J0 = J0; self.J1 = J1
        self.K = m * r * r - J0
        self.n = 10; self.n_q = 5; self.k = 2

    cdef int c_eval(self, double t, double* z, double* out) noexcept nogil:
        cdef double sphi = sin(z[4])
        if fabs(sphi) < SIN_GUARD:
            return 1
        cdef double ct = cos(z[4]) / sphi
        cdef double s2 = sphi * sphi
        cdef double cth = cos(z[2]), sth = sin(z[2])
        cdef double vx = z[5] / self.m, vy = z[6] / self.m
        cdef double vth = (z[7] - z[8]) / self.K
        cdef double vpsi = z[8] / self.J0 - vth
        cdef double vphi = z[9] / (2.0 * self.J1)
        cdef double r = self.r
        cdef double a13 = r * ct * cth, a23 = r * ct * sth
        cdef double b1 = r * ct * sth * vth * vth + (r * cth / s2) * vth * vphi
        cdef double b2 = -r * ct * cth * vth * vth + (r * sth / s2) * vth * vphi
        cdef double C11 = 1.0 / self.m + a13 * a13 / self.K
        cdef double C12 = a13 * a23 / self.K
        cdef double C22 = 1.0 / self.m + a23 * a23 / self.K
        cdef double det = C11 * C22 - C12 * C12
        cdef double lam1 = (C22 * b1 - C12 * b2) / det
        cdef double lam2 = (C11 * b2 - C12 * b1) / det
        out[0] = vx; out[1] = vy; out[2] = vth; out[3] = vpsi; out[4] = vphi
        out[5] = lam1; out[6] = lam2
        out[7] = a13 * lam1 + a23 * lam2
        out[8] = 0.0; out[9] = 0.0
        return 0

    cdef double c_energy(self, double* z) noexcept nogil:
        cdef double dth = z[7] - z[8]
        return 0.5 * ((z[5] * z[5] + z[6] * z[6]) / self.m
                      + z[8] * z[8] / self.J0
                      + dth * dth / self.K
                      + z[9] * z[9] / (2.0 * self.J1))

    cdef void c_residual(self, double* z, double* out) noexcept nogil:
        cdef double sphi = sin(z[4])
        cdef double ct = cos(z[4]) / sphi
        cdef double vth = (z[7] - z[8]) / self.K
        out[0] = z[5] / self.m + self.r * ct * cos(z[2]) * vth
        out[1] = z[6] / self.m + self.r * ct * sin(z[2]) * vth


cdef class BoardReduced(Kernel):
    cdef double m, r, J0, J1, gpsi0, gphi0, C

    def __init__(self, double m, double r, double J0, double J1,
                 double gpsi0, double gphi0, double E):
        cdef double Cc = E - gpsi0 * gpsi0 / (2.0 * J0) - gphi0 * gphi0 / (4.0 * J1)
        if Cc < 0.0:
            raise EvaluationDomainError(
                "HJ constant is negative for these snakeboard gamma parameters")
        self.m = m; self.r = r; self.J0 = J0; self.J1 = J1
        self.gpsi0 = gpsi0; self.gphi0 = gphi0
        self.C = sqrt(Cc)
        self.n = 5

    cdef int c_eval(self, double t, double* z, double* out) noexcept nogil:
        cdef double sphi = sin(z[4]), cphi = cos(z[4])
        cdef double cth = cos(z[2]), sth = sin(z[2])
        cdef double gph = sqrt((self.m * self.r * self.r - self.J0 * sphi * sphi) / 2.0)
        cdef double w = self.C * sphi / gph
        out[0] = -self.C * self.r * cth * cphi / gph
        out[1] = -self.C * self.r * sth * cphi / gph
        out[2] = w
        out[3] = self.gpsi0 / self.J0 - w
        out[4] = self.gphi0 / (2.0 * self.J1)
        return 0


# ---------------------------------------------------------------------------
# Chaplygin sleigh: coords (x, y, theta); metric
# [[M, 0, -M a sin], [0, M, M a cos], [-M a sin, M a cos, J + M a^2]];
# constraint sin(theta) dx = cos(theta) dy
# ---------------------------------------------------------------------------

cdef class SleighPhase(PhaseKernel):
    cdef double M, J, a

    def __init__(self, double M, double J, double a):
        self.M = M; self.J = J; self.a = a
        self.n = 6; self.n_q = 3; self.k = 1

    cdef int c_eval(self, double t, double* z, double* out) noexcept nogil:
        cdef double s = sin(z[2]), c = cos(z[2])
        cdef double px = z[3], py = z[4], pth = z[5]
        cdef double M = self.M, J = self.J, a = self.a
        cdef double g11 = (M * a * a * s * s + J) / (J * M)
        cdef double g12 = -a * a * s * c / J
        cdef double g13 = a * s / J
        cdef double g22 = (M * a * a * c * c + J) / (J * M)
        cdef double g23 = -a * c / J
        cdef double g33 = 1.0 / J
        cdef double vx = g11 * px + g12 * py + g13 * pth
        cdef double vy = g12 * px + g22 * py + g23 * pth
        cdef double vth = g13 * px + g23 * py + g33 * pth
        cdef double Hth = (a / J) * (a * s * c * (px * px - py * py)
                                     - a * (c * c - s * s) * px * py
                                     + c * px * pth + s * py * pth)
        cdef double w0 = (a / J) * (2.0 * a * s * c * px - a * (c * c - s * s) * py + c * pth)
        cdef double w1 = (a / J) * (-a * (c * c - s * s) * px - 2.0 * a * s * c * py + s * pth)
        cdef double b = (a / J) * Hth - vth * (c * vx + s * vy) - vth * (s * w0 - c * w1)
        cdef double lam = b * (J * M) / (J + a * a * M)
        out[0] = vx; out[1] = vy; out[2] = vth
        out[3] = lam * s
        out[4] = -lam * c
        out[5] = -Hth
        return 0

    cdef double c_energy(self, double* z) noexcept nogil:
        cdef double s = sin(z[2]), c = cos(z[2])
        cdef double px = z[3], py = z[4], pth = z[5]
        cdef double M = self.M, J = self.J, a = self.a
        cdef double vx = ((M * a * a * s * s + J) / (J * M)) * px \
            - (a * a * s * c / J) * py + (a * s / J) * pth
        cdef double vy = -(a * a * s * c / J) * px \
            + ((M * a * a * c * c + J) / (J * M)) * py - (a * c / J) * pth
        cdef double vth = (a * s / J) * px - (a * c / J) * py + pth / J
        return 0.5 * (px * vx + py * vy + pth * vth)

    cdef void c_residual(self, double* z, double* out) noexcept nogil:
        cdef double s = sin(z[2]), c = cos(z[2])
        cdef double coef = (self.J + self.a * self.a * self.M) / (self.J * self.M)
        out[0] = coef * (s * z[3] - c * z[4]) + (self.a / self.J) * z[5]


cdef class SleighReduced(Kernel):
    cdef double a, omega, bc, ucoef

    def __init__(self, double M, double J, double a, double omega):
        self.a = a; self.omega = omega
        self.bc = sqrt(a * a * M / (J + a * a * M))
        self.ucoef = a * omega / self.bc
        self.n = 3

    cdef int c_eval(self, double t, double* z, double* out) noexcept nogil:
        cdef double u = self.ucoef * sin(self.bc * z[2])
        cdef double td = self.omega * cos(self.bc * z[2])
        out[0] = u * cos(z[2])
        out[1] = u * sin(z[2])
        out[2] = td
        return 0


_PHASE = {
    "vertical_rolling_disk": DiskPhase,
    "knife_edge": KnifePhase,
    "snakeboard": BoardPhase,
    "chaplygin_sleigh": SleighPhase,
}

_REDUCED = {
    "vertical_rolling_disk": DiskReduced,
    "knife_edge": KnifeReduced,
    "snakeboard": BoardReduced,
    "chaplygin_sleigh": SleighReduced,
}


def make_phase_kernel(name, params):
    cls = _PHASE.get(name)
    return None if cls is None else cls(*params)


def make_reduced_kernel(name, params):
    cls = _REDUCED.get(name)
    return None if cls is None else cls(*params)


# ---------------------------------------------------------------------------
# stepping loops
# ---------------------------------------------------------------------------

cdef object _snapshot(double* z, int d):
    out = np.empty(d)
    cdef double[:] ov = out
    cdef int i
    for i in range(d):
        ov[i] = z[i]
    return out


def run_rk4(Kernel kern, z0, double t0, double t1, double h,
            long record_stride, long max_steps):
    cdef int d = kern.n
    cdef double z[MAXD]
    cdef double znew[MAXD]
    cdef double stage[MAXD]
    cdef double k1[MAXD]
    cdef double k2[MAXD]
    cdef double k3[MAXD]
    cdef double k4[MAXD]
    cdef int j, st, ok
    cdef long i
    buf = np.ascontiguousarray(z0, dtype=np.float64)
    cdef double[:] zv = buf
    for j in range(d):
        z[j] = zv[j]
    times = [t0]
    states = [_snapshot(z, d)]
    cdef double total = t1 - t0
    if total == 0.0:
        return times, states, 0
    cdef double tiny = 1e-12 * max(1.0, fabs(t1))
    cdef long n_full = <long>floor(total / h + 1e-12)
    cdef double rem = total - n_full * h
    cdef long plan_n = n_full + (1 if rem > tiny else 0)
    cdef int code = 0
    cdef double t_cur = t0, t, hs
    cdef double last_rec = t0
    for i in range(plan_n):
        if i >= max_steps:
            code = 2
            break
        t = t0 + i * h
        hs = h if i < n_full else rem
        st = kern.c_eval(t, z, k1)
        if st == 0:
            for j in range(d):
                stage[j] = z[j] + 0.5 * hs * k1[j]
            st = kern.c_eval(t + 0.5 * hs, stage, k2)
        if st == 0:
            for j in range(d):
                stage[j] = z[j] + 0.5 * hs * k2[j]
            st = kern.c_eval(t + 0.5 * hs, stage, k3)
        if st == 0:
            for j in range(d):
                stage[j] = z[j] + hs * k3[j]
            st = kern.c_eval(t + hs, stage, k4)
        if st != 0:
            code = 1
            break
        ok = 1
        for j in range(d):
            znew[j] = z[j] + (hs / 6.0) * (k1[j] + 2.0 * k2[j] + 2.0 * k3[j] + k4[j])
            if not isfinite(znew[j]):
                ok = 0
        if not ok:
            code = 3
            break
        for j in range(d):
            z[j] = znew[j]
        t_cur = t1 if i == plan_n - 1 else t0 + (i + 1) * h
        if (i + 1) % record_stride == 0 or i == plan_n - 1:
            times.append(t_cur)
            states.append(_snapshot(z, d))
            last_rec = t_cur
    if last_rec != t_cur:
        times.append(t_cur)
        states.append(_snapshot(z, d))
    return times, states, code


# Dormand-Prince 5(4) tableau (same constants as py_fallback).
cdef double DPC[7]
cdef double DPA[7][6]
cdef double DPE[7]


cdef void _init_tableau() noexcept:
    cdef int i, j
    for i in range(7):
        for j in range(6):
            DPA[i][j] = 0.0
    DPC[0] = 0.0; DPC[1] = 1.0 / 5.0; DPC[2] = 3.0 / 10.0; DPC[3] = 4.0 / 5.0
    DPC[4] = 8.0 / 9.0; DPC[5] = 1.0; DPC[6] = 1.0
    DPA[1][0] = 1.0 / 5.0
    DPA[2][0] = 3.0 / 40.0; DPA[2][1] = 9.0 / 40.0
    DPA[3][0] = 44.0 / 45.0; DPA[3][1] = -56.0 / 15.0; DPA[3][2] = 32.0 / 9.0
    DPA[4][0] = 19372.0 / 6561.0; DPA[4][1] = -25360.0 / 2187.0
    DPA[4][2] = 64448.0 / 6561.0; DPA[4][3] = -212.0 / 729.0
    DPA[5][0] = 9017.0 / 3168.0; DPA[5][1] = -355.0 / 33.0
    DPA[5][2] = 46732.0 / 5247.0; DPA[5][3] = 49.0 / 176.0
    DPA[5][4] = -5103.0 / 18656.0
    DPA[6][0] = 35.0 / 384.0; DPA[6][1] = 0.0; DPA[6][2] = 500.0 / 1113.0
    DPA[6][3] = 125.0 / 192.0; DPA[6][4] = -2187.0 / 6784.0; DPA[6][5] = 11.0 / 84.0
    DPE[0] = 35.0 / 384.0 - 5179.0 / 57600.0
    DPE[1] = 0.0
    DPE[2] = 500.0 / 1113.0 - 7571.0 / 16695.0
    DPE[3] = 125.0 / 192.0 - 393.0 / 640.0
    DPE[4] = -2187.0 / 6784.0 + 92097.0 / 339200.0
    DPE[5] = 11.0 / 84.0 - 187.0 / 2100.0
    DPE[6] = -1.0 / 40.0


_init_tableau()


def run_dopri45(Kernel kern, z0, double t0, double t1, double rel_tol,
                double abs_tol, double h0, long record_stride, long max_steps):
    cdef int d = kern.n
    cdef double z[MAXD]
    cdef double zs[MAXD]
    cdef double K[7][MAXD]
    cdef double acc, err, tol, zmax, e, grow
    cdef int j, s, q, st, finite_err
    cdef long nsteps = 0, accepted = 0
    buf = np.ascontiguousarray(z0, dtype=np.float64)
    cdef double[:] zv = buf
    for j in range(d):
        z[j] = zv[j]
    times = [t0]
    states = [_snapshot(z, d)]
    if t1 == t0:
        return times, states, 0
    cdef double tiny = 1e-12 * max(1.0, fabs(t1))
    cdef double h = min(h0, t1 - t0)
    cdef double t = t0
    cdef double last_rec = t0
    cdef int code = 0
    cdef bint clipped
    if kern.c_eval(t, z, &K[0][0]) != 0:
        return times, states, 1
    while t1 - t > tiny:
        if nsteps >= max_steps:
            code = 2
            break
        if h > t1 - t:
            h = t1 - t
        clipped = h >= (t1 - t) - tiny
        nsteps += 1
        st = 0
        for s in range(1, 7):
            for j in range(d):
                acc = 0.0
                for q in range(s):
                    acc += DPA[s][q] * K[q][j]
                zs[j] = z[j] + h * acc
            st = kern.c_eval(t + DPC[s] * h, zs, &K[s][0])
            if st != 0:
                break
        if st != 0:
            h *= 0.2
            if h < tiny:
                code = 1
                break
            continue
        # zs now holds the 5th-order solution (stage 7 sits on it, FSAL)
        err = 0.0
        zmax = 0.0
        finite_err = 1
        for j in range(d):
            acc = 0.0
            for q in range(7):
                acc += DPE[q] * K[q][j]
            e = fabs(h * acc)
            if not isfinite(e):
                finite_err = 0
                break
            if e > err:
                err = e
            if fabs(z[j]) > zmax:
                zmax = fabs(z[j])
        tol = rel_tol * zmax
        if tol < abs_tol:
            tol = abs_tol
        if finite_err and err <= tol:
            t = t1 if clipped else t + h
            for j in range(d):
                z[j] = zs[j]
                K[0][j] = K[6][j]
            accepted += 1
            if accepted % record_stride == 0 or t1 - t <= tiny:
                times.append(t)
                states.append(_snapshot(z, d))
                last_rec = t
        # elementary controller, clamped to [0.2, 5]
        if not finite_err:
            grow = 0.2
        elif err == 0.0:
            grow = 5.0
        else:
            grow = 0.9 * (tol / err) ** 0.2
            if grow < 0.2:
                grow = 0.2
            elif grow > 5.0:
                grow = 5.0
        h *= grow
        if h < tiny:
            code = 2
            break
    if last_rec != t:
        times.append(t)
        states.append(_snapshot(z, d))
    return times, states, code
