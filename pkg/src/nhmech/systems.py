"""The four shipped example systems.

Each constructor returns an ExampleSpec bundling the mechanical system, its
velocity constraints, a parameterized candidate one-form solving the
constrained Hamilton-Jacobi problem, the known closed-form trajectory (where
one exists), fixture parameters, and a sampling box that stays clear of
coordinate singularities.  Fixture values are arbitrary but fixed; every
expected number in the tests is computed from the model formulas at these
values.

Naming of parameter keys (m, I, J, R, ...) and coordinate names is part of
the CLI contract.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable, Optional

import numpy as np

from .errors import EvaluationDomainError
from .hj import OneFormCandidate
from .mechanics import MechanicalSystem, PhaseState
from .nonholo import ConstraintDistribution, KernelSpec, NonholonomicSystem

# Exclusion band around the snakeboard wheel-angle singularity (cot phi).
SNAKEBOARD_SIN_GUARD = 1e-3


@dataclass(frozen=True)
class ExampleSpec:
    """A ready-to-run example system with its verification fixtures."""

    name: str
    coord_names: tuple
    system: NonholonomicSystem
    params: dict
    default_gamma_params: dict
    domain_box: np.ndarray  # (n, 2) sampling intervals
    make_gamma: Callable[..., OneFormCandidate]
    hamiltonian_literal: Callable[[np.ndarray, np.ndarray], float]
    default_ic: PhaseState
    closed_form: Optional[Callable] = None  # (t, **ic_constants) -> dict
    closed_form_ic: Optional[PhaseState] = None

    @property
    def gamma(self) -> OneFormCandidate:
        return self.make_gamma(**self.default_gamma_params)

    @property
    def dim(self) -> int:
        return self.system.dim


def _require_positive(params: dict, keys) -> None:
    for key in keys:
        if not params[key] > 0:
            raise ValueError(f"parameter {key} must be positive, got {params[key]}")


# ---------------------------------------------------------------------------
# vertical rolling disk
# ---------------------------------------------------------------------------

def vertical_rolling_disk(params: dict | None = None) -> ExampleSpec:
    """Disk of radius R rolling upright on the plane.

    Coordinates (x, y, phi, psi): contact point, heading angle, rolling
    angle.  Rolling without slipping ties the contact-point velocity to the
    spin rate: xdot = R cos(phi) psidot, ydot = R sin(phi) psidot.
    """
    p = {"m": 1.0, "I": 1.0, "J": 1.0, "R": 1.0}
    if params:
        p.update(params)
    _require_positive(p, ("m", "I", "J", "R"))
    m, I, J, R = p["m"], p["I"], p["J"], p["R"]

    g = np.diag([m, m, J, I])
    dg = np.zeros((4, 4, 4))
    mech = MechanicalSystem(
        dim=4,
        metric=lambda q: g,
        potential=lambda q: 0.0,
        metric_deriv=lambda q: dg,
        potential_grad=lambda q: np.zeros(4),
        params=dict(p),
    )

    def A(q):
        c, s = math.cos(q[2]), math.sin(q[2])
        return np.array([[1.0, 0.0, 0.0, -R * c], [0.0, 1.0, 0.0, -R * s]])

    def A_deriv(q):
        c, s = math.cos(q[2]), math.sin(q[2])
        dA = np.zeros((2, 4, 4))
        dA[0, 3, 2] = R * s
        dA[1, 3, 2] = -R * c
        return dA

    sys = NonholonomicSystem(
        mech=mech,
        dist=ConstraintDistribution(k=2, A=A, A_deriv=A_deriv),
        kernel=KernelSpec("vertical_rolling_disk", (m, I, J, R)),
    )

    def make_gamma(gamma_phi0: float = 1.0, gamma_psi0: float = 1.0) -> OneFormCandidate:
        def gamma(q):
            c, s = math.cos(q[2]), math.sin(q[2])
            return np.array(
                [m * R * c * gamma_psi0 / I, m * R * s * gamma_psi0 / I,
                 gamma_phi0, gamma_psi0]
            )

        def jac(q):
            c, s = math.cos(q[2]), math.sin(q[2])
            Jm = np.zeros((4, 4))
            Jm[0, 2] = -m * R * s * gamma_psi0 / I
            Jm[1, 2] = m * R * c * gamma_psi0 / I
            return Jm

        return OneFormCandidate(
            gamma=gamma,
            jacobian=jac,
            params={"gamma_phi0": gamma_phi0, "gamma_psi0": gamma_psi0},
            kernel=KernelSpec(
                "vertical_rolling_disk", (m, I, J, R, gamma_phi0, gamma_psi0)
            ),
        )

    def closed_form(t, gamma_phi0=1.0, gamma_psi0=1.0, c1=0.0, c2=0.0,
                    phi0=0.0, psi0=0.0):
        t = np.asarray(t, dtype=float)
        if gamma_phi0 == 0.0:
            raise ValueError("closed form needs a nonzero heading momentum")
        amp = J * R * gamma_psi0 / (I * gamma_phi0)
        phi = phi0 + gamma_phi0 * t / J
        return {
            "x": c1 + amp * np.sin(phi),
            "y": c2 - amp * np.cos(phi),
            "phi": phi,
            "psi": psi0 + gamma_psi0 * t / I,
            "p_x": m * R * np.cos(phi) * gamma_psi0 / I,
            "p_y": m * R * np.sin(phi) * gamma_psi0 / I,
            "p_phi": np.full_like(phi, gamma_phi0),
            "p_psi": np.full_like(phi, gamma_psi0),
        }

    gamma0 = make_gamma()
    cf0 = closed_form(0.0)
    q0 = np.array([cf0["x"], cf0["y"], cf0["phi"], cf0["psi"]], dtype=float)
    ic = PhaseState(q=q0, p=gamma0(q0))
    return ExampleSpec(
        name="vertical_rolling_disk",
        coord_names=("x", "y", "phi", "psi"),
        system=sys,
        params=p,
        default_gamma_params={"gamma_phi0": 1.0, "gamma_psi0": 1.0},
        domain_box=np.array(
            [[-2.0, 2.0], [-2.0, 2.0], [-np.pi, np.pi], [-np.pi, np.pi]]
        ),
        make_gamma=make_gamma,
        hamiltonian_literal=lambda q, pvec: 0.5 * (
            (pvec[0] ** 2 + pvec[1] ** 2) / m + pvec[2] ** 2 / J + pvec[3] ** 2 / I
        ),
        default_ic=ic,
        closed_form=closed_form,
        closed_form_ic=ic,
    )


# ---------------------------------------------------------------------------
# knife edge on an inclined plane
# ---------------------------------------------------------------------------

def knife_edge(params: dict | None = None, branch: str = "downhill") -> ExampleSpec:
    """Knife edge sliding on a plane inclined at angle alpha.

    Coordinates (x, y, phi); x points downhill, so V = -m g sin(alpha) x.
    The blade admits motion only along its heading:
    sin(phi) xdot - cos(phi) ydot = 0.

    ``branch`` picks the sign of the heading-momentum profile in the
    candidate family ("downhill" is nonnegative f).
    """
    p = {"m": 1.0, "J": 1.0, "g": 1.0, "alpha": math.pi / 6}
    if params:
        p.update(params)
    _require_positive(p, ("m", "J", "g"))
    if branch not in ("downhill", "uphill"):
        raise ValueError(f"unknown branch {branch!r}")
    m, J, grav, alpha = p["m"], p["J"], p["g"], p["alpha"]
    sign = 1.0 if branch == "downhill" else -1.0
    sa = math.sin(alpha)

    g = np.diag([m, m, J])
    dg = np.zeros((3, 3, 3))
    mech = MechanicalSystem(
        dim=3,
        metric=lambda q: g,
        potential=lambda q: -m * grav * sa * q[0],
        metric_deriv=lambda q: dg,
        potential_grad=lambda q: np.array([-m * grav * sa, 0.0, 0.0]),
        params=dict(p),
    )

    def A(q):
        return np.array([[math.sin(q[2]), -math.cos(q[2]), 0.0]])

    def A_deriv(q):
        dA = np.zeros((1, 3, 3))
        dA[0, 0, 2] = math.cos(q[2])
        dA[0, 1, 2] = math.sin(q[2])
        return dA

    sys = NonholonomicSystem(
        mech=mech,
        dist=ConstraintDistribution(k=1, A=A, A_deriv=A_deriv),
        kernel=KernelSpec("knife_edge", (m, J, grav, alpha)),
    )

    def make_gamma(gamma_phi0: float = 1.0, E: float = 1.0) -> OneFormCandidate:
        c0 = m * (2.0 * E - gamma_phi0 ** 2 / J)
        d0 = 2.0 * m * m * grav * sa

        def f_of(x):
            arg = c0 + d0 * x
            if arg < 0.0:
                raise EvaluationDomainError(
                    f"heading-momentum discriminant negative at x = {x}"
                )
            return sign * math.sqrt(arg)

        def gamma(q):
            f = f_of(q[0])
            return np.array([f * math.cos(q[2]), f * math.sin(q[2]), gamma_phi0])

        def jac(q):
            arg = c0 + d0 * q[0]
            if arg <= 0.0:
                raise EvaluationDomainError(
                    "one-form is not differentiable at the turning locus"
                )
            f = sign * math.sqrt(arg)
            fp = sign * d0 / (2.0 * math.sqrt(arg))
            c, s = math.cos(q[2]), math.sin(q[2])
            Jm = np.zeros((3, 3))
            Jm[0, 0] = fp * c
            Jm[0, 2] = -f * s
            Jm[1, 0] = fp * s
            Jm[1, 2] = f * c
            return Jm

        return OneFormCandidate(
            gamma=gamma,
            jacobian=jac,
            params={"gamma_phi0": gamma_phi0, "E": E},
            kernel=KernelSpec("knife_edge", (m, J, grav, alpha, gamma_phi0, E, sign)),
        )

    def closed_form(t, omega=1.0):
        """Trajectory from rest at the origin with initial turning rate
        omega; the corresponding candidate constants are gamma_phi0 =
        J*omega, E = J*omega**2/2."""
        t = np.asarray(t, dtype=float)
        amp = grav * sa / (2.0 * omega ** 2)
        x = amp * np.sin(omega * t) ** 2
        y = amp * (omega * t - 0.5 * np.sin(2.0 * omega * t))
        phi = omega * t
        xdot = (grav * sa / omega) * np.sin(omega * t) * np.cos(omega * t)
        ydot = (grav * sa / omega) * np.sin(omega * t) ** 2
        return {
            "x": x, "y": y, "phi": phi,
            "p_x": m * xdot, "p_y": m * ydot,
            "p_phi": np.full_like(phi, J * omega),
        }

    omega0 = 1.0
    default_gamma = {"gamma_phi0": 1.0, "E": 1.0}
    gamma0 = make_gamma(**default_gamma)
    q0 = np.zeros(3)
    return ExampleSpec(
        name="knife_edge",
        coord_names=("x", "y", "phi"),
        system=sys,
        params=p,
        default_gamma_params=default_gamma,
        # Keep x above the turning locus of the default candidate
        # (f^2 = m(2E - gamma_phi0^2/J) + 2 m^2 g sin(alpha) x > 0).
        domain_box=np.array([[-0.5, 2.0], [-2.0, 2.0], [-np.pi, np.pi]]),
        make_gamma=make_gamma,
        hamiltonian_literal=lambda q, pvec: 0.5 * (
            (pvec[0] ** 2 + pvec[1] ** 2) / m + pvec[2] ** 2 / J
        ) - m * grav * q[0] * sa,
        default_ic=PhaseState(q=q0, p=gamma0(q0)),
        closed_form=closed_form,
        closed_form_ic=PhaseState(q=q0, p=np.array([0.0, 0.0, J * omega0])),
    )


# ---------------------------------------------------------------------------
# snakeboard
# ---------------------------------------------------------------------------

def snakeboard(params: dict | None = None) -> ExampleSpec:
    """Snakeboard: rider rotor over a board with steerable wheel pairs.

    Coordinates (x, y, theta, psi, phi): position, board heading, rotor
    angle, wheel angle.  The wheel contact lines force
    xdot + r cot(phi) cos(theta) thetadot = 0 (same with sin for y), which
    blows up at phi in {0, pi}; evaluation inside a small band around those
    angles raises an evaluation-domain error.

    The inertia matrix is the inverse of the momentum quadratic form:
    block diag(m, m, [[m r^2, J0], [J0, J0]], 2 J1); the round trip against
    the literal energy expression is enforced in the tests.
    """
    p = {"m": 1.0, "r": 1.0, "J0": 0.5, "J1": 0.125}
    if params:
        p.update(params)
    _require_positive(p, ("m", "r", "J0", "J1"))
    m, r, J0, J1 = p["m"], p["r"], p["J0"], p["J1"]
    K = m * r * r - J0
    if not K > 0:
        raise ValueError("snakeboard needs m r^2 > J0")

    g = np.zeros((5, 5))
    g[0, 0] = g[1, 1] = m
    g[2, 2] = m * r * r
    g[2, 3] = g[3, 2] = J0
    g[3, 3] = J0
    g[4, 4] = 2.0 * J1
    dg = np.zeros((5, 5, 5))
    mech = MechanicalSystem(
        dim=5,
        metric=lambda q: g,
        potential=lambda q: 0.0,
        metric_deriv=lambda q: dg,
        potential_grad=lambda q: np.zeros(5),
        params=dict(p),
    )

    def _check_phi(phi):
        if abs(math.sin(phi)) < SNAKEBOARD_SIN_GUARD:
            raise EvaluationDomainError(
                f"wheel angle {phi} is inside the singular band around 0 / pi"
            )

    def A(q):
        _check_phi(q[4])
        ct = math.cos(q[4]) / math.sin(q[4])
        return np.array(
            [
                [1.0, 0.0, r * ct * math.cos(q[2]), 0.0, 0.0],
                [0.0, 1.0, r * ct * math.sin(q[2]), 0.0, 0.0],
            ]
        )

    def A_deriv(q):
        _check_phi(q[4])
        s = math.sin(q[4])
        ct = math.cos(q[4]) / s
        cth, sth = math.cos(q[2]), math.sin(q[2])
        dA = np.zeros((2, 5, 5))
        dA[0, 2, 2] = -r * ct * sth
        dA[1, 2, 2] = r * ct * cth
        dA[0, 2, 4] = -r * cth / (s * s)
        dA[1, 2, 4] = -r * sth / (s * s)
        return dA

    sys = NonholonomicSystem(
        mech=mech,
        dist=ConstraintDistribution(k=2, A=A, A_deriv=A_deriv),
        domain_guard=lambda q: abs(math.sin(q[4])) >= SNAKEBOARD_SIN_GUARD,
        kernel=KernelSpec("snakeboard", (m, r, J0, J1)),
    )

    def make_gamma(gamma_psi0: float = 0.2, gamma_phi0: float = 0.04,
                   E: float = 1.0) -> OneFormCandidate:
        Cc = E - gamma_psi0 ** 2 / (2.0 * J0) - gamma_phi0 ** 2 / (4.0 * J1)
        if Cc < 0.0:
            raise EvaluationDomainError(
                "energy constant too small for these rotor/wheel momenta"
            )
        C = math.sqrt(Cc)

        def gph(phi):
            return math.sqrt((m * r * r - J0 * math.sin(phi) ** 2) / 2.0)

        def gamma(q):
            cth, sth = math.cos(q[2]), math.sin(q[2])
            cphi, sphi = math.cos(q[4]), math.sin(q[4])
            gp = gph(q[4])
            return np.array(
                [
                    -m * r * C * cth * cphi / gp,
                    -m * r * C * sth * cphi / gp,
                    gamma_psi0 + K * C * sphi / gp,
                    gamma_psi0,
                    gamma_phi0,
                ]
            )

        def jac(q):
            cth, sth = math.cos(q[2]), math.sin(q[2])
            cphi, sphi = math.cos(q[4]), math.sin(q[4])
            gp = gph(q[4])
            dgp = -J0 * sphi * cphi / (2.0 * gp)
            # W = cos(phi)/gph and U = sin(phi)/gph profiles
            W = cphi / gp
            dW = (-sphi * gp - cphi * dgp) / (gp * gp)
            dU = (cphi * gp - sphi * dgp) / (gp * gp)
            Jm = np.zeros((5, 5))
            Jm[0, 2] = m * r * C * sth * W
            Jm[1, 2] = -m * r * C * cth * W
            Jm[0, 4] = -m * r * C * cth * dW
            Jm[1, 4] = -m * r * C * sth * dW
            Jm[2, 4] = K * C * dU
            return Jm

        return OneFormCandidate(
            gamma=gamma,
            jacobian=jac,
            params={"gamma_psi0": gamma_psi0, "gamma_phi0": gamma_phi0, "E": E},
            kernel=KernelSpec(
                "snakeboard", (m, r, J0, J1, gamma_psi0, gamma_phi0, E)
            ),
        )

    default_gamma = {"gamma_psi0": 0.2, "gamma_phi0": 0.04, "E": 1.0}
    gamma0 = make_gamma(**default_gamma)
    q0 = np.array([0.0, 0.0, 0.0, 0.0, math.pi / 3])
    return ExampleSpec(
        name="snakeboard",
        coord_names=("x", "y", "theta", "psi", "phi"),
        system=sys,
        params=p,
        default_gamma_params=default_gamma,
        domain_box=np.array(
            [
                [-2.0, 2.0],
                [-2.0, 2.0],
                [-np.pi, np.pi],
                [-np.pi, np.pi],
                [0.35, np.pi - 0.35],
            ]
        ),
        make_gamma=make_gamma,
        hamiltonian_literal=lambda q, pvec: (
            (pvec[0] ** 2 + pvec[1] ** 2) / (2.0 * m)
            + pvec[3] ** 2 / (2.0 * J0)
            + (pvec[2] - pvec[3]) ** 2 / (2.0 * K)
            + pvec[4] ** 2 / (4.0 * J1)
        ),
        default_ic=PhaseState(q=q0, p=gamma0(q0)),
        closed_form=None,
        closed_form_ic=None,
    )


# ---------------------------------------------------------------------------
# Chaplygin sleigh
# ---------------------------------------------------------------------------

def chaplygin_sleigh(params: dict | None = None) -> ExampleSpec:
    """Sleigh with a knife-edge runner at (x, y) and center of mass a
    distance ``a`` from the contact point; M is the mass, J the inertia
    about the center of mass.

    Coordinates (x, y, theta); constraint sin(theta) xdot = cos(theta) ydot.
    The candidate family is the exact rotation-decay solution profile,
    parameterized by the initial turning rate omega (total energy
    E = (J + a^2 M) omega^2 / 2).
    """
    p = {"M": 1.0, "J": 1.0, "a": 1.0}
    if params:
        p.update(params)
    _require_positive(p, ("M", "J", "a"))
    M, J, a = p["M"], p["J"], p["a"]
    Jt = J + a * a * M  # inertia about the contact point

    def metric(q):
        s, c = math.sin(q[2]), math.cos(q[2])
        return np.array(
            [
                [M, 0.0, -M * a * s],
                [0.0, M, M * a * c],
                [-M * a * s, M * a * c, Jt],
            ]
        )

    def metric_deriv(q):
        s, c = math.sin(q[2]), math.cos(q[2])
        dg = np.zeros((3, 3, 3))
        dg[2] = np.array(
            [
                [0.0, 0.0, -M * a * c],
                [0.0, 0.0, -M * a * s],
                [-M * a * c, -M * a * s, 0.0],
            ]
        )
        return dg

    mech = MechanicalSystem(
        dim=3,
        metric=metric,
        potential=lambda q: 0.0,
        metric_deriv=metric_deriv,
        potential_grad=lambda q: np.zeros(3),
        params=dict(p),
    )

    def A(q):
        return np.array([[math.sin(q[2]), -math.cos(q[2]), 0.0]])

    def A_deriv(q):
        dA = np.zeros((1, 3, 3))
        dA[0, 0, 2] = math.cos(q[2])
        dA[0, 1, 2] = math.sin(q[2])
        return dA

    sys = NonholonomicSystem(
        mech=mech,
        dist=ConstraintDistribution(k=1, A=A, A_deriv=A_deriv),
        kernel=KernelSpec("chaplygin_sleigh", (M, J, a)),
    )

    b_const = math.sqrt(a * a * M / Jt)

    def make_gamma(omega: float = 1.0) -> OneFormCandidate:
        # Admissible velocity profile (u along the heading, turning rate td)
        # written as smooth functions of theta; the momentum is its image
        # under the inertia matrix, so membership holds identically.
        ucoef = a * omega / b_const

        def profile(th):
            return ucoef * math.sin(b_const * th), omega * math.cos(b_const * th)

        def gamma(q):
            s, c = math.sin(q[2]), math.cos(q[2])
            u, td = profile(q[2])
            return np.array(
                [M * (u * c - a * s * td), M * (u * s + a * c * td), Jt * td]
            )

        def jac(q):
            s, c = math.sin(q[2]), math.cos(q[2])
            u, td = profile(q[2])
            du = a * omega * math.cos(b_const * q[2])
            dtd = -omega * b_const * math.sin(b_const * q[2])
            Jm = np.zeros((3, 3))
            Jm[0, 2] = M * (du * c - u * s - a * c * td - a * s * dtd)
            Jm[1, 2] = M * (du * s + u * c - a * s * td + a * c * dtd)
            Jm[2, 2] = Jt * dtd
            return Jm

        return OneFormCandidate(
            gamma=gamma,
            jacobian=jac,
            params={"omega": omega},
            kernel=KernelSpec("chaplygin_sleigh", (M, J, a, omega)),
        )

    def closed_form(t, omega=1.0):
        """Pure initial rotation (u(0) = 0, thetadot(0) = omega): the
        heading angle saturates and the turning momentum decays."""
        t = np.asarray(t, dtype=float)
        return {
            "theta": (2.0 / b_const) * np.arctan(np.tanh(0.5 * b_const * omega * t)),
            "p_theta": Jt * omega / np.cosh(b_const * omega * t),
            "u": (a * omega / b_const) * np.tanh(b_const * omega * t),
        }

    default_gamma = {"omega": 1.0}
    gamma0 = make_gamma(**default_gamma)
    q0 = np.zeros(3)
    return ExampleSpec(
        name="chaplygin_sleigh",
        coord_names=("x", "y", "theta"),
        system=sys,
        params=p,
        default_gamma_params=default_gamma,
        domain_box=np.array([[-2.0, 2.0], [-2.0, 2.0], [-1.3, 1.3]]),
        make_gamma=make_gamma,
        hamiltonian_literal=lambda q, pvec: (
            (M * a * a * math.sin(q[2]) ** 2 + J) / (2.0 * J * M) * pvec[0] ** 2
            + (M * a * a * math.cos(q[2]) ** 2 + J) / (2.0 * J * M) * pvec[1] ** 2
            + pvec[2] ** 2 / (2.0 * J)
            - (a * a * math.sin(q[2]) * math.cos(q[2]) / J) * pvec[0] * pvec[1]
            + (a / J)
            * (math.sin(q[2]) * pvec[0] - math.cos(q[2]) * pvec[1])
            * pvec[2]
        ),
        default_ic=PhaseState(q=q0, p=gamma0(q0)),
        closed_form=closed_form,
        closed_form_ic=PhaseState(q=q0, p=gamma0(q0)),
    )


EXAMPLES = {
    "vertical_rolling_disk": vertical_rolling_disk,
    "knife_edge": knife_edge,
    "snakeboard": snakeboard,
    "chaplygin_sleigh": chaplygin_sleigh,
}


def get_example(name: str, params: dict | None = None, **kwargs) -> ExampleSpec:
    try:
        ctor = EXAMPLES[name]
    except KeyError:
        raise KeyError(
            f"unknown system {name!r}; available: {sorted(EXAMPLES)}"
        ) from None
    return ctor(params, **kwargs)
