"""Integration kernel selection: compiled extension when built, else Python.

The compiled module hard-codes the right-hand sides of the shipped example
systems; everything it computes is cross-checked against the generic
pure-Python machinery in the test suite.
"""

from __future__ import annotations

from .py_fallback import PyPhaseKernel, PyReducedKernel
from . import py_fallback

try:
    from . import _core
except ImportError:  # extension not built; pure-Python fallback only
    _core = None

HAVE_COMPILED = _core is not None


def make_compiled_phase(spec):
    """Compiled phase-space kernel for a registered system, or None."""
    if _core is None:
        return None
    return _core.make_phase_kernel(spec.name, spec.params)


def make_compiled_reduced(spec):
    """Compiled configuration-space kernel, or None."""
    if _core is None:
        return None
    return _core.make_reduced_kernel(spec.name, spec.params)


def run_rk4(kern, z0, t0, t1, h, record_stride, max_steps):
    if getattr(kern, "is_compiled", False):
        return _core.run_rk4(kern, z0, t0, t1, h, record_stride, max_steps)
    return py_fallback.run_rk4(kern, z0, t0, t1, h, record_stride, max_steps)


def run_dopri45(kern, z0, t0, t1, rel_tol, abs_tol, h0, record_stride, max_steps):
    if getattr(kern, "is_compiled", False):
        return _core.run_dopri45(
            kern, z0, t0, t1, rel_tol, abs_tol, h0, record_stride, max_steps
        )
    return py_fallback.run_dopri45(
        kern, z0, t0, t1, rel_tol, abs_tol, h0, record_stride, max_steps
    )
