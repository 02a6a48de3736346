"""Shared quadrature backend: adaptive panels with forced breakpoints.

Integrands met here are smooth between atom offsets, so the strategy is
to split at the supplied breakpoints and run Gauss-Kronrod on each piece.
"""
from __future__ import annotations

from scipy import integrate

from .errors import QuadratureFailure

DEFAULT_TOL = 1e-10
DEFAULT_BUDGET = 10 ** 6
_PANEL = 21  # evaluations per Gauss-Kronrod subinterval


def integrate_segments(g, lo, hi, breakpoints=(), tol=DEFAULT_TOL, budget=DEFAULT_BUDGET):
    """Integrate g over [lo, hi], splitting at breakpoints, absolute tolerance tol."""
    if hi <= lo:
        return 0.0
    cuts = sorted({float(lo), float(hi), *(float(b) for b in breakpoints if lo < b < hi)})
    limit = max(budget // (_PANEL * max(len(cuts) - 1, 1)), 10)
    total = 0.0
    for a, b in zip(cuts[:-1], cuts[1:]):
        out = integrate.quad(g, a, b, epsabs=tol, epsrel=1e-12,
                             limit=limit, full_output=True)
        if len(out) > 3:
            raise QuadratureFailure(f"quadrature stalled on [{a}, {b}]: {out[3]}")
        value, err = out[0], out[1]
        if err > max(10.0 * tol, 1e-12 * abs(value)):
            raise QuadratureFailure(
                f"error estimate {err:.3e} above tolerance {tol:.1e} on [{a}, {b}]")
        total += value
    return total
