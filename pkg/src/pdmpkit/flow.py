"""States, deterministic flows, and additive functionals along them.

A flow moves a state deterministically until its horizon; an additive
functional accumulates a rate density plus scheduled atoms along that
motion.  Atom schedules use half-open windows: ``atoms(x, lo, hi)``
returns ``(offset, value)`` pairs with ``lo < offset <= hi``, offsets
measured from x.  Schedules must be consistent with the flow, i.e.
restarting the schedule from a later point on the same trajectory yields
the same offsets, shifted.
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable, Optional

from .errors import CemeteryInput, HorizonExceeded
from .quadrature import DEFAULT_TOL, integrate_segments

INTERIOR = "interior"
BOUNDARY = "boundary"
CEMETERY_TAG = "cemetery"


@dataclass(frozen=True)
class State:
    """A point of the state space: tag, coordinate vector, optional label.

    The label addresses finite components (e.g. chain states); coords
    carry the continuous part.  The cemetery is a bare absorbing point.
    """

    tag: str = INTERIOR
    coords: tuple = ()
    label: Optional[int] = None

    def __post_init__(self):
        if self.tag == CEMETERY_TAG and (self.coords or self.label is not None):
            raise ValueError("cemetery state carries no coordinates or label")

    @property
    def x(self) -> float:
        """First coordinate, for one-dimensional models."""
        if self.tag == CEMETERY_TAG:
            raise CemeteryInput("cemetery state has no coordinates")
        return self.coords[0]

    def is_cemetery(self) -> bool:
        return self.tag == CEMETERY_TAG


CEMETERY = State(tag=CEMETERY_TAG)


def interior(*coords: float, label: Optional[int] = None) -> State:
    return State(INTERIOR, tuple(float(c) for c in coords), label)


def boundary_state(*coords: float, label: Optional[int] = None) -> State:
    return State(BOUNDARY, tuple(float(c) for c in coords), label)


@dataclass(frozen=True)
class Flow:
    """Deterministic motion: advance map, horizon, boundary limit.

    ``advance(x, t)`` is only consulted for 0 < t < horizon(x); the value
    at the horizon is delegated to ``boundary_limit``.  ``constant``
    declares advance(x, t) == x for all t, enabling exact shortcuts in
    quadrature.
    """

    advance: Callable[[State, float], State]
    horizon: Callable[[State], float] = lambda x: math.inf
    boundary_limit: Optional[Callable[[State], State]] = None
    constant: bool = False


def flow_eval(flow: Flow, x: State, t: float) -> State:
    """Position after sliding time t along the flow from x."""
    if x.is_cemetery():
        raise CemeteryInput("cannot flow from the cemetery state")
    if t < 0:
        raise ValueError(f"negative flow time {t}")
    if t == 0.0:
        return x
    c = flow.horizon(x)
    if t > c:
        raise HorizonExceeded(f"time {t} beyond flow horizon {c}")
    if t == c:
        if flow.boundary_limit is None:
            raise HorizonExceeded(
                f"flow reaches its horizon {c} and no boundary limit is declared")
        return flow.boundary_limit(x)
    return flow.advance(x, t)


def _check_window(x, t, flow):
    if x.is_cemetery():
        raise CemeteryInput("additive functional undefined from the cemetery")
    if t < 0:
        raise ValueError(f"negative window length {t}")
    c = flow.horizon(x)
    if t > c:
        raise HorizonExceeded(f"window length {t} beyond flow horizon {c}")


@dataclass(frozen=True)
class PathFunctional:
    """Additive functional along the flow: rate density plus atom schedule.

    ``cumulative``, when present, is a closed form for the density
    integral alone (atoms are always added explicitly by af_eval).
    """

    density: Callable[[State], float]
    atoms: Optional[Callable[[State, float, float], list]] = None
    cumulative: Optional[Callable[[State, float], float]] = None

    def atom_list(self, x: State, lo: float, hi: float) -> list:
        """Sorted (offset, value) pairs with lo < offset <= hi."""
        if self.atoms is None or hi <= lo:
            return []
        out = sorted((float(o), float(v)) for o, v in self.atoms(x, lo, hi))
        for o, _ in out:
            if not (lo < o <= hi):
                raise ValueError(f"atom offset {o} outside window ({lo}, {hi}]")
        return out


def integrate_along_flow(g, flow: Flow, x: State, t: float,
                         tol: float = DEFAULT_TOL, breakpoints=()) -> float:
    """Integral of s -> g(position at s) over [0, t] from x."""
    _check_window(x, t, flow)
    if t == 0.0:
        return 0.0
    if flow.constant:
        return g(x) * t
    return integrate_segments(lambda s: g(flow_eval(flow, x, s)),
                              0.0, t, breakpoints=breakpoints, tol=tol)


def af_eval(a: PathFunctional, flow: Flow, x: State, t: float,
            tol: float = DEFAULT_TOL) -> float:
    """Value accumulated on (0, t] starting from x."""
    _check_window(x, t, flow)
    if t == 0.0:
        return 0.0
    atoms = a.atom_list(x, 0.0, t)
    if a.cumulative is not None:
        cont = a.cumulative(x, t)
    else:
        cont = integrate_along_flow(a.density, flow, x, t, tol=tol,
                                    breakpoints=[o for o, _ in atoms])
    return cont + math.fsum(v for _, v in atoms)


def merge_atoms(*lists) -> list:
    """Merge sorted (offset, value) lists, summing values at equal offsets.

    Offsets are compared exactly; schedules that refer to the same event
    must emit bit-identical offsets.  Zero sums are dropped.
    """
    acc = {}
    for lst in lists:
        for o, v in lst:
            acc[o] = acc.get(o, 0.0) + v
    return sorted((o, v) for o, v in acc.items() if v != 0.0)


def af_linear(a: PathFunctional, b: PathFunctional,
              alpha: float, beta: float) -> PathFunctional:
    """The combination alpha*a + beta*b, exact on both parts."""

    def dens(y):
        return alpha * a.density(y) + beta * b.density(y)

    def atoms(x, lo, hi):
        return merge_atoms([(o, alpha * v) for o, v in a.atom_list(x, lo, hi)],
                           [(o, beta * v) for o, v in b.atom_list(x, lo, hi)])

    cumulative = None
    if a.cumulative is not None and b.cumulative is not None:
        def cumulative(x, t):
            return alpha * a.cumulative(x, t) + beta * b.cumulative(x, t)

    return PathFunctional(density=dens, atoms=atoms, cumulative=cumulative)
