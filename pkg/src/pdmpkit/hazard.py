"""The stochastic clock and the jump destinations.

A hazard law is an absolutely continuous rate along the flow plus a
schedule of hazard atoms with values in (0, 1]; an atom of value 1
forces a jump.  Survival is reconstructed from the law, and jump times
are sampled by inverting survival at a uniform draw.  Jump kernels come
in three kinds: ``discrete`` (explicit mass list), ``density-1d``
(density in a destination coordinate), and ``moment-oracle`` (sampling
plus closed-form integration for tagged function families).
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable, Optional

from scipy import optimize

from .errors import (HorizonExceeded, InversionFailure, MissingOracle,
                     UnsupportedState)
from .flow import Flow, State, flow_eval
from .quadrature import DEFAULT_TOL, integrate_segments

TIME_TOL = 1e-12
_SEARCH_LIMIT = 1e18  # beyond this the residual hazard is treated as spent


@dataclass(frozen=True)
class HazardLaw:
    """Conditional jump intensity along the flow.

    ``rate`` is the absolutely continuous intensity; ``atoms`` the
    windowed schedule of discontinuities with values in (0, 1].
    ``cumulative_rate`` and ``inverse_cumulative_rate`` are optional
    closed forms for the integrated rate from the window start and its
    inverse; they only cover the continuous part.  ``tilt_factory``,
    when present, maps a positive tilt function to a replacement law in
    closed form (used by the tilting layer; may return None to decline).
    """

    rate: Callable[[State], float]
    atoms: Optional[Callable[[State, float, float], list]] = None
    cumulative_rate: Optional[Callable[[State, float], float]] = None
    inverse_cumulative_rate: Optional[Callable[[State, float], float]] = None
    tilt_factory: Optional[Callable] = None

    def atom_list(self, x: State, lo: float, hi: float) -> list:
        if self.atoms is None or hi <= lo:
            return []
        out = sorted((float(o), float(v)) for o, v in self.atoms(x, lo, hi))
        for o, v in out:
            if not (lo < o <= hi):
                raise ValueError(f"hazard atom offset {o} outside window ({lo}, {hi}]")
            if not (0.0 < v <= 1.0):
                raise ValueError(f"hazard atom value {v} outside (0, 1]")
        return out


def cumulative_hazard(law: HazardLaw, flow: Flow, x: State, t: float,
                      tol: float = DEFAULT_TOL):
    """Continuous hazard integral over (0, t] and the atoms inside it."""
    if t < 0:
        raise ValueError(f"negative window length {t}")
    c = flow.horizon(x)
    if t > c:
        raise HorizonExceeded(f"window length {t} beyond flow horizon {c}")
    if t == 0.0:
        return 0.0, []
    atoms = law.atom_list(x, 0.0, t)
    cont = _rate_integral(law, flow, x, 0.0, t, tol,
                          breakpoints=[o for o, _ in atoms])
    return cont, atoms


def survival(law: HazardLaw, flow: Flow, x: State, t: float,
             tol: float = DEFAULT_TOL) -> float:
    """Probability that no jump has happened by time t along the flow from x."""
    cont, atoms = cumulative_hazard(law, flow, x, t, tol)
    surv = math.exp(-cont)
    for _, delta in atoms:
        surv *= 1.0 - delta
    return surv


def terminal_forced(law: HazardLaw, flow: Flow, x: State) -> bool:
    """Whether the schedule forces a jump exactly at the flow horizon."""
    c = flow.horizon(x)
    if not math.isfinite(c):
        return False
    return any(o == c and v >= 1.0 for o, v in law.atom_list(x, 0.0, c))


def _rate_integral(law, flow, x, s1, s2, tol, breakpoints=()):
    """Integrated rate along the flow from x over [s1, s2]."""
    if s2 <= s1:
        return 0.0
    if law.cumulative_rate is not None:
        base = law.cumulative_rate(x, s1) if s1 > 0.0 else 0.0
        return law.cumulative_rate(x, s2) - base
    if flow.constant:
        return law.rate(x) * (s2 - s1)
    return integrate_segments(lambda s: law.rate(flow_eval(flow, x, s)),
                              s1, s2, breakpoints=breakpoints, tol=tol)


def _invert_rate_integral(law, flow, x, s1, needed, s2, tol):
    """Solve for t in (s1, s2] with integrated rate over (s1, t] == needed."""
    if needed <= 0.0:
        return s1
    if law.inverse_cumulative_rate is not None:
        base = law.cumulative_rate(x, s1) if s1 > 0.0 else 0.0
        return min(law.inverse_cumulative_rate(x, base + needed), s2)
    if flow.constant:
        return min(s1 + needed / law.rate(x), s2)

    def gap(t):
        return _rate_integral(law, flow, x, s1, t, tol) - needed

    try:
        return optimize.brentq(gap, s1, s2, xtol=TIME_TOL, rtol=8.881784197001252e-16)
    except (ValueError, RuntimeError) as exc:
        raise InversionFailure(f"jump-time inversion failed on ({s1}, {s2}]") from exc


def sample_jump_time(law: HazardLaw, flow: Flow, x: State, u: float,
                     t_max: Optional[float] = None,
                     tol: float = DEFAULT_TOL) -> float:
    """Inverse-transform jump time: first t with survival(x, t) <= u.

    Returns +inf when the total hazard never reaches -log(u); with
    ``t_max`` the search is right-censored there, so +inf then only
    means "no jump within t_max".  A finite horizon with leftover
    survival and no terminal atom leaves later behavior undefined and
    raises HorizonExceeded.
    """
    if not (0.0 < u < 1.0):
        raise ValueError(f"uniform draw {u} outside (0, 1)")
    need = -math.log(u)
    c = flow.horizon(x)
    cap = c if t_max is None else min(c, t_max)
    acc = 0.0
    pos = 0.0

    def scan(window_hi):
        """Walk atoms then the continuous tail up to window_hi.

        Returns the crossing time, or None if the exponent budget is not
        exhausted inside the window.
        """
        nonlocal acc, pos
        for o, delta in law.atom_list(x, pos, window_hi):
            inc = _rate_integral(law, flow, x, pos, o, tol)
            if acc + inc >= need:
                return _invert_rate_integral(law, flow, x, pos, need - acc, o, tol)
            acc += inc
            pos = o
            if delta >= 1.0:
                return o
            acc += -math.log1p(-delta)
            if acc >= need:
                return o
        inc = _rate_integral(law, flow, x, pos, window_hi, tol)
        if acc + inc >= need:
            return _invert_rate_integral(law, flow, x, pos, need - acc, window_hi, tol)
        acc += inc
        pos = window_hi
        return None

    if math.isfinite(cap):
        hit = scan(cap)
        if hit is not None:
            return hit
        if t_max is not None and cap < c:
            return math.inf
        # cap == horizon: survival is still positive there with no forced atom
        raise HorizonExceeded(
            f"survival {math.exp(acc - need):.3g}/u remains at the horizon {c} "
            "with no terminal atom; behavior beyond is undefined")
    window = 1.0
    while True:
        hit = scan(window)
        if hit is not None:
            return hit
        if window > _SEARCH_LIMIT:
            return math.inf
        window *= 2.0


# ---------------------------------------------------------------------------
# jump kernels

DISCRETE = "discrete"
DENSITY_1D = "density-1d"
MOMENT_ORACLE = "moment-oracle"


@dataclass(frozen=True)
class JumpKernel:
    """Destination law of a jump from the pre-jump state.

    Exactly the fields for the declared kind need to be present:
    discrete needs ``support``; density-1d needs ``pdf``/``to_state``/
    ``bounds`` and a ``sampler``; moment-oracle needs ``sampler`` and
    ``oracle``.  ``oracle(y, f)`` may return None to decline f, in which
    case integration falls back to the density if declared.
    ``tilt_envelope(y)`` bounds sup of a tilt function over the support
    (rejection sampling), and ``tilted_factory(h)`` builds a replacement
    kernel in closed form; either enables tilting for non-discrete kinds.
    """

    kind: str
    support: Optional[Callable[[State], list]] = None
    sampler: Optional[Callable] = None
    pdf: Optional[Callable[[State, float], float]] = None
    to_state: Optional[Callable[[State, float], State]] = None
    bounds: Optional[Callable[[State], tuple]] = None
    oracle: Optional[Callable[[State, object], Optional[float]]] = None
    tilt_envelope: Optional[Callable[[State], float]] = None
    tilted_factory: Optional[Callable] = None

    def __post_init__(self):
        if self.kind not in (DISCRETE, DENSITY_1D, MOMENT_ORACLE):
            raise ValueError(f"unknown kernel kind {self.kind!r}")
        if self.kind == DISCRETE and self.support is None:
            raise ValueError("discrete kernel needs a support function")
        if self.kind == DENSITY_1D and None in (self.pdf, self.to_state, self.bounds):
            raise ValueError("density-1d kernel needs pdf, to_state and bounds")


def _masses(kernel, y):
    pairs = kernel.support(y)
    if not pairs:
        raise UnsupportedState(f"kernel support empty at {y}")
    total = math.fsum(p for _, p in pairs)
    if any(p < 0 for _, p in pairs) or abs(total - 1.0) > 1e-9:
        raise UnsupportedState(f"kernel masses at {y} sum to {total}, expected 1")
    return pairs


def kernel_sample(kernel: JumpKernel, y: State, stream) -> State:
    """Draw a destination; consumes uniforms from the stream."""
    if kernel.kind == DISCRETE:
        u = stream.next()
        pairs = _masses(kernel, y)
        cum = 0.0
        for z, p in pairs[:-1]:
            cum += p
            if u <= cum:
                return z
        return pairs[-1][0]
    if kernel.sampler is None:
        raise UnsupportedState(f"{kernel.kind} kernel has no sampler")
    return kernel.sampler(y, stream)


def _callable_of(f):
    return f.value if hasattr(f, "value") else f


def kernel_integrate(kernel: JumpKernel, y: State, f,
                     tol: float = DEFAULT_TOL) -> float:
    """Integral of f against the destination law from y.

    Exact sum for discrete kernels; closed form via the oracle when it
    recognizes f; otherwise quadrature against the declared density.
    """
    if kernel.kind == DISCRETE:
        fv = _callable_of(f)
        return math.fsum(p * fv(z) for z, p in _masses(kernel, y))
    if kernel.oracle is not None:
        value = kernel.oracle(y, f)
        if value is not None:
            return value
    if kernel.pdf is not None:
        fv = _callable_of(f)
        lo, hi = kernel.bounds(y)

        def integrand(z):
            # where the density underflows the contribution is zero; skip f,
            # which may itself overflow that deep in the tail
            w = kernel.pdf(y, z)
            if w == 0.0:
                return 0.0
            return fv(kernel.to_state(y, z)) * w

        return integrate_segments(integrand, lo, hi, tol=tol)
    raise MissingOracle(
        f"{kernel.kind} kernel cannot integrate {f!r} and declares no density")
