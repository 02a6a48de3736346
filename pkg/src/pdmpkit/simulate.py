"""Skeleton simulation and path reconstruction.

A skeleton is the jump record (time, pre-jump state, post-jump state);
between jumps the path follows the flow deterministically, so every
path query is answered from the skeleton alone.
"""
from __future__ import annotations

import math
from bisect import bisect_left, bisect_right
from dataclasses import dataclass, field
from typing import NamedTuple, Optional

from .errors import CemeteryInput
from .flow import Flow, PathFunctional, State, af_eval, flow_eval
from .hazard import HazardLaw, JumpKernel, kernel_sample, sample_jump_time
from .quadrature import DEFAULT_TOL

COMPLETED = "completed"
EXPLODED = "exploded"


@dataclass(frozen=True)
class PdmpModel:
    """Characteristic triple plus bookkeeping.

    ``dim`` and ``labels`` describe the state layout; ``max_jumps`` is
    the explosion guard per simulated path.
    """

    flow: Flow
    hazard: HazardLaw
    kernel: JumpKernel
    max_jumps: int = 10 ** 6
    dim: int = 1
    labels: Optional[tuple] = None


class Event(NamedTuple):
    time: float
    pre: State
    post: State


@dataclass(frozen=True)
class Skeleton:
    """One simulated path up to its time horizon."""

    x0: State
    events: tuple
    horizon: float
    status: str = COMPLETED
    times: tuple = field(init=False)

    def __post_init__(self):
        object.__setattr__(self, "times", tuple(e.time for e in self.events))


def simulate_skeleton(model: PdmpModel, x0: State, t_end: float, streams) -> Skeleton:
    """Simulate jumps on (0, t_end] from x0 with the given variate streams.

    ``streams`` is the (holding, destination) pair; draws are consumed
    in event order, so the result is a pure function of the stream keys.
    """
    if x0.is_cemetery():
        raise CemeteryInput("cannot start a path in the cemetery")
    if not (0.0 < t_end < math.inf):
        raise ValueError(f"horizon must be finite and positive, got {t_end}")
    holding, destination = streams
    events = []
    now = 0.0
    x = x0
    status = COMPLETED
    while True:
        remaining = t_end - now
        if remaining <= 0.0:
            break
        tau = sample_jump_time(model.hazard, model.flow, x, holding.next(),
                               t_max=remaining)
        if tau > remaining:
            break
        pre = flow_eval(model.flow, x, tau)
        post = kernel_sample(model.kernel, pre, destination)
        now += tau
        events.append(Event(now, pre, post))
        x = post
        if len(events) >= model.max_jumps:
            status = EXPLODED
            break
    return Skeleton(x0=x0, events=tuple(events), horizon=t_end, status=status)


def _segment_index(skeleton: Skeleton, t: float) -> int:
    """Number of events at or before t."""
    return bisect_right(skeleton.times, t)


def path_state(skeleton: Skeleton, model: PdmpModel, t: float) -> State:
    """State at time t (right-continuous: at a jump time, the post state)."""
    if not (0.0 <= t <= skeleton.horizon):
        raise ValueError(f"time {t} outside [0, {skeleton.horizon}]")
    n = _segment_index(skeleton, t)
    if n == 0:
        return flow_eval(model.flow, skeleton.x0, t)
    ev = skeleton.events[n - 1]
    return flow_eval(model.flow, ev.post, t - ev.time)


def path_state_pre(skeleton: Skeleton, model: PdmpModel, t: float) -> State:
    """State just before t: at a jump time, the pre-jump state."""
    if not (0.0 <= t <= skeleton.horizon):
        raise ValueError(f"time {t} outside [0, {skeleton.horizon}]")
    k = bisect_left(skeleton.times, t)
    if k < len(skeleton.times) and skeleton.times[k] == t:
        return skeleton.events[k].pre
    return path_state(skeleton, model, t)


def segments(skeleton: Skeleton, t: float):
    """(start state, elapsed window) pieces covering (0, t]."""
    out = []
    prev_time = 0.0
    prev_state = skeleton.x0
    for ev in skeleton.events:
        if ev.time > t:
            break
        out.append((prev_state, ev.time - prev_time))
        prev_time, prev_state = ev.time, ev.post
    if t > prev_time:
        out.append((prev_state, t - prev_time))
    return out


def eval_L(a: PathFunctional, skeleton: Skeleton, model: PdmpModel, t: float,
           tol: float = DEFAULT_TOL) -> float:
    """Accumulate the functional along the path, restarting at each jump."""
    if not (0.0 <= t <= skeleton.horizon):
        raise ValueError(f"time {t} outside [0, {skeleton.horizon}]")
    total = 0.0
    for x, window in segments(skeleton, t):
        if window > 0.0:
            total += af_eval(a, model.flow, x, window, tol=tol)
    return total
