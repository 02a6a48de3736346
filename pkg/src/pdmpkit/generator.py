"""Applying the extended generator to test functions along the flow.

The generator of a model acts on a test function f as an additive
functional: a density part (flow derivative plus rate-weighted kernel
compensation) and an atom part at hazard atoms and at path jumps of f.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, replace
from typing import Callable, Optional

from .flow import PathFunctional, State, flow_eval, merge_atoms
from .hazard import kernel_integrate
from .quadrature import DEFAULT_TOL, integrate_segments
from .simulate import PdmpModel, Skeleton, eval_L, path_state

FD_STEP = 1e-6


@dataclass(frozen=True)
class TestFunction:
    """A function on states with its behavior along the flow.

    ``path_derivative`` is the derivative of t -> f(position at t); when
    None it is approximated by a forward difference of step 1e-6 along
    the flow.  ``path_jumps`` schedules discontinuities of f along the
    flow with the same window convention as other atom schedules.
    ``family`` optionally tags f for kernels with closed-form moments;
    recognized tags are ("const", c) and ("exp", a, s) for s*exp(a*x).
    """

    value: Callable[[State], float]
    path_derivative: Optional[Callable[[State], float]] = None
    path_jumps: Optional[Callable[[State, float, float], list]] = None
    family: Optional[tuple] = None

    __test__ = False  # not a pytest suite, despite the name

    def jump_list(self, x: State, lo: float, hi: float) -> list:
        if self.path_jumps is None or hi <= lo:
            return []
        return sorted((float(o), float(v)) for o, v in self.path_jumps(x, lo, hi))


def constant_function(c: float) -> TestFunction:
    return TestFunction(value=lambda y: c,
                        path_derivative=lambda y: 0.0,
                        family=("const", float(c)))


def exp_function(a: float, scale: float = 1.0,
                 drift: Optional[float] = None) -> TestFunction:
    """scale * exp(a * first coordinate); drift is the flow speed, if constant."""
    deriv = None
    if drift is not None:
        def deriv(y):
            return a * drift * scale * math.exp(a * y.x)
    return TestFunction(value=lambda y: scale * math.exp(a * y.x),
                        path_derivative=deriv,
                        family=("exp", float(a), float(scale)))


def label_function(values) -> TestFunction:
    """A function of the label alone; constant along label-preserving flows."""
    table = tuple(float(v) for v in values)
    return TestFunction(value=lambda y: table[y.label],
                        path_derivative=lambda y: 0.0)


def reciprocal_function(f: TestFunction, flow) -> TestFunction:
    """1/f with derivative and path jumps derived from f."""

    def value(y):
        return 1.0 / f.value(y)

    deriv = None
    if f.path_derivative is not None:
        def deriv(y):
            return -f.path_derivative(y) / f.value(y) ** 2

    jumps = None
    if f.path_jumps is not None:
        def jumps(x, lo, hi):
            out = []
            for o, dv in f.jump_list(x, lo, hi):
                fy = f.value(flow_eval(flow, x, o))
                out.append((o, 1.0 / fy - 1.0 / (fy - dv)))
            return out

    family = None
    if f.family is not None and f.family[0] == "exp":
        family = ("exp", -f.family[1], 1.0 / f.family[2])
    elif f.family is not None and f.family[0] == "const":
        family = ("const", 1.0 / f.family[1])
    return TestFunction(value=value, path_derivative=deriv,
                        path_jumps=jumps, family=family)


def product_function(f: TestFunction, g: TestFunction, flow) -> TestFunction:
    """Pointwise product f*g with derivative and path jumps derived."""

    def value(y):
        return f.value(y) * g.value(y)

    deriv = None
    if f.path_derivative is not None and g.path_derivative is not None:
        def deriv(y):
            return f.path_derivative(y) * g.value(y) + f.value(y) * g.path_derivative(y)

    jumps = None
    if f.path_jumps is not None or g.path_jumps is not None:
        def jumps(x, lo, hi):
            fj = dict(f.jump_list(x, lo, hi))
            gj = dict(g.jump_list(x, lo, hi))
            out = []
            for o in sorted(set(fj) | set(gj)):
                y = flow_eval(flow, x, o)
                fy, gy = f.value(y), g.value(y)
                dv = fy * gy - (fy - fj.get(o, 0.0)) * (gy - gj.get(o, 0.0))
                if dv != 0.0:
                    out.append((o, dv))
            return out

    family = None
    ff, gf = f.family, g.family
    if ff is not None and gf is not None:
        if ff[0] == "const" and gf[0] == "const":
            family = ("const", ff[1] * gf[1])
        elif ff[0] == "const" and gf[0] == "exp":
            family = ("exp", gf[1], ff[1] * gf[2])
        elif ff[0] == "exp" and gf[0] == "const":
            family = ("exp", ff[1], ff[2] * gf[1])
        elif ff[0] == "exp" and gf[0] == "exp":
            family = ("exp", ff[1] + gf[1], ff[2] * gf[2])
    return TestFunction(value=value, path_derivative=deriv,
                        path_jumps=jumps, family=family)


def linear_combination(f: TestFunction, g: TestFunction, alpha: float = 1.0,
                       beta: float = 1.0) -> TestFunction:
    """The combination alpha*f + beta*g, exact on all parts."""

    def value(y):
        return alpha * f.value(y) + beta * g.value(y)

    deriv = None
    if f.path_derivative is not None and g.path_derivative is not None:
        def deriv(y):
            return alpha * f.path_derivative(y) + beta * g.path_derivative(y)

    jumps = None
    if f.path_jumps is not None or g.path_jumps is not None:
        def jumps(x, lo, hi):
            return merge_atoms([(o, alpha * v) for o, v in f.jump_list(x, lo, hi)],
                               [(o, beta * v) for o, v in g.jump_list(x, lo, hi)])

    family = None
    ff, gf = f.family, g.family
    if ff is not None and gf is not None:
        if ff[0] == "const" and gf[0] == "const":
            family = ("const", alpha * ff[1] + beta * gf[1])
        elif ff[0] == "exp" and gf[0] == "exp" and ff[1] == gf[1]:
            family = ("exp", ff[1], alpha * ff[2] + beta * gf[2])
    return TestFunction(value=value, path_derivative=deriv,
                        path_jumps=jumps, family=family)


def path_derivative(f: TestFunction, model: PdmpModel, y: State) -> float:
    """Derivative of f along the flow, by closed form or forward difference."""
    if f.path_derivative is not None:
        return f.path_derivative(y)
    step = min(FD_STEP, model.flow.horizon(y) / 2.0)
    if step <= 0.0:
        return 0.0
    ahead = flow_eval(model.flow, y, step)
    return (f.value(ahead) - f.value(y)) / step


def generator_apply(model: PdmpModel, f: TestFunction) -> PathFunctional:
    """The generator of the model applied to f, as an additive functional."""
    law, kernel = model.hazard, model.kernel

    def density(y):
        comp = kernel_integrate(kernel, y, f) - f.value(y)
        return path_derivative(f, model, y) + law.rate(y) * comp

    def atoms(x, lo, hi):
        fj = dict(f.jump_list(x, lo, hi))
        hz = dict(law.atom_list(x, lo, hi))
        out = []
        for o in sorted(set(fj) | set(hz)):
            v = fj.get(o, 0.0)
            delta = hz.get(o, 0.0)
            if delta:
                y = flow_eval(model.flow, x, o)
                v += delta * (kernel_integrate(kernel, y, f) - f.value(y))
            if v != 0.0:
                out.append((o, v))
        return out

    return PathFunctional(density=density, atoms=atoms)


def generator_continuous(gen: PathFunctional) -> PathFunctional:
    """The absolutely continuous part of a generator functional."""
    return replace(gen, atoms=None)


@dataclass(frozen=True)
class DomainReport:
    """Numerical evidence for the integrability condition on f."""

    value: float
    continuous_part: float
    atom_part: float
    converged: bool
    message: str = ""


def check_domain(model: PdmpModel, f: TestFunction, x: State, t_end: float,
                 tol: float = DEFAULT_TOL) -> DomainReport:
    """Evidence that the kernel compensation of f is integrable up to t_end.

    Integrates the absolute kernel discrepancy of f against the hazard
    over one flow window.  Evidence, not proof: quadrature failure is
    reported, not raised.
    """
    kernel = model.kernel

    def absdisc(y):
        fy = f.value(y)
        return kernel_integrate(kernel, y, lambda z: abs(f.value(z) - fy))

    window = min(t_end, model.flow.horizon(x))
    hz = model.hazard.atom_list(x, 0.0, window)
    try:
        cont = integrate_segments(
            lambda s: model.hazard.rate(flow_eval(model.flow, x, s))
            * absdisc(flow_eval(model.flow, x, s)),
            0.0, window, breakpoints=[o for o, _ in hz], tol=max(tol, 1e-8))
        atom = math.fsum(d * absdisc(flow_eval(model.flow, x, o)) for o, d in hz)
    except Exception as exc:  # quadrature or kernel failure is the finding
        return DomainReport(value=math.inf, continuous_part=math.inf,
                            atom_part=math.inf, converged=False, message=str(exc))
    return DomainReport(value=cont + atom, continuous_part=cont,
                        atom_part=atom, converged=math.isfinite(cont + atom))


def dynkin_process(model: PdmpModel, f: TestFunction, skeleton: Skeleton,
                   t: float, tol: float = DEFAULT_TOL) -> float:
    """f at the path state minus the accumulated generator: mean-preserving."""
    gen = generator_apply(model, f)
    return f.value(path_state(skeleton, model, t)) - eval_L(gen, skeleton, model, t, tol=tol)


def jump_variation(model: PdmpModel, f: TestFunction, skeleton: Skeleton,
                   t: float) -> float:
    """Summed discontinuity sizes of s -> f(state at s) over (0, t].

    Counts jumps of the path and scheduled path jumps of f, taking the
    left limit when both land on the same instant.  A finite sample
    value is evidence of summability on that path, nothing stronger.
    """
    if not (0.0 <= t <= skeleton.horizon):
        raise ValueError(f"time {t} outside [0, {skeleton.horizon}]")
    terms = []
    prev_time = 0.0
    prev_state = skeleton.x0
    for ev in skeleton.events:
        if ev.time > t:
            break
        window = ev.time - prev_time
        left = f.value(ev.pre)
        for o, dv in f.jump_list(prev_state, 0.0, window):
            if o == window:
                left -= dv
            else:
                terms.append(abs(dv))
        terms.append(abs(f.value(ev.post) - left))
        prev_time, prev_state = ev.time, ev.post
    if t > prev_time:
        terms.extend(abs(dv) for _, dv in
                     f.jump_list(prev_state, 0.0, t - prev_time))
    return math.fsum(terms)


def carre_du_champ(model: PdmpModel, f: TestFunction, g: TestFunction) -> PathFunctional:
    """Symmetric bilinear defect of the generator on the product f*g.

    Density: gen(f*g) - f*gen(g) - g*gen(f); atoms additionally subtract
    left values and the product of the two atom values.
    """
    flow = model.flow
    gen_f = generator_apply(model, f)
    gen_g = generator_apply(model, g)
    gen_fg = generator_apply(model, product_function(f, g, flow))

    def density(y):
        return gen_fg.density(y) - f.value(y) * gen_g.density(y) \
            - g.value(y) * gen_f.density(y)

    def atoms(x, lo, hi):
        afg = dict(gen_fg.atom_list(x, lo, hi))
        af = dict(gen_f.atom_list(x, lo, hi))
        ag = dict(gen_g.atom_list(x, lo, hi))
        fj = dict(f.jump_list(x, lo, hi))
        gj = dict(g.jump_list(x, lo, hi))
        out = []
        for o in sorted(set(afg) | set(af) | set(ag)):
            y = flow_eval(flow, x, o)
            f_left = f.value(y) - fj.get(o, 0.0)
            g_left = g.value(y) - gj.get(o, 0.0)
            v = afg.get(o, 0.0) - f_left * ag.get(o, 0.0) - g_left * af.get(o, 0.0) \
                - af.get(o, 0.0) * ag.get(o, 0.0)
            if v != 0.0:
                out.append((o, v))
        return out

    return PathFunctional(density=density, atoms=atoms)
