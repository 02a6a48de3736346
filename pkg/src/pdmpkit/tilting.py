"""Exponential change of measure driven by a positive test function.

The likelihood-ratio process of a tilt function h multiplies a ratio of
h along the path, an exponential of the accumulated continuous
generator-to-h ratio, and inverse jump factors at generator atoms.
Tilting a model reweights its hazard and kernel by h while keeping the
flow; the reverse tilt by 1/h inverts the likelihood ratio pathwise.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, replace
from typing import Callable, Optional

from .errors import (DegenerateJump, DomainViolation, EnvelopeViolation,
                     MissingEnvelope, MissingOracle, UnsupportedState, ZeroQh)
from .flow import PathFunctional, State, flow_eval, integrate_along_flow
from .generator import (TestFunction, generator_apply, generator_continuous,
                        path_derivative, product_function, reciprocal_function)
from .hazard import DENSITY_1D, DISCRETE, HazardLaw, JumpKernel, kernel_integrate
from .quadrature import DEFAULT_TOL
from .rng import UniformStream
from .simulate import PdmpModel, Skeleton, eval_L, path_state, segments


def stieltjes_exp(continuous: float, jumps) -> float:
    """Product-form exponential: exp of the continuous part times (1 + jump)."""
    value = math.exp(continuous)
    for j in jumps:
        factor = 1.0 + j
        if factor <= 0.0:
            raise DegenerateJump(f"jump {j} leaves no positive factor to invert")
        value *= factor
    return value


def _positive(name, v):
    if not (v > 0.0) or not math.isfinite(v):
        raise DomainViolation(f"{name} must be finite positive, got {v}")
    return v


def _segment_factors(model, h, gen_h, x, window, tol):
    """Continuous exponent and atom factors of one inter-jump segment."""
    atoms = gen_h.atom_list(x, 0.0, window)
    cont = integrate_along_flow(
        lambda y: gen_h.density(y) / h.value(y), model.flow, x, window,
        tol=tol, breakpoints=[o for o, _ in atoms])
    factors = []
    if atoms:
        hj = dict(h.jump_list(x, 0.0, window))
        for o, d_gen in atoms:
            y = flow_eval(model.flow, x, o)
            h_minus = _positive("left limit of h", h.value(y) - hj.get(o, 0.0))
            factor = 1.0 + d_gen / h_minus
            if factor <= 0.0:
                raise DomainViolation(
                    f"generator atom {d_gen} at offset {o} kills the jump factor")
            factors.append(factor)
    return cont, factors


def exp_martingale(model: PdmpModel, h: TestFunction, skeleton: Skeleton,
                   t: float, tol: float = DEFAULT_TOL) -> float:
    """Likelihood-ratio value of the tilt h at time t along one path."""
    gen_h = generator_apply(model, h)
    h0 = _positive("h at the start state", h.value(skeleton.x0))
    cont_total = 0.0
    prod = 1.0
    for x, window in segments(skeleton, t):
        _positive("h along the path", h.value(x))
        cont, factors = _segment_factors(model, h, gen_h, x, window, tol)
        cont_total += cont
        for f in factors:
            prod *= f
    ht = _positive("h at the evaluation state",
                   h.value(path_state(skeleton, model, t)))
    return (ht / h0) * math.exp(-cont_total) / prod


def hunt_martingale(model: PdmpModel, h: TestFunction, skeleton: Skeleton,
                    t: float, tol: float = DEFAULT_TOL) -> float:
    """Atom-free special form: h-ratio times the continuous exponent only.

    Valid when neither the hazard nor h has atoms along the path; the
    continuous part is routed through the additive-functional evaluator
    rather than the segment walk, so agreement is a real cross-check.
    """
    gen_h = generator_continuous(generator_apply(model, h))
    ratio = PathFunctional(density=lambda y: gen_h.density(y) / h.value(y))
    cont = eval_L(ratio, skeleton, model, t, tol=tol)
    h0 = _positive("h at the start state", h.value(skeleton.x0))
    ht = h.value(path_state(skeleton, model, t))
    return (ht / h0) * math.exp(-cont)


def ito_martingale(model: PdmpModel, h: TestFunction, skeleton: Skeleton,
                   t: float, tol: float = DEFAULT_TOL) -> float:
    """Plain time-integral special form for purely rate-driven models."""
    h0 = _positive("h at the start state", h.value(skeleton.x0))
    cont = 0.0
    for x, window in segments(skeleton, t):
        cont += integrate_along_flow(
            lambda y: (path_derivative(h, model, y)
                       + model.hazard.rate(y)
                       * (kernel_integrate(model.kernel, y, h) - h.value(y)))
            / h.value(y),
            model.flow, x, window, tol=tol)
    ht = h.value(path_state(skeleton, model, t))
    return (ht / h0) * math.exp(-cont)


def step_martingale(model: PdmpModel, h: TestFunction, skeleton: Skeleton,
                    t: float, tol: float = DEFAULT_TOL) -> float:
    """Product-only special form for purely atomic hazards."""
    gen_h = generator_apply(model, h)
    h0 = _positive("h at the start state", h.value(skeleton.x0))
    prod = 1.0
    for x, window in segments(skeleton, t):
        _, factors = _segment_factors(model, h, gen_h, x, window, tol)
        for f in factors:
            prod *= f
    ht = h.value(path_state(skeleton, model, t))
    return (ht / h0) / prod


# ---------------------------------------------------------------------------
# good-function evidence

@dataclass(frozen=True)
class GoodFunctionReport:
    """Numerical evidence that a tilt function is usable.

    Flags summarize positivity and boundedness of h along probe paths,
    the atom factor bounds, and local finiteness of the continuous
    variation, under either sufficient route (ratio variation, or plain
    variation with h bounded away from zero).  Evidence, not proof.
    """

    ok: bool
    positivity_ok: bool
    h_sup: float
    h_inf: float
    b_min: float
    b_max: float
    max_atoms: int
    ratio_variation: float
    cont_variation: float
    c1_ok: bool
    c2_ok: bool
    n_paths: int
    note: str = ""


def check_good_function(model: PdmpModel, h: TestFunction, x0: State,
                        t_end: float, n_probe: int = 32, seed: int = 0,
                        grid: int = 33) -> GoodFunctionReport:
    """Probe simulated paths and grade h against the usability conditions."""
    from .simulate import simulate_skeleton
    from .rng import replication_streams

    gen_h = generator_apply(model, h)
    h_sup, h_inf = -math.inf, math.inf
    b_min, b_max = math.inf, -math.inf
    seen_b = False
    max_atoms = 0
    ratio_var = 0.0
    cont_var = 0.0
    positivity = True
    note = ""
    n_done = 0
    for rep in range(n_probe):
        sk = simulate_skeleton(model, x0, t_end, replication_streams(seed, rep))
        n_done += 1
        n_atoms = 0
        for x, window in segments(sk, t_end):
            for k in range(grid):
                y = flow_eval(model.flow, x, window * k / (grid - 1))
                hy = h.value(y)
                if not (hy > 0.0 and math.isfinite(hy)):
                    positivity = False
                h_sup = max(h_sup, hy)
                h_inf = min(h_inf, hy)
            atoms = gen_h.atom_list(x, 0.0, window)
            hj = dict(h.jump_list(x, 0.0, window))
            n_atoms += len(atoms)
            for o, d_gen in atoms:
                y = flow_eval(model.flow, x, o)
                h_minus = h.value(y) - hj.get(o, 0.0)
                if h_minus <= 0.0:
                    positivity = False
                    continue
                b = d_gen / h_minus
                b_min, b_max = min(b_min, b), max(b_max, b)
                seen_b = True
            try:
                ratio_var += integrate_along_flow(
                    lambda y: abs(gen_h.density(y)) / h.value(y),
                    model.flow, x, window, tol=1e-8)
                cont_var += integrate_along_flow(
                    lambda y: abs(gen_h.density(y)),
                    model.flow, x, window, tol=1e-8)
            except Exception as exc:
                ratio_var = cont_var = math.inf
                note = f"variation probe failed: {exc}"
        max_atoms = max(max_atoms, n_atoms)
    if not seen_b:
        b_min = b_max = 0.0
    bounded = math.isfinite(h_sup)
    factors_ok = b_min > -1.0 and math.isfinite(b_max)
    c1 = positivity and bounded and factors_ok and math.isfinite(ratio_var)
    c2 = positivity and bounded and factors_ok and math.isfinite(cont_var) \
        and h_inf > 0.0
    return GoodFunctionReport(
        ok=c1 or c2, positivity_ok=positivity, h_sup=h_sup, h_inf=h_inf,
        b_min=b_min, b_max=b_max, max_atoms=max_atoms,
        ratio_variation=ratio_var, cont_variation=cont_var,
        c1_ok=c1, c2_ok=c2, n_paths=n_done, note=note)


# ---------------------------------------------------------------------------
# tilting the model

def _times_h(f, h: TestFunction, flow):
    """Product f*h as a test function when possible, else a plain callable."""
    if isinstance(f, TestFunction):
        return product_function(f, h, flow)
    return lambda z: f(z) * h.value(z)


def _qh_fn(kernel: JumpKernel, h: TestFunction):
    def qh(y):
        value = kernel_integrate(kernel, y, h)
        if not (value > 0.0) or not math.isfinite(value):
            raise ZeroQh(f"kernel average of the tilt function is {value} at {y}")
        return value
    return qh


def _atom_denominator(h_at, delta, qh_at):
    """Left limit of h plus the generator atom of h.

    The path jump of h cancels out exactly, leaving the delta-mixture of
    h and its kernel average; positive whenever both are.
    """
    denom = (1.0 - delta) * h_at + delta * qh_at
    if denom <= 0.0:
        raise DomainViolation(f"tilt denominator {denom} not positive")
    return denom


def _tilted_atom(delta, h_at, qh_at):
    """Atom value after tilting; a forced atom stays exactly forced."""
    if delta >= 1.0:
        return 1.0
    tilted = delta * qh_at / _atom_denominator(h_at, delta, qh_at)
    return min(tilted, 1.0)


def _tilted_hazard(model: PdmpModel, h: TestFunction, qh) -> HazardLaw:
    law, flow = model.hazard, model.flow
    if law.tilt_factory is not None:
        built = law.tilt_factory(h, qh)
        if built is not None:
            return built

    def rate(y):
        return law.rate(y) * qh(y) / h.value(y)

    def atoms(x, lo, hi):
        out = []
        for o, delta in law.atom_list(x, lo, hi):
            y = flow_eval(flow, x, o)
            out.append((o, _tilted_atom(delta, h.value(y), qh(y))))
        return out

    return HazardLaw(rate=rate, atoms=atoms if law.atoms is not None else None)


def _tilted_kernel(model: PdmpModel, h: TestFunction, qh) -> JumpKernel:
    kernel, flow = model.kernel, model.flow
    if kernel.tilted_factory is not None:
        built = kernel.tilted_factory(h)
        if built is not None:
            return built
    if kernel.kind == DISCRETE:
        def support(y):
            qh_y = qh(y)
            return [(z, p * h.value(z) / qh_y) for z, p in kernel.support(y)]
        return JumpKernel(kind=DISCRETE, support=support)
    if kernel.kind == DENSITY_1D:
        if kernel.tilt_envelope is None:
            raise MissingEnvelope(
                "tilting a density kernel needs a rejection envelope or a factory")
        if kernel.sampler is None:
            raise UnsupportedState(
                "tilting a density kernel by rejection needs a base sampler")

        def sampler(y, stream: UniformStream):
            env = kernel.tilt_envelope(y)
            while True:
                z = kernel.sampler(y, stream)
                hz = h.value(z)
                if hz > env * (1.0 + 1e-12):
                    raise EnvelopeViolation(
                        f"tilt function {hz} exceeds envelope {env} at {z}")
                if stream.next() * env <= hz:
                    return z

        def pdf(y, z):
            return kernel.pdf(y, z) * h.value(kernel.to_state(y, z)) / qh(y)

        def oracle(y, f):
            return kernel_integrate(kernel, y, _times_h(f, h, flow)) / qh(y)

        return JumpKernel(kind=DENSITY_1D, sampler=sampler, pdf=pdf,
                          to_state=kernel.to_state, bounds=kernel.bounds,
                          oracle=oracle)
    raise MissingOracle(
        "tilting a moment-oracle kernel needs a declared tilted factory")


def tilt_model(model: PdmpModel, h: TestFunction) -> PdmpModel:
    """The model reweighted by h: same flow, tilted hazard and kernel.

    The caller is responsible for h being usable (see
    check_good_function); this routine only enforces structural
    requirements of the kernel kinds.
    """
    qh = _qh_fn(model.kernel, h)
    return replace(model,
                   hazard=_tilted_hazard(model, h, qh),
                   kernel=_tilted_kernel(model, h, qh))


# ---------------------------------------------------------------------------
# the tilted generator, three ways

def _direct_form(model, h, f, qh):
    law, kernel, flow = model.hazard, model.kernel, model.flow
    fh = _times_h(f, h, flow)

    def density(y):
        comp = kernel_integrate(kernel, y, fh) - f.value(y) * qh(y)
        return path_derivative(f, model, y) + law.rate(y) * comp / h.value(y)

    def atoms(x, lo, hi):
        fj = dict(f.jump_list(x, lo, hi))
        hz = dict(law.atom_list(x, lo, hi))
        out = []
        for o in sorted(set(fj) | set(hz)):
            v = fj.get(o, 0.0)
            delta = hz.get(o, 0.0)
            if delta:
                y = flow_eval(flow, x, o)
                qh_at = qh(y)
                denom = _atom_denominator(h.value(y), delta, qh_at)
                comp = kernel_integrate(kernel, y, fh) - f.value(y) * qh_at
                v += delta * comp / denom
            if v != 0.0:
                out.append((o, v))
        return out

    return PathFunctional(density=density, atoms=atoms)


def _ratio_form(model, h, f, qh):
    law, flow = model.hazard, model.flow
    gen_h = generator_apply(model, h)
    gen_fh = generator_apply(model, product_function(f, h, flow))

    def density(y):
        return (gen_fh.density(y) - f.value(y) * gen_h.density(y)) / h.value(y)

    def atoms(x, lo, hi):
        a_fh = dict(gen_fh.atom_list(x, lo, hi))
        a_h = dict(gen_h.atom_list(x, lo, hi))
        fj = dict(f.jump_list(x, lo, hi))
        hz = dict(law.atom_list(x, lo, hi))
        out = []
        for o in sorted(set(a_fh) | set(a_h) | set(fj)):
            y = flow_eval(flow, x, o)
            delta = hz.get(o, 0.0)
            qh_at = qh(y) if delta else 0.0
            denom = _atom_denominator(h.value(y), delta, qh_at)
            f_left = f.value(y) - fj.get(o, 0.0)
            v = (a_fh.get(o, 0.0) - f_left * a_h.get(o, 0.0)) / denom
            if v != 0.0:
                out.append((o, v))
        return out

    return PathFunctional(density=density, atoms=atoms)


def _bracket_form(model, h, f, qh):
    law, flow = model.hazard, model.flow
    gen_f = generator_apply(model, f)
    gen_h = generator_apply(model, h)
    gen_fh = generator_apply(model, product_function(f, h, flow))

    def density(y):
        bracket = gen_fh.density(y) - f.value(y) * gen_h.density(y) \
            - h.value(y) * gen_f.density(y)
        return gen_f.density(y) + bracket / h.value(y)

    def atoms(x, lo, hi):
        a_f = dict(gen_f.atom_list(x, lo, hi))
        a_h = dict(gen_h.atom_list(x, lo, hi))
        a_fh = dict(gen_fh.atom_list(x, lo, hi))
        fj = dict(f.jump_list(x, lo, hi))
        hj = dict(h.jump_list(x, lo, hi))
        hz = dict(law.atom_list(x, lo, hi))
        out = []
        for o in sorted(set(a_f) | set(a_h) | set(a_fh)):
            y = flow_eval(flow, x, o)
            h_at = h.value(y)
            delta = hz.get(o, 0.0)
            qh_at = qh(y) if delta else 0.0
            denom = _atom_denominator(h_at, delta, qh_at)
            f_left = f.value(y) - fj.get(o, 0.0)
            h_left = h_at - hj.get(o, 0.0)
            da_f, da_h = a_f.get(o, 0.0), a_h.get(o, 0.0)
            bracket = a_fh.get(o, 0.0) - f_left * da_h - h_left * da_f - da_f * da_h
            v = da_f + bracket / denom
            if v != 0.0:
                out.append((o, v))
        return out

    return PathFunctional(density=density, atoms=atoms)


_FORMS = {"direct": _direct_form, "ratio": _ratio_form, "bracket": _bracket_form}


def tilted_generator(model: PdmpModel, h: TestFunction, f: TestFunction,
                     form: str = "direct") -> PathFunctional:
    """Generator of the h-tilted model applied to f, via the chosen route.

    ``direct`` reweights the kernel compensation, ``ratio`` divides the
    generator of f*h, ``bracket`` corrects the original generator by the
    carre-du-champ term; all three agree as interval measures.
    """
    try:
        build = _FORMS[form]
    except KeyError:
        raise ValueError(f"unknown form {form!r}, expected one of {sorted(_FORMS)}")
    return build(model, h, f, _qh_fn(model.kernel, h))


def reverse_martingale(tilted: PdmpModel, h: TestFunction, skeleton: Skeleton,
                       t: float, tol: float = DEFAULT_TOL) -> float:
    """Likelihood ratio of the reverse tilt 1/h, evaluated under the tilted model.

    Pathwise inverse of the forward likelihood ratio on any common path.
    """
    return exp_martingale(tilted, reciprocal_function(h, tilted.flow),
                          skeleton, t, tol=tol)
