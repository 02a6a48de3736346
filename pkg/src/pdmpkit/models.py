"""Ready-made model bundles with tilt functions and independent oracles.

Each factory returns a ModelBundle: the model itself, a start state, a
recommended tilt function, named observables, and (where available) an
oracle that computes reference expectations without simulation.  Bundles
record their construction parameters so worker processes can rebuild
them by name.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable, Optional

import numpy as np

from .errors import BadParameters, BadStochasticMatrix, MissingOracle, StiffnessFailure
from .flow import Flow, State, boundary_state, interior
from .generator import TestFunction, constant_function, exp_function, label_function
from .hazard import DISCRETE, MOMENT_ORACLE, HazardLaw, JumpKernel
from .simulate import PdmpModel


@dataclass
class ModelBundle:
    """A model plus everything the verification harness needs around it."""

    name: str
    params: dict
    model: PdmpModel
    x0: State
    recommended_h: TestFunction
    h_options: dict
    observables: dict
    dynkin_f: TestFunction
    oracle: Optional[Callable] = None
    aux: dict = field(default_factory=dict)


def _label_states(n):
    return [State(coords=(), label=k) for k in range(n)]


def _check_masses(masses):
    P = np.asarray(masses, dtype=float)
    if P.ndim != 2 or P.shape[0] != P.shape[1]:
        raise BadStochasticMatrix(f"mass map must be square, got shape {P.shape}")
    if np.any(P < 0.0):
        raise BadStochasticMatrix("negative kernel mass")
    if np.any(np.diag(P) != 0.0):
        raise BadStochasticMatrix("self-jump mass must be zero")
    rows = P.sum(axis=1)
    if np.max(np.abs(rows - 1.0)) > 1e-12:
        raise BadStochasticMatrix(f"rows must sum to one, got {rows}")
    return P


# ---------------------------------------------------------------------------
# finite-state chain with exponential holding times

_CHAIN_RATES = (1.2, 0.8, 1.5)
_CHAIN_MASSES = ((0.0, 0.6, 0.4), (0.5, 0.0, 0.5), (0.25, 0.75, 0.0))
_CHAIN_H = (1.0, 2.0, 0.5)
_CHAIN_F = (0.3, -1.0, 2.2)
_CHAIN_G = (1.0, 0.2, -0.7)


def make_ctmc(rates=_CHAIN_RATES, masses=_CHAIN_MASSES, h_values=_CHAIN_H,
              f_values=_CHAIN_F, g_values=_CHAIN_G, x0_label=0) -> ModelBundle:
    """Continuous-time chain on labels 0..n-1: constant flow, rate jumps."""
    rates = tuple(float(r) for r in rates)
    P = _check_masses(masses)
    n = len(rates)
    if P.shape[0] != n:
        raise BadStochasticMatrix("rate vector and mass map disagree on size")
    if min(rates) < 0.0:
        raise BadParameters("negative jump rate")
    states = _label_states(n)

    flow = Flow(advance=lambda x, t: x, constant=True)
    law = HazardLaw(rate=lambda y: rates[y.label],
                    cumulative_rate=lambda x, t: rates[x.label] * t,
                    inverse_cumulative_rate=lambda x, target: target / rates[x.label])
    support_table = [
        [(states[j], P[k, j]) for j in range(n) if P[k, j] > 0.0] for k in range(n)
    ]
    kernel = JumpKernel(kind=DISCRETE, support=lambda y: support_table[y.label])
    model = PdmpModel(flow=flow, hazard=law, kernel=kernel, dim=0,
                      labels=tuple(range(n)))

    G = P * np.asarray(rates)[:, None]
    np.fill_diagonal(G, -np.asarray(rates))
    h = label_function(h_values)
    bundle = ModelBundle(
        name="ctmc",
        params={"rates": rates, "masses": tuple(map(tuple, P.tolist())),
                "h_values": tuple(map(float, h_values)),
                "f_values": tuple(map(float, f_values)),
                "g_values": tuple(map(float, g_values)),
                "x0_label": int(x0_label)},
        model=model, x0=states[int(x0_label)],
        recommended_h=h,
        h_options={"recommended": h, "unit": constant_function(1.0)},
        observables={"g": label_function(g_values),
                     "f": label_function(f_values),
                     "occupied0": label_function([1.0] + [0.0] * (n - 1))},
        dynkin_f=label_function(f_values),
        aux={"generator_matrix": G, "states": states,
             "h_vector": np.asarray(h_values, dtype=float)})
    bundle.oracle = lambda hh, gg, t, x0=None: ctmc_feynman_kac_oracle(
        bundle, hh, gg, t, x0=x0)
    return bundle


def _rk4_propagate(M, v0, t, steps):
    v = v0.copy()
    dt = t / steps
    for _ in range(steps):
        k1 = M @ v
        k2 = M @ (v + 0.5 * dt * k1)
        k3 = M @ (v + 0.5 * dt * k2)
        k4 = M @ (v + dt * k3)
        v = v + (dt / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4)
    return v


def ctmc_feynman_kac_oracle(bundle: ModelBundle, h: TestFunction, g: TestFunction,
                            t: float, x0: Optional[State] = None,
                            rel_tol: float = 1e-10) -> float:
    """Reference value of E[g at time t, weighted by the tilt ratio of h].

    Integrates the weighted backward equation with the potential taken
    pointwise from the generator-to-h ratio, by fixed-step fourth-order
    stepping, doubling the step count until two runs agree to rel_tol.
    """
    G = bundle.aux["generator_matrix"]
    states = bundle.aux["states"]
    hv = np.array([h.value(s) for s in states])
    gv = np.array([g.value(s) for s in states])
    if np.any(hv <= 0.0):
        raise BadParameters("tilt function must be positive on all labels")
    potential = (G @ hv) / hv
    M = G - np.diag(potential)
    v0 = gv * hv
    start = (bundle.x0 if x0 is None else x0).label
    prev = None
    steps = 64
    while steps <= 1 << 22:
        v = _rk4_propagate(M, v0, t, steps)
        if prev is not None:
            scale = max(float(np.max(np.abs(v))), 1e-30)
            if float(np.max(np.abs(v - prev))) <= rel_tol * scale:
                return float(v[start] / hv[start])
        prev = v
        steps *= 2
    raise StiffnessFailure("step doubling did not converge for the chain oracle")


def doob_transform_matrix(G, h_vector):
    """The generator matrix after tilting by a positive vector.

    Off-diagonal entries are reweighted by the ratio of h values; the
    diagonal is corrected so rows sum to zero again.
    """
    hv = np.asarray(h_vector, dtype=float)
    G = np.asarray(G, dtype=float)
    tilted = G * hv[None, :] / hv[:, None]
    tilted -= np.diag((G @ hv) / hv)
    return tilted


# ---------------------------------------------------------------------------
# risk reserve with linear premium inflow and exponential claims

def _cl_hazard(lam: float, mu_eff: float) -> HazardLaw:
    """Constant-rate law that stays in closed form under exponential tilts."""

    def factory(h, qh):
        fam = getattr(h, "family", None)
        if fam is None or fam[0] != "exp":
            return None
        a = fam[1]
        if mu_eff + a <= 0.0:
            return None
        return _cl_hazard(lam * mu_eff / (mu_eff + a), mu_eff + a)

    return HazardLaw(rate=lambda y: lam,
                     cumulative_rate=lambda x, t: lam * t,
                     inverse_cumulative_rate=lambda x, target: target / lam,
                     tilt_factory=factory)


def _cl_kernel(mu_eff: float) -> JumpKernel:
    """Claims subtract an exponential amount with rate mu_eff."""

    def sampler(y, stream):
        return interior(y.x - (-math.log(stream.next())) / mu_eff)

    def oracle(y, f):
        fam = getattr(f, "family", None)
        if fam is None:
            return None
        if fam[0] == "const":
            return fam[1]
        if fam[0] == "exp":
            a, s = fam[1], fam[2]
            if mu_eff + a <= 0.0:
                raise MissingOracle(
                    f"claim moment diverges for exponent {a} at claim rate {mu_eff}")
            return s * math.exp(a * y.x) * mu_eff / (mu_eff + a)
        return None

    def tilted_factory(h):
        fam = getattr(h, "family", None)
        if fam is None or fam[0] != "exp":
            return None
        a = fam[1]
        if mu_eff + a <= 0.0:
            return None
        return _cl_kernel(mu_eff + a)

    return JumpKernel(
        kind=MOMENT_ORACLE,
        sampler=sampler,
        oracle=oracle,
        pdf=lambda y, z: mu_eff * math.exp(-mu_eff * (y.x - z)),
        to_state=lambda y, z: interior(z),
        bounds=lambda y: (-math.inf, y.x),
        tilted_factory=tilted_factory)


def cl_drift_exponent(c, lam, mu, theta) -> float:
    """Exponential growth rate of the tilt ratio for the reserve model."""
    return -theta * c + lam * (mu / (mu - theta) - 1.0)


def make_cramer_lundberg(c=1.0, lam=1.0, mu=2.0, u0=2.5, theta=0.5) -> ModelBundle:
    """Reserve grows at speed c, claims arrive at rate lam, sizes Exp(mu).

    theta < mu selects the recommended exponential tilt; theta equal to
    the adjustment coefficient mu - lam/c flips the drift toward ruin,
    but its likelihood ratio has infinite variance once 2 theta >= mu,
    so keep the default below mu/2 for plain martingale checks.
    """
    if min(c, lam, mu) <= 0.0:
        raise BadParameters("c, lam and mu must be positive")
    if theta >= mu:
        raise BadParameters(f"tilt exponent {theta} must stay below mu={mu}")

    flow = Flow(advance=lambda x, t: interior(x.x + c * t))
    model = PdmpModel(flow=flow, hazard=_cl_hazard(lam, mu), kernel=_cl_kernel(mu))
    h = exp_function(-theta, drift=c)
    kappa = cl_drift_exponent(c, lam, mu, theta)

    def ruin_by(skeleton, model_, t):
        level = skeleton.x0.x
        for ev in skeleton.events:
            if ev.time > t:
                break
            level = min(level, ev.post.x)
        return 1.0 if level < 0.0 else 0.0

    def martingale_path_oracle(skeleton, model_, t):
        from .simulate import path_state
        xt = path_state(skeleton, model_, t).x
        return math.exp(-theta * (xt - skeleton.x0.x) - kappa * t)

    return ModelBundle(
        name="cramer-lundberg",
        params={"c": float(c), "lam": float(lam), "mu": float(mu),
                "u0": float(u0), "theta": float(theta)},
        model=model, x0=interior(u0),
        recommended_h=h,
        h_options={"recommended": h, "unit": constant_function(1.0)},
        observables={"ruin": ruin_by,
                     "exp_reserve": exp_function(-0.3, drift=c),
                     "reserve_level": exp_function(0.0, drift=c)},
        dynkin_f=exp_function(-0.4, drift=c),
        aux={"kappa": kappa, "theta": theta,
             "adjustment_coefficient": mu - lam / c,
             "martingale_path_oracle": martingale_path_oracle})


# ---------------------------------------------------------------------------
# interval with forced reset at the right end

def _br_hazard(scale: float, slope: float, reset: float) -> HazardLaw:
    """Rate scale*exp(slope*x) with a forced atom at the interval end.

    Closed under exponential tilts because the kernel is degenerate at
    the reset point.
    """

    def atoms(x, lo, hi):
        c = 1.0 - x.x
        return [(c, 1.0)] if lo < c <= hi else []

    def cumulative(x, t):
        if slope == 0.0:
            return scale * t
        level = scale * math.exp(slope * x.x)
        return level * math.expm1(slope * t) / slope

    def inverse(x, target):
        if slope == 0.0:
            return target / scale
        level = scale * math.exp(slope * x.x)
        return math.log1p(slope * target / level) / slope

    def factory(h, qh):
        fam = getattr(h, "family", None)
        if fam is None or fam[0] != "exp":
            return None
        a = fam[1]
        # kernel is degenerate at the reset point: qh/h = exp(a*(reset - x))
        return _br_hazard(scale * math.exp(a * reset), slope - a, reset)

    return HazardLaw(rate=lambda y: scale * math.exp(slope * y.x),
                     atoms=atoms, cumulative_rate=cumulative,
                     inverse_cumulative_rate=inverse, tilt_factory=factory)


def make_boundary_reset(rate0=0.8, reset=0.2, x0=0.3) -> ModelBundle:
    """Unit-speed motion on [0, 1) with a forced jump to reset at the end."""
    if rate0 < 0.0 or not (0.0 <= reset < 1.0) or not (0.0 <= x0 < 1.0):
        raise BadParameters("need rate0 >= 0 and reset, x0 inside [0, 1)")

    def horizon(x):
        return 0.0 if x.tag == "boundary" else 1.0 - x.x

    flow = Flow(advance=lambda x, t: interior(x.x + t), horizon=horizon,
                boundary_limit=lambda x: boundary_state(1.0))
    target = interior(reset)
    kernel = JumpKernel(kind=DISCRETE, support=lambda y: [(target, 1.0)])
    model = PdmpModel(flow=flow, hazard=_br_hazard(rate0, 0.0, reset), kernel=kernel)
    h = exp_function(0.4, drift=1.0)
    return ModelBundle(
        name="boundary-reset",
        params={"rate0": float(rate0), "reset": float(reset), "x0": float(x0)},
        model=model, x0=interior(x0),
        recommended_h=h,
        h_options={"recommended": h, "unit": constant_function(1.0)},
        observables={"position": exp_function(0.0, drift=1.0),
                     "exp_position": exp_function(0.25, drift=1.0)},
        dynkin_f=exp_function(0.25, drift=1.0))


# ---------------------------------------------------------------------------
# additive growth, multiplicative cutback

def _aimd_hazard(a0: float, a1: float, m: float, growth: float, cut: float) -> HazardLaw:
    """Rate (a0 + a1*x)*exp(m*x), closed under exponential tilts."""

    def rate(y):
        return (a0 + a1 * y.x) * math.exp(m * y.x)

    def cumulative(x, t):
        A = a0 + a1 * x.x
        B = a1 * growth
        D = m * growth
        if D == 0.0:
            inner = A * t + 0.5 * B * t * t
        else:
            e = math.exp(D * t)
            inner = (e * (B * D * t + A * D - B) - (A * D - B)) / (D * D)
        return math.exp(m * x.x) * inner

    def factory(h, qh):
        fam = getattr(h, "family", None)
        if fam is None or fam[0] != "exp":
            return None
        # kernel is degenerate at cut*x: qh/h = exp(a*(cut-1)*x)
        return _aimd_hazard(a0, a1, m + fam[1] * (cut - 1.0), growth, cut)

    return HazardLaw(rate=rate, cumulative_rate=cumulative, tilt_factory=factory)


def make_aimd(growth=1.0, cut=0.5, loss_rate=(0.4, 0.3), eta=0.25, x0=1.0) -> ModelBundle:
    """Linear growth at speed growth; losses cut the state to cut*x.

    loss_rate is either an (intercept, slope) pair for an affine rate,
    kept in closed form, or a plain callable on states.
    """
    if growth < 0.0 or not (0.0 < cut < 1.0):
        raise BadParameters("need growth >= 0 and cut inside (0, 1)")
    flow = Flow(advance=lambda x, t: interior(x.x + growth * t))
    if loss_rate is None:
        raise BadParameters("loss_rate is required (affine pair or callable)")
    if callable(loss_rate):
        law = HazardLaw(rate=loss_rate)
        params_rate = None
    else:
        a0, a1 = (float(v) for v in loss_rate)
        if a0 < 0.0 or a1 < 0.0 or a0 + a1 * x0 <= 0.0:
            raise BadParameters("affine loss rate must be positive from x0 onward")
        law = _aimd_hazard(a0, a1, 0.0, growth, cut)
        params_rate = (a0, a1)
    kernel = JumpKernel(
        kind=DISCRETE, support=lambda y: [(interior(cut * y.x), 1.0)])
    model = PdmpModel(flow=flow, hazard=law, kernel=kernel)
    h = exp_function(eta, drift=growth)
    return ModelBundle(
        name="aimd",
        params={"growth": float(growth), "cut": float(cut),
                "loss_rate": params_rate, "eta": float(eta), "x0": float(x0)},
        model=model, x0=interior(x0),
        recommended_h=h,
        h_options={"recommended": h, "unit": constant_function(1.0)},
        observables={"window": exp_function(0.0, drift=growth),
                     "exp_window": exp_function(-0.2, drift=growth)},
        dynkin_f=exp_function(-0.2, drift=growth))


# ---------------------------------------------------------------------------
# discrete clock chain: purely atomic hazard on a periodic schedule

_STEP_PROBS = (0.4, 0.7, 0.55)
_STEP_H = (1.0, 1.7, 0.6)
_STEP_F = (0.8, -0.5, 1.4)


def make_step_chain(period=0.25, jump_probs=_STEP_PROBS, masses=_CHAIN_MASSES,
                    h_values=_STEP_H, f_values=_STEP_F, x0_label=0) -> ModelBundle:
    """Chain that can only jump at clock ticks, each tick with label-set odds.

    The continuous coordinate is the age since the last jump, so the
    tick schedule restarts cleanly at jumps.  The hazard is purely
    atomic, which makes every tilt ratio a plain product over ticks.
    """
    if period <= 0.0:
        raise BadParameters("period must be positive")
    probs = tuple(float(p) for p in jump_probs)
    if any(not 0.0 < p < 1.0 for p in probs):
        raise BadParameters("tick jump odds must lie strictly inside (0, 1)")
    P = _check_masses(masses)
    n = len(probs)
    if P.shape[0] != n:
        raise BadStochasticMatrix("odds vector and mass map disagree on size")

    flow = Flow(advance=lambda x, t: State(coords=(x.x + t,), label=x.label))

    def atoms(x, lo, hi):
        age = x.x
        first = math.floor((age + lo) / period) + 1
        out = []
        k = first
        while k * period - age <= hi:
            o = k * period - age
            if o > lo:
                out.append((o, probs[x.label]))
            k += 1
        return out

    law = HazardLaw(rate=lambda y: 0.0, atoms=atoms,
                    cumulative_rate=lambda x, t: 0.0)
    fresh = [State(coords=(0.0,), label=j) for j in range(n)]
    support_table = [
        [(fresh[j], P[k, j]) for j in range(n) if P[k, j] > 0.0] for k in range(n)
    ]
    kernel = JumpKernel(kind=DISCRETE, support=lambda y: support_table[y.label])
    model = PdmpModel(flow=flow, hazard=law, kernel=kernel, labels=tuple(range(n)))
    h = label_function(h_values)
    bundle = ModelBundle(
        name="step-chain",
        params={"period": float(period), "jump_probs": probs,
                "masses": tuple(map(tuple, P.tolist())),
                "h_values": tuple(map(float, h_values)),
                "f_values": tuple(map(float, f_values)),
                "x0_label": int(x0_label)},
        model=model, x0=fresh[int(x0_label)],
        recommended_h=h,
        h_options={"recommended": h, "unit": constant_function(1.0)},
        observables={"f": label_function(f_values)},
        dynkin_f=label_function(f_values),
        aux={"masses": P, "jump_probs": probs,
             "h_vector": np.asarray(h_values, dtype=float)})
    bundle.oracle = lambda hh, gg, t, x0=None: step_chain_oracle(
        bundle, hh, gg, t, x0=x0)
    return bundle


def step_chain_oracle(bundle: ModelBundle, h: TestFunction, g: TestFunction,
                      t: float, x0: Optional[State] = None) -> float:
    """Exact tick recursion for E[g at time t, weighted by the tilt ratio].

    Between ticks nothing moves; at each tick the weight picks up the
    inverse atom factor and, on a jump, the ratio of h values.
    """
    period = bundle.params["period"]
    probs = np.asarray(bundle.aux["jump_probs"])
    P = bundle.aux["masses"]
    n = len(probs)
    fresh = [State(coords=(0.0,), label=j) for j in range(n)]
    hv = np.array([h.value(s) for s in fresh])
    gv = np.array([g.value(s) for s in fresh])
    qh = P @ hv
    b = probs * (qh - hv) / hv
    transfer = (np.diag((1.0 - probs)) + (probs[:, None] * P * hv[None, :] / hv[:, None]))
    transfer = transfer / (1.0 + b)[:, None]
    start = (bundle.x0 if x0 is None else x0).label
    m = np.zeros(n)
    m[start] = 1.0
    ticks = math.floor(t / period + 1e-12)
    for _ in range(ticks):
        m = transfer.T @ m
    return float(m @ gv)


# ---------------------------------------------------------------------------
# registry

REGISTRY = {
    "ctmc": make_ctmc,
    "cramer-lundberg": make_cramer_lundberg,
    "boundary-reset": make_boundary_reset,
    "aimd": make_aimd,
    "step-chain": make_step_chain,
}


def get_bundle(name: str, **overrides) -> ModelBundle:
    """Build a registered bundle, optionally overriding factory arguments."""
    key = name.replace("_", "-")
    if key not in REGISTRY:
        raise KeyError(f"unknown model {name!r}, have {sorted(REGISTRY)}")
    return REGISTRY[key](**overrides)
