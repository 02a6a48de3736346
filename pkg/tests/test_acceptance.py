"""End-to-end verification battery.

Each test prints one summary line; together they cover the full
contract: trajectory algebra, martingale neutrality against closed-form
and ODE oracles, generator centering, measure-change consistency with a
rare-event payoff, the pathwise reverse identity, agreement of the
three tilted-generator routes, reduction to the special-case likelihood
ratios, structural invariants of tilting, and bit-level determinism
across worker counts.
"""
import math
import time

import numpy as np
import pytest

from pdmpkit.flow import af_eval, flow_eval, interior
from pdmpkit.generator import constant_function, generator_apply, reciprocal_function
from pdmpkit.harness import (
    dumps_report, experiment_dynkin_check, experiment_generator_forms,
    experiment_is_consistency, experiment_martingale_check,
    experiment_reverse_check,
)
from pdmpkit.hazard import kernel_integrate, survival
from pdmpkit.models import (
    REGISTRY, ctmc_feynman_kac_oracle, doob_transform_matrix, get_bundle,
)
from pdmpkit.rng import AUXILIARY, UniformStream, replication_streams
from pdmpkit.simulate import path_state, simulate_skeleton
from pdmpkit.tilting import (
    exp_martingale, hunt_martingale, ito_martingale, step_martingale,
    tilt_model, tilted_generator,
)

ALL = ("aimd", "boundary-reset", "cramer-lundberg", "ctmc", "step-chain")


def _announce(label, ok, detail=""):
    tag = "PASS" if ok else "FAIL"
    print(f"[{tag}] {label}" + (f" ({detail})" if detail else ""))
    assert ok, f"{label}: {detail}"


def random_state(bundle, stream):
    name = bundle.name
    if name == "ctmc":
        return interior(label=int(stream.next() * 3) % 3)
    if name == "cramer-lundberg":
        return interior(0.2 + 7.0 * stream.next())
    if name == "boundary-reset":
        return interior(0.98 * stream.next())
    if name == "aimd":
        return interior(0.05 + 4.0 * stream.next())
    phase = int(stream.next() * 3) % 3
    return interior(stream.next() * bundle.params["period"], label=phase)


def test_trajectory_algebra_randomized():
    # semigroup of the flow, additivity of generator functionals, and
    # multiplicativity of survival: 200 randomized cases per model
    start = time.perf_counter()
    worst = 0.0
    for name in ALL:
        b = get_bundle(name)
        fl = b.model.flow
        law = b.model.hazard
        a = generator_apply(b.model, b.dynkin_f)
        stream = UniformStream(101, 0, AUXILIARY)
        for _ in range(200):
            x = random_state(b, stream)
            window = min(2.0, fl.horizon(x))
            s = 0.5 * window * stream.next()
            t = 0.5 * window * stream.next()
            mid = flow_eval(fl, x, s)

            far_a = flow_eval(fl, x, s + t)
            far_b = flow_eval(fl, mid, t)
            gap = abs(far_a.x - far_b.x) if far_a.coords else 0.0
            gap = max(gap, float(far_a.label != far_b.label))
            worst = max(worst, gap)

            whole = af_eval(a, fl, x, s + t)
            split = af_eval(a, fl, x, s) + af_eval(a, fl, mid, t)
            worst = max(worst, abs(whole - split))

            fw = survival(law, fl, x, s + t)
            fs = survival(law, fl, x, s) * survival(law, fl, mid, t)
            worst = max(worst, abs(fw - fs))
    elapsed = time.perf_counter() - start
    _announce("trajectory algebra, 200 cases x 5 models",
              worst <= 1e-8 and elapsed < 30.0,
              f"worst dev {worst:.2e}, {elapsed:.1f}s")


def test_martingale_mean_is_one_at_scale():
    lines = []
    ok = True
    for name in ("ctmc", "cramer-lundberg"):
        b = get_bundle(name)
        start = time.perf_counter()
        rep = experiment_martingale_check(b, t=1.0, n=100000, seed=41)
        elapsed = time.perf_counter() - start
        est = rep.estimates["martingale_mean"]
        gap = abs(est.mean - 1.0)
        good = (gap <= 3 * est.stderr and est.stderr < 0.02
                and est.excluded_exploded == 0 and elapsed < 60.0)
        ok = ok and good
        lines.append(f"{name}: gap {gap:.2e} se {est.stderr:.2e} {elapsed:.0f}s")
    _announce("likelihood-ratio mean = 1, n=1e5", ok, "; ".join(lines))


def test_weighted_expectation_matches_ode_oracle():
    b = get_bundle("ctmc")
    pairs = [("g", "recommended"), ("f", "recommended"), ("occupied0", "unit")]
    ok = True
    details = []
    for g_name, h_name in pairs:
        g = b.observables[g_name]
        h = b.h_options[h_name]
        want = ctmc_feynman_kac_oracle(b, h, g, 1.0)
        vals = []
        for r in range(20000):
            sk = simulate_skeleton(b.model, b.x0, 1.0, replication_streams(43, r))
            vals.append(g.value(path_state(sk, b.model, 1.0))
                        * exp_martingale(b.model, h, sk, 1.0))
        arr = np.asarray(vals)
        se = float(arr.std(ddof=1) / math.sqrt(len(arr)))
        gap = abs(float(arr.mean()) - want)
        ok = ok and gap <= 3 * se
        details.append(f"({g_name},{h_name}): gap {gap:.1e} vs 3se {3*se:.1e}")
    for h_name in ("recommended", "unit"):
        neutral = ctmc_feynman_kac_oracle(b, b.h_options[h_name],
                                          constant_function(1.0), 1.0)
        ok = ok and abs(neutral - 1.0) <= 1e-9
        details.append(f"oracle neutrality {h_name}: {abs(neutral-1.0):.1e}")
    _announce("weighted mean vs ODE oracle, 3 pairs", ok, "; ".join(details))


def test_generator_centering_preserves_mean_at_scale():
    ok = True
    details = []
    for name in ALL:
        b = get_bundle(name)
        rep = experiment_dynkin_check(b, t=1.0, n=100000, seed=47)
        est = rep.estimates["dynkin_mean"]
        gap = rep.estimates["abs_gap"]
        good = gap <= 3 * est.stderr and est.excluded_exploded == 0
        ok = ok and good
        details.append(f"{name}: gap {gap:.2e} vs 3se {3*est.stderr:.2e}")
    _announce("centered generator mean preserved, n=1e5", ok, "; ".join(details))


def test_measure_change_consistency_and_rare_event_gain():
    ok = True
    details = []
    for name in ALL:
        b = get_bundle(name)
        rep = experiment_is_consistency(b, t=1.0, n=10000, seed=53,
                                        direction="tilted")
        good = rep.passed() and all(
            est.excluded_exploded == 0 for est in rep.estimates.values()
            if hasattr(est, "excluded_exploded"))
        ok = ok and good
        details.append(f"{name}: gap {rep.estimates['abs_gap']:.2e}")
    # rare ruin event: tilting at the adjustment coefficient flips the
    # drift toward ruin and must beat crude sampling
    b = get_bundle("cramer-lundberg", u0=5.0, theta=1.0)
    rep = experiment_is_consistency(b, g="ruin", t=2.0, n=10000, seed=17,
                                    direction="original")
    crude = rep.estimates["crude"]
    tilted = rep.estimates["tilted_weighted"]
    gain = crude.stderr > tilted.stderr > 0.0 and crude.mean > 0.0
    ok = ok and rep.passed() and gain
    details.append(f"ruin: crude se {crude.stderr:.1e} vs tilted se "
                   f"{tilted.stderr:.1e}")
    _announce("direct tilt vs reweighting + variance gain", ok,
              "; ".join(details))


def test_forward_reverse_product_is_identity():
    ok = True
    details = []
    for name in ALL:
        b = get_bundle(name)
        rep = experiment_reverse_check(b, t=1.0, n=10000, seed=59,
                                       max_dev=1e-6)
        worst = rep.estimates["max_abs_dev"]
        ok = ok and worst < 1e-6
        details.append(f"{name}: max {worst:.1e}")
    _announce("reverse ratio inverts pathwise, 1e4 paths", ok,
              "; ".join(details))


def test_three_generator_routes_agree():
    ok = True
    details = []
    for name in ALL:
        b = get_bundle(name)
        rep = experiment_generator_forms(b, t=1.0, n=100, seed=61,
                                         max_rel=1e-8)
        worst = rep.estimates["max_rel_dev"]
        ok = ok and worst <= 1e-8
        details.append(f"{name}: {worst:.1e}")
    # matrix route for the chain: conjugated rate matrix, exact to 1e-10
    b = get_bundle("ctmc")
    G = b.aux["generator_matrix"]
    hv = b.aux["h_vector"]
    doob = doob_transform_matrix(G, hv)
    worst = 0.0
    for f in (b.observables["f"], b.observables["g"]):
        fv = np.array([f.value(interior(label=k)) for k in range(3)])
        a = tilted_generator(b.model, b.recommended_h, f, "direct")
        for k in range(3):
            want = float(doob[k] @ fv)
            got = a.density(interior(label=k))
            worst = max(worst, abs(got - want) / max(1.0, abs(want)))
    ok = ok and worst <= 1e-10
    details.append(f"matrix route {worst:.1e}")
    _announce("three tilted-generator routes agree", ok, "; ".join(details))


def test_special_forms_reduce_to_general():
    ok = True
    worst_all = {}
    for name in ("ctmc", "cramer-lundberg", "aimd"):
        b = get_bundle(name)
        h = b.recommended_h
        worst = 0.0
        for r in range(25):
            sk = simulate_skeleton(b.model, b.x0, 1.0, replication_streams(67, r))
            full = exp_martingale(b.model, h, sk, 1.0)
            for form in (hunt_martingale, ito_martingale):
                red = form(b.model, h, sk, 1.0)
                worst = max(worst, abs(red - full) / abs(full))
        worst_all[name] = worst
        ok = ok and worst <= 1e-9
    b = get_bundle("step-chain")
    worst = 0.0
    for r in range(25):
        sk = simulate_skeleton(b.model, b.x0, 1.4, replication_streams(67, r))
        full = exp_martingale(b.model, b.recommended_h, sk, 1.4)
        red = step_martingale(b.model, b.recommended_h, sk, 1.4)
        worst = max(worst, abs(red - full) / abs(full))
    worst_all["step-chain"] = worst
    ok = ok and worst <= 1e-9
    detail = "; ".join(f"{k}: {v:.1e}" for k, v in worst_all.items())
    _announce("special likelihood-ratio forms match general", ok, detail)


def test_tilt_invariants_and_round_trip():
    ok = True
    details = []
    # atom schedule and flow survive tilting; forced atoms stay forced
    for name in ("boundary-reset", "step-chain"):
        b = get_bundle(name)
        tilted = tilt_model(b.model, b.recommended_h)
        same_flow = tilted.flow is b.model.flow
        hi = min(1.5, b.model.flow.horizon(b.x0))
        before = b.model.hazard.atom_list(b.x0, 0.0, hi)
        after = tilted.hazard.atom_list(b.x0, 0.0, hi)
        offsets = [o for o, _ in before] == [o for o, _ in after]
        forced = all(d2 == 1.0 for (_, d1), (_, d2) in zip(before, after)
                     if d1 == 1.0)
        good = same_flow and offsets and forced
        ok = ok and good
        details.append(f"{name}: flow/offsets/forced "
                       f"{same_flow}/{offsets}/{forced}")
    # tilt by h then 1/h restores every rate, atom, and kernel moment
    worst = 0.0
    for name in ALL:
        b = get_bundle(name)
        h = b.recommended_h
        tilted = tilt_model(b.model, h)
        back = tilt_model(tilted, reciprocal_function(h, tilted.flow))
        stream = UniformStream(71, 0, AUXILIARY)
        for _ in range(20):
            x = random_state(b, stream)
            worst = max(worst, abs(b.model.hazard.rate(x)
                                   - back.hazard.rate(x)))
            hi = min(1.5, b.model.flow.horizon(x))
            a0 = b.model.hazard.atom_list(x, 0.0, hi)
            a1 = back.hazard.atom_list(x, 0.0, hi)
            for (o0, d0), (o1, d1) in zip(a0, a1):
                worst = max(worst, abs(o0 - o1), abs(d0 - d1))
            probe = b.dynkin_f
            q0 = kernel_integrate(b.model.kernel, x, probe)
            q1 = kernel_integrate(back.kernel, x, probe)
            worst = max(worst, abs(q0 - q1) / max(1.0, abs(q0)))
    ok = ok and worst <= 1e-10
    details.append(f"round trip {worst:.1e}")
    _announce("tilt structural invariants + round trip", ok, "; ".join(details))


def test_reports_identical_across_worker_counts():
    texts = {}
    b = get_bundle("cramer-lundberg")
    for w in (1, 2, 4):
        rep = experiment_martingale_check(b, t=1.0, n=2000, seed=73, workers=w)
        texts[w] = dumps_report(rep.to_dict())
    same = texts[1] == texts[2] == texts[4]
    b2 = get_bundle("step-chain")
    reps = [experiment_reverse_check(b2, t=1.0, n=300, seed=73, workers=w)
            for w in (1, 3)]
    same2 = dumps_report(reps[0].to_dict()) == dumps_report(reps[1].to_dict())
    _announce("reports bit-identical across workers", same and same2,
              f"martingale {same}, reverse {same2}")
