"""Bundled example models and their closed-form oracles."""
import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st
from scipy.linalg import expm

from pdmpkit.errors import BadParameters, BadStochasticMatrix
from pdmpkit.flow import boundary_state, integrate_along_flow, interior
from pdmpkit.generator import constant_function, exp_function
from pdmpkit.hazard import kernel_integrate, kernel_sample
from pdmpkit.models import (
    REGISTRY, cl_drift_exponent, ctmc_feynman_kac_oracle,
    doob_transform_matrix, get_bundle, make_aimd, make_boundary_reset,
    make_cramer_lundberg, make_ctmc, step_chain_oracle,
)
from pdmpkit.rng import DESTINATION, UniformStream, replication_streams
from pdmpkit.simulate import Event, Skeleton, simulate_skeleton


def test_registry_contents():
    assert sorted(REGISTRY) == ["aimd", "boundary-reset", "cramer-lundberg",
                                "ctmc", "step-chain"]
    assert get_bundle("cramer_lundberg").name == "cramer-lundberg"
    with pytest.raises(KeyError):
        get_bundle("nope")


def test_bundle_overrides_reach_params():
    b = get_bundle("cramer-lundberg", u0=4.0, theta=0.25)
    assert b.params["u0"] == 4.0
    assert b.x0.x == 4.0
    assert b.aux["theta"] == 0.25


def test_ctmc_matrix_is_conservative():
    b = get_bundle("ctmc")
    G = b.aux["generator_matrix"]
    np.testing.assert_allclose(G.sum(axis=1), 0.0, atol=1e-12)
    assert all(G[i, j] >= 0 for i in range(3) for j in range(3) if i != j)


def test_ctmc_validation():
    with pytest.raises(BadStochasticMatrix):
        make_ctmc(masses=((0.0, 0.5, 0.4), (0.5, 0.0, 0.5), (0.25, 0.75, 0.0)))
    with pytest.raises(BadParameters):
        make_ctmc(rates=(1.0, -2.0, 0.5))


def test_feynman_kac_oracle_against_matrix_exponential():
    # the weighted expectation solves a linear ODE; cross-check the built-in
    # integrator against the matrix exponential route
    b = get_bundle("ctmc")
    G = b.aux["generator_matrix"]
    hv = b.aux["h_vector"]
    g = b.observables["g"]
    gv = np.array([g.value(interior(label=k)) for k in range(3)])
    t = 1.3
    tilted = G - np.diag((G @ hv) / hv)
    want = float((expm(t * tilted) @ (gv * hv))[0]) / hv[0]
    got = ctmc_feynman_kac_oracle(b, b.recommended_h, g, t)
    assert got == pytest.approx(want, rel=1e-9)


def test_feynman_kac_oracle_neutral_for_constant_g():
    b = get_bundle("ctmc")
    for t in (0.3, 1.0, 2.7):
        v = ctmc_feynman_kac_oracle(b, b.recommended_h, constant_function(1.0), t)
        assert v == pytest.approx(1.0, abs=1e-12)


def test_drift_exponent_frozen():
    # premium 1, claim rate 1, Exp(2) claims, theta = 1/2
    assert cl_drift_exponent(1.0, 1.0, 2.0, 0.5) == pytest.approx(-1.0 / 6.0,
                                                                  rel=1e-14)
    b = get_bundle("cramer-lundberg")
    # the decay exponent vanishes exactly at the adjustment coefficient
    R = b.aux["adjustment_coefficient"]
    assert R == 1.0
    assert cl_drift_exponent(1.0, 1.0, 2.0, R) == 0.0


def test_claim_kernel_moment_frozen():
    b = get_bundle("cramer-lundberg")
    y = interior(3.0)
    got = kernel_integrate(b.model.kernel, y, exp_function(-0.5))
    assert got == pytest.approx(math.exp(-1.5) * 2.0 / 1.5, rel=1e-12)


def test_claim_sizes_are_exponential():
    b = get_bundle("cramer-lundberg")
    stream = UniformStream(1, 0, DESTINATION)
    y = interior(50.0)
    sizes = [y.x - kernel_sample(b.model.kernel, y, stream).x
             for _ in range(2000)]
    mean = sum(sizes) / len(sizes)
    assert abs(mean - 0.5) <= 3 * 0.5 / math.sqrt(len(sizes))


def test_ruin_observable_on_crafted_paths():
    b = get_bundle("cramer-lundberg")
    ruin = b.observables["ruin"]
    hit = Skeleton(x0=interior(0.5), events=(
        Event(time=0.4, pre=interior(0.9), post=interior(-0.1)),
        Event(time=1.0, pre=interior(0.5), post=interior(0.2))), horizon=2.0)
    miss = Skeleton(x0=interior(0.5), events=(
        Event(time=0.4, pre=interior(0.9), post=interior(0.3)),), horizon=2.0)
    assert ruin(hit, b.model, 2.0) == 1.0
    assert ruin(miss, b.model, 2.0) == 0.0


def test_reset_model_without_rate_is_deterministic():
    b = get_bundle("boundary-reset", rate0=0.0)
    sk = simulate_skeleton(b.model, b.x0, 2.0, replication_streams(0, 0))
    assert [ev.time for ev in sk.events] == [0.7, 1.5]
    assert all(ev.pre.tag == "boundary" for ev in sk.events)
    assert all(ev.post.x == 0.2 for ev in sk.events)


def test_reset_kernel_lands_at_reset_point():
    b = get_bundle("boundary-reset")
    stream = UniformStream(5, 0, DESTINATION)
    z = kernel_sample(b.model.kernel, boundary_state(1.0), stream)
    assert z.tag == "interior" and z.x == 0.2


@settings(max_examples=25, deadline=None)
@given(st.floats(0.1, 2.0), st.floats(0.0, 1.5), st.floats(0.2, 3.0),
       st.floats(0.1, 2.0))
def test_aimd_cumulative_hazard_matches_quadrature(a0, a1, x0, t):
    b = make_aimd(loss_rate=(a0, a1), x0=x0)
    law, fl = b.model.hazard, b.model.flow
    closed = law.cumulative_rate(interior(x0), t)
    direct = integrate_along_flow(law.rate, fl, interior(x0), t)
    assert closed == pytest.approx(direct, rel=1e-8)


def test_aimd_needs_a_loss_rate():
    with pytest.raises(BadParameters):
        make_aimd(loss_rate=None)


def test_step_chain_jumps_on_the_tick_grid():
    b = get_bundle("step-chain")
    period = b.params["period"]
    sk = simulate_skeleton(b.model, b.x0, 2.0, replication_streams(6, 2))
    assert len(sk.events) > 0
    for ev in sk.events:
        assert ev.time / period == pytest.approx(round(ev.time / period),
                                                 abs=1e-12)


def test_step_chain_oracle_is_neutral():
    b = get_bundle("step-chain")
    for t in (0.1, 0.25, 1.0, 2.3):
        v = step_chain_oracle(b, b.recommended_h, constant_function(1.0), t)
        assert v == pytest.approx(1.0, abs=1e-12)


def test_step_chain_oracle_against_simulation():
    b = get_bundle("step-chain")
    f = b.observables["f"]
    t = 1.0
    want = step_chain_oracle(b, b.recommended_h, f, t)
    vals = []
    from pdmpkit.simulate import path_state
    from pdmpkit.tilting import exp_martingale
    for rep in range(800):
        sk = simulate_skeleton(b.model, b.x0, t, replication_streams(23, rep))
        m = exp_martingale(b.model, b.recommended_h, sk, t)
        vals.append(f.value(path_state(sk, b.model, t)) * m)
    mean = sum(vals) / len(vals)
    sd = math.sqrt(sum((v - mean) ** 2 for v in vals) / (len(vals) - 1))
    assert abs(mean - want) <= 3 * sd / math.sqrt(len(vals))


def test_doob_matrix_frozen_two_state():
    G = np.array([[-2.0, 2.0], [1.0, -1.0]])
    got = doob_transform_matrix(G, np.array([1.0, 2.0]))
    np.testing.assert_allclose(got, [[-4.0, 4.0], [0.5, -0.5]], atol=1e-14)
    np.testing.assert_allclose(got.sum(axis=1), 0.0, atol=1e-14)


def test_every_bundle_survives_a_long_window():
    for name in sorted(REGISTRY):
        b = get_bundle(name)
        sk = simulate_skeleton(b.model, b.x0, 10.0, replication_streams(14, 0))
        assert sk.status == "completed", name
