"""Deterministic motion, horizons, and additive functionals along it."""
import math

import pytest
from hypothesis import given, settings, strategies as st

from pdmpkit.errors import CemeteryInput, HorizonExceeded
from pdmpkit.flow import (
    CEMETERY, Flow, PathFunctional, State, af_eval, af_linear, boundary_state,
    flow_eval, integrate_along_flow, interior, merge_atoms,
)


def linear_flow(slope):
    return Flow(advance=lambda x, t: interior(x.coords[0] + slope * t))


def test_state_helpers():
    x = interior(1.5, label=2)
    assert x.x == 1.5 and x.label == 2 and x.tag == "interior"
    assert boundary_state(0.0).tag == "boundary"
    assert CEMETERY.tag == "cemetery"
    with pytest.raises(CemeteryInput):
        CEMETERY.x


@settings(max_examples=60)
@given(st.floats(-3, 3), st.floats(0, 5), st.floats(0, 5), st.floats(-2, 2))
def test_semigroup_on_linear_flow(x0, s, t, slope):
    fl = linear_flow(slope)
    once = flow_eval(fl, flow_eval(fl, interior(x0), s), t)
    direct = flow_eval(fl, interior(x0), s + t)
    assert once.x == pytest.approx(direct.x, abs=1e-9)


def test_horizon_without_limit_raises():
    fl = Flow(advance=lambda x, t: interior(x.coords[0] + t),
              horizon=lambda x: 1.0 - x.coords[0])
    assert flow_eval(fl, interior(0.3), 0.5).x == pytest.approx(0.8)
    with pytest.raises(HorizonExceeded):
        flow_eval(fl, interior(0.3), 0.7)


def test_horizon_with_boundary_limit():
    fl = Flow(advance=lambda x, t: interior(x.coords[0] + t),
              horizon=lambda x: 1.0 - x.coords[0],
              boundary_limit=lambda x: boundary_state(1.0))
    end = flow_eval(fl, interior(0.3), 0.7)
    assert end.tag == "boundary" and end.x == pytest.approx(1.0)


def test_integrate_constant_flow_shortcut():
    fl = Flow(advance=lambda x, t: x, constant=True)
    v = integrate_along_flow(lambda y: y.coords[0] ** 2, fl, interior(3.0), 2.0)
    assert v == pytest.approx(18.0)  # 9 * 2, no quadrature needed


def test_integrate_matches_closed_form():
    fl = linear_flow(1.0)
    # int_0^2 (1 + s)^2 ds = (27 - 1)/3
    v = integrate_along_flow(lambda y: y.coords[0] ** 2, fl, interior(1.0), 2.0)
    assert v == pytest.approx(26.0 / 3.0, rel=1e-9)


def square_functional():
    # density s -> x(s)^2 plus atoms 0.5 at offsets 1 and 2 from any start
    def atoms(x, lo, hi):
        return [(o, 0.5) for o in (1.0, 2.0) if lo < o <= hi]
    return PathFunctional(density=lambda y: y.coords[0] ** 2, atoms=atoms)


@settings(max_examples=40)
@given(st.floats(0.05, 0.95), st.floats(0.05, 2.0))
def test_af_additivity(s, t):
    fl = linear_flow(0.7)
    a = square_functional()
    x = interior(0.2)
    whole = af_eval(a, fl, x, s + t)
    # the atom schedule here is keyed to elapsed time from the start point,
    # so restarting shifts it; emulate by shifting the window explicitly
    first = af_eval(a, fl, x, s)
    shifted = PathFunctional(
        density=a.density,
        atoms=lambda y, lo, hi: [(o - s, v) for o, v in a.atoms(y, lo + s, hi + s)])
    second = af_eval(shifted, fl, flow_eval(fl, x, s), t)
    assert whole == pytest.approx(first + second, abs=1e-9)


def test_af_eval_window_is_left_open():
    fl = linear_flow(0.0)
    a = PathFunctional(density=lambda y: 0.0,
                       atoms=lambda x, lo, hi: [(1.0, 2.0)] if lo < 1.0 <= hi else [])
    assert af_eval(a, fl, interior(0.0), 0.999) == 0.0
    assert af_eval(a, fl, interior(0.0), 1.0) == pytest.approx(2.0)


def test_af_cumulative_closed_form():
    fl = linear_flow(1.0)
    a = PathFunctional(density=lambda y: y.coords[0],
                       cumulative=lambda x, t: x.coords[0] * t + 0.5 * t * t)
    assert af_eval(a, fl, interior(2.0), 3.0) == pytest.approx(2 * 3 + 4.5)


def test_merge_atoms_combines_exact_offsets():
    merged = merge_atoms([(1.0, 0.5), (2.0, 0.25)], [(1.0, 0.5), (3.0, 0.1)])
    assert merged == [(1.0, 1.0), (2.0, 0.25), (3.0, 0.1)]


def test_merge_atoms_drops_zeros():
    assert merge_atoms([(1.0, 0.5)], [(1.0, -0.5)]) == []


def test_af_linear_combination():
    fl = linear_flow(0.0)
    a = PathFunctional(density=lambda y: 1.0)
    b = PathFunctional(density=lambda y: 2.0,
                       atoms=lambda x, lo, hi: [(0.5, 1.0)] if lo < 0.5 <= hi else [])
    c = af_linear(a, b, 2.0, -1.0)
    assert af_eval(c, fl, interior(0.0), 1.0) == pytest.approx(2.0 - 2.0 - 1.0)
