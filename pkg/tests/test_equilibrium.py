import math

import numpy as np
import pytest
from hypothesis import assume, given, settings
from hypothesis import strategies as st

from acdc_microgrid.controllers import ReferenceSet
from acdc_microgrid.equilibrium import (check_power_balance, dc_link_voltage,
                                        feasible_reference_hint, solve_equilibrium,
                                        steady_voltages)
from acdc_microgrid.errors import Infeasible, InfeasibleInput, NoEquilibrium
from acdc_microgrid.plant import DEFAULT_PARAMS, Disturbances, derivative

from oracles import model_rows, row_magnitudes
from support import feasible_case, random_feasible_cases

D0 = Disturbances(V_PV=600.0, V_B=700.0, V_S=1200.0, R_L=50.0)


@settings(max_examples=50, deadline=None)
# subnormal currents carry no relative precision, so the row-relative check is meaningless there
@given(st.floats(450, 700), st.floats(550, 750), st.floats(20, 200),
       st.floats(-1.0, 1.0, allow_subnormal=False), st.floats(0.1, 0.9))
def test_fixed_point_property(V_PV, V_B, R_L, i_d, share):
    case = feasible_case(V_PV, V_B, R_L, i_d, share)
    assume(case is not None)
    r, d = case
    e = solve_equilibrium(r, d, DEFAULT_PARAMS)
    f = model_rows(e.x_star, e.u_star, d, DEFAULT_PARAMS)
    scale = row_magnitudes(e.x_star, e.u_star, d, DEFAULT_PARAMS)
    assert all(abs(a) <= 1e-9 * b for a, b in zip(f, scale))
    assert e.relative_residual <= 1e-9
    assert abs(check_power_balance(e, DEFAULT_PARAMS, d)) <= 1e-9 * r.x9_star / d.R_L


def test_fixed_point_reaches_tracking_targets(operating_point):
    r, d, e = operating_point
    x = e.x_star
    assert x[0] == r.x1_star and x[3] == r.x4_star and x[8] == r.x9_star
    assert x[10] == r.x11_star and x[11] == r.x12_star
    assert x[7] == 0.0 and x[6] == r.x9_star
    assert np.all(e.alpha_star.as_array() == 0.0)
    np.testing.assert_allclose(derivative(x, e.u_star, d, DEFAULT_PARAMS), 0.0, atol=1e-6)


def test_physical_root_selected(operating_point):
    # the boost converters sit above the bus, the DC link just below it
    r, d, e = operating_point
    x = e.x_star
    assert x[1] > r.x9_star - 1.0 and x[4] > r.x9_star - 1.0
    assert r.x9_star / 2 < x[9] <= r.x9_star
    assert 0.0 <= e.u_star[0] <= 1.0 and 0.0 <= e.u_star[1] <= 1.0


def test_dc_link_quadratic():
    v = dc_link_voltage(1000.0, 325.0 * 0.8, 0.1)
    assert v * (1000.0 - v) == pytest.approx(1.5 * 0.1 * 325.0 * 0.8, rel=1e-9)
    with pytest.raises(NoEquilibrium):
        dc_link_voltage(100.0, 1e6, 0.1)


def test_no_equilibrium_for_excess_export():
    r = ReferenceSet(598.0, 690.0, 1000.0, x11_star=1e5)
    with pytest.raises(NoEquilibrium):
        solve_equilibrium(r, D0, DEFAULT_PARAMS)


def test_infeasible_input_for_unreachable_bus():
    # a bus below the PV voltage needs a negative boost duty cycle
    r = ReferenceSet(598.0, 690.0, 500.0)
    with pytest.raises(InfeasibleInput):
        solve_equilibrium(r, D0, DEFAULT_PARAMS)


def test_hint_rejects_unreachable_allocation():
    with pytest.raises(Infeasible):
        feasible_reference_hint(D0, DEFAULT_PARAMS, p_ac=1e9)


def test_hint_pins_pv_voltage():
    r = feasible_reference_hint(D0, DEFAULT_PARAMS, p_ac=390.0, x1_star=598.0)
    assert r.x1_star == 598.0
    e = solve_equilibrium(r, D0, DEFAULT_PARAMS)
    assert abs(check_power_balance(e, DEFAULT_PARAMS, D0)) <= 1e-9 * 1000.0 / 50.0


def test_mismatch_is_load_minus_injection():
    r = feasible_reference_hint(D0, DEFAULT_PARAMS, x1_star=598.0)
    e = solve_equilibrium(r.__class__(r.x1_star, r.x4_star + 1.0, r.x9_star), D0, DEFAULT_PARAMS)
    # raising x4* lowers the battery current by 1/R4 = 10 A
    assert check_power_balance(e, DEFAULT_PARAMS, D0) == pytest.approx(10.0 * 700 / 1000, rel=0.05)


def test_steady_voltages_vectorized(rng):
    n = 50
    x1 = rng.uniform(500, 640, n)
    x3 = (600.0 - x1) / DEFAULT_PARAMS.R1
    x4 = rng.uniform(600, 700, n)
    x6 = (700.0 - x4) / DEFAULT_PARAMS.R4
    x9 = rng.uniform(900, 1100, n)
    p_dq = rng.uniform(-500, 500, n)
    vec = np.array(steady_voltages(x1, x3, x4, x6, x9, p_dq, DEFAULT_PARAMS))
    for i in range(n):
        one = [float(v) for v in steady_voltages(x1[i], x3[i], x4[i], x6[i], x9[i], p_dq[i], DEFAULT_PARAMS)]
        np.testing.assert_array_equal(vec[:, i], one)
    assert math.isnan(float(steady_voltages(600, 0, 700, 0, 10.0, 1e6, DEFAULT_PARAMS)[2]))


def test_batch_runtime(rng):
    import time
    cases = random_feasible_cases(rng, 20)
    t0 = time.perf_counter()
    worst = max(solve_equilibrium(r, d, DEFAULT_PARAMS).relative_residual for r, d in cases)
    assert time.perf_counter() - t0 < 1.0
    assert worst <= 1e-9
