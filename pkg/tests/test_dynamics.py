import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from todaent.dynamics import (ModelParams, PhaseState, SectionSpec, hamiltonian_flow,
                              integrate_trajectory, max_nearest_neighbor_gap,
                              occupied_cell_count, poincare_section, potential_energy,
                              rk4_step, shell_state, total_energy)
from todaent.errors import ConfigurationError, EnergyDriftError, OverflowGuardError

SQRT7 = math.sqrt(7.0)


# --- potential and energies -------------------------------------------------

def test_potential_minimum_at_origin():
    assert potential_energy(0.0, 0.0) == 0.0


def test_potential_reference_value():
    # independent high-precision evaluation of e^-1.2 + e^1.2 + 1 - 3
    assert potential_energy(1.2, 0.0) == pytest.approx(1.6213111346487496, abs=1e-12)


def test_potential_gradient_vanishes_at_origin():
    f = hamiltonian_flow(PhaseState(0.0, 0.0, 0.0, 0.0), ModelParams())
    assert f[2] == 0.0 and f[3] == 0.0


def test_potential_overflow_guard():
    with pytest.raises(OverflowGuardError):
        potential_energy(800.0, 0.0)


def test_total_energy_regular_center(regular_params, regular_center):
    assert total_energy(regular_center, regular_params) == pytest.approx(7.0, rel=1e-12)


def test_total_energy_chaotic_center(chaotic_params, chaotic_center):
    # p2^2 / (2 m2) = 0.54 * 7 / (2 * 0.54) = 3.5
    assert total_energy(chaotic_center, chaotic_params) == pytest.approx(7.0, rel=1e-12)


def test_total_energy_matches_potential_at_rest():
    state = PhaseState(1.2, 0.0, 0.0, 0.0)
    assert total_energy(state, ModelParams(m1=2.0, m2=0.7)) == \
        pytest.approx(1.6213111346487496, abs=1e-12)


@given(st.floats(-3, 3), st.floats(-3, 3), st.floats(-3, 3), st.floats(-3, 3),
       st.floats(0.05, 1.0))
@settings(max_examples=60, deadline=None)
def test_potential_convex_along_lines(x0, y0, dx, dy, h):
    # finite-difference second derivative along an arbitrary line
    s0 = potential_energy(x0 - h * dx, y0 - h * dy)
    s1 = potential_energy(x0, y0)
    s2 = potential_energy(x0 + h * dx, y0 + h * dy)
    assert s0 - 2.0 * s1 + s2 >= -1e-9 * max(1.0, abs(s1))


# --- flow field ---------------------------------------------------------------

def test_flow_forces_vanish_at_origin(regular_params):
    f = hamiltonian_flow(PhaseState(0.0, 0.0, SQRT7, SQRT7), regular_params)
    np.testing.assert_allclose(f, [SQRT7, SQRT7, 0.0, 0.0], atol=0.0)


def test_flow_reference_values():
    f = hamiltonian_flow(PhaseState(1.0, 0.0, 0.0, 0.0), ModelParams())
    assert f[0] == 0.0 and f[1] == 0.0
    # e^-1 - e^1 and e^1 - e^0, independently evaluated
    assert f[2] == pytest.approx(-2.350402387287603, abs=1e-14)
    assert f[3] == pytest.approx(1.7182818284590453, abs=1e-14)


def test_flow_mass_scaling():
    f = hamiltonian_flow(PhaseState(0.3, -0.2, 1.0, 2.0), ModelParams(m1=2.0, m2=4.0))
    assert f[0] == 0.5 and f[1] == 0.5


@given(st.floats(-2, 2), st.floats(-2, 2), st.floats(-3, 3), st.floats(-3, 3))
@settings(max_examples=60, deadline=None)
def test_flow_momentum_antisymmetry(q1, q2, p1, p2):
    # (q, p) -> (q, -p) maps (dq, dp) -> (-dq, dp) exactly
    params = ModelParams(m1=1.0, m2=0.54)
    f = hamiltonian_flow(PhaseState(q1, q2, p1, p2), params)
    g = hamiltonian_flow(PhaseState(q1, q2, -p1, -p2), params)
    assert g[0] == -f[0] and g[1] == -f[1]
    assert g[2] == f[2] and g[3] == f[3]


def test_flow_is_divergence_free():
    # dq_i/dt independent of q_i and dp_i/dt independent of p_i: each
    # diagonal derivative vanishes identically
    params = ModelParams(m1=1.3, m2=0.6)
    base = PhaseState(0.4, -0.7, 1.1, -0.9)
    eps = 1e-4
    dq1 = hamiltonian_flow(PhaseState(base.q1 + eps, base.q2, base.p1, base.p2), params)[0] - \
        hamiltonian_flow(base, params)[0]
    dp1 = hamiltonian_flow(PhaseState(base.q1, base.q2, base.p1 + eps, base.p2), params)[2] - \
        hamiltonian_flow(base, params)[2]
    assert dq1 == 0.0 and dp1 == 0.0


# --- RK4 -----------------------------------------------------------------------

def test_rk4_zero_step_is_identity(regular_params, regular_center):
    out = rk4_step(regular_center, 0.0, regular_params)
    assert out == regular_center


def test_rk4_single_step_energy(regular_params, regular_center):
    out = rk4_step(regular_center, 0.01, regular_params)
    e0 = total_energy(regular_center, regular_params)
    e1 = total_energy(out, regular_params)
    assert abs(e1 - e0) < 1e-10


def test_rk4_against_substepped_reference(regular_params, regular_center):
    # one 0.01 step vs ten 0.001 substeps: difference is the local error
    coarse = rk4_step(regular_center, 0.01, regular_params).as_array()
    fine = regular_center
    for _ in range(10):
        fine = rk4_step(fine, 0.001, regular_params)
    assert np.abs(coarse - fine.as_array()).max() < 1e-10


def test_rk4_forward_backward(regular_params, regular_center):
    fwd = rk4_step(regular_center, 0.01, regular_params)
    back = rk4_step(fwd, -0.01, regular_params)
    assert np.abs(back.as_array() - regular_center.as_array()).max() < 1e-10


def test_rk4_order():
    # halving dt cuts the one-step error by ~2^5 (ratio within [24, 40])
    params = ModelParams()
    state = PhaseState(0.3, -0.4, 1.9, -1.1)

    def reference(dt):
        s = state
        for _ in range(100):
            s = rk4_step(s, dt / 100.0, params)
        return s.as_array()

    def error(dt):
        return np.abs(rk4_step(state, dt, params).as_array() - reference(dt)).max()

    ratio = error(0.1) / error(0.05)
    assert 24.0 <= ratio <= 40.0


# --- trajectories ---------------------------------------------------------------

def test_trajectory_minimal(regular_params, regular_center):
    traj = integrate_trajectory(regular_center, t_end=1e-3, dt=1e-3, params=regular_params)
    assert len(traj) == 2
    assert traj.times[0] == 0.0 and traj.times[1] == 1e-3
    one = rk4_step(regular_center, 1e-3, regular_params)
    np.testing.assert_array_equal(traj.states[1], one.as_array())


def test_trajectory_energy_drift_long(regular_params, regular_center):
    traj = integrate_trajectory(regular_center, t_end=100.0, dt=1e-3,
                                params=regular_params, sample_stride=1000)
    assert traj.max_rel_drift < 1e-8


def test_trajectory_chaotic_energy_drift(chaotic_params, chaotic_center):
    traj = integrate_trajectory(chaotic_center, t_end=50.0, dt=1e-3,
                                params=chaotic_params, sample_stride=1000)
    assert traj.max_rel_drift < 1e-8


def test_trajectory_drift_guard_fires(regular_params, regular_center):
    # a huge step makes RK4 wildly non-conservative
    with pytest.raises(EnergyDriftError) as err:
        integrate_trajectory(regular_center, t_end=10.0, dt=0.5, params=regular_params)
    assert err.value.time is not None


def test_trajectory_time_reversal(regular_params, regular_center):
    fwd = integrate_trajectory(regular_center, t_end=10.0, dt=1e-3,
                               params=regular_params, sample_stride=10000)
    end = fwd.state(-1)
    flipped = PhaseState(end.q1, end.q2, -end.p1, -end.p2)
    back = integrate_trajectory(flipped, t_end=10.0, dt=1e-3,
                                params=regular_params, sample_stride=10000)
    final = back.state(-1)
    start = regular_center
    assert abs(final.q1 - start.q1) < 1e-6 and abs(final.q2 - start.q2) < 1e-6
    assert abs(final.p1 + start.p1) < 1e-6 and abs(final.p2 + start.p2) < 1e-6


def test_trajectory_overflow_aborts(regular_params):
    state = PhaseState(650.0, 0.0, 0.0, 0.0)
    with pytest.raises((OverflowGuardError, EnergyDriftError)):
        integrate_trajectory(state, t_end=1.0, dt=1e-3, params=regular_params)


def test_trajectory_rejects_bad_args(regular_params, regular_center):
    with pytest.raises(ConfigurationError):
        integrate_trajectory(regular_center, t_end=-1.0, dt=1e-3, params=regular_params)
    with pytest.raises(ConfigurationError):
        integrate_trajectory(regular_center, t_end=1.0, dt=0.0, params=regular_params)


# --- section spec and shell lift -------------------------------------------------

def test_section_spec_rejects_conjugate_in_plot():
    with pytest.raises(ConfigurationError):
        SectionSpec(pin="q2", plot=("q1", "p2"))


def test_section_spec_defaults():
    spec = SectionSpec()
    assert spec.pin == "q2" and spec.conjugate == "p2"
    assert spec.pin_index == 1 and spec.conjugate_index == 3


def test_shell_state_energy(regular_params):
    spec = SectionSpec()
    st_ = shell_state(0.8, -0.3, spec, regular_params)
    assert st_.q2 == 0.0 and st_.p2 > 0.0
    assert total_energy(st_, regular_params) == pytest.approx(7.0, rel=1e-12)


def test_shell_state_outside_shell(regular_params):
    with pytest.raises(ConfigurationError):
        shell_state(10.0, 0.0, SectionSpec(), regular_params)


def test_shell_state_direction(chaotic_params):
    spec = SectionSpec(direction=-1)
    st_ = shell_state(0.0, 1.0, spec, chaotic_params)
    assert st_.p2 < 0.0


# --- Poincare section --------------------------------------------------------------

@pytest.fixture(scope="module")
def periodic_orbit_point(regular_params):
    """Fixed point of the return map: a periodic orbit through the section."""
    import scipy.optimize

    spec = SectionSpec()

    def return_hit(xy):
        state = shell_state(float(xy[0]), float(xy[1]), spec, regular_params)
        res = poincare_section([state], spec, regular_params, n_crossings=1, dt=1e-3)
        return res.orbits[0].xy(spec)[-1]

    # crossings of any nearby orbit ring the island center: average them
    st0 = shell_state(0.0, 0.0, spec, regular_params)
    ring = poincare_section([st0], spec, regular_params, n_crossings=60, dt=1e-3)
    guess = ring.orbits[0].xy(spec).mean(axis=0)

    def objective(xy):
        try:
            return float(((return_hit(xy) - xy) ** 2).sum())
        except ConfigurationError:
            return 1e6  # stepped off the energy shell

    sol = scipy.optimize.minimize(objective, guess, method="Nelder-Mead",
                                  options={"xatol": 1e-10, "fatol": 1e-20})
    assert sol.fun < 1e-14
    return sol.x


def test_poincare_periodic_orbit_returns(regular_params, periodic_orbit_point):
    spec = SectionSpec()
    state = shell_state(*periodic_orbit_point, spec, regular_params)
    res = poincare_section([state], spec, regular_params, n_crossings=3, dt=1e-3)
    xy = res.orbits[0].xy(spec)
    assert len(xy) == 3
    for hit in xy:
        np.testing.assert_allclose(hit, periodic_orbit_point, atol=5e-6)


def test_poincare_energy_precondition(regular_params):
    bad = PhaseState(0.0, 0.0, 1.0, 1.0)  # energy 1, not 7
    with pytest.raises(ConfigurationError):
        poincare_section([bad], SectionSpec(), regular_params, n_crossings=2)


def test_poincare_points_on_shell(regular_params):
    spec = SectionSpec()
    states = [shell_state(x, 0.0, spec, regular_params) for x in (-1.0, 0.5, 1.5)]
    res = poincare_section(states, spec, regular_params, n_crossings=20, dt=1e-3)
    assert res.warnings == 0
    for orbit in res.orbits:
        assert len(orbit) == 20
        # the eliminated momentum reconstructed from E must be real
        for q1, q2, p1, _p2 in orbit.states:
            budget = regular_params.energy - potential_energy(q1, q2) \
                - 0.5 * p1 * p1 / regular_params.m1
            assert budget > -1e-6
        # crossings happen on the section, moving in the right direction
        assert np.abs(orbit.states[:, 1]).max() < 1e-6
        assert orbit.states[:, 3].min() > 0.0


def test_poincare_budget_warning(regular_params):
    spec = SectionSpec()
    state = shell_state(1.0, 0.0, spec, regular_params)
    # 20 time units allow a handful of returns, nowhere near 500
    res = poincare_section([state], spec, regular_params, n_crossings=500,
                           dt=1e-3, max_steps=20_000)
    assert res.warnings == 1
    assert 0 < len(res.orbits[0]) < 500


# --- section diagnostics -------------------------------------------------------------

def test_nearest_neighbor_gap_simple():
    # the isolated point's nearest neighbor is (1, 0), at distance sqrt(41)
    pts = np.array([[0.0, 0.0], [1.0, 0.0], [0.0, 1.0], [5.0, 5.0]])
    assert max_nearest_neighbor_gap(pts) == pytest.approx(math.sqrt(41.0))


def test_occupied_cell_count_fixed_bounds():
    pts = np.array([[0.1, 0.1], [0.9, 0.9], [0.1, 0.25]])
    bounds = ((0.0, 1.0), (0.0, 1.0))
    assert occupied_cell_count(pts, 10, bounds) == 3
    assert occupied_cell_count(pts[:1], 10, bounds) == 1
