import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from todaent.curves import KIND_CLASSICAL
from todaent.dynamics import ModelParams, PhaseState, rk4_step
from todaent.ensemble import (CellPartition, Ensemble, cell_entropy,
                              classical_entropy_curve, evolve_ensemble, project,
                              sample_initial_ensemble)
from todaent.errors import ConfigurationError, EnergyDriftError

LN2 = math.log(2.0)


# --- sampling ---------------------------------------------------------------

def test_sampling_deterministic(regular_center):
    a = sample_initial_ensemble(regular_center, 0.25, 500, seed=42)
    b = sample_initial_ensemble(regular_center, 0.25, 500, seed=42)
    np.testing.assert_array_equal(a.points, b.points)


def test_sampling_seed_changes_sample(regular_center):
    a = sample_initial_ensemble(regular_center, 0.25, 500, seed=42)
    b = sample_initial_ensemble(regular_center, 0.25, 500, seed=43)
    assert np.abs(a.points - b.points).max() > 0.0


def test_sampling_prefix_stable(regular_center):
    # 4 uniforms per point: a longer draw extends a shorter one
    a = sample_initial_ensemble(regular_center, 0.25, 100, seed=7)
    b = sample_initial_ensemble(regular_center, 0.25, 300, seed=7)
    np.testing.assert_array_equal(a.points, b.points[:100])


def test_sampling_mean_within_standard_error(regular_center):
    hbar, m = 0.5, 100_000
    ens = sample_initial_ensemble(regular_center, hbar, m, seed=3)
    bound = 4.0 * math.sqrt(hbar / (2.0 * m))
    offsets = np.abs(ens.points.mean(axis=0) - regular_center.as_array())
    assert np.all(offsets < bound)


def test_sampling_covariance_isotropic(regular_center):
    hbar, m = 0.5, 100_000
    ens = sample_initial_ensemble(regular_center, hbar, m, seed=3)
    cov = np.cov(ens.points.T)
    diag = np.diag(cov)
    assert np.all(np.abs(diag - hbar / 2.0) < 0.05 * hbar / 2.0)
    off = cov - np.diag(diag)
    assert np.abs(off).max() < 0.05 * hbar / 2.0


def test_sampling_validation(regular_center):
    with pytest.raises(ConfigurationError):
        sample_initial_ensemble(regular_center, 0.25, 0, seed=1)
    with pytest.raises(ConfigurationError):
        sample_initial_ensemble(regular_center, -1.0, 10, seed=1)


# --- ensemble evolution --------------------------------------------------------

@pytest.fixture(scope="module")
def small_ensemble(regular_center):
    return sample_initial_ensemble(regular_center, 0.25, 400, seed=5)


def test_evolve_identity(small_ensemble, regular_params):
    out = evolve_ensemble(small_ensemble, 0.0, 1e-3, regular_params)
    np.testing.assert_array_equal(out.points, small_ensemble.points)
    assert out.t == 0.0


def test_evolve_stages_bitwise(small_ensemble, regular_params):
    one = evolve_ensemble(small_ensemble, 2.0, 1e-3, regular_params)
    two = evolve_ensemble(
        evolve_ensemble(small_ensemble, 0.75, 1e-3, regular_params),
        2.0, 1e-3, regular_params)
    np.testing.assert_array_equal(one.points, two.points)


def test_evolve_energy_anchored_at_t0(small_ensemble, regular_params):
    from todaent.dynamics import RK4Stepper
    stepper = RK4Stepper(small_ensemble.size, regular_params)
    e0 = stepper.energies(np.ascontiguousarray(small_ensemble.points.T))
    out = evolve_ensemble(small_ensemble, 5.0, 1e-3, regular_params)
    e1 = stepper.energies(np.ascontiguousarray(out.points.T))
    assert np.abs((e1 - e0) / e0).max() < 1e-8
    np.testing.assert_array_equal(out.energies0, e0)


def test_evolve_matches_single_point_stepping(regular_params, regular_center):
    ens = sample_initial_ensemble(regular_center, 0.25, 3, seed=9)
    out = evolve_ensemble(ens, 0.01, 1e-3, regular_params)
    for i in range(3):
        state = PhaseState.from_array(ens.points[i])
        for _ in range(10):
            state = rk4_step(state, 1e-3, regular_params)
        np.testing.assert_array_equal(out.points[i], state.as_array())


def test_evolve_rejects_misaligned_grid(small_ensemble, regular_params):
    with pytest.raises(ConfigurationError):
        evolve_ensemble(small_ensemble, 0.0005, 1e-3, regular_params)
    with pytest.raises(ConfigurationError):
        evolve_ensemble(small_ensemble, -1.0, 1e-3, regular_params)


def test_evolve_drift_guard_reports_point(regular_params, regular_center):
    ens = sample_initial_ensemble(regular_center, 0.25, 50, seed=2)
    with pytest.raises(EnergyDriftError) as err:
        evolve_ensemble(ens, 5.0, 0.5, regular_params)  # huge step
    assert err.value.point_index is not None
    assert err.value.time == 5.0


# --- projection ------------------------------------------------------------------

def test_project_columns():
    pts = np.array([[1.0, 2.0, 3.0, 4.0], [5.0, 6.0, 7.0, 8.0]])
    ens = Ensemble(pts, PhaseState(0, 0, 0, 0), hbar=1.0, seed=0)
    np.testing.assert_array_equal(project(ens, 1), [[1.0, 3.0], [5.0, 7.0]])
    np.testing.assert_array_equal(project(ens, 2), [[2.0, 4.0], [6.0, 8.0]])


def test_project_commutes_with_concatenation():
    a = np.arange(8.0).reshape(2, 4)
    b = np.arange(8.0, 20.0).reshape(3, 4)
    joined = project(np.concatenate([a, b]), 1)
    np.testing.assert_array_equal(joined,
                                  np.concatenate([project(a, 1), project(b, 1)]))


# --- cell entropy -----------------------------------------------------------------

def test_cell_entropy_single_cell():
    pts = np.full((50, 2), 0.3)
    assert cell_entropy(pts, CellPartition(1.0)) == 0.0


def test_cell_entropy_uniform_four_cells():
    pts = np.array([[0.5, 0.5], [1.5, 0.5], [0.5, 1.5], [1.5, 1.5]])
    assert cell_entropy(pts, CellPartition(1.0)) == pytest.approx(math.log(4.0), abs=1e-14)


def test_cell_entropy_counts_211():
    # counts (2, 1, 1) of M=4: -(1/2 ln 1/2 + 2 * 1/4 ln 1/4)
    pts = np.array([[0.1, 0.1], [0.2, 0.2], [1.5, 0.5], [0.5, 1.5]])
    assert cell_entropy(pts, CellPartition(1.0)) == \
        pytest.approx(1.0397207708399179, abs=1e-13)


def test_cell_entropy_boundary_half_open():
    part = CellPartition(1.0)
    # a point exactly on the edge belongs to the larger-index cell
    on_edge = np.array([[1.0, 0.5], [0.5, 0.5]])
    assert cell_entropy(on_edge, part) == pytest.approx(LN2)
    inside = np.array([[np.nextafter(1.0, 0.0), 0.5], [0.5, 0.5]])
    assert cell_entropy(inside, part) == 0.0


def test_cell_entropy_rejects_bad_input():
    with pytest.raises(ConfigurationError):
        cell_entropy(np.zeros((0, 2)), CellPartition(1.0))
    with pytest.raises(ConfigurationError):
        cell_entropy(np.array([[np.nan, 0.0]]), CellPartition(1.0))
    with pytest.raises(ConfigurationError):
        CellPartition(0.0)


# dyadic grids make translation and refinement exact in floating point
dyadic = st.integers(-2000, 2000).map(lambda k: k / 32.0)
dyadic_points = st.lists(st.tuples(dyadic, dyadic), min_size=1, max_size=60).map(np.array)


@given(dyadic_points, st.randoms())
@settings(max_examples=60, deadline=None)
def test_cell_entropy_permutation_invariant(pts, rnd):
    part = CellPartition(0.25)
    perm = np.arange(len(pts))
    rnd.shuffle(perm)
    assert cell_entropy(pts[perm], part) == cell_entropy(pts, part)


@given(dyadic_points, st.integers(-40, 40), st.integers(-40, 40))
@settings(max_examples=60, deadline=None)
def test_cell_entropy_translation_invariant(pts, kx, ky):
    # shift points and origin by the same (dyadic) vector
    v = np.array([kx / 4.0, ky / 4.0])
    part0 = CellPartition(0.25)
    part1 = CellPartition(0.25, origin=(v[0], v[1]))
    assert cell_entropy(pts + v, part1) == cell_entropy(pts, part0)


@given(dyadic_points)
@settings(max_examples=60, deadline=None)
def test_cell_entropy_bounds(pts):
    s = cell_entropy(pts, CellPartition(0.25))
    assert 0.0 <= s <= math.log(len(pts)) + 1e-12


@given(dyadic_points)
@settings(max_examples=60, deadline=None)
def test_cell_entropy_refinement_bounds(pts):
    # quartering the area (halving the side) refines each cell into 4:
    # entropy cannot drop and can gain at most ln 4
    coarse = cell_entropy(pts, CellPartition(1.0))
    fine = cell_entropy(pts, CellPartition(0.25))
    assert coarse - 1e-12 <= fine <= coarse + math.log(4.0) + 1e-12


# --- classical curves ---------------------------------------------------------------

@pytest.fixture(scope="module")
def tiny_curve_pair(regular_params, regular_center):
    times = np.arange(0.0, 8.1, 0.4)
    return classical_entropy_curve(regular_params, regular_center, hbar=0.25,
                                   delta=0.25, m=2000, seed=11, times=times,
                                   dt=1e-3, preset="regular")


def test_classical_curve_tags(tiny_curve_pair):
    c1, c2 = tiny_curve_pair
    assert c1.tag.kind == KIND_CLASSICAL
    assert c1.tag.delta == 0.25 and c1.tag.hbar == 0.25
    assert c1.tag.m_points == 2000 and c1.tag.seed == 11
    assert c1.particle == 1 and c2.particle == 2


def test_classical_curve_initial_value_small(tiny_curve_pair):
    c1, _ = tiny_curve_pair
    # delta = hbar: the initial blob covers a handful of cells
    assert 1.5 < c1.values[0] < 3.0
    assert c1.values[0] <= math.log(2000.0)


def test_classical_curve_grows(tiny_curve_pair):
    c1, _ = tiny_curve_pair
    assert c1.values[-1] > c1.values[0] + 0.5


def test_classical_curve_wide_cells_start_at_zero(regular_params):
    # delta >> hbar puts the whole blob in one cell, provided the center
    # is interior to a cell (the origin itself lies on cell edges)
    center = PhaseState(3.0, 2.0, 1.5, 2.5)
    times = np.array([0.0])
    c1, c2 = classical_entropy_curve(regular_params, center, hbar=0.01,
                                     delta=100.0, m=500, seed=1, times=times)
    assert c1.values[0] == 0.0 and c2.values[0] == 0.0


def test_classical_curve_deterministic(regular_params, regular_center):
    times = np.arange(0.0, 1.1, 0.5)
    kwargs = dict(hbar=0.25, delta=0.25, m=300, seed=21, times=times, dt=1e-3)
    a = classical_entropy_curve(regular_params, regular_center, **kwargs)
    b = classical_entropy_curve(regular_params, regular_center, **kwargs)
    np.testing.assert_array_equal(a[0].values, b[0].values)
    np.testing.assert_array_equal(a[1].values, b[1].values)