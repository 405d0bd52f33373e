import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from vpbirman.birman_schwinger import (
    BirmanSchwinger,
    _coords_to_function,
    galerkin_L_matrix,
    galerkin_lowest,
)
from vpbirman.errors import StepRejected
from vpbirman.flow_minimizer import (
    flow_step,
    frozen_mode_step,
    initial_state,
    minimize,
    multi_start,
    phi_functional,
    state_from_coords,
    state_from_function,
    stationarity_residual,
)
from vpbirman.phase_space import FourierFunction, apply_T, build_sine_table, q_norm


@pytest.fixture(scope="module")
def small_bs(model1):
    """Reduced truncation for fast flow runs; same grid as the k = 1 model."""
    return BirmanSchwinger(build_sine_table(model1.grid, 6, 32))


def test_phi_homogeneous_and_bounded(model1, small_bs):
    st0 = initial_state(small_bs, seed=0)
    g = st0.function(small_bs)
    phi = phi_functional(g, small_bs.table)
    assert phi == pytest.approx(st0.phi, rel=1e-10)
    assert phi_functional(g * 3.0, small_bs.table) == pytest.approx(9 * phi, rel=1e-12)
    assert phi <= q_norm(apply_T(g)) ** 2
    zero = FourierFunction.zeros(6, model1.grid.n_nodes, model1.grid)
    assert phi_functional(zero, small_bs.table) == 0.0


def test_initial_state_normalised_and_odd(small_bs):
    st0 = initial_state(small_bs, seed=3, k_band=2)
    g = st0.function(small_bs)
    assert q_norm(g) == pytest.approx(1.0, rel=1e-13)
    assert g.is_odd(1e-14) and g.is_real(1e-14)
    assert np.all(g.sine_coords()[2:] == 0)


def test_state_from_function(small_bs):
    g = initial_state(small_bs, seed=1).function(small_bs)
    st1 = state_from_function(small_bs, g * 2.0)
    assert q_norm(st1.function(small_bs)) == pytest.approx(1.0, rel=1e-13)
    even = FourierFunction(g.k_max, np.abs(g.coeffs), g.grid)
    with pytest.raises(ValueError):
        state_from_function(small_bs, even)
    with pytest.raises(ValueError):
        state_from_coords(small_bs, np.zeros(small_bs.size))


def test_frozen_mode_decay(small_bs):
    x = np.ones(small_bs.size)
    dt = 0.3
    y = frozen_mode_step(small_bs, x, dt, phi_frozen=0.5)
    assert np.allclose(y, np.exp(-(small_bs.d - 0.5) * dt))


def test_steps_monotone_and_norm(small_bs):
    state = initial_state(small_bs, seed=2)
    for _ in range(60):
        new = flow_step(state, small_bs)
        assert new.phi <= state.phi + 1e-8
        assert np.linalg.norm(new.x) == pytest.approx(1.0, abs=1e-12)
        assert q_norm(new.function(small_bs)) == pytest.approx(1.0, abs=1e-8)
        assert new.t > state.t
        state = new


def test_step_rejected(small_bs):
    state = initial_state(small_bs, seed=0)
    with pytest.raises(StepRejected):
        flow_step(state, small_bs, max_halvings=0, slack=-1e12)


def test_fixed_point_is_eigenvector(small_bs):
    A = galerkin_L_matrix(small_bs)
    vals, vecs = np.linalg.eigh(A)
    x = vecs[:, 0]
    assert stationarity_residual(small_bs, x) <= 1e-10 * abs(vals).max()
    state = state_from_coords(small_bs, x)
    new = flow_step(state, small_bs)
    assert abs(abs(new.x @ x) - 1) <= 1e-12


def test_minimize_reaches_galerkin(small_bs, model1):
    gal = galerkin_lowest(small_bs)
    res = minimize(initial_state(small_bs, seed=0), small_bs, delta1=model1.delta1)
    assert res.converged
    assert res.lambda_star >= gal.lowest - 1e-9
    assert res.lambda_star - gal.lowest <= 1e-8 * gal.lowest
    assert res.error <= 1e-7
    assert res.lambda_star < model1.delta1**2
    hist = res.history
    assert np.all(np.diff(hist[:, 1]) <= 1e-8)


def test_multi_start_agree(small_bs, model1):
    results = multi_start(small_bs, seeds=(0, 1, 2), delta1=model1.delta1)
    lams = [r.lambda_star for r in results]
    assert max(lams) - min(lams) <= 1e-4 * abs(min(lams))


def test_callback_and_serialisation(small_bs, tmp_path, model1):
    seen = []
    res = minimize(initial_state(small_bs, seed=4), small_bs, budget=7, delta1=model1.delta1,
                   callback=seen.append)
    assert len(seen) == res.n_steps == 7
    assert not res.converged
    rows = res.to_csv(tmp_path / "h.csv").read_text().splitlines()
    assert len(rows) == 1 + 1 + 7
    d = res.to_dict()
    assert d["n_steps"] == 7 and d["lambda_star"] == res.lambda_star


@settings(max_examples=20, deadline=None)
@given(st.integers(0, 2**31 - 1), st.floats(0.1, 10.0))
def test_phi_scaling_property(seed, alpha):
    from conftest import get_model

    bs = BirmanSchwinger(build_sine_table(get_model(1.0).grid, 3, 16))
    x = np.random.default_rng(seed).standard_normal(bs.size)
    g = _coords_to_function(bs, x)
    phi = phi_functional(g, bs.table)
    assert phi_functional(g * alpha, bs.table) == pytest.approx(alpha**2 * phi, rel=1e-10)
    assert phi == pytest.approx(x @ galerkin_L_matrix(bs) @ x, rel=1e-9)
    assert phi <= q_norm(apply_T(g)) ** 2 * (1 + 1e-12)
