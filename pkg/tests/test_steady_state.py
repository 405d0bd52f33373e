import math

import numpy as np
import pytest
from scipy.integrate import quad
from scipy.special import gamma

from vpbirman.errors import NoCutoffFound, SingularWeight
from vpbirman.steady_state import (
    HarmonicPotential,
    KeplerPotential,
    PolytropeParams,
    build_polytrope,
    build_polytrope_cached,
    evaluate_potential,
    load_state,
    polytrope_constant,
    q_prime_abs,
    rho_from_potential,
    save_state,
)


def test_polytrope_constant_k1():
    # Gamma(2) = 1, Gamma(7/2) = 15 sqrt(pi) / 8
    expected = (2 * math.pi) ** 1.5 / (15 * math.sqrt(math.pi) / 8)
    assert polytrope_constant(1.0) == pytest.approx(expected, rel=1e-14)
    assert polytrope_constant(1.0) == pytest.approx(4.7391, abs=1e-4)


@pytest.mark.parametrize("k", [0.5, 1.0, 2.0, 3.0])
def test_polytrope_constant_gamma(k):
    assert polytrope_constant(k) == pytest.approx(
        (2 * math.pi) ** 1.5 * gamma(k + 1) / gamma(k + 2.5), rel=1e-13
    )


@pytest.mark.parametrize("k", [1.0, 1.5, 2.5])
def test_invariants(k):
    st = build_polytrope(PolytropeParams(k=k))
    assert all(st.check_invariants(1e-8).values())
    assert st.U0 < st.e0 < 0
    assert np.all(np.diff(st.U) > 0)
    inner = (st.r_grid > 0) & (st.r_grid < st.r_Q)
    assert np.all(np.diff(st.rho[inner]) < 0)


def test_mass_quadrature(state1):
    st = state1
    mass = quad(lambda r: 4 * math.pi * r**2 * rho_from_potential(st, r), 0, st.r_Q,
                epsabs=0, epsrel=1e-12, limit=200)[0]
    assert mass == pytest.approx(st.M, rel=1e-9)


def test_gauss_law_on_grid(state1):
    st = state1
    rs = st.r_grid[1::97]
    for r in rs:
        enclosed = quad(lambda s: s**2 * rho_from_potential(st, s), 0, r, epsrel=1e-12, limit=200)[0]
        assert st.potential.dU(r) == pytest.approx(4 * math.pi * enclosed / r**2, rel=1e-8)


def test_origin_regular(state1):
    st = state1
    pot = st.potential
    assert pot.dU(0.0) == 0.0
    h = 1e-5 * st.r_Q
    assert abs(rho_from_potential(st, h) - rho_from_potential(st, 0.0)) / h < 1e-3
    assert rho_from_potential(st, 0.0) == pytest.approx(st.c_n * st.kappa**st.n, rel=1e-12)


def test_support_and_exterior(state1):
    st = state1
    pot = st.potential
    assert pot.U(st.r_Q) == pytest.approx(st.e0, rel=1e-10)
    assert rho_from_potential(st, st.r_Q) == 0.0
    assert rho_from_potential(st, 1.5 * st.r_Q) == 0.0
    r = np.linspace(st.r_Q, 2 * st.r_Q, 50)
    assert np.max(np.abs(pot.U(r) + st.M / r)) <= 1e-10
    # C^1 matching across r_Q
    eps = 1e-9 * st.r_Q
    assert pot.dU(st.r_Q - eps) == pytest.approx(pot.dU(st.r_Q + eps), rel=1e-6)


def test_refinement_convergence():
    a = build_polytrope(PolytropeParams(k=1.5, ode_tol=1e-10))
    b = build_polytrope(PolytropeParams(k=1.5, ode_tol=5e-11))
    for x, y in [(a.M, b.M), (a.r_Q, b.r_Q), (a.e0, b.e0)]:
        assert abs(x - y) <= 10 * 1e-10 * abs(y)


def test_kappa_scan_monotone():
    Ms, rs = [], []
    for kappa in (0.5, 1.0, 2.0):
        st = build_polytrope(PolytropeParams(k=1.0, kappa=kappa))
        Ms.append(st.M)
        rs.append(st.r_Q)
    assert np.all(np.diff(Ms) > 0)
    assert np.all(np.diff(rs) < 0)  # n = 2.5 < 3: larger central value, smaller radius


@pytest.mark.parametrize("k", [3.5, 3.6, 5.0])
def test_k_range_guard(k):
    with pytest.raises(NoCutoffFound, match="7/2"):
        PolytropeParams(k=k)


@pytest.mark.parametrize("kwargs", [{"k": -0.5}, {"kappa": 0.0}, {"ode_tol": 0.0}, {"grid_points": 8}])
def test_param_validation(kwargs):
    with pytest.raises(ValueError):
        PolytropeParams(**kwargs)


def test_q_prime_abs():
    assert q_prime_abs(1.0, np.array([-1.0, -0.5]), e0=-0.4) == pytest.approx([1.0, 1.0])
    assert q_prime_abs(2.0, -0.25 - 0.25, e0=-0.25) == pytest.approx(0.5)
    assert q_prime_abs(2.0, -0.25, e0=-0.25) == 0.0
    with pytest.warns(SingularWeight):
        q_prime_abs(0.5, -0.25, e0=-0.25)


def test_evaluate_potential_closed_forms():
    assert evaluate_potential(KeplerPotential(1.0), 2.0) == pytest.approx((-0.5, 0.25))
    assert evaluate_potential(HarmonicPotential(2.0), 1.0) == pytest.approx((2.0, 4.0))


def test_serialization_and_cache(tmp_path, state1):
    path = save_state(state1, tmp_path / "s.json")
    back = load_state(path)
    assert back.M == state1.M and np.array_equal(back.U, state1.U)
    assert all(back.check_invariants().values())
    params = PolytropeParams(k=1.0)
    _, hit = build_polytrope_cached(params, tmp_path)
    assert not hit
    again, hit = build_polytrope_cached(params, tmp_path)
    assert hit and again.r_Q == state1.r_Q
