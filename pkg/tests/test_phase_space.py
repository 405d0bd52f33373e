import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from scipy.integrate import quad

from vpbirman.errors import SpectrumHit
from vpbirman.phase_space import (
    FourierFunction,
    apply_L,
    apply_T,
    build_sine_table,
    kt_apply,
    minus_T_squared,
    psi_coeffs_from_Psi,
    q_inner,
    q_norm,
    radial_inner,
    radial_nodes,
    resolvent_shift,
    sine_moments,
    u_prime_from_g,
    x_alpha_norm,
)

K = 4


def random_function(grid, seed, k_max=K, odd=None, real_space=True):
    """Coefficients of a real function; odd/even in v when requested."""
    rng = np.random.default_rng(seed)
    n = grid.n_nodes
    pos = rng.standard_normal((k_max, n)) + 1j * rng.standard_normal((k_max, n))
    c = np.zeros((2 * k_max + 1, n), dtype=complex)
    c[k_max + 1 :] = pos
    c[:k_max] = np.conj(pos[::-1]) if real_space else rng.standard_normal((k_max, n))
    if odd is True:
        c = 0.5 * (c - c[::-1])
    elif odd is False:
        c = 0.5 * (c + c[::-1])
    else:
        c[k_max] = rng.standard_normal(n)
    return FourierFunction(k_max, c, grid)


def single_mode(grid, k, node, k_max=K):
    g = FourierFunction.zeros(k_max, grid.n_nodes, grid)
    g.coeffs[k_max + k, node] = 1.0
    return g


def test_apply_T_single_mode(model1):
    grid = model1.grid
    g = single_mode(grid, 1, 0)
    Tg = apply_T(g)
    assert Tg.coeffs[K + 1, 0] == pytest.approx(1j * grid.omega1[0], rel=1e-15)
    assert np.count_nonzero(Tg.coeffs) == 1
    assert apply_T(single_mode(grid, 0, 3)).coeffs.any() == False  # noqa: E712


def test_resolvent_single_mode(model1):
    grid = model1.grid
    w = grid.omega1[5]
    g = single_mode(grid, 2, 5)
    lam = 0.5 * model1.delta1**2
    out = resolvent_shift(g, lam)
    assert out.coeffs[K + 2, 5] == pytest.approx(1 / (4 * w * w - lam), rel=1e-14)
    # (-T^2 - lam) undoes it
    back = minus_T_squared(out) - out * lam
    assert np.allclose(back.coeffs, g.coeffs, atol=1e-14)


def test_resolvent_spectrum_hit(model1):
    g = single_mode(model1.grid, 1, 0)
    with pytest.raises(SpectrumHit):
        resolvent_shift(g, float(model1.grid.omega1.min() ** 2))


def test_parity_and_reality(model1):
    g = random_function(model1.grid, 0)
    assert g.is_real(1e-14)
    odd = g.odd_part()
    assert odd.is_odd(1e-14) and odd.is_real(1e-14)
    assert (g - odd).is_even(1e-14)
    # T maps odd to even and preserves reality
    assert apply_T(odd).is_even(1e-14) and apply_T(odd).is_real(1e-14)


def test_T_antisymmetric_and_positive_square(model1):
    grid = model1.grid
    g, h = random_function(grid, 1), random_function(grid, 2)
    lhs = q_inner(apply_T(g), h)
    rhs = -q_inner(g, apply_T(h))
    assert lhs == pytest.approx(rhs, rel=1e-12)
    assert q_inner(minus_T_squared(g), g).real == pytest.approx(q_norm(apply_T(g)) ** 2, rel=1e-12)


def test_norm_ordering_and_cauchy_schwarz(model1):
    grid = model1.grid
    g, h = random_function(grid, 3), random_function(grid, 4)
    n0, n1, n2 = (x_alpha_norm(g, a) for a in (0.0, 1.0, 2.0))
    assert n0 == pytest.approx(q_norm(g), rel=1e-13)
    assert n0 <= n1 <= n2
    assert abs(q_inner(g, h)) <= q_norm(g) * q_norm(h) * (1 + 1e-14)


def test_serialization_roundtrip(model1):
    g = random_function(model1.grid, 5)
    back = FourierFunction.from_dict(g.to_dict(), model1.grid)
    assert np.array_equal(back.coeffs, g.coeffs)


def test_sine_coords_roundtrip(model1):
    g = random_function(model1.grid, 6, odd=True)
    assert np.allclose(FourierFunction.from_sine(g.sine_coords(), model1.grid).coeffs, g.coeffs,
                       atol=1e-14)


def test_bad_shape():
    with pytest.raises(ValueError):
        FourierFunction(2, np.zeros((4, 3)))


# -- coupling between radial and phase-space functions -----------------------


def test_adjointness(model1):
    table = model1.table
    g = random_function(model1.grid, 7, k_max=table.k_max, odd=True)
    rng = np.random.default_rng(8)
    Psi = rng.standard_normal(len(table.nodes))
    lhs = radial_inner(u_prime_from_g(g, table), Psi, table.nodes)
    rhs = 4 * math.pi * q_inner(g, psi_coeffs_from_Psi(Psi, table))
    assert lhs == pytest.approx(rhs, rel=1e-12)


def test_psi_of_constant_against_quad(model1):
    table = model1.table
    grid = model1.grid
    ob = grid.orbits
    psi = psi_coeffs_from_Psi(lambda r: np.ones_like(r), table, n_phi=256)
    for a in (0, 101, 200):
        rm, rp = ob.r_minus[a], ob.r_plus[a]

        def theta(r, a=a):
            return float(ob.theta(np.array([r]), rows=np.array([a]))[0, 0])

        for k in (1, 2, 5):
            mom = quad(lambda r: math.sin(k * theta(r)), rm, rp, limit=200,
                       epsabs=1e-13, epsrel=1e-11)[0]
            want = (-1j / math.pi) * grid.q_prime[a] * grid.omega1[a] * mom
            assert abs(psi.coeffs[table.k_max + k, a] - want) <= 1e-8 * max(1.0, abs(want))


def test_psi_nodal_converges_to_orbit_quadrature(model1):
    # the nodal rule on radial nodes approaches the per-orbit quadrature as n_r grows
    grid = model1.grid
    ref = sine_moments(lambda r: np.exp(-r), build_sine_table(grid, 8, 16), n_phi=512)
    errs = []
    for n_r in (48, 96, 192):
        t = build_sine_table(grid, 8, n_r)
        errs.append(np.linalg.norm(sine_moments(np.exp(-t.nodes.r), t) - ref) / np.linalg.norm(ref))
    assert errs[0] > errs[1] > errs[2]
    assert errs[2] < 0.05


def test_psi_of_zero(model1):
    psi = psi_coeffs_from_Psi(np.zeros(len(model1.table.nodes)), model1.table)
    assert not psi.coeffs.any() and psi.is_odd()


def test_even_g_has_no_field(model1):
    g = random_function(model1.grid, 9, k_max=model1.table.k_max, odd=False)
    assert np.max(np.abs(u_prime_from_g(g, model1.table))) == 0.0


def test_field_vanishes_outside_support(model1):
    g = random_function(model1.grid, 10, k_max=model1.table.k_max, odd=True)
    r_out = np.array([1.01, 2.0]) * np.max(model1.grid.r_plus)
    assert np.all(u_prime_from_g(g, model1.table, r=r_out) == 0)


def test_field_real_for_real_odd(model1):
    g = random_function(model1.grid, 11, k_max=model1.table.k_max, odd=True)
    u = u_prime_from_g(g, model1.table)
    # U'_{Tg} is real for real g: g_k = -i b_k gives real sums
    assert np.max(np.abs(u.imag)) <= 1e-12 * np.max(np.abs(u))


def test_kt_self_adjoint_positive(model1):
    table = model1.table
    g = random_function(model1.grid, 12, k_max=table.k_max, odd=True)
    h = random_function(model1.grid, 13, k_max=table.k_max, odd=True)
    assert q_inner(kt_apply(g, table), h) == pytest.approx(q_inner(g, kt_apply(h, table)), rel=1e-11)
    assert q_inner(kt_apply(g, table), g).real >= 0


def test_L_decomposition(model1):
    table = model1.table
    g = random_function(model1.grid, 14, k_max=table.k_max, odd=True)
    lhs = apply_L(g, table)
    rhs = minus_T_squared(g) - kt_apply(g, table)
    assert np.allclose(lhs.coeffs, rhs.coeffs, rtol=0, atol=1e-12 * np.max(np.abs(rhs.coeffs)))


def test_radial_nodes_volume():
    nodes = radial_nodes(2.0, 20)
    assert np.sum(nodes.m) == pytest.approx(4 * math.pi * 8 / 3, rel=1e-13)


@settings(max_examples=25, deadline=None)
@given(st.integers(0, 10_000), st.one_of(st.just(0.0), st.floats(1e-3, 3.0), st.floats(-3.0, -1e-3)))
def test_T_linear_and_norm_scaling(seed, alpha):
    from conftest import get_model

    grid = get_model(1.0).grid
    g = random_function(grid, seed)
    assert q_norm(g * alpha) == pytest.approx(abs(alpha) * q_norm(g), rel=1e-13)
    Tg = apply_T(g * alpha)
    assert np.allclose(Tg.coeffs, alpha * apply_T(g).coeffs, rtol=1e-14, atol=0)
