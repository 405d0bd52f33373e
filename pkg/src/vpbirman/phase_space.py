"""Fourier-in-angle representation of spherically symmetric phase-space functions.

A function g(theta, E, ell) is stored through its coefficients g_k on the
nodes of a :class:`~vpbirman.orbits.DomainGrid`, for k = -k_max..k_max.  The
transport operator T acts diagonally, T g_k = i k omega1 g_k, and the
weighted inner product

    (g, h)_Q = 16 pi^3 sum_k  iint_D  conj(g_k) h_k  ell dell dE / (omega1 |Q'|)

uses dI = dE / omega1 to pass from action to energy.

Radial functions live on Gauss-Legendre nodes of (0, r_max) with the
L^2_r inner product <Psi, Phi> = 4 pi int r^2 Psi Phi dr.  The two spaces are
linked by the pair

    psi_coeffs_from_Psi : Psi -> |Q'| p_r Psi   (Fourier coefficients)
    u_prime_from_g      : g   -> U'_{T g}

which share one table of sin(k theta_a(r_i)) values and are exact discrete
adjoints: <u_prime_from_g(g), Psi> = 4 pi (g, psi_coeffs_from_Psi(Psi))_Q.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
from scipy.special import roots_legendre

from .errors import SpectrumHit
from .orbits import RADIAL, DomainGrid

Q_NORMALIZATION = 16.0 * math.pi**3


# ---------------------------------------------------------------------------
# Radial discretization
# ---------------------------------------------------------------------------


@dataclass(frozen=True, eq=False)
class RadialNodes:
    """Quadrature nodes on (0, r_max); ``m`` folds in the 4 pi r^2 volume factor."""

    r: np.ndarray
    w: np.ndarray

    @property
    def m(self) -> np.ndarray:
        return 4.0 * math.pi * self.r**2 * self.w

    def __len__(self):
        return len(self.r)


def radial_nodes(r_max: float, n_r: int) -> RadialNodes:
    x, w = roots_legendre(n_r)
    return RadialNodes(r=0.5 * r_max * (x + 1.0), w=0.5 * r_max * w)


def radial_inner(psi, phi, nodes: RadialNodes):
    """<Psi, Phi> = 4 pi int r^2 conj(Psi) Phi dr on the radial nodes."""
    return np.sum(nodes.m * np.conj(psi) * phi)


def support_radius(grid: DomainGrid) -> float:
    pot = grid.potential
    if pot.r_support is not None:
        return float(pot.r_support)
    return float(np.max(grid.r_plus))


@dataclass(frozen=True, eq=False)
class SineTable:
    """sin(k theta_a(r_i)) on the orbit support, zero elsewhere.

    ``s`` has shape (n_nodes, k_max, n_r) with k = 1..k_max along axis 1.
    """

    grid: DomainGrid
    nodes: RadialNodes
    k_max: int
    s: np.ndarray
    q: np.ndarray = field(repr=False)

    @property
    def ks(self) -> np.ndarray:
        return np.arange(1, self.k_max + 1)

    @property
    def n_nodes(self) -> int:
        return self.grid.n_nodes


def q_weights(grid: DomainGrid) -> np.ndarray:
    """Per-node weight of (., .)_Q: 16 pi^3 W / (omega1 |Q'|)."""
    return Q_NORMALIZATION * grid.weight / (grid.omega1 * grid.q_prime)


def build_sine_table(grid: DomainGrid, k_max: int = 32, n_r: int = 64,
                     nodes: RadialNodes | None = None) -> SineTable:
    if k_max < 1:
        raise ValueError("k_max must be positive")
    nodes = radial_nodes(support_radius(grid), n_r) if nodes is None else nodes
    theta = grid.orbits.theta(nodes.r)
    inside = np.isfinite(theta)
    theta = np.where(inside, theta, 0.0)
    ks = np.arange(1, k_max + 1, dtype=float)
    s = np.sin(theta[:, None, :] * ks[None, :, None]) * inside[:, None, :]
    return SineTable(grid=grid, nodes=nodes, k_max=k_max, s=s, q=q_weights(grid))


# ---------------------------------------------------------------------------
# Fourier functions
# ---------------------------------------------------------------------------


@dataclass(eq=False)
class FourierFunction:
    """Coefficients g_k on grid nodes; ``coeffs[k + k_max, a]``."""

    k_max: int
    coeffs: np.ndarray
    grid: DomainGrid | None = field(default=None, repr=False)

    def __post_init__(self):
        self.coeffs = np.asarray(self.coeffs, dtype=complex)
        if self.coeffs.ndim != 2 or self.coeffs.shape[0] != 2 * self.k_max + 1:
            raise ValueError("coeffs must have shape (2 k_max + 1, n_nodes)")

    @property
    def ks(self) -> np.ndarray:
        return np.arange(-self.k_max, self.k_max + 1)

    @property
    def n_nodes(self) -> int:
        return self.coeffs.shape[1]

    def component(self, k: int) -> np.ndarray:
        return self.coeffs[k + self.k_max]

    @classmethod
    def zeros(cls, k_max, n_nodes, grid=None):
        return cls(k_max, np.zeros((2 * k_max + 1, n_nodes), dtype=complex), grid)

    @classmethod
    def from_sine(cls, b, grid=None):
        """Real odd function sum_k b_k sin(k theta); b has shape (k_max, n_nodes)."""
        b = np.asarray(b, dtype=float)
        k_max = b.shape[0]
        out = cls.zeros(k_max, b.shape[1], grid)
        out.coeffs[k_max + 1 :] = -0.5j * b
        out.coeffs[:k_max] = 0.5j * b[::-1]
        return out

    def sine_coords(self) -> np.ndarray:
        """b_k = i (g_k - g_{-k}) for k >= 1; inverse of :meth:`from_sine` on real odd g."""
        pos = self.coeffs[self.k_max + 1 :]
        neg = self.coeffs[: self.k_max][::-1]
        return (1j * (pos - neg)).real

    def odd_part(self):
        flipped = self.coeffs[::-1]
        return FourierFunction(self.k_max, 0.5 * (self.coeffs - flipped), self.grid)

    def is_odd(self, tol=0.0) -> bool:
        scale = max(np.max(np.abs(self.coeffs), initial=0.0), 1e-300)
        return bool(np.max(np.abs(self.coeffs + self.coeffs[::-1]), initial=0.0) <= tol * scale)

    def is_even(self, tol=0.0) -> bool:
        scale = max(np.max(np.abs(self.coeffs), initial=0.0), 1e-300)
        return bool(np.max(np.abs(self.coeffs - self.coeffs[::-1]), initial=0.0) <= tol * scale)

    def is_real(self, tol=0.0) -> bool:
        """Reality convention g_{-k} = conj(g_k)."""
        scale = max(np.max(np.abs(self.coeffs), initial=0.0), 1e-300)
        return bool(np.max(np.abs(self.coeffs[::-1] - np.conj(self.coeffs)), initial=0.0)
                    <= tol * scale)

    def with_coeffs(self, coeffs):
        return FourierFunction(self.k_max, coeffs, self.grid)

    def __add__(self, other):
        return self.with_coeffs(self.coeffs + other.coeffs)

    def __sub__(self, other):
        return self.with_coeffs(self.coeffs - other.coeffs)

    def __mul__(self, alpha):
        return self.with_coeffs(alpha * self.coeffs)

    __rmul__ = __mul__

    def __neg__(self):
        return self.with_coeffs(-self.coeffs)

    def to_dict(self) -> dict:
        return {
            "k_max": self.k_max,
            "real": self.coeffs.real.tolist(),
            "imag": self.coeffs.imag.tolist(),
        }

    @classmethod
    def from_dict(cls, data: dict, grid=None):
        coeffs = np.asarray(data["real"]) + 1j * np.asarray(data["imag"])
        return cls(int(data["k_max"]), coeffs, grid)


def _omega_of(g: FourierFunction, grid=None) -> np.ndarray:
    grid = grid if grid is not None else g.grid
    if grid is None:
        raise ValueError("a DomainGrid carrying omega1 is required")
    return grid.omega1


def apply_T(g: FourierFunction, grid=None) -> FourierFunction:
    """(T g)_k = i k omega1 g_k."""
    w = _omega_of(g, grid)
    return g.with_coeffs(1j * g.ks[:, None] * w[None, :] * g.coeffs)


def minus_T_squared(g: FourierFunction, grid=None) -> FourierFunction:
    w = _omega_of(g, grid)
    return g.with_coeffs((g.ks[:, None] * w[None, :]) ** 2 * g.coeffs)


def resolvent_shift(g: FourierFunction, lam: float, grid=None) -> FourierFunction:
    """(-T^2 - lam)^{-1} on odd functions: g_k -> g_k / (k^2 omega1^2 - lam)."""
    w = _omega_of(g, grid)
    denom = (g.ks[:, None] * w[None, :]) ** 2 - lam
    nonzero = g.ks != 0
    if np.any(denom[nonzero] <= 0):
        raise SpectrumHit(f"lambda={lam!r} reaches the spectrum of -T^2 (delta1^2 <= lambda)")
    out = np.zeros_like(g.coeffs)
    out[nonzero] = g.coeffs[nonzero] / denom[nonzero]
    return g.with_coeffs(out)


def q_inner(g: FourierFunction, h: FourierFunction, grid=None) -> complex:
    grid = grid if grid is not None else g.grid
    q = q_weights(grid)
    return complex(np.sum(q[None, :] * np.conj(g.coeffs) * h.coeffs))


def q_norm(g: FourierFunction, grid=None) -> float:
    return math.sqrt(max(q_inner(g, g, grid).real, 0.0))


def x_alpha_norm(g: FourierFunction, alpha: float = 0.0, grid=None) -> float:
    grid = grid if grid is not None else g.grid
    q = q_weights(grid)
    factor = (1.0 + g.ks.astype(float) ** 2) ** alpha
    return math.sqrt(float(np.sum(factor[:, None] * q[None, :] * np.abs(g.coeffs) ** 2)))


# ---------------------------------------------------------------------------
# Coupling between radial functions and Fourier coefficients
# ---------------------------------------------------------------------------


def _assemble_odd(k_max, pos, grid):
    """Odd FourierFunction from its k >= 1 coefficients, shape (k_max, n)."""
    out = FourierFunction.zeros(k_max, pos.shape[1], grid)
    out.coeffs[k_max + 1 :] = pos
    out.coeffs[:k_max] = -pos[::-1]
    return out


def sine_moments(Psi, table: SineTable, n_phi: int | None = None) -> np.ndarray:
    """int_{r_-}^{r_+} Psi(r) sin(k theta(r)) dr for k = 1..k_max; shape (k_max, n_nodes).

    ``Psi`` is either an array of values on the table's radial nodes or a
    callable; callables are integrated per orbit in the substitution variable.
    """
    if callable(Psi):
        return _sine_moments_callable(Psi, table, n_phi)
    vals = np.asarray(Psi)
    if vals.shape != (len(table.nodes),):
        raise ValueError("Psi samples must match the radial nodes")
    return np.einsum("akr,r->ka", table.s, table.nodes.w * vals)


def _sine_moments_callable(Psi, table: SineTable, n_phi=None, chunk=64):
    grid = table.grid
    ob = grid.orbits
    k_max = table.k_max
    n_phi = n_phi or max(128, 8 * k_max)
    ks = np.arange(1, k_max + 1, dtype=float)
    out = np.zeros((k_max, grid.n_nodes), dtype=complex)
    complex_input = False
    for start in range(0, grid.n_nodes, chunk):
        rows = np.arange(start, min(start + chunk, grid.n_nodes))
        radial = ob.kind[rows] == RADIAL
        u = (np.arange(n_phi) + 0.5) / n_phi
        phi = np.where(radial[:, None], math.pi / 2 * (1 + u[None, :]), math.pi * u[None, :])
        rm = ob.r_minus[rows, None]
        rp = ob.r_plus[rows, None]
        c, h = 0.5 * (rm + rp), 0.5 * (rp - rm)
        r = np.where(radial[:, None], -rp * np.cos(phi), c - h * np.cos(phi))
        jac = np.where(radial[:, None], rp * np.sin(phi) * (math.pi / 2) / n_phi,
                       h * np.sin(phi) * math.pi / n_phi)
        theta = ob.angle_at_phi(phi, rows)
        vals = np.asarray(Psi(r)) * jac
        complex_input |= np.iscomplexobj(vals)
        sines = np.sin(theta[:, None, :] * ks[None, :, None])
        out[:, rows] = np.einsum("akm,am->ka", sines, vals)
    return out if complex_input else out.real


def psi_coeffs_from_Psi(Psi, table: SineTable, n_phi: int | None = None) -> FourierFunction:
    """Fourier coefficients of psi = |Q'| p_r Psi.

    psi_k = -(i/pi) |Q'| omega1 int_{r_-}^{r_+} Psi(r) sin(k theta(r)) dr, odd in k.
    """
    grid = table.grid
    moments = sine_moments(Psi, table, n_phi)
    pos = (-1j / math.pi) * (grid.q_prime * grid.omega1)[None, :] * moments
    return _assemble_odd(table.k_max, pos, grid)


def u_prime_from_g(g: FourierFunction, table: SineTable, r=None) -> np.ndarray:
    """U'_{Tg}(r) = (16 pi^2 i / r^2) sum_a W_a sum_{k != 0} g_{k,a} sin(k theta_a(r)).

    Evaluated on the table's radial nodes unless ``r`` is given.  Only the odd
    part of g contributes.  The result is complex in general and real for
    real odd g.
    """
    grid = table.grid
    k_max = min(g.k_max, table.k_max)
    pos = g.coeffs[g.k_max + 1 : g.k_max + 1 + k_max]
    neg = g.coeffs[g.k_max - k_max : g.k_max][::-1]
    odd = (pos - neg) * grid.weight[None, :]
    if r is None:
        radius = table.nodes.r
        sines = table.s[:, :k_max, :]
    else:
        radius = np.atleast_1d(np.asarray(r, dtype=float))
        theta = grid.orbits.theta(radius)
        inside = np.isfinite(theta)
        theta = np.where(inside, theta, 0.0)
        ks = np.arange(1, k_max + 1, dtype=float)
        sines = np.sin(theta[:, None, :] * ks[None, :, None]) * inside[:, None, :]
    total = np.einsum("ka,akr->r", odd, sines)
    return 16.0 * math.pi**2 * 1j * total / radius**2


def kt_apply(g: FourierFunction, table: SineTable) -> FourierFunction:
    """K T g = psi_coeffs_from_Psi(U'_{Tg}); self-adjoint and positive on (., .)_Q."""
    return psi_coeffs_from_Psi(u_prime_from_g(g, table), table)


def apply_L(g: FourierFunction, table: SineTable) -> FourierFunction:
    """L g = -T^2 g - K T g."""
    return minus_T_squared(g, table.grid) - kt_apply(g, table)
