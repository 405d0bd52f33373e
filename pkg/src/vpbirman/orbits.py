"""Orbit geometry in a central potential: turning points, periods and action-angle maps.

For a bound orbit of energy e and angular momentum ell the radial motion is
governed by the effective potential U_eff(r, ell) = U(r) + ell^2 / (2 r^2).
Writing 2 (e - U_eff(r)) = (r - r_-)(r_+ - r) g(r) with g > 0 smooth and
substituting r = c - h cos(phi) (c the midpoint, h the half width) turns the
period integral into

    T1 = 2 * int_0^pi dphi / sqrt(g(r(phi))),

whose integrand extends to a smooth 2 pi periodic function.  Midpoint sampling in phi
therefore converges spectrally; a DCT of the samples gives the cosine series
of 1/sqrt(g), whose antiderivative yields the angle map theta(r) in closed
form with theta(r_-) = 0 and theta(r_+) = pi exactly.

Radial orbits (ell = 0) pass through the centre.  They are parametrised by the
symmetric well x = -r_+ cos(phi) on [-r_+, r_+], which keeps the integrand
smooth whenever U is even and regular at the origin.
"""

from __future__ import annotations

import csv
import math
import warnings
from dataclasses import dataclass
from pathlib import Path

import numpy as np
from scipy.fft import dct
from scipy.optimize import brentq, minimize_scalar
from scipy.special import roots_jacobi, roots_legendre

from .errors import BracketFailure, DegenerateOrbit, OutOfRange, QuadratureNotConverged, RootNotBracketed
from .steady_state import RadialPotential, SteadyState, q_prime_abs

REGULAR, DEGENERATE, RADIAL = 0, 1, 2
_EPS = np.finfo(float).eps


def _potential_of(source) -> RadialPotential:
    return source.potential if isinstance(source, SteadyState) else source


def u_eff(pot, r, ell):
    """U(r) + ell^2 / (2 r^2)."""
    pot = _potential_of(pot)
    r = np.asarray(r, dtype=float)
    ell = np.asarray(ell, dtype=float)
    with np.errstate(divide="ignore", invalid="ignore"):
        out = np.asarray(pot.U(r)) + np.where(ell == 0, 0.0, ell**2 / (2.0 * r**2))
    return float(out) if out.ndim == 0 else out


def _bisect(f, lo, hi, max_iter=250):
    """Vectorised bisection; f(lo) and f(hi) must differ in sign elementwise."""
    lo = np.array(lo, dtype=float)
    hi = np.array(hi, dtype=float)
    sign_lo = np.sign(f(lo))
    for _ in range(max_iter):
        mid = 0.5 * (lo + hi)
        active = (mid > lo) & (mid < hi)
        if not active.any():
            break
        same = np.sign(f(mid)) == sign_lo
        lo = np.where(active & same, mid, lo)
        hi = np.where(active & ~same, mid, hi)
    return 0.5 * (lo + hi)


def _grow_until(f, start, factor=2.0, max_steps=400):
    x = np.array(start, dtype=float)
    for _ in range(max_steps):
        need = ~(f(x) > 0)
        if not need.any():
            return x
        x = np.where(need, x * factor, x)
    raise BracketFailure("no sign change found while expanding the bracket")


def r0_of_beta(pot, beta):
    """Radius r0 minimising U_eff and the minimum e_min = U_eff(r0, beta).

    Solves r^3 U'(r) = beta by bisection; beta = 0 gives r0 = 0, e_min = U(0).
    """
    pot = _potential_of(pot)
    beta_arr = np.atleast_1d(np.asarray(beta, dtype=float))
    if np.any(beta_arr < 0):
        raise ValueError("beta must be nonnegative")
    r0 = np.zeros_like(beta_arr)
    e_min = np.full_like(beta_arr, pot.U0)
    pos = beta_arr > 0
    if pos.any():
        b = beta_arr[pos]

        def f(r):
            with np.errstate(invalid="ignore", divide="ignore"):
                moment = np.where(r > 0, r**3 * np.asarray(pot.dU(r)), 0.0)
            return moment - b

        hi = _grow_until(f, np.full_like(b, pot.length_scale()))
        root = _bisect(f, np.zeros_like(b), hi)
        r0[pos] = root
        e_min[pos] = np.asarray(pot.U(root)) + b / (2.0 * root**2)
    if np.ndim(beta) == 0:
        return float(r0[0]), float(e_min[0])
    return r0.reshape(np.shape(beta)), e_min.reshape(np.shape(beta))


def e_min_of_beta(pot, beta):
    return r0_of_beta(pot, beta)[1]


def turning_points(pot, e, ell, *, _r0=None):
    """Return ``(r_minus, r_plus)``; both equal r0 at e = e_min.

    For ell = 0 the orbit passes through the centre and r_minus = 0.
    """
    pot = _potential_of(pot)
    scalar = np.ndim(e) == 0 and np.ndim(ell) == 0
    e_b, ell_b = np.broadcast_arrays(np.asarray(e, dtype=float), np.asarray(ell, dtype=float))
    e_f, ell_f = e_b.ravel().copy(), ell_b.ravel().copy()
    beta = ell_f**2
    r0, e_min = _r0 if _r0 is not None else r0_of_beta(pot, beta)
    r0, e_min = np.atleast_1d(r0), np.atleast_1d(e_min)
    scale = np.maximum(np.abs(e_min), np.abs(e_f))
    below = e_f < e_min - 1e-12 * scale
    if below.any():
        raise ValueError("energy below the minimum of the effective potential")
    degenerate = e_f <= e_min

    def f(r):
        return u_eff(pot, r, ell_f) - e_f

    lo_plus = np.where(degenerate, r0, r0)
    start = np.where(r0 > 0, 2.0 * r0, pot.length_scale())
    start = np.where(degenerate, r0, start)
    hi_plus = _grow_until(lambda r: np.where(degenerate, 1.0, f(r)), start)
    hi_plus = np.where(degenerate, r0, hi_plus)
    r_plus = _bisect(lambda r: np.where(degenerate, 0.0, f(r)), lo_plus, hi_plus)
    r_plus = np.where(degenerate, r0, r_plus)

    r_minus = np.zeros_like(r0)
    inner = (beta > 0) & ~degenerate
    if inner.any():
        def f_in(r):
            return u_eff(pot, r, ell_f[inner]) - e_f[inner]

        lo = r0[inner] * 0.5
        for _ in range(2000):
            need = ~(f_in(lo) > 0)
            if not need.any():
                break
            lo = np.where(need, lo * 0.5, lo)
        else:
            raise BracketFailure("could not bracket the inner turning point")
        r_minus[inner] = _bisect(f_in, lo, r0[inner])
    r_minus = np.where(degenerate, r0, r_minus)
    merged = (beta > 0) & (r_plus - r_minus < 1e-9 * r0)
    if merged.any():
        warnings.warn(f"{int(merged.sum())} orbit(s) with merged turning points", DegenerateOrbit,
                      stacklevel=2)
    if scalar:
        return float(r_minus[0]), float(r_plus[0])
    return r_minus.reshape(e_b.shape), r_plus.reshape(e_b.shape)


# ---------------------------------------------------------------------------
# Orbit batches
# ---------------------------------------------------------------------------


def _midpoints(n):
    return (np.arange(n) + 0.5) * math.pi / n


def _sine_series(coef, phi):
    """sum_{j>=1} coef[..., j] * sin(j phi) by Clenshaw recurrence.

    coef has shape (n_orb, N); phi has shape (n_orb, m).
    """
    n_terms = coef.shape[1]
    two_cos = 2.0 * np.cos(phi)
    b1 = np.zeros_like(phi)
    b2 = np.zeros_like(phi)
    for j in range(n_terms - 1, 0, -1):
        b1, b2 = coef[:, j : j + 1] + two_cos * b1 - b2, b1
    return b1 * np.sin(phi)


@dataclass(frozen=True, eq=False)
class OrbitBatch:
    """Per-orbit quantities for a flat batch of (e, ell) pairs.

    ``coeffs[i]`` holds the cosine coefficients a_j of 1/sqrt(g) in the phi
    variable (zero padded), so that the travel time from r_- is
    a_0 phi / 2 + sum_j a_j sin(j phi) / j.
    """

    e: np.ndarray
    ell: np.ndarray
    r0: np.ndarray
    e_min: np.ndarray
    r_minus: np.ndarray
    r_plus: np.ndarray
    T1: np.ndarray
    action: np.ndarray
    kind: np.ndarray
    coeffs: np.ndarray

    @property
    def beta(self):
        return self.ell**2

    @property
    def omega1(self):
        return 2.0 * math.pi / self.T1

    def __len__(self):
        return len(self.e)

    def _travel_time(self, phi, rows):
        coef = self.coeffs[rows]
        j = np.arange(coef.shape[1], dtype=float)
        j[0] = 1.0
        scaled = coef / j
        return coef[:, :1] * phi / 2.0 + _sine_series(scaled, phi)

    def angle_at_phi(self, phi, rows=None):
        """theta as a function of the substitution variable; phi has shape (len(rows), m).

        For regular orbits phi runs over [0, pi] from r_- to r_+; for radial
        orbits phi in [pi/2, pi] covers the centre to r_+.
        """
        rows = np.arange(len(self)) if rows is None else np.asarray(rows)
        phi = np.asarray(phi, dtype=float)
        t = self._travel_time(phi, rows)
        radial = (self.kind[rows] == RADIAL)[:, None]
        if radial.any():
            half = self._travel_time(np.full((len(rows), 1), math.pi / 2), rows)
            t = np.where(radial, t - half, t)
        return self.omega1[rows, None] * t

    def theta(self, r, rows=None, clip_tol=1e-12):
        """Angle theta(r) for every orbit in ``rows``; NaN outside [r_-, r_+].

        Returns an array of shape (len(rows), len(r)).
        """
        rows = np.arange(len(self)) if rows is None else np.asarray(rows)
        r = np.atleast_1d(np.asarray(r, dtype=float))[None, :]
        rm = self.r_minus[rows, None]
        rp = self.r_plus[rows, None]
        tol = clip_tol * rp
        inside = (r >= rm - tol) & (r <= rp + tol)
        radial = (self.kind[rows] == RADIAL)[:, None]
        c = 0.5 * (rm + rp)
        h = np.maximum(0.5 * (rp - rm), 1e-300)
        phi_reg = np.arccos(np.clip((c - r) / h, -1.0, 1.0))
        phi_rad = np.arccos(np.clip(-r / rp, -1.0, 1.0))
        phi = np.where(radial, phi_rad, phi_reg)
        t = self._travel_time(phi, rows)
        if radial.any():
            half = self._travel_time(np.full((len(rows), 1), math.pi / 2), rows)
            t = np.where(radial, t - half, t)
        out = self.omega1[rows, None] * t
        return np.where(inside, out, np.nan)


def _regular_samples(pot, e, ell, rm, rp, n):
    phi = _midpoints(n)[None, :]
    c = 0.5 * (rm + rp)[:, None]
    h = 0.5 * (rp - rm)[:, None]
    r = c - h * np.cos(phi)
    below = 2.0 * h * np.sin(phi / 2) ** 2
    above = 2.0 * h * np.cos(phi / 2) ** 2
    g = 2.0 * (e[:, None] - u_eff(pot, r, ell[:, None])) / (below * above)
    return phi, h, g


def _radial_samples(pot, e, rp, n):
    phi = _midpoints(n)[None, :]
    x = -rp[:, None] * np.cos(phi)
    width2 = (rp[:, None] * np.sin(phi)) ** 2
    with np.errstate(divide="ignore", invalid="ignore"):
        g = 2.0 * (e[:, None] - np.asarray(pot.U(np.abs(x)))) / width2
    return phi, g


def compute_orbits(pot, e, ell, *, rtol=1e-10, n_min=32, n_max=8192, degenerate_rel=1e-8):
    """Turning points, T1, omega1, action and the angle map for many orbits."""
    pot = _potential_of(pot)
    e = np.atleast_1d(np.asarray(e, dtype=float)).ravel()
    ell = np.atleast_1d(np.asarray(ell, dtype=float)).ravel()
    e, ell = np.broadcast_arrays(e, ell)
    e, ell = e.copy(), ell.copy()
    n_orb = len(e)
    beta = ell**2
    r0, e_min = r0_of_beta(pot, beta)
    r0, e_min = np.atleast_1d(r0), np.atleast_1d(e_min)
    rm, rp = turning_points(pot, e, ell, _r0=(r0, e_min))
    rm, rp = np.atleast_1d(rm), np.atleast_1d(rp)

    kind = np.full(n_orb, REGULAR)
    radial = beta == 0
    kind[radial] = RADIAL
    gap = e - e_min
    with np.errstate(invalid="ignore"):
        near_min = gap < degenerate_rel * np.abs(e_min)
    kind[~radial & near_min] = DEGENERATE

    T1 = np.empty(n_orb)
    action = np.empty(n_orb)
    coeff_rows: dict[int, np.ndarray] = {}

    # nearly circular and centred orbits: harmonic approximation about r0
    deg = kind == DEGENERATE
    if deg.any():
        b = beta[deg]
        w = np.sqrt(np.asarray(pot.d2U(r0[deg])) + 3.0 * b / r0[deg] ** 4)
        T1[deg] = 2 * math.pi / w
        action[deg] = np.maximum(gap[deg], 0.0) / w
        for i, t in zip(np.flatnonzero(deg), T1[deg]):
            coeff_rows[i] = np.array([t / math.pi])
    rad_deg = radial & near_min
    if rad_deg.any():
        w = 2.0 * np.sqrt(np.asarray(pot.d2U(np.zeros(rad_deg.sum()))))
        T1[rad_deg] = 2 * math.pi / w
        action[rad_deg] = np.maximum(gap[rad_deg], 0.0) / w
        for i, t in zip(np.flatnonzero(rad_deg), T1[rad_deg]):
            coeff_rows[i] = np.array([2.0 * t / math.pi])

    noise = 64 * _EPS * (np.abs(e) + np.abs(e_min)) / np.maximum(np.abs(gap), 1e-300)
    tol = np.maximum(rtol, noise)

    for which in (REGULAR, RADIAL):
        todo = np.flatnonzero((kind == which) & ~(radial & near_min))
        n = n_min
        previous = None
        while todo.size:
            if which == REGULAR:
                _, h, g = _regular_samples(pot, e[todo], ell[todo], rm[todo], rp[todo], n)
            else:
                _, g = _radial_samples(pot, e[todo], rp[todo], n)
            if np.any(~(g > 0)):
                raise QuadratureNotConverged("nonpositive g encountered; orbit data inconsistent")
            a = dct(1.0 / np.sqrt(g), type=2, axis=1) / n
            t = math.pi * a[:, 0] * (1.0 if which == REGULAR else 0.5)
            if previous is not None:
                # rounding in e - U_eff near the endpoints grows linearly with n
                ok = np.abs(t - previous) <= np.maximum(tol[todo], noise[todo] * n / 32) * np.abs(t)
            else:
                ok = np.zeros(todo.size, dtype=bool)
            phi = _midpoints(n)
            for local in np.flatnonzero(ok):
                i = todo[local]
                T1[i] = t[local]
                coeff_rows[i] = a[local]
                if which == REGULAR:
                    action[i] = h[local, 0] ** 2 / n * np.sum(np.sqrt(g[local]) * np.sin(phi) ** 2)
                else:
                    action[i] = rp[i] ** 2 / (2 * n) * np.sum(np.sqrt(g[local]) * np.sin(phi) ** 2)
            todo = todo[~ok]
            previous = t[~ok]
            n *= 2
            if todo.size and n > n_max:
                raise QuadratureNotConverged(
                    f"period quadrature did not converge with {n_max} nodes for {todo.size} orbits"
                )

    width = max(len(v) for v in coeff_rows.values()) if coeff_rows else 1
    coeffs = np.zeros((n_orb, width))
    for i, v in coeff_rows.items():
        coeffs[i, : len(v)] = v
    return OrbitBatch(e=e, ell=ell, r0=r0, e_min=e_min, r_minus=rm, r_plus=rp,
                      T1=T1, action=action, kind=kind, coeffs=coeffs)


def period_T1(pot, e, ell, **kw):
    """Radial period T1(e, ell)."""
    batch = compute_orbits(pot, e, ell, **kw)
    return float(batch.T1[0]) if np.ndim(e) == 0 and np.ndim(ell) == 0 else batch.T1


def omega1(pot, e, ell, **kw):
    return 2 * math.pi / period_T1(pot, e, ell, **kw)


def action_I(pot, e, ell, **kw):
    """Radial action I = (1/pi) int_{r_-}^{r_+} sqrt(2(e - U_eff)) dr."""
    batch = compute_orbits(pot, e, ell, **kw)
    return float(batch.action[0]) if np.ndim(e) == 0 and np.ndim(ell) == 0 else batch.action


def theta_of_r(pot, r, e, ell, *, tol=1e-10):
    """Angle variable on the outgoing half orbit, theta in [0, pi]."""
    batch = compute_orbits(pot, e, ell)
    rm, rp = batch.r_minus[0], batch.r_plus[0]
    r_arr = np.atleast_1d(np.asarray(r, dtype=float))
    if np.any(r_arr < rm - tol * rp) or np.any(r_arr > rp + tol * rp):
        raise OutOfRange(f"r outside [{rm}, {rp}]")
    out = batch.theta(np.clip(r_arr, rm, rp))[0]
    return float(out[0]) if np.ndim(r) == 0 else out


# ---------------------------------------------------------------------------
# The domain D and its quadrature
# ---------------------------------------------------------------------------


def beta_star(source, e0: float | None = None) -> float:
    """Largest beta with e_min(beta) <= e0, i.e. the root of e_min(beta) = e0."""
    pot = _potential_of(source)
    e0 = pot.e0 if e0 is None else e0
    if e0 is None:
        raise ValueError("a cutoff energy e0 is required")
    if pot.r_support is not None and math.isfinite(pot.U0):
        hi = 2.0 * pot.r_support**2 * (e0 - pot.U0)
    else:
        hi = pot.length_scale() ** 2
        for _ in range(200):
            if e_min_of_beta(pot, hi) > e0:
                break
            hi *= 2.0
    lo_val = pot.U0 - e0
    hi_val = e_min_of_beta(pot, hi) - e0
    if not (lo_val < 0 < hi_val):
        raise RootNotBracketed(f"e_min(beta) - e0 does not change sign on [0, {hi}]")
    lo = 0.0
    if not math.isfinite(pot.U0):
        lo = hi
        while e_min_of_beta(pot, lo) > e0:
            lo *= 0.5
    b_star = brentq(lambda b: e_min_of_beta(pot, b) - e0, lo, hi, xtol=1e-15 * hi, rtol=4 * _EPS,
                    maxiter=400)
    if pot.r_support is not None:
        r0 = r0_of_beta(pot, b_star)[0]
        if not (0 < r0 < pot.r_support):
            raise RootNotBracketed("r0(beta_*) not inside (0, r_Q)")
    return b_star


@dataclass(frozen=True, eq=False)
class DomainGrid:
    """Tensor quadrature of D = {(E, ell): ell in [0, ell_*], E in [e_min, e0]}.

    ``weight`` integrates against the measure ell dell dE.
    """

    potential: RadialPotential
    e0: float
    k: float
    beta_star: float
    ell_nodes: np.ndarray
    n_e: int
    ell: np.ndarray
    E: np.ndarray
    weight: np.ndarray
    q_prime: np.ndarray
    orbits: OrbitBatch

    @property
    def ell_star(self):
        return math.sqrt(self.beta_star)

    @property
    def n_nodes(self):
        return len(self.E)

    @property
    def omega1(self):
        return self.orbits.omega1

    @property
    def T1(self):
        return self.orbits.T1

    @property
    def r_minus(self):
        return self.orbits.r_minus

    @property
    def r_plus(self):
        return self.orbits.r_plus

    @property
    def beta(self):
        return self.ell**2

    def area(self) -> float:
        return float(np.sum(self.weight))


def build_domain_grid(source, n_beta: int = 24, n_e: int = 24, *, e0=None, k=None) -> DomainGrid:
    """Gauss-Legendre in ell on [0, ell_*] times Gauss in E on [e_min(ell), e0].

    The E rule is Gauss-Jacobi with weight (e0 - E)^{k-1} when k < 1 so that
    the |Q'| singularity is absorbed; weights are stored for the plain measure.
    """
    pot = _potential_of(source)
    if isinstance(source, SteadyState):
        e0 = source.e0 if e0 is None else e0
        k = source.k if k is None else k
    e0 = pot.e0 if e0 is None else e0
    k = 1.0 if k is None else k
    b_star = beta_star(pot, e0)
    l_star = math.sqrt(b_star)

    x, w = roots_legendre(n_beta)
    ell_nodes = 0.5 * l_star * (x + 1.0)
    ell_w = 0.5 * l_star * w
    _, emin = r0_of_beta(pot, ell_nodes**2)

    if k < 1.0:
        xe, we = roots_jacobi(n_e, k - 1.0, 0.0)
        we = we * (1.0 - xe) ** (1.0 - k)
    else:
        xe, we = roots_legendre(n_e)
    span = (e0 - emin)[:, None]
    E = emin[:, None] + 0.5 * span * (xe[None, :] + 1.0)
    W = (ell_w * ell_nodes)[:, None] * 0.5 * span * we[None, :]
    ell_full = np.repeat(ell_nodes, n_e)
    E = E.ravel()
    orbits = compute_orbits(pot, E, ell_full)
    return DomainGrid(
        potential=pot, e0=e0, k=k, beta_star=b_star, ell_nodes=ell_nodes, n_e=n_e,
        ell=ell_full, E=E, weight=W.ravel(), q_prime=np.asarray(q_prime_abs(k, E, e0)),
        orbits=orbits,
    )


# ---------------------------------------------------------------------------
# Bounds of the radial frequency on D
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class OmegaBounds:
    delta1: float
    Delta1: float
    delta1_err: float
    Delta1_err: float
    argmin: tuple[float, float]
    argmax: tuple[float, float]
    node_min: float
    node_max: float


def circular_frequency(pot, ell):
    """omega1 on the lower boundary E = e_min(ell): sqrt(U''(r0) + 3 U'(r0)/r0)."""
    pot = _potential_of(pot)
    ell = np.asarray(ell, dtype=float)
    r0, _ = r0_of_beta(pot, ell**2)
    r0 = np.asarray(r0)
    with np.errstate(divide="ignore", invalid="ignore"):
        w2 = np.where(r0 > 0, np.asarray(pot.d2U(r0)) + 3.0 * np.asarray(pot.dU(r0)) / r0,
                      4.0 * np.asarray(pot.d2U(np.zeros_like(r0))))
    out = np.sqrt(w2)
    return float(out) if out.ndim == 0 else out


def _extremes_on_curve(fun, lo, hi, n_samples=33):
    """Sampled argmin/argmax refined by bounded Brent; returns (min, max) records."""
    xs = np.linspace(lo, hi, n_samples)
    vals = np.array([fun(x) for x in xs])
    out = []
    for sign in (1.0, -1.0):
        i = int(np.argmin(sign * vals))
        a, b = xs[max(i - 1, 0)], xs[min(i + 1, n_samples - 1)]
        best_x, best_v = xs[i], vals[i]
        if b > a:
            res = minimize_scalar(lambda t: sign * fun(t), bounds=(a, b), method="bounded",
                                  options={"xatol": 1e-10 * max(abs(hi), 1.0)})
            if sign * res.fun < sign * best_v:
                best_x, best_v = float(res.x), sign * float(res.fun)
        # refinement gain, floored at the period quadrature tolerance
        out.append((best_v, best_x, max(abs(best_v - vals[i]), 1e-9 * abs(best_v))))
    return out


def omega_bounds(grid: DomainGrid) -> OmegaBounds:
    """delta1 = inf omega1 and Delta1 = sup omega1 over D.

    Node extremes are combined with a refined search along the boundary
    curves E = e0, E = e_min(ell) and the radial slice ell = 0.  The reported
    error is the change produced by the refinement step on the winning curve.
    """
    pot, e0 = grid.potential, grid.e0
    w = grid.omega1
    i_min, i_max = int(np.argmin(w)), int(np.argmax(w))
    candidates_min = [(w[i_min], (grid.E[i_min], grid.ell[i_min]), abs(w[i_min]))]
    candidates_max = [(w[i_max], (grid.E[i_max], grid.ell[i_max]), abs(w[i_max]))]
    l_star = grid.ell_star
    l_lo = 0.0 if math.isfinite(pot.U0) else 1e-3 * l_star

    def on_top(ell):
        return float(omega1(pot, e0, ell))

    def on_bottom(ell):
        return float(circular_frequency(pot, ell))

    curves = [
        (on_top, l_lo, l_star, lambda x: (e0, x)),
        (on_bottom, l_lo, l_star, lambda x: (float(e_min_of_beta(pot, x * x)), x)),
    ]
    if math.isfinite(pot.U0):
        curves.append((lambda E: float(omega1(pot, E, 0.0)), pot.U0, e0, lambda x: (x, 0.0)))
    for fun, lo, hi, where in curves:
        # the curves end on the circular orbit at ell_star, which is degenerate by design
        with warnings.catch_warnings():
            warnings.simplefilter("ignore", DegenerateOrbit)
            (vmin, xmin, emin), (vmax, xmax, emax) = _extremes_on_curve(fun, lo, hi)
        candidates_min.append((vmin, where(xmin), emin))
        candidates_max.append((vmax, where(xmax), emax))
    lo_rec = min(candidates_min, key=lambda c: c[0])
    hi_rec = max(candidates_max, key=lambda c: c[0])
    return OmegaBounds(
        delta1=float(lo_rec[0]), Delta1=float(hi_rec[0]),
        delta1_err=float(lo_rec[2]), Delta1_err=float(hi_rec[2]),
        argmin=tuple(map(float, lo_rec[1])), argmax=tuple(map(float, hi_rec[1])),
        node_min=float(w[i_min]), node_max=float(w[i_max]),
    )


# ---------------------------------------------------------------------------
# CSV emitters
# ---------------------------------------------------------------------------


def write_emin_curve_csv(pot, beta_values, path) -> Path:
    pot = _potential_of(pot)
    beta_values = np.asarray(beta_values, dtype=float)
    r0, emin = r0_of_beta(pot, beta_values)
    path = Path(path)
    with path.open("w", newline="") as fh:
        out = csv.writer(fh)
        out.writerow(["beta [length^2 velocity^2]", "r0 [length]", "e_min [energy]"])
        for row in zip(beta_values, np.atleast_1d(r0), np.atleast_1d(emin)):
            out.writerow([repr(float(v)) for v in row])
    return path


def write_orbit_table_csv(grid: DomainGrid, path) -> Path:
    path = Path(path)
    ob = grid.orbits
    with path.open("w", newline="") as fh:
        out = csv.writer(fh)
        out.writerow(["E [energy]", "ell [length velocity]", "T1 [time]", "omega1 [1/time]",
                      "I [length velocity]"])
        for row in zip(grid.E, grid.ell, ob.T1, ob.omega1, ob.action):
            out.writerow([repr(float(v)) for v in row])
    return path
