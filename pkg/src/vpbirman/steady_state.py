"""Isotropic polytropic steady states and radial potentials.

A polytrope is the steady state with ansatz Q(e) = (e0 - e)_+^k.  Writing
z(r) = e0 - U(r), the radial Poisson equation becomes the autonomous
Lane-Emden type problem

    z'' + (2/r) z' = -4 pi c_n z_+^n,    z(0) = kappa,  z'(0) = 0,

with n = k + 3/2.  The first zero of z is the support radius r_Q, the mass
follows from M = -r_Q^2 z'(r_Q) and the cutoff energy from e0 = -M / r_Q.

Besides the polytrope profile this module provides closed-form potentials
(Kepler, harmonic, isochrone) that share the :class:`RadialPotential`
interface and serve as oracles for the orbit computations.
"""

from __future__ import annotations

import hashlib
import json
import math
import warnings
from dataclasses import asdict, dataclass, field
from functools import cached_property
from pathlib import Path

import numpy as np
from scipy.integrate import solve_ivp
from scipy.interpolate import CubicHermiteSpline
from scipy.special import gammaln

from .errors import IntegratorFailure, NoCutoffFound, SingularWeight

K_MIN = -0.5
K_MAX = 3.5


def polytrope_constant(k: float) -> float:
    """c_n = (2 pi)^{3/2} Gamma(k+1) / Gamma(k+5/2)."""
    return (2.0 * math.pi) ** 1.5 * math.exp(gammaln(k + 1.0) - gammaln(k + 2.5))


def _as_output(value, like):
    return float(value) if np.ndim(like) == 0 else value


# ---------------------------------------------------------------------------
# Radial potentials
# ---------------------------------------------------------------------------


class RadialPotential:
    """Attractive central potential U(r) with U'(r) > 0 for r > 0.

    Subclasses implement ``U``, ``dU`` and ``d2U`` on arrays.  ``e0`` and
    ``r_support`` are ``None`` unless the potential belongs to a steady
    state with a cutoff.
    """

    e0: float | None = None
    r_support: float | None = None

    def U(self, r):
        raise NotImplementedError

    def dU(self, r):
        raise NotImplementedError

    def d2U(self, r):
        raise NotImplementedError

    @property
    def U0(self) -> float:
        """Central value U(0); ``-inf`` for point-mass potentials."""
        return float(self.U(0.0))

    def length_scale(self) -> float:
        """A characteristic radius used to seed root brackets."""
        return 1.0


@dataclass(frozen=True)
class KeplerPotential(RadialPotential):
    M: float = 1.0
    e0: float | None = None

    def U(self, r):
        r = np.asarray(r, dtype=float)
        with np.errstate(divide="ignore"):
            return _as_output(-self.M / r, r)

    def dU(self, r):
        r = np.asarray(r, dtype=float)
        with np.errstate(divide="ignore"):
            return _as_output(self.M / r**2, r)

    def d2U(self, r):
        r = np.asarray(r, dtype=float)
        with np.errstate(divide="ignore"):
            return _as_output(-2.0 * self.M / r**3, r)

    @property
    def U0(self) -> float:
        return -math.inf


@dataclass(frozen=True)
class HarmonicPotential(RadialPotential):
    omega: float = 1.0
    e0: float | None = None

    def U(self, r):
        r = np.asarray(r, dtype=float)
        return _as_output(0.5 * self.omega**2 * r**2, r)

    def dU(self, r):
        r = np.asarray(r, dtype=float)
        return _as_output(self.omega**2 * r, r)

    def d2U(self, r):
        r = np.asarray(r, dtype=float)
        return _as_output(np.full_like(r, self.omega**2), r)

    def length_scale(self) -> float:
        return 1.0 / self.omega


@dataclass(frozen=True)
class IsochronePotential(RadialPotential):
    """U(r) = -M / (b + sqrt(b^2 + r^2))."""

    M: float = 1.0
    b: float = 1.0
    e0: float | None = None

    def U(self, r):
        r = np.asarray(r, dtype=float)
        s = np.sqrt(self.b**2 + r**2)
        return _as_output(-self.M / (self.b + s), r)

    def dU(self, r):
        r = np.asarray(r, dtype=float)
        s = np.sqrt(self.b**2 + r**2)
        return _as_output(self.M * r / (s * (self.b + s) ** 2), r)

    def d2U(self, r):
        r = np.asarray(r, dtype=float)
        b = self.b
        s = np.sqrt(b**2 + r**2)
        return _as_output(self.M * (b**3 + 3 * b**2 * s - 2 * s**3) / (s**3 * (b + s) ** 3), r)

    def length_scale(self) -> float:
        return self.b


class PolytropePotential(RadialPotential):
    """Cubic Hermite interpolant of a polytrope's U, exact -M/r outside r_Q."""

    def __init__(self, state: "SteadyState"):
        self.state = state
        self.e0 = state.e0
        self.r_support = state.r_Q
        self._spline = CubicHermiteSpline(state.r_grid, state.U, state.dU, extrapolate=False)

    def U(self, r):
        r = np.asarray(r, dtype=float)
        inside = r <= self.r_support
        with np.errstate(divide="ignore"):
            out = np.where(inside, self._spline(np.minimum(r, self.r_support)), -self.state.M / r)
        return _as_output(out, r)

    def dU(self, r):
        r = np.asarray(r, dtype=float)
        inside = r <= self.r_support
        with np.errstate(divide="ignore"):
            out = np.where(
                inside, self._spline(np.minimum(r, self.r_support), 1), self.state.M / r**2
            )
        return _as_output(out, r)

    def d2U(self, r):
        # U'' = 4 pi rho - 2 U'/r from the Poisson equation; 4 pi rho(0)/3 at the centre
        r = np.asarray(r, dtype=float)
        st = self.state
        z = np.maximum(st.e0 - np.asarray(self.U(r)), 0.0)
        rho = st.c_n * z**st.n
        with np.errstate(divide="ignore", invalid="ignore"):
            out = np.where(r > 0, 4 * math.pi * rho - 2.0 * np.asarray(self.dU(r)) / r,
                           4 * math.pi * st.c_n * st.kappa**st.n / 3.0)
        return _as_output(out, r)

    @property
    def U0(self) -> float:
        return self.state.U0

    def length_scale(self) -> float:
        return self.state.r_Q


def evaluate_potential(pot: RadialPotential, r):
    """Return ``(U(r), U'(r))``."""
    return pot.U(r), pot.dU(r)


# ---------------------------------------------------------------------------
# Polytropes
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class PolytropeParams:
    k: float = 1.0
    kappa: float = 1.0
    ode_tol: float = 1e-12
    grid_points: int = 2048
    r_max_factor: float = 1e5

    def __post_init__(self):
        if self.k >= K_MAX:
            raise NoCutoffFound(
                f"polytrope exponent k={self.k} outside the admissible range "
                f"]-1/2, 7/2[ (finite radius requires k < 7/2)"
            )
        if self.k <= K_MIN:
            raise ValueError(
                f"polytrope exponent k={self.k} outside the admissible range "
                f"]-1/2, 7/2[ (finite radius requires k < 7/2)"
            )
        if self.kappa <= 0:
            raise ValueError("kappa = z(0) must be positive")
        if self.ode_tol <= 0:
            raise ValueError("ode_tol must be positive")
        if self.grid_points < 16:
            raise ValueError("grid_points must be at least 16")

    def cache_key(self) -> str:
        payload = json.dumps(asdict(self), sort_keys=True)
        return hashlib.sha256(payload.encode()).hexdigest()[:20]


@dataclass(frozen=True, eq=False)
class SteadyState:
    k: float
    n: float
    c_n: float
    kappa: float
    r_grid: np.ndarray
    U: np.ndarray
    dU: np.ndarray
    rho: np.ndarray
    M: float
    r_Q: float
    e0: float
    U0: float
    params: PolytropeParams | None = field(default=None, repr=False)

    @cached_property
    def potential(self) -> PolytropePotential:
        return PolytropePotential(self)

    def check_invariants(self, tol: float = 1e-6) -> dict[str, bool]:
        """Evaluate the structural invariants of a steady state."""
        z = self.e0 - self.U
        inner = self.r_grid < self.r_Q
        rho_ref = self.c_n * np.maximum(z, 0.0) ** self.n
        return {
            "U_increasing": bool(np.all(np.diff(self.U) > 0)),
            "U0_below_e0": bool(self.U0 < self.e0 < 0),
            "U_rQ_is_e0": bool(abs(self.U[-1] - self.e0) <= tol * abs(self.e0)),
            "rho_self_consistent": bool(
                np.all(np.abs(self.rho - rho_ref) <= tol * np.max(self.rho))
            ),
            "exterior_matching": bool(abs(self.e0 + self.M / self.r_Q) <= tol * abs(self.e0)),
            "rho_nonnegative": bool(np.all(self.rho >= 0) and np.all(self.rho[inner] > 0)),
        }

    def to_dict(self) -> dict:
        return {
            "k": self.k,
            "n": self.n,
            "c_n": self.c_n,
            "kappa": self.kappa,
            "e0": self.e0,
            "U0": self.U0,
            "M": self.M,
            "r_Q": self.r_Q,
            "r_grid": self.r_grid.tolist(),
            "U": self.U.tolist(),
            "dU": self.dU.tolist(),
            "rho": self.rho.tolist(),
            "params": asdict(self.params) if self.params is not None else None,
        }

    @classmethod
    def from_dict(cls, data: dict) -> "SteadyState":
        params = PolytropeParams(**data["params"]) if data.get("params") else None
        return cls(
            k=data["k"], n=data["n"], c_n=data["c_n"], kappa=data["kappa"],
            r_grid=np.asarray(data["r_grid"]), U=np.asarray(data["U"]),
            dU=np.asarray(data["dU"]), rho=np.asarray(data["rho"]),
            M=data["M"], r_Q=data["r_Q"], e0=data["e0"], U0=data["U0"], params=params,
        )


def _arc_length_grid(r, z, r_Q, kappa, n_points):
    s = np.concatenate([[0.0], np.cumsum(np.hypot(np.diff(r) / r_Q, np.diff(z) / kappa))])
    targets = np.linspace(0.0, s[-1], n_points)
    return np.interp(targets, s, r)


def build_polytrope(params: PolytropeParams) -> SteadyState:
    """Integrate the z-equation outward from the centre to its first zero."""
    k, kappa = params.k, params.kappa
    n = k + 1.5
    c_n = polytrope_constant(k)
    four_pi_c = 4.0 * math.pi * c_n
    length = 1.0 / math.sqrt(four_pi_c * kappa ** (n - 1.0))
    eps = 1e-6 * length
    r_max = params.r_max_factor * length

    central = four_pi_c * kappa**n
    z_eps = kappa - central * eps**2 / 6.0
    dz_eps = -central * eps / 3.0

    def rhs(r, y):
        return [y[1], -four_pi_c * max(y[0], 0.0) ** n - 2.0 * y[1] / r]

    def surface(r, y):
        return y[0]

    surface.terminal = True
    surface.direction = -1

    sol = solve_ivp(
        rhs, (eps, r_max), [z_eps, dz_eps], method="DOP853", events=surface,
        dense_output=True, rtol=params.ode_tol, atol=params.ode_tol * kappa * 1e-3,
    )
    if sol.status == -1:
        raise IntegratorFailure(f"integration failed: {sol.message}")
    if len(sol.t_events[0]) == 0:
        raise NoCutoffFound(
            f"z has no zero before r_max={r_max:.3g} for k={k}; "
            "k too close to 7/2 or kappa pathological"
        )

    r_Q = float(sol.t_events[0][0])
    dz_Q = float(sol.y_events[0][0][1])
    M = -r_Q**2 * dz_Q
    e0 = -M / r_Q

    fine = np.linspace(eps, r_Q, 16 * params.grid_points)
    z_fine = sol.sol(fine)[0]
    r_nodes = _arc_length_grid(fine, z_fine, r_Q, kappa, params.grid_points - 1)
    r_nodes[0], r_nodes[-1] = eps, r_Q
    y = sol.sol(r_nodes)
    z = np.concatenate([[kappa], y[0]])
    dz = np.concatenate([[0.0], y[1]])
    r_grid = np.concatenate([[0.0], r_nodes])
    z[-1], dz[-1] = 0.0, dz_Q

    U = e0 - z
    rho = c_n * np.maximum(z, 0.0) ** n
    return SteadyState(
        k=k, n=n, c_n=c_n, kappa=kappa, r_grid=r_grid, U=U, dU=-dz, rho=rho,
        M=M, r_Q=r_Q, e0=e0, U0=e0 - kappa, params=params,
    )


def rho_from_potential(state: SteadyState, r):
    """rho(r) = c_n (e0 - U(r))_+^n with the interpolated potential."""
    r = np.asarray(r, dtype=float)
    z = np.maximum(state.e0 - np.asarray(state.potential.U(r)), 0.0)
    return _as_output(state.c_n * z**state.n, r)


def q_prime_abs(state_or_k, e, e0: float | None = None, singular_eps: float = 1e-8):
    """|Q'(e)| = k (e0 - e)_+^{k-1}.

    Accepts a :class:`SteadyState` or a bare exponent together with ``e0``.
    For k < 1 the weight blows up at e0; a :class:`SingularWeight` warning is
    issued instead of raising, since weighted quadratures absorb it.
    """
    if isinstance(state_or_k, SteadyState):
        k, e0 = state_or_k.k, state_or_k.e0
    else:
        k = float(state_or_k)
        if e0 is None:
            raise ValueError("e0 is required when passing a bare exponent")
    e = np.asarray(e, dtype=float)
    gap = np.maximum(e0 - e, 0.0)
    if k < 1.0 and np.any(gap < singular_eps * max(abs(e0), 1.0)):
        warnings.warn(f"|Q'| singular near e0 for k={k} < 1", SingularWeight, stacklevel=2)
    with np.errstate(divide="ignore"):
        out = k * gap ** (k - 1.0)
    return _as_output(out, e)


# ---------------------------------------------------------------------------
# Serialization and caching
# ---------------------------------------------------------------------------


def save_state(state: SteadyState, path: str | Path) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(json.dumps(state.to_dict(), indent=1))
    return path


def load_state(path: str | Path) -> SteadyState:
    return SteadyState.from_dict(json.loads(Path(path).read_text()))


def cache_path(params: PolytropeParams, cache_dir: str | Path) -> Path:
    return Path(cache_dir) / f"polytrope-{params.cache_key()}.json"


def build_polytrope_cached(params: PolytropeParams, cache_dir: str | Path | None):
    """Return ``(state, cache_hit)``; builds and stores the profile on a miss."""
    if cache_dir is None:
        return build_polytrope(params), False
    path = cache_path(params, cache_dir)
    if path.exists():
        return load_state(path), True
    state = build_polytrope(params)
    save_state(state, path)
    return state, False
