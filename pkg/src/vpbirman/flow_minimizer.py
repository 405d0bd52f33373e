"""Norm-preserving gradient flow g' = -L g + Phi(g) g for the lowest eigenvalue of L.

The flow runs in the same discrete space as the Galerkin matrix (see
:mod:`vpbirman.birman_schwinger`): sine coordinates scaled so that the
(., .)_Q norm is the Euclidean norm, where L = D - B B^T.  Each step is an
exponential Euler step on the stiff diagonal part,

    x <- exp(-(D - Phi) dt) x + dt * phi1((D - Phi) dt) * (B B^T x),
    phi1(z) = (1 - exp(-z)) / z,

followed by renormalisation.  Fixed points are exactly the eigenvectors of L
with eigenvalue Phi, and Phi(x) = x^T L x decreases along accepted steps.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .birman_schwinger import BirmanSchwinger, _coords_to_function, function_to_coords
from .errors import StepRejected
from .phase_space import FourierFunction, apply_T, kt_apply, q_inner, q_norm

PHI_SLACK = 1e-8


def phi_functional(g: FourierFunction, table) -> float:
    """Phi(g) = ||T g||_Q^2 - (K T g, g)_Q evaluated with the phase-space operators."""
    Tg = apply_T(g, table.grid)
    return q_norm(Tg, table.grid) ** 2 - q_inner(kt_apply(g, table), g, table.grid).real


def _phi1(z):
    z = np.asarray(z, dtype=float)
    small = np.abs(z) < 1e-8
    safe = np.where(small, 1.0, z)
    return np.where(small, 1.0 - 0.5 * z, -np.expm1(-safe) / safe)


@dataclass(frozen=True, eq=False)
class FlowState:
    x: np.ndarray
    phi: float
    t: float
    dt: float
    history: tuple = field(default=())
    n_rejected: int = 0

    def function(self, bs: BirmanSchwinger) -> FourierFunction:
        return _coords_to_function(bs, self.x)


def _apply_kt(bs: BirmanSchwinger, x):
    return bs.B @ (bs.B.T @ x)


def _phi_of(bs: BirmanSchwinger, x) -> float:
    return float(x @ (bs.d * x) - x @ _apply_kt(bs, x))


def initial_state(bs: BirmanSchwinger, seed: int = 0, k_band: int = 4,
                  dt: float | None = None, Delta1: float | None = None) -> FlowState:
    """Random odd data band-limited to k <= k_band, normalised in (., .)_Q."""
    rng = np.random.default_rng(seed)
    k_max = bs.table.k_max
    b = np.zeros((bs.table.n_nodes, k_max))
    kb = min(k_band, k_max)
    b[:, :kb] = rng.standard_normal((bs.table.n_nodes, kb))
    x = b.ravel()
    return state_from_coords(bs, x, dt=dt, Delta1=Delta1)


def state_from_coords(bs, x, dt=None, Delta1=None) -> FlowState:
    x = np.asarray(x, dtype=float)
    nrm = np.linalg.norm(x)
    if nrm == 0:
        raise ValueError("initial data must be nonzero")
    x = x / nrm
    if dt is None:
        top = Delta1**2 if Delta1 is not None else float(np.max(bs.d[:: bs.table.k_max]))
        dt = 0.1 / top
    phi = _phi_of(bs, x)
    return FlowState(x=x, phi=phi, t=0.0, dt=float(dt), history=((0.0, phi),))


def state_from_function(bs, g: FourierFunction, **kw) -> FlowState:
    if not g.is_odd(1e-12):
        raise ValueError("initial data must be odd in v")
    return state_from_coords(bs, function_to_coords(bs, g), **kw)


def _propagate(bs, x, phi, dt, include_kt=True, phi_frozen=None):
    shift = phi if phi_frozen is None else phi_frozen
    z = (bs.d - shift) * dt
    out = np.exp(-z) * x
    if include_kt:
        out = out + dt * _phi1(z) * _apply_kt(bs, x)
    return out


def flow_step(state: FlowState, bs: BirmanSchwinger, *, max_halvings: int = 40,
              growth: float = 1.2, dt_max: float | None = None,
              slack: float = PHI_SLACK) -> FlowState:
    """One accepted step; the step size is halved until Phi does not increase."""
    dt = state.dt
    dt_max = dt_max if dt_max is not None else 1e3 / float(bs.d.min())
    for halvings in range(max_halvings + 1):
        y = _propagate(bs, state.x, state.phi, dt)
        nrm = np.linalg.norm(y)
        if np.isfinite(nrm) and nrm > 0:
            y = y / nrm
            phi = _phi_of(bs, y)
            if phi <= state.phi + slack:
                t = state.t + dt
                return FlowState(x=y, phi=phi, t=t, dt=min(dt * growth, dt_max),
                                 history=state.history + ((t, phi),),
                                 n_rejected=state.n_rejected + halvings)
        dt *= 0.5
    raise StepRejected(f"no acceptable step after {max_halvings} halvings (dt={state.dt!r})")


def stationarity_residual(bs: BirmanSchwinger, x) -> float:
    """||-L g + Phi(g) g||_Q for normalised g."""
    phi = _phi_of(bs, x)
    r = bs.d * x - _apply_kt(bs, x) - phi * x
    return float(np.linalg.norm(r))


@dataclass(frozen=True, eq=False)
class FlowResult:
    lambda_star: float
    state: FlowState
    converged: bool
    residual: float
    n_steps: int

    @property
    def error(self) -> float:
        """Distance bound to the nearest discrete eigenvalue (the residual norm)."""
        return self.residual

    @property
    def history(self):
        return np.asarray(self.state.history)

    def to_csv(self, path) -> Path:
        path = Path(path)
        with path.open("w", newline="") as fh:
            out = csv.writer(fh)
            out.writerow(["t [time]", "Phi [1/time^2]"])
            for t, phi in self.state.history:
                out.writerow([repr(float(t)), repr(float(phi))])
        return path

    def to_dict(self) -> dict:
        return {"lambda_star": self.lambda_star, "converged": self.converged,
                "stationarity_residual": self.residual, "n_steps": self.n_steps,
                "n_rejected": self.state.n_rejected, "t_final": self.state.t}


def minimize(initial: FlowState, bs: BirmanSchwinger, budget: int = 5000, tol: float = 1e-13,
             window: int = 10, delta1: float | None = None, residual_tol: float = 1e-7,
             callback=None, **step_kw) -> FlowResult:
    """Run the flow until Phi stalls over ``window`` steps or ``budget`` is used.

    ``tol`` is relative to |Phi|.  ``converged`` is set when the window
    criterion is met with Phi strictly below the bottom of the essential
    spectrum (delta1^2, or the smallest k^2 omega1^2 on the grid when delta1 is
    not given); a plateau at that level signals no localised minimiser.
    """
    state = initial
    edge = delta1**2 if delta1 is not None else float(bs.d.min())
    stalled = 0
    steps = 0
    for steps in range(1, budget + 1):
        new = flow_step(state, bs, **step_kw)
        if callback is not None:
            callback(new)
        change = abs(new.phi - state.phi)
        state = new
        stalled = stalled + 1 if change <= tol * max(abs(state.phi), 1e-300) else 0
        if stalled >= window and stationarity_residual(bs, state.x) <= residual_tol:
            break
    residual = stationarity_residual(bs, state.x)
    converged = bool(stalled >= window and state.phi < edge)
    return FlowResult(lambda_star=float(state.phi), state=state, converged=converged,
                      residual=residual, n_steps=steps)


def multi_start(bs: BirmanSchwinger, seeds=(0, 1, 2, 3, 4), **kw) -> list[FlowResult]:
    start_kw = {k: kw.pop(k) for k in ("k_band", "Delta1") if k in kw}
    return [minimize(initial_state(bs, seed=s, **start_kw), bs, **kw) for s in seeds]


def frozen_mode_step(bs: BirmanSchwinger, x, dt: float, phi_frozen: float = 0.0):
    """Diagonal part of a step with the coupling switched off and Phi frozen (diagnostic)."""
    return _propagate(bs, np.asarray(x, dtype=float), phi_frozen, dt, include_kt=False,
                      phi_frozen=phi_frozen)


__all__ = [
    "FlowResult",
    "FlowState",
    "flow_step",
    "frozen_mode_step",
    "initial_state",
    "minimize",
    "multi_start",
    "phi_functional",
    "state_from_function",
    "stationarity_residual",
]
