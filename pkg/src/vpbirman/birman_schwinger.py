"""Birman-Schwinger operators Q_lambda on L^2_r and the Galerkin matrix of L.

Everything here is built on one :class:`~vpbirman.phase_space.SineTable`, so
the Nystrom matrix of Q_lambda and the Galerkin matrix of L = -T^2 - KT act on
the same finite-dimensional space (the gradient flow uses it too).  In that space
the identity Q_lambda = G (-T^2 - lambda)^{-1} P holds exactly, with
G = u_prime_from_g and P = psi_coeffs_from_Psi, so lambda is a Galerkin
eigenvalue precisely when 1 is an eigenvalue of the Nystrom matrix.

In M-orthonormal sine coordinates the Galerkin matrix is D - B B^T with
D = diag(k^2 omega1^2) and B of rank at most n_r; the symmetrised Nystrom
matrix is S(lambda) = B^T (D - lambda)^{-1} B.
"""

from __future__ import annotations

import csv
import math
import warnings
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
import scipy.linalg as sla
from scipy.optimize import brentq
from scipy.sparse.linalg import ArpackNoConvergence, LinearOperator, eigsh

from .errors import EigenFailure, MonotonicityViolation, SpectrumHit
from .phase_space import (
    FourierFunction,
    RadialNodes,
    SineTable,
    apply_L,
    build_sine_table,
    psi_coeffs_from_Psi,
    q_norm,
    radial_inner,
    resolvent_shift,
    u_prime_from_g,
)

# ---------------------------------------------------------------------------
# Nystrom matrix
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class BSConfig:
    k_max: int
    r_nodes: np.ndarray
    r_weights: np.ndarray
    lam: float

    def validate(self, delta1: float, safety_margin: float = 0.0):
        r = np.asarray(self.r_nodes)
        if np.any(np.diff(r) <= 0) or r[0] <= 0:
            raise ValueError("radial nodes must be positive and strictly increasing")
        if not self.lam < delta1**2 - safety_margin:
            raise SpectrumHit(f"lambda={self.lam!r} not below delta1^2 - margin")


@dataclass(frozen=True, eq=False)
class BSMatrix:
    S: np.ndarray
    lam: float
    k_max: int
    n_r: int
    n_nodes: int

    def symmetry_error(self) -> float:
        scale = max(np.max(np.abs(self.S)), 1e-300)
        return float(np.max(np.abs(self.S - self.S.T)) / scale)

    def min_eigenvalue(self) -> float:
        return float(sla.eigvalsh(self.S, subset_by_index=[0, 0])[0])

    def norm(self) -> float:
        return float(np.linalg.norm(self.S, 2))


class BirmanSchwinger:
    """Low-rank factorisation shared by Q_lambda and the Galerkin matrix.

    Rows of ``B`` are indexed by (node a, mode k) flattened as a * k_max + k - 1.
    """

    def __init__(self, table: SineTable):
        self.table = table
        grid = table.grid
        nodes = table.nodes
        ks = table.ks.astype(float)
        w = grid.omega1
        self.d = ((ks[None, :] * w[:, None]) ** 2).ravel()
        # B[(a,k), i] = sqrt(8 W_a omega_a |Q'_a|) sin(k theta_a(r_i)) sqrt(m_i) / r_i^2
        node_factor = np.sqrt(8.0 * grid.weight * w * grid.q_prime)
        radial_factor = np.sqrt(nodes.m) / nodes.r**2
        self.B = (table.s * node_factor[:, None, None] * radial_factor[None, None, :]).reshape(
            -1, len(nodes)
        )

    @property
    def nodes(self) -> RadialNodes:
        return self.table.nodes

    @property
    def size(self) -> int:
        return self.B.shape[0]

    @property
    def min_denominator_frequency(self) -> float:
        """Smallest k omega1 on the grid; Q_lambda is defined for lambda below its square."""
        return float(math.sqrt(self.d.min()))

    def _resolvent_diag(self, lam: float) -> np.ndarray:
        den = self.d - lam
        if np.any(den <= 0):
            raise SpectrumHit(f"lambda={lam!r} reaches k^2 omega1^2 on the grid")
        return 1.0 / den

    def matrix(self, lam: float) -> BSMatrix:
        c = self._resolvent_diag(lam)
        S = self.B.T @ (c[:, None] * self.B)
        S = 0.5 * (S + S.T)
        return BSMatrix(S=S, lam=float(lam), k_max=self.table.k_max, n_r=len(self.nodes),
                        n_nodes=self.table.n_nodes)

    def apply_Q(self, lam: float, Psi: np.ndarray) -> np.ndarray:
        """Q_lambda Psi on the radial nodes (unsymmetrised form)."""
        sq = np.sqrt(self.nodes.m)
        return (self.matrix(lam).S @ (sq * Psi)) / sq

    def mu(self, lam: float, m: int = 1) -> np.ndarray:
        return mu_spectrum(self.matrix(lam), m, check=False)

    def top(self, lam: float):
        """(mu_1, Psi) with Psi normalised in L^2_r."""
        S = self.matrix(lam).S
        vals, vecs = sla.eigh(S, subset_by_index=[len(S) - 1, len(S) - 1])
        y = vecs[:, 0]
        y = y * np.sign(y[np.argmax(np.abs(y))])
        return float(vals[0]), y / np.sqrt(self.nodes.m)


def kernel_K(lam: float, r, r_tilde, table: SineTable) -> np.ndarray:
    """Integral kernel K_lambda(r, r~) evaluated by the D-quadrature of the table's grid.

    K = 8/(r^2 r~^2) sum_{k>=1} sum_a W_a omega_a |Q'_a| sin(k theta_a(r)) sin(k theta_a(r~))
        / (k^2 omega_a^2 - lambda)
    """
    grid = table.grid
    r = np.atleast_1d(np.asarray(r, dtype=float))
    rt = np.atleast_1d(np.asarray(r_tilde, dtype=float))
    ks = table.ks.astype(float)
    den = (ks[None, :] * grid.omega1[:, None]) ** 2 - lam
    if np.any(den <= 0):
        raise SpectrumHit(f"lambda={lam!r} reaches k^2 omega1^2 on the grid")
    coef = (grid.weight * grid.omega1 * grid.q_prime)[:, None] / den

    def sines(x):
        th = grid.orbits.theta(x)
        inside = np.isfinite(th)
        th = np.where(inside, th, 0.0)
        return np.sin(th[:, None, :] * ks[None, :, None]) * inside[:, None, :]

    total = np.einsum("ak,akr,aks->rs", coef, sines(r), sines(rt))
    out = 8.0 * total / (r[:, None] ** 2 * rt[None, :] ** 2)
    return out


def assemble_bs_matrix(cfg: BSConfig, table: SineTable) -> BSMatrix:
    if cfg.k_max != table.k_max or len(cfg.r_nodes) != len(table.nodes):
        raise ValueError("config does not match the sine table")
    if not np.allclose(cfg.r_nodes, table.nodes.r) or not np.allclose(cfg.r_weights, table.nodes.w):
        raise ValueError("config radial nodes differ from the table's nodes")
    return BirmanSchwinger(table).matrix(cfg.lam)


def mu_spectrum(S: BSMatrix, m: int = 1, *, check: bool = True, power_iterations: int = 50,
                rtol: float = 1e-8, seed: int = 0) -> np.ndarray:
    """Top-m eigenvalues of S in descending order.

    With ``check`` the leading eigenvalue is confirmed by power iteration
    started from a perturbed copy of the computed eigenvector.
    """
    n = S.S.shape[0]
    m = min(m, n)
    try:
        vals, vecs = sla.eigh(S.S, subset_by_index=[n - m, n - 1])
    except np.linalg.LinAlgError as exc:
        raise EigenFailure(str(exc)) from exc
    vals = vals[::-1]
    if check:
        rng = np.random.default_rng(seed)
        x = vecs[:, -1] + 1e-3 * rng.standard_normal(n) / math.sqrt(n)
        for _ in range(power_iterations):
            x = S.S @ x
            x /= np.linalg.norm(x)
        est = float(x @ S.S @ x)
        if abs(est - vals[0]) > rtol * max(abs(vals[0]), 1e-300):
            raise EigenFailure(f"power iteration gives {est!r}, eigh gives {vals[0]!r}")
    return vals


# ---------------------------------------------------------------------------
# The mu curve
# ---------------------------------------------------------------------------


@dataclass
class SpectralCurve:
    lambdas: np.ndarray
    mu: np.ndarray
    delta1: float
    monotonicity_violation: float = 0.0
    convexity_violation: float = 0.0
    mu_star_est: float | None = None
    mu_star_divergent: bool | None = None
    lambda_hat: float | None = None

    @property
    def mu1(self) -> np.ndarray:
        return self.mu[:, 0]

    def to_csv(self, path) -> Path:
        path = Path(path)
        with path.open("w", newline="") as fh:
            out = csv.writer(fh)
            out.writerow(["lambda [1/time^2]"] + [f"mu{j + 1} [1]" for j in range(self.mu.shape[1])])
            for lam, row in zip(self.lambdas, self.mu):
                out.writerow([repr(float(lam))] + [repr(float(v)) for v in row])
        return path


def default_lambda_grid(delta1: float, n: int = 20, top: float = 0.99) -> np.ndarray:
    return np.linspace(0.0, top * delta1**2, n)


def curve_violations(lambdas, mu1):
    """Largest monotonicity and convexity defects of mu1 on a (possibly uneven) grid."""
    lambdas = np.asarray(lambdas, dtype=float)
    mu1 = np.asarray(mu1, dtype=float)
    mono = float(max(0.0, -np.min(np.diff(mu1)))) if len(mu1) > 1 else 0.0
    conv = 0.0
    if len(mu1) > 2:
        slopes = np.diff(mu1) / np.diff(lambdas)
        # second divided difference scaled to a uniform-grid second difference
        h = np.diff(lambdas)
        second = np.diff(slopes) * 0.5 * (h[1:] + h[:-1])
        conv = float(max(0.0, -np.min(second)))
    return mono, conv


def mu_curve(bs: BirmanSchwinger, lambdas, delta1: float, m: int = 1,
             tol: float = 1e-8) -> SpectralCurve:
    lambdas = np.asarray(lambdas, dtype=float)
    if np.any(np.diff(lambdas) <= 0):
        raise ValueError("lambda grid must be strictly increasing")
    if lambdas[-1] >= delta1**2:
        raise SpectrumHit("lambda grid reaches delta1^2")
    mu = np.array([mu_spectrum(bs.matrix(lam), m, check=False) for lam in lambdas])
    mono, conv = curve_violations(lambdas, mu[:, 0])
    for j in range(1, mu.shape[1]):
        mono = max(mono, curve_violations(lambdas, mu[:, j])[0])
    if mono > tol or conv > tol:
        warnings.warn(f"mu curve defects: monotonicity {mono:.3e}, convexity {conv:.3e}",
                      MonotonicityViolation, stacklevel=2)
    return SpectralCurve(lambdas=lambdas, mu=mu, delta1=delta1, monotonicity_violation=mono,
                         convexity_violation=conv)


@dataclass(frozen=True)
class MuStar:
    """Approach of mu_1 to lambda = delta1^2.

    ``value`` is mu_1 at the last sample (a lower bound by monotonicity);
    ``extrapolated`` the intercept a of mu = a + b / (delta1^2 - lambda)
    fitted on the last three samples.  ``divergent`` flags a fit whose pole
    term dominates, i.e. growth without a visible plateau.
    """

    value: float
    extrapolated: float
    pole_coefficient: float
    divergent: bool
    lambdas: np.ndarray
    mu1: np.ndarray


def estimate_mu_star(bs: BirmanSchwinger, delta1: float, j_max: int = 14) -> MuStar:
    d2 = delta1**2
    lambdas = d2 * (1.0 - 2.0 ** -np.arange(1, j_max + 1, dtype=float))
    mu1 = np.array([bs.mu(lam)[0] for lam in lambdas])
    x = 1.0 / (d2 - lambdas[-3:])
    A = np.column_stack([np.ones(3), x])
    (a, b), *_ = np.linalg.lstsq(A, mu1[-3:], rcond=None)
    pole = b * x[-1]
    divergent = bool(b > 0 and pole > 0.1 * max(abs(a), 1e-300))
    return MuStar(value=float(mu1[-1]), extrapolated=float(a), pole_coefficient=float(b),
                  divergent=divergent, lambdas=lambdas, mu1=mu1)


@dataclass(frozen=True, eq=False)
class LambdaHat:
    lam: float
    psi: np.ndarray
    mu_at: float
    slope: float
    tol: float
    degenerate: bool

    @property
    def error(self) -> float:
        """Root uncertainty: bracket width plus the residual |mu_1 - 1| / slope."""
        return self.tol + abs(self.mu_at - 1.0) / max(self.slope, 1e-300)


def find_lambda_hat(bs: BirmanSchwinger, delta1: float, tol: float = 1e-12,
                    margin: float = 1e-4) -> LambdaHat | None:
    """Root of mu_1(lambda) = 1 below delta1^2, or None when mu_1 stays below 1."""
    top = delta1**2 * (1.0 - margin)
    top = min(top, bs.d.min() * (1.0 - margin))
    mu_top = bs.mu(top)[0]
    if mu_top <= 1.0:
        return None
    lo = 0.0
    mu_lo = bs.mu(lo)[0]
    step = max(delta1**2, 1.0)
    while mu_lo >= 1.0:
        lo -= step
        step *= 2.0
        mu_lo = bs.mu(lo)[0]
    xtol = tol * max(delta1**2, 1.0)
    lam = brentq(lambda x: bs.mu(x)[0] - 1.0, lo, top, xtol=xtol, rtol=4 * np.finfo(float).eps,
                 maxiter=500)
    vals = mu_spectrum(bs.matrix(lam), 2, check=False)
    h = max(1e-6 * delta1**2, 1e3 * xtol)
    slope = (bs.mu(min(lam + h, top))[0] - bs.mu(lam - h)[0]) / (min(lam + h, top) - lam + h)
    mu1, psi = bs.top(lam)
    degenerate = bool(len(vals) > 1 and abs(vals[0] - vals[1]) <= 1e-8 * abs(vals[0]))
    return LambdaHat(lam=float(lam), psi=psi, mu_at=mu1, slope=float(slope), tol=xtol,
                     degenerate=degenerate)


@dataclass(frozen=True, eq=False)
class RecoveredMode:
    u: FourierFunction
    fixed_point_residual: float
    roundtrip_residual: float
    galerkin_residual: float
    odd: bool


def recover_eigenfunction(bs: BirmanSchwinger, lam: float, Psi: np.ndarray) -> RecoveredMode:
    """u = (-T^2 - lambda)^{-1} P Psi together with the round-trip residuals.

    fixed_point_residual = ||Q Psi - Psi|| / ||Psi||; roundtrip_residual
    compares U'_{Tu} with Psi after the best scalar fit; galerkin_residual is
    ||L u - lambda u||_Q / ||u||_Q.
    """
    table = bs.table
    nodes = table.nodes
    norm_psi = math.sqrt(radial_inner(Psi, Psi, nodes).real)
    q_psi = bs.apply_Q(lam, Psi)
    fixed = math.sqrt(radial_inner(q_psi - Psi, q_psi - Psi, nodes).real) / norm_psi
    u = resolvent_shift(psi_coeffs_from_Psi(Psi, table), lam)
    back = u_prime_from_g(u, table)
    scale = radial_inner(Psi, back, nodes) / radial_inner(Psi, Psi, nodes)
    diff = back - scale * Psi
    roundtrip = math.sqrt(radial_inner(diff, diff, nodes).real) / (abs(scale) * norm_psi)
    res = apply_L(u, table) - lam * u
    galerkin = q_norm(res) / q_norm(u)
    return RecoveredMode(u=u, fixed_point_residual=fixed, roundtrip_residual=roundtrip,
                         galerkin_residual=galerkin, odd=u.is_odd(1e-12))


# ---------------------------------------------------------------------------
# Galerkin matrix of L
# ---------------------------------------------------------------------------


@dataclass(frozen=True, eq=False)
class GalerkinResult:
    eigenvalues: np.ndarray
    vectors: list = field(repr=False)
    residuals: np.ndarray = field(default=None)
    method: str = "dense"
    size: int = 0

    @property
    def lowest(self) -> float:
        return float(self.eigenvalues[0])

    @property
    def error(self) -> float:
        """Residual norm of the lowest pair; bounds the distance to a true discrete eigenvalue."""
        return float(self.residuals[0])


def galerkin_L_matrix(bs: BirmanSchwinger, include_kt: bool = True) -> np.ndarray:
    """Dense symmetric matrix of L in M-orthonormal sine coordinates: D - B B^T."""
    A = np.diag(bs.d)
    if include_kt:
        A = A - bs.B @ bs.B.T
    return 0.5 * (A + A.T)


def _coords_to_function(bs: BirmanSchwinger, x: np.ndarray) -> FourierFunction:
    table = bs.table
    q = np.repeat(table.q, table.k_max)
    b = (x / np.sqrt(0.5 * q)).reshape(table.n_nodes, table.k_max).T
    return FourierFunction.from_sine(b, table.grid)


def function_to_coords(bs: BirmanSchwinger, g: FourierFunction) -> np.ndarray:
    table = bs.table
    b = g.sine_coords()[: table.k_max]
    q = np.repeat(table.q, table.k_max)
    return b.T.ravel() * np.sqrt(0.5 * q)


def galerkin_lowest(bs: BirmanSchwinger, n_eig: int = 1, include_kt: bool = True,
                    dense_limit: int = 3000, tol: float = 1e-14) -> GalerkinResult:
    """Lowest eigenvalues of the Galerkin matrix of L.

    Small problems use a dense symmetric eigensolver; large ones use Lanczos
    in shift-invert mode about 0, with the inverse of D - B B^T applied
    through the Woodbury identity.
    """
    n = bs.size
    if n <= dense_limit or not include_kt:
        if include_kt:
            A = galerkin_L_matrix(bs)
            vals, vecs = sla.eigh(A, subset_by_index=[0, n_eig - 1])
            method = "dense"
        else:
            order = np.argsort(bs.d, kind="stable")[:n_eig]
            vals = bs.d[order]
            vecs = np.zeros((n, n_eig))
            vecs[order, np.arange(n_eig)] = 1.0
            method = "diagonal"
    else:
        B, d = bs.B, bs.d
        core = np.eye(B.shape[1]) - B.T @ (B / d[:, None])
        try:
            chol = sla.cho_factor(core)
        except np.linalg.LinAlgError as exc:
            raise EigenFailure("D - B B^T is not positive definite; mu_1(0) >= 1") from exc

        def solve(y):
            y = np.asarray(y).ravel()
            z = y / d
            return z + (B @ sla.cho_solve(chol, B.T @ z)) / d

        def matvec(x):
            x = np.asarray(x).ravel()
            return d * x - B @ (B.T @ x)

        A_op = LinearOperator((n, n), matvec=matvec, dtype=float)
        inv_op = LinearOperator((n, n), matvec=solve, dtype=float)
        v0 = np.ones(n) / math.sqrt(n)
        try:
            vals, vecs = eigsh(A_op, k=n_eig, sigma=0.0, which="LM", OPinv=inv_op, tol=tol,
                               v0=v0, maxiter=10 * n)
        except ArpackNoConvergence as exc:
            raise EigenFailure(str(exc)) from exc
        order = np.argsort(vals)
        vals, vecs = vals[order], vecs[:, order]
        method = "shift-invert"
    residuals = np.empty(len(vals))
    functions = []
    for j in range(len(vals)):
        x = vecs[:, j] / np.linalg.norm(vecs[:, j])
        Ax = bs.d * x - (bs.B @ (bs.B.T @ x) if include_kt else 0.0)
        residuals[j] = np.linalg.norm(Ax - vals[j] * x)
        functions.append(_coords_to_function(bs, x))
    return GalerkinResult(eigenvalues=np.asarray(vals), vectors=functions, residuals=residuals,
                          method=method, size=n)


def edge_error(bounds, value: float) -> float:
    """Discretization error of an estimate that sits at the bottom of the essential spectrum.

    The grid only sees frequencies down to ``bounds.node_min``, so a discrete
    minimum at or above delta1^2 can be off by up to node_min^2 - delta1^2.
    """
    if value < bounds.delta1**2:
        return 0.0
    return max(bounds.node_min**2 - bounds.delta1**2, 0.0)


# ---------------------------------------------------------------------------
# Essential spectrum
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class Bands:
    bands: list
    merged: list
    lambda_c: float | None
    k_c: int | None

    def to_dict(self):
        return {"bands": [list(b) for b in self.bands], "merged": [list(b) for b in self.merged],
                "lambda_c": self.lambda_c, "k_c": self.k_c}


def essential_spectrum_bands(delta1: float, Delta1: float, k_up: int = 8) -> Bands:
    """Intervals k^2 [delta1^2, Delta1^2], k = 1..k_up, and the merge threshold.

    Bands k and k+1 overlap iff (k+1)/k <= Delta1/delta1, which then holds for
    every larger k; the union is a half-line from lambda_c = k_c^2 delta1^2.
    """
    if not 0 < delta1 <= Delta1:
        raise ValueError("need 0 < delta1 <= Delta1")
    bands = [(k * k * delta1**2, k * k * Delta1**2) for k in range(1, k_up + 1)]
    merged = []
    for lo, hi in bands:
        if merged and lo <= merged[-1][1]:
            merged[-1] = (merged[-1][0], max(merged[-1][1], hi))
        else:
            merged.append((lo, hi))
    if Delta1 > delta1:
        k_c = max(1, math.ceil(delta1 / (Delta1 - delta1) - 1e-12))
        lambda_c = k_c**2 * delta1**2
    else:
        k_c, lambda_c = None, None
    return Bands(bands=bands, merged=merged, lambda_c=lambda_c, k_c=k_c)


# ---------------------------------------------------------------------------
# Truncation diagnostics
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class MuEstimate:
    """mu_1 at (k_max, n_r) with the changes seen from (k_max/2, n_r) and (k_max, n_r/2).

    ``error`` is the sum of both changes.  The two are added rather than
    treated separately because the k-tail of the discrete sum is limited by
    how well the radial nodes resolve sin(k theta) and does not shrink
    geometrically on its own.
    """

    mu1: float
    err_k: float
    err_r: float

    @property
    def error(self) -> float:
        return self.err_k + self.err_r


def mu1_with_error(grid, lam: float = 0.0, k_max: int = 32, n_r: int = 64) -> MuEstimate:
    mu = BirmanSchwinger(build_sine_table(grid, k_max, n_r)).mu(lam)[0]
    mu_k = BirmanSchwinger(build_sine_table(grid, max(k_max // 2, 1), n_r)).mu(lam)[0]
    mu_r = BirmanSchwinger(build_sine_table(grid, k_max, max(n_r // 2, 4))).mu(lam)[0]
    return MuEstimate(mu1=float(mu), err_k=float(abs(mu - mu_k)), err_r=float(abs(mu - mu_r)))
