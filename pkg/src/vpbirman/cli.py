"""Command line interface: ``vpbirman <subcommand> CONFIG``.

One YAML file drives every subcommand; ``--set section.key=value`` overrides
single keys.  Outputs are JSON and CSV files in ``output_dir``.  Exit codes:
0 success, 2 invalid model (no cutoff, k out of range, bad config),
3 integrator failure, 4 failure in an orbit or spectral stage.

Example config::

    model: {kind: polytrope, k: 1.0, kappa: 1.0}
    ode_tol: 1.0e-12
    grid: {n_beta: 24, n_e: 24, n_r: 64, k_max: 32}
    spectrum: {n_lambda: 20, top: 0.99, m: 3, tol: 1.0e-12, margin: 1.0e-4}
    flow: {budget: 5000, tol: 1.0e-13, seed: 0}
    output_dir: out
    cache_dir: null
"""

from __future__ import annotations

import copy
import json
import logging
import math
import os
import sys
from dataclasses import asdict, dataclass, field
from pathlib import Path

import click
import numpy as np
import yaml

from . import __version__
from .birman_schwinger import (
    BirmanSchwinger,
    edge_error,
    essential_spectrum_bands,
    estimate_mu_star,
    find_lambda_hat,
    galerkin_lowest,
    mu1_with_error,
    mu_curve,
    recover_eigenfunction,
)
from .errors import (
    BracketFailure,
    EigenFailure,
    IntegratorFailure,
    NoCutoffFound,
    QuadratureNotConverged,
    SpectrumHit,
    StepRejected,
)
from .flow_minimizer import initial_state, minimize
from .orbits import (
    build_domain_grid,
    omega_bounds,
    write_emin_curve_csv,
    write_orbit_table_csv,
)
from .phase_space import build_sine_table
from .steady_state import (
    HarmonicPotential,
    IsochronePotential,
    KeplerPotential,
    PolytropeParams,
    build_polytrope_cached,
    save_state,
)

log = logging.getLogger("vpbirman")

CACHE_ENV = "VPBIRMAN_CACHE"
EXIT_MODEL, EXIT_INTEGRATOR, EXIT_SPECTRAL = 2, 3, 4
SPECTRAL_ERRORS = (SpectrumHit, EigenFailure, StepRejected, QuadratureNotConverged, BracketFailure)


# ---------------------------------------------------------------------------
# Configuration
# ---------------------------------------------------------------------------


@dataclass
class GridConfig:
    n_beta: int = 24
    n_e: int = 24
    n_r: int = 64
    k_max: int = 32


@dataclass
class SpectrumConfig:
    n_lambda: int = 20
    top: float = 0.99
    m: int = 3
    tol: float = 1e-12
    margin: float = 1e-4


@dataclass
class FlowConfig:
    budget: int = 5000
    tol: float = 1e-13
    seed: int = 0


@dataclass
class RunConfig:
    model: dict = field(default_factory=lambda: {"kind": "polytrope", "k": 1.0, "kappa": 1.0})
    ode_tol: float = 1e-12
    grid: GridConfig = field(default_factory=GridConfig)
    spectrum: SpectrumConfig = field(default_factory=SpectrumConfig)
    flow: FlowConfig = field(default_factory=FlowConfig)
    output_dir: str = "out"
    cache_dir: str | None = None

    @classmethod
    def from_mapping(cls, data: dict | None) -> "RunConfig":
        data = dict(data or {})
        unknown = set(data) - {f for f in cls.__dataclass_fields__}
        if unknown:
            raise click.BadParameter(f"unknown config keys: {sorted(unknown)}")
        cfg = cls()
        if "model" in data:
            cfg.model = dict(data["model"])
        for name, sub in (("grid", GridConfig), ("spectrum", SpectrumConfig), ("flow", FlowConfig)):
            if name in data:
                values = dict(data[name] or {})
                bad = set(values) - set(sub.__dataclass_fields__)
                if bad:
                    raise click.BadParameter(f"unknown keys in {name}: {sorted(bad)}")
                setattr(cfg, name, sub(**values))
        for name in ("ode_tol", "output_dir", "cache_dir"):
            if name in data:
                setattr(cfg, name, data[name])
        cfg.validate()
        return cfg

    def validate(self):
        kind = self.model.get("kind", "polytrope")
        if kind not in ("polytrope", "kepler", "harmonic", "isochrone"):
            raise click.BadParameter(f"unknown model kind {kind!r}")
        tols = [self.ode_tol, self.spectrum.tol, self.spectrum.margin, self.flow.tol]
        if any(not (t > 0) for t in tols):
            raise click.BadParameter("all tolerances must be positive")
        g = self.grid
        if min(g.n_beta, g.n_e, g.n_r, g.k_max) < 4:
            raise click.BadParameter("grid sizes must be at least 4")
        if not 0 < self.spectrum.top < 1:
            raise click.BadParameter("spectrum.top must lie in (0, 1)")
        if self.spectrum.n_lambda < 3:
            raise click.BadParameter("spectrum.n_lambda must be at least 3")

    def to_dict(self) -> dict:
        return asdict(self)


def _parse_override(text: str):
    if "=" not in text:
        raise click.BadParameter(f"override {text!r} must look like section.key=value")
    key, raw = text.split("=", 1)
    return key.strip().split("."), yaml.safe_load(raw)


def load_config(path: str | None, overrides=()) -> RunConfig:
    data = {}
    if path is not None:
        with open(path) as fh:
            data = yaml.safe_load(fh) or {}
    data = copy.deepcopy(data)
    for text in overrides:
        keys, value = _parse_override(text)
        node = data
        for k in keys[:-1]:
            node = node.setdefault(k, {})
        node[keys[-1]] = value
    return RunConfig.from_mapping(data)


# ---------------------------------------------------------------------------
# Output helpers
# ---------------------------------------------------------------------------


def _jsonable(obj):
    if isinstance(obj, dict):
        return {str(k): _jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_jsonable(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return _jsonable(obj.tolist())
    if isinstance(obj, (np.floating, float)):
        x = float(obj)
        return x if math.isfinite(x) else ("inf" if x > 0 else "-inf" if x < 0 else "nan")
    if isinstance(obj, np.integer):
        return int(obj)
    if isinstance(obj, np.bool_):
        return bool(obj)
    return obj


def write_json(path: Path, payload: dict) -> Path:
    """Sorted keys and shortest round-trip float repr: identical inputs give identical bytes."""
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(json.dumps(_jsonable(payload), indent=2, sort_keys=True) + "\n")
    return path


# ---------------------------------------------------------------------------
# Stages
# ---------------------------------------------------------------------------


class Pipeline:
    """Lazily built stages shared by the subcommands."""

    def __init__(self, cfg: RunConfig):
        self.cfg = cfg
        self.out = Path(cfg.output_dir)
        self.out.mkdir(parents=True, exist_ok=True)
        self._state = self._grid = self._bounds = self._bs = None

    @property
    def cache_dir(self):
        return os.environ.get(CACHE_ENV) or self.cfg.cache_dir

    @property
    def source(self):
        model = self.cfg.model
        kind = model.get("kind", "polytrope")
        if kind == "polytrope":
            return self.state
        e0 = model.get("e0")
        if kind == "kepler":
            return KeplerPotential(M=model.get("M", 1.0), e0=e0 if e0 is not None else -0.5)
        if kind == "harmonic":
            return HarmonicPotential(omega=model.get("omega", 1.0), e0=e0 if e0 is not None else 1.0)
        return IsochronePotential(M=model.get("M", 1.0), b=model.get("b", 1.0),
                                  e0=e0 if e0 is not None else -0.1)

    @property
    def state(self):
        if self._state is None:
            model = self.cfg.model
            params = PolytropeParams(k=float(model.get("k", 1.0)), kappa=float(model.get("kappa", 1.0)),
                                     ode_tol=float(self.cfg.ode_tol))
            self._state, hit = build_polytrope_cached(params, self.cache_dir)
            log.info("steady state %s (key %s)", "cache hit" if hit else "computed",
                     params.cache_key()[:12])
        return self._state

    @property
    def grid(self):
        if self._grid is None:
            g = self.cfg.grid
            k = self.cfg.model.get("k") if self.cfg.model.get("kind") != "polytrope" else None
            self._grid = build_domain_grid(self.source, g.n_beta, g.n_e, k=k)
        return self._grid

    @property
    def bounds(self):
        if self._bounds is None:
            self._bounds = omega_bounds(self.grid)
        return self._bounds

    @property
    def bs(self):
        if self._bs is None:
            g = self.cfg.grid
            self._bs = BirmanSchwinger(build_sine_table(self.grid, g.k_max, g.n_r))
        return self._bs

    # individual stages -------------------------------------------------

    def steady_state(self) -> dict:
        if self.cfg.model.get("kind", "polytrope") != "polytrope":
            raise ValueError("steady-state needs a polytrope model")
        st = self.state
        save_state(st, self.out / "profile.json")
        inv = st.check_invariants()
        summary = {"k": st.k, "kappa": st.kappa, "M": st.M, "r_Q": st.r_Q, "e0": st.e0, "U0": st.U0,
                   "invariants": inv}
        write_json(self.out / "steady_state.json", summary)
        return summary

    def orbits(self) -> dict:
        grid, ob = self.grid, self.bounds
        write_orbit_table_csv(grid, self.out / "orbit_table.csv")
        write_emin_curve_csv(grid.potential, np.linspace(0.0, grid.beta_star, 65),
                             self.out / "emin_curve.csv")
        payload = {"beta_star": grid.beta_star, "delta1": ob.delta1, "Delta1": ob.Delta1,
                   "delta1_err": ob.delta1_err, "Delta1_err": ob.Delta1_err,
                   "argmin": ob.argmin, "argmax": ob.argmax, "n_nodes": grid.n_nodes}
        write_json(self.out / "omega_bounds.json", payload)
        return payload

    def bands(self, k_up: int = 8) -> dict:
        ob = self.bounds
        bands = essential_spectrum_bands(ob.delta1, ob.Delta1, k_up)
        payload = {"delta1": ob.delta1, "Delta1": ob.Delta1, **bands.to_dict()}
        write_json(self.out / "bands.json", payload)
        return payload

    def mu_curve(self) -> dict:
        sp, ob = self.cfg.spectrum, self.bounds
        lambdas = np.linspace(0.0, sp.top * ob.delta1**2, sp.n_lambda)
        curve = mu_curve(self.bs, lambdas, ob.delta1, m=sp.m)
        curve.to_csv(self.out / "mu_curve.csv")
        star = estimate_mu_star(self.bs, ob.delta1)
        est = mu1_with_error(self.grid, 0.0, self.cfg.grid.k_max, self.cfg.grid.n_r)
        payload = {"mu1_at_0": float(curve.mu1[0]), "mu1_at_0_err": est.error,
                   "monotonicity_violation": curve.monotonicity_violation,
                   "convexity_violation": curve.convexity_violation,
                   "mu_star_est": star.value, "mu_star_extrapolated": star.extrapolated,
                   "mu_star_divergent": star.divergent}
        write_json(self.out / "mu_curve.json", payload)
        return payload

    def lambda_star(self) -> dict:
        sp, ob = self.cfg.spectrum, self.bounds
        hat = find_lambda_hat(self.bs, ob.delta1, tol=sp.tol, margin=sp.margin)
        gal = galerkin_lowest(self.bs)
        payload = {"lambda_hat": None, "galerkin_min": gal.lowest,
                   "galerkin_err": gal.error + edge_error(ob, gal.lowest),
                   "galerkin_method": gal.method, "delta1_sq": ob.delta1**2}
        if hat is not None:
            rec = recover_eigenfunction(self.bs, hat.lam, hat.psi)
            payload.update({"lambda_hat": hat.lam, "lambda_hat_err": hat.error,
                            "mu1_at_lambda_hat": hat.mu_at, "degenerate": hat.degenerate,
                            "fixed_point_residual": rec.fixed_point_residual,
                            "roundtrip_residual": rec.roundtrip_residual,
                            "galerkin_residual": rec.galerkin_residual})
        write_json(self.out / "lambda_star.json", payload)
        return payload

    def flow(self) -> dict:
        fc, ob = self.cfg.flow, self.bounds
        start = initial_state(self.bs, seed=fc.seed, Delta1=ob.Delta1)
        res = minimize(start, self.bs, budget=fc.budget, tol=fc.tol, delta1=ob.delta1)
        res.to_csv(self.out / "flow_history.csv")
        payload = {**res.to_dict(), "lambda_star_err": res.error + edge_error(ob, res.lambda_star),
                   "delta1_sq": ob.delta1**2}
        write_json(self.out / "flow.json", payload)
        return payload


def _agreement(estimates: dict) -> dict:
    """Pairwise |a - b| <= err_a + err_b over the available (value, err) pairs."""
    names = sorted(k for k, v in estimates.items() if v is not None)
    flags = {}
    for i, a in enumerate(names):
        for b in names[i + 1 :]:
            (va, ea), (vb, eb) = estimates[a], estimates[b]
            flags[f"{a}~{b}"] = bool(abs(va - vb) <= ea + eb)
    return flags


def run_report(pipe: Pipeline) -> tuple[dict, int]:
    report: dict = {"status": {}}
    code = 0
    stages = [("orbits", pipe.orbits), ("bands", pipe.bands), ("mu_curve", pipe.mu_curve),
              ("lambda_star", pipe.lambda_star), ("flow", pipe.flow)]
    results = {}
    for name, fn in stages:
        try:
            results[name] = fn()
            report["status"][name] = "ok"
        except SPECTRAL_ERRORS as exc:
            report["status"][name] = f"failed: {type(exc).__name__}: {exc}"
            code = EXIT_SPECTRAL
            if name in ("orbits",):
                break
    orb = results.get("orbits", {})
    report["delta1"] = orb.get("delta1")
    report["Delta1"] = orb.get("Delta1")
    report["delta1_err"] = orb.get("delta1_err")
    report["Delta1_err"] = orb.get("Delta1_err")
    if "bands" in results:
        report["bands"] = results["bands"]["bands"]
        report["lambda_c"] = results["bands"]["lambda_c"]
    mc = results.get("mu_curve", {})
    report["mu1_at_0"] = mc.get("mu1_at_0")
    report["mu1_at_0_err"] = mc.get("mu1_at_0_err")
    report["mu_star_est"] = mc.get("mu_star_est")
    ls = results.get("lambda_star", {})
    fl = results.get("flow", {})
    if ls.get("lambda_hat") is not None:
        report["lambda_hat"] = ls["lambda_hat"]
        report["lambda_hat_err"] = ls["lambda_hat_err"]
    report["galerkin_min"] = ls.get("galerkin_min")
    report["galerkin_err"] = ls.get("galerkin_err")
    report["lambda_star_flow"] = fl.get("lambda_star")
    report["lambda_star_flow_err"] = fl.get("lambda_star_err")
    estimates = {
        "lambda_hat": (ls["lambda_hat"], ls["lambda_hat_err"]) if ls.get("lambda_hat") is not None else None,
        "galerkin": (ls["galerkin_min"], ls["galerkin_err"]) if ls else None,
        "flow": (fl["lambda_star"], fl["lambda_star_err"]) if fl else None,
    }
    flags = _agreement(estimates)
    if ls and ls.get("lambda_hat") is None and mc:
        flags["no_root_since_mu_star_le_1"] = bool(mc["mu_star_est"] <= 1.0)
        report["note"] = ("mu_1 stays below 1 up to delta1^2, so no eigenvalue of L lies below "
                          "delta1^2 and lambda_* equals delta1^2 up to discretization")
    if fl and orb:
        flags["flow_below_delta1_sq"] = bool(
            fl["lambda_star"] <= orb["delta1"] ** 2 + fl["lambda_star_err"]
        )
    report["agreement_flags"] = flags
    write_json(pipe.out / "report.json", report)
    return report, code


# ---------------------------------------------------------------------------
# click wiring
# ---------------------------------------------------------------------------


def _run(ctx, stage: str):
    cfg = ctx.obj["config"]
    try:
        pipe = Pipeline(cfg)
        if stage == "report":
            payload, code = run_report(pipe)
        else:
            payload, code = getattr(pipe, stage.replace("-", "_"))(), 0
    except NoCutoffFound as exc:
        click.echo(f"error: {exc}", err=True)
        ctx.exit(EXIT_MODEL)
    except ValueError as exc:
        click.echo(f"error: invalid model: {exc}", err=True)
        ctx.exit(EXIT_MODEL)
    except IntegratorFailure as exc:
        click.echo(f"error: integrator failure: {exc}", err=True)
        ctx.exit(EXIT_INTEGRATOR)
    except SPECTRAL_ERRORS as exc:
        click.echo(f"error: {stage} failed: {type(exc).__name__}: {exc}", err=True)
        ctx.exit(EXIT_SPECTRAL)
    click.echo(json.dumps(_jsonable(payload), indent=2, sort_keys=True))
    ctx.exit(code)


def _config_options(fn):
    fn = click.argument("config_path", type=click.Path(exists=True, dir_okay=False), required=False)(fn)
    fn = click.option("--set", "overrides", multiple=True, metavar="SECTION.KEY=VALUE",
                      help="Override one config key; may be repeated.")(fn)
    fn = click.option("--output-dir", type=click.Path(file_okay=False), default=None)(fn)
    fn = click.option("--cache-dir", type=click.Path(file_okay=False), default=None)(fn)
    return fn


def _make_command(stage: str, help_text: str):
    @_config_options
    @click.pass_context
    def command(ctx, config_path, overrides, output_dir, cache_dir):
        extra = list(overrides)
        if output_dir is not None:
            extra.append(f"output_dir={output_dir}")
        if cache_dir is not None:
            extra.append(f"cache_dir={cache_dir}")
        try:
            ctx.obj["config"] = load_config(config_path, extra)
        except (click.BadParameter, TypeError) as exc:
            click.echo(f"error: invalid config: {exc}", err=True)
            ctx.exit(EXIT_MODEL)
        _run(ctx, stage)

    command.__doc__ = help_text
    return click.command(name=stage)(command)


@click.version_option(__version__, package_name="artifact")
@click.group()
@click.option("--threads", type=int, default=None, help="Cap BLAS/OpenMP worker threads.")
@click.option("-v", "--verbose", is_flag=True, help="Log progress to standard error.")
@click.pass_context
def cli(ctx, threads, verbose):
    """Spectral toolkit for isotropic polytropes of the Vlasov-Poisson system."""
    logging.basicConfig(level=logging.INFO if verbose else logging.WARNING, stream=sys.stderr,
                        format="%(levelname)s %(name)s: %(message)s")
    ctx.ensure_object(dict)
    if threads is not None:
        from threadpoolctl import threadpool_limits

        ctx.obj["threadpool"] = threadpool_limits(limits=threads)


for _stage, _help in [
    ("steady-state", "Build the polytrope and write profile.json."),
    ("orbits", "Tabulate periods on the domain grid and the bounds delta1, Delta1."),
    ("bands", "Essential-spectrum bands k^2 [delta1^2, Delta1^2] and the merge threshold."),
    ("mu-curve", "Largest Birman-Schwinger eigenvalues on a lambda grid below delta1^2."),
    ("lambda-star", "Root of mu_1 = 1, the recovered eigenfunction and the Galerkin minimum."),
    ("flow", "Gradient-flow estimate of the lowest eigenvalue of L."),
    ("report", "Run every stage and cross-check the three estimators."),
]:
    cli.add_command(_make_command(_stage, _help))


if __name__ == "__main__":  # pragma: no cover
    cli()
