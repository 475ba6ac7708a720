"""Named experiments run by the command line driver.

Each runner takes an :class:`ExperimentConfig` and returns
``(report, trace_rows)``: a JSON-serializable summary and a list of flat
dicts written to ``trace.csv``.
"""
from __future__ import annotations

import configparser
from dataclasses import asdict, dataclass, field, is_dataclass
from typing import Callable

import numpy as np

from . import analysis, fracops, gauge, manifold, solver
from .domain import Domain, build_domain


class ConfigError(ValueError):
    """Malformed or incomplete experiment configuration."""


class ConvergenceError(RuntimeError):
    """An experiment that demands convergence did not converge."""


def _bool(text):
    value = str(text).strip().lower()
    if value in ("1", "true", "yes", "on"):
        return True
    if value in ("0", "false", "no", "off"):
        return False
    raise ValueError(f"not a boolean: {text!r}")


def _int_list(text):
    return [int(v) for v in str(text).replace(",", " ").split()]


PARAMETER_TYPES = {
    "s": float,
    "p": float,
    "N": int,
    "trials": int,
    "tol": float,
    "max_iters": int,
    "initial_step": float,
    "lambda": float,
    "amplitude": float,
    "sizes": _int_list,
    "require_convergence": _bool,
    "threads": int,
}


@dataclass
class ExperimentConfig:
    name: str
    domain: dict
    parameters: dict = field(default_factory=dict)
    seed: int | None = None
    output: str = "out"

    def param(self, key, default=None):
        return self.parameters.get(key, default)

    def build_domain(self, n_per_axis=None) -> Domain:
        d = self.domain
        return build_domain(
            d["dim"],
            d["topology"],
            n_per_axis or d["nodes_per_axis"],
            lower=d.get("lower"),
            upper=d.get("upper"),
        )

    def to_dict(self):
        return asdict(self)


def parse_config(text: str) -> ExperimentConfig:
    """Parse the INI-style experiment file (sections ``experiment``, ``domain``,
    ``parameters``, ``output``)."""
    parser = configparser.ConfigParser()
    parser.optionxform = str
    try:
        parser.read_string(text)
    except configparser.Error as exc:
        raise ConfigError(f"cannot parse config: {exc}") from exc

    if not parser.has_section("experiment") or "name" not in parser["experiment"]:
        raise ConfigError("missing [experiment] name")
    name = parser["experiment"]["name"].strip()
    if name not in EXPERIMENTS:
        raise ConfigError(f"unknown experiment {name!r}; choose from {sorted(EXPERIMENTS)}")
    try:
        seed = parser["experiment"].getint("seed") if "seed" in parser["experiment"] else None
    except ValueError as exc:
        raise ConfigError(f"bad seed: {exc}") from exc

    if not parser.has_section("domain"):
        raise ConfigError("missing [domain] section")
    sec = parser["domain"]
    try:
        domain = {
            "dim": sec.getint("dim", 1),
            "topology": sec.get("topology", "periodic").strip(),
            "nodes_per_axis": sec.getint("nodes_per_axis"),
        }
        for key in ("lower", "upper"):
            if key in sec:
                domain[key] = [float(v) for v in sec[key].replace(",", " ").split()]
    except ValueError as exc:
        raise ConfigError(f"bad [domain] entry: {exc}") from exc
    if domain["nodes_per_axis"] is None:
        raise ConfigError("missing [domain] nodes_per_axis")

    params = {}
    if parser.has_section("parameters"):
        for key, raw in parser["parameters"].items():
            if key not in PARAMETER_TYPES:
                raise ConfigError(f"unknown parameter {key!r}")
            try:
                params[key] = PARAMETER_TYPES[key](raw)
            except ValueError as exc:
                raise ConfigError(f"bad value for {key!r}: {exc}") from exc

    output = "out"
    if parser.has_section("output"):
        output = parser["output"].get("directory", output).strip()

    return ExperimentConfig(name, domain, params, seed, output)


def _solver_cfg(cfg: ExperimentConfig) -> solver.SolverConfig:
    return solver.SolverConfig(
        max_iters=cfg.param("max_iters", 20000),
        tol=cfg.param("tol", 1e-8),
        initial_step=cfg.param("initial_step", 1.0),
        seed=cfg.seed or 0,
    )


def _require(cfg, report):
    if cfg.param("require_convergence", False) and not report.converged:
        raise ConvergenceError(f"{cfg.name}: {report.message} after {report.iterations} iterations")


def _clean(value):
    """Convert numpy scalars / dataclasses into plain JSON types."""
    if is_dataclass(value):
        value = asdict(value)
    if isinstance(value, dict):
        return {str(k): _clean(v) for k, v in value.items()}
    if isinstance(value, (list, tuple)):
        return [_clean(v) for v in value]
    if isinstance(value, np.generic):
        return value.item()
    if isinstance(value, np.ndarray):
        return _clean(value.tolist())
    return value


def run_ops_check(cfg: ExperimentConfig):
    """Adjointness, composition and energy identities on random data."""
    domain = cfg.build_domain()
    s = cfg.param("s", 0.5)
    trials = cfg.param("trials", 20)
    rng = np.random.default_rng(cfg.seed)
    mu = domain.weights
    w = fracops.pair_measure(domain)
    rows = []
    for k in range(trials):
        F = rng.standard_normal((domain.size, domain.size))
        np.fill_diagonal(F, 0.0)
        phi, f, g = rng.standard_normal((3, domain.size))
        lhs = np.sum(fracops.s_divergence(domain, F, s) * phi * mu)
        rhs = np.sum(F * fracops.s_gradient(domain, phi, s) * w)
        adj = abs(lhs - rhs) / max(abs(lhs), abs(rhs), np.sum(np.abs(F * fracops.s_gradient(domain, phi, s) * w)))
        lap = fracops.fractional_laplacian(domain, f, s)
        comp = np.max(np.abs(fracops.s_divergence(domain, fracops.s_gradient(domain, f, s), s) - 2 * lap))
        comp /= max(np.max(np.abs(lap)), 1e-300)
        e_lhs = np.sum(fracops.pairing(domain, fracops.s_gradient(domain, f, s), fracops.s_gradient(domain, g, s)) * mu)
        e_rhs = 2 * np.sum(lap * g * mu)
        energy_rel = abs(e_lhs - e_rhs) / max(abs(e_lhs), abs(e_rhs), 1e-300)
        rows.append({"trial": k, "adjointness": adj, "composition": comp, "energy_identity": energy_rel})
    report = {
        "M": domain.size,
        "s": s,
        "trials": trials,
        "max_adjointness_rel": max(r["adjointness"] for r in rows),
        "max_composition_rel": max(r["composition"] for r in rows),
        "max_energy_identity_rel": max(r["energy_identity"] for r in rows),
    }
    return report, rows


def _harmonic_run(cfg, domain, u0, s, p, families):
    amplitude = cfg.param("amplitude", 0.0)
    start = u0
    if amplitude > 0:
        start = solver.perturb_map(u0, amplitude, np.random.default_rng(cfg.seed))
    u, rep = solver.solve_harmonic_map(domain, start, s, p, _solver_cfg(cfg))
    for which in families:
        rep.residuals[which] = solver.conservation_residual(domain, u, s, p, which)
        rep.residuals[which + "_initial"] = solver.conservation_residual(domain, start, s, p, which)
    _require(cfg, rep)
    report = {
        "M": domain.size,
        "dim": domain.dim,
        "N": u.shape[1],
        "s": s,
        "p": p,
        "amplitude": amplitude,
        "final_energy": rep.energies[-1],
        "tangency_max_ratio": manifold.tangency_defect(u).max_ratio if np.ptp(u) > 0 else None,
        "solve": rep.to_dict(),
    }
    report["solve"].pop("energies")
    report["solve"].pop("grad_norms")
    return report, rep.trace_rows()


def run_halfharmonic(cfg: ExperimentConfig):
    """Half-harmonic map S^1-valued on the 1D torus from degree-one data."""
    domain = cfg.build_domain()
    s, p = cfg.param("s", 0.5), cfg.param("p", 2.0)
    u0 = solver.degree_one_map(domain)
    return _harmonic_run(cfg, domain, u0, s, p, [solver.SPHERE_OMEGA, solver.KILLING_OMEGA])


def run_wsp_sphere(cfg: ExperimentConfig):
    """W^{s,p}-harmonic map into S^{N-1}; Killing conservation residual."""
    domain = cfg.build_domain()
    s, p, N = cfg.param("s", 0.5), cfg.param("p", 2.0), cfg.param("N", 2)
    if N == 2:
        u0 = solver.degree_one_map(domain)
    elif N == 3:
        u0 = solver.latitude_band_map(domain)
    else:
        raise ValueError(f"wsp-sphere supports N in (2, 3), got {N}")
    return _harmonic_run(cfg, domain, u0, s, p, [solver.KILLING_OMEGA, solver.SPHERE_OMEGA])


def run_gauge(cfg: ExperimentConfig):
    """Gauge minimization for a random antisymmetric potential."""
    domain = cfg.build_domain()
    s, N = cfg.param("s", 0.5), cfg.param("N", 3)
    rng = np.random.default_rng(cfg.seed)
    Omega = gauge.random_antisymmetric_potential(domain, N, rng, cfg.param("amplitude", 1.0))
    P, rep = gauge.solve_gauge(domain, Omega, s, _solver_cfg(cfg))
    OP = gauge.omega_p(domain, P, Omega, s)
    rep.residuals["conservation"] = gauge.gauge_conservation_residual(domain, P, Omega, s)
    rep.residuals["conservation_identity"] = gauge.gauge_conservation_residual(
        domain, gauge.identity_gauge(domain.size, N), Omega, s
    )
    _require(cfg, rep)
    report = {
        "M": domain.size,
        "N": N,
        "s": s,
        "F_identity": rep.energies[0],
        "F_final": rep.energies[-1],
        "omega_p_antisymmetry_defect": float(np.max(np.abs(OP + np.swapaxes(OP, -1, -2)))),
        "orthogonality_defect": float(np.max(np.abs(np.swapaxes(P, 1, 2) @ P - np.eye(N)))),
        "solve": rep.to_dict(),
    }
    report["solve"].pop("energies")
    report["solve"].pop("grad_norms")
    return report, rep.trace_rows()


def _sizes(cfg):
    return cfg.param("sizes") or [cfg.domain["nodes_per_axis"]]


def run_divcurl(cfg: ExperimentConfig):
    """Empirical div-curl / Hardy constants, optionally across refinements."""
    s, p = cfg.param("s", 0.5), cfg.param("p", 2.0)
    per_size, rows = {}, []
    for n in _sizes(cfg):
        domain = cfg.build_domain(n)
        res = analysis.divcurl_constant_experiment(
            domain,
            cfg.param("trials", 100),
            s,
            p,
            seed=cfg.seed,
            lam=cfg.param("lambda", 4.0),
            threads=cfg.param("threads", 1),
        )
        for rec in res.pop("records"):
            rows.append({"M": domain.size, **asdict(rec)})
        per_size[str(domain.size)] = res
    maxima = [v["max_ratio"] for v in per_size.values()]
    report = {"s": s, "p": p, "per_size": per_size, "max_ratio_spread": max(maxima) / min(maxima)}
    return report, rows


def run_wente(cfg: ExperimentConfig):
    """Fractional Wente sup-norm bound across refinements."""
    s, p = cfg.param("s", 0.5), cfg.param("p", 2.0)
    per_size, rows = {}, []
    for n in _sizes(cfg):
        domain = cfg.build_domain(n)
        res = analysis.wente_experiment(
            domain, cfg.param("trials", 50), s, p, seed=cfg.seed, threads=cfg.param("threads", 1)
        )
        for rec in res.pop("records"):
            rows.append({"M": domain.size, **rec})
        per_size[str(domain.size)] = res
    maxima = [v["max_ratio"] for v in per_size.values()]
    report = {"s": s, "p": p, "per_size": per_size, "max_ratio_spread": max(maxima) / min(maxima)}
    return report, rows


def run_tangency(cfg: ExperimentConfig):
    """Chord normal-part ratio for random sphere maps."""
    domain = cfg.build_domain()
    N = cfg.param("N", 3)
    rng = np.random.default_rng(cfg.seed)
    rows = []
    for k in range(cfg.param("trials", 5)):
        u = manifold.project_sphere(rng.standard_normal((domain.size, N)))
        rep = manifold.tangency_defect(u)
        rows.append({"trial": k, "max_ratio": rep.max_ratio, "mean_ratio": rep.mean_ratio, "pairs": rep.pairs})
    report = {
        "M": domain.size,
        "N": N,
        "max_ratio": max(r["max_ratio"] for r in rows),
        "min_ratio_of_max": min(r["max_ratio"] for r in rows),
        "max_abs_deviation_from_half": max(
            max(abs(r["max_ratio"] - 0.5), abs(r["mean_ratio"] - 0.5)) for r in rows
        ),
    }
    return report, rows


@dataclass(frozen=True)
class Experiment:
    name: str
    description: str
    runner: Callable
    randomized: bool = True


EXPERIMENTS = {
    e.name: e
    for e in (
        Experiment("ops-check", "adjointness and composition identities of the nonlocal operators", run_ops_check),
        Experiment("halfharmonic", "half-harmonic map into S^1 on the 1D torus with conservation residuals", run_halfharmonic, randomized=False),
        Experiment("wsp-sphere", "W^{s,p}-harmonic map into a sphere with Killing conservation residual", run_wsp_sphere, randomized=False),
        Experiment("gauge", "optimal SO(N) gauge for a random antisymmetric potential", run_gauge),
        Experiment("divcurl", "empirical div-curl / Hardy constants across refinements", run_divcurl),
        Experiment("wente", "fractional Wente sup-norm ratio across refinements", run_wente),
        Experiment("tangency", "normal part of sphere chords relative to their squared length", run_tangency),
    )
}


def run_experiment(cfg: ExperimentConfig):
    exp = EXPERIMENTS[cfg.name]
    needs_seed = exp.randomized or cfg.param("amplitude", 0.0) > 0
    if needs_seed and cfg.seed is None:
        raise ConfigError(f"experiment {cfg.name!r} needs a seed")
    report, rows = exp.runner(cfg)
    return _clean(report), _clean(rows)
