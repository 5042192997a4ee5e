"""Named experiments: config validation, deterministic runners and result tables."""
from __future__ import annotations

import json
import math
import os
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass
from multiprocessing import get_context

import numpy as np

from . import __version__
from .dynamics import (ObservableFamily, TorusAction, TrigObservable, convergence_sweep,
                       ergodicity_certificate, random_trig_observable, torus_maximal_constant)
from .errors import ConfigError, ErgolabError, StageError
from .fourier import DecayProfile, decay_profile, estimate_fourier_dimension, rajchman_defect
from .maximal import (Profile, curve_maximal, default_grid_family, grid_maximal_constant,
                      gaussian_profile, lp_norm, refinement_study, sample_profile)
from .measures import BrownianImage, Dilation, measure_from_dict
from .rng import derive_seed
from .spectral import (LatticeWeights, SpectralMeasure, TorusSpectralMeasure, mean_average_norm,
                       projection_mass, zd_cesaro)
from .tables import ResultTable

REQUIRED = object()
COMMON_FIELDS = {"experiment": REQUIRED, "seed": 0, "output": None}
SQRT2, SQRT3 = math.sqrt(2.0), math.sqrt(3.0)

#: certified-ergodic default torus models
TORUS_MODELS = {
    "line2": [[1.0], [SQRT2]],
    "cube3": [[1.0, 0.0, 0.0], [0.0, 1.0, 0.0], [0.0, 0.0, 1.0]],
    "line3": [[1.0], [SQRT2], [SQRT3]],
}

FIELDS = {
    "fourier-dim": {
        "measure": REQUIRED, "radii": {"min": 10.0, "max": 1e4, "count": 128, "spacing": "log"},
        "n_directions": None, "budget": None, "method": "auto", "fit_window": None,
        "tail_fraction": 0.25},
    "salem": {
        "cantor_ratio": 1.0 / 3.0, "depth": 14, "d": 2, "resolution": None, "seeds": 20,
        "radii": {"min": 30.0, "max": 1000.0, "count": 16, "spacing": "log"},
        "n_directions": 128},
    "mean-ergodic": {
        "measure": REQUIRED, "dilation": None, "spectral": REQUIRED,
        "lambdas": {"min": 1.0, "max": 1000.0, "count": 31, "spacing": "log"}, "budget": None},
    "zd-bound": {
        "lattice": REQUIRED, "torus_spectral": REQUIRED, "horizons": [1000, 10000, 100000]},
    "pointwise": {
        "action": REQUIRED, "measure": REQUIRED, "dilation": None, "observable": REQUIRED,
        "lambdas": {"min": 1.0, "max": 1000.0, "count": 13, "spacing": "log"},
        "x_samples": 1000, "override": False, "budget": None},
    "maximal": {
        "measure": REQUIRED, "dilation": None, "p": [1.4, 1.6], "levels": [32, 64, 128],
        "half_width": 1.0, "eps_cells": 1.0, "cutoff_radius": 0.75, "lam_max": None},
    "curve": {
        "q": REQUIRED, "levels": [64, 128], "half_width": 2.0, "sigma": 0.3, "p": 2.0,
        "lambdas": {"min": 0.05, "max": 2.0, "count": 24, "spacing": "log"}, "panels": 1000},
    "transfer": {
        "action": REQUIRED, "measure": REQUIRED, "dilation": None, "p": REQUIRED,
        "family": {"count": 8, "n_modes": 20, "max_freq": 3},
        "lambdas": {"min": 0.01, "max": 2.0, "count": 150, "spacing": "log"},
        "x_samples": 1000, "grid": {"n": 64, "half_width": 2.0, "profiles": None}},
}
EXPERIMENT_NAMES = tuple(FIELDS)


@dataclass
class ExperimentConfig:
    experiment: str
    seed: int
    params: dict
    output: str | None = None

    def to_dict(self):
        """Full config echo (defaults filled); the output prefix is not part of it."""
        return {"experiment": self.experiment, "seed": self.seed, **self.params}


# ---------------------------------------------------------------------------
# Validation
# ---------------------------------------------------------------------------

def _lambda_grid(spec):
    if isinstance(spec, dict):
        unknown = set(spec) - {"min", "max", "count", "spacing"}
        if unknown:
            raise ValueError(f"unknown keys {sorted(unknown)}")
        lo, hi, n = float(spec["min"]), float(spec["max"]), int(spec["count"])
        spacing = spec.get("spacing", "log")
        if not 0 < lo < hi or n < 1:
            raise ValueError("need 0 < min < max and count >= 1")
        if spacing == "log":
            return np.logspace(math.log10(lo), math.log10(hi), n)
        if spacing == "linear":
            return np.linspace(lo, hi, n)
        raise ValueError(f"spacing must be 'log' or 'linear', got {spacing!r}")
    arr = np.asarray(spec, dtype=float)
    if arr.ndim != 1 or not len(arr) or np.any(arr <= 0) or np.any(np.diff(arr) <= 0):
        raise ValueError("must be a nonempty increasing list of positive numbers")
    return arr


def _action(spec):
    if isinstance(spec, str):
        if spec not in TORUS_MODELS:
            raise ValueError(f"unknown torus model {spec!r}; shipped models: {sorted(TORUS_MODELS)}")
        return TorusAction(TORUS_MODELS[spec])
    if isinstance(spec, dict) and "model" in spec:
        return _action(spec["model"])
    return TorusAction.from_dict(spec)


def _observable(spec, n, seed):
    if "random" in spec:
        r = spec["random"]
        return random_trig_observable(n, int(r.get("n_modes", 20)), int(r.get("max_freq", 3)),
                                      derive_seed(seed, "observable"), mean=float(r.get("mean", 0.0)))
    return TrigObservable.from_dict(spec)


def _positive_int(v, name):
    if isinstance(v, bool) or not isinstance(v, int) or v < 1:
        raise ValueError(f"{name} must be a positive integer")
    return v


def _p_values(v):
    ps = [float(x) for x in np.atleast_1d(v)]
    if not ps or min(ps) < 1:
        raise ValueError("p values must be at least 1")
    return ps


def validate_config(raw) -> ExperimentConfig:
    """Parse and cross-validate a config; raises :class:`ConfigError` listing every violation."""
    errors = []
    if isinstance(raw, (str, bytes)):
        try:
            raw = json.loads(raw)
        except json.JSONDecodeError as exc:
            raise ConfigError(f"config is not valid JSON: {exc}") from None
    if not isinstance(raw, dict):
        raise ConfigError("config must be a JSON object")
    name = raw.get("experiment")
    if name not in FIELDS:
        raise ConfigError(f"unknown experiment {name!r}; valid experiments: "
                          f"{', '.join(EXPERIMENT_NAMES)}")
    fields = FIELDS[name]
    for key in raw:
        if key not in fields and key not in COMMON_FIELDS:
            errors.append(f"unknown field {key!r} for experiment {name!r}")
    params = {}
    for key, default in fields.items():
        if key in raw:
            val = raw[key]
            if isinstance(default, dict) and isinstance(val, dict) and not {"min", "max"} <= set(val):
                val = {**default, **val}
            params[key] = val
        elif default is REQUIRED:
            errors.append(f"missing required field {key!r} for experiment {name!r}")
        else:
            params[key] = json.loads(json.dumps(default))
    seed = raw.get("seed", 0)
    if isinstance(seed, bool) or not isinstance(seed, int) or not 0 <= seed < 2 ** 64:
        errors.append("field 'seed' must be an integer in [0, 2**64)")
        seed = 0
    built = {}

    def check(key, fn):
        if key not in params:
            return
        try:
            built[key] = fn(params[key])
        except (ErgolabError, ValueError, TypeError, KeyError) as exc:
            errors.append(f"field {key!r}: {exc}")

    check("measure", measure_from_dict)
    check("dilation", lambda v: None if v is None else Dilation(v))
    check("lambdas", _lambda_grid)
    check("radii", _lambda_grid)
    check("spectral", SpectralMeasure.from_dict)
    check("lattice", LatticeWeights.from_dict)
    check("torus_spectral", TorusSpectralMeasure.from_dict)
    check("action", _action)
    check("horizons", lambda v: [_positive_int(x, "horizon") for x in v])
    check("levels", lambda v: [_positive_int(x, "level") for x in v])
    check("q", lambda v: measure_from_dict({"type": "curve", "q": v}))
    check("seeds", lambda v: _positive_int(v, "seeds"))
    check("x_samples", lambda v: _positive_int(v, "x_samples"))
    check("p", _p_values)
    if name == "salem":
        check("cantor_ratio", lambda v: BrownianImage(v, 1, params.get("d", 2)))
        check("depth", lambda v: _positive_int(v, "depth"))
    if "method" in params and params["method"] not in ("auto", "quadrature", "closed_form",
                                                       "monte_carlo"):
        errors.append(f"field 'method': unknown transform method {params['method']!r}")

    # cross-field dimension checks
    nu = built.get("measure")
    if nu is not None:
        dil = built.get("dilation")
        if dil is not None and dil.d != nu.d:
            errors.append(f"dimension mismatch: 'measure' lives in R^{nu.d} but 'dilation' has "
                          f"{dil.d} exponents")
        if "spectral" in built and built["spectral"].d != nu.d:
            errors.append(f"dimension mismatch: 'measure' lives in R^{nu.d} but 'spectral' atoms "
                          f"have dimension {built['spectral'].d}")
        if "action" in built and built["action"].d != nu.d:
            errors.append(f"dimension mismatch: 'measure' lives in R^{nu.d} but 'action' acts by "
                          f"R^{built['action'].d}")
    if "lattice" in built and "torus_spectral" in built and \
            built["lattice"].d != built["torus_spectral"].d:
        errors.append("dimension mismatch between 'lattice' and 'torus_spectral'")
    if "action" in built and "observable" in params:
        try:
            f = _observable(params["observable"], built["action"].n, seed)
            if f.n != built["action"].n:
                errors.append(f"dimension mismatch: 'observable' lives on T^{f.n} but 'action' on "
                              f"T^{built['action'].n}")
        except (ErgolabError, ValueError, TypeError, KeyError) as exc:
            errors.append(f"field 'observable': {exc}")
    if errors:
        raise ConfigError(errors)
    if "dilation" in params and params["dilation"] is None and nu is not None:
        params["dilation"] = [1.0] * nu.d
    if name == "maximal" and params["lam_max"] is None:
        params["lam_max"] = params["half_width"] * math.sqrt(nu.d)
    return ExperimentConfig(name, int(seed), params, raw.get("output"))


# ---------------------------------------------------------------------------
# Parallel map
# ---------------------------------------------------------------------------

def default_workers():
    try:
        return max(1, int(os.environ.get("ERGOLAB_WORKERS", "1")))
    except ValueError:
        return 1


def parallel_map(fn, tasks, workers=1):
    """Ordered map over ``tasks``; every task is seeded by its own arguments."""
    tasks = list(tasks)
    if workers <= 1 or len(tasks) <= 1:
        return [fn(*t) for t in tasks]
    with ProcessPoolExecutor(max_workers=min(workers, len(tasks)),
                             mp_context=get_context("spawn")) as pool:
        return list(pool.map(fn, *zip(*tasks)))


CHUNK = 8


def _chunks(values, size=CHUNK):
    """Fixed-size chunks, so task boundaries never depend on the worker count."""
    values = list(values)
    return [values[i:i + size] for i in range(0, len(values), size)]


# ---------------------------------------------------------------------------
# Task functions (top level so worker processes can import them)
# ---------------------------------------------------------------------------

def _task_profile(measure, radii, n_dir, budget, seed, method):
    prof = decay_profile(measure_from_dict(measure), radii, n_dir, budget, seed, method)
    return prof.sup_modulus.tolist(), prof.mean_modulus.tolist(), prof.n_directions


def _task_salem(ratio, depth, d, resolution, path_seed, radii, n_dir):
    nu = BrownianImage(ratio, depth, d, path_seed, resolution)
    prof = decay_profile(nu, radii, n_dir, seed=path_seed)
    return estimate_fourier_dimension(prof)


def _task_mean(measure, dilation, spectral, lambdas, budget, seed):
    rho, dil = measure_from_dict(measure), Dilation(dilation)
    sm = SpectralMeasure.from_dict(spectral)
    nz = ~np.all(sm.frequencies == 0, axis=1)
    rest = SpectralMeasure(sm.frequencies[nz], sm.weights[nz]) if nz.any() else None
    out = []
    for lam in lambdas:
        full = mean_average_norm(rho, dil, lam, sm, budget, seed)
        val = mean_average_norm(rho, dil, lam, rest, budget, seed) if rest is not None else 0.0
        out.append((lam, val, full))
    return out


def _task_zd(lattice, tsm, N):
    return zd_cesaro(LatticeWeights.from_dict(lattice), TorusSpectralMeasure.from_dict(tsm), N)


def _task_sweep(action, measure, dilation, observable, lambdas, x_samples, seed, budget, override):
    rows = convergence_sweep(TorusAction.from_dict(action), measure_from_dict(measure),
                             Dilation(dilation), lambdas, TrigObservable.from_dict(observable),
                             x_samples, seed, budget, override)
    return [(r.lam, r.deviation_max, r.deviation_mean, r.x_samples) for r in rows]


def _task_refine(measure, dilation, ps, n, half_width, eps_cells, cutoff_radius, lam_max):
    rows = refinement_study(measure_from_dict(measure), Dilation(dilation), ps, (n,), half_width,
                            eps_cells, cutoff_radius, lam_max)
    return [(r.n, r.p, r.weak_ratio, r.strong_ratio) for r in rows]


def _task_curve(q, n, half_width, sigma, p, lambdas, panels):
    d = len(q)
    phi = sample_profile(gaussian_profile(sigma), d, n, half_width)
    M = curve_maximal(phi, q, Dilation(list(range(1, d + 1))), lambdas, panels)
    return (n, lp_norm(M, p) / lp_norm(phi, p),
            float(np.max(np.abs(M.values)) / np.max(np.abs(phi.values))))


def _task_torus(action, measure, dilation, p, observable, lambdas, x_samples, seed):
    return torus_maximal_constant(TorusAction.from_dict(action), measure_from_dict(measure),
                                  Dilation(dilation), p, [TrigObservable.from_dict(observable)],
                                  lambdas, x_samples, seed)


def _task_grid(measure, dilation, p, lambdas, n, half_width, profile):
    return grid_maximal_constant(measure_from_dict(measure), Dilation(dilation), p, lambdas, n,
                                 half_width, [Profile.from_dict(profile)])


# ---------------------------------------------------------------------------
# Runners
# ---------------------------------------------------------------------------

def _run_fourier_dim(cfg, workers):
    P = cfg.params
    radii = _lambda_grid(P["radii"])
    nu = measure_from_dict(P["measure"])
    n_dir = P["n_directions"] or 64 * nu.d
    parts = parallel_map(_task_profile, [(P["measure"], chunk, n_dir, P["budget"], cfg.seed,
                                          P["method"]) for chunk in _chunks(radii)],
                         workers)
    sup = np.concatenate([p[0] for p in parts])
    mean = np.concatenate([p[1] for p in parts])
    prof = DecayProfile(radii, sup, mean, parts[0][2], P["budget"], cfg.seed, P["measure"],
                        P["method"], nu.d)
    window = tuple(P["fit_window"]) if P["fit_window"] is not None else None
    a_hat, stderr = estimate_fourier_dimension(prof, window)
    table = ResultTable([("radius", "real"), ("sup_modulus", "real"), ("mean_modulus", "real"),
                         ("n_directions", "int")],
                        [(r, s, m, prof.n_directions) for r, s, m in zip(radii, sup, mean)])
    table.metadata["summary"] = {"a_hat": a_hat, "stderr": stderr,
                                 "rajchman_defect": rajchman_defect(prof, P["tail_fraction"])}
    return table


def _run_salem(cfg, workers):
    P = cfg.params
    radii = _lambda_grid(P["radii"])
    seeds = [derive_seed(cfg.seed, "salem", i) for i in range(P["seeds"])]
    ests = parallel_map(_task_salem, [(P["cantor_ratio"], P["depth"], P["d"], P["resolution"], s,
                                       radii, P["n_directions"]) for s in seeds], workers)
    table = ResultTable([("index", "int"), ("path_seed", "int"), ("a_hat", "real"),
                         ("stderr", "real")],
                        [(i, s, a, e) for i, (s, (a, e)) in enumerate(zip(seeds, ests))])
    b = math.log(2.0) / math.log(1.0 / P["cantor_ratio"])
    a = np.array([e[0] for e in ests])
    table.metadata["summary"] = {"mean_a_hat": float(a.mean()), "std_a_hat": float(a.std()),
                                 "hausdorff_dimension": b, "target": min(2 * b, P["d"])}
    table.metadata["construction"] = (
        "Cantor measure truncated at depth with uniform weights on 2^depth intervals; Brownian "
        "path from independent normal increments on a uniform grid of `resolution` steps, "
        "linearly interpolated")
    return table


def _run_mean_ergodic(cfg, workers):
    P = cfg.params
    lambdas = _lambda_grid(P["lambdas"])
    parts = parallel_map(_task_mean, [(P["measure"], P["dilation"], P["spectral"], chunk,
                                       P["budget"], cfg.seed) for chunk in _chunks(lambdas)],
                         workers)
    proj = projection_mass(SpectralMeasure.from_dict(P["spectral"]))
    rows = [(lam, v, full, proj) for part in parts for lam, v, full in part]
    return ResultTable([("lambda", "real"), ("value", "real"), ("norm_sq", "real"),
                        ("projection", "real")], rows)


def _run_zd_bound(cfg, workers):
    P = cfg.params
    res = parallel_map(_task_zd, [(P["lattice"], P["torus_spectral"], N) for N in P["horizons"]],
                       workers)
    return ResultTable([("N", "int"), ("cesaro", "real"), ("predicted", "real"), ("bound", "real")],
                       [(N, *r) for N, r in zip(P["horizons"], res)])


def _run_pointwise(cfg, workers):
    P = cfg.params
    action = _action(P["action"])
    f = _observable(P["observable"], action.n, cfg.seed)
    K = int(np.abs(f.modes).max()) if len(f.modes) else 1
    verdict = ergodicity_certificate(action, max(K, 1)) if (2 * K + 1) ** action.n <= 5e7 else None
    lambdas = _lambda_grid(P["lambdas"])
    parts = parallel_map(_task_sweep, [(action.to_dict(), P["measure"], P["dilation"], f.to_dict(),
                                        chunk, P["x_samples"], cfg.seed, P["budget"], P["override"])
                                       for chunk in _chunks(lambdas)], workers)
    table = ResultTable([("lambda", "real"), ("deviation_max", "real"), ("deviation_mean", "real"),
                         ("x_samples", "int")], [r for part in parts for r in part])
    table.metadata["summary"] = {
        "observable_mean": [f.mean.real, f.mean.imag],
        "certificate": None if verdict is None else {
            "status": verdict.status, "K": verdict.K,
            "witness": None if verdict.witness is None else list(verdict.witness)}}
    return table


def _run_maximal(cfg, workers):
    P = cfg.params
    ps = [float(x) for x in np.atleast_1d(P["p"])]
    parts = parallel_map(_task_refine, [(P["measure"], P["dilation"], ps, n, P["half_width"],
                                         P["eps_cells"], P["cutoff_radius"], P["lam_max"])
                                        for n in P["levels"]], workers)
    return ResultTable([("n", "int"), ("p", "real"), ("weak_ratio", "real"),
                        ("strong_ratio", "real")], [r for part in parts for r in part])


def _run_curve(cfg, workers):
    P = cfg.params
    lambdas = _lambda_grid(P["lambdas"])
    res = parallel_map(_task_curve, [(P["q"], n, P["half_width"], P["sigma"], float(P["p"]),
                                      lambdas, P["panels"]) for n in P["levels"]], workers)
    return ResultTable([("n", "int"), ("strong_ratio", "real"), ("max_ratio", "real")], res)


def _run_transfer(cfg, workers):
    P = cfg.params
    action = _action(P["action"])
    nu = measure_from_dict(P["measure"])
    p = float(np.atleast_1d(P["p"])[0])
    lambdas = _lambda_grid(P["lambdas"])
    fam = P["family"]
    observables = ObservableFamily(int(fam.get("count", 8)), int(fam.get("n_modes", 20)),
                                   int(fam.get("max_freq", 3))).generate(action.n, cfg.seed)
    grid = P["grid"]
    profiles = grid.get("profiles") or [pr.to_dict() for pr in
                                        default_grid_family(grid.get("half_width", 2.0))]
    tasks = [("torus", (action.to_dict(), P["measure"], P["dilation"], p, f.to_dict(), lambdas,
                        P["x_samples"], cfg.seed)) for f in observables]
    tasks += [("grid", (P["measure"], P["dilation"], p, lambdas, int(grid.get("n", 64)),
                        float(grid.get("half_width", 2.0)), pr)) for pr in profiles]
    vals = parallel_map(_task_either, tasks, workers)
    torus = max(v for (kind, _), v in zip(tasks, vals) if kind == "torus")
    gridc = max(v for (kind, _), v in zip(tasks, vals) if kind == "grid")
    table = ResultTable([("p", "real"), ("torus_constant", "real"), ("grid_constant", "real"),
                         ("ratio", "real")], [(p, torus, gridc, torus / gridc)])
    table.metadata["summary"] = {"measure_d": nu.d, "observables": len(observables),
                                 "profiles": len(profiles)}
    return table


def _task_either(kind, args):
    return _task_torus(*args) if kind == "torus" else _task_grid(*args)


RUNNERS = {
    "fourier-dim": _run_fourier_dim, "salem": _run_salem, "mean-ergodic": _run_mean_ergodic,
    "zd-bound": _run_zd_bound, "pointwise": _run_pointwise, "maximal": _run_maximal,
    "curve": _run_curve, "transfer": _run_transfer,
}


def run_experiment(cfg: ExperimentConfig, workers=None) -> ResultTable:
    """Run a validated config; the table does not depend on ``workers``."""
    workers = default_workers() if workers is None else max(1, int(workers))
    try:
        table = RUNNERS[cfg.experiment](cfg, workers)
    except StageError:
        raise
    except (ErgolabError, ValueError, ArithmeticError, NotImplementedError) as exc:
        raise StageError(cfg.experiment, exc) from exc
    table.metadata.update({"config": cfg.to_dict(), "experiment": cfg.experiment,
                           "seed": cfg.seed, "version": __version__})
    return table
