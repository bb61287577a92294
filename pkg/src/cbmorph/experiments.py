"""Experiment drivers behind the command-line interface.

Each ``run_*`` function takes a resolved configuration (see
:mod:`cbmorph.config`) and an output directory, writes its CSV/JSON files
there and returns the computed data for programmatic use.
"""
from __future__ import annotations

import csv
import json
import logging
from concurrent.futures import ThreadPoolExecutor
from pathlib import Path

import numpy as np
from scipy.optimize import minimize_scalar

from . import linalg
from .assembly import (assemble, chain_plan, end_dofs, frf_sweep, full_order_cell, log_magnitude_error,
                       proportional_damping, transmissibility_sweep, write_frf_csv)
from .craig_bampton import cb_reduce
from .errors import CbmorphError, IllConditionedProjectionError, InsufficientDataError, ParameterError
from .models import RESONATOR_DEFAULTS, generator_for, partition, resonator_bounds
from .projection import (CommonBasis, basis_from_modes, cb_reduce_common, diagnostics, rank_scan,
                         swap_permutation)
from .regions import (Label, ParameterSpace, RegionReference, RegionTagging, SampleModes, compute_modes, label_samples,
                      latin_hypercube, tag_regions, write_samples_csv)
from .surrogate import build_support, lagrange_interpolate, predict_cb, train_multiregion
from .surrogate.multiregion import MultiRegionSurrogate, pooled_loo_median
from .svm import train_binary, train_multiclass

log = logging.getLogger(__name__)


def _g(x) -> str:
    return f"{float(x):.17g}"


def _write_csv(path, header, rows):
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(header)
        for r in rows:
            w.writerow([_g(v) if isinstance(v, (float, np.floating)) else v for v in r])


def _write_json(path, obj):
    with open(path, "w") as fh:
        json.dump(obj, fh, sort_keys=True, indent=1)
        fh.write("\n")


# model setup ----------------------------------------------------------------

def make_generator(cfg):
    model = dict(cfg.get("model", {}))
    if cfg["preset"] == "lattice":
        return generator_for("lattice", model)
    return generator_for("resonator", cfg=model)


def _lattice_fixed(cfg):
    base = {"m": 5e-3, "k1": 1e6, "k2": 0.9e6, "vary": ["k2"]}
    base.update(cfg.get("model", {}))
    return base


def nominal(cfg) -> np.ndarray:
    if "nominal" in cfg:
        return np.asarray(cfg["nominal"], dtype=float)
    if cfg["preset"] == "lattice":
        f = _lattice_fixed(cfg)
        return np.array([f[k] for k in f["vary"]], dtype=float)
    c = {**RESONATOR_DEFAULTS, **cfg.get("model", {})}
    return np.array([c["L0"], c["W0"]])


def make_space(cfg) -> ParameterSpace:
    if cfg["preset"] == "lattice":
        names = tuple(_lattice_fixed(cfg)["vary"])
        bounds = cfg.get("bounds") or [[0.5 * v, 1.5 * v] for v in nominal(cfg)]
    else:
        names = ("L", "W")
        bounds = cfg.get("bounds") or resonator_bounds(cfg.get("model", {}))
    if len(bounds) != len(names):
        raise ParameterError(f"{len(bounds)} bounds given for parameters {names}")
    return ParameterSpace(bounds, names)


# rank scan ------------------------------------------------------------------

def run_rank_scan(cfg, out: Path, threads: int = 1):
    """Rank of ``R(q)^T Phi_perm(q)`` for q = 1..q_max over seeded mode swaps."""
    if cfg["preset"] != "lattice":
        raise ParameterError("rank-scan requires the lattice preset")
    rs = cfg["rank_scan"]
    lo, hi = rs["swap"]
    S = make_generator(cfg)(nominal(cfg))
    n_modes = max(rs["q_max"], hi)
    rows = []
    for p in range(rs["n_permutations"]):
        rng = np.random.default_rng([cfg["seed"], p])
        order = swap_permutation(n_modes, lo, hi, rng, rs["permutation"])
        for q, rank in rank_scan(S, range(1, rs["q_max"] + 1), order, cfg["thresholds"]["rank_tau"]):
            rows.append((p, q, rank, int(rank == q)))
    _write_csv(out / "rank_scan.csv", ["permutation", "q", "rank", "full_rank"], rows)
    log.info("rank-scan done", extra={"rows": len(rows)})
    return rows


# perturbation scan ----------------------------------------------------------

def _fixed_modes(generator, theta, n):
    P = partition(generator(theta))
    return P, linalg.sym_generalized_eig(P.K_jj, P.M_jj, n)


def locate_crossing(generator, grid, q: int):
    """Parameter value where branches ``q`` and ``q + 1`` come closest."""
    def gap(x):
        f = _fixed_modes(generator, [x], q + 1)[1].frequencies_hz
        return f[q] - f[q - 1]
    gaps = np.array([gap(x) for x in grid])
    k = int(np.argmin(gaps))
    a, b = grid[max(k - 1, 0)], grid[min(k + 1, len(grid) - 1)]
    res = minimize_scalar(gap, bounds=(a, b), method="bounded", options={"xatol": 1e-9 * (b - a)})
    return float(res.x), float(res.fun), gaps


def _deficient_side(grid, ok, c):
    bad = np.asarray(grid)[~np.asarray(ok)]
    if bad.size == 0:
        return "none"
    if np.all(bad > c):
        return "above"
    if np.all(bad < c):
        return "below"
    return "mixed"


def run_perturbation_scan(cfg, out: Path, threads: int = 1):
    """Sweep k2 at fixed q, recording rank/rcond against each reference and branches q, q+1."""
    if cfg["preset"] != "lattice" or _lattice_fixed(cfg)["vary"] != ["k2"]:
        raise ParameterError("perturbation-scan requires the lattice preset varying k2 only")
    ps = cfg["perturbation_scan"]
    q = cfg["q"]
    k2 = nominal(cfg)[0]
    grid = np.linspace(ps["range"][0] * k2, ps["range"][1] * k2, ps["n_points"])
    gen = make_generator(cfg)
    with ThreadPoolExecutor(max_workers=max(1, threads)) as ex:
        modes = list(ex.map(lambda x: _fixed_modes(gen, [x], q + 1), grid))
    c, cgap, _ = locate_crossing(gen, grid, q)
    summary = {"q": q, "crossing": c, "crossing_gap_hz": cgap, "step": float(grid[1] - grid[0]),
               "references": []}
    results = {}
    for i, ref in enumerate(ps["references"]):
        P0, m0 = _fixed_modes(gen, [ref], q)
        basis = basis_from_modes(gen([ref]).params, P0.M_jj, m0, q)
        rows, ok = [], []
        for x, (_, m) in zip(grid, modes):
            d = diagnostics(basis, m.vectors[:, :q], cfg["thresholds"]["rcond"], cfg["thresholds"]["rank_tau"])
            f = m.frequencies_hz
            rows.append((float(x), d.rank, float(d.rcond), float(f[q - 1]), float(f[q]), int(d.well_conditioned)))
            ok.append(d.well_conditioned)
        _write_csv(out / f"perturbation_scan_ref{i + 1}.csv",
                   ["k2", "rank", "rcond", f"f{q}", f"f{q + 1}", "well_conditioned"], rows)
        ok = np.array(ok)
        flips = np.flatnonzero(ok[1:] != ok[:-1])
        boundary = [float(0.5 * (grid[j] + grid[j + 1])) for j in flips]
        summary["references"].append({"reference": float(ref), "deficient_side": _deficient_side(grid, ok, c),
                                      "boundaries": boundary, "n_deficient": int((~ok).sum())})
        results[float(ref)] = (grid, ok, rows)
    _write_json(out / "perturbation_scan_summary.json", summary)
    return summary, results


# region detection -----------------------------------------------------------

def _safe_modes(samples, generator, q, threads):
    def one(theta):
        try:
            S = generator(theta)
            P = partition(S)
            return SampleModes(np.asarray(theta, float), S, linalg.sym_generalized_eig(P.K_jj, P.M_jj, q), P.M_jj)
        except CbmorphError as exc:
            log.error("sample failed", extra={"theta": list(map(float, theta)), "error": str(exc)})
            return None
    if threads > 1:
        with ThreadPoolExecutor(max_workers=threads) as ex:
            res = list(ex.map(one, samples))
    else:
        res = [one(t) for t in samples]
    keep = [i for i, r in enumerate(res) if r is not None]
    if not keep:
        raise InsufficientDataError("no sample could be reduced")
    return np.asarray(samples)[keep], [res[i] for i in keep]


def draw_samples(cfg, space):
    s = cfg["sampling"]
    X = latin_hypercube(s["n_samples"], space, cfg["seed"])
    if s["ordered"]:
        X = X[np.lexsort(X.T[::-1])]
    return X


def run_detect_regions(cfg, out: Path, threads: int = 1):
    s = cfg["sampling"]
    th = cfg["thresholds"]
    space = make_space(cfg)
    gen = make_generator(cfg)
    q = cfg["q"]
    if s["mode"] == "single":
        ref = np.asarray(s.get("reference", nominal(cfg)), dtype=float)
        res = label_samples(space, ref, q, s["n_sub"], s["n_samples"], cfg["seed"], gen, th["rcond"],
                            skip=s["skip"], samples=draw_samples(cfg, space) if s["ordered"] else None)
        rows = [{"theta": x.theta, "shell": x.subspace_index, "label": x.label.value,
                 "rank": None if x.diagnostics is None else x.diagnostics.rank,
                 "rcond": None if x.diagnostics is None else x.diagnostics.rcond} for x in res.samples]
        write_samples_csv(out / "samples.csv", space, rows)
        X, y = res.training_set(space)
        svm = None
        if len(set(y.tolist())) == 2:
            svm = train_binary(X, y, th["svm_C"], th.get("svm_gamma"), space=space)
            _write_json(out / "svm.json", svm.to_dict())
        else:
            log.warning("single class in labels; no boundary model trained", extra={"n": len(y)})
        _write_json(out / "labels_summary.json", {
            "accepted": res.count(Label.ACCEPTED), "rejected": res.count(Label.REJECTED),
            "skipped": res.count(Label.SKIPPED), "terminated_early": res.terminated_early,
            "terminated_at": res.terminated_at, "unvisited": len(res.unvisited)})
        return res, svm
    X, data = _safe_modes(draw_samples(cfg, space), gen, q, threads)
    tagging = tag_regions(X, gen, q, th["rcond"], precomputed=data)
    router = train_multiclass(space.normalize(tagging.samples), tagging.tags, th["svm_C"], th.get("svm_gamma"),
                              space=space)
    rows = [{"theta": x, "region_id": int(t), "rcond": float(r)}
            for x, t, r in zip(tagging.samples, tagging.tags, tagging.rconds)]
    write_samples_csv(out / "samples.csv", space, rows)
    _write_json(out / cfg["regions_file"], {
        "preset": cfg["preset"], "model": cfg.get("model", {}), "q": q, "space": space.to_dict(),
        "samples": tagging.samples.tolist(), "tags": tagging.tags.tolist(),
        "reference_indices": [r.sample_index for r in tagging.references], "router": router.to_dict()})
    log.info("regions detected", extra={"m": tagging.m,
                                        "sizes": [int(len(tagging.members(r.region_id))) for r in tagging.references]})
    return tagging, router


def load_tagging(path, generator, threads: int = 1):
    with open(path) as fh:
        d = json.load(fh)
    samples = np.asarray(d["samples"], dtype=float)
    q = int(d["q"])
    data = compute_modes(samples, generator, q, threads)
    refs = []
    for k, idx in enumerate(d["reference_indices"]):
        sm = data[idx]
        refs.append(RegionReference(k + 1, samples[idx].copy(), idx,
                                    basis_from_modes(sm.substructure.params, sm.M_jj, sm.modes, q)))
    return RegionTagging(samples, np.asarray(d["tags"], dtype=int), refs, data), ParameterSpace.from_dict(d["space"]), q


def _in_out(out: Path, name: str) -> Path:
    p = Path(name)
    return p if p.is_absolute() else out / p


def run_train(cfg, out: Path, threads: int = 1):
    th = cfg["thresholds"]
    gen = make_generator(cfg)
    tagging, space, q = load_tagging(_in_out(out, cfg["regions_file"]), gen, threads)
    model = train_multiregion(tagging, space, q, u=th.get("pca_u"),
                              pca_threshold=None if "pca_u" in th else th["pca_threshold"],
                              svm_C=th["svm_C"], svm_gamma=th.get("svm_gamma"), rcond_threshold=th["rcond"])
    with open(_in_out(out, cfg["bundle_file"]), "w") as fh:
        fh.write(model.dumps())
        fh.write("\n")
    rows = [(k, rm.n_train, rm.pca.u, rm.pca_error, rm.loo_median, rm.loo_latent_median)
            for k, rm in sorted(model.regions.items())]
    rows += [(k, len(tagging.members(k)), "", "", "", "") for k in model.excluded]
    _write_csv(out / "train_summary.csv",
               ["region_id", "n_train", "u", "pca_error_pct", "loo_median_pct", "loo_latent_median_pct"], rows)
    log.info("trained", extra={"regions": model.m, "excluded": model.excluded,
                               "loo_median_pct": pooled_loo_median(model)})
    return model


# FRF prediction -------------------------------------------------------------

def load_bundle(path) -> MultiRegionSurrogate:
    with open(path) as fh:
        return MultiRegionSurrogate.loads(fh.read())


def cell_thetas(cfg, space, level: float | None = None, rng=None):
    f = cfg["frf"]
    if level is None and f.get("thetas"):
        th = np.asarray(f["thetas"], dtype=float)
    else:
        level = f["perturbation"] if level is None else level
        rng = rng if rng is not None else np.random.default_rng(cfg["seed"])
        nom = nominal(cfg)
        th = nom * (1 + level * rng.uniform(-1, 1, (f["n_cells"], len(nom))))
        th = np.clip(th, space.lo, space.hi)
    if th.ndim != 2 or th.shape[1] != space.d:
        raise ParameterError(f"cell parameters must have shape (n_cells, {space.d})")
    for t in th:
        if not space.contains(t):
            raise ParameterError(f"cell parameters {t.tolist()} lie outside the parameter space")
    return th


def chain_frf(cells, fcfg, coeffs=None):
    """FRF of a chain of reduced cells for the configured metric.

    ``coeffs`` fixes the Rayleigh ``(alpha, beta)``; otherwise they come from
    the configured damping applied to this chain.  Returns ``(FrfResult, (alpha, beta))``.
    """
    grid = np.linspace(fcfg["grid"]["start"], fcfg["grid"]["stop"], fcfg["grid"]["n"])
    metric = fcfg["metric"]
    damping = fcfg.get("damping", {"alpha": 0.0, "beta": 0.0})
    if metric == "tip-transmissibility":
        plan = chain_plan(cells)
        Mg, Kg, _, _ = assemble(plan)
        base = end_dofs(plan, "left")
        free = np.setdiff1d(np.arange(Mg.shape[0]), base)
        if coeffs is None:
            _, a, b = proportional_damping(Mg[np.ix_(free, free)], Kg[np.ix_(free, free)], damping)
            coeffs = (a, b)
        C = coeffs[0] * Mg + coeffs[1] * Kg
        return transmissibility_sweep(Mg, Kg, C, base, end_dofs(plan, "right")[0], grid), coeffs
    right = cells[-1].sides["right"]
    plan0 = chain_plan(cells, fix_left=True)
    rdofs = end_dofs(plan0, "right")
    load = {rdofs[k]: 1.0 for k in fcfg.get("load_positions", [0]) if k < len(right)}
    plan = chain_plan(cells, fix_left=True, load=load)
    Mg, Kg, Fg, maps = assemble(plan)
    if coeffs is None:
        _, a, b = proportional_damping(Mg, Kg, damping)
        coeffs = (a, b)
    outs = []
    for c, cell in enumerate(plan.cells):
        for k in range(cell.n_interface):
            g = plan.connectivity[c][k]
            if g not in maps.fixed and g not in outs:
                outs.append(g)
    idx = [maps.reduced_index(g) for g in outs]
    C = coeffs[0] * Mg + coeffs[1] * Kg
    return frf_sweep(Mg, Kg, C, Fg, grid, {"metric": "average-quadratic-velocity", "dofs": idx}), coeffs


def _region_basis(model: MultiRegionSurrogate, region: int, generator) -> CommonBasis:
    rm = model.regions[region]
    return CommonBasis(generator(rm.theta_o).params, rm.R, model.q, None)


def method_cells(model, support, generator, thetas, rcond_threshold=1e-10):
    """Cells for the four methods plus per-cell routing information."""
    cells = {"surrogate": [], "direct": [], "full": [], "lagrange": []}
    info = []
    for t in thetas:
        S = generator(t)
        cb, region = predict_cb(model, t)
        cells["surrogate"].append(cb)
        try:
            direct = cb_reduce_common(S, _region_basis(model, region, generator), rcond_threshold=rcond_threshold)
            fallback = False
        except IllConditionedProjectionError:
            # the reduced model is basis-independent; standard CB has the same FRF
            direct = cb_reduce(S, q=model.q)
            fallback = True
        cells["direct"].append(direct)
        cells["full"].append(full_order_cell(S))
        lag, extrap = lagrange_interpolate(support, t)
        cells["lagrange"].append(lag)
        info.append({"theta": t, "region": region, "low_confidence": cb.provenance["low_confidence"],
                     "direct_fallback": fallback, "lagrange_extrapolated": extrap})
    return cells, info


def run_predict_frf(cfg, out: Path, threads: int = 1, model=None, support=None):
    gen = make_generator(cfg)
    model = model or load_bundle(_in_out(out, cfg["bundle_file"]))
    space = model.space
    thetas = cell_thetas(cfg, space)
    support = support or build_support(gen, nominal(cfg), cfg["frf"]["lagrange_P"], model.q, cfg["thresholds"]["rcond"])
    cells, info = method_cells(model, support, gen, thetas, cfg["thresholds"]["rcond"])
    full, coeffs = chain_frf(cells["full"], cfg["frf"])
    results = {"full": full}
    for name in ("surrogate", "direct", "lagrange"):
        results[name] = chain_frf(cells[name], cfg["frf"], coeffs)[0]
    for name, r in results.items():
        write_frf_csv(out / f"frf_{name}.csv", r)
    summary = []
    for name in ("surrogate", "direct", "lagrange"):
        e = log_magnitude_error(results[name], full)
        summary.append((name, float(np.median(e)), float(np.max(e))))
    low = sum(i["low_confidence"] for i in info)
    _write_csv(out / "frf_summary.csv", ["method", "median_log10_error_vs_full", "max_log10_error_vs_full",
                                         "low_confidence_cells"], [(*s, low) for s in summary])
    _write_csv(out / "cells.csv", [*space.names, "region_id", "low_confidence", "direct_fallback",
                                   "lagrange_extrapolated"],
               [(*map(float, i["theta"]), i["region"], int(i["low_confidence"]), int(i["direct_fallback"]),
                 int(i["lagrange_extrapolated"])) for i in info])
    if low:
        log.warning("low-confidence routing", extra={"cells": low})
    return results, summary, info


def compare_once(model, support, generator, thetas, fcfg, rcond_threshold=1e-10):
    """Median log10-magnitude FRF errors of surrogate and Lagrange against direct common-basis CB."""
    cells, info = method_cells(model, support, generator, thetas, rcond_threshold)
    direct, coeffs = chain_frf(cells["direct"], fcfg)
    sur = chain_frf(cells["surrogate"], fcfg, coeffs)[0]
    lag = chain_frf(cells["lagrange"], fcfg, coeffs)[0]
    return (float(np.median(log_magnitude_error(sur, direct))),
            float(np.median(log_magnitude_error(lag, direct))), info)


def run_compare(cfg, out: Path, threads: int = 1, model=None, support=None):
    gen = make_generator(cfg)
    model = model or load_bundle(_in_out(out, cfg["bundle_file"]))
    support = support or build_support(gen, nominal(cfg), cfg["frf"]["lagrange_P"], model.q, cfg["thresholds"]["rcond"])
    rows, summary = [], []
    for li, level in enumerate(cfg["compare"]["levels"]):
        es, el = [], []
        for r in range(cfg["compare"]["repeats"]):
            rng = np.random.default_rng([cfg["seed"], li, r])
            th = cell_thetas(cfg, model.space, level, rng)
            s, l_, _ = compare_once(model, support, gen, th, cfg["frf"], cfg["thresholds"]["rcond"])
            rows.append((float(level), r, s, l_))
            es.append(s)
            el.append(l_)
        summary.append((float(level), float(np.median(es)), float(np.median(el))))
    _write_csv(out / "compare.csv", ["level", "repeat", "surrogate_log10_error", "lagrange_log10_error"], rows)
    _write_csv(out / "compare_summary.csv", ["level", "surrogate_median", "lagrange_median"], summary)
    return rows, summary
