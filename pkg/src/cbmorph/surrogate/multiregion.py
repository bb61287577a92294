"""Region-based PCA/Kriging surrogate of common-basis reduced matrices."""
from __future__ import annotations

import hashlib
import json
import logging
from dataclasses import dataclass, field
from typing import Callable, Optional, Sequence

import numpy as np

from ..craig_bampton import CBReduced
from ..errors import InsufficientDataError, ReconstructionDefectError
from ..projection import DEFAULT_RCOND_THRESHOLD, cb_reduce_common
from ..regions import ParameterSpace, RegionTagging
from ..svm import DEFAULT_C, MulticlassSvm, train_multiclass
from .features import cb_from_features, features_from_cb
from .kriging import KrigingModel, kriging_fit, loo_predictions
from .metrics import reconstruction_error
from .pca import PcaModel, pca_fit, pca_project, pca_reconstruct

log = logging.getLogger(__name__)


def latent_relative_error(y_true, y_pred) -> float:
    y_true = np.asarray(y_true)
    nrm = np.linalg.norm(y_true)
    return float(np.linalg.norm(np.asarray(y_pred) - y_true) / (nrm if nrm > 0 else 1.0) * 100.0)


def loo_validate(inputs, outputs, metric: str | Callable = "latent", refit: bool = False,
                 model: KrigingModel | None = None, **fit_kw) -> float:
    """Median leave-one-out error (percent) of a Kriging fit.

    ``metric`` is ``"latent"`` (norm-relative error of the output vector) or
    a callable ``metric(i, y_pred) -> percent``.  By default the correlation
    parameters of the full fit are kept and each fold's trend and weights
    are recomputed in closed form; ``refit=True`` re-runs the likelihood
    search on every fold.
    """
    X = np.atleast_2d(np.asarray(inputs, dtype=float))
    Y = np.asarray(outputs, dtype=float).reshape(len(X), -1)
    if len(X) < 3:
        raise InsufficientDataError("leave-one-out needs at least 3 samples")
    if refit:
        preds = np.empty_like(Y)
        for i in range(len(X)):
            keep = np.arange(len(X)) != i
            preds[i] = kriging_fit(X[keep], Y[keep], **fit_kw).predict(X[i])[0]
    else:
        model = model if model is not None else kriging_fit(X, Y, **fit_kw)
        preds = loo_predictions(model)
    if metric == "latent":
        errs = [latent_relative_error(Y[i], preds[i]) for i in range(len(X))]
    else:
        errs = [metric(i, preds[i]) for i in range(len(X))]
    return float(np.median(errs))


def safe_reconstruction_error(original: CBReduced, reconstructed: CBReduced) -> float:
    """Reconstruction error with an indefinite reconstructed mass counted as infinite."""
    try:
        return reconstruction_error(original, reconstructed)
    except ReconstructionDefectError:
        return float("inf")


def pca_error_fn(r: int, n_interface: int):
    """Feature-row error in percent, measured on the highest free-free frequencies."""
    def err(a, b):
        return safe_reconstruction_error(cb_from_features(a, r, n_interface),
                                         cb_from_features(b, r, n_interface))
    return err


@dataclass
class RegionModel:
    region_id: int
    theta_o: np.ndarray
    R: np.ndarray
    pca: PcaModel
    kriging: KrigingModel
    r: int
    n_interface: int
    sides: dict
    n_train: int
    pca_error: float = float("nan")
    loo_median: float = float("nan")
    loo_latent_median: float = float("nan")
    data_hash: str = ""
    loo_errors: list = field(default_factory=list)

    def predict_features(self, u) -> np.ndarray:
        return pca_reconstruct(self.pca, self.kriging.predict(u))

    def to_dict(self):
        return {"region_id": self.region_id, "theta_o": self.theta_o.tolist(), "R": self.R.tolist(),
                "pca": self.pca.to_dict(), "kriging": self.kriging.to_dict(), "r": self.r,
                "n_interface": self.n_interface, "sides": self.sides, "n_train": self.n_train,
                "pca_error": self.pca_error, "loo_median": self.loo_median,
                "loo_latent_median": self.loo_latent_median, "data_hash": self.data_hash,
                "loo_errors": list(self.loo_errors)}

    @classmethod
    def from_dict(cls, d):
        return cls(int(d["region_id"]), np.asarray(d["theta_o"], dtype=float),
                   np.asarray(d["R"], dtype=float), PcaModel.from_dict(d["pca"]),
                   KrigingModel.from_dict(d["kriging"]), int(d["r"]), int(d["n_interface"]),
                   {k: list(v) for k, v in d["sides"].items()}, int(d["n_train"]),
                   float(d["pca_error"]), float(d["loo_median"]), float(d["loo_latent_median"]),
                   d.get("data_hash", ""), [float(e) for e in d.get("loo_errors", [])])


@dataclass
class MultiRegionSurrogate:
    space: ParameterSpace
    q: int
    regions: dict                 # region_id -> RegionModel
    router: MulticlassSvm
    excluded: list = field(default_factory=list)

    @property
    def m(self) -> int:
        return len(self.regions)

    def to_dict(self):
        return {"format": "cbmorph-surrogate", "version": 1, "space": self.space.to_dict(),
                "q": self.q, "regions": [self.regions[k].to_dict() for k in sorted(self.regions)],
                "router": self.router.to_dict(), "excluded": list(self.excluded)}

    @classmethod
    def from_dict(cls, d):
        regions = {int(e["region_id"]): RegionModel.from_dict(e) for e in d["regions"]}
        return cls(ParameterSpace.from_dict(d["space"]), int(d["q"]), regions,
                   MulticlassSvm.from_dict(d["router"]), list(d.get("excluded", [])))

    def dumps(self) -> str:
        return json.dumps(self.to_dict(), sort_keys=True)

    @classmethod
    def loads(cls, s: str) -> "MultiRegionSurrogate":
        return cls.from_dict(json.loads(s))


def data_hash(*arrays) -> str:
    h = hashlib.sha256()
    for a in arrays:
        h.update(np.ascontiguousarray(np.asarray(a, dtype=float)).tobytes())
    return h.hexdigest()


def train_region(region_id: int, U, cbs: Sequence[CBReduced], theta_o, R, u: Optional[int] = None,
                 pca_threshold: Optional[float] = 0.1, shared_lengths: bool = False,
                 loo: bool = True) -> RegionModel:
    """PCA + Kriging for one region from normalized inputs ``U`` and its reductions."""
    U = np.atleast_2d(np.asarray(U, dtype=float))
    cb0 = cbs[0]
    r, n_i = cb0.r, cb0.n_interface
    X = np.array([features_from_cb(cb) for cb in cbs])
    err_fn = pca_error_fn(r, n_i)
    if u is not None:
        pca = pca_fit(X, u=min(u, max(1, min(X.shape) - 1)) if len(X) > 1 else 1)
    else:
        pca = pca_fit(X, threshold=pca_threshold, error_fn=err_fn)
    Y = pca_project(pca, X)
    Xr = pca_reconstruct(pca, Y)
    pca_err = max(err_fn(a, b) for a, b in zip(X, Xr))
    krig = kriging_fit(U, Y, shared_lengths=shared_lengths)
    model = RegionModel(region_id, np.asarray(theta_o, float), np.asarray(R, float), pca, krig, r, n_i,
                        dict(cb0.sides), len(U), float(pca_err), data_hash=data_hash(U, X))
    if loo and len(U) >= 3:
        preds = loo_predictions(krig)

        model.loo_errors = [safe_reconstruction_error(
            cbs[i], cb_from_features(pca_reconstruct(pca, preds[i]), r, n_i)) for i in range(len(U))]
        model.loo_median = float(np.median(model.loo_errors))
        model.loo_latent_median = float(np.median(
            [latent_relative_error(Y[i], preds[i]) for i in range(len(U))]))
    return model


def region_reductions(tagging: RegionTagging, region_id: int,
                      rcond_threshold: float = DEFAULT_RCOND_THRESHOLD):
    ref = tagging.references[region_id - 1]
    idx = tagging.members(region_id)
    cbs = [cb_reduce_common(tagging.sample_modes[p].substructure, ref.basis,
                            tagging.sample_modes[p].modes, rcond_threshold) for p in idx]
    return idx, cbs


def train_multiregion(tagging: RegionTagging, space: ParameterSpace, q: int,
                      u: Optional[int] = None, pca_threshold: Optional[float] = 0.1,
                      svm_C: float = DEFAULT_C, svm_gamma: Optional[float] = None,
                      shared_lengths: bool = False, loo: bool = True,
                      rcond_threshold: float = DEFAULT_RCOND_THRESHOLD) -> MultiRegionSurrogate:
    """Fit one PCA/Kriging model per tagged region and an SVM router over them.

    Regions with fewer than ``d + 2`` samples cannot carry a Kriging model;
    they are excluded (with a warning) from both the models and the router.
    """
    regions = {}
    excluded = []
    for ref in tagging.references:
        idx, cbs = region_reductions(tagging, ref.region_id, rcond_threshold)
        if len(idx) < space.d + 2:
            log.warning("region %d has %d samples; excluded", ref.region_id, len(idx))
            excluded.append(ref.region_id)
            continue
        U = space.normalize(tagging.samples[idx])
        regions[ref.region_id] = train_region(ref.region_id, U, cbs, ref.theta, ref.basis.R,
                                              u, pca_threshold, shared_lengths, loo)
    if not regions:
        raise InsufficientDataError("no region has enough samples to train a surrogate")
    keep = np.isin(tagging.tags, list(regions))
    router = train_multiclass(space.normalize(tagging.samples[keep]), tagging.tags[keep],
                              svm_C, svm_gamma, space=space)
    return MultiRegionSurrogate(space, q, regions, router, excluded)


def predict_cb(model: MultiRegionSurrogate, theta, region: int | None = None):
    """Route ``theta`` to a region and predict its reduced matrices.

    Returns ``(CBReduced, region_id)``; the provenance records the region
    and whether the router vote was low-confidence.
    """
    theta = np.asarray(theta, dtype=float).reshape(-1)
    low = False
    if region is None:
        ids, flags = model.router.route(theta)
        region, low = int(ids[0]), bool(flags[0])
        if low:
            log.warning("low-confidence region routing at theta=%s", theta.tolist())
    rm = model.regions[region]
    u = model.space.normalize(theta)
    X = rm.predict_features(u)[0]
    raw = cb_from_features(X, rm.r, rm.n_interface, symmetrize=False)
    cb = cb_from_features(X, rm.r, rm.n_interface, symmetrize=True, sides=rm.sides,
                          provenance={"kind": "surrogate", "region": region, "theta": theta.tolist(),
                                      "theta_o": rm.theta_o.tolist(), "low_confidence": low})
    scale = max(np.max(np.abs(cb.Mhat)), 1e-300), max(np.max(np.abs(cb.Khat)), 1e-300)
    asym = max(np.max(np.abs(raw.Mhat - cb.Mhat)) / scale[0], np.max(np.abs(raw.Khat - cb.Khat)) / scale[1])
    cb.provenance["symmetrization"] = float(asym)
    if np.isfinite(rm.loo_median) and asym * 100.0 > max(rm.loo_median, 1e-12):
        log.warning("symmetrization change %.3e exceeds LOO error %.3e%%", asym, rm.loo_median)
    return cb, region


def pooled_loo_median(model: MultiRegionSurrogate) -> float:
    """Median leave-one-out reconstruction error (percent) over all training samples."""
    errs = [e for rm in model.regions.values() for e in rm.loo_errors]
    return float(np.median(errs)) if errs else float("nan")
