"""Sampling-based detection of well-conditioned parameter regions.

``label_samples`` runs the shell-by-shell accept/reject exploration around a
single reference (with nearest-neighbour skipping once a rejection has been
seen); ``tag_regions`` splits a sample set into regions, each with its own
reference, so that every sample projects well onto its region's basis.
"""
from __future__ import annotations

import csv
import enum
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import Callable, Optional, Sequence

import numpy as np
from scipy.stats import qmc

from . import linalg
from .errors import CbmorphError, GeometryError, ParameterError
from .models import Substructure, partition
from .projection import (DEFAULT_RCOND_THRESHOLD, CommonBasis, ProjectionDiagnostics,
                         basis_from_modes, diagnostics)

Generator = Callable[[np.ndarray], Substructure]


@dataclass(frozen=True, eq=False)
class ParameterSpace:
    lo: np.ndarray
    hi: np.ndarray
    names: tuple = ()

    def __init__(self, bounds, names=()):
        b = np.asarray(bounds, dtype=float).reshape(-1, 2)
        if np.any(~np.isfinite(b)) or np.any(b[:, 0] >= b[:, 1]):
            raise ParameterError(f"invalid bounds {b.tolist()}")
        object.__setattr__(self, "lo", b[:, 0].copy())
        object.__setattr__(self, "hi", b[:, 1].copy())
        object.__setattr__(self, "names", tuple(names) or tuple(f"theta{i + 1}" for i in range(len(b))))

    def __eq__(self, other):
        return (isinstance(other, ParameterSpace) and self.names == other.names
                and np.array_equal(self.lo, other.lo) and np.array_equal(self.hi, other.hi))

    __hash__ = None

    @property
    def d(self) -> int:
        return len(self.lo)

    @property
    def bounds(self):
        return np.column_stack([self.lo, self.hi])

    def normalize(self, x):
        return (np.asarray(x, dtype=float) - self.lo) / (self.hi - self.lo)

    def denormalize(self, u):
        return self.lo + np.asarray(u, dtype=float) * (self.hi - self.lo)

    def contains(self, x, tol=1e-12) -> bool:
        u = self.normalize(x)
        return bool(np.all(u >= -tol) and np.all(u <= 1 + tol))

    def to_dict(self):
        return {"bounds": self.bounds.tolist(), "names": list(self.names)}

    @classmethod
    def from_dict(cls, d):
        return cls(d["bounds"], d.get("names", ()))


class Label(str, enum.Enum):
    ACCEPTED = "Accepted"
    REJECTED = "Rejected"
    SKIPPED = "Skipped"


@dataclass
class LabeledSample:
    theta: np.ndarray
    label: Label
    subspace_index: int
    diagnostics: Optional[ProjectionDiagnostics] = None
    order: int = -1


@dataclass
class LabelingResult:
    samples: list
    terminated_early: bool
    terminated_at: Optional[int]
    unvisited: list = field(default_factory=list)
    all_skipped_shell: bool = False

    def labels(self):
        return [s.label for s in self.samples]

    def count(self, label: Label) -> int:
        return sum(s.label == label for s in self.samples)

    def training_set(self, space: ParameterSpace):
        """Normalized inputs and +1/-1 labels of evaluated samples (Skipped excluded)."""
        used = [s for s in self.samples if s.label != Label.SKIPPED]
        X = np.array([space.normalize(s.theta) for s in used]).reshape(len(used), space.d)
        y = np.array([1 if s.label == Label.ACCEPTED else -1 for s in used])
        return X, y


def latin_hypercube(n: int, space: ParameterSpace, seed) -> np.ndarray:
    """``n`` stratified samples (one per stratum on every axis), shape ``(n, d)``."""
    if n < 1:
        raise ValueError("n must be >= 1")
    u = qmc.LatinHypercube(d=space.d, seed=np.random.default_rng(seed)).random(n)
    return space.denormalize(u)


def normalized_distance(a, b, space: ParameterSpace) -> float:
    return float(np.linalg.norm(space.normalize(a) - space.normalize(b)))


def shell_radius(x, space: ParameterSpace, theta_o) -> float:
    """Chebyshev distance from ``theta_o`` scaled so the boundary sits at 1.

    Along each axis the offset is divided by the distance from ``theta_o``
    to the bound on the same side, so shells are concentric boxes that
    reach every face of the space at radius 1.
    """
    x = np.asarray(x, dtype=float)
    to = np.asarray(theta_o, dtype=float)
    up = np.where(x >= to, (x - to) / (space.hi - to), (to - x) / (to - space.lo))
    return float(np.max(up))


def divide_space(space: ParameterSpace, theta_o, n_sub: int):
    """Membership predicates of ``n_sub`` concentric shells around ``theta_o``.

    Shell ``i`` (0-based) holds points whose scaled radius lies in
    ``[i/n_sub, (i+1)/n_sub)``; the outermost shell also holds radius 1.
    """
    to = np.asarray(theta_o, dtype=float)
    if n_sub < 1:
        raise ValueError("n_sub must be >= 1")
    if to.shape != (space.d,) or np.any(to <= space.lo) or np.any(to >= space.hi):
        raise GeometryError(f"theta_o={to.tolist()} must lie strictly inside the space")

    def make(i):
        def member(x):
            return shell_index(x, space, to, n_sub) == i
        return member
    return [make(i) for i in range(n_sub)]


def shell_index(x, space: ParameterSpace, theta_o, n_sub: int) -> int:
    rho = shell_radius(x, space, theta_o)
    return int(min(np.floor(rho * n_sub), n_sub - 1))


def shell_volume_fraction(i: int, n_sub: int, d: int) -> float:
    """Fraction of the space occupied by shell ``i`` (any interior ``theta_o``)."""
    return ((i + 1) / n_sub) ** d - (i / n_sub) ** d


def _evaluate(theta, generator: Generator, basis: CommonBasis, rcond_threshold):
    try:
        S = generator(theta)
        P = partition(S)
        modes = linalg.sym_generalized_eig(P.K_jj, P.M_jj, basis.q)
    except CbmorphError as exc:
        raise type(exc)(f"generator/eigensolve failed at theta={np.asarray(theta).tolist()}: {exc}") from exc
    return diagnostics(basis, modes.vectors, rcond_threshold)


def label_samples(space: ParameterSpace, theta_o, q: int, n_sub: int, n_samples: int, seed,
                  generator: Generator, rcond_threshold: float = DEFAULT_RCOND_THRESHOLD,
                  skip: bool = True, samples: np.ndarray | None = None) -> LabelingResult:
    """Accept/reject exploration of ``space`` around ``theta_o``.

    One Latin hypercube of ``n_samples`` points (or the given ``samples``) is
    binned into concentric shells and processed shell by shell, innermost
    first.  Until the first rejection every sample is evaluated.  Afterwards
    a sample whose nearest labeled sample (L2 in normalized coordinates) is
    Rejected is marked Skipped without an eigen-evaluation; ties between an
    Accepted and a Rejected neighbour are evaluated.  Exploration stops after
    a non-empty shell that yields no Accepted sample.
    """
    theta_o = np.asarray(theta_o, dtype=float)
    divide_space(space, theta_o, n_sub)  # validates geometry
    ref = generator(theta_o)
    P = partition(ref)
    basis = basis_from_modes(ref.params, P.M_jj, linalg.sym_generalized_eig(P.K_jj, P.M_jj, q), q)
    pts = latin_hypercube(n_samples, space, seed) if samples is None else np.asarray(samples, float)
    pts = pts.reshape(len(pts), space.d)
    shells = [shell_index(x, space, theta_o, n_sub) for x in pts]

    out: list[LabeledSample] = []
    labeled_u: list[np.ndarray] = []
    labeled_ok: list[bool] = []
    rejected_seen = False
    terminated_at = None
    all_skipped = False
    unvisited = []
    order = 0
    for i in range(n_sub):
        members = [k for k, s in enumerate(shells) if s == i]
        if terminated_at is not None:
            unvisited.extend(members)
            continue
        if not members:
            continue
        accepted_here = 0
        evaluated_here = 0
        for k in members:
            theta = pts[k]
            evaluate = True
            if skip and rejected_seen:
                u = space.normalize(theta)
                dist = np.linalg.norm(np.asarray(labeled_u) - u, axis=1)
                dmin = dist.min()
                nearest = np.flatnonzero(dist <= dmin * (1 + 1e-12) + 1e-15)
                evaluate = any(labeled_ok[t] for t in nearest)
            if evaluate:
                d = _evaluate(theta, generator, basis, rcond_threshold)
                lab = Label.ACCEPTED if d.well_conditioned else Label.REJECTED
                rejected_seen |= not d.well_conditioned
                accepted_here += d.well_conditioned
                evaluated_here += 1
                labeled_u.append(space.normalize(theta))
                labeled_ok.append(d.well_conditioned)
                out.append(LabeledSample(theta.copy(), lab, i, d, order))
            else:
                out.append(LabeledSample(theta.copy(), Label.SKIPPED, i, None, order))
            order += 1
        if accepted_here == 0:
            terminated_at = i
            all_skipped = evaluated_here == 0
    early = terminated_at is not None and terminated_at < n_sub - 1 and bool(unvisited)
    return LabelingResult(out, early, terminated_at, unvisited, all_skipped)


@dataclass
class RegionReference:
    region_id: int
    theta: np.ndarray
    sample_index: int
    basis: CommonBasis


@dataclass
class SampleModes:
    theta: np.ndarray
    substructure: Substructure
    modes: linalg.EigenPairs
    M_jj: np.ndarray


@dataclass
class RegionTagging:
    samples: np.ndarray            # (N, d) physical parameters
    tags: np.ndarray               # 1-based region ids
    references: list               # RegionReference per region, in creation order
    sample_modes: list = field(default_factory=list, repr=False)
    rconds: np.ndarray | None = None

    @property
    def m(self) -> int:
        return len(self.references)

    def members(self, region_id: int) -> np.ndarray:
        return np.flatnonzero(self.tags == region_id)


def compute_modes(samples, generator: Generator, q: int, threads: int = 1) -> list:
    """Full-order model and first ``q`` fixed-interface modes per sample."""
    def one(theta):
        S = generator(theta)
        P = partition(S)
        return SampleModes(np.asarray(theta, float), S,
                           linalg.sym_generalized_eig(P.K_jj, P.M_jj, q), P.M_jj)
    samples = np.asarray(samples, dtype=float)
    if threads > 1:
        with ThreadPoolExecutor(max_workers=threads) as ex:
            return list(ex.map(one, samples))
    return [one(t) for t in samples]


def tag_regions(samples, generator: Generator, q: int,
                rcond_threshold: float = DEFAULT_RCOND_THRESHOLD, threads: int = 1,
                precomputed: Sequence[SampleModes] | None = None) -> RegionTagging:
    """Tag samples into regions sharing a well-conditioned reference.

    The first sample is the reference of region 1.  Each later sample is
    checked against the existing references in creation order and joins the
    first region whose projection is well-conditioned; if none is, it
    becomes the reference of a new region.
    """
    samples = np.asarray(samples, dtype=float)
    if len(samples) < 1:
        raise ValueError("at least one sample is required")
    samples = samples.reshape(len(samples), -1)
    data = list(precomputed) if precomputed is not None else compute_modes(samples, generator, q, threads)
    refs: list[RegionReference] = []
    tags = np.zeros(len(samples), dtype=int)
    rconds = np.zeros(len(samples))
    for p, sm in enumerate(data):
        for ref in refs:
            d = diagnostics(ref.basis, sm.modes.vectors[:, :q], rcond_threshold)
            if d.well_conditioned:
                tags[p] = ref.region_id
                rconds[p] = d.rcond
                break
        else:
            basis = basis_from_modes(sm.substructure.params, sm.M_jj, sm.modes, q)
            refs.append(RegionReference(len(refs) + 1, samples[p].copy(), p, basis))
            tags[p] = len(refs)
            rconds[p] = 1.0
    return RegionTagging(samples, tags, refs, data, rconds)


def write_samples_csv(path, space: ParameterSpace, rows):
    """Rows: dicts with keys theta, shell, label, rank, rcond, region_id."""
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow([*space.names, "shell", "label", "rank", "rcond", "region_id"])
        for r in rows:
            rc = r.get("rcond")
            w.writerow([*(f"{float(t):.17g}" for t in r["theta"]), r.get("shell", ""),
                        r.get("label", ""), "" if r.get("rank") is None else r["rank"],
                        "" if rc is None else f"{float(rc):.17g}", r.get("region_id", "")])
