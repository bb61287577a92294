"""Common modal basis and the conditioning of projections onto it.

A reference substructure fixes ``R = M_jj^o Phi^o``.  Fixed-interface modes
``Phi^p`` of any other parameter point are re-expressed as
``Phi_hat = Phi^p (R^T Phi^p)^-1`` so that reduced matrices from different
points share coordinates and can be interpolated.  The projection exists
only while ``G = R^T Phi^p`` stays invertible; crossings between retained
and truncated modes destroy that.
"""
from __future__ import annotations

import csv
from dataclasses import dataclass
from typing import Iterable, Sequence

import numpy as np

from . import linalg
from .craig_bampton import CBReduced, cb_transform, project, static_modes
from .errors import DimensionError, IllConditionedProjectionError
from .models import ModelParams, Substructure, partition

DEFAULT_RCOND_THRESHOLD = 1e-10


@dataclass(frozen=True)
class CommonBasis:
    theta_o: ModelParams
    R: np.ndarray
    q: int
    source_modes: linalg.EigenPairs


@dataclass(frozen=True)
class ProjectionDiagnostics:
    rank: int
    rcond: float
    sign: float
    logdet: float
    q: int
    well_conditioned: bool

    @property
    def det_sign_logdet(self):
        return self.sign, self.logdet


def interface_modes(S: Substructure, q: int) -> linalg.EigenPairs:
    P = partition(S)
    return linalg.sym_generalized_eig(P.K_jj, P.M_jj, q)


def basis_from_modes(theta_o: ModelParams, M_jj, modes: linalg.EigenPairs, q: int | None = None) -> CommonBasis:
    q = modes.vectors.shape[1] if q is None else q
    Phi = modes.vectors[:, :q]
    return CommonBasis(theta_o, np.asarray(M_jj) @ Phi, q,
                       linalg.EigenPairs(modes.values[:q], Phi))


def common_basis(ref: Substructure, q: int) -> CommonBasis:
    """Reference basis ``R = M_jj^o Phi^o`` with mass-normalized ``Phi^o``."""
    if q > ref.n_internal:
        raise DimensionError(f"q={q} exceeds the {ref.n_internal} internal DoF")
    modes = interface_modes(ref, q)
    return basis_from_modes(ref.params, partition(ref).M_jj, modes, q)


def diagnostics(basis: CommonBasis, Phi_p, rcond_threshold: float = DEFAULT_RCOND_THRESHOLD,
                tau: float = linalg.DEFAULT_RANK_TOL) -> ProjectionDiagnostics:
    """Rank, rcond and log-determinant of ``G = R^T Phi_p``."""
    Phi_p = np.asarray(Phi_p)
    if Phi_p.ndim != 2 or Phi_p.shape[1] != basis.q or Phi_p.shape[0] != basis.R.shape[0]:
        raise DimensionError(f"Phi_p shape {Phi_p.shape} incompatible with basis "
                             f"{basis.R.shape}")
    return diagnose_matrix(basis.R.T @ Phi_p, rcond_threshold, tau)


def diagnose_matrix(G, rcond_threshold=DEFAULT_RCOND_THRESHOLD, tau=linalg.DEFAULT_RANK_TOL):
    q = G.shape[0]
    s = np.linalg.svd(G, compute_uv=False)
    if s[0] == 0.0:
        rank, rc = 0, 0.0
    else:
        rank = int(np.count_nonzero(s > tau * s[0]))
        rc = float(s[-1] / s[0])
    sign, logdet = linalg.slogdet(G)
    return ProjectionDiagnostics(rank, rc, sign, logdet, q,
                                 bool(rank == q and rc > rcond_threshold))


def project_modes(basis: CommonBasis, Phi_p, rcond_threshold: float = DEFAULT_RCOND_THRESHOLD):
    """``Phi_hat = Phi_p G^-1`` computed as a solve against ``G^T``.

    Raises
    ------
    IllConditionedProjectionError
        If ``G`` is rank deficient or its rcond is below the threshold.
    """
    diag = diagnostics(basis, Phi_p, rcond_threshold)
    if not diag.well_conditioned:
        raise IllConditionedProjectionError(
            f"R^T Phi_p is ill-conditioned (rank {diag.rank}/{diag.q}, rcond {diag.rcond:.2e})",
            diag)
    G = basis.R.T @ Phi_p
    return linalg.solve(G.T, np.asarray(Phi_p).T).T


def cb_reduce_common(S_p: Substructure, basis: CommonBasis, modes: linalg.EigenPairs | None = None,
                     rcond_threshold: float = DEFAULT_RCOND_THRESHOLD) -> CBReduced:
    """CB reduction of ``S_p`` with its modes expressed in the common basis.

    ``modes`` may carry precomputed fixed-interface modes of ``S_p`` (at
    least ``basis.q`` of them).
    """
    P = partition(S_p)
    if modes is None:
        modes = linalg.sym_generalized_eig(P.K_jj, P.M_jj, basis.q)
    Phi_p = modes.vectors[:, :basis.q]
    Phi_hat = project_modes(basis, Phi_p, rcond_threshold)
    T = cb_transform(static_modes(P.K_jj, P.K_ji), Phi_hat)
    prov = {"kind": "common-basis", "theta_p": list(S_p.params.values),
            "theta_o": list(basis.theta_o.values)}
    return project(S_p, T, prov)


# mode-swap harness ----------------------------------------------------------

def swap_permutation(n: int, lo: int, hi: int, rng: np.random.Generator,
                     mode: str = "cycle") -> np.ndarray:
    """Column order that shuffles 1-based modes ``lo..hi`` among themselves.

    ``mode="cycle"`` draws a uniformly random single cycle (Sattolo), which
    has no invariant proper subset, so every prefix ``lo..q`` with
    ``lo <= q < hi`` loses at least one mode to the truncated set.
    ``mode="shuffle"`` draws an unrestricted random permutation of the block.
    """
    if not 1 <= lo < hi <= n:
        raise DimensionError(f"invalid swap block {lo}..{hi} for n={n}")
    order = np.arange(n)
    block = order[lo - 1:hi].copy()
    if mode == "cycle":
        for i in range(len(block) - 1, 0, -1):
            j = int(rng.integers(0, i))
            block[i], block[j] = block[j], block[i]
    elif mode == "shuffle":
        rng.shuffle(block)
    else:
        raise ValueError(f"unknown permutation mode {mode!r}")
    order[lo - 1:hi] = block
    return order


def rank_law(order: np.ndarray, q: int) -> int:
    """Exact rank of ``G(q)`` when ``Phi^p`` is ``Phi^o`` with columns reordered."""
    return len(set(order[:q].tolist()) & set(range(q)))


def rank_scan(S: Substructure, q_values: Iterable[int], order: Sequence[int],
              tau: float = linalg.DEFAULT_RANK_TOL):
    """Rank of ``R(q)^T Phi_perm[:, :q]`` for each ``q``, zero perturbation.

    Modes are computed once, permuted by ``order`` before truncation, and
    compared with the unpermuted reference basis of the same size.
    """
    q_values = list(q_values)
    order = np.asarray(order)
    n_modes = max(max(q_values), len(order))
    P = partition(S)
    modes = linalg.sym_generalized_eig(P.K_jj, P.M_jj, n_modes)
    Phi = modes.vectors
    full_order = np.concatenate([order, np.arange(len(order), n_modes)])
    Phi_perm = Phi[:, full_order]
    R_all = P.M_jj @ Phi
    rows = []
    for q in q_values:
        G = R_all[:, :q].T @ Phi_perm[:, :q]
        rows.append((q, linalg.numerical_rank(G, tau)))
    return rows


def write_diagnostics_csv(path, rows, names):
    """Rows are ``(theta, q, diagnostics, label)`` tuples."""
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow([*names, "q", "rank", "rcond", "logdet", "label"])
        for theta, q, d, label in rows:
            w.writerow([*(f"{float(t):.17g}" for t in theta), q, d.rank, f"{d.rcond:.17g}",
                        f"{d.logdet:.17g}", label])
