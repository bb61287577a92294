"""Classical Craig-Bampton reduction.

The physical coordinates ``x = [x_i; x_j]`` are replaced by the interface
DoF and ``q`` fixed-interface modal coordinates through

    T = [[I, 0], [Psi, Phi]],   Psi = -K_jj^-1 K_ji,

and the reduced operators are ``T^T M T``, ``T^T K T`` and ``T^T F``.
Reduced DoF are ordered interface first (in ``S.interface_dofs`` order), then
modal coordinates.
"""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from . import linalg
from .errors import DimensionError, SingularSystemError
from .models import Substructure, partition


@dataclass(frozen=True)
class CBTransform:
    Psi: np.ndarray
    Phi: np.ndarray
    T: np.ndarray

    @property
    def n_interface(self):
        return self.Psi.shape[1]

    @property
    def q(self):
        return self.Phi.shape[1]


@dataclass
class CBReduced:
    """Reduced mass, stiffness and force of one substructure.

    ``provenance`` is ``{"kind": "standard"}`` or
    ``{"kind": "common-basis", "theta_p": [...], "theta_o": [...]}``;
    predictors add further keys (e.g. ``region``).
    """

    Mhat: np.ndarray
    Khat: np.ndarray
    Fhat: np.ndarray
    n_interface: int
    provenance: dict = field(default_factory=lambda: {"kind": "standard"})
    sides: dict = field(default_factory=dict)

    def __post_init__(self):
        self.Mhat = np.asarray(self.Mhat, dtype=float)
        self.Khat = np.asarray(self.Khat, dtype=float)
        self.Fhat = np.asarray(self.Fhat, dtype=float).reshape(-1)
        r = self.Mhat.shape[0]
        if self.Mhat.shape != (r, r) or self.Khat.shape != (r, r) or self.Fhat.shape != (r,):
            raise DimensionError("reduced matrices have inconsistent sizes")
        if not 0 <= self.n_interface <= r:
            raise DimensionError("n_interface exceeds the reduced size")

    @property
    def r(self) -> int:
        return self.Mhat.shape[0]

    @property
    def q(self) -> int:
        return self.r - self.n_interface

    def to_dict(self):
        return {"r": self.r, "n_interface": self.n_interface,
                "Mhat": self.Mhat.ravel().tolist(), "Khat": self.Khat.ravel().tolist(),
                "Fhat": self.Fhat.tolist(), "provenance": self.provenance,
                "sides": {k: list(v) for k, v in self.sides.items()}}

    @classmethod
    def from_dict(cls, d):
        r = int(d["r"])
        return cls(np.asarray(d["Mhat"]).reshape(r, r), np.asarray(d["Khat"]).reshape(r, r),
                   np.asarray(d["Fhat"]), int(d["n_interface"]), dict(d.get("provenance", {})),
                   {k: list(v) for k, v in d.get("sides", {}).items()})


def reduced_sides(S: Substructure) -> dict:
    """Map each side name to positions in the reduced DoF vector."""
    pos = {int(d): k for k, d in enumerate(S.interface_dofs)}
    return {name: [pos[d] for d in dofs] for name, dofs in S.sides.items()}


def static_modes(K_jj, K_ji):
    """Constraint modes ``Psi = -K_jj^-1 K_ji`` from one factorization of ``K_jj``."""
    K_jj = np.asarray(K_jj, dtype=float)
    K_ji = np.asarray(K_ji, dtype=float)
    if K_jj.shape[0] != K_ji.shape[0]:
        raise DimensionError(f"K_jj {K_jj.shape} and K_ji {K_ji.shape} are not conformable")
    try:
        fac = linalg.Factorization(K_jj)
    except SingularSystemError as exc:
        raise SingularSystemError(f"K_jj is singular: {exc}", rcond=exc.rcond) from exc
    return -fac.solve(K_ji)


def fixed_interface_modes(M_jj, K_jj, q: int) -> linalg.EigenPairs:
    return linalg.sym_generalized_eig(K_jj, M_jj, q)


def cb_transform(Psi, Phi) -> CBTransform:
    Psi = np.atleast_2d(np.asarray(Psi, dtype=float))
    Phi = np.atleast_2d(np.asarray(Phi, dtype=float))
    if Psi.shape[0] != Phi.shape[0]:
        raise DimensionError(f"Psi {Psi.shape} and Phi {Phi.shape} row counts differ")
    n_j, n_i = Psi.shape
    q = Phi.shape[1]
    T = np.zeros((n_i + n_j, n_i + q))
    T[:n_i, :n_i] = np.eye(n_i)
    T[n_i:, :n_i] = Psi
    T[n_i:, n_i:] = Phi
    return CBTransform(Psi, Phi, T)


def _ordered(S: Substructure):
    """M, K, F permuted to [interface, internal] order."""
    order = np.concatenate([S.interface_dofs, S.internal_dofs])
    return S.M[np.ix_(order, order)], S.K[np.ix_(order, order)], S.F[order]


def project(S: Substructure, T: CBTransform, provenance=None) -> CBReduced:
    """Apply ``T`` to ``S``: ``(T^T M T, T^T K T, T^T F)``."""
    n = S.n_dofs
    if T.T.shape[0] != n or T.n_interface != S.n_interface:
        raise DimensionError(
            f"transform of shape {T.T.shape} does not match substructure with {n} DoF "
            f"and {S.n_interface} interface DoF")
    M, K, F = _ordered(S)
    Mh = T.T.T @ M @ T.T
    Kh = T.T.T @ K @ T.T
    Fh = T.T.T @ F
    return CBReduced(0.5 * (Mh + Mh.T), 0.5 * (Kh + Kh.T), Fh, S.n_interface,
                     provenance or {"kind": "standard"}, reduced_sides(S))


def cb_reduce(S: Substructure, T: CBTransform | None = None, q: int | None = None) -> CBReduced:
    """Standard CB reduction of ``S``.

    Either pass a transform built from ``S`` or the number ``q`` of
    fixed-interface modes to retain.
    """
    if T is None:
        if q is None:
            raise ValueError("either T or q is required")
        T = cb_transform_for(S, q)
    return project(S, T, {"kind": "standard", "theta": list(S.params.values)})


def cb_transform_for(S: Substructure, q: int) -> CBTransform:
    P = partition(S)
    Psi = static_modes(P.K_jj, P.K_ji)
    modes = fixed_interface_modes(P.M_jj, P.K_jj, q)
    return cb_transform(Psi, modes.vectors)


def expand(S: Substructure, T: CBTransform, xhat):
    """Recover full physical DoF (original numbering) from reduced coordinates."""
    x_ordered = T.T @ np.asarray(xhat)
    order = np.concatenate([S.interface_dofs, S.internal_dofs])
    out = np.empty_like(x_ordered)
    out[order] = x_ordered
    return out
