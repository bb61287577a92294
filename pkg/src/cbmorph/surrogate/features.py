"""Flattening of reduced matrices into PCA feature rows."""
from __future__ import annotations

import numpy as np

from ..craig_bampton import CBReduced
from ..errors import DimensionError


def feature_length(r: int, damping: bool = False) -> int:
    return (2 * r + 1) * r + (r * r if damping else 0)


def features_from_cb(cb: CBReduced, C=None) -> np.ndarray:
    """Rows of ``Mhat``, then rows of ``Khat``, then ``Fhat``; ``C`` rows appended if given."""
    parts = [cb.Mhat.ravel(), cb.Khat.ravel(), cb.Fhat]
    if C is not None:
        C = np.asarray(C, dtype=float)
        if C.shape != cb.Mhat.shape:
            raise DimensionError("damping block must match the reduced size")
        parts.append(C.ravel())
    return np.concatenate(parts)


def split_features(X, r: int, damping: bool = False):
    """Inverse of :func:`features_from_cb`: ``(M, K, F, C_or_None)``, unsymmetrized."""
    X = np.asarray(X, dtype=float).reshape(-1)
    if X.size != feature_length(r, damping):
        raise DimensionError(f"feature length {X.size} does not match r={r}")
    rr = r * r
    M = X[:rr].reshape(r, r)
    K = X[rr:2 * rr].reshape(r, r)
    F = X[2 * rr:2 * rr + r]
    C = X[2 * rr + r:].reshape(r, r) if damping else None
    return M, K, F, C


def cb_from_features(X, r: int, n_interface: int, provenance=None, sides=None,
                     symmetrize: bool = True, damping: bool = False) -> CBReduced:
    M, K, F, _ = split_features(X, r, damping)
    if symmetrize:
        M = 0.5 * (M + M.T)
        K = 0.5 * (K + K.T)
    return CBReduced(M.copy(), K.copy(), F.copy(), n_interface, provenance or {"kind": "surrogate"},
                     dict(sides or {}))
