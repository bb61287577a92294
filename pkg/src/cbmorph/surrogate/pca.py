"""Principal component compression of feature rows."""
from __future__ import annotations

from dataclasses import dataclass
from typing import Callable, Optional

import numpy as np

from ..errors import DimensionError, InsufficientDataError


@dataclass
class PcaModel:
    mean: np.ndarray
    Q: np.ndarray              # (n_features, u), orthonormal columns
    singular_values: np.ndarray  # all singular values of the centred data

    @property
    def u(self) -> int:
        return self.Q.shape[1]

    def to_dict(self):
        return {"mean": self.mean.tolist(), "Q": self.Q.tolist(),
                "singular_values": self.singular_values.tolist()}

    @classmethod
    def from_dict(cls, d):
        mean = np.asarray(d["mean"], dtype=float)
        Q = np.asarray(d["Q"], dtype=float).reshape(len(mean), -1)
        return cls(mean, Q, np.asarray(d["singular_values"], dtype=float))


def pca_project(model: PcaModel, X) -> np.ndarray:
    X = np.asarray(X, dtype=float)
    if X.shape[-1] != model.mean.size:
        raise DimensionError(f"expected {model.mean.size} features, got {X.shape[-1]}")
    return (X - model.mean) @ model.Q


def pca_reconstruct(model: PcaModel, Y) -> np.ndarray:
    Y = np.asarray(Y, dtype=float)
    if Y.shape[-1] != model.u:
        raise DimensionError(f"expected {model.u} latent features, got {Y.shape[-1]}")
    return Y @ model.Q.T + model.mean


def _truncate(mean, Vt, s, u):
    return PcaModel(mean, Vt[:u].T.copy(), s.copy())


def pca_fit(Xdata, u: Optional[int] = None, threshold: Optional[float] = None,
            error_fn: Optional[Callable[[np.ndarray, np.ndarray], float]] = None) -> PcaModel:
    """Fit PCA on the rows of ``Xdata``.

    Give either a latent size ``u`` or a ``threshold``; in threshold mode the
    smallest ``u`` is chosen whose largest training-row error
    ``error_fn(original_row, reconstructed_row)`` is below ``threshold``
    (if none qualifies, the full centred rank is kept).
    """
    X = np.atleast_2d(np.asarray(Xdata, dtype=float))
    k = X.shape[0]
    if k < 2:
        raise InsufficientDataError("PCA needs at least two data rows")
    mean = X.mean(axis=0)
    _, s, Vt = np.linalg.svd(X - mean, full_matrices=False)
    max_u = Vt.shape[0]
    if u is not None:
        if not 1 <= u <= max_u:
            raise DimensionError(f"u={u} must lie in 1..{max_u}")
        return _truncate(mean, Vt, s, u)
    if threshold is None or error_fn is None:
        raise ValueError("give u, or threshold together with error_fn")
    tiny = s[0] * 1e-13 if s.size and s[0] > 0 else 0.0
    rank = max(1, int(np.count_nonzero(s > tiny)))
    for uu in range(1, rank + 1):
        model = _truncate(mean, Vt, s, uu)
        Xr = pca_reconstruct(model, pca_project(model, X))
        worst = max(error_fn(a, b) for a, b in zip(X, Xr))
        if worst < threshold:
            return model
    return _truncate(mean, Vt, s, rank)
