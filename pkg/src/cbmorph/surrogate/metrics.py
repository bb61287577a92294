"""Accuracy measures for reconstructed reduced matrices."""
from __future__ import annotations

import numpy as np
import scipy.linalg as sla

from ..craig_bampton import CBReduced
from ..errors import ReconstructionDefectError

N_HIGHEST = 5


def free_free_frequencies(M, K) -> np.ndarray:
    """Natural frequencies (Hz) of the unconstrained reduced pair, ascending."""
    try:
        w = sla.eigh(0.5 * (K + K.T), 0.5 * (M + M.T), eigvals_only=True)
    except np.linalg.LinAlgError as exc:
        raise ReconstructionDefectError(f"reduced mass matrix is not positive definite: {exc}") from exc
    return np.sqrt(np.clip(w, 0.0, None)) / (2 * np.pi)


def reconstruction_error(original: CBReduced, reconstructed: CBReduced, n_highest: int = N_HIGHEST) -> float:
    """Largest relative error (percent) among the highest free-free frequencies."""
    f = free_free_frequencies(original.Mhat, original.Khat)
    try:
        np.linalg.cholesky(0.5 * (reconstructed.Mhat + reconstructed.Mhat.T))
    except np.linalg.LinAlgError as exc:
        raise ReconstructionDefectError("reconstructed mass matrix is not positive definite") from exc
    fh = free_free_frequencies(reconstructed.Mhat, reconstructed.Khat)
    k = min(n_highest, len(f))
    a, b = f[-k:], fh[-k:]
    return float(np.max(np.abs((a - b) / a)) * 100.0)
