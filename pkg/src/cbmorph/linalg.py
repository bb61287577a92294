"""Dense linear-algebra kernel.

Every routine here works on plain ``numpy`` arrays and is a pure function of
its inputs.  Problem sizes are desk scale (a few hundred DoF), so dense
LAPACK paths are used throughout.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np
import scipy.linalg as sla

from .errors import DecompositionError, DimensionError, SingularSystemError

DEFAULT_RANK_TOL = 1e-8
SOLVE_RCOND_MIN = 1e-14


@dataclass(frozen=True)
class EigenPairs:
    """Eigenvalues ``lambda = omega**2`` (ascending) and mass-normalized vectors."""

    values: np.ndarray
    vectors: np.ndarray

    @property
    def frequencies_hz(self) -> np.ndarray:
        return np.sqrt(np.clip(self.values, 0.0, None)) / (2.0 * np.pi)

    def __len__(self):
        return len(self.values)


@dataclass(frozen=True)
class SvdResult:
    U: np.ndarray
    singular_values: np.ndarray
    V: np.ndarray

    def reconstruct(self) -> np.ndarray:
        return (self.U * self.singular_values) @ self.V.T


def is_symmetric(A, rtol=1e-12) -> bool:
    A = np.asarray(A)
    if A.ndim != 2 or A.shape[0] != A.shape[1]:
        return False
    scale = np.max(np.abs(A)) if A.size else 0.0
    return bool(np.max(np.abs(A - A.T), initial=0.0) <= rtol * scale)


def _square(A, name="A"):
    A = np.asarray(A)
    if A.ndim != 2 or A.shape[0] != A.shape[1]:
        raise DimensionError(f"{name} must be square, got shape {A.shape}")
    return A


def sym_generalized_eig(K, M, q: int) -> EigenPairs:
    """Lowest ``q`` eigenpairs of ``K phi = lambda M phi``.

    The mass matrix is factored once (``M = L L^T``) and the standard
    symmetric problem ``L^-1 K L^-T y = lambda y`` is solved for the lowest
    ``q`` eigenvalues; ``phi = L^-T y`` is then mass-normalized by
    construction.

    Raises
    ------
    DecompositionError
        If ``M`` is not positive definite.
    DimensionError
        If the shapes disagree or ``q`` is outside ``1..n``.
    """
    K = _square(K, "K").astype(float)
    M = _square(M, "M").astype(float)
    n = K.shape[0]
    if M.shape != K.shape:
        raise DimensionError(f"K {K.shape} and M {M.shape} differ in shape")
    if not 1 <= q <= n:
        raise DimensionError(f"q={q} must lie in 1..{n}")
    try:
        L = sla.cholesky(M, lower=True)
    except np.linalg.LinAlgError as exc:
        raise DecompositionError(f"mass matrix is not positive definite: {exc}") from exc
    Kt = sla.solve_triangular(L, K, lower=True)
    Kt = sla.solve_triangular(L, Kt.T, lower=True)
    Kt = 0.5 * (Kt + Kt.T)
    w, Y = sla.eigh(Kt, subset_by_index=[0, q - 1])
    Phi = sla.solve_triangular(L.T, Y, lower=False)
    # fix the sign so the largest-magnitude entry of each vector is positive
    idx = np.argmax(np.abs(Phi), axis=0)
    signs = np.sign(Phi[idx, np.arange(q)])
    signs[signs == 0] = 1.0
    return EigenPairs(values=w, vectors=Phi * signs)


def svd(A) -> SvdResult:
    """Thin SVD with singular values in descending order."""
    A = np.atleast_2d(np.asarray(A))
    U, s, Vt = np.linalg.svd(A, full_matrices=False)
    return SvdResult(U=U, singular_values=s, V=Vt.T)


def numerical_rank(A, tau: float = DEFAULT_RANK_TOL) -> int:
    """Count singular values above ``tau * sigma_max``."""
    if not 0.0 < tau < 1.0:
        raise ValueError("tau must lie in (0, 1)")
    s = np.linalg.svd(np.atleast_2d(np.asarray(A, dtype=complex if np.iscomplexobj(A) else float)),
                      compute_uv=False)
    if s.size == 0 or s[0] == 0.0:
        return 0
    return int(np.count_nonzero(s > tau * s[0]))


def rcond(A) -> float:
    """Reciprocal 2-norm condition number ``sigma_min / sigma_max``."""
    A = _square(A)
    s = np.linalg.svd(A, compute_uv=False)
    if s[0] == 0.0:
        return 0.0
    return float(s[-1] / s[0])


def slogdet(A):
    sign, logabs = np.linalg.slogdet(_square(A))
    return float(np.real(sign)), float(logabs)


class Factorization:
    """LU factorization with a LAPACK 1-norm reciprocal-condition estimate.

    Reused by callers that solve many right-hand sides against one matrix
    (static modes, common-basis projections).
    """

    def __init__(self, A, min_rcond: float = SOLVE_RCOND_MIN):
        A = _square(A)
        complex_ = np.iscomplexobj(A)
        A = A.astype(complex if complex_ else float)
        self.n = A.shape[0]
        anorm = np.linalg.norm(A, 1)
        lu, piv, info = (sla.lapack.zgetrf if complex_ else sla.lapack.dgetrf)(A)
        if info > 0 or anorm == 0.0:
            raise SingularSystemError("matrix is exactly singular", rcond=0.0)
        gecon = sla.lapack.zgecon if complex_ else sla.lapack.dgecon
        rc, _ = gecon(lu, anorm, norm="1")
        self.rcond = float(rc)
        if not self.rcond > min_rcond:
            raise SingularSystemError(
                f"matrix is near singular (rcond={self.rcond:.3e})", rcond=self.rcond)
        self._lu = (lu, piv)

    def solve(self, B, trans: bool = False):
        B = np.asarray(B)
        return sla.lu_solve(self._lu, B, trans=1 if trans else 0, check_finite=False)


def solve(A, B, field: str = "real"):
    """Solve ``A X = B`` for real or complex systems.

    Raises
    ------
    SingularSystemError
        When the estimated reciprocal condition number is ``<= 1e-14``;
        the estimate is carried on the exception.
    """
    if field not in ("real", "complex"):
        raise ValueError("field must be 'real' or 'complex'")
    A = np.asarray(A)
    B = np.asarray(B)
    if field == "complex":
        A = A.astype(complex)
        B = B.astype(complex)
    elif np.iscomplexobj(A) or np.iscomplexobj(B):
        raise ValueError("complex data passed with field='real'")
    if A.shape[0] != B.shape[0]:
        raise DimensionError(f"A {A.shape} and B {B.shape} are not conformable")
    return Factorization(A).solve(B)
