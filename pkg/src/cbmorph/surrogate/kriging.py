"""Ordinary Kriging with a Gaussian correlation model.

Each output column gets its own constant trend ``beta``, process weights
``gamma`` and correlation parameters ``theta_j`` in

    R(x, x') = exp(-sum_j theta_j (x_j - x'_j)**2),

chosen by maximizing the concentrated log-likelihood with a multi-start
coordinate search over ``log10(theta_j)``.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np
import scipy.linalg as sla

from ..errors import DuplicateInputError, FitError, InsufficientDataError

NUGGET = 1e-10
LOG10_BOUNDS = (-3.0, 3.0)
STARTS = (-1.0, 0.5, 2.0)


def correlation(A, B, theta) -> np.ndarray:
    A = np.atleast_2d(A)
    B = np.atleast_2d(B)
    d2 = (A[:, None, :] - B[None, :, :]) ** 2
    return np.exp(-d2 @ np.asarray(theta, dtype=float))


@dataclass
class _OutputFit:
    theta: np.ndarray
    beta: float
    gamma: np.ndarray
    sigma2: float
    chol: np.ndarray | None
    ones_Rinv_ones: float
    loglik: float


def _concentrated(X, y, log_theta, nugget):
    n = len(y)
    theta = 10.0 ** np.asarray(log_theta)
    R = correlation(X, X, theta)
    R[np.diag_indices(n)] += nugget
    try:
        L = sla.cholesky(R, lower=True)
    except np.linalg.LinAlgError:
        return None
    ones = np.ones(n)
    Ri1 = sla.cho_solve((L, True), ones)
    Riy = sla.cho_solve((L, True), y)
    denom = ones @ Ri1
    beta = (ones @ Riy) / denom
    resid = y - beta
    gamma = sla.cho_solve((L, True), resid)
    sigma2 = max(resid @ gamma / n, 1e-300)
    logdet = 2.0 * np.sum(np.log(np.diag(L)))
    ll = -0.5 * n * np.log(sigma2) - 0.5 * logdet
    return _OutputFit(theta, float(beta), gamma, float(sigma2), L, float(denom), float(ll))


def _coordinate_search(X, y, d, nugget, starts=STARTS, min_step=0.02):
    lo, hi = LOG10_BOUNDS
    best = None
    for s0 in starts:
        x = np.full(d, float(s0))
        cur = _concentrated(X, y, x, nugget)
        step = 1.0
        while cur is None and x[0] < hi:
            x = np.minimum(x + step, hi)
            cur = _concentrated(X, y, x, nugget)
        if cur is None:
            continue
        while step >= min_step:
            improved = False
            for j in range(d):
                for sgn in (1.0, -1.0):
                    trial = x.copy()
                    trial[j] = np.clip(trial[j] + sgn * step, lo, hi)
                    if trial[j] == x[j]:
                        continue
                    fit = _concentrated(X, y, trial, nugget)
                    if fit is not None and fit.loglik > cur.loglik + 1e-12:
                        x, cur, improved = trial, fit, True
                        break
            if not improved:
                step *= 0.5
        if best is None or cur.loglik > best.loglik:
            best = cur
    if best is None:
        raise FitError("correlation matrix is not positive definite for any correlation length")
    return best


@dataclass
class KrigingModel:
    X: np.ndarray                # (n, d) normalized training inputs
    y_mean: np.ndarray           # per-output scaling applied before fitting
    y_scale: np.ndarray
    thetas: np.ndarray           # (m, d)
    betas: np.ndarray            # (m,)
    gammas: np.ndarray           # (m, n)
    sigma2: np.ndarray           # (m,)
    nugget: float = NUGGET

    @property
    def n_outputs(self) -> int:
        return len(self.betas)

    def _cross(self, x, k):
        # the nugget belongs to the zero-distance correlation, so training
        # points are reproduced exactly rather than smoothed by it
        r = correlation(x, self.X, self.thetas[k])
        same = np.all(x[:, None, :] == self.X[None, :, :], axis=2)
        return r + self.nugget * same

    def predict(self, x) -> np.ndarray:
        """Predictions of shape ``(n_points, n_outputs)``."""
        x = np.atleast_2d(np.asarray(x, dtype=float))
        out = np.empty((len(x), self.n_outputs))
        for k in range(self.n_outputs):
            out[:, k] = self.betas[k] + self._cross(x, k) @ self.gammas[k]
        return out * self.y_scale + self.y_mean

    def variance(self, x) -> np.ndarray:
        """Kriging mean-squared error per output, in output units squared."""
        x = np.atleast_2d(np.asarray(x, dtype=float))
        n = len(self.X)
        out = np.empty((len(x), self.n_outputs))
        ones = np.ones(n)
        for k in range(self.n_outputs):
            if self.sigma2[k] == 0.0:
                out[:, k] = 0.0
                continue
            R = correlation(self.X, self.X, self.thetas[k])
            R[np.diag_indices(n)] += self.nugget
            cf = sla.cho_factor(R, lower=True)
            r = self._cross(x, k)
            Rir = sla.cho_solve(cf, r.T)
            Ri1 = sla.cho_solve(cf, ones)
            u = 1.0 - ones @ Rir
            mse = 1.0 + self.nugget - np.sum(r.T * Rir, axis=0) + u**2 / (ones @ Ri1)
            out[:, k] = self.sigma2[k] * np.maximum(mse, 0.0)
        return out * self.y_scale**2

    def to_dict(self):
        return {k: (v.tolist() if isinstance(v, np.ndarray) else v) for k, v in self.__dict__.items()}

    @classmethod
    def from_dict(cls, d):
        X = np.asarray(d["X"], dtype=float)
        m = len(d["betas"])
        return cls(X.reshape(len(X), -1), np.asarray(d["y_mean"]), np.asarray(d["y_scale"]),
                   np.asarray(d["thetas"], dtype=float).reshape(m, -1), np.asarray(d["betas"]),
                   np.asarray(d["gammas"], dtype=float).reshape(m, -1), np.asarray(d["sigma2"]),
                   float(d["nugget"]))


def _check_inputs(X):
    n, d = X.shape
    if n < d + 2:
        raise InsufficientDataError(f"Kriging needs at least d+2={d + 2} samples, got {n}")
    diff = np.sqrt(((X[:, None, :] - X[None, :, :]) ** 2).sum(-1))
    diff[np.diag_indices(n)] = np.inf
    if np.min(diff) < 1e-12:
        i, j = np.unravel_index(np.argmin(diff), diff.shape)
        raise DuplicateInputError(f"inputs {i} and {j} coincide")


def kriging_fit(inputs, outputs, shared_lengths: bool = False, nugget: float = NUGGET,
                thetas=None) -> KrigingModel:
    """Fit one ordinary-Kriging predictor per output column.

    ``thetas`` (shape ``(n_outputs, d)``) fixes the correlation parameters
    and skips the likelihood search.  With ``shared_lengths`` a single set
    of parameters is searched on the first output and reused for all.
    """
    X = np.atleast_2d(np.asarray(inputs, dtype=float))
    Y = np.asarray(outputs, dtype=float)
    Y = Y.reshape(len(X), -1)
    _check_inputs(X)
    n, d = X.shape
    m = Y.shape[1]
    y_mean = Y.mean(axis=0)
    y_scale = Y.std(axis=0)
    const = y_scale <= 1e-14 * np.maximum(1.0, np.abs(y_mean))
    y_scale = np.where(const, 1.0, y_scale)
    Ys = (Y - y_mean) / y_scale
    th = np.ones((m, d))
    betas = np.zeros(m)
    gammas = np.zeros((m, n))
    sig = np.zeros(m)
    shared = None
    for k in range(m):
        if const[k]:
            continue
        if thetas is not None:
            fit = _concentrated(X, Ys[:, k], np.log10(np.asarray(thetas)[k]), nugget)
            if fit is None:
                raise FitError("correlation matrix not positive definite at the given lengths")
        elif shared_lengths and shared is not None:
            fit = _concentrated(X, Ys[:, k], np.log10(shared), nugget)
            if fit is None:
                raise FitError("shared correlation lengths fail for a later output")
        else:
            fit = _coordinate_search(X, Ys[:, k], d, nugget)
            shared = fit.theta
        th[k] = fit.theta
        betas[k] = fit.beta
        gammas[k] = fit.gamma
        sig[k] = fit.sigma2
    return KrigingModel(X, y_mean, y_scale, th, betas, gammas, sig, nugget)


def kriging_predict(model: KrigingModel, theta) -> np.ndarray:
    return model.predict(theta)


def loo_predictions(model: KrigingModel) -> np.ndarray:
    """Leave-one-out predictions at every training input, correlation parameters held fixed.

    Uses the bordered system ``A = [[R, 1], [1^T, 0]]``: the held-out
    residual of point ``i`` is ``(A^-1 [y; 0])_i / (A^-1)_ii``, identical to
    refitting trend and weights without point ``i``.
    """
    X = model.X
    n = len(X)
    Y = np.empty((n, model.n_outputs))
    for k in range(model.n_outputs):
        if model.sigma2[k] == 0.0:
            Y[:, k] = model.betas[k]
            continue
        R = correlation(X, X, model.thetas[k])
        R[np.diag_indices(n)] += model.nugget
        A = np.zeros((n + 1, n + 1))
        A[:n, :n] = R
        A[:n, n] = A[n, :n] = 1.0
        Ainv = np.linalg.inv(A)
        y = np.empty(n)
        # reconstruct scaled training outputs from the fitted weights
        y[:] = model.betas[k] + R @ model.gammas[k]
        sol = Ainv[:, :n] @ y
        resid = sol[:n] / np.diag(Ainv)[:n]
        Y[:, k] = y - resid
    return Y * model.y_scale + model.y_mean
