"""Soft-margin RBF support vector machines trained with SMO.

Binary models separate accepted from rejected parameter samples; a
one-vs-one ensemble routes a parameter vector to its region.  Inputs are
always min-max normalized with the bounds of a :class:`ParameterSpace`.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from itertools import combinations
from typing import Optional

import numpy as np

from .errors import DegenerateLabelsError
from .regions import ParameterSpace

DEFAULT_C = 10.0
_TAU = 1e-12


def rbf_kernel(A, B, gamma: float) -> np.ndarray:
    A = np.atleast_2d(A)
    B = np.atleast_2d(B)
    d2 = (np.sum(A**2, axis=1)[:, None] + np.sum(B**2, axis=1)[None, :] - 2.0 * A @ B.T)
    return np.exp(-gamma * np.maximum(d2, 0.0))


@dataclass
class SvmModel:
    support_vectors: np.ndarray   # normalized inputs
    alphas: np.ndarray            # signed dual weights alpha_i * y_i
    bias: float
    gamma: float
    C: float
    space: Optional[ParameterSpace] = None
    n_iter: int = 0

    def decision(self, X) -> np.ndarray:
        X = np.atleast_2d(np.asarray(X, dtype=float))
        if len(self.alphas) == 0:
            return np.full(len(X), self.bias)
        return rbf_kernel(X, self.support_vectors, self.gamma) @ self.alphas + self.bias

    def to_dict(self):
        return {"support_vectors": self.support_vectors.tolist(), "alphas": self.alphas.tolist(),
                "bias": self.bias, "gamma": self.gamma, "C": self.C,
                "space": None if self.space is None else self.space.to_dict()}

    @classmethod
    def from_dict(cls, d):
        sv = np.asarray(d["support_vectors"], dtype=float)
        return cls(sv.reshape(len(sv), -1) if sv.size else sv.reshape(0, 0),
                   np.asarray(d["alphas"], dtype=float), float(d["bias"]), float(d["gamma"]),
                   float(d["C"]), None if d.get("space") is None else ParameterSpace.from_dict(d["space"]))


def train_binary(X, y, C: float = DEFAULT_C, gamma: float | None = None, tol: float = 1e-3,
                 max_iter: int = 200_000, space: ParameterSpace | None = None) -> SvmModel:
    """Solve the soft-margin dual with SMO.

    Working pairs are chosen by the maximal-violation rule for the first
    index and second-order gain for the second; ties go to the lowest index,
    so training is deterministic.  Iteration stops when the KKT gap
    ``max(-y G) - min(-y G)`` over the feasible index sets is below ``tol``.
    """
    X = np.atleast_2d(np.asarray(X, dtype=float))
    y = np.asarray(y, dtype=float).reshape(-1)
    if len(X) != len(y):
        raise ValueError("X and y lengths differ")
    if not set(np.unique(y)).issubset({-1.0, 1.0}):
        raise ValueError("labels must be +1/-1")
    if len(np.unique(y)) < 2:
        raise DegenerateLabelsError("both classes must be present")
    n, d = X.shape
    gamma = 1.0 / d if gamma is None else float(gamma)
    K = rbf_kernel(X, X, gamma)
    Kd = np.diag(K).copy()
    alpha = np.zeros(n)
    G = -np.ones(n)  # gradient of 0.5 a^T Q a - e^T a
    it = 0
    while it < max_iter:
        minus_yG = -y * G
        up = ((y > 0) & (alpha < C)) | ((y < 0) & (alpha > 0))
        low = ((y < 0) & (alpha < C)) | ((y > 0) & (alpha > 0))
        if not up.any() or not low.any():
            break
        cand_i = np.where(up, minus_yG, -np.inf)
        i = int(np.argmax(cand_i))
        m_up = cand_i[i]
        M_low = np.min(np.where(low, minus_yG, np.inf))
        if m_up - M_low < tol:
            break
        b = m_up - minus_yG
        a = Kd[i] + Kd - 2.0 * K[i]
        a = np.where(a > _TAU, a, _TAU)
        gain = np.where(low & (b > 0), b * b / a, -np.inf)
        j = int(np.argmax(gain))
        t = b[j] / a[j]
        t = min(t, C - alpha[i] if y[i] > 0 else alpha[i])
        t = min(t, alpha[j] if y[j] > 0 else C - alpha[j])
        alpha[i] += y[i] * t
        alpha[j] -= y[j] * t
        alpha[i] = min(max(alpha[i], 0.0), C)
        alpha[j] = min(max(alpha[j], 0.0), C)
        G += y * t * (K[:, i] - K[:, j])
        it += 1
    minus_yG = -y * G
    free = (alpha > 1e-12) & (alpha < C - 1e-12)
    if free.any():
        bias = float(np.mean(minus_yG[free]))
    else:
        up = ((y > 0) & (alpha < C)) | ((y < 0) & (alpha > 0))
        low = ((y < 0) & (alpha < C)) | ((y > 0) & (alpha > 0))
        hi = np.max(minus_yG[up]) if up.any() else np.min(minus_yG[low])
        lo = np.min(minus_yG[low]) if low.any() else hi
        bias = float(0.5 * (hi + lo))
    sv = alpha > 0
    return SvmModel(X[sv].copy(), (alpha * y)[sv], bias, gamma, float(C), space, it)


def predict(model: SvmModel, theta_normalized):
    """``(label, decision)`` for one normalized point (label is +1 or -1)."""
    f = float(model.decision(np.asarray(theta_normalized, dtype=float).reshape(1, -1))[0])
    return (1 if f >= 0 else -1), f


@dataclass
class MulticlassSvm:
    """One-vs-one ensemble over region ids; a single region gives a constant router."""

    region_ids: list
    models: dict = field(default_factory=dict)  # (a, b) -> SvmModel, +1 means a
    space: Optional[ParameterSpace] = None

    def _votes(self, U):
        ids = self.region_ids
        m = len(ids)
        votes = np.zeros((len(U), m))
        margin = np.zeros((len(U), m))
        worst = np.full((len(U), m), np.inf)
        pos = {r: k for k, r in enumerate(ids)}
        for (a, b), model in self.models.items():
            f = model.decision(U)
            ia, ib = pos[a], pos[b]
            votes[:, ia] += f >= 0
            votes[:, ib] += f < 0
            margin[:, ia] += f
            margin[:, ib] -= f
            worst[:, ia] = np.minimum(worst[:, ia], f)
            worst[:, ib] = np.minimum(worst[:, ib], -f)
        return votes, margin, worst

    def route_normalized(self, U):
        """Region ids and low-confidence flags for normalized points."""
        U = np.atleast_2d(np.asarray(U, dtype=float))
        if len(self.region_ids) == 1:
            return np.full(len(U), self.region_ids[0]), np.zeros(len(U), dtype=bool)
        votes, margin, worst = self._votes(U)
        # majority vote, ties by summed decision margin
        score = votes + 1e-9 * np.tanh(margin)
        best = np.argmax(score, axis=1)
        rows = np.arange(len(U))
        low = worst[rows, best] < 0
        return np.asarray(self.region_ids)[best], low

    def route(self, theta):
        """Region id and low-confidence flag for physical parameters."""
        theta = np.atleast_2d(np.asarray(theta, dtype=float))
        U = self.space.normalize(theta) if self.space is not None else theta
        return self.route_normalized(U)

    def to_dict(self):
        return {"region_ids": list(map(int, self.region_ids)),
                "models": [{"pair": [int(a), int(b)], "model": m.to_dict()}
                           for (a, b), m in self.models.items()],
                "space": None if self.space is None else self.space.to_dict()}

    @classmethod
    def from_dict(cls, d):
        models = {tuple(e["pair"]): SvmModel.from_dict(e["model"]) for e in d["models"]}
        return cls(list(d["region_ids"]), models,
                   None if d.get("space") is None else ParameterSpace.from_dict(d["space"]))


def train_multiclass(X, region_tags, C: float = DEFAULT_C, gamma: float | None = None,
                     tol: float = 1e-3, space: ParameterSpace | None = None) -> MulticlassSvm:
    """Train ``m (m - 1) / 2`` pairwise models on normalized inputs ``X``."""
    X = np.atleast_2d(np.asarray(X, dtype=float))
    tags = np.asarray(region_tags).reshape(-1)
    ids = sorted(int(t) for t in np.unique(tags))
    if not ids:
        raise DegenerateLabelsError("no samples")
    router = MulticlassSvm(ids, {}, space)
    for a, b in combinations(ids, 2):
        sel = (tags == a) | (tags == b)
        y = np.where(tags[sel] == a, 1.0, -1.0)
        router.models[(a, b)] = train_binary(X[sel], y, C, gamma, tol, space=space)
    return router


def predict_region(router: MulticlassSvm, theta) -> int:
    return int(router.route(theta)[0][0])
