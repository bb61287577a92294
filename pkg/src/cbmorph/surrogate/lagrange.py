"""Tensor-product Lagrange interpolation of reduced matrices (baseline)."""
from __future__ import annotations

from dataclasses import dataclass
from itertools import product

import numpy as np

from ..craig_bampton import CBReduced
from ..errors import DimensionError
from ..projection import CommonBasis, cb_reduce_common, common_basis

SQRT_5_3 = np.sqrt(5.0 / 3.0)


def gauss_nodes(h: float, P: float) -> np.ndarray:
    """Second-order support nodes ``h(1 - sqrt(5/3) P), h, h(1 + sqrt(5/3) P)``."""
    return np.array([h * (1 - SQRT_5_3 * P), h, h * (1 + SQRT_5_3 * P)])


def lagrange_weights(nodes, x) -> np.ndarray:
    nodes = np.asarray(nodes, dtype=float)
    w = np.ones(len(nodes))
    for a in range(len(nodes)):
        for b in range(len(nodes)):
            if a != b:
                w[a] *= (x - nodes[b]) / (nodes[a] - nodes[b])
    return w


@dataclass
class LagrangeSupport:
    nodes: list          # per-dimension node arrays
    grid: dict           # index tuple -> CBReduced
    basis: CommonBasis | None = None

    @property
    def d(self):
        return len(self.nodes)


def build_support(generator, nominal, P: float, q: int, rcond_threshold: float = 1e-10) -> LagrangeSupport:
    """3^d common-basis reductions at Gaussian nodes around ``nominal``.

    The reference basis is taken at the centre node.
    """
    nominal = np.asarray(nominal, dtype=float)
    nodes = [gauss_nodes(h, P) for h in nominal]
    basis = common_basis(generator(nominal), q)
    grid = {}
    for idx in product(range(3), repeat=len(nominal)):
        theta = np.array([nodes[k][i] for k, i in enumerate(idx)])
        grid[idx] = cb_reduce_common(generator(theta), basis, rcond_threshold=rcond_threshold)
    return LagrangeSupport(nodes, grid, basis)


def lagrange_interpolate(support: LagrangeSupport, theta):
    """Entrywise tensor-product interpolation; returns ``(CBReduced, extrapolated)``."""
    theta = np.asarray(theta, dtype=float).reshape(-1)
    if theta.size != support.d:
        raise DimensionError(f"theta has {theta.size} components, support grid has {support.d}")
    W = [lagrange_weights(n, t) for n, t in zip(support.nodes, theta)]
    extrap = any(t < n.min() - 1e-12 or t > n.max() + 1e-12 for n, t in zip(support.nodes, theta))
    first = next(iter(support.grid.values()))
    M = np.zeros_like(first.Mhat)
    K = np.zeros_like(first.Khat)
    F = np.zeros_like(first.Fhat)
    for idx, cb in support.grid.items():
        w = np.prod([W[k][i] for k, i in enumerate(idx)])
        M += w * cb.Mhat
        K += w * cb.Khat
        F += w * cb.Fhat
    prov = {"kind": "lagrange", "theta": theta.tolist(), "extrapolated": bool(extrap)}
    return CBReduced(M, K, F, first.n_interface, prov, dict(first.sides)), extrap
