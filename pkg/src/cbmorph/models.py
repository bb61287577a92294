"""Parameterized full-order substructure generators.

Two families are provided:

* ``build_lattice`` -- an 11 x 11 grid of point masses (242 DoF) joined by
  horizontal springs ``k1``, vertical springs ``k2`` and diagonal braces.
* ``build_resonator_cell`` -- an axial base segment carrying two identical
  two-mass resonators whose stiffness and mass follow cantilever scaling in
  a length ``L`` and width ``W``.

All quantities are SI (kg, N/m).  Interface DoF are the DoF shared with
neighbouring cells when cells are chained left to right.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import Mapping, Sequence

import numpy as np

from .errors import DimensionError, ParameterError

# lattice -------------------------------------------------------------------
LATTICE_SIZE = 11
# diagonal brace stiffness as a fraction of k1; couples x and y motion so that
# the fixed-interface spectrum is non-degenerate
LATTICE_BRACE_RATIO = 0.68

GRAM = 1e-3
KN_PER_MM = 1e6

# resonator cell ------------------------------------------------------------
RESONATOR_DEFAULTS = {
    "n_base": 6,
    "base_mass": 1.0,        # kg per interior base node (interface nodes carry half)
    "base_stiffness": 1.0e6,  # N/m
    "attach_node": 2,
    "mass_coeff": 5.0e-4,     # kg per (W*L) unit, split over the two resonator nodes
    "stiffness_coeff": 4.2e6,  # N/m per (W/L**3) unit
    "L0": 10.0,
    "W0": 40.0,
    "rel_range": 0.5,
}


@dataclass(frozen=True)
class ModelParams:
    """Named parameter vector with per-component bounds and units."""

    names: tuple
    values: tuple
    bounds: tuple = ()
    units: tuple = ()

    def __post_init__(self):
        if len(self.names) < 1 or len(self.names) != len(self.values):
            raise ParameterError("names and values must be non-empty and equal length")
        if not all(np.isfinite(v) for v in self.values):
            raise ParameterError(f"non-finite parameter values {self.values}")
        for lo, hi in self.bounds:
            if not lo < hi:
                raise ParameterError(f"invalid bound [{lo}, {hi}]")
        if self.bounds and len(self.bounds) != len(self.values):
            raise ParameterError("bounds must match the parameter count")

    @property
    def vector(self) -> np.ndarray:
        return np.asarray(self.values, dtype=float)

    def __getitem__(self, name):
        return self.values[self.names.index(name)]

    def replace(self, **updates) -> "ModelParams":
        vals = list(self.values)
        for k, v in updates.items():
            vals[self.names.index(k)] = float(v)
        return ModelParams(self.names, tuple(vals), self.bounds, self.units)

    def to_dict(self):
        return {"names": list(self.names), "values": [float(v) for v in self.values],
                "bounds": [list(map(float, b)) for b in self.bounds], "units": list(self.units)}

    @classmethod
    def from_dict(cls, d):
        return cls(tuple(d["names"]), tuple(float(v) for v in d["values"]),
                   tuple(tuple(b) for b in d.get("bounds", [])), tuple(d.get("units", [])))


@dataclass
class Substructure:
    """Full-order mass, stiffness and force with an interface/internal split.

    ``sides`` names groups of interface DoF (``"left"``/``"right"``); the
    DoF within a side are ordered so that the right side of one cell lines
    up with the left side of the next.
    """

    M: np.ndarray
    K: np.ndarray
    F: np.ndarray
    interface_dofs: np.ndarray
    internal_dofs: np.ndarray
    params: ModelParams
    sides: Mapping[str, Sequence[int]] = field(default_factory=dict)
    kind: str = "generic"

    def __post_init__(self):
        self.M = np.asarray(self.M, dtype=float)
        self.K = np.asarray(self.K, dtype=float)
        self.F = np.asarray(self.F, dtype=float).reshape(-1)
        self.interface_dofs = np.asarray(self.interface_dofs, dtype=int)
        self.internal_dofs = np.asarray(self.internal_dofs, dtype=int)
        n = self.M.shape[0]
        if self.M.shape != (n, n) or self.K.shape != (n, n) or self.F.shape != (n,):
            raise DimensionError("M, K, F dimensions are inconsistent")
        both = np.concatenate([self.interface_dofs, self.internal_dofs])
        if len(both) != n or set(both.tolist()) != set(range(n)):
            raise DimensionError("interface and internal DoF must partition all DoF")
        self.sides = {k: [int(d) for d in v] for k, v in self.sides.items()}

    @property
    def n_dofs(self) -> int:
        return self.M.shape[0]

    @property
    def n_interface(self) -> int:
        return len(self.interface_dofs)

    @property
    def n_internal(self) -> int:
        return len(self.internal_dofs)

    def scaled(self, mass: float = 1.0, stiffness: float = 1.0) -> "Substructure":
        return Substructure(self.M * mass, self.K * stiffness, self.F.copy(), self.interface_dofs,
                            self.internal_dofs, self.params, self.sides, self.kind)

    def to_dict(self):
        return {
            "kind": self.kind,
            "n_dofs": self.n_dofs,
            "interface_dofs": self.interface_dofs.tolist(),
            "internal_dofs": self.internal_dofs.tolist(),
            "sides": {k: list(v) for k, v in self.sides.items()},
            "M": self.M.ravel().tolist(),
            "K": self.K.ravel().tolist(),
            "F": self.F.tolist(),
            "params": self.params.to_dict(),
        }

    @classmethod
    def from_dict(cls, d):
        n = int(d["n_dofs"])
        return cls(
            M=np.asarray(d["M"], dtype=float).reshape(n, n),
            K=np.asarray(d["K"], dtype=float).reshape(n, n),
            F=np.asarray(d["F"], dtype=float),
            interface_dofs=d["interface_dofs"],
            internal_dofs=d["internal_dofs"],
            params=ModelParams.from_dict(d["params"]),
            sides=d.get("sides", {}),
            kind=d.get("kind", "generic"),
        )


@dataclass(frozen=True)
class Partition:
    M_ii: np.ndarray
    M_ij: np.ndarray
    M_ji: np.ndarray
    M_jj: np.ndarray
    K_ii: np.ndarray
    K_ij: np.ndarray
    K_ji: np.ndarray
    K_jj: np.ndarray
    F_i: np.ndarray
    F_j: np.ndarray


def partition(S: Substructure) -> Partition:
    """Split M, K, F into interface (i) and internal (j) blocks."""
    i, j = S.interface_dofs, S.internal_dofs
    return Partition(
        S.M[np.ix_(i, i)], S.M[np.ix_(i, j)], S.M[np.ix_(j, i)], S.M[np.ix_(j, j)],
        S.K[np.ix_(i, i)], S.K[np.ix_(i, j)], S.K[np.ix_(j, i)], S.K[np.ix_(j, j)],
        S.F[i], S.F[j],
    )


def reassemble(S: Substructure, P: Partition):
    """Inverse of :func:`partition`; returns ``(M, K, F)``."""
    n = S.n_dofs
    i, j = S.interface_dofs, S.internal_dofs
    M = np.empty((n, n))
    K = np.empty((n, n))
    F = np.empty(n)
    for A, blocks in ((M, (P.M_ii, P.M_ij, P.M_ji, P.M_jj)), (K, (P.K_ii, P.K_ij, P.K_ji, P.K_jj))):
        A[np.ix_(i, i)], A[np.ix_(i, j)], A[np.ix_(j, i)], A[np.ix_(j, j)] = blocks
    F[i] = P.F_i
    F[j] = P.F_j
    return M, K, F


def _add_spring(K, a, b, k, direction):
    e = np.asarray(direction, dtype=float)
    e = e / np.linalg.norm(e)
    B = k * np.outer(e, e)
    ia = [2 * a, 2 * a + 1]
    ib = [2 * b, 2 * b + 1]
    K[np.ix_(ia, ia)] += B
    K[np.ix_(ib, ib)] += B
    K[np.ix_(ia, ib)] -= B
    K[np.ix_(ib, ia)] -= B


def build_lattice(m: float, k1: float, k2: float, *, size: int = LATTICE_SIZE,
                  brace_ratio: float = LATTICE_BRACE_RATIO,
                  node_order: Sequence[int] | None = None) -> Substructure:
    """Braced 2-D spring-mass lattice with ``size**2`` masses and 2 DoF each.

    Horizontal neighbours are joined by axial springs ``k1`` (x-DoF),
    vertical neighbours by axial springs ``k2`` (y-DoF), and each grid cell
    carries two crossing diagonal braces of stiffness ``brace_ratio * k1``.
    Interface DoF are all DoF of the leftmost and rightmost columns.

    ``node_order`` optionally relabels nodes (node ``p`` of the grid gets
    global index ``node_order[p]``); used to test labelling invariance.

    Parameters are SI: ``m`` in kg, ``k1``/``k2`` in N/m.
    """
    for name, v in (("m", m), ("k1", k1), ("k2", k2)):
        if not (np.isfinite(v) and v > 0):
            raise ParameterError(f"{name} must be positive, got {v}")
    if brace_ratio < 0:
        raise ParameterError("brace_ratio must be non-negative")
    n_nodes = size * size
    perm = np.arange(n_nodes) if node_order is None else np.asarray(node_order, dtype=int)
    if sorted(perm.tolist()) != list(range(n_nodes)):
        raise ParameterError("node_order must be a permutation of the grid nodes")

    def nid(r, c):
        return int(perm[r * size + c])

    K = np.zeros((2 * n_nodes, 2 * n_nodes))
    kd = brace_ratio * k1
    for r in range(size):
        for c in range(size):
            if c + 1 < size:
                _add_spring(K, nid(r, c), nid(r, c + 1), k1, (1.0, 0.0))
            if r + 1 < size:
                _add_spring(K, nid(r, c), nid(r + 1, c), k2, (0.0, 1.0))
            if kd > 0 and r + 1 < size and c + 1 < size:
                _add_spring(K, nid(r, c), nid(r + 1, c + 1), kd, (1.0, 1.0))
                _add_spring(K, nid(r, c + 1), nid(r + 1, c), kd, (-1.0, 1.0))
    M = m * np.eye(2 * n_nodes)

    def col_dofs(c):
        return [d for r in range(size) for d in (2 * nid(r, c), 2 * nid(r, c) + 1)]

    left, right = col_dofs(0), col_dofs(size - 1)
    iface = left + right
    iface_set = set(iface)
    internal = [d for d in range(2 * n_nodes) if d not in iface_set]
    params = ModelParams(("m", "k1", "k2"), (float(m), float(k1), float(k2)), (),
                         ("kg", "N/m", "N/m"))
    return Substructure(M, K, np.zeros(2 * n_nodes), iface, internal, params,
                        sides={"left": left, "right": right}, kind="lattice")


def lattice_from_gram_kn_mm(m_g: float, k1_kn_mm: float, k2_kn_mm: float, **kw) -> Substructure:
    """``build_lattice`` with mass in grams and stiffness in kN/mm."""
    return build_lattice(m_g * GRAM, k1_kn_mm * KN_PER_MM, k2_kn_mm * KN_PER_MM, **kw)


def resonator_bounds(cfg: Mapping | None = None):
    c = {**RESONATOR_DEFAULTS, **(cfg or {})}
    r = c["rel_range"]
    return ((c["L0"] * (1 - r), c["L0"] * (1 + r)), (c["W0"] * (1 - r), c["W0"] * (1 + r)))


def build_resonator_cell(L: float, W: float, cfg: Mapping | None = None,
                         check_bounds: bool = True) -> Substructure:
    """Axial base segment with two identical two-mass resonators.

    The base is a chain of ``n_base`` masses joined by springs
    ``base_stiffness``; its end masses carry half the interior mass so that
    chained cells form a uniform chain.  Both resonators hang from base node
    ``attach_node``; each is a two-mass series chain with node mass
    ``mass_coeff * W * L / 2`` and spring stiffness ``stiffness_coeff * W / L**3``.

    DoF order: base nodes first, then resonator A (root, tip), then
    resonator B (root, tip).  Interface DoF: first and last base nodes.
    """
    c = {**RESONATOR_DEFAULTS, **(cfg or {})}
    bounds = resonator_bounds(c)
    if not (np.isfinite(L) and np.isfinite(W) and L > 0 and W > 0):
        raise ParameterError(f"L and W must be positive, got L={L}, W={W}")
    if check_bounds:
        for name, v, (lo, hi) in (("L", L, bounds[0]), ("W", W, bounds[1])):
            if not lo - 1e-12 <= v <= hi + 1e-12:
                raise ParameterError(f"{name}={v} outside configured bounds [{lo}, {hi}]")
    nb = int(c["n_base"])
    n = nb + 4
    M = np.zeros((n, n))
    K = np.zeros((n, n))
    for i in range(nb):
        M[i, i] = c["base_mass"] * (0.5 if i in (0, nb - 1) else 1.0)

    def spring(a, b, k):
        K[a, a] += k
        K[b, b] += k
        K[a, b] -= k
        K[b, a] -= k

    for i in range(nb - 1):
        spring(i, i + 1, c["base_stiffness"])
    m_node = c["mass_coeff"] * W * L / 2.0
    k_res = c["stiffness_coeff"] * W / L**3
    a = int(c["attach_node"])
    for r in range(2):
        root, tip = nb + 2 * r, nb + 2 * r + 1
        M[root, root] = M[tip, tip] = m_node
        spring(a, root, k_res)
        spring(root, tip, k_res)
    iface = [0, nb - 1]
    internal = [d for d in range(n) if d not in iface]
    params = ModelParams(("L", "W"), (float(L), float(W)), bounds, ("-", "-"))
    return Substructure(M, K, np.zeros(n), iface, internal, params,
                        sides={"left": [0], "right": [nb - 1]}, kind="resonator")


def resonator_frequency(L: float, W: float, cfg: Mapping | None = None) -> float:
    """First natural frequency (rad/s) of one resonator clamped at its root."""
    c = {**RESONATOR_DEFAULTS, **(cfg or {})}
    m_node = c["mass_coeff"] * W * L / 2.0
    k_res = c["stiffness_coeff"] * W / L**3
    # two equal masses, two equal springs, grounded chain
    return float(np.sqrt(k_res / m_node * (3.0 - np.sqrt(5.0)) / 2.0))


def base_band_edge(cfg: Mapping | None = None) -> float:
    """Upper passband edge (rad/s) of the infinite uniform base chain."""
    c = {**RESONATOR_DEFAULTS, **(cfg or {})}
    return float(2.0 * np.sqrt(c["base_stiffness"] / c["base_mass"]))


def generator_for(kind: str, fixed: Mapping | None = None, cfg: Mapping | None = None):
    """Return ``theta -> Substructure`` for a preset.

    For ``"lattice"`` the parameter vector lists the varied components named
    in ``fixed["vary"]`` (default ``["k2"]``) in SI units; the others come from
    ``fixed``.  For ``"resonator"`` the vector is ``(L, W)``.
    """
    if kind == "lattice":
        base = {"m": 5 * GRAM, "k1": 1 * KN_PER_MM, "k2": 0.9 * KN_PER_MM, "vary": ["k2"]}
        base.update(fixed or {})
        vary = list(base["vary"])

        def gen(theta):
            vals = {k: base[k] for k in ("m", "k1", "k2")}
            for name, v in zip(vary, np.atleast_1d(theta)):
                vals[name] = float(v)
            return build_lattice(vals["m"], vals["k1"], vals["k2"])
        return gen
    if kind == "resonator":
        def gen(theta):
            L, W = np.asarray(theta, dtype=float)
            return build_resonator_cell(L, W, cfg)
        return gen
    raise ParameterError(f"unknown model kind {kind!r}")
