"""Primal assembly of substructure chains and frequency-response sweeps."""
from __future__ import annotations

import csv
import json
from dataclasses import dataclass, field
from typing import Mapping, Optional, Sequence

import numpy as np
from scipy.optimize import minimize_scalar
from scipy.signal import find_peaks

from . import linalg
from .craig_bampton import CBReduced, reduced_sides
from .errors import ConnectivityError, DegenerateSpecError, DimensionError, SingularSystemError
from .models import Substructure

METRICS = ("average-quadratic-velocity", "deflection", "tip-transmissibility")


def full_order_cell(S: Substructure) -> CBReduced:
    """Unreduced substructure in the reduced-model layout (interface DoF first)."""
    order = np.concatenate([S.interface_dofs, S.internal_dofs])
    return CBReduced(S.M[np.ix_(order, order)], S.K[np.ix_(order, order)], S.F[order],
                     S.n_interface, {"kind": "full-order", "theta": list(S.params.values)},
                     reduced_sides(S))


@dataclass
class AssemblyPlan:
    """Cells, their local-to-global DoF maps, constraints and nodal loads.

    ``connectivity[c][k]`` is the global index of local DoF ``k`` of cell
    ``c``.  ``load`` maps global DoF to (complex) force amplitudes and is
    added to the assembled cell forces.
    """

    cells: list
    connectivity: list
    fixed_dofs: list = field(default_factory=list)
    load: dict = field(default_factory=dict)

    def __post_init__(self):
        if len(self.cells) != len(self.connectivity):
            raise ConnectivityError("one connectivity map per cell is required")
        for c, (cell, conn) in enumerate(zip(self.cells, self.connectivity)):
            if len(conn) != cell.r:
                raise ConnectivityError(f"cell {c} has {cell.r} DoF but {len(conn)} map entries")
        overlap = set(map(int, self.fixed_dofs)) & set(map(int, self.load))
        if overlap:
            raise ConnectivityError(f"DoF {sorted(overlap)} are both fixed and loaded")

    @property
    def n_global(self) -> int:
        return 1 + max(int(np.max(c)) for c in self.connectivity)

    def to_dict(self):
        return {"cells": [c.to_dict() for c in self.cells],
                "connectivity": [list(map(int, c)) for c in self.connectivity],
                "fixed_dofs": list(map(int, self.fixed_dofs)),
                "load": {str(k): [complex(v).real, complex(v).imag] for k, v in self.load.items()}}

    @classmethod
    def from_dict(cls, d):
        return cls([CBReduced.from_dict(c) for c in d["cells"]], [list(c) for c in d["connectivity"]],
                   list(d.get("fixed_dofs", [])),
                   {int(k): complex(v[0], v[1]) for k, v in d.get("load", {}).items()})

    def dumps(self) -> str:
        return json.dumps(self.to_dict(), sort_keys=True)


def chain_connectivity(cells: Sequence[CBReduced], left: str = "left", right: str = "right"):
    """Global numbering for cells joined right-to-left in sequence.

    Local DoF on the ``left`` side of cell ``c + 1`` reuse the global indices
    of the ``right`` side of cell ``c``; all other DoF get fresh indices in
    local order.
    """
    conn = []
    nxt = 0
    prev_right = None
    for c, cell in enumerate(cells):
        if left not in cell.sides or right not in cell.sides:
            raise ConnectivityError(f"cell {c} lacks '{left}'/'{right}' interface sides")
        g = np.full(cell.r, -1, dtype=int)
        if prev_right is not None:
            lpos = cell.sides[left]
            if len(lpos) != len(prev_right):
                raise ConnectivityError(
                    f"cell {c} left interface has {len(lpos)} DoF, previous right has {len(prev_right)}")
            g[lpos] = prev_right
        for k in range(cell.r):
            if g[k] < 0:
                g[k] = nxt
                nxt += 1
        prev_right = g[cell.sides[right]].copy()
        conn.append(g.tolist())
    return conn


def chain_plan(cells: Sequence[CBReduced], fix_left: bool = False, load: Optional[Mapping] = None,
               fixed_dofs: Sequence[int] = ()) -> AssemblyPlan:
    conn = chain_connectivity(cells)
    fixed = list(fixed_dofs)
    if fix_left:
        fixed += [conn[0][k] for k in cells[0].sides["left"]]
    return AssemblyPlan(list(cells), conn, sorted(set(fixed)), dict(load or {}))


def end_dofs(plan: AssemblyPlan, side: str) -> list:
    """Global DoF of the left side of the first cell or the right side of the last."""
    c = 0 if side == "left" else len(plan.cells) - 1
    return [plan.connectivity[c][k] for k in plan.cells[c].sides[side]]


@dataclass
class AssemblyMaps:
    n_global: int
    free: np.ndarray          # global index of each retained row
    fixed: np.ndarray

    def reduced_index(self, g: int) -> int:
        hit = np.flatnonzero(self.free == g)
        if not len(hit):
            raise ConnectivityError(f"global DoF {g} is fixed")
        return int(hit[0])


def assemble(plan: AssemblyPlan):
    """Sum cell matrices into global ``Mg, Kg, Fg`` and delete fixed DoF."""
    n = plan.n_global
    covered = np.zeros(n, dtype=bool)
    for conn in plan.connectivity:
        covered[np.asarray(conn)] = True
    if not covered.all():
        raise ConnectivityError(f"global DoF {np.flatnonzero(~covered).tolist()} are not used by any cell")
    Mg = np.zeros((n, n))
    Kg = np.zeros((n, n))
    Fg = np.zeros(n, dtype=complex)
    for cell, conn in zip(plan.cells, plan.connectivity):
        g = np.asarray(conn)
        Mg[np.ix_(g, g)] += cell.Mhat
        Kg[np.ix_(g, g)] += cell.Khat
        Fg[g] += cell.Fhat
    for k, v in plan.load.items():
        if not 0 <= int(k) < n:
            raise ConnectivityError(f"load DoF {k} outside 0..{n - 1}")
        Fg[int(k)] += v
    fixed = np.array(sorted(set(map(int, plan.fixed_dofs))), dtype=int)
    if len(fixed) and (fixed.min() < 0 or fixed.max() >= n):
        raise ConnectivityError("fixed DoF outside the global range")
    free = np.setdiff1d(np.arange(n), fixed)
    Mg = Mg[np.ix_(free, free)]
    Kg = Kg[np.ix_(free, free)]
    Fg = Fg[free]
    if not np.iscomplexobj(Fg) or np.all(Fg.imag == 0):
        Fg = Fg.real
    return Mg, Kg, Fg, AssemblyMaps(n, free, fixed)


def rayleigh_from_ratios(omega_i: float, omega_j: float, zeta_i: float, zeta_j: float):
    """``(alpha, beta)`` giving damping ratios ``zeta`` at angular frequencies ``omega``."""
    if not np.isfinite(omega_i) or not np.isfinite(omega_j) or omega_i <= 0 or omega_j <= 0:
        raise DegenerateSpecError("modal frequencies must be positive")
    if abs(omega_i - omega_j) <= 1e-12 * max(omega_i, omega_j):
        raise DegenerateSpecError(f"coincident frequencies {omega_i} and {omega_j} rad/s")
    A = np.array([[1.0 / (2 * omega_i), omega_i / 2], [1.0 / (2 * omega_j), omega_j / 2]])
    alpha, beta = np.linalg.solve(A, [zeta_i, zeta_j])
    return float(alpha), float(beta)


def proportional_damping(Mg, Kg, spec: Mapping):
    """``C = alpha M + beta K``.

    ``spec`` is ``{"alpha": a, "beta": b}`` or
    ``{"ratios": [z1, z2], "modes": [i, j]}`` with 1-based mode indices of
    ``(Kg, Mg)``; rigid modes count, so pass a constrained system.
    Returns ``(Cg, alpha, beta)``.
    """
    Mg = np.asarray(Mg, dtype=float)
    Kg = np.asarray(Kg, dtype=float)
    if "ratios" in spec:
        zi, zj = (float(z) for z in spec["ratios"])
        i, j = (int(k) for k in spec.get("modes", (1, 2)))
        if i < 1 or j < 1:
            raise DegenerateSpecError("mode indices are 1-based")
        w = np.sqrt(np.maximum(linalg.sym_generalized_eig(Kg, Mg, max(i, j)).values, 0.0))
        alpha, beta = rayleigh_from_ratios(w[i - 1], w[j - 1], zi, zj)
    else:
        alpha, beta = float(spec.get("alpha", 0.0)), float(spec.get("beta", 0.0))
    return alpha * Mg + beta * Kg, alpha, beta


@dataclass
class FrfResult:
    frequencies: np.ndarray      # Hz
    response: np.ndarray         # (n_freq, n_channels) complex
    metric: str
    values: np.ndarray           # (n_freq,) real metric

    def __post_init__(self):
        f = np.asarray(self.frequencies, dtype=float)
        if f.ndim != 1 or np.any(np.diff(f) <= 0):
            raise ValueError("frequencies must be strictly increasing")

    def log_magnitude(self) -> np.ndarray:
        return np.log10(np.maximum(np.abs(self.values), 1e-300))


def _check_grid(grid):
    f = np.asarray(grid, dtype=float).reshape(-1)
    if f.size == 0 or np.any(~np.isfinite(f)) or np.any(f < 0) or np.any(np.diff(f) <= 0):
        raise ValueError("frequency grid must be finite, non-negative and strictly increasing")
    return f


def dynamic_stiffness(Mg, Kg, Cg, omega):
    D = Kg - omega**2 * Mg
    if Cg is not None:
        D = D + 1j * omega * Cg
    return D


def _solve_at(D, rhs, freq):
    try:
        return linalg.solve(D, rhs, "complex")
    except SingularSystemError as exc:
        raise SingularSystemError(f"dynamic stiffness singular at {freq:.6g} Hz (rcond={exc.rcond:.2e})",
                                  rcond=exc.rcond, frequency=freq) from exc


def frf_sweep(Mg, Kg, Cg, Fg, grid, output: Mapping) -> FrfResult:
    """Forced response over a Hz grid.

    ``output`` is ``{"metric": "average-quadratic-velocity", "dofs": [...]}``
    (mean of ``|i w x|^2`` over the DoF; all DoF when omitted) or
    ``{"metric": "deflection", "dofs": [k]}`` (``|x_k|``).  Indices refer to
    the assembled (constrained) numbering.
    """
    f = _check_grid(grid)
    Mg = np.asarray(Mg, dtype=float)
    Kg = np.asarray(Kg, dtype=float)
    Fg = np.asarray(Fg).reshape(-1)
    n = Mg.shape[0]
    if Kg.shape != (n, n) or Fg.shape != (n,) or (Cg is not None and np.shape(Cg) != (n, n)):
        raise DimensionError("Mg, Kg, Cg and Fg sizes disagree")
    metric = output.get("metric", "average-quadratic-velocity")
    dofs = np.asarray(output.get("dofs", np.arange(n)), dtype=int)
    if metric not in METRICS[:2]:
        raise ValueError(f"unknown metric {metric!r}")
    resp = np.empty((len(f), len(dofs)), dtype=complex)
    vals = np.empty(len(f))
    for k, fk in enumerate(f):
        w = 2 * np.pi * fk
        x = _solve_at(dynamic_stiffness(Mg, Kg, Cg, w), Fg, fk)
        if metric == "deflection":
            resp[k] = x[dofs]
            vals[k] = np.abs(x[dofs[0]])
        else:
            v = 1j * w * x[dofs]
            resp[k] = v
            vals[k] = np.mean(np.abs(v) ** 2)
    return FrfResult(f, resp, metric, vals)


def transmissibility_sweep(Mg, Kg, Cg, base_dofs, tip_dof: int, grid) -> FrfResult:
    """``|x_tip|`` for a unit harmonic displacement prescribed at ``base_dofs``."""
    f = _check_grid(grid)
    Mg = np.asarray(Mg, dtype=float)
    n = Mg.shape[0]
    base = np.unique(np.asarray(base_dofs, dtype=int))
    if base.size == 0:
        raise ValueError("base_dofs must be non-empty")
    free = np.setdiff1d(np.arange(n), base)
    tip = int(tip_dof)
    resp = np.empty((len(f), 1), dtype=complex)
    for k, fk in enumerate(f):
        D = dynamic_stiffness(Mg, np.asarray(Kg, dtype=float), Cg, 2 * np.pi * fk)
        rhs = -D[np.ix_(free, base)] @ np.ones(len(base))
        x = np.ones(n, dtype=complex)
        x[free] = _solve_at(D[np.ix_(free, free)], rhs, fk)
        resp[k, 0] = x[tip]
    return FrfResult(f, resp, "tip-transmissibility", np.abs(resp[:, 0]))


def write_frf_csv(path, result: FrfResult, extra: Optional[Mapping] = None):
    """Columns: frequency_hz, real, imag, magnitude, metric (+ extra constant columns)."""
    extra = dict(extra or {})
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["frequency_hz", "real", "imag", "magnitude", "metric", *extra])
        for k, fk in enumerate(result.frequencies):
            z = result.response[k, 0] if result.metric != "average-quadratic-velocity" \
                else complex(result.values[k])
            mag = result.values[k]
            w.writerow([f"{fk:.17g}", f"{z.real:.17g}", f"{z.imag:.17g}", f"{mag:.17g}",
                        result.metric, *extra.values()])


def refine_peaks(Mg, Kg, Cg, Fg, dof: int, grid, prominence: float = 0.0):
    """Deflection peaks of ``|x_dof|``, located on ``grid`` and refined by bounded search.

    Returns peak frequencies in Hz; ``prominence`` (in decades) filters the
    coarse peaks before refinement.
    """
    f = _check_grid(grid)

    def neg_log_mag(fk):
        x = _solve_at(dynamic_stiffness(Mg, Kg, Cg, 2 * np.pi * fk), Fg, fk)
        return -np.log10(max(abs(x[dof]), 1e-300))

    coarse = np.array([-neg_log_mag(fk) for fk in f])
    idx, _ = find_peaks(coarse, prominence=prominence)
    peaks = []
    for k in idx:
        res = minimize_scalar(neg_log_mag, bounds=(f[k - 1], f[k + 1]), method="bounded",
                              options={"xatol": 1e-7 * f[k]})
        peaks.append(float(res.x))
    return np.array(peaks)


def log_magnitude_error(a: FrfResult, b: FrfResult) -> np.ndarray:
    """Pointwise ``|log10|a| - log10|b||`` on a common grid."""
    if a.frequencies.shape != b.frequencies.shape or np.any(a.frequencies != b.frequencies):
        raise ValueError("FRFs are on different grids")
    return np.abs(a.log_magnitude() - b.log_magnitude())
