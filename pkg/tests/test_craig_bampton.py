import numpy as np
import pytest
import scipy.linalg as sla

from cbmorph.assembly import assemble, chain_plan, full_order_cell
from cbmorph.craig_bampton import (CBReduced, cb_reduce, cb_transform, cb_transform_for, expand, project,
                                   static_modes)
from cbmorph.errors import DimensionError, SingularSystemError
from cbmorph.models import ModelParams, Substructure, partition


def test_static_modes_solve_internal_equilibrium(lattice):
    P = partition(lattice)
    Psi = static_modes(P.K_jj, P.K_ji)
    np.testing.assert_allclose(P.K_jj @ Psi, -P.K_ji, atol=1e-6 * np.abs(P.K_ji).max())


def test_interface_block_is_static_condensation(resonator):
    P = partition(resonator)
    cb = cb_reduce(resonator, q=3)
    guyan = P.K_ii - P.K_ij @ np.linalg.solve(P.K_jj, P.K_ji)
    np.testing.assert_allclose(cb.Khat[:2, :2], guyan, rtol=1e-10, atol=1e-6)


def test_modal_blocks(lattice):
    q = 10
    cb = cb_reduce(lattice, q=q)
    n_i = lattice.n_interface
    P = partition(lattice)
    lam = sla.eigh(P.K_jj, P.M_jj, eigvals_only=True, subset_by_index=[0, q - 1])
    np.testing.assert_allclose(cb.Mhat[n_i:, n_i:], np.eye(q), atol=1e-10)
    np.testing.assert_allclose(np.diag(cb.Khat[n_i:, n_i:]), lam, rtol=1e-10)
    # constraint and fixed-interface modes are stiffness-orthogonal
    assert np.abs(cb.Khat[:n_i, n_i:]).max() < 1e-6 * np.abs(cb.Khat).max()


def test_full_q_recovers_exact_spectrum(resonator):
    cb = cb_reduce(resonator, q=resonator.n_internal)
    w_full = sla.eigh(resonator.K, resonator.M, eigvals_only=True)
    w_cb = sla.eigh(cb.Khat, cb.Mhat, eigvals_only=True)
    np.testing.assert_allclose(w_cb[1:], w_full[1:], rtol=1e-9)


def test_interface_dofs_only_gives_static_condensation(resonator):
    cb = cb_reduce(resonator, T=cb_transform_for(resonator, 1))
    assert cb.r == 3 and cb.n_interface == 2 and cb.q == 1
    assert cb.provenance["kind"] == "standard"


def test_three_cell_lattice_against_full_order(lattice):
    cells_cb = [cb_reduce(lattice, q=30)] * 3
    cells_full = [full_order_cell(lattice)] * 3
    f = []
    for cells in (cells_full, cells_cb):
        Mg, Kg, _, _ = assemble(chain_plan(cells, fix_left=True))
        f.append(np.sqrt(sla.eigh(Kg, Mg, eigvals_only=True, subset_by_index=[0, 9])))
    assert np.max(np.abs(f[1] - f[0]) / f[0]) < 5e-3
    # CB frequencies bound the exact ones from above
    assert np.all(f[1] >= f[0] * (1 - 1e-12))


def test_expand_reproduces_static_response(resonator):
    # a static interface displacement is represented exactly by the constraint modes
    T = cb_transform_for(resonator, 2)
    xhat = np.array([1.0, 0.5, 0.0, 0.0])
    x = expand(resonator, T, xhat)
    assert x[0] == 1.0 and x[5] == 0.5
    P = partition(resonator)
    np.testing.assert_allclose(P.K_jj @ x[resonator.internal_dofs], -P.K_ji @ x[[0, 5]], atol=1e-6)


def test_project_dimension_error(lattice, resonator):
    T = cb_transform_for(resonator, 2)
    with pytest.raises(DimensionError):
        project(lattice, T)


def test_cb_transform_shape_mismatch():
    with pytest.raises(DimensionError):
        cb_transform(np.zeros((3, 2)), np.zeros((4, 1)))


def test_singular_internal_stiffness():
    # an internal mass attached to nothing makes K_jj singular
    K = np.zeros((3, 3))
    K[:2, :2] = [[1.0, -1.0], [-1.0, 1.0]]
    S = Substructure(np.eye(3), K, np.zeros(3), [0], [1, 2], ModelParams(("x",), (1.0,)))
    with pytest.raises(SingularSystemError):
        cb_reduce(S, q=1)


def test_requires_q_or_transform(resonator):
    with pytest.raises(ValueError):
        cb_reduce(resonator)


def test_reduced_dict_round_trip(resonator):
    cb = cb_reduce(resonator, q=2)
    cb2 = CBReduced.from_dict(cb.to_dict())
    np.testing.assert_array_equal(cb2.Khat, cb.Khat)
    assert cb2.sides == cb.sides == {"left": [0], "right": [1]}
