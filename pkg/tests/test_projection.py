import numpy as np
import pytest
import scipy.linalg as sla
from hypothesis import given, settings, strategies as st

from cbmorph import linalg
from cbmorph.craig_bampton import cb_reduce
from cbmorph.errors import DimensionError, IllConditionedProjectionError
from cbmorph.models import build_lattice, partition
from cbmorph.projection import (cb_reduce_common, common_basis, diagnose_matrix, diagnostics, interface_modes,
                                project_modes, rank_law, rank_scan, swap_permutation)


def test_reference_basis_is_biorthogonal(lattice):
    basis = common_basis(lattice, 20)
    np.testing.assert_allclose(basis.R.T @ basis.source_modes.vectors, np.eye(20), atol=1e-10)


def test_zero_perturbation_equals_standard_cb(resonator):
    cbc = cb_reduce_common(resonator, common_basis(resonator, 4))
    cbs = cb_reduce(resonator, q=4)
    scale = np.abs(cbs.Khat).max()
    np.testing.assert_allclose(cbc.Khat, cbs.Khat, rtol=1e-10, atol=1e-10 * scale)
    np.testing.assert_allclose(cbc.Mhat, cbs.Mhat, rtol=1e-10, atol=1e-10 * np.abs(cbs.Mhat).max())
    assert cbc.provenance["kind"] == "common-basis"
    assert cbc.provenance["theta_p"] == cbc.provenance["theta_o"]


def test_common_basis_preserves_spectrum(resonator_gen):
    # reduced models in different bases are congruent: identical eigenvalues
    basis = common_basis(resonator_gen([10.0, 40.0]), 4)
    S = resonator_gen([11.0, 43.0])
    a = cb_reduce_common(S, basis)
    b = cb_reduce(S, q=4)
    wa = sla.eigh(a.Khat, a.Mhat, eigvals_only=True)
    wb = sla.eigh(b.Khat, b.Mhat, eigvals_only=True)
    np.testing.assert_allclose(wa[1:], wb[1:], rtol=1e-9)


def test_projected_modes_satisfy_normalization(resonator_gen):
    basis = common_basis(resonator_gen([10.0, 40.0]), 4)
    S = resonator_gen([9.0, 38.0])
    P = partition(S)
    Phi = linalg.sym_generalized_eig(P.K_jj, P.M_jj, 4).vectors
    Phi_hat = project_modes(basis, Phi)
    np.testing.assert_allclose(basis.R.T @ Phi_hat, np.eye(4), atol=1e-10)


def test_ill_conditioned_across_crossing(lattice_gen):
    basis = common_basis(lattice_gen([0.9e6]), 45)
    with pytest.raises(IllConditionedProjectionError) as info:
        cb_reduce_common(lattice_gen([1.2e6]), basis)
    assert info.value.diagnostics.rank < 45
    # below the crossing the same basis works
    cb_reduce_common(lattice_gen([0.95e6]), basis)


def test_diagnostics_fields(lattice):
    basis = common_basis(lattice, 10)
    d = diagnostics(basis, basis.source_modes.vectors)
    assert d.rank == 10 and d.well_conditioned and d.rcond == pytest.approx(1.0)
    assert d.det_sign_logdet == pytest.approx((1.0, 0.0), abs=1e-9)
    with pytest.raises(DimensionError):
        diagnostics(basis, basis.source_modes.vectors[:, :5])


def test_diagnose_matrix_rank_deficient():
    d = diagnose_matrix(np.diag([1.0, 1.0, 0.0]))
    assert d.rank == 2 and not d.well_conditioned
    d = diagnose_matrix(np.diag([1.0, 1e-11]), tau=1e-12)
    assert d.rank == 2 and not d.well_conditioned


def test_common_basis_q_too_large(resonator):
    with pytest.raises(DimensionError):
        common_basis(resonator, 9)


def test_cycle_permutation_has_no_invariant_prefix():
    rng = np.random.default_rng(5)
    order = swap_permutation(100, 21, 80, rng)
    assert sorted(order.tolist()) == list(range(100))
    np.testing.assert_array_equal(order[:20], np.arange(20))
    np.testing.assert_array_equal(order[80:], np.arange(80, 100))
    for q in range(21, 80):
        assert rank_law(order, q) < q


def test_swap_permutation_validation():
    rng = np.random.default_rng(0)
    with pytest.raises(DimensionError):
        swap_permutation(10, 5, 11, rng)
    with pytest.raises(ValueError):
        swap_permutation(10, 2, 5, rng, mode="bogus")


@settings(max_examples=10, deadline=None)
@given(st.integers(0, 2**32 - 1), st.sampled_from(["cycle", "shuffle"]))
def test_rank_law_matches_numerical_rank(seed, mode):
    S = build_lattice(5e-3, 1e6, 0.9e6)
    order = swap_permutation(60, 10, 50, np.random.default_rng(seed), mode)
    qs = [5, 10, 20, 30, 45, 49, 50, 55]
    for q, rank in rank_scan(S, qs, order):
        assert rank == rank_law(order, q)


def test_interface_modes_are_fixed_interface_modes(resonator):
    ep = interface_modes(resonator, 3)
    P = partition(resonator)
    np.testing.assert_allclose(ep.values, sla.eigh(P.K_jj, P.M_jj, eigvals_only=True)[:3], rtol=1e-12)
