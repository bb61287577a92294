import numpy as np
import pytest
import scipy.linalg as sla

from cbmorph.errors import DimensionError, ParameterError
from cbmorph.models import (Substructure, ModelParams, base_band_edge, build_lattice, build_resonator_cell,
                            generator_for, lattice_from_gram_kn_mm, partition, reassemble, resonator_frequency)

P0 = ModelParams(("x",), (1.0,))


def test_lattice_dimensions(lattice):
    assert lattice.n_dofs == 242
    assert lattice.n_internal == 198
    assert lattice.n_interface == 44
    assert len(lattice.sides["left"]) == len(lattice.sides["right"]) == 22


def test_lattice_symmetric_and_rigid_modes(lattice):
    assert np.allclose(lattice.K, lattice.K.T) and np.allclose(lattice.M, lattice.M.T)
    w = sla.eigh(lattice.K, lattice.M, eigvals_only=True)
    # three in-plane rigid-body modes, then a clear gap
    assert np.all(np.abs(w[:3]) < 1e-6 * w[3])
    assert w[3] > 0


def test_lattice_fixed_interface_frequencies_frozen(lattice):
    # frozen from a direct scipy eigh of (K_jj, M_jj)
    P = partition(lattice)
    f = np.sqrt(sla.eigh(P.K_jj, P.M_jj, eigvals_only=True)) / (2 * np.pi)
    np.testing.assert_allclose(f[:5], [516.06594378, 839.32282496, 867.74875594, 892.3700251, 1047.78716854],
                               rtol=1e-9)
    np.testing.assert_allclose(f[44:46], [2787.08347069, 2831.65926616], rtol=1e-9)


def test_lattice_first_80_modes_distinct(lattice):
    P = partition(lattice)
    w = sla.eigh(P.K_jj, P.M_jj, eigvals_only=True)[:81]
    assert np.min(np.diff(w) / w[1:]) > 1e-4


def test_gram_kn_mm_units():
    a = lattice_from_gram_kn_mm(5.0, 1.0, 0.9)
    b = build_lattice(5e-3, 1e6, 0.9e6)
    np.testing.assert_array_equal(a.K, b.K)
    np.testing.assert_array_equal(a.M, b.M)


def test_partition_identity_mass():
    S = Substructure(np.eye(4), 2 * np.eye(4), np.zeros(4), [0, 3], [1, 2], P0)
    P = partition(S)
    np.testing.assert_array_equal(P.M_ii, np.eye(2))
    np.testing.assert_array_equal(P.M_jj, np.eye(2))
    np.testing.assert_array_equal(P.M_ij, np.zeros((2, 2)))


def test_partition_round_trip_bit_exact(lattice):
    M, K, F = reassemble(lattice, partition(lattice))
    np.testing.assert_array_equal(M, lattice.M)
    np.testing.assert_array_equal(K, lattice.K)
    np.testing.assert_array_equal(F, lattice.F)


def test_substructure_validation():
    with pytest.raises(DimensionError):
        Substructure(np.eye(3), np.eye(3), np.zeros(3), [0], [1], P0)
    with pytest.raises(DimensionError):
        Substructure(np.eye(3), np.eye(3), np.zeros(3), [0, 1], [1, 2], P0)


def test_substructure_dict_round_trip(resonator):
    S2 = Substructure.from_dict(resonator.to_dict())
    np.testing.assert_array_equal(S2.K, resonator.K)
    assert S2.sides == resonator.sides and S2.params.values == resonator.params.values


def test_resonator_cell_layout(resonator):
    assert resonator.n_dofs == 10
    assert list(resonator.interface_dofs) == [0, 5]
    assert resonator.sides == {"left": [0], "right": [5]}
    # total mass: 5 base units + two resonators of 2 nodes each
    m_node = 5e-4 * 40 * 10 / 2
    assert np.trace(resonator.M) == pytest.approx(5.0 + 4 * m_node)


def test_resonator_bounds_enforced():
    with pytest.raises(ParameterError):
        build_resonator_cell(20.0, 40.0)
    with pytest.raises(ParameterError):
        build_resonator_cell(-1.0, 40.0, check_bounds=False)


def test_resonator_frequency_inside_base_band():
    w = resonator_frequency(10.0, 40.0)
    assert 0 < w < base_band_edge()
    # clamped two-mass chain oracle
    m, k = 5e-4 * 40 * 10 / 2, 4.2e6 * 40 / 1000
    w_ref = np.sqrt(sla.eigh([[2 * k, -k], [-k, k]], m * np.eye(2), eigvals_only=True)[0])
    assert w == pytest.approx(w_ref, rel=1e-12)


def test_generator_for_lattice_varies_k2():
    gen = generator_for("lattice", {"vary": ["k2"]})
    np.testing.assert_array_equal(gen([1.1e6]).K, build_lattice(5e-3, 1e6, 1.1e6).K)
    with pytest.raises(ParameterError):
        generator_for("plate")


def test_model_params_replace():
    p = ModelParams(("a", "b"), (1.0, 2.0))
    assert p.replace(b=3.0)["b"] == 3.0 and p["b"] == 2.0
