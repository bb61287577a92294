import numpy as np
import pytest

from cbmorph import regions
from cbmorph.errors import GeometryError, ParameterError
from cbmorph.projection import ProjectionDiagnostics, common_basis, diagnostics
from cbmorph.regions import (Label, ParameterSpace, divide_space, label_samples, latin_hypercube, shell_index,
                             shell_radius, shell_volume_fraction, tag_regions, write_samples_csv)

K2_SPACE = ParameterSpace([[0.45e6, 1.35e6]], ["k2"])


def test_parameter_space_validation_and_normalization():
    with pytest.raises(ParameterError):
        ParameterSpace([[1.0, 1.0]])
    sp = ParameterSpace([[0.0, 2.0], [10.0, 20.0]])
    np.testing.assert_allclose(sp.normalize([1.0, 15.0]), [0.5, 0.5])
    np.testing.assert_allclose(sp.denormalize(sp.normalize([0.3, 11.0])), [0.3, 11.0])
    assert sp.names == ("theta1", "theta2")
    assert ParameterSpace.from_dict(sp.to_dict()) == sp
    assert ParameterSpace([[0.0, 2.0], [10.0, 21.0]]) != sp


def test_latin_hypercube_stratified_and_seeded():
    sp = ParameterSpace([[0.0, 1.0], [5.0, 15.0], [-1.0, 1.0]])
    X = latin_hypercube(40, sp, seed=9)
    U = sp.normalize(X)
    for j in range(3):
        assert sorted(np.floor(U[:, j] * 40).astype(int).tolist()) == list(range(40))
    np.testing.assert_array_equal(X, latin_hypercube(40, sp, seed=9))
    assert not np.array_equal(X, latin_hypercube(40, sp, seed=10))


def test_shell_geometry():
    sp = ParameterSpace([[0.0, 1.0], [0.0, 1.0]])
    to = np.array([0.25, 0.5])
    assert shell_radius(to, sp, to) == 0.0
    assert shell_radius([0.0, 0.5], sp, to) == pytest.approx(1.0)
    assert shell_radius([1.0, 0.5], sp, to) == pytest.approx(1.0)
    assert shell_radius([0.625, 0.5], sp, to) == pytest.approx(0.5)
    assert shell_index([1.0, 1.0], sp, to, 4) == 3
    members = divide_space(sp, to, 4)
    assert members[0](to) and not members[1](to)
    assert sum(shell_volume_fraction(i, 4, 2) for i in range(4)) == pytest.approx(1.0)


def test_divide_space_requires_interior_reference():
    sp = ParameterSpace([[0.0, 1.0]])
    with pytest.raises(GeometryError):
        divide_space(sp, [1.0], 3)
    with pytest.raises(GeometryError):
        divide_space(sp, [0.5, 0.5], 3)


def _fake_evaluator(radius, space, center):
    def _evaluate(theta, generator, basis, rcond_threshold):
        ok = np.max(np.abs(space.normalize(theta) - space.normalize(center))) < radius
        return ProjectionDiagnostics(2 if ok else 1, 1.0 if ok else 0.0, 1.0, 0.0, 2, bool(ok))
    return _evaluate


def test_labeling_skip_rule_and_termination(monkeypatch, resonator_gen):
    space = ParameterSpace([[5.0, 15.0], [20.0, 60.0]], ["L", "W"])
    center = np.array([10.0, 40.0])
    monkeypatch.setattr(regions, "_evaluate", _fake_evaluator(0.15, space, center))
    res = label_samples(space, center, 2, 10, 300, seed=3, generator=resonator_gen)
    assert res.terminated_early and res.terminated_at is not None
    assert len(res.samples) + len(res.unvisited) == 300
    # shells are processed innermost first
    shells = [s.subspace_index for s in res.samples]
    assert shells == sorted(shells)
    first_rej = min(s.order for s in res.samples if s.label == Label.REJECTED)
    for s in res.samples:
        prior = [p for p in res.samples if p.order < s.order and p.label != Label.SKIPPED]
        if s.order <= first_rej or not prior:
            assert s.label != Label.SKIPPED
            continue
        d = [np.linalg.norm(space.normalize(p.theta) - space.normalize(s.theta)) for p in prior]
        dmin = min(d)
        near = [p for p, dd in zip(prior, d) if dd <= dmin * (1 + 1e-12) + 1e-15]
        if s.label == Label.SKIPPED:
            assert all(p.label == Label.REJECTED for p in near)
        else:
            assert any(p.label == Label.ACCEPTED for p in near)
    X, y = res.training_set(space)
    assert len(X) == res.count(Label.ACCEPTED) + res.count(Label.REJECTED)
    assert set(y.tolist()) == {-1, 1}


def test_labeling_without_skip_evaluates_all(monkeypatch, resonator_gen):
    space = ParameterSpace([[5.0, 15.0], [20.0, 60.0]])
    monkeypatch.setattr(regions, "_evaluate", _fake_evaluator(2.0, space, [10.0, 40.0]))
    res = label_samples(space, [10.0, 40.0], 2, 4, 50, seed=1, generator=resonator_gen, skip=False)
    assert res.count(Label.ACCEPTED) == 50 and not res.terminated_early


def test_lattice_single_region_all_accepted(lattice_gen):
    space = ParameterSpace([[0.5e6, 0.95e6]], ["k2"])
    res = label_samples(space, [0.7e6], 45, 5, 50, seed=11, generator=lattice_gen)
    assert res.count(Label.ACCEPTED) == 50


def test_lattice_rejections_above_crossing(lattice_gen):
    res = label_samples(K2_SPACE, [0.9e6], 45, 5, 48, seed=2, generator=lattice_gen)
    for s in res.samples:
        if s.label == Label.REJECTED:
            assert s.theta[0] > 1.0e6
        if s.label == Label.ACCEPTED:
            assert s.theta[0] < 1.01e6


def test_tag_regions_ordered_sweep_gives_two(lattice_gen):
    grid = np.linspace(0.45e6, 1.35e6, 48).reshape(-1, 1)
    tg = tag_regions(grid, lattice_gen, 45)
    assert tg.m == 2
    assert np.all(tg.tags[grid[:, 0] < 1.0e6] == 1) and np.all(tg.tags[grid[:, 0] > 1.01e6] == 2)
    assert tg.references[1].sample_index == int(np.argmax(grid[:, 0] > 1.0026e6))


def test_tag_regions_invariants(resonator_gen):
    space = ParameterSpace([[5.0, 15.0], [20.0, 60.0]])
    X = latin_hypercube(60, space, 4)
    tg = tag_regions(X, resonator_gen, 4)
    for p, sm in enumerate(tg.sample_modes):
        diags = [diagnostics(r.basis, sm.modes.vectors) for r in tg.references]
        k = tg.tags[p] - 1
        assert diags[k].well_conditioned
        assert not any(d.well_conditioned for d in diags[:k])
    assert tg.references[0].sample_index == 0
    tg2 = tag_regions(X, resonator_gen, 4, threads=3)
    np.testing.assert_array_equal(tg.tags, tg2.tags)
    np.testing.assert_array_equal(tg.rconds, tg2.rconds)


def test_write_samples_csv(tmp_path):
    sp = ParameterSpace([[0.0, 1.0]], ["k2"])
    write_samples_csv(tmp_path / "s.csv", sp, [{"theta": [0.1], "label": "Accepted", "rank": 3, "rcond": 0.5}])
    lines = (tmp_path / "s.csv").read_text().splitlines()
    assert lines[0] == "k2,shell,label,rank,rcond,region_id"
    assert lines[1] == "0.10000000000000001,,Accepted,3,0.5,"
