import dataclasses

import numpy as np
import pytest

from sivsim import ensemble as E
from sivsim import io
from sivsim import overlap as O
from sivsim.errors import DomainError, InsufficientDataError
from sivsim.structure import GROUND_SPIN_ORBIT


def test_zero_spread_gives_two_positions():
    cfg = E.EnsembleConfig(within_class_spread=0.0, transverse_strain_spread=0.0)
    s = E.generate(cfg)
    pos = np.unique(np.round(s.positions(), 3))
    assert pos.size == 2
    assert pos[1] - pos[0] == pytest.approx(5e9, abs=1e-3)
    assert E.class_separation(s) == pytest.approx(5e9, abs=1e-3)
    assert np.allclose(s.ground_splittings(), GROUND_SPIN_ORBIT)


def test_fixture_reproduces_gap_statistics():
    s = E.generate(E.EnsembleConfig())
    assert len(s.emitters) == len(s.line_records) == 20
    gaps = np.array(O.pairwise_detunings(s.line_records))
    assert gaps.size == 19
    assert int((gaps < 94e6).sum()) == 11
    assert int((gaps < 0.3 * 94e6).sum()) == 4
    same = np.array(O.pairwise_detunings(s.line_records, same_class_only=True))
    assert int((same < 94e6).sum()) == 11 and int((same < 28.2e6).sum()) == 4
    assert O.match_probability(s.line_records, 94e6) > 0.5
    assert E.class_separation(s) == pytest.approx(5e9, abs=0.5e9)
    assert E.ground_splitting_spread(s) <= 1e9


def test_records_match_models():
    s = E.generate(E.EnsembleConfig(n_emitters=5, seed=3))
    for m, r in zip(s.emitters, s.line_records):
        assert m.orientation_class == r.orientation_class
        assert r.position == m.line_offset("C")
        assert r.fwhm > 0


def test_relabeling_flips_sign_only():
    s = E.generate(E.EnsembleConfig())
    swap = {"set1": "set2", "set2": "set1"}
    flipped = E.EnsembleSample(s.emitters, [dataclasses.replace(r, orientation_class=swap[r.orientation_class])
                                            for r in s.line_records])
    assert E.class_separation(flipped) == -E.class_separation(s)


def test_single_class_sample_rejected():
    s = E.generate(E.EnsembleConfig(class_fraction=0.0, n_emitters=8))
    assert {r.orientation_class for r in s.line_records} == {"set1"}
    with pytest.raises(InsufficientDataError):
        E.class_separation(s)


def test_class_separation_n200_fixture_seed():
    cfg = E.EnsembleConfig(n_emitters=200)
    s = E.generate(cfg)
    assert abs(E.class_separation(s) - 5e9) <= cfg.within_class_spread / np.sqrt(100)


def test_class_separation_sampling_distribution():
    # The difference of two class means has sigma * sqrt(1/n1 + 1/n2).
    z = []
    for seed in range(100):
        s = E.generate(E.EnsembleConfig(n_emitters=200, seed=seed))
        n1, n2 = s.positions("set1").size, s.positions("set2").size
        z.append((E.class_separation(s) - 5e9) / (250e6 * np.sqrt(1 / n1 + 1 / n2)))
    assert abs(np.mean(z)) < 3 / np.sqrt(len(z))
    assert 0.75 < np.std(z) < 1.25


def test_within_class_std_converges():
    s = E.generate(E.EnsembleConfig(n_emitters=1000, seed=5))
    for cls in ("set1", "set2"):
        assert np.std(s.positions(cls), ddof=1) == pytest.approx(250e6, rel=0.15)


def test_ground_splitting_uncorrelated_with_class():
    s = E.generate(E.EnsembleConfig(n_emitters=1000, seed=6))
    label = np.array([r.orientation_class == "set2" for r in s.line_records], dtype=float)
    rho = np.corrcoef(label, s.ground_splittings())[0, 1]
    assert abs(rho) < 0.1


def test_deterministic_serialisation(tmp_path):
    a, b = E.generate(E.EnsembleConfig()), E.generate(E.EnsembleConfig())
    io.write_line_records(tmp_path / "a.csv", a.line_records)
    io.write_line_records(tmp_path / "b.csv", b.line_records)
    assert (tmp_path / "a.csv").read_bytes() == (tmp_path / "b.csv").read_bytes()
    assert io.dumps([E.model_to_dict(m) for m in a.emitters]) == io.dumps(
        [E.model_to_dict(m) for m in b.emitters])
    other = E.generate(E.EnsembleConfig(seed=18))
    assert [r.position for r in other.line_records] != [r.position for r in a.line_records]


def test_config_validation():
    with pytest.raises(DomainError):
        E.EnsembleConfig(n_emitters=0)
    with pytest.raises(DomainError):
        E.EnsembleConfig(within_class_spread=-1.0)
    with pytest.raises(DomainError):
        E.EnsembleConfig(class_fraction=1.5)
