import math

import mpmath
import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from infoloss import dist
from infoloss.dist import DiscreteFinite, DyadicTail, GaussianVec, SampleBatch, UniformBox


def test_gaussian_moments():
    b = dist.sample(GaussianVec.standard(2), 100_000, 1)
    X = b.values
    assert np.all(np.abs(X.mean(axis=1)) < 0.02)
    assert np.all(np.abs(np.cov(X) - np.eye(2)) < 0.05)


@pytest.mark.parametrize("spec", [GaussianVec.standard(3), UniformBox([0, -1], [1, 1]), DyadicTail(),
                                  DiscreteFinite([[0.0], [1.0]], [0.25, 0.75])])
def test_sampling_is_deterministic(spec):
    a = dist.sample(spec, 70_000, 42)
    b = dist.sample(spec, 70_000, 42)
    np.testing.assert_array_equal(a.values, b.values)
    assert a.seed_record == b.seed_record


def test_parallel_matches_serial():
    spec = GaussianVec([1.0, -2.0], [[2.0, 0.5], [0.5, 1.0]])
    a = dist.sample(spec, 200_000, 9)
    b = dist.sample(spec, 200_000, 9, n_jobs=4)
    np.testing.assert_array_equal(a.values, b.values)


def test_prefix_stable_across_counts():
    # chunks are seeded by index, so a shorter draw is a prefix of a longer one
    a = dist.sample(GaussianVec.standard(1), 1000, 3)
    b = dist.sample(GaussianVec.standard(1), 100_000, 3)
    np.testing.assert_array_equal(a.values, b.values[:, :1000])


def test_different_seeds_differ():
    a = dist.sample(GaussianVec.standard(1), 100, 1)
    b = dist.sample(GaussianVec.standard(1), 100, 2)
    assert not np.array_equal(a.values, b.values)


def test_dyadic_first_piece_frequency():
    b = dist.sample(DyadicTail(), 10_000, 7).values[0]
    assert np.all((b > 0) & (b <= 1))
    p1 = 1 - 1 / math.log2(3)
    assert abs(p1 - 0.36907) < 1e-5
    assert abs(np.mean(b > 0.5) - p1) < 0.02


def test_dyadic_piece_probs_telescope():
    n = np.arange(1, 200)
    p = dist.dyadic_piece_probs(n)
    assert np.all(p > 0)
    assert math.isclose(p.sum() + dist.dyadic_tail_mass(199), 1.0, rel_tol=0, abs_tol=1e-13)


def test_dyadic_cap_recorded():
    b = dist.sample(DyadicTail(), 200_000, 0)
    assert "dyadic_capped" in b.seed_record
    assert b.values.min() > 0


def test_normal_interval_against_series_oracle():
    mpmath.mp.dps = 30
    want = float(mpmath.erf(mpmath.mpf("0.5") / mpmath.sqrt(2)))
    got = dist.probability_mass(GaussianVec.standard(1), [(-0.5, 0.5)])
    assert abs(got - want) < 1e-12
    assert abs(got - 0.38292) < 1e-5


@pytest.mark.parametrize("spec", [GaussianVec.standard(2), UniformBox([0, 0], [1, 2]), DyadicTail(),
                                  DiscreteFinite([[0.0], [3.0]], [0.5, 0.5])])
def test_full_support_mass_is_one(spec):
    box = [(-math.inf, math.inf)] * spec.dims
    assert dist.probability_mass(spec, box) == pytest.approx(1.0, abs=1e-15)


def test_uniform_quarter():
    assert dist.probability_mass(UniformBox([0], [1]), [(0, 0.25)]) == pytest.approx(0.25)


def test_dyadic_box_mass_is_piece_prob():
    assert dist.probability_mass(DyadicTail(), [(0.5, 1.0)]) == pytest.approx(1 - 1 / math.log2(3), abs=1e-15)
    assert dist.probability_mass(DyadicTail(), [(0.25, 0.5)]) == pytest.approx(float(dist.dyadic_piece_probs(2)))


def test_correlated_gaussian_box_rejected():
    with pytest.raises(ValueError):
        dist.probability_mass(GaussianVec([0, 0], [[1, 0.5], [0.5, 1]]), [(0, 1), (0, 1)])


@settings(max_examples=60, deadline=None)
@given(st.floats(-4, 4), st.floats(0, 3), st.floats(0, 3))
def test_mass_is_additive(a, w1, w2):
    spec = GaussianVec.standard(1)
    whole = dist.probability_mass(spec, [(a, a + w1 + w2)])
    parts = dist.probability_mass(spec, [(a, a + w1)]) + dist.probability_mass(spec, [(a + w1, a + w1 + w2)])
    assert whole == pytest.approx(parts, abs=1e-14)


@pytest.mark.parametrize("bad", [
    lambda: GaussianVec([0, 0], [[1, 2], [2, 1]]),
    lambda: UniformBox([1], [0]),
    lambda: DiscreteFinite([[0.0], [1.0]], [0.5, 0.6]),
    lambda: SampleBatch(np.array([[0.0, np.nan]])),
    lambda: dist.sample(GaussianVec.standard(1), 10, -1),
    lambda: dist.sample(GaussianVec.standard(1), 0, 1),
])
def test_invalid_inputs_raise(bad):
    with pytest.raises(ValueError):
        bad()


@pytest.mark.parametrize("spec", [GaussianVec([1.0, 2.0], [[2.0, 0.3], [0.3, 1.0]]), UniformBox([0], [2]),
                                  DyadicTail(), DiscreteFinite([[0.0, 1.0], [2.0, 3.0]], [0.1, 0.9])])
def test_spec_json_roundtrip(spec):
    back = dist.spec_from_json(dist.spec_to_json(spec))
    assert dist.spec_to_dict(back) == dist.spec_to_dict(spec)


def test_batch_is_read_only():
    b = dist.sample(GaussianVec.standard(2), 10, 0)
    with pytest.raises(ValueError):
        b.values[0, 0] = 1.0


def test_csv_roundtrip(tmp_path):
    b = dist.sample(GaussianVec.standard(3), 50, 5)
    path = tmp_path / "x.csv"
    b.to_csv(path)
    assert path.read_text().splitlines()[0] == "x1,x2,x3"
    np.testing.assert_array_equal(SampleBatch.from_csv(path).values, b.values)


def test_named_specs():
    assert dist.named_spec("stdnormal").dims == 1
    assert dist.named_spec("gauss3").dims == 3
    assert isinstance(dist.named_spec("dyadic"), DyadicTail)
    with pytest.raises(ValueError):
        dist.named_spec("cauchy")
