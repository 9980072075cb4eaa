import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from hypothesis.extra.numpy import arrays
from scipy import stats

from uqseg import (DataError, SampleStack, decompose, ekl, entropy,
                   expected_softmax, image_uncertainty_score, kl_bits,
                   max_probability, variance)
from uqseg.tta import aggregate_mean

probs01 = st.floats(min_value=0.0, max_value=1.0, allow_nan=False, width=64)
stacks = st.integers(1, 9).flatmap(
    lambda t: arrays(np.float64, (t, 6, 6), elements=probs01))


def test_entropy_oracles():
    assert entropy([0.5, 0.5]) == 1.0
    assert entropy([1.0, 0.0]) == 0.0
    assert entropy([0.9, 0.1]) == pytest.approx(0.4689955935892812, abs=1e-15)
    assert entropy([0.75, 0.25]) == pytest.approx(0.8112781244591328, abs=1e-15)


def test_entropy_matches_scipy_on_random_dists(rng):
    for k in (2, 3, 5):
        p = rng.dirichlet(np.ones(k), size=40)
        ours = entropy(p)
        ref = stats.entropy(p.T, base=2)
        assert np.abs(ours - ref).max() < 1e-9


def test_entropy_validates_distribution():
    with pytest.raises(DataError):
        entropy([0.5, 0.6])
    with pytest.raises(DataError):
        entropy([1.2, -0.2])


def test_max_probability():
    assert max_probability([0.5, 0.5]) == 0.5
    assert max_probability([0.9, 0.1]) == 0.9
    assert max_probability([1.0, 0.0]) == 1.0


def test_kl_oracle_and_gibbs(rng):
    assert kl_bits([0.5, 0.5], [0.75, 0.25]) == pytest.approx(
        0.20751874963942185, abs=1e-15)
    assert kl_bits([0.3, 0.7], [0.3, 0.7]) == 0.0
    p = rng.dirichlet([1, 1], size=50)
    q = rng.dirichlet([1, 1], size=50)
    assert (kl_bits(p, q) >= 0.0).all()


def test_decompose_two_sample_oracle():
    stack = SampleStack(np.array([[[0.75]], [[0.25]]]), "mcd")
    maps = decompose(stack)
    assert maps.mean_prob.values[0, 0] == 0.5
    assert maps.total_entropy.values[0, 0] == 1.0
    assert maps.expected_entropy.values[0, 0] == pytest.approx(
        0.8112781244591328, abs=1e-15)
    assert maps.mutual_information.values[0, 0] == pytest.approx(
        0.18872187554086717, abs=1e-15)
    assert maps.ekl.values[0, 0] == pytest.approx(0.20751874963942185, abs=1e-15)
    assert maps.variance.values[0, 0] == 0.0625
    assert maps.max_prob.values[0, 0] == 0.5


def test_decompose_maximal_disagreement():
    stack = SampleStack(np.array([[[1.0]], [[0.0]]]), "mcd")
    maps = decompose(stack)
    assert maps.total_entropy.values[0, 0] == 1.0
    assert maps.expected_entropy.values[0, 0] == 0.0
    assert maps.mutual_information.values[0, 0] == 1.0


def test_identical_samples_are_exactly_zero():
    # 3 and 5 samples: counts whose mean would carry rounding residue
    for t in (2, 3, 5, 8):
        value = 0.1
        stack = SampleStack(np.full((t, 4, 4), value), "mcd")
        maps = decompose(stack)
        assert (maps.mutual_information.values == 0.0).all()
        assert (maps.ekl.values == 0.0).all()
        assert (maps.variance.values == 0.0).all()
        assert (maps.mean_prob.values == value).all()
        assert np.array_equal(maps.total_entropy.values,
                              maps.expected_entropy.values)


def test_single_sample_degeneracy(rng):
    stack = SampleStack(rng.random((1, 8, 8)), "baseline")
    maps = decompose(stack)
    assert (maps.mutual_information.values == 0.0).all()
    assert (maps.ekl.values == 0.0).all()
    assert (maps.variance.values == 0.0).all()
    assert np.array_equal(maps.total_entropy.values, maps.expected_entropy.values)


def test_variance_oracles():
    stack = SampleStack(np.array([[[0.2]], [[0.4]], [[0.6]]]), "mcd")
    assert variance(stack).values[0, 0] == pytest.approx(0.02666666666666666,
                                                         abs=1e-15)
    stack2 = SampleStack(np.array([[[0.75]], [[0.25]]]), "mcd")
    assert variance(stack2).values[0, 0] == 0.0625


@given(stack=stacks)
@settings(max_examples=80, deadline=None)
def test_decomposition_identity_property(stack):
    maps = decompose(SampleStack(stack, "mcd"))
    total = maps.total_entropy.values
    parts = maps.expected_entropy.values + maps.mutual_information.values
    assert np.abs(total - parts).max() <= 1e-9
    assert (maps.mutual_information.values >= 0.0).all()
    assert (maps.ekl.values >= 0.0).all()
    assert (maps.variance.values >= 0.0).all()
    assert (maps.total_entropy.values <= 1.0 + 1e-12).all()
    assert (maps.max_prob.values >= 0.5).all()


@given(stack=st.integers(2, 9).flatmap(
    lambda t: arrays(np.float64, (t, 5, 5),
                     elements=st.floats(0.01, 0.99, width=64))))
@settings(max_examples=60, deadline=None)
def test_dual_mi_formula_property(stack):
    s = SampleStack(stack, "mcd")
    maps = decompose(s)
    fg = s.probs
    dist = np.stack([1.0 - fg, fg], axis=-1)
    mean_fg = maps.mean_prob.values
    mean_dist = np.stack([1.0 - mean_fg, mean_fg], axis=-1)
    dual = kl_bits(dist, mean_dist).mean(axis=0)
    assert np.abs(maps.mutual_information.values - dual).max() <= 1e-9


def test_expected_softmax_is_mean(rng):
    stack = SampleStack(rng.random((4, 7, 7)), "tta")
    assert np.array_equal(expected_softmax(stack).values,
                          aggregate_mean(stack).values)


def test_ekl_identical_zero_and_direction(rng):
    same = SampleStack(np.full((3, 4, 4), 0.7), "mcd")
    assert (ekl(same).values == 0.0).all()
    # direction check: mean-first argument, one-sided stacks stay finite
    stack = SampleStack(np.array([[[0.999999]], [[0.000001]]]), "mcd")
    assert np.isfinite(ekl(stack).values).all()


def test_image_score_oracles(rng):
    stack = SampleStack(np.full((2, 4, 4), 0.5), "mcd")
    maps = decompose(stack)
    assert image_uncertainty_score(maps, "total") == 1.0
    assert image_uncertainty_score(maps, "model") == 0.0
    values = rng.random((8, 8))
    from uqseg import Raster
    from uqseg.uncertainty import UncertaintyMaps
    r = Raster(values, "uncertainty")
    z = Raster(np.zeros((8, 8)), "uncertainty")
    p = Raster(np.full((8, 8), 0.5), "probability")
    maps2 = UncertaintyMaps(total_entropy=r, expected_entropy=z,
                            mutual_information=z, ekl=z, variance=z,
                            max_prob=p, mean_prob=p)
    oracle = sum(float(v) for v in values.ravel()) / 64.0
    assert abs(image_uncertainty_score(maps2, "total") - oracle) <= 1e-12
    with pytest.raises(DataError):
        image_uncertainty_score(maps2, "ekl")


def test_by_kind_lookup(rng):
    stack = SampleStack(rng.random((3, 4, 4)), "mcd")
    maps = decompose(stack)
    assert maps.by_kind("total") is maps.total_entropy
    assert maps.by_kind("data") is maps.expected_entropy
    assert maps.by_kind("model") is maps.mutual_information
    with pytest.raises(DataError):
        maps.by_kind("bogus")
