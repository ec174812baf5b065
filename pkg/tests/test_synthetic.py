import numpy as np
import pytest

from rep.errors import ConfigError
from rep.evaluation import SyntheticSpec, generate_synthetic
from rep.predictor import build_feedback
from rep.tensor import reconstruct


def test_noiseless_cohort_is_exactly_low_rank():
    x, y, truth, _ = generate_synthetic(SyntheticSpec(I=8, J=10, K=4, noise_std=0.0, seed=3))
    assert x.mask.all()
    np.testing.assert_array_equal(x.values, reconstruct(truth))
    assert truth.rank == 3 and y.shape == (8, 4)


def test_full_persistence_gives_constant_courses():
    _, y, _, _ = generate_synthetic(SyntheticSpec(I=12, J=10, K=5, persistence=1.0, seed=1))
    assert np.all(y.labels == y.labels[:, :1])


def test_zero_persistence_follows_planted_rule():
    spec = SyntheticSpec(I=15, J=12, K=5, persistence=0.0, feedback_weight=0.7, seed=2)
    x, y, _, rule = generate_synthetic(spec)
    raw = np.einsum("ijk,j->ik", x.values, rule.gene_weights)
    s = (raw - rule.center) / rule.scale + rule.feedback_weight * build_feedback(y).values
    np.testing.assert_array_equal(y.labels, np.where(s >= 0, 1, -1))


@pytest.mark.parametrize("seed", range(10))
def test_class_balance(seed):
    _, y, _, _ = generate_synthetic(SyntheticSpec(seed=seed))
    assert 0.3 <= np.mean(y.labels == 1) <= 0.7


def test_missing_rate_leaves_every_slab_observed():
    x, _, _, _ = generate_synthetic(SyntheticSpec(I=10, J=12, K=4, missing_rate=0.5, seed=4))
    assert 0.4 < 1 - x.mask.mean() < 0.6
    for axes in ((1, 2), (0, 2), (0, 1)):
        assert x.mask.any(axis=axes).all()


def test_deterministic_per_seed():
    a = generate_synthetic(SyntheticSpec(I=6, J=8, K=3, missing_rate=0.2, seed=9))
    b = generate_synthetic(SyntheticSpec(I=6, J=8, K=3, missing_rate=0.2, seed=9))
    assert np.array_equal(a.tensor.values, b.tensor.values)
    assert np.array_equal(a.tensor.mask, b.tensor.mask)
    assert np.array_equal(a.labels.labels, b.labels.labels)


@pytest.mark.parametrize("kw", [dict(I=0), dict(missing_rate=1.0), dict(persistence=1.5),
                                dict(noise_std=-1.0)])
def test_bad_spec(kw):
    with pytest.raises(ConfigError):
        SyntheticSpec(**kw)
