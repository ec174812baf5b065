import numpy as np
import pytest

from rep.errors import ConfigError, DimensionError
from rep.evaluation import (Grids, SyntheticSpec, TrainSettings, generate_synthetic,
                            hide_fraction, loo_cv, masking_experiment, run_fold)
from rep.predictor import ResponseMatrix
from rep.tensor import MaskedTensor

FAST = TrainSettings(epochs=60, completion_tol=1e-3, completion_max_iters=60)
ONE = Grids(rank=(2,), lam=(0.1,), rho=(1.0,), svm_lam=(0.1,), knn_k=(1,))


def _cohort(seed=0, **kw):
    spec = dict(I=8, J=10, K=4, seed=seed)
    spec.update(kw)
    return generate_synthetic(SyntheticSpec(**spec))


def test_three_patients_minimal_run():
    x, y, _, _ = _cohort(I=3)
    rep = loo_cv(x, y, ONE, methods=("rep", "svm", "knn"), settings=FAST)
    for name in ("rep", "svm", "knn"):
        mr = rep[name]
        assert len(mr.folds) == 3 and mr.y_pred.shape == (12,)
        assert 0.0 <= mr.acc <= 1.0


def test_tuned_run_records_grid_choice():
    x, y, _, _ = _cohort(I=6)
    grids = Grids(rank=(2, 3), lam=(0.1, 1.0), rho=(1.0,), svm_lam=(0.1, 1.0), knn_k=(1, 3))
    for protocol in ("validation-record", "5-fold"):
        rep = loo_cv(x, y, grids, protocol, settings=FAST)
        for f in rep["rep"].folds:
            assert f.params["rank"] in (2, 3) and f.params["lam"] in (0.1, 1.0)
        for f in rep["svm"].folds:
            assert f.params["lam"] in (0.1, 1.0)


def test_noiseless_cohort_generous_grid():
    x, y, _, _ = generate_synthetic(SyntheticSpec(I=20, J=20, K=5, noise_std=0.0, seed=0))
    grids = Grids(rank=(2, 3, 4), lam=(0.01, 0.1), rho=(1.0, 2.0))
    rep = loo_cv(x, y, grids, methods=("rep",))
    assert rep["rep"].acc >= 0.95


def test_random_labels_give_chance_auc():
    aucs = []
    for seed in range(10):
        x, _, _, _ = _cohort(seed, I=10)
        labels = np.random.default_rng(seed).choice([-1, 1], size=(10, 4))
        rep = loo_cv(x, ResponseMatrix(labels), ONE, methods=("svm",), seed=seed, settings=FAST)
        aucs.append(rep["svm"].auc)
    assert 0.35 <= np.mean(aucs) <= 0.65


def test_held_out_patient_does_not_leak_into_training():
    x, y, _, _ = _cohort(I=5)
    kw = dict(grids=Grids(rank=(2,), lam=(0.1, 1.0), rho=(1.0, 2.0)), settings=FAST,
              protocol="validation-record", methods=("rep", "svm"), seed=0)
    a = run_fold(x, y, 2, **kw)

    values = x.values.copy()
    values[2] = values[2] * 7.0 + 1.0
    labels = y.labels.copy()
    labels[2] = -labels[2]
    b = run_fold(MaskedTensor(values, x.mask), ResponseMatrix(labels, y.patient_ids), 2, **kw)
    assert a["rep"].params == b["rep"].params
    for attr in ("u", "v", "b"):
        assert np.array_equal(getattr(a["rep"].model, attr), getattr(b["rep"].model, attr))
    assert np.array_equal(a["svm"].model.u, b["svm"].model.u)


def test_mask_rate_zero_matches_loo_cv():
    x, y, _, _ = _cohort(I=5)
    rows = masking_experiment(x, y, [0.0], [3], grids=ONE, methods=("rep", "svm"), settings=FAST)
    ref = loo_cv(x, y, ONE, methods=("rep", "svm"), seed=3, settings=FAST)
    assert [(r.method, r.acc, r.auc) for r in rows] == [
        (m, ref[m].acc, ref[m].auc) for m in ("rep", "svm")]


def test_hide_fraction_is_nested():
    x, _, _, _ = _cohort(I=5)
    lo, hi = hide_fraction(x, 0.1, 7), hide_fraction(x, 0.3, 7)
    assert np.all(hi.mask <= lo.mask)
    assert x.n_observed - lo.n_observed == round(0.1 * x.n_observed)


def test_sweep_table_shape():
    x, y, _, _ = _cohort(I=4)
    rows = masking_experiment(x, y, [0.05, 0.1], [0, 1], grids=ONE, methods=("rep", "svm"),
                              settings=FAST)
    assert len(rows) == 8
    assert [(r.seed, r.rate, r.method) for r in rows[:4]] == [
        (0, 0.05, "rep"), (0, 0.05, "svm"), (0, 0.1, "rep"), (0, 0.1, "svm")]


@pytest.mark.parametrize("rate", [1.0, 1.5, -0.1])
def test_bad_rate(rate):
    x, y, _, _ = _cohort(I=4)
    with pytest.raises(ConfigError):
        masking_experiment(x, y, [rate], [0], grids=ONE)


def test_bad_configuration():
    x, y, _, _ = _cohort(I=4)
    with pytest.raises(ConfigError):
        Grids(rank=())
    with pytest.raises(ConfigError):
        loo_cv(x, y, ONE, "leave-two-out")
    with pytest.raises(ConfigError):
        loo_cv(x, y, ONE, methods=("forest",))
    with pytest.raises(ConfigError):
        loo_cv(x.subset([0, 1]), y.subset([0, 1]), ONE)
    with pytest.raises(DimensionError):
        loo_cv(x, y.subset([0, 1, 2]), ONE)
