import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from rep.completion import (
    CompletionConfig,
    complete_tensor,
    completion_objective,
    impute,
    nls_objective,
    nls_solve,
)
from rep.errors import (
    ConfigError,
    DimensionError,
    EmptySystemError,
    NumericError,
    RankError,
    UnidentifiableError,
)
from rep.tensor import MaskedTensor, reconstruct

from conftest import random_model
from oracles import kkt_residual, nls_enumerate


def test_nls_negative_projection_clamps():
    np.testing.assert_array_equal(nls_solve(np.ones((2, 1)), [-1.0, -2.0]), [0.0])


def test_nls_identity_design():
    np.testing.assert_allclose(nls_solve(np.eye(2), [3.0, 4.0]), [3.0, 4.0], atol=1e-14)


def test_nls_matches_enumeration_6x2(rng):
    M = rng.uniform(size=(6, 2))
    y = rng.normal(size=6)
    a = nls_solve(M, y)
    _, best = nls_enumerate(M, y)
    assert nls_objective(M, y, a) == pytest.approx(best, abs=1e-8)


@settings(max_examples=200, deadline=None)
@given(seed=st.integers(0, 2**32 - 1), m=st.integers(2, 20), n=st.integers(1, 5),
       ridge=st.sampled_from([0.0, 1e-6, 0.1, 1.0]))
def test_nls_oracle_and_kkt(seed, m, n, ridge):
    g = np.random.default_rng(seed)
    M = g.uniform(size=(m, n))
    y = g.normal(size=m)
    a = nls_solve(M, y, ridge)
    _, best = nls_enumerate(M, y, ridge)
    assert nls_objective(M, y, a, ridge) == pytest.approx(best, abs=1e-8)
    assert kkt_residual(M, y, a, ridge) < 1e-8


def test_nls_errors():
    with pytest.raises(EmptySystemError):
        nls_solve(np.zeros((0, 2)), np.zeros(0))
    with pytest.raises(NumericError):
        nls_solve(np.array([[np.nan]]), [1.0])
    with pytest.raises(DimensionError):
        nls_solve(np.ones((3, 2)), np.ones(2))


def test_impute_full_and_empty_mask(rng):
    m = random_model(rng, 3, 4, 5, 2)
    values = rng.uniform(size=(3, 4, 5))
    full = MaskedTensor.full(values)
    np.testing.assert_array_equal(impute(full, m), values)
    empty = MaskedTensor(values, np.zeros(values.shape, dtype=bool))
    np.testing.assert_array_equal(impute(empty, m), reconstruct(m))


def test_impute_single_missing_entry(rng):
    m = random_model(rng, 3, 4, 5, 2)
    values = rng.uniform(size=(3, 4, 5))
    mask = np.ones(values.shape, dtype=bool)
    mask[1, 2, 3] = False
    out = impute(MaskedTensor(values, mask), m)
    diff = out != values
    assert diff.sum() == 1 and diff[1, 2, 3]
    assert out[1, 2, 3] == reconstruct(m)[1, 2, 3]


def test_impute_dimension_mismatch(rng):
    with pytest.raises(DimensionError):
        impute(MaskedTensor.full(np.ones((2, 2, 2))), random_model(rng, 3, 2, 2, 1))


def test_fully_observed_exact_rank_recovered(rng):
    truth = random_model(rng, 10, 12, 6, 3)
    X = reconstruct(truth)
    res = complete_tensor(MaskedTensor.full(X), CompletionConfig(rank=3, lam=1e-6, seed=1))
    rel = np.linalg.norm(reconstruct(res.model) - X) / np.linalg.norm(X)
    assert rel < 1e-3


def test_planted_recovery_with_hidden_entries():
    g = np.random.default_rng(7)
    truth = random_model(g, 30, 50, 7, 3)
    X = reconstruct(truth)
    hidden = g.uniform(size=X.shape) < 0.2
    res = complete_tensor(MaskedTensor(X, ~hidden), CompletionConfig(rank=3, lam=1e-3, seed=7))
    G = reconstruct(res.model)
    assert np.linalg.norm((G - X)[hidden]) / np.linalg.norm(X[hidden]) < 1e-2


def test_constant_tensor_rank_one():
    X = np.full((4, 5, 6), 2.5)
    x = MaskedTensor.full(X)
    res = complete_tensor(x, CompletionConfig(rank=1, lam=1e-9, seed=3))
    np.testing.assert_array_equal(res.completed, X)
    np.testing.assert_allclose(reconstruct(res.model), X, rtol=1e-6)


@settings(max_examples=15, deadline=None)
@given(seed=st.integers(0, 2**32 - 1), missing=st.sampled_from([0.0, 0.3, 0.5]),
       lam=st.sampled_from([0.0, 1e-3, 0.1]))
def test_objective_trace_monotone_and_fidelity(seed, missing, lam):
    g = np.random.default_rng(seed)
    X = reconstruct(random_model(g, 6, 7, 5, 2)) + 0.05 * g.uniform(size=(6, 7, 5))
    mask = g.uniform(size=X.shape) >= missing
    x = MaskedTensor(X, mask)
    try:
        res = complete_tensor(x, CompletionConfig(rank=3, lam=lam, max_iters=60, seed=seed))
    except UnidentifiableError:
        return
    assert np.all(np.diff(res.objective_trace) <= 1e-9)
    assert np.array_equal(res.completed[mask], X[mask])
    assert (res.model.A >= 0).all() and (res.model.B >= 0).all() and (res.model.C >= 0).all()
    assert (res.completed >= 0).all()
    assert res.objective_trace[-1] == pytest.approx(
        completion_objective(x, res.model.A, res.model.B, res.model.C, lam))


def test_deterministic_per_seed(rng):
    X = reconstruct(random_model(rng, 5, 6, 4, 2))
    mask = rng.uniform(size=X.shape) > 0.3
    cfg = CompletionConfig(rank=2, seed=11, max_iters=50)
    r1 = complete_tensor(MaskedTensor(X, mask), cfg)
    r2 = complete_tensor(MaskedTensor(X, mask), cfg)
    for a, b in ((r1.model.A, r2.model.A), (r1.model.B, r2.model.B), (r1.model.C, r2.model.C)):
        assert np.array_equal(a, b)


def test_empty_slab_is_reported():
    X = np.ones((3, 4, 2))
    mask = np.ones(X.shape, dtype=bool)
    mask[:, 2, :] = False
    with pytest.raises(UnidentifiableError, match="gene slab 2"):
        complete_tensor(MaskedTensor(X, mask), CompletionConfig(rank=1))


def test_rank_too_large():
    with pytest.raises(RankError):
        complete_tensor(MaskedTensor.full(np.ones((2, 2, 1))), CompletionConfig(rank=3))


def test_config_validation():
    with pytest.raises(ConfigError):
        CompletionConfig(rank=2, rel_tol=0)
    with pytest.raises(ConfigError):
        CompletionConfig(rank=2, max_iters=0)
