"""Reference classifiers: linear SVM without feedback, and k-nearest neighbours."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import ConfigError, DimensionError
from .linear import Standardizer, subgradient_fit
from .predictor import ResponseMatrix


@dataclass(frozen=True, eq=False)
class SvmModel:
    u: np.ndarray
    b: float
    lam: float
    standardizer: Standardizer | None = None

    def score(self, Z) -> np.ndarray:
        Z = np.asarray(Z, dtype=float)
        if self.standardizer is not None:
            Z = self.standardizer.transform(Z)
        return Z @ self.u + self.b

    def predict(self, Z) -> np.ndarray:
        return np.where(self.score(Z) >= 0, 1, -1)


def _pairs(z, y):
    labels = y.labels if isinstance(y, ResponseMatrix) else np.asarray(y)
    z = np.asarray(z, dtype=float)
    if z.ndim != 3:
        raise DimensionError(f"features must be I x J x K, got shape {z.shape}")
    I, J, K = z.shape
    if labels.shape != (I, K):
        raise DimensionError(f"labels shape {labels.shape} != ({I}, {K})")
    return z.transpose(0, 2, 1).reshape(I * K, J), labels.reshape(-1).astype(float)


def svm_objective(u, b, z, y, lam) -> float:
    """Mean hinge loss over all (patient, time) pairs plus ``lam/2 ||u||^2``."""
    Z, labels = _pairs(z, y)
    scores = Z @ u + b
    margins = labels * scores
    return float(np.mean(np.maximum(0.0, 1.0 - margins)) + 0.5 * lam * (u @ u))


def svm_train(
    z,
    y,
    lam: float = 0.1,
    epochs: int = 500,
    seed: int = 0,
    *,
    eta0: float = 0.5,
    standardize: bool = True,
    batch_size: int | None = None,
):
    """Fit the plain hinge-loss SVM with the same solver the REP model uses.

    Returns ``(SvmModel, objective_trace)``.
    """
    Z, labels = _pairs(z, y)
    std = Standardizer.fit(Z) if standardize else None
    Zs = std.transform(Z) if std is not None else Z
    fit = subgradient_fit(Zs, labels, lam, epochs=epochs, eta0=eta0, seed=seed,
                          batch_size=batch_size)
    return SvmModel(fit.w, fit.b, float(lam), std), fit.objective_trace


@dataclass(frozen=True, eq=False)
class KnnModel:
    """Stored (profile, label) pairs; ``X`` rows keep insertion order."""

    X: np.ndarray
    labels: np.ndarray
    k: int
    standardizer: Standardizer | None = None

    def __post_init__(self):
        if len(self.labels) == 0:
            raise ConfigError("KNN model has no stored pairs")
        if not 1 <= self.k <= len(self.labels):
            raise ConfigError(f"k={self.k} must be in [1, {len(self.labels)}]")


def knn_fit(z, y, k: int, standardize: bool = True) -> KnnModel:
    Z, labels = _pairs(z, y)
    std = Standardizer.fit(Z) if standardize else None
    Zs = std.transform(Z) if std is not None else Z
    return KnnModel(Zs, labels.astype(int), int(k), std)


def _neighbours(model: KnnModel, z_t):
    q = np.asarray(z_t, dtype=float)
    if model.standardizer is not None:
        q = model.standardizer.transform(q)
    d = np.sum((model.X - q) ** 2, axis=1)
    # stable sort: equal distances keep insertion order
    return np.argsort(d, kind="stable")[: model.k]


def knn_score(model: KnnModel, z_t) -> float:
    """Fraction of +1 votes among the k nearest stored profiles."""
    if len(model.labels) == 0:
        raise ConfigError("KNN model has no stored pairs")
    nn = _neighbours(model, z_t)
    return float(np.mean(model.labels[nn] == 1))


def knn_predict(model: KnnModel, z_t) -> int:
    """Majority label among the k nearest neighbours; a split vote gives +1."""
    return 1 if knn_score(model, z_t) >= 0.5 else -1
