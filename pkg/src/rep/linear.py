"""Hinge-loss linear classifiers fit by projected subgradient descent.

Shared by the REP predictor and the plain SVM baseline, which differ only in
the feature matrix they pass in.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import rng as rngmod
from .errors import ConfigError


@dataclass(frozen=True, eq=False)
class Standardizer:
    """Per-feature centering and scaling fitted on training rows."""

    mean: np.ndarray
    scale: np.ndarray

    @classmethod
    def fit(cls, X) -> "Standardizer":
        X = np.asarray(X, dtype=float)
        mean = X.mean(axis=0)
        scale = X.std(axis=0)
        scale = np.where(scale > 1e-12, scale, 1.0)
        return cls(mean, scale)

    def transform(self, X) -> np.ndarray:
        return (np.asarray(X, dtype=float) - self.mean) / self.scale


def project_l1_ball(w, radius: float) -> np.ndarray:
    """Euclidean projection onto ``{w : ||w||_1 <= radius}`` (sort-based)."""
    w = np.asarray(w, dtype=float)
    a = np.abs(w)
    if a.sum() <= radius:
        return w.copy()
    mu = np.sort(a)[::-1]
    cs = np.cumsum(mu)
    k = np.arange(1, a.size + 1)
    rho = np.flatnonzero(mu - (cs - radius) / k > 0)[-1]
    theta = (cs[rho] - radius) / (rho + 1)
    return np.sign(w) * np.maximum(a - theta, 0.0)


def hinge_objective(w, b, X, y, lam) -> float:
    """``mean(max(0, 1 - y (X w + b))) + lam/2 ||w||^2``."""
    margins = y * (X @ w + b)
    return float(np.mean(np.maximum(0.0, 1.0 - margins)) + 0.5 * lam * (w @ w))


@dataclass
class FitResult:
    w: np.ndarray
    b: float
    objective_trace: list
    epochs: int

    @property
    def final_objective(self) -> float:
        return self.objective_trace[-1]


def subgradient_fit(
    X,
    y,
    lam: float,
    *,
    epochs: int = 500,
    eta0: float = 0.5,
    seed: int = 0,
    frozen=None,
    l1_radius: float | None = None,
    batch_size: int | None = None,
) -> FitResult:
    """Minimize the regularized hinge objective with step ``eta0 / sqrt(epoch)``.

    Each step takes a subgradient step on the hinge term, an implicit
    (proximal) step on the ridge term, then projects onto the l1 ball when
    ``l1_radius`` is set. Starts from zero and returns the best iterate seen. ``frozen`` marks
    weights that stay at zero. With ``batch_size`` set, each epoch sweeps
    shuffled mini-batches drawn from the seeded ``training`` stream; otherwise
    every epoch is one full-batch step and the result does not depend on
    ``seed``.
    """
    X = np.asarray(X, dtype=float)
    y = np.asarray(y, dtype=float)
    N, d = X.shape
    if epochs < 1:
        raise ConfigError("epochs must be >= 1")
    if lam < 0:
        raise ConfigError("lam must be nonnegative")
    if l1_radius is not None and not l1_radius > 0:
        raise ConfigError("l1_radius must be positive")
    free = np.ones(d) if frozen is None else (~np.asarray(frozen, dtype=bool)).astype(float)

    w = np.zeros(d)
    b = 0.0
    best_w, best_b = w.copy(), b
    best = hinge_objective(w, b, X, y, lam)
    trace = []
    gen = rngmod.stream(seed, "training") if batch_size else None

    for epoch in range(1, epochs + 1):
        eta = eta0 / np.sqrt(epoch)
        batches = [slice(None)] if not batch_size else np.array_split(
            gen.permutation(N), max(1, N // batch_size)
        )
        for idx in batches:
            Xb, yb = X[idx], y[idx]
            active = yb * (Xb @ w + b) < 1.0
            n = yb.shape[0]
            gw = -(Xb[active].T @ yb[active]) / n
            gb = -yb[active].sum() / n
            # implicit step on the ridge term: stable for any lam * eta
            w = np.where(free > 0, (w - eta * gw) / (1.0 + eta * lam), w)
            b = b - eta * gb
            if l1_radius is not None:
                w = project_l1_ball(w, l1_radius)
        obj = hinge_objective(w, b, X, y, lam)
        if obj < best:
            best, best_w, best_b = obj, w.copy(), b
        trace.append(best)
    return FitResult(best_w, float(best_b), trace, epochs)
