"""Planted cohorts: low-rank nonnegative expression tensors with recursive labels.

Labels follow a planted linear rule on the measured (noisy, unmasked)
profiles plus a feedback term, with temporal persistence:

    y[i, 0] = sign(s[i, 0])
    y[i, t] = y[i, t-1]                               with prob. persistence
            = sign(s[i, t] + feedback_weight * ytil[i, t])   otherwise

where ``s[i, t] = (w' x[i, :, t] - m) / std`` with ``m`` the median of
``w' x`` over patients at the first time point, and
``ytil`` is the cumulative sum of earlier labels. Sign(0) is +1. Because the
rule reads the measured profiles, the noise carries label signal that a
low-rank model cannot reproduce, so hiding entries costs accuracy.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .. import rng as rngmod
from ..completion import check_identifiable
from ..errors import ConfigError, RepError
from ..predictor import ResponseMatrix
from ..tensor import CpModel, MaskedTensor, reconstruct


@dataclass(frozen=True)
class SyntheticSpec:
    I: int = 30
    J: int = 50
    K: int = 7
    F: int = 3
    noise_std: float = 0.03
    missing_rate: float = 0.0
    persistence: float = 0.8
    feedback_weight: float = 1.0
    seed: int = 0

    def __post_init__(self):
        if min(self.I, self.J, self.K, self.F) < 1:
            raise ConfigError("dimensions and rank must be positive")
        if not 0 <= self.missing_rate < 1:
            raise ConfigError("missing_rate must lie in [0, 1)")
        if not 0 <= self.persistence <= 1:
            raise ConfigError("persistence must lie in [0, 1]")
        if self.noise_std < 0:
            raise ConfigError("noise_std must be nonnegative")


@dataclass(frozen=True, eq=False)
class PlantedRule:
    gene_weights: np.ndarray
    feedback_weight: float
    center: float
    scale: float


@dataclass(frozen=True, eq=False)
class SyntheticCohort:
    tensor: MaskedTensor
    labels: ResponseMatrix
    truth: CpModel
    rule: PlantedRule

    def __iter__(self):
        return iter((self.tensor, self.labels, self.truth, self.rule))


def _sign(x):
    return np.where(x >= 0, 1, -1)


def _labels(X, w, c, persistence, gen):
    I, J, K = X.shape
    raw = np.einsum("ijk,j->ik", X, w)
    center = float(np.median(raw[:, 0]))
    spread = float(np.std(raw - center))
    scale = spread if spread > 0 else 1.0
    s = (raw - center) / scale
    keep = gen.uniform(size=(I, K)) < persistence
    y = np.zeros((I, K), dtype=int)
    y[:, 0] = _sign(s[:, 0])
    ytil = np.zeros(I)
    for t in range(1, K):
        ytil = ytil + y[:, t - 1]
        fresh = _sign(s[:, t] + c * ytil)
        y[:, t] = np.where(keep[:, t], y[:, t - 1], fresh)
    return y, center, scale


def generate_synthetic(spec: SyntheticSpec, max_redraws: int = 50) -> SyntheticCohort:
    """Draw a planted cohort. Deterministic per ``spec.seed``.

    The gene-weight vector is redrawn until the positive-label fraction lies
    in [0.3, 0.7].
    """
    gen = rngmod.stream(spec.seed, "synth")
    truth = CpModel(
        gen.uniform(size=(spec.I, spec.F)),
        gen.uniform(size=(spec.J, spec.F)),
        gen.uniform(size=(spec.K, spec.F)),
    )
    G = reconstruct(truth)
    X = G
    if spec.noise_std > 0:
        X = np.maximum(G + spec.noise_std * gen.standard_normal(G.shape), 0.0)

    for _ in range(max_redraws):
        w = gen.standard_normal(spec.J)
        y, center, scale = _labels(X, w, spec.feedback_weight, spec.persistence, gen)
        if 0.3 <= np.mean(y == 1) <= 0.7:
            break
    else:
        raise RepError("could not draw a class-balanced planted rule")

    mgen = rngmod.stream(spec.seed, "masking")
    for _ in range(max_redraws):
        mask = mgen.uniform(size=G.shape) >= spec.missing_rate
        tensor = MaskedTensor(X, mask)
        try:
            check_identifiable(tensor, 1)
            break
        except RepError:
            continue
    else:
        raise RepError("could not draw a mask leaving every slab observed")

    return SyntheticCohort(
        tensor=tensor,
        labels=ResponseMatrix(y, tuple(f"P{i + 1:03d}" for i in range(spec.I))),
        truth=truth,
        rule=PlantedRule(w, spec.feedback_weight, center, scale),
    )
