"""Evaluation quantities for two-layer models: LOD, mutual information, loglik.

The latent-observed dissimilarity (LOD) compares the data distribution with a
virtual distribution ``q`` built from the expected self-information of the
latent layer given each observation:

    f(x) = -sum_y p(y|x) ln p(y)          (expected latent surprise)
    q(x) = exp(-f(x)) / C                 (normalized over ALL observations)
    LOD  = D(pdata || q)

``q`` normalizes over the full observed space, so ``f`` must be defined
everywhere: observations the model assigns zero probability get the
clamped (uniform) posterior row in smoothing mode, or raise in strict mode.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import DomainError, SupportError
from .models import GenerativeModel
from .pmf import FLOOR, Pmf, kl_divergence

__all__ = [
    "LatentSurprise",
    "EvalScores",
    "expected_latent_information",
    "lod",
    "mi_data",
    "model_mi",
    "loglik",
    "evaluate_model",
]


@dataclass(frozen=True, eq=False)
class LatentSurprise:
    """Expected latent information per observed state, and its softmin pmf.

    ``q.probs[x] == exp(-f[x] - log_normalizer)`` for every x.
    """

    f: np.ndarray
    q: Pmf
    log_normalizer: float


@dataclass(frozen=True)
class EvalScores:
    """Per-model evaluation record, all in nats."""

    loglik: float
    mi: float
    lod: float

    def __post_init__(self):
        if self.mi < 0 or self.lod < 0:
            raise DomainError("mutual information and LOD are non-negative")


def _check_pdata(model: GenerativeModel, pdata: Pmf | None) -> None:
    if pdata is not None and pdata.space.cards != model.shape.obs_space.cards:
        raise DomainError("data distribution is over a different observed space")


def _posterior_rows(
    model: GenerativeModel, *, strict: bool, use_recognition: bool = False
) -> np.ndarray:
    """Dense posterior rows with the undefined-row policy applied."""
    if use_recognition:
        return model.recognition_posterior().rows_or_uniform()
    post = model.posterior()
    if strict and not np.all(post.defined):
        idx = int(np.flatnonzero(~post.defined)[0])
        raise SupportError(
            f"posterior undefined at observed state {idx} (model gives it "
            "zero probability)",
            idx,
        )
    return post.rows_or_uniform()


def expected_latent_information(
    model: GenerativeModel,
    pdata: Pmf | None = None,
    *,
    strict: bool = False,
    use_recognition: bool = False,
) -> LatentSurprise:
    """Compute f, q and ln C for a model.

    ``f`` and ``q`` depend only on the model; ``pdata`` is accepted for
    interface symmetry with the scores and is only checked for compatibility.
    """
    _check_pdata(model, pdata)
    rows = _posterior_rows(model, strict=strict, use_recognition=use_recognition)
    log_prior = np.log(np.maximum(model.latent_prior.probs, FLOOR))
    f = -(rows @ log_prior)
    # log-sum-exp for C = sum_x exp(-f(x)); keeps q stable when f is large
    m = float(np.max(-f))
    log_c = m + float(np.log(np.sum(np.exp(-f - m))))
    q = Pmf(model.shape.obs_space, np.exp(-f - log_c), normalize=True)
    f.setflags(write=False)
    return LatentSurprise(f=f, q=q, log_normalizer=log_c)


def lod(
    model: GenerativeModel,
    pdata: Pmf,
    *,
    strict: bool = False,
    use_recognition: bool = False,
) -> float:
    """Latent-observed dissimilarity D(pdata || q), in nats."""
    surprise = expected_latent_information(
        model, pdata, strict=strict, use_recognition=use_recognition
    )
    return kl_divergence(pdata, surprise.q, strict=strict)


def _weighted_posterior_divergence(
    model: GenerativeModel,
    weights: np.ndarray,
    *,
    strict: bool,
    use_recognition: bool = False,
) -> float:
    """sum_x w(x) D(p(Y|x) || p(Y)) over the support of w."""
    rows = _posterior_rows(model, strict=strict, use_recognition=use_recognition)
    prior = model.latent_prior.probs
    total = 0.0
    for x in np.flatnonzero(weights > 0):
        row = rows[x]
        mask = row > 0
        total += float(weights[x]) * float(
            np.sum(row[mask] * (np.log(row[mask]) - np.log(np.maximum(prior[mask], FLOOR))))
        )
    return max(total, 0.0)


def mi_data(
    model: GenerativeModel,
    pdata: Pmf,
    *,
    strict: bool = False,
    use_recognition: bool = False,
) -> float:
    """Data-based mutual information between observation and latent layer.

    Averages the posterior-to-prior divergence under the data distribution;
    observed states with zero data mass contribute nothing.
    """
    _check_pdata(model, pdata)
    if strict:
        post = model.posterior()
        undef = ~post.defined & (pdata.probs > 0)
        if np.any(undef):
            idx = int(np.flatnonzero(undef)[0])
            raise SupportError(
                f"posterior undefined at observed state {idx} inside the data support",
                idx,
            )
    return _weighted_posterior_divergence(
        model, pdata.probs, strict=False, use_recognition=use_recognition
    )


def model_mi(model: GenerativeModel, *, strict: bool = False) -> float:
    """Mutual information of the model's own joint (weights by its marginal)."""
    weights = model.obs_marginal().probs
    return _weighted_posterior_divergence(model, weights, strict=strict)


def loglik(model: GenerativeModel, pdata: Pmf, *, strict: bool = False) -> float:
    """Expected log likelihood per sample, sum_x pdata(x) ln p(x), in nats."""
    _check_pdata(model, pdata)
    px = model.obs_marginal().probs
    mask = pdata.probs > 0
    if strict:
        bad = np.flatnonzero(mask & (px == 0.0))
        if bad.size:
            idx = int(bad[0])
            raise SupportError(
                f"model gives zero probability to observed state {idx} in the data",
                idx,
            )
    return float(np.sum(pdata.probs[mask] * np.log(np.maximum(px[mask], FLOOR))))


def evaluate_model(model: GenerativeModel, pdata: Pmf, *, strict: bool = False) -> EvalScores:
    """Log likelihood, data-based MI, and LOD for one model."""
    return EvalScores(
        loglik=loglik(model, pdata, strict=strict),
        mi=mi_data(model, pdata, strict=strict),
        lod=lod(model, pdata, strict=strict),
    )
