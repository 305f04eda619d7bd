"""Greedy higher-layer learning on top of a trained two-layer model.

A lower model's exact posterior acts as an encoder: pushing the data
distribution through it yields a distribution over the latent layer, on which
a higher single-latent model is fit. Scores for the resulting three-layer
chain are computed under the connected distribution
``p(x, y, z) = pdata(x) * p_lower(y | x) * p_higher(z | y)``, i.e. both
models are used as encoders.

Lower single-latent models first have their one L-state variable re-coded as
``log2(L)`` binary variables through a bijection, chosen among random
candidates by the achievable higher-model log likelihood.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .errors import DomainError
from .measures import EvalScores
from .models import GenerativeModel, ModelShape
from .pmf import FLOOR, Cpt, Pmf
from .space import StateSpace
from .training import TrainConfig, TrainReport, em_fit

__all__ = [
    "Bijection",
    "StackedModel",
    "pushforward_latent",
    "encoder_scores",
    "convert_sl_latent",
    "sl_to_binary",
    "fit_higher",
    "connected_scores",
]


@dataclass(frozen=True)
class Bijection:
    """Permutation sending each single-variable latent state to a bit code."""

    perm: tuple[int, ...]

    def __post_init__(self):
        n = len(self.perm)
        if n < 1 or (n & (n - 1)) != 0:
            raise DomainError("bijection size must be a power of two")
        if sorted(self.perm) != list(range(n)):
            raise DomainError("bijection must be a permutation of 0..n-1")

    @property
    def n_bits(self) -> int:
        return int(math.log2(len(self.perm)))

    def inverse(self) -> "Bijection":
        inv = [0] * len(self.perm)
        for source, target in enumerate(self.perm):
            inv[target] = source
        return Bijection(tuple(inv))


@dataclass(frozen=True, eq=False)
class StackedModel:
    """A lower model, an optional recoding bijection, and a higher sl model.

    ``lower`` is the (possibly already recoded) two-layer model; ``higher``
    is a single-latent model whose observed space is the lower latent space.
    """

    lower: GenerativeModel
    higher: GenerativeModel
    pdata: Pmf
    bijection: Bijection | None = None

    def __post_init__(self):
        if self.higher.shape.obs_space.cards != self.lower.shape.lat_space.cards:
            raise DomainError(
                "higher model must observe the lower model's latent space"
            )
        if self.pdata.space.cards != self.lower.shape.obs_space.cards:
            raise DomainError("pdata is over a different observed space")


def pushforward_latent(lower: GenerativeModel, pdata: Pmf) -> Pmf:
    """Data distribution pushed through the lower model's exact posterior."""
    if pdata.space.cards != lower.shape.obs_space.cards:
        raise DomainError("pdata is over a different observed space")
    rows = lower.posterior().rows_or_uniform()
    return Pmf(lower.shape.lat_space, pdata.probs @ rows, normalize=True)


def encoder_scores(encoder_rows: np.ndarray, pdata: Pmf) -> tuple[float, float]:
    """(lod, mi) of an encoder chain under the data distribution.

    ``encoder_rows[x]`` is the code distribution given observation ``x``.
    Both scores use the data-weighted code marginal, which is the marginal of
    the connected chain distribution.
    """
    pvec = pdata.probs
    if encoder_rows.shape[0] != pvec.size:
        raise DomainError("encoder rows do not match the observed space")
    code_marginal = pvec @ encoder_rows
    log_marginal = np.log(np.maximum(code_marginal, FLOOR))
    f = -(encoder_rows @ log_marginal)
    m = float(np.max(-f))
    log_c = m + float(np.log(np.sum(np.exp(-f - m))))
    q = np.exp(-f - log_c)
    mask = pvec > 0
    lod = float(np.sum(pvec[mask] * (np.log(pvec[mask]) - np.log(np.maximum(q[mask], FLOOR)))))
    mi = 0.0
    for x in np.flatnonzero(mask):
        row = encoder_rows[x]
        pos = row > 0
        mi += float(pvec[x]) * float(
            np.sum(row[pos] * (np.log(row[pos]) - log_marginal[pos]))
        )
    return max(lod, 0.0), max(mi, 0.0)


def convert_sl_latent(lower: GenerativeModel, bijection: Bijection) -> GenerativeModel:
    """Recode an sl model's latent variable as bits; same distribution on X.

    The result keeps a joint (unfactorized) prior over the bit variables and
    carries no recognition net; it is meant to be used through its exact
    posterior.
    """
    if lower.kind != "sl":
        raise DomainError("only sl models need latent recoding")
    l_total = lower.shape.lat_space.total
    if len(bijection.perm) != l_total:
        raise DomainError(
            f"bijection over {len(bijection.perm)} states, model has {l_total}"
        )
    m = bijection.n_bits
    new_lat = StateSpace((2,) * m)
    perm = np.asarray(bijection.perm)
    inv = np.empty_like(perm)
    inv[perm] = np.arange(l_total)
    theta = tuple(
        Cpt(cpt.child_space, new_lat, cpt.table[inv])
        for cpt in lower.theta
    )
    prior = Pmf(new_lat, lower.latent_prior.probs[inv])
    return GenerativeModel(
        shape=ModelShape(lower.shape.obs_space, new_lat),
        kind="ci",
        theta=theta,
        prior=prior,
        recognition=None,
    )


def _random_bijections(size: int, count: int, seed: int) -> list[Bijection]:
    rng = np.random.default_rng(np.random.SeedSequence([seed, size]))
    return [Bijection(tuple(int(v) for v in rng.permutation(size))) for _ in range(count)]


def sl_to_binary(
    lower: GenerativeModel,
    pdata: Pmf,
    candidates: int | list[Bijection] = 20,
    config: TrainConfig = TrainConfig(),
) -> tuple[GenerativeModel, Bijection]:
    """Pick a latent-to-bits recoding for an sl model and apply it.

    Each candidate bijection relabels the pushed-forward latent distribution;
    a higher model with a single binary latent is fit on it and the candidate
    with the best achieved log likelihood wins (ties go to the
    lexicographically smallest permutation). All candidates give the same
    generative model for X, so the choice only matters for higher layers.
    """
    if lower.kind != "sl":
        raise DomainError("sl_to_binary applies to sl models only")
    l_total = lower.shape.lat_space.total
    if l_total < 2 or (l_total & (l_total - 1)) != 0:
        raise DomainError(f"latent state count {l_total} is not a power of two")
    if isinstance(candidates, int):
        if candidates < 1:
            raise DomainError("need at least one candidate bijection")
        pool = _random_bijections(l_total, candidates, config.seed)
    else:
        pool = list(candidates)
        if not pool:
            raise DomainError("need at least one candidate bijection")
    m = int(math.log2(l_total))
    lat_pdata = pushforward_latent(lower, pdata).probs
    bit_space = StateSpace((2,) * m)
    best: tuple[float, tuple[int, ...]] | None = None
    winner = pool[0]
    for candidate in pool:
        perm = np.asarray(candidate.perm)
        relabeled = np.empty_like(lat_pdata)
        relabeled[perm] = lat_pdata
        _, report = em_fit(
            "sl",
            ModelShape(bit_space, StateSpace((2,))),
            Pmf(bit_space, relabeled, normalize=True),
            config,
        )
        key = (report.final_loglik, candidate.perm)
        if best is None or key[0] > best[0] + 1e-12 or (
            abs(key[0] - best[0]) <= 1e-12 and key[1] < best[1]
        ):
            best = key
            winner = candidate
    return convert_sl_latent(lower, winner), winner


def fit_higher(
    latent_pdata: Pmf, k_z: int, config: TrainConfig = TrainConfig()
) -> tuple[GenerativeModel, TrainReport]:
    """Fit a single-latent model on a latent-layer distribution.

    The lower latent variables are re-cast as observations; the new latent
    variable has ``k_z`` states.
    """
    if k_z < 1:
        raise DomainError("k_z must be >= 1")
    shape = ModelShape(latent_pdata.space, StateSpace((k_z,)))
    return em_fit("sl", shape, latent_pdata, config)


def connected_scores(stacked: StackedModel) -> EvalScores:
    """Observation-to-top scores of the connected three-layer chain.

    ``mi`` and ``lod`` describe the composite encoder
    ``p(z | x) = sum_y p_higher(z | y) p_lower(y | x)``; ``loglik`` is the
    higher model's objective, the expected log likelihood of the
    pushed-forward latent distribution.
    """
    lower_rows = stacked.lower.posterior().rows_or_uniform()
    higher_rows = stacked.higher.posterior().rows_or_uniform()
    composite = lower_rows @ higher_rows
    lod_xz, mi_xz = encoder_scores(composite, stacked.pdata)
    lat_pdata = Pmf(
        stacked.lower.shape.lat_space,
        stacked.pdata.probs @ lower_rows,
        normalize=True,
    )
    higher_px = stacked.higher.obs_marginal().probs
    mask = lat_pdata.probs > 0
    higher_ll = float(
        np.sum(lat_pdata.probs[mask] * np.log(np.maximum(higher_px[mask], FLOOR)))
    )
    return EvalScores(loglik=higher_ll, mi=mi_xz, lod=lod_xz)
