"""Scikit-learn style estimators over the distribution-level trainers.

These wrap the exact trainers behind the familiar ``fit`` / ``score`` /
``predict_proba`` / ``transform`` surface so the models compose with
pipelines and model-selection utilities. ``X`` is an integer array of shape
``(n_samples, n_vars)`` holding discrete states; an
:class:`~lodem.ingestion.EmpiricalDataset` or a :class:`~lodem.pmf.Pmf` is
accepted too, since at these state-space sizes the empirical distribution is
a sufficient statistic.
"""

from __future__ import annotations

import numpy as np
from sklearn.base import BaseEstimator

from .errors import DomainError
from .ingestion import EmpiricalDataset
from .measures import EvalScores, evaluate_model, loglik
from .models import ModelShape
from .pmf import Pmf
from .space import StateSpace
from .training import TrainConfig, fit_model

__all__ = ["SLModel", "ILModel", "CIModel", "ICIModel"]


def _samples_to_pmf(X, cards: tuple[int, ...] | None) -> Pmf:
    """Empirical distribution of an integer sample matrix."""
    X = np.asarray(X)
    if X.ndim != 2 or X.shape[0] < 1:
        raise DomainError("X must be a (n_samples, n_vars) array")
    if not np.issubdtype(X.dtype, np.integer):
        rounded = np.rint(X)
        if not np.allclose(X, rounded):
            raise DomainError("X must hold integer states")
        X = rounded.astype(np.int64)
    if np.any(X < 0):
        raise DomainError("states must be non-negative")
    if cards is None:
        cards = tuple(int(c) for c in X.max(axis=0) + 1)
    if len(cards) != X.shape[1]:
        raise DomainError(f"X has {X.shape[1]} columns, expected {len(cards)}")
    space = StateSpace(cards)
    for i, card in enumerate(cards):
        if X[:, i].max() >= card:
            raise DomainError(f"column {i} has states >= cardinality {card}")
    flat = np.zeros(X.shape[0], dtype=np.int64)
    for i, card in enumerate(cards):
        flat = flat * card + X[:, i]
    counts = np.bincount(flat, minlength=space.total)
    return Pmf(space, counts / X.shape[0])


class _TwoLayerBase(BaseEstimator):
    """Shared machinery; subclasses fix the model family and its latent shape."""

    _kind = ""

    def _latent_cards(self) -> tuple[int, ...]:
        raise NotImplementedError

    def _as_pmf(self, X, *, reset: bool) -> Pmf:
        if isinstance(X, Pmf):
            pmf = X
        elif isinstance(X, EmpiricalDataset):
            pmf = X.pmf
        else:
            cards = None
            if not reset and hasattr(self, "obs_cards_"):
                cards = self.obs_cards_
            elif self.obs_cards is not None:
                cards = tuple(int(c) for c in self.obs_cards)
            pmf = _samples_to_pmf(X, cards)
        if not reset and hasattr(self, "obs_cards_"):
            if pmf.space.cards != self.obs_cards_:
                raise DomainError(
                    f"X is over cards {pmf.space.cards}, fitted on {self.obs_cards_}"
                )
        return pmf

    def _config(self) -> TrainConfig:
        return TrainConfig(
            max_iters=self.max_iter,
            tol=self.tol,
            restarts=self.restarts,
            seed=self.random_state,
            init_concentration=self.init_concentration,
        )

    def fit(self, X, y=None):
        """Fit on integer samples (or a distribution) by best-of-restarts."""
        pmf = self._as_pmf(X, reset=True)
        shape = ModelShape(pmf.space, StateSpace(self._latent_cards()))
        self.model_, self.report_ = fit_model(self._kind, shape, pmf, self._config())
        self.obs_cards_ = pmf.space.cards
        self.loglik_ = self.report_.final_loglik
        self.n_iter_ = self.report_.iters_run
        self.converged_ = self.report_.converged
        return self

    def _check_fitted(self):
        if not hasattr(self, "model_"):
            raise DomainError("this estimator is not fitted yet; call fit first")

    def score(self, X, y=None) -> float:
        """Average log likelihood per sample, in nats."""
        self._check_fitted()
        return loglik(self.model_, self._as_pmf(X, reset=False))

    def predict_proba(self, X) -> np.ndarray:
        """Posterior over joint latent configurations, one row per sample."""
        self._check_fitted()
        X = np.asarray(X)
        if X.ndim != 2 or X.shape[1] != len(self.obs_cards_):
            raise DomainError(
                f"X must be a (n_samples, {len(self.obs_cards_)}) array"
            )
        if not np.issubdtype(X.dtype, np.integer):
            rounded = np.rint(X)
            if not np.allclose(X, rounded):
                raise DomainError("X must hold integer states")
            X = rounded.astype(np.int64)
        flat = np.zeros(X.shape[0], dtype=np.int64)
        for i, card in enumerate(self.obs_cards_):
            col = X[:, i].astype(np.int64)
            if np.any((col < 0) | (col >= card)):
                raise DomainError(f"column {i} has states outside 0..{card - 1}")
            flat = flat * card + col
        rows = self.model_.posterior().rows_or_uniform()
        return rows[flat]

    def transform(self, X) -> np.ndarray:
        """Latent representation: alias of :meth:`predict_proba`."""
        return self.predict_proba(X)

    def predict(self, X) -> np.ndarray:
        """Most probable joint latent configuration per sample (flat index)."""
        return self.predict_proba(X).argmax(axis=1)

    def evaluate(self, X) -> EvalScores:
        """Log likelihood, mutual information and LOD on the given data."""
        self._check_fitted()
        return evaluate_model(self.model_, self._as_pmf(X, reset=False))


class SLModel(_TwoLayerBase):
    """Single latent variable with ``n_states`` states (latent class model)."""

    _kind = "sl"

    def __init__(
        self,
        n_states=2,
        *,
        restarts=20,
        max_iter=1000,
        tol=1e-8,
        init_concentration=1.0,
        random_state=0,
        obs_cards=None,
    ):
        self.n_states = n_states
        self.restarts = restarts
        self.max_iter = max_iter
        self.tol = tol
        self.init_concentration = init_concentration
        self.random_state = random_state
        self.obs_cards = obs_cards

    def _latent_cards(self):
        return (int(self.n_states),)


class _MultiLatentBase(_TwoLayerBase):
    def __init__(
        self,
        n_latent_vars=1,
        latent_card=2,
        *,
        restarts=20,
        max_iter=1000,
        tol=1e-8,
        init_concentration=1.0,
        random_state=0,
        obs_cards=None,
    ):
        self.n_latent_vars = n_latent_vars
        self.latent_card = latent_card
        self.restarts = restarts
        self.max_iter = max_iter
        self.tol = tol
        self.init_concentration = init_concentration
        self.random_state = random_state
        self.obs_cards = obs_cards

    def _latent_cards(self):
        return (int(self.latent_card),) * int(self.n_latent_vars)


class ILModel(_MultiLatentBase):
    """Latent variables independent of each other (factorized prior)."""

    _kind = "il"


class CIModel(_MultiLatentBase):
    """Latent variables conditionally independent given the observation.

    Fit by exact-expectation wake-sleep; carries a factorized recognition net.
    """

    _kind = "ci"


class ICIModel(_MultiLatentBase):
    """Both independent and conditionally independent latent variables."""

    _kind = "ici"
