"""Two-layer discrete generative models.

Four families are supported, differing in the independence structure of the
latent layer:

* ``sl``  -- single latent variable (latent class / naive Bayes form).
* ``il``  -- several latent variables, independent of each other.
* ``ci``  -- several latent variables, conditionally independent given the
  observed layer; carries a factorized recognition net.
* ``ici`` -- both independent and conditionally independent.

All four share the generative factorization
``p(x, y) = prod_i theta_i(x_i | y) * prior(y)`` where each observed variable
is conditioned on the FULL joint latent configuration. The families differ in
whether the prior factorizes per latent variable and whether a recognition
net (one conditional per latent variable given the full observation) is
carried alongside the generative parameters.
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from functools import cached_property
from pathlib import Path

import numpy as np

from .errors import DomainError, UnsupportedKindError
from .pmf import Cpt, Pmf
from .space import StateSpace

KINDS = ("sl", "il", "ci", "ici")
FACTORED_PRIOR_KINDS = ("il", "ici")
RECOGNITION_KINDS = ("ci", "ici")

MODEL_FORMAT = "lodem-model"
MODEL_FORMAT_VERSION = 1


@dataclass(frozen=True)
class ModelShape:
    """Observed and latent state spaces of a two-layer model."""

    obs_space: StateSpace
    lat_space: StateSpace

    @property
    def n_obs(self) -> int:
        return self.obs_space.n_vars

    @property
    def n_lat(self) -> int:
        return self.lat_space.n_vars


@dataclass(frozen=True, eq=False)
class GenerativeModel:
    """Immutable parameter set of one two-layer model.

    Fields
    ------
    shape : ModelShape
    kind : str
        One of ``sl``, ``il``, ``ci``, ``ici``.
    theta : tuple of Cpt
        One table per observed variable; child ``X_i``, parent the full joint
        latent configuration.
    prior : Pmf or tuple of Pmf
        Joint latent prior for ``sl``/``ci``; per-latent-variable priors for
        ``il``/``ici`` (the joint prior is their product by construction).
    recognition : tuple of Cpt or None
        For ``ci``/``ici``: one table per latent variable; child ``Y_j``,
        parent the full observation. May be None for analytically constructed
        models that are only used through their exact posterior.
    """

    shape: ModelShape
    kind: str
    theta: tuple[Cpt, ...]
    prior: Pmf | tuple[Pmf, ...]
    recognition: tuple[Cpt, ...] | None = None

    def __post_init__(self):
        if self.kind not in KINDS:
            raise DomainError(f"unknown model kind {self.kind!r}")
        obs, lat = self.shape.obs_space, self.shape.lat_space
        if self.kind == "sl" and lat.n_vars != 1:
            raise DomainError("an sl model has exactly one latent variable")
        if len(self.theta) != obs.n_vars:
            raise DomainError("need one conditional table per observed variable")
        for i, cpt in enumerate(self.theta):
            if cpt.child_space.cards != (obs.cards[i],):
                raise DomainError(f"theta[{i}] child space mismatch")
            if cpt.parent_space.cards != lat.cards:
                raise DomainError(f"theta[{i}] parent space mismatch")
        if self.kind in FACTORED_PRIOR_KINDS:
            if not isinstance(self.prior, tuple) or len(self.prior) != lat.n_vars:
                raise DomainError(f"{self.kind} needs one prior per latent variable")
            for j, pj in enumerate(self.prior):
                if pj.space.cards != (lat.cards[j],):
                    raise DomainError(f"prior[{j}] space mismatch")
        else:
            if not isinstance(self.prior, Pmf) or self.prior.space.cards != lat.cards:
                raise DomainError(f"{self.kind} needs a joint prior over the latent space")
        if self.recognition is not None:
            if self.kind not in RECOGNITION_KINDS:
                raise DomainError(f"{self.kind} models carry no recognition net")
            if len(self.recognition) != lat.n_vars:
                raise DomainError("need one recognition table per latent variable")
            for j, cpt in enumerate(self.recognition):
                if cpt.child_space.cards != (lat.cards[j],):
                    raise DomainError(f"recognition[{j}] child space mismatch")
                if cpt.parent_space.cards != obs.cards:
                    raise DomainError(f"recognition[{j}] parent space mismatch")

    # -- exact inference -------------------------------------------------

    @cached_property
    def latent_prior(self) -> Pmf:
        """Joint prior over the latent space (product of factors for il/ici)."""
        lat = self.shape.lat_space
        if self.kind in FACTORED_PRIOR_KINDS:
            joint = np.ones(1)
            for pj in self.prior:
                joint = np.kron(joint, pj.probs)
            return Pmf(lat, joint, normalize=True)
        return self.prior

    @cached_property
    def _likelihood(self) -> np.ndarray:
        """(lat_total, obs_total) table of p(x | y). Read-only."""
        obs, lat = self.shape.obs_space, self.shape.lat_space
        lik = np.ones((lat.total, obs.total))
        for i, cpt in enumerate(self.theta):
            lik *= cpt.table[:, obs.digits[:, i]]
        lik.setflags(write=False)
        return lik

    def joint(self) -> Pmf:
        """Joint over observed then latent variables (latent fastest)."""
        weighted = self._likelihood * self.latent_prior.probs[:, None]
        return Pmf(self.shape.obs_space.concat(self.shape.lat_space), weighted.T.ravel())

    def obs_marginal(self) -> Pmf:
        """Model marginal over the observed layer."""
        return Pmf(
            self.shape.obs_space,
            self.latent_prior.probs @ self._likelihood,
            normalize=True,
        )

    def posterior(self) -> Cpt:
        """Exact Bayes posterior of the latent layer given the observation.

        Rows are undefined exactly where the model assigns the observation
        zero probability.
        """
        weighted = (self._likelihood * self.latent_prior.probs[:, None]).T
        px = weighted.sum(axis=1)
        defined = px > 0
        rows = np.zeros_like(weighted)
        rows[defined] = weighted[defined] / px[defined, None]
        return Cpt(self.shape.lat_space, self.shape.obs_space, rows, defined)

    def recognition_posterior(self) -> Cpt:
        """Factorized recognition conditional: product of the per-variable nets."""
        if self.kind not in RECOGNITION_KINDS:
            raise UnsupportedKindError(
                f"{self.kind} models have no recognition net"
            )
        if self.recognition is None:
            raise UnsupportedKindError(
                "this model was built without a recognition net"
            )
        obs = self.shape.obs_space
        rows = np.ones((obs.total, 1))
        for cpt in self.recognition:
            # row-wise Kronecker product; first latent variable most significant
            rows = (rows[:, :, None] * cpt.table[:, None, :]).reshape(obs.total, -1)
        return Cpt(self.shape.lat_space, obs, rows)


def construct_expanding(base: Pmf, alpha: int) -> GenerativeModel:
    """Model whose latent space copies each observed state ``alpha`` times.

    The latent variable has ``alpha * base.space.total`` states; each block of
    ``alpha`` consecutive latent states belongs to one observed state, carrying
    its probability split evenly, so the block-uniform posterior makes the
    latent-observed dissimilarity vanish for every base distribution.
    """
    alpha = int(alpha)
    if alpha < 1:
        raise DomainError("alpha must be a positive integer")
    obs = base.space
    k_total = obs.total
    lat = StateSpace((alpha * k_total,))
    prior = np.repeat(base.probs / alpha, alpha)
    # x is a deterministic function of the latent block: point-mass rows.
    block_of = np.arange(lat.total) // alpha
    theta = []
    for i in range(obs.n_vars):
        table = np.zeros((lat.total, obs.cards[i]))
        table[np.arange(lat.total), obs.digits[block_of, i]] = 1.0
        theta.append(Cpt(StateSpace((obs.cards[i],)), lat, table))
    return GenerativeModel(
        shape=ModelShape(obs, lat),
        kind="sl",
        theta=tuple(theta),
        prior=Pmf(lat, prior, normalize=True),
    )


def construct_shrinking(base: Pmf, beta: int) -> GenerativeModel:
    """Model mapping ``beta`` consecutive observed states onto one latent state.

    The observed space is flattened to a single variable (a bijective
    relabeling, which leaves every score unchanged); callers evaluating the
    model against data should compare with ``base.flattened()`` when the base
    has several variables. The posterior is the point mass on the block map,
    so the latent-observed dissimilarity vanishes exactly when the base is
    uniform within each block.
    """
    beta = int(beta)
    if beta < 1:
        raise DomainError("beta must be a positive integer")
    k_total = base.space.total
    if k_total % beta != 0:
        raise DomainError(
            f"observed total {k_total} is not divisible by beta={beta}"
        )
    obs = StateSpace((k_total,))
    lat = StateSpace((k_total // beta,))
    block = np.arange(k_total) // beta
    prior = np.zeros(lat.total)
    np.add.at(prior, block, base.probs)
    table = np.zeros((lat.total, k_total))
    for ell in range(lat.total):
        members = block == ell
        if prior[ell] > 0:
            table[ell, members] = base.probs[members] / prior[ell]
        else:
            table[ell, members] = 1.0 / beta
    theta = (Cpt(obs, lat, table),)
    return GenerativeModel(
        shape=ModelShape(obs, lat),
        kind="sl",
        theta=theta,
        prior=Pmf(lat, prior, normalize=True),
    )


# -- serialization ---------------------------------------------------------


def model_to_dict(model: GenerativeModel) -> dict:
    """Versioned JSON-ready document with explicit table layout metadata."""
    doc = {
        "format": MODEL_FORMAT,
        "version": MODEL_FORMAT_VERSION,
        "layout": "row-major-last-variable-fastest",
        "kind": model.kind,
        "obs_cards": list(model.shape.obs_space.cards),
        "lat_cards": list(model.shape.lat_space.cards),
        "theta": [cpt.table.ravel().tolist() for cpt in model.theta],
    }
    if model.kind in FACTORED_PRIOR_KINDS:
        doc["prior"] = {
            "type": "factored",
            "probs": [pj.probs.tolist() for pj in model.prior],
        }
    else:
        doc["prior"] = {"type": "joint", "probs": model.prior.probs.tolist()}
    if model.recognition is not None:
        doc["recognition"] = [cpt.table.ravel().tolist() for cpt in model.recognition]
    else:
        doc["recognition"] = None
    return doc


def model_from_dict(doc: dict) -> GenerativeModel:
    if doc.get("format") != MODEL_FORMAT:
        raise DomainError(f"not a model document: format={doc.get('format')!r}")
    if doc.get("version") != MODEL_FORMAT_VERSION:
        raise DomainError(f"unsupported model document version {doc.get('version')!r}")
    obs = StateSpace(doc["obs_cards"])
    lat = StateSpace(doc["lat_cards"])
    kind = doc["kind"]
    theta = tuple(
        Cpt(StateSpace((obs.cards[i],)), lat, np.asarray(flat).reshape(lat.total, obs.cards[i]))
        for i, flat in enumerate(doc["theta"])
    )
    pr = doc["prior"]
    if pr["type"] == "factored":
        prior = tuple(
            Pmf(StateSpace((lat.cards[j],)), pj) for j, pj in enumerate(pr["probs"])
        )
    else:
        prior = Pmf(lat, pr["probs"])
    rec_doc = doc.get("recognition")
    recognition = None
    if rec_doc is not None:
        recognition = tuple(
            Cpt(StateSpace((lat.cards[j],)), obs, np.asarray(flat).reshape(obs.total, lat.cards[j]))
            for j, flat in enumerate(rec_doc)
        )
    return GenerativeModel(
        shape=ModelShape(obs, lat),
        kind=kind,
        theta=theta,
        prior=prior,
        recognition=recognition,
    )


def save_model(model: GenerativeModel, path: str | Path) -> None:
    Path(path).write_text(json.dumps(model_to_dict(model)))


def load_model(path: str | Path) -> GenerativeModel:
    return model_from_dict(json.loads(Path(path).read_text()))
