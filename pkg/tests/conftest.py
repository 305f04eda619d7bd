"""Shared builders for the test suite."""

import numpy as np
import pytest

from lodem.models import GenerativeModel, ModelShape
from lodem.pmf import Cpt, Pmf
from lodem.space import StateSpace


@pytest.fixture
def six_state():
    """The single-variable reference distribution (1..6)/21."""
    return Pmf(StateSpace((6,)), np.arange(1, 7) / 21.0)


def deterministic_sl(pdata: Pmf, assignment, n_latent: int) -> GenerativeModel:
    """Single-latent model whose posterior is the given deterministic map."""
    obs = pdata.space
    lat = StateSpace((n_latent,))
    assignment = np.asarray(assignment)
    prior = np.zeros(n_latent)
    np.add.at(prior, assignment, pdata.probs)
    table = np.full((n_latent, obs.total), 1.0 / obs.total)
    for y in range(n_latent):
        members = assignment == y
        if prior[y] > 0:
            table[y] = 0.0
            table[y, members] = pdata.probs[members] / prior[y]
    return GenerativeModel(
        shape=ModelShape(obs, lat),
        kind="sl",
        theta=(Cpt(obs, lat, table),),
        prior=Pmf(lat, prior, normalize=True),
    )


def random_pmf(rng: np.random.Generator, space: StateSpace, concentration=1.0) -> Pmf:
    return Pmf(space, rng.dirichlet(np.full(space.total, concentration)))


def grouped_reference_model(pdata: Pmf) -> GenerativeModel:
    """The LOD-optimal deterministic grouping of the reference example."""
    return deterministic_sl(pdata, [0, 0, 1, 1, 2, 2], 3)


def balanced_reference_model(pdata: Pmf) -> GenerativeModel:
    """The MI-optimal deterministic grouping of the reference example."""
    return deterministic_sl(pdata, [0, 1, 2, 2, 1, 0], 3)
