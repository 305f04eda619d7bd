"""Parameter fitting for the four model families.

``sl`` and ``il`` models are fit with EM. ``ci`` and ``ici`` models are fit
with a wake-sleep scheme in exact-expectation form: every expectation a
sampled wake-sleep run would estimate is computed in closed form over the
full (small) state space, which removes sampling noise and makes runs
reproducible bit for bit.

Each wake phase re-estimates the generative tables from the data completed
by the factorized recognition net; each sleep phase resets every recognition
table to the matching per-variable marginal of the exact generative
posterior, which is the KL-optimal factorized recognition. The recognition
net is also initialized this way before the first wake phase, so with a
single latent variable (where factorization is no restriction) a wake-sleep
run retraces the EM run exactly.

All fits use multiple random restarts with best-log-likelihood selection.
Restart k draws its initial tables from a generator derived from (seed, k),
and the restarts evolve independently (they are batched along a leading
axis purely for speed), so execution order can never change the outcome.
"""

from __future__ import annotations

import csv
import json
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .errors import DomainError
from .models import (
    FACTORED_PRIOR_KINDS,
    KINDS,
    RECOGNITION_KINDS,
    GenerativeModel,
    ModelShape,
)
from .pmf import FLOOR, Cpt, Pmf
from .space import StateSpace

EM_KINDS = ("sl", "il")

# Restart logliks this close are ties; the earliest restart wins.
_TIE_TOL = 1e-12

_TINY = 1e-300


@dataclass(frozen=True)
class TrainConfig:
    """Knobs shared by both trainers."""

    max_iters: int = 1000
    tol: float = 1e-8
    restarts: int = 20
    seed: int = 0
    init_concentration: float = 1.0
    mode: str = "auto"  # "auto" | "em" | "wake_sleep"

    def __post_init__(self):
        if self.max_iters < 1:
            raise DomainError("max_iters must be >= 1")
        if not self.tol > 0:
            raise DomainError("tol must be positive")
        if self.restarts < 1:
            raise DomainError("restarts must be >= 1")
        if self.seed < 0:
            raise DomainError("seed must be non-negative")
        if not self.init_concentration > 0:
            raise DomainError("init_concentration must be positive")
        if self.mode not in ("auto", "em", "wake_sleep"):
            raise DomainError(f"unknown mode {self.mode!r}")


@dataclass(frozen=True)
class TrainReport:
    """Outcome of one multi-restart fit (trace fields are for the winner)."""

    final_loglik: float
    iters_run: int
    loglik_trace: tuple[float, ...]
    restart_index_selected: int
    converged: bool
    restart_logliks: tuple[float, ...] = field(default=())
    recognition_gap: float | None = None

    def to_json_dict(self) -> dict:
        return {
            "final_loglik": self.final_loglik,
            "iters_run": self.iters_run,
            "loglik_trace": list(self.loglik_trace),
            "restart_index_selected": self.restart_index_selected,
            "converged": self.converged,
            "restart_logliks": list(self.restart_logliks),
            "recognition_gap": self.recognition_gap,
        }

    def save_json(self, path: str | Path) -> None:
        Path(path).write_text(json.dumps(self.to_json_dict()))

    def save_trace_csv(self, path: str | Path) -> None:
        with open(path, "w", newline="") as fh:
            writer = csv.writer(fh)
            writer.writerow(["iteration", "loglik"])
            for i, value in enumerate(self.loglik_trace):
                writer.writerow([i, repr(value)])


def _restart_rng(seed: int, restart: int) -> np.random.Generator:
    return np.random.default_rng(np.random.SeedSequence([seed, restart]))


class _Batch:
    """All restarts' mutable tables, stacked along a leading axis.

    The batching is an implementation detail: every update is elementwise or
    a per-restart matmul, so each restart evolves exactly as it would alone.
    """

    def __init__(self, shape: ModelShape, kind: str, pdata: Pmf, n_restarts: int):
        self.shape = shape
        self.kind = kind
        self.n = n_restarts
        obs, lat = shape.obs_space, shape.lat_space
        self.pvec = pdata.probs
        self._data_mask = self.pvec > 0
        self._pvec_live = self.pvec[self._data_mask]
        # one-hot groupers: column sums by digit value, per variable
        self.obs_onehot = [
            (obs.digits[:, i][:, None] == np.arange(obs.cards[i])[None, :]).astype(float)
            for i in range(obs.n_vars)
        ]
        self.lat_onehot = [
            (lat.digits[:, j][:, None] == np.arange(lat.cards[j])[None, :]).astype(float)
            for j in range(lat.n_vars)
        ]
        self.theta: list[np.ndarray] = []  # each (n, lat_total, K_i)
        self.prior_joint: np.ndarray | None = None  # (n, lat_total)
        self.prior_factors: list[np.ndarray] | None = None  # each (n, L_j)
        self.psi: list[np.ndarray] | None = None  # each (n, obs_total, L_j)

    def init_random(self, rngs: list[np.random.Generator], concentration: float) -> None:
        obs, lat = self.shape.obs_space, self.shape.lat_space
        self.theta = [
            np.stack([
                rng.dirichlet(np.full(obs.cards[i], concentration), size=lat.total)
                for rng in rngs
            ])
            for i in range(obs.n_vars)
        ]
        if self.kind in FACTORED_PRIOR_KINDS:
            self.prior_factors = [
                np.stack([
                    rng.dirichlet(np.full(lat.cards[j], concentration)) for rng in rngs
                ])
                for j in range(lat.n_vars)
            ]
        else:
            self.prior_joint = np.stack(
                [rng.dirichlet(np.full(lat.total, concentration)) for rng in rngs]
            )
        if self.kind in RECOGNITION_KINDS:
            self.psi = [
                np.stack([
                    rng.dirichlet(np.full(lat.cards[j], concentration), size=obs.total)
                    for rng in rngs
                ])
                for j in range(lat.n_vars)
            ]

    def prior_vector(self) -> np.ndarray:
        """(n, lat_total) joint prior per restart."""
        if self.kind in FACTORED_PRIOR_KINDS:
            joint = np.ones((self.n, 1))
            for factor in self.prior_factors:
                joint = (joint[:, :, None] * factor[:, None, :]).reshape(self.n, -1)
            return joint
        return self.prior_joint

    def likelihood(self) -> np.ndarray:
        """(n, lat_total, obs_total) table of p(x | y) per restart."""
        obs = self.shape.obs_space
        lik = np.ones((self.n, self.shape.lat_space.total, obs.total))
        for i, table in enumerate(self.theta):
            lik *= table[:, :, obs.digits[:, i]]
        return lik

    def e_step(self) -> tuple[np.ndarray, np.ndarray]:
        """Posterior rows (n, obs_total, lat_total) and logliks (n,).

        Posterior rows where the model gives the observation zero probability
        are filled uniformly (the smoothing-mode reading).
        """
        weighted = self.likelihood() * self.prior_vector()[:, :, None]
        weighted = weighted.transpose(0, 2, 1)  # (n, obs, lat)
        px = weighted.sum(axis=2)
        lls = (self._pvec_live * np.log(np.maximum(px[:, self._data_mask], FLOOR))).sum(axis=1)
        rows = np.where(
            px[:, :, None] > 0,
            weighted / np.maximum(px, _TINY)[:, :, None],
            1.0 / weighted.shape[2],
        )
        return rows, lls

    def m_step(self, post: np.ndarray, active: np.ndarray) -> None:
        """Re-estimate theta and prior from data completed by ``post``.

        Only restarts flagged in ``active`` change; within them, latent
        configurations carrying no mass keep their previous theta rows.
        """
        wt = (self.pvec[None, :, None] * post).transpose(0, 2, 1)  # (n, lat, obs)
        mass_y = wt.sum(axis=2)  # (n, lat)
        update = (mass_y > 0) & active[:, None]
        for i, onehot in enumerate(self.obs_onehot):
            counts = wt @ onehot  # (n, lat, K_i)
            fresh = counts / np.maximum(mass_y, _TINY)[:, :, None]
            self.theta[i] = np.where(update[:, :, None], fresh, self.theta[i])
        if self.kind in FACTORED_PRIOR_KINDS:
            self.prior_factors = [
                np.where(
                    active[:, None],
                    _normalized_rows(mass_y @ onehot),
                    factor,
                )
                for onehot, factor in zip(self.lat_onehot, self.prior_factors)
            ]
        else:
            self.prior_joint = np.where(
                active[:, None], _normalized_rows(mass_y), self.prior_joint
            )

    def recognition_rows(self) -> np.ndarray:
        """(n, obs_total, lat_total) product of the per-variable nets."""
        obs_total = self.shape.obs_space.total
        rows = np.ones((self.n, obs_total, 1))
        for table in self.psi:
            rows = (rows[:, :, :, None] * table[:, :, None, :]).reshape(
                self.n, obs_total, -1
            )
        return rows

    def sleep(self, active: np.ndarray) -> np.ndarray:
        """Reset recognition tables to posterior marginals; return logliks.

        The returned logliks describe the current generative parameters (the
        posterior computation yields them for free).
        """
        post, lls = self.e_step()
        self.psi = [
            np.where(active[:, None, None], post @ onehot, table)
            for onehot, table in zip(self.lat_onehot, self.psi)
        ]
        return lls

    def arrays(self) -> list[np.ndarray]:
        out = list(self.theta)
        if self.prior_joint is not None:
            out.append(self.prior_joint)
        if self.prior_factors is not None:
            out.extend(self.prior_factors)
        if self.psi is not None:
            out.extend(self.psi)
        return out

    def copy_arrays(self) -> list[np.ndarray]:
        return [a.copy() for a in self.arrays()]

    def overwrite_from(self, snapshots: list[np.ndarray], where: np.ndarray) -> None:
        """Copy snapshot entries back for the restarts flagged in ``where``."""
        for current, snap in zip(self.arrays(), snapshots):
            expand = where.reshape((-1,) + (1,) * (current.ndim - 1))
            np.copyto(current, snap, where=expand)

    def snapshot_into(self, snapshots: list[np.ndarray], where: np.ndarray) -> None:
        """Copy current entries into the snapshot for restarts in ``where``."""
        for current, snap in zip(self.arrays(), snapshots):
            expand = where.reshape((-1,) + (1,) * (current.ndim - 1))
            np.copyto(snap, current, where=expand)

    def to_model(self, r: int) -> GenerativeModel:
        obs, lat = self.shape.obs_space, self.shape.lat_space
        theta = tuple(
            Cpt(StateSpace((obs.cards[i],)), lat, _row_normalized(t[r]))
            for i, t in enumerate(self.theta)
        )
        if self.kind in FACTORED_PRIOR_KINDS:
            prior = tuple(
                Pmf(StateSpace((lat.cards[j],)), f[r], normalize=True)
                for j, f in enumerate(self.prior_factors)
            )
        else:
            prior = Pmf(lat, self.prior_joint[r], normalize=True)
        recognition = None
        if self.psi is not None:
            recognition = tuple(
                Cpt(StateSpace((lat.cards[j],)), obs, _row_normalized(p[r]))
                for j, p in enumerate(self.psi)
            )
        return GenerativeModel(
            shape=self.shape,
            kind=self.kind,
            theta=theta,
            prior=prior,
            recognition=recognition,
        )


def _normalized_rows(table: np.ndarray) -> np.ndarray:
    return table / np.maximum(table.sum(axis=-1, keepdims=True), _TINY)


def _row_normalized(table: np.ndarray) -> np.ndarray:
    return table / table.sum(axis=1, keepdims=True)


def random_init(
    shape: ModelShape, kind: str, seed: int, concentration: float = 1.0
) -> GenerativeModel:
    """Model with every table drawn from a symmetric Dirichlet; reproducible."""
    if kind not in KINDS:
        raise DomainError(f"unknown model kind {kind!r}")
    batch = _Batch(shape, kind, Pmf.uniform(shape.obs_space), 1)
    batch.init_random([np.random.default_rng(seed)], concentration)
    return batch.to_model(0)


def _check_fit_args(kind: str, shape: ModelShape, pdata: Pmf, allowed: tuple[str, ...]):
    if kind not in allowed:
        raise DomainError(f"kind {kind!r} not supported here (expected one of {allowed})")
    if pdata.space.cards != shape.obs_space.cards:
        raise DomainError("pdata is over a different observed space than the shape")
    if kind == "sl" and shape.lat_space.n_vars != 1:
        raise DomainError("an sl model has exactly one latent variable")


def _init_batch(kind: str, shape: ModelShape, pdata: Pmf, config: TrainConfig) -> _Batch:
    batch = _Batch(shape, kind, pdata, config.restarts)
    rngs = [_restart_rng(config.seed, k) for k in range(config.restarts)]
    batch.init_random(rngs, config.init_concentration)
    return batch


def _select_best(finals: np.ndarray) -> int:
    best = 0
    for k in range(1, len(finals)):
        if finals[k] > finals[best] + _TIE_TOL:
            best = k
    return best


def _make_report(
    finals: np.ndarray,
    traces: list[list[float]],
    converged: np.ndarray,
    best: int,
    recognition_gap: float | None = None,
) -> TrainReport:
    return TrainReport(
        final_loglik=float(finals[best]),
        iters_run=len(traces[best]) - 1,
        loglik_trace=tuple(traces[best]),
        restart_index_selected=best,
        converged=bool(converged[best]),
        restart_logliks=tuple(float(v) for v in finals),
        recognition_gap=recognition_gap,
    )


def em_fit(
    kind: str, shape: ModelShape, pdata: Pmf, config: TrainConfig = TrainConfig()
) -> tuple[GenerativeModel, TrainReport]:
    """Best-of-restarts EM fit for ``sl`` or ``il`` models.

    Every E-step uses the exact posterior over the joint latent configuration;
    the M-step re-estimates the per-variable conditionals and the prior (joint
    for ``sl``, per-variable marginals for ``il``, which keeps the prior
    factorization exact). Each restart stops once its loglik change drops
    below ``tol``.
    """
    _check_fit_args(kind, shape, pdata, EM_KINDS)
    if config.mode == "wake_sleep":
        raise DomainError("em_fit cannot run in wake_sleep mode")
    batch = _init_batch(kind, shape, pdata, config)
    active = np.ones(config.restarts, dtype=bool)
    converged = np.zeros(config.restarts, dtype=bool)
    post, lls = batch.e_step()
    traces = [[float(ll)] for ll in lls]
    prev = lls.copy()
    for _ in range(config.max_iters):
        batch.m_step(post, active)
        post, lls = batch.e_step()
        for r in np.flatnonzero(active):
            traces[r].append(float(lls[r]))
        done = active & (np.abs(lls - prev) < config.tol)
        converged |= done
        active &= ~done
        prev = np.where(active, lls, prev)
        if not active.any():
            break
    finals = np.array([trace[-1] for trace in traces])
    best = _select_best(finals)
    report = _make_report(finals, traces, converged, best)
    return batch.to_model(best), report


def wake_sleep_fit(
    kind: str, shape: ModelShape, pdata: Pmf, config: TrainConfig = TrainConfig()
) -> tuple[GenerativeModel, TrainReport]:
    """Best-of-restarts exact-expectation wake-sleep fit for ``ci`` or ``ici``.

    The log likelihood is not guaranteed to increase every sweep, so each
    restart returns its best iterate rather than its last. The report carries
    the mean divergence between the exact posterior and the factorized
    recognition net as the constraint-violation diagnostic.
    """
    _check_fit_args(kind, shape, pdata, RECOGNITION_KINDS)
    if config.mode == "em":
        raise DomainError("wake_sleep_fit cannot run in em mode")
    batch = _init_batch(kind, shape, pdata, config)
    active = np.ones(config.restarts, dtype=bool)
    converged = np.zeros(config.restarts, dtype=bool)
    # start every restart from the KL-optimal recognition of its random init
    lls = batch.sleep(active)
    traces = [[float(ll)] for ll in lls]
    prev = lls.copy()
    best_lls = lls.copy()
    best_arrays = batch.copy_arrays()
    for _ in range(config.max_iters):
        batch.m_step(batch.recognition_rows(), active)
        lls = batch.sleep(active)
        for r in np.flatnonzero(active):
            traces[r].append(float(lls[r]))
        improved = active & (lls > best_lls)
        if improved.any():
            batch.snapshot_into(best_arrays, improved)
            best_lls = np.where(improved, lls, best_lls)
        done = active & (np.abs(lls - prev) < config.tol)
        converged |= done
        active &= ~done
        prev = np.where(active, lls, prev)
        if not active.any():
            break
    batch.overwrite_from(best_arrays, np.ones(config.restarts, dtype=bool))
    best = _select_best(best_lls)
    gap = _recognition_gap(batch, best)
    report = _make_report(best_lls, traces, converged, best, recognition_gap=gap)
    return batch.to_model(best), report


def _recognition_gap(batch: _Batch, r: int) -> float:
    """Mean D(exact posterior || factorized recognition) under the data."""
    post = batch.e_step()[0][r]
    rec = batch.recognition_rows()[r]
    total = 0.0
    for x in np.flatnonzero(batch.pvec > 0):
        row, rrow = post[x], rec[x]
        mask = row > 0
        total += float(batch.pvec[x]) * float(
            np.sum(row[mask] * (np.log(row[mask]) - np.log(np.maximum(rrow[mask], FLOOR))))
        )
    return max(total, 0.0)


def fit_model(
    kind: str, shape: ModelShape, pdata: Pmf, config: TrainConfig = TrainConfig()
) -> tuple[GenerativeModel, TrainReport]:
    """Dispatch to the trainer matching the model family (or ``config.mode``)."""
    if kind not in KINDS:
        raise DomainError(f"unknown model kind {kind!r}")
    mode = config.mode
    if mode == "auto":
        mode = "em" if kind in EM_KINDS else "wake_sleep"
    if mode == "em":
        return em_fit(kind, shape, pdata, config)
    return wake_sleep_fit(kind, shape, pdata, config)
