"""Experiment pipelines: the two-layer model grid and the stacking study.

Both pipelines write RFC-4180 CSV files plus a JSON sidecar with the full
configuration; every CSV row carries a short fingerprint of that
configuration (seed, quantization policy, patch locations) for provenance.
Runs are sequential and seeded per job, so identical invocations produce
byte-identical outputs.
"""

from __future__ import annotations

import csv
import hashlib
import json
import math
from dataclasses import dataclass, field
from pathlib import Path
from statistics import mean, pstdev

import numpy as np

from .errors import DomainError
from .ingestion import (
    QUANTIZATION_POLICY,
    EmpiricalDataset,
    PatchSpec,
    default_patch_locations,
    load_idx_images,
    quantize_and_extract,
    synthetic_dataset,
    validate_disjoint,
)
from .measures import EvalScores, evaluate_model
from .models import ModelShape, load_model, save_model
from .space import StateSpace
from .stacking import connected_scores, encoder_scores, fit_higher, pushforward_latent, sl_to_binary, StackedModel
from .stats import offset_removal, pearson
from .training import TrainConfig, fit_model

__all__ = [
    "ExperimentConfig",
    "TwoLayerRow",
    "StackRow",
    "load_patch_datasets",
    "run_two_layer",
    "run_stacking",
]

DEFAULT_KINDS = ("sl", "il", "ci", "ici")
MNIST_TRAIN_IMAGE_NAMES = (
    "train-images-idx3-ubyte",
    "train-images-idx3-ubyte.gz",
    "train-images.idx3-ubyte",
)


@dataclass(frozen=True)
class ExperimentConfig:
    """Everything needed to reproduce a run byte for byte."""

    data: str = "synthetic"  # "synthetic" | "mnist"
    mnist_dir: str | None = None
    seed: int = 0
    restarts: int = 20
    max_iters: int = 1000
    tol: float = 1e-8
    kinds: tuple[str, ...] = DEFAULT_KINDS
    ny_max: int = 6
    patches: tuple[PatchSpec, ...] = field(default_factory=default_patch_locations)
    synthetic_t: int = 60000
    bijection_candidates: int = 20

    def __post_init__(self):
        if self.data not in ("synthetic", "mnist"):
            raise DomainError(f"unknown data source {self.data!r}")
        if not 1 <= self.ny_max <= 6:
            raise DomainError("ny_max must be between 1 and 6")
        unknown = [k for k in self.kinds if k not in DEFAULT_KINDS]
        if unknown:
            raise DomainError(f"unknown model kinds: {unknown}")
        validate_disjoint(self.patches)

    def to_json_dict(self) -> dict:
        return {
            "data": self.data,
            "mnist_dir": self.mnist_dir,
            "seed": self.seed,
            "restarts": self.restarts,
            "max_iters": self.max_iters,
            "tol": self.tol,
            "kinds": list(self.kinds),
            "ny_max": self.ny_max,
            "patches": [
                {
                    "row": p.row,
                    "col": p.col,
                    "height": p.height,
                    "width": p.width,
                    "levels": p.levels,
                }
                for p in self.patches
            ],
            "quantization": QUANTIZATION_POLICY,
            "synthetic_t": self.synthetic_t,
            "bijection_candidates": self.bijection_candidates,
        }

    def fingerprint(self) -> str:
        payload = json.dumps(self.to_json_dict(), sort_keys=True)
        return hashlib.sha256(payload.encode()).hexdigest()[:12]

    @classmethod
    def from_json_dict(cls, doc: dict) -> "ExperimentConfig":
        return cls(
            data=doc["data"],
            mnist_dir=doc.get("mnist_dir"),
            seed=doc["seed"],
            restarts=doc["restarts"],
            max_iters=doc["max_iters"],
            tol=doc["tol"],
            kinds=tuple(doc["kinds"]),
            ny_max=doc["ny_max"],
            patches=tuple(PatchSpec(**p) for p in doc["patches"]),
            synthetic_t=doc.get("synthetic_t", 60000),
            bijection_candidates=doc.get("bijection_candidates", 20),
        )


@dataclass(frozen=True)
class TwoLayerRow:
    """One trained-and-scored model of the two-layer grid."""

    kind: str
    n_latent_vars: int
    latent_total: int
    patch_set: int
    restart: int
    scores: EvalScores


@dataclass(frozen=True)
class StackRow:
    """One (lower model, higher size) stacking job."""

    lower_kind: str
    n_y: int
    k_z: int
    patch_set: int
    lod_xy: float
    lod_xz: float
    mi_xy: float
    mi_xz: float
    higher_loglik: float


def _job_seed(*parts: int) -> int:
    return int(np.random.SeedSequence(list(parts)).generate_state(1)[0])


def _find_mnist_images(mnist_dir: str | Path) -> Path:
    directory = Path(mnist_dir)
    for name in MNIST_TRAIN_IMAGE_NAMES:
        candidate = directory / name
        if candidate.exists():
            return candidate
    raise FileNotFoundError(
        f"no MNIST training image file in {directory} (looked for "
        f"{', '.join(MNIST_TRAIN_IMAGE_NAMES)}); download the IDX training "
        "images or rerun with synthetic data"
    )


def load_patch_datasets(config: ExperimentConfig) -> list[EmpiricalDataset]:
    """One dataset per configured patch location."""
    if config.data == "mnist":
        if config.mnist_dir is None:
            raise DomainError("mnist data requested but no mnist_dir given")
        images = load_idx_images(_find_mnist_images(config.mnist_dir))
        return [quantize_and_extract(images, spec) for spec in config.patches]
    # synthetic stand-ins: one per patch index with varied mode weight
    strengths = [0.2 + 0.5 * i / max(len(config.patches) - 1, 1) for i in range(len(config.patches))]
    return [
        synthetic_dataset(
            seed=_job_seed(config.seed, 9000 + i),
            space=spec.space(),
            correlation_strength=strengths[i],
            t=config.synthetic_t,
        )
        for i, spec in enumerate(config.patches)
    ]


def _latent_cards(kind: str, size_index: int) -> tuple[int, ...]:
    """Latent layout for grid size s (1-based): sl gets 2**s states, the
    multi-variable kinds get s binary variables."""
    if kind == "sl":
        return (2**size_index,)
    return (2,) * size_index


def _model_filename(kind: str, latent_total: int, patch_set: int) -> str:
    return f"model_{kind}_L{latent_total}_patch{patch_set}.json"


def _write_csv(path: Path, header: list[str], rows: list[list]) -> None:
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(header)
        writer.writerows(rows)


def _fmt(value: float) -> str:
    return repr(float(value))


def run_two_layer(
    config: ExperimentConfig, out_dir: str | Path
) -> tuple[list[TwoLayerRow], dict[tuple[str, int, int], dict[str, float]]]:
    """Train the full grid, score it, apply offset removal, write outputs.

    Returns the raw rows and the adjusted scores keyed by
    ``(kind, latent_total, patch_set)``.
    """
    out = Path(out_dir)
    (out / "models").mkdir(parents=True, exist_ok=True)
    datasets = load_patch_datasets(config)
    fingerprint = config.fingerprint()

    rows: list[TwoLayerRow] = []
    kind_order = [k for k in DEFAULT_KINDS if k in config.kinds]
    for patch_set, dataset in enumerate(datasets):
        for kind in kind_order:
            for size_index in range(1, config.ny_max + 1):
                cards = _latent_cards(kind, size_index)
                shape = ModelShape(dataset.space, StateSpace(cards))
                train_config = TrainConfig(
                    max_iters=config.max_iters,
                    tol=config.tol,
                    restarts=config.restarts,
                    seed=_job_seed(config.seed, patch_set, DEFAULT_KINDS.index(kind), size_index),
                )
                model, report = fit_model(kind, shape, dataset.pmf, train_config)
                scores = evaluate_model(model, dataset.pmf)
                rows.append(
                    TwoLayerRow(
                        kind=kind,
                        n_latent_vars=len(cards),
                        latent_total=math.prod(cards),
                        patch_set=patch_set,
                        restart=report.restart_index_selected,
                        scores=scores,
                    )
                )
                save_model(model, out / "models" / _model_filename(kind, math.prod(cards), patch_set))

    _write_csv(
        out / "raw_scores.csv",
        ["model_kind", "n_latent_vars", "latent_total", "patch_set", "restart",
         "loglik", "mi", "lod", "fingerprint"],
        [
            [r.kind, r.n_latent_vars, r.latent_total, r.patch_set, r.restart,
             _fmt(r.scores.loglik), _fmt(r.scores.mi), _fmt(r.scores.lod), fingerprint]
            for r in rows
        ],
    )

    adjusted: dict[tuple[str, int, int], dict[str, float]] = {}
    for metric in ("loglik", "mi", "lod"):
        table = {
            (r.kind, r.latent_total, r.patch_set): getattr(r.scores, metric)
            for r in rows
        }
        for key, value in offset_removal(table).items():
            adjusted.setdefault(key, {})[metric] = value

    adj_rows = sorted(adjusted.items(), key=lambda kv: (kind_order.index(kv[0][0]), kv[0][1], kv[0][2]))
    _write_csv(
        out / "adjusted_scores.csv",
        ["model_kind", "latent_total", "patch_set",
         "loglik_adj", "mi_adj", "lod_adj", "fingerprint"],
        [
            [kind, latent_total, patch_set,
             _fmt(vals["loglik"]), _fmt(vals["mi"]), _fmt(vals["lod"]), fingerprint]
            for (kind, latent_total, patch_set), vals in adj_rows
        ],
    )

    summary_rows = []
    for kind in kind_order:
        sizes = sorted({lt for (k, lt, _) in adjusted if k == kind})
        for latent_total in sizes:
            for metric in ("loglik", "mi", "lod"):
                values = [
                    vals[metric]
                    for (k, lt, _), vals in adjusted.items()
                    if k == kind and lt == latent_total
                ]
                summary_rows.append(
                    [kind, latent_total, metric, _fmt(mean(values)),
                     _fmt(pstdev(values)), len(values), fingerprint]
                )
    _write_csv(
        out / "summary.csv",
        ["model_kind", "latent_total", "metric", "mean", "stddev", "n", "fingerprint"],
        summary_rows,
    )

    (out / "config.json").write_text(json.dumps(config.to_json_dict(), indent=2))
    return rows, adjusted


def _stack_jobs(config: ExperimentConfig) -> list[tuple[str, int]]:
    """(kind, n_y) pairs taking part in the stacking study."""
    jobs = []
    for kind in config.kinds:
        for n_y in range(3, config.ny_max + 1):
            jobs.append((kind, n_y))
    return jobs


def run_stacking(
    two_layer_dir: str | Path, out_dir: str | Path, config: ExperimentConfig | None = None
) -> tuple[list[StackRow], list[dict]]:
    """Stack higher models on persisted lower models; correlate the scores.

    Lower models with at least three (equivalent binary) latent variables are
    loaded from ``two_layer_dir``; single-latent lowers are recoded to bits
    first. For each lower model one higher model per ``k_z`` in
    ``2 .. 2**(n_y - 2)`` is fit on the pushed-forward latent distribution.
    """
    two_layer = Path(two_layer_dir)
    config_path = two_layer / "config.json"
    if not config_path.exists():
        raise FileNotFoundError(f"missing {config_path}; run the two-layer grid first")
    if config is None:
        config = ExperimentConfig.from_json_dict(json.loads(config_path.read_text()))
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    datasets = load_patch_datasets(config)
    fingerprint = config.fingerprint()

    missing = []
    for kind, n_y in _stack_jobs(config):
        for patch_set in range(len(datasets)):
            path = two_layer / "models" / _model_filename(kind, 2**n_y, patch_set)
            if not path.exists():
                missing.append(str(path))
    if missing:
        raise FileNotFoundError(
            "missing lower models: " + ", ".join(missing[:4])
            + (" ..." if len(missing) > 4 else "")
        )

    rows: list[StackRow] = []
    for kind, n_y in _stack_jobs(config):
        for patch_set, dataset in enumerate(datasets):
            lower = load_model(two_layer / "models" / _model_filename(kind, 2**n_y, patch_set))
            pdata = dataset.pmf
            stack_seed = _job_seed(config.seed, 7000, DEFAULT_KINDS.index(kind), n_y, patch_set)
            if lower.kind == "sl":
                lower, _ = sl_to_binary(
                    lower,
                    pdata,
                    candidates=config.bijection_candidates,
                    config=TrainConfig(
                        max_iters=config.max_iters,
                        tol=config.tol,
                        restarts=config.restarts,
                        seed=stack_seed,
                    ),
                )
            lower_rows = lower.posterior().rows_or_uniform()
            lod_xy, mi_xy = encoder_scores(lower_rows, pdata)
            lat_pdata = pushforward_latent(lower, pdata)
            for k_z in range(2, 2 ** (n_y - 2) + 1):
                higher, _report = fit_higher(
                    lat_pdata,
                    k_z,
                    TrainConfig(
                        max_iters=config.max_iters,
                        tol=config.tol,
                        restarts=config.restarts,
                        seed=_job_seed(stack_seed, k_z),
                    ),
                )
                stacked = StackedModel(lower=lower, higher=higher, pdata=pdata)
                scores = connected_scores(stacked)
                rows.append(
                    StackRow(
                        lower_kind=kind,
                        n_y=n_y,
                        k_z=k_z,
                        patch_set=patch_set,
                        lod_xy=lod_xy,
                        lod_xz=scores.lod,
                        mi_xy=mi_xy,
                        mi_xz=scores.mi,
                        higher_loglik=scores.loglik,
                    )
                )

    _write_csv(
        out / "stack_scores.csv",
        ["lower_kind", "n_y", "k_z", "patch_set",
         "lod_xy", "lod_xz", "mi_xy", "mi_xz", "higher_loglik", "fingerprint"],
        [
            [r.lower_kind, r.n_y, r.k_z, r.patch_set,
             _fmt(r.lod_xy), _fmt(r.lod_xz), _fmt(r.mi_xy), _fmt(r.mi_xz),
             _fmt(r.higher_loglik), fingerprint]
            for r in rows
        ],
    )

    correlations: list[dict] = []
    for kind in [k for k in DEFAULT_KINDS if k in config.kinds]:
        kind_rows = [r for r in rows if r.lower_kind == kind]
        if len(kind_rows) < 3:
            continue
        for score_kind in ("lod", "mi"):
            xs = [getattr(r, f"{score_kind}_xy") for r in kind_rows]
            ys = [getattr(r, f"{score_kind}_xz") for r in kind_rows]
            result = pearson(xs, ys)
            correlations.append(
                {
                    "model": kind,
                    "score_kind": score_kind,
                    "r": result.r,
                    "p": result.p_value,
                    "n": result.n,
                }
            )
    _write_csv(
        out / "correlations.csv",
        ["model", "score_kind", "r", "p", "n", "fingerprint"],
        [
            [c["model"], c["score_kind"], _fmt(c["r"]), _fmt(c["p"]), c["n"], fingerprint]
            for c in correlations
        ],
    )
    (out / "config.json").write_text(json.dumps(config.to_json_dict(), indent=2))
    return rows, correlations
