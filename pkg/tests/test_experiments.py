"""The two-layer grid and stacking pipelines at a reduced scale."""

import csv
import json

import numpy as np
import pytest

from lodem.errors import DomainError
from lodem.experiments import (
    ExperimentConfig,
    load_patch_datasets,
    run_stacking,
    run_two_layer,
)
from lodem.ingestion import PatchSpec


def small_config(**overrides):
    defaults = dict(
        data="synthetic",
        seed=11,
        restarts=2,
        max_iters=150,
        tol=1e-7,
        ny_max=3,
        patches=(PatchSpec(row=12, col=10), PatchSpec(row=12, col=12)),
        synthetic_t=20000,
        bijection_candidates=4,
    )
    defaults.update(overrides)
    return ExperimentConfig(**defaults)


def read_csv(path):
    with open(path, newline="") as fh:
        return list(csv.DictReader(fh))


class TestConfig:
    def test_fingerprint_stable_and_sensitive(self):
        a, b = small_config(), small_config()
        assert a.fingerprint() == b.fingerprint()
        assert small_config(seed=12).fingerprint() != a.fingerprint()

    def test_json_roundtrip(self):
        config = small_config()
        rebuilt = ExperimentConfig.from_json_dict(
            json.loads(json.dumps(config.to_json_dict()))
        )
        assert rebuilt == config

    def test_rejects_overlapping_patches(self):
        with pytest.raises(DomainError):
            small_config(patches=(PatchSpec(row=12, col=10), PatchSpec(row=12, col=11)))

    def test_rejects_unknown_kind(self):
        with pytest.raises(DomainError):
            small_config(kinds=("sl", "rbm"))

    def test_mnist_requires_directory(self):
        config = small_config(data="mnist", mnist_dir=None)
        with pytest.raises(DomainError):
            load_patch_datasets(config)


class TestLoadPatchDatasets:
    def test_one_dataset_per_patch(self):
        datasets = load_patch_datasets(small_config())
        assert len(datasets) == 2
        for dataset in datasets:
            assert dataset.space.cards == (3, 3, 3, 3)
            assert dataset.t == 20000

    def test_deterministic(self):
        a = load_patch_datasets(small_config())
        b = load_patch_datasets(small_config())
        for x, y in zip(a, b):
            assert np.array_equal(x.counts, y.counts)


@pytest.fixture(scope="module")
def run(tmp_path_factory):
    out = tmp_path_factory.mktemp("two_layer")
    config = small_config()
    rows, adjusted = run_two_layer(config, out)
    return config, out, rows, adjusted


@pytest.fixture(scope="module")
def stacked(tmp_path_factory):
    two_layer_dir = tmp_path_factory.mktemp("two_layer_for_stack")
    stack_dir = tmp_path_factory.mktemp("stack")
    config = small_config(ny_max=4)
    run_two_layer(config, two_layer_dir)
    rows, correlations = run_stacking(two_layer_dir, stack_dir)
    return config, stack_dir, rows, correlations


class TestRunTwoLayer:
    def test_row_count(self, run):
        config, _, rows, _ = run
        assert len(rows) == 2 * 4 * 3  # patches x kinds x sizes

    def test_grid_sizes(self, run):
        _, _, rows, _ = run
        sl_sizes = sorted({r.latent_total for r in rows if r.kind == "sl"})
        assert sl_sizes == [2, 4, 8]
        for kind in ("il", "ci", "ici"):
            per_kind = [r for r in rows if r.kind == kind]
            assert sorted({r.n_latent_vars for r in per_kind}) == [1, 2, 3]
            assert all(r.latent_total == 2**r.n_latent_vars for r in per_kind)

    def test_csv_files_exist_with_fingerprint(self, run):
        config, out, _, _ = run
        for name in ("raw_scores.csv", "adjusted_scores.csv", "summary.csv"):
            rows = read_csv(out / name)
            assert rows, name
            assert all(r["fingerprint"] == config.fingerprint() for r in rows)

    def test_models_persisted(self, run):
        _, out, rows, _ = run
        files = sorted(p.name for p in (out / "models").glob("*.json"))
        assert len(files) == len(rows)

    def test_adjusted_smallest_size_collapses(self, run):
        _, _, rows, adjusted = run
        for kind in ("sl", "il", "ci", "ici"):
            values = {
                key: vals["lod"]
                for key, vals in adjusted.items()
                if key[0] == kind and key[1] == 2
            }
            assert len(set(round(v, 12) for v in values.values())) == 1

    def test_config_sidecar(self, run):
        config, out, _, _ = run
        doc = json.loads((out / "config.json").read_text())
        assert ExperimentConfig.from_json_dict(doc) == config


class TestRunStacking:
    def test_job_counts(self, stacked):
        _, _, rows, _ = stacked
        # n_y in {3, 4}: k_z sweeps of sizes 1 and 3, for 2 patches x 4 kinds
        assert len(rows) == 2 * 4 * (1 + 3)
        for row in rows:
            assert 2 <= row.k_z <= 2 ** (row.n_y - 2)

    def test_correlation_table_shape(self, stacked):
        _, _, _, correlations = stacked
        assert len(correlations) == 8  # 4 kinds x 2 score kinds
        for entry in correlations:
            assert -1.0 <= entry["r"] <= 1.0
            assert 0.0 <= entry["p"] <= 1.0
            assert entry["n"] == 8

    def test_csv_outputs(self, stacked):
        config, out, rows, _ = stacked
        stack_rows = read_csv(out / "stack_scores.csv")
        assert len(stack_rows) == len(rows)
        corr_rows = read_csv(out / "correlations.csv")
        assert {r["score_kind"] for r in corr_rows} == {"lod", "mi"}

    def test_missing_models_reported(self, tmp_path):
        out = tmp_path / "empty"
        out.mkdir()
        (out / "config.json").write_text(
            json.dumps(small_config(ny_max=4).to_json_dict())
        )
        (out / "models").mkdir()
        with pytest.raises(FileNotFoundError) as err:
            run_stacking(out, tmp_path / "stack")
        assert "model_" in str(err.value)

    def test_missing_config_reported(self, tmp_path):
        with pytest.raises(FileNotFoundError):
            run_stacking(tmp_path, tmp_path / "stack")


class TestDeterminism:
    def test_identical_runs_byte_identical(self, tmp_path):
        config = small_config(ny_max=2, kinds=("sl", "ci"))
        out_a, out_b = tmp_path / "a", tmp_path / "b"
        run_two_layer(config, out_a)
        run_two_layer(config, out_b)
        for name in ("raw_scores.csv", "adjusted_scores.csv", "summary.csv", "config.json"):
            assert (out_a / name).read_bytes() == (out_b / name).read_bytes()
