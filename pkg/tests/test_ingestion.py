"""IDX decoding, patch quantization, synthetic data."""

import gzip
import struct

import numpy as np
import pytest

from lodem.errors import DomainError, IdxFormatError
from lodem.ingestion import (
    EmpiricalDataset,
    PatchSpec,
    default_patch_locations,
    encode_idx_images,
    load_dataset,
    load_idx_images,
    parse_idx_images,
    quantize_and_extract,
    quantize_pixels,
    save_dataset,
    synthetic_dataset,
    validate_disjoint,
)
from lodem.pmf import Pmf, entropy, marginalize
from lodem.space import StateSpace


def idx_bytes(count, rows, cols, payload, magic=0x00000803):
    return struct.pack(">IIII", magic, count, rows, cols) + bytes(payload)


class TestParseIdx:
    def test_single_image(self):
        data = idx_bytes(1, 2, 2, [0, 128, 255, 64])
        images = parse_idx_images(data)
        assert images.shape == (1, 2, 2)
        assert images.dtype == np.uint8
        assert images[0].tolist() == [[0, 128], [255, 64]]

    def test_wrong_magic_is_rejected(self):
        data = idx_bytes(1, 2, 2, [0, 0, 0, 0], magic=0x00000801)
        with pytest.raises(IdxFormatError) as err:
            parse_idx_images(data)
        assert err.value.offset == 0
        assert "0x00000801" in str(err.value)

    def test_truncated_payload_names_lengths(self):
        data = idx_bytes(2, 2, 2, [0, 1, 2])
        with pytest.raises(IdxFormatError) as err:
            parse_idx_images(data)
        assert "3" in str(err.value) and "8" in str(err.value)

    def test_truncated_header(self):
        with pytest.raises(IdxFormatError):
            parse_idx_images(b"\x00\x00\x08")

    def test_oversized_dims_rejected(self):
        data = struct.pack(">IIII", 0x00000803, 2**31, 2**10, 2**10)
        with pytest.raises(IdxFormatError):
            parse_idx_images(data)

    def test_roundtrip_byte_identical(self):
        rng = np.random.default_rng(0)
        images = rng.integers(0, 256, size=(5, 4, 3), dtype=np.uint8)
        encoded = encode_idx_images(images)
        decoded = parse_idx_images(encoded)
        assert np.array_equal(decoded, images)
        assert encode_idx_images(decoded) == encoded

    def test_load_handles_gzip(self, tmp_path):
        rng = np.random.default_rng(1)
        images = rng.integers(0, 256, size=(3, 28, 28), dtype=np.uint8)
        raw_path = tmp_path / "imgs.idx"
        raw_path.write_bytes(encode_idx_images(images))
        gz_path = tmp_path / "imgs.idx.gz"
        gz_path.write_bytes(gzip.compress(encode_idx_images(images)))
        assert np.array_equal(load_idx_images(raw_path), images)
        assert np.array_equal(load_idx_images(gz_path), images)


class TestQuantization:
    def test_bin_edges(self):
        pixels = np.array([0, 85, 86, 170, 171, 255])
        assert quantize_pixels(pixels, 3).tolist() == [0, 0, 1, 1, 2, 2]

    def test_reference_pixels(self):
        pixels = np.array([0, 86, 171, 255])
        assert quantize_pixels(pixels, 3).tolist() == [0, 1, 2, 2]

    def test_monotone_and_total(self):
        values = np.arange(256)
        levels = quantize_pixels(values, 3)
        assert np.all(np.diff(levels) >= 0)
        assert set(levels.tolist()) == {0, 1, 2}


class TestQuantizeAndExtract:
    def test_reference_patch_state(self):
        image = np.zeros((1, 28, 28), dtype=np.uint8)
        image[0, 10, 10] = 0
        image[0, 10, 11] = 86
        image[0, 11, 10] = 171
        image[0, 11, 11] = 255
        dataset = quantize_and_extract(image, PatchSpec(row=10, col=10))
        state_index = dataset.space.index((0, 1, 2, 2))
        assert dataset.counts[state_index] == 1
        assert dataset.counts.sum() == 1

    def test_all_zero_images_count_at_origin(self):
        images = np.zeros((7, 28, 28), dtype=np.uint8)
        dataset = quantize_and_extract(images, PatchSpec(row=0, col=0))
        assert dataset.counts[0] == 7
        assert dataset.t == 7

    def test_total_count_preserved(self):
        rng = np.random.default_rng(2)
        images = rng.integers(0, 256, size=(500, 28, 28), dtype=np.uint8)
        dataset = quantize_and_extract(images, PatchSpec(row=12, col=12))
        assert dataset.t == 500
        assert dataset.counts.sum() == 500
        assert dataset.pmf.probs.sum() == pytest.approx(1.0, abs=1e-12)

    def test_out_of_bounds_patch(self):
        images = np.zeros((1, 10, 10), dtype=np.uint8)
        with pytest.raises(DomainError):
            quantize_and_extract(images, PatchSpec(row=12, col=12))


class TestPatchSpec:
    def test_must_fit_in_28x28(self):
        with pytest.raises(DomainError):
            PatchSpec(row=27, col=27)

    def test_needs_two_levels(self):
        with pytest.raises(DomainError):
            PatchSpec(row=0, col=0, levels=1)

    def test_space(self):
        assert PatchSpec(row=0, col=0).space().cards == (3, 3, 3, 3)


class TestDefaultPatchLocations:
    def test_eight_disjoint_in_bounds(self):
        specs = default_patch_locations()
        assert len(specs) == 8
        validate_disjoint(specs)
        for spec in specs:
            assert 0 <= spec.row and spec.row + spec.height <= 28
            assert 0 <= spec.col and spec.col + spec.width <= 28

    def test_overlap_detected(self):
        with pytest.raises(DomainError):
            validate_disjoint((PatchSpec(row=10, col=10), PatchSpec(row=11, col=11)))


def pairwise_mi(pmf: Pmf, i: int, j: int) -> float:
    """Plug-in mutual information between two observed variables."""
    joint = marginalize(pmf, (i, j))
    pi = marginalize(pmf, (i,))
    pj = marginalize(pmf, (j,))
    return entropy(pi) + entropy(pj) - entropy(joint)


class TestSyntheticDataset:
    def test_reproducible(self):
        a = synthetic_dataset(seed=5)
        b = synthetic_dataset(seed=5)
        assert np.array_equal(a.counts, b.counts)
        assert a.t == b.t == 60000

    def test_different_seeds_differ(self):
        a = synthetic_dataset(seed=5)
        b = synthetic_dataset(seed=6)
        assert not np.array_equal(a.counts, b.counts)

    def test_pmf_sums_to_one(self):
        dataset = synthetic_dataset(seed=7, correlation_strength=0.8)
        assert dataset.pmf.probs.sum() == pytest.approx(1.0, abs=1e-12)

    def test_zero_strength_near_independent(self):
        for seed in range(5):
            dataset = synthetic_dataset(seed=seed, correlation_strength=0.0)
            pmf = dataset.pmf
            for i in range(4):
                for j in range(i + 1, 4):
                    assert pairwise_mi(pmf, i, j) < 0.05

    def test_high_strength_concentrates(self):
        dataset = synthetic_dataset(seed=1, correlation_strength=1.0)
        # all mass on the handful of modes
        assert (dataset.counts > 0).sum() <= 8

    def test_strength_validated(self):
        with pytest.raises(DomainError):
            synthetic_dataset(seed=0, correlation_strength=1.5)


class TestEmpiricalDataset:
    def test_counts_must_match_t(self):
        with pytest.raises(DomainError):
            EmpiricalDataset(StateSpace((2,)), [3, 4], t=10)

    def test_empty_rejected(self):
        with pytest.raises(DomainError):
            EmpiricalDataset(StateSpace((2,)), [0, 0])

    def test_pmf_is_counts_over_t(self):
        dataset = EmpiricalDataset(StateSpace((4,)), [1, 2, 3, 4])
        assert np.allclose(dataset.pmf.probs, np.array([1, 2, 3, 4]) / 10.0)

    def test_save_load_roundtrip(self, tmp_path):
        dataset = synthetic_dataset(seed=9)
        path = tmp_path / "dataset.json"
        save_dataset(dataset, path, meta={"origin": "test"})
        loaded = load_dataset(path)
        assert np.array_equal(loaded.counts, dataset.counts)
        assert loaded.t == dataset.t
        assert loaded.space.cards == dataset.space.cards

    def test_load_rejects_foreign_file(self, tmp_path):
        path = tmp_path / "other.json"
        path.write_text('{"format": "unrelated"}')
        with pytest.raises(DomainError):
            load_dataset(path)
