"""Fixation accumulation, spherical Gaussian blur, and map export."""

import json

import numpy as np
import pytest

from panogaze import (
    Fixation,
    FixationMap,
    LatLon,
    SaliencyMap,
    Scanpath,
    accumulate_fixations,
    blur_to_saliency,
    load_saliency,
    save_saliency,
)
from panogaze.errors import ZeroMapError
from panogaze.saliency import normalize


def scanpath_at(latlons):
    return Scanpath(
        tuple(
            Fixation(LatLon(phi, lam), onset=0.5 * i, duration=0.2)
            for i, (phi, lam) in enumerate(latlons)
        )
    )


def counts_with_one_at(row, col, height, width):
    counts = np.zeros((height, width), dtype=np.int64)
    counts[row, col] = 1
    return FixationMap(counts)


class TestAccumulateFixations:
    def test_single_fixation_single_cell(self):
        fmap = accumulate_fixations([scanpath_at([(0.0, 0.0)])], size=(64, 128))
        assert fmap.total == 1
        assert fmap.counts[32, 64] == 1

    def test_coincident_fixations_stack(self):
        paths = [scanpath_at([(0.0, 0.0), (0.0, 0.0)]), scanpath_at([(0.0, 0.0)])]
        fmap = accumulate_fixations(paths, size=(64, 128))
        assert fmap.counts[32, 64] == 3
        assert fmap.total == 3

    def test_empty_scanpaths_contribute_nothing(self):
        fmap = accumulate_fixations([Scanpath(())], size=(8, 16))
        assert fmap.total == 0

    def test_total_equals_fixation_count(self):
        rng = np.random.default_rng(0)
        paths = [
            scanpath_at(
                [(float(p), float(l)) for p, l in zip(rng.uniform(-1.4, 1.4, 5), rng.uniform(-3, 3, 5))]
            )
            for _ in range(7)
        ]
        fmap = accumulate_fixations(paths, size=(32, 64))
        assert fmap.total == 35


class TestBlurToSaliency:
    def test_peak_at_the_fixation_pixel(self):
        fmap = counts_with_one_at(45, 90, 180, 360)
        smap = blur_to_saliency(fmap, sigma_deg=1.0)
        assert np.unravel_index(np.argmax(smap.values), smap.shape) == (45, 90)

    def test_one_degree_offset_ratio(self):
        # At 180x360 one column equals one degree of longitude on the equator
        # (row 90 sits exactly on the equator), so the neighbour pixel lies at
        # 1 great-circle degree and the kernel ratio must be exp(-1/2).
        fmap = counts_with_one_at(90, 180, 180, 360)
        smap = blur_to_saliency(fmap, sigma_deg=1.0)
        ratio = smap.values[90, 181] / smap.values[90, 180]
        assert ratio == pytest.approx(np.exp(-0.5), abs=1e-3)

    def test_antipodal_fixations_have_equal_peaks(self):
        counts = np.zeros((90, 180), dtype=np.int64)
        counts[45, 45] = 1
        counts[45, 135] = 1
        smap = blur_to_saliency(FixationMap(counts), sigma_deg=1.0)
        assert smap.values[45, 45] == pytest.approx(smap.values[45, 135], rel=1e-9)

    def test_sum_normalized(self):
        fmap = counts_with_one_at(10, 20, 64, 128)
        smap = blur_to_saliency(fmap, sigma_deg=1.5)
        assert smap.normalization == "sum"
        assert smap.values.sum() == pytest.approx(1.0, abs=1e-9)

    def test_rotation_equivariance(self):
        height, width = 90, 180
        counts = np.zeros((height, width), dtype=np.int64)
        counts[30, 40] = 2
        counts[55, 90] = 1
        base = blur_to_saliency(FixationMap(counts), sigma_deg=1.0).values
        shift = 17  # whole columns, an exact rotation of the pixel grid
        rolled_counts = np.roll(counts, shift, axis=1)
        rolled = blur_to_saliency(FixationMap(rolled_counts), sigma_deg=1.0).values
        assert np.max(np.abs(rolled - np.roll(base, shift, axis=1))) < 1e-6

    def test_rotation_of_single_fixation_is_bitwise_exact(self):
        # Kernel windows are built from column offsets, so moving a
        # fixation along its row cannot change a single bit, including
        # pixels that sit within rounding distance of the 4-sigma cutoff
        # (at 180x360 the cutoff ring grazes pixel centres).
        counts = np.zeros((180, 360), dtype=np.int64)
        counts[90, 180] = 1
        base = blur_to_saliency(FixationMap(counts), sigma_deg=1.0).values
        rolled_counts = np.roll(counts, 17, axis=1)
        rolled = blur_to_saliency(FixationMap(rolled_counts), sigma_deg=1.0).values
        np.testing.assert_array_equal(rolled, np.roll(base, 17, axis=1))

    def test_kernel_mass_is_latitude_independent(self):
        # Integrating kernel * cos(phi) over the sphere must not depend on
        # where the fixation sits.  Both fixations share one map (hence one
        # normalization constant) and their 4-sigma windows do not overlap,
        # so comparing the two windows compares the raw kernel masses.
        height, width = 512, 1024
        row_60 = int(round((90 - 60) / 180 * height))
        counts = np.zeros((height, width), dtype=np.int64)
        counts[256, 256] = 1  # equator
        counts[row_60, 768] = 1  # 60 degrees north, opposite side
        smap = blur_to_saliency(FixationMap(counts), sigma_deg=1.0)
        phi = np.pi / 2 - np.arange(height) * np.pi / height
        weighted = smap.values * np.cos(phi)[:, None]
        equator_mass = weighted[:, :512].sum()
        tilted_mass = weighted[:, 512:].sum()
        assert abs(equator_mass - tilted_mass) / equator_mass < 0.01

    def test_pole_window_wraps_all_columns(self):
        # A fixation one row from the pole must still produce finite,
        # normalized output with no NaN.
        fmap = counts_with_one_at(1, 7, 32, 64)
        smap = blur_to_saliency(fmap, sigma_deg=2.0)
        assert np.all(np.isfinite(smap.values))
        assert smap.values.sum() == pytest.approx(1.0, abs=1e-9)

    def test_empty_fixation_map_rejected(self):
        with pytest.raises(ZeroMapError):
            blur_to_saliency(FixationMap(np.zeros((8, 16), dtype=np.int64)))

    def test_weighting_by_count(self):
        single = blur_to_saliency(counts_with_one_at(20, 40, 64, 128), sigma_deg=1.0)
        counts = np.zeros((64, 128), dtype=np.int64)
        counts[20, 40] = 3
        triple = blur_to_saliency(FixationMap(counts), sigma_deg=1.0)
        # Same shape after normalization: one site, any multiplicity.
        assert np.allclose(single.values, triple.values)


class TestNormalize:
    def test_sum_one(self):
        smap = SaliencyMap(np.random.default_rng(1).uniform(0, 5, (16, 32)))
        out = normalize(smap, "sum")
        assert out.values.sum() == pytest.approx(1.0, abs=1e-9)
        assert out.normalization == "sum"

    def test_max_one(self):
        smap = SaliencyMap(np.random.default_rng(2).uniform(0, 5, (16, 32)))
        out = normalize(smap, "max")
        assert out.values.max() == pytest.approx(1.0, abs=1e-12)
        assert out.normalization == "max"

    def test_zero_map_rejected(self):
        with pytest.raises(ZeroMapError):
            normalize(SaliencyMap(np.zeros((4, 8))), "sum")

    def test_unknown_mode_rejected(self):
        with pytest.raises(ValueError):
            normalize(SaliencyMap(np.ones((2, 2))), "l2")

    def test_rejects_nan_values(self):
        values = np.ones((4, 4))
        values[0, 0] = np.nan
        with pytest.raises(ValueError):
            SaliencyMap(values)


class TestSaveLoad:
    def test_three_files_written(self, tmp_path):
        fmap = counts_with_one_at(20, 40, 64, 128)
        smap = blur_to_saliency(fmap, sigma_deg=1.0)
        paths = save_saliency(tmp_path / "map", smap, sigma_deg=1.0, fixation_count=1)
        assert [p.suffix for p in paths] == [".png", ".npy", ".json"]
        assert all(p.exists() for p in paths)

    def test_npy_round_trip_is_exact(self, tmp_path):
        smap = blur_to_saliency(counts_with_one_at(10, 10, 32, 64), sigma_deg=1.0)
        save_saliency(tmp_path / "map", smap, sigma_deg=1.0, fixation_count=1)
        back = load_saliency(tmp_path / "map.npy")
        assert np.array_equal(back.values, smap.values / smap.values.sum())

    def test_png_is_16_bit_max_one(self, tmp_path):
        import cv2

        smap = blur_to_saliency(counts_with_one_at(10, 10, 32, 64), sigma_deg=1.0)
        save_saliency(tmp_path / "map", smap, sigma_deg=1.0, fixation_count=1)
        img = cv2.imread(str(tmp_path / "map.png"), cv2.IMREAD_UNCHANGED)
        assert img.dtype == np.uint16
        assert img.max() == 65535

    def test_metadata_contents(self, tmp_path):
        smap = blur_to_saliency(counts_with_one_at(5, 5, 16, 32), sigma_deg=2.0)
        save_saliency(tmp_path / "map", smap, sigma_deg=2.0, fixation_count=9)
        meta = json.loads((tmp_path / "map.json").read_text())
        assert meta["sigma_deg"] == 2.0
        assert meta["resolution"] == [16, 32]
        assert meta["fixation_count"] == 9
