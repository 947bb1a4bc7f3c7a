from pathlib import Path

import _reference as ref
import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from hypothesis.extra.numpy import arrays
from PIL import Image

from ecgvit.preprocess import (
    LEAD_LABELS,
    BinarizeConfig,
    BinaryImage,
    GrayImage,
    LeadGridSpec,
    PreprocessConfig,
    RoiRect,
    binarize,
    crop_roi,
    preprocess_dataset,
    preprocess_report,
    resize_nearest,
    save_binary_png,
    split_leads,
    to_grayscale,
)
from ecgvit.synthetic import synthetic_report, write_dataset_tree

DATA = Path(__file__).parent / "data"

gray_images = arrays(np.uint8, st.tuples(st.integers(3, 20), st.integers(4, 24)))




def save_rgb(tmp_path, arr, name="report.png"):
    path = tmp_path / name
    Image.fromarray(arr).save(path)
    return path


class TestGrayscale:
    @pytest.mark.parametrize("rgb, expected", [((255, 255, 255), 255), ((0, 0, 0), 0), ((100, 100, 100), 100)])
    def test_fixed_points(self, rgb, expected):
        assert to_grayscale(np.array([[rgb]], dtype=np.uint8)).pixels[0, 0] == expected

    def test_pure_red(self):
        # 0.299 * 255 = 76.245
        assert to_grayscale(np.array([[[255, 0, 0]]], dtype=np.uint8)).pixels[0, 0] == 76

    def test_rejects_non_rgb(self):
        with pytest.raises(ValueError):
            to_grayscale(np.zeros((4, 4), dtype=np.uint8))


class TestCrop:
    def test_size(self):
        out = crop_roi(GrayImage(np.zeros((100, 100), np.uint8)), RoiRect(10, 20, 50, 60))
        assert (out.width, out.height) == (50, 60)

    def test_out_of_bounds(self):
        with pytest.raises(ValueError):
            crop_roi(GrayImage(np.zeros((100, 100), np.uint8)), RoiRect(90, 0, 20, 10))

    @given(gray_images)
    def test_full_roi_is_identity(self, px):
        img = GrayImage(px)
        np.testing.assert_array_equal(crop_roi(img, RoiRect(0, 0, img.width, img.height)).pixels, px)


class TestBinarize:
    def test_rule(self):
        out = binarize(GrayImage(np.array([[39, 40], [41, 0]], np.uint8)), BinarizeConfig(40))
        np.testing.assert_array_equal(out.pixels, [[1, 0], [0, 1]])

    def test_blank_page(self):
        assert not binarize(GrayImage(np.full((5, 5), 255, np.uint8))).pixels.any()

    @given(gray_images)
    def test_zero_threshold_is_empty(self, px):
        assert not binarize(GrayImage(px), BinarizeConfig(0)).pixels.any()

    def test_golden_file(self):
        gray = np.asarray(Image.open(DATA / "binarize_input.png"))
        expected = np.asarray(Image.open(DATA / "binarize_expected_t40.png")) // 255
        np.testing.assert_array_equal(binarize(GrayImage(gray), BinarizeConfig(40)).pixels, expected)

    def test_threshold_range(self):
        with pytest.raises(ValueError):
            BinarizeConfig(256)

    @given(gray_images, st.integers(0, 256), st.integers(0, 256))
    def test_monotone_in_threshold(self, px, a, b):
        lo, hi = sorted((min(a, 255), min(b, 255)))
        n_lo = binarize(GrayImage(px), BinarizeConfig(lo)).pixels.sum()
        n_hi = binarize(GrayImage(px), BinarizeConfig(hi)).pixels.sum()
        assert n_lo <= n_hi

    @given(gray_images, st.integers(2, 255))
    def test_idempotent_through_rendering(self, px, tau):
        mask = binarize(GrayImage(px), BinarizeConfig(40)).pixels
        rendered = GrayImage(np.where(mask == 1, 0, 255).astype(np.uint8))
        np.testing.assert_array_equal(binarize(rendered, BinarizeConfig(tau)).pixels, mask)


class TestSplit:
    def test_even(self):
        leads = split_leads(BinaryImage(np.zeros((300, 400), np.uint8)))
        assert [lead.lead_label for lead in leads] == list(LEAD_LABELS)
        assert {lead.image.pixels.shape for lead in leads} == {(100, 100)}

    def test_remainder_dropped(self):
        leads = split_leads(BinaryImage(np.zeros((301, 401), np.uint8)))
        assert len(leads) == 12 and {lead.image.pixels.shape for lead in leads} == {(100, 100)}

    def test_too_small(self):
        with pytest.raises(ValueError):
            split_leads(BinaryImage(np.zeros((3, 3), np.uint8)))

    def test_grid_must_have_twelve_cells(self):
        with pytest.raises(ValueError):
            LeadGridSpec(2, 4)

    @pytest.mark.parametrize("grid", [LeadGridSpec(3, 4), LeadGridSpec(4, 3), LeadGridSpec(6, 2)])
    @settings(max_examples=25)
    @given(px=arrays(np.uint8, st.tuples(st.integers(6, 30), st.integers(6, 30)), elements=st.integers(0, 1)))
    def test_lossless_partition(self, grid, px):
        leads = split_leads(BinaryImage(px), grid)
        assert len(leads) == 12
        ch, cw = px.shape[0] // grid.rows, px.shape[1] // grid.cols
        rows = [np.hstack([leads[r * grid.cols + c].image.pixels for c in range(grid.cols)]) for r in range(grid.rows)]
        np.testing.assert_array_equal(np.vstack(rows), px[: grid.rows * ch, : grid.cols * cw])


class TestResize:
    def test_integer_upscale(self):
        board = np.array([[1, 0], [0, 1]], np.uint8)
        np.testing.assert_array_equal(resize_nearest(BinaryImage(board), 4).pixels, np.kron(board, np.ones((2, 2), np.uint8)))

    @given(arrays(np.uint8, st.tuples(st.integers(1, 12), st.integers(1, 12)), elements=st.integers(0, 1)))
    def test_same_side_identity_when_square(self, px):
        sq = px[: min(px.shape), : min(px.shape)]
        np.testing.assert_array_equal(resize_nearest(BinaryImage(sq), sq.shape[0]).pixels, sq)

    @given(arrays(np.uint8, st.tuples(st.integers(1, 12), st.integers(1, 12)), elements=st.integers(0, 1)), st.integers(1, 20))
    def test_index_oracle(self, px, side):
        h, w = px.shape
        expected = [[px[(i * h) // side][(j * w) // side] for j in range(side)] for i in range(side)]
        np.testing.assert_array_equal(resize_nearest(BinaryImage(px), side).pixels, expected)


class TestPreprocessReport:
    def test_one_stroke_per_lead(self, tmp_path):
        path = save_rgb(tmp_path, synthetic_report(400, 300, stroke=3))
        leads = preprocess_report(path)
        assert len(leads) == 12
        assert [ref.components(lead.image.pixels) for lead in leads] == [1] * 12

    def test_jittered_strokes_with_roi(self, tmp_path):
        path = save_rgb(tmp_path, synthetic_report(400, 300, stroke=3, header=40, seed=5))
        leads = preprocess_report(path, roi=RoiRect(0, 40, 400, 300), side=64)
        assert [ref.components(lead.image.pixels) for lead in leads] == [1] * 12
        assert {lead.image.pixels.shape for lead in leads} == {(64, 64)}

    def test_header_without_roi_adds_components(self, tmp_path):
        path = save_rgb(tmp_path, synthetic_report(400, 300, stroke=3, header=40))
        leads = preprocess_report(path)
        assert sum(ref.components(lead.image.pixels) for lead in leads) > 12

    def test_blank(self, tmp_path):
        path = save_rgb(tmp_path, synthetic_report(400, 300, blank=True))
        leads = preprocess_report(path)
        assert len(leads) == 12 and not any(lead.image.pixels.any() for lead in leads)

    def test_missing_file_names_path(self, tmp_path):
        missing = tmp_path / "nope.png"
        with pytest.raises(OSError, match="nope.png"):
            preprocess_report(missing)

    def test_deterministic_bytes(self, tmp_path):
        path = save_rgb(tmp_path, synthetic_report(400, 300, seed=1))
        outs = []
        for run in range(2):
            d = tmp_path / f"run{run}"
            d.mkdir()
            for lead in preprocess_report(path, side=32):
                save_binary_png(lead.image, d / f"{lead.lead_label}.png")
            outs.append({p.name: p.read_bytes() for p in sorted(d.iterdir())})
        assert outs[0] == outs[1] and len(outs[0]) == 12


class TestPreprocessDataset:
    COUNTS = {"MI": 3, "AbnormalHB": 2, "HistoryMI": 1, "Normal": 2}

    def test_counts_and_manifest(self, tmp_path):
        root = write_dataset_tree(tmp_path / "root", self.COUNTS)
        summary = preprocess_dataset(root, tmp_path / "out", PreprocessConfig(resize=16))
        assert summary.reports == self.COUNTS
        assert summary.leads == {k: 12 * v for k, v in self.COUNTS.items()}
        lines = summary.manifest.read_text().splitlines()
        assert lines[0] == "report_id,lead_label,class,path" and len(lines) == 1 + 12 * 8
        assert len(list((tmp_path / "out" / "leads").glob("*.png"))) == 96

    def test_parallel_matches_serial(self, tmp_path):
        root = write_dataset_tree(tmp_path / "root", self.COUNTS)
        a = preprocess_dataset(root, tmp_path / "a", PreprocessConfig(resize=16), jobs=1)
        b = preprocess_dataset(root, tmp_path / "b", PreprocessConfig(resize=16), jobs=2)
        assert a.manifest.read_bytes() == b.manifest.read_bytes()
        for p in sorted((tmp_path / "a" / "leads").iterdir()):
            assert p.read_bytes() == (tmp_path / "b" / "leads" / p.name).read_bytes()

    def test_unreadable_file_is_skipped(self, tmp_path):
        root = write_dataset_tree(tmp_path / "root", self.COUNTS)
        (root / "MI" / "broken.png").write_bytes(b"not an image")
        summary = preprocess_dataset(root, tmp_path / "out", PreprocessConfig(resize=16))
        assert summary.reports["MI"] == 3
        assert len(summary.failures) == 1 and "broken.png" in summary.failures[0][0]

    def test_empty_root(self, tmp_path):
        (tmp_path / "empty").mkdir()
        with pytest.raises(FileNotFoundError):
            preprocess_dataset(tmp_path / "empty", tmp_path / "out")
