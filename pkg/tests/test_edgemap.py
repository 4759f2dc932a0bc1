import numpy as np
import pytest

from meshprompt.edgemap import EdgeMap, _blur, _sobel, _suppress, canny
from meshprompt.errors import InvalidThresholdError
from meshprompt.renderer import GrayscaleImage

from canny_reference import reference_canny


def gray(arr):
    return GrayscaleImage(np.asarray(arr, dtype=np.uint8))


def make_corpus():
    """>= 20 synthetic images: steps, ramps, disks, noise at three sigmas."""
    rng = np.random.default_rng(5)
    yy, xx = np.mgrid[0:64, 0:64]
    corpus = {}

    vstep = np.zeros((64, 64))
    vstep[:, 32:] = 255
    corpus["step_vertical"] = vstep
    corpus["step_horizontal"] = vstep.T.copy()
    corpus["step_diag_main"] = np.where(xx + yy > 63, 255, 0)
    corpus["step_diag_anti"] = np.where(xx - yy > 0, 255, 0)
    corpus["step_offset"] = np.where(xx >= 11, 200, 40)
    corpus["step_low_contrast"] = np.where(yy >= 40, 140, 100)

    corpus["ramp_shallow"] = (xx * 2).clip(0, 255)
    corpus["ramp_steep"] = (xx * 8).clip(0, 255)
    corpus["ramp_vertical"] = (yy * 4).clip(0, 255)

    for r in (6, 14, 25):
        corpus[f"disk_r{r}"] = np.where((xx - 32) ** 2 + (yy - 32) ** 2 <= r * r, 210, 25)
    corpus["disk_faint"] = np.where((xx - 20) ** 2 + (yy - 44) ** 2 <= 100, 150, 110)

    for s in (10, 30, 80):
        corpus[f"noise_sigma{s}"] = (128 + s * rng.standard_normal((48, 48))).clip(0, 255)
    for s in (10, 30, 80):
        base = np.where(xx[:48, :48] >= 24, 180, 60)
        corpus[f"step_noise{s}"] = (base + s * rng.standard_normal((48, 48))).clip(0, 255)

    corpus["constant"] = np.full((32, 32), 77)
    corpus["checker"] = np.where((xx // 8 + yy // 8) % 2 == 0, 220, 35)
    corpus["bar"] = np.where((xx >= 28) & (xx < 36), 240, 20)
    corpus["corner"] = np.where((xx >= 32) & (yy >= 32), 230, 30)

    return {k: v.astype(np.uint8) for k, v in corpus.items()}


CORPUS = make_corpus()
PARAM_SETS = [(50.0, 100.0, 1.0), (100.0, 200.0, 1.4), (20.0, 60.0, 0.0)]


class TestReferenceEquivalence:
    def test_corpus_is_large_enough(self):
        assert len(CORPUS) >= 20

    @pytest.mark.parametrize("name", sorted(CORPUS))
    def test_bit_exact_against_reference(self, name):
        arr = CORPUS[name]
        for low, high, sigma in PARAM_SETS:
            mine = canny(gray(arr), low, high, sigma).pixels
            ref = reference_canny(arr, low, high, sigma)
            assert np.array_equal(mine, ref), f"{name} {(low, high, sigma)}"


class TestStructure:
    def test_constant_image_has_no_edges(self):
        out = canny(gray(CORPUS["constant"]), 50, 100, 1.0)
        assert out.pixels.sum() == 0

    def test_vertical_step_gives_single_column_line(self):
        out = canny(gray(CORPUS["step_vertical"]), 50, 100, 1.0).pixels
        h, w = out.shape
        for row in range(1, h - 1):
            cols = np.nonzero(out[row])[0]
            assert len(cols) == 1
            assert abs(int(cols[0]) - 32) <= 1  # at the step column +- 1
        assert out[0].sum() == 0 and out[h - 1].sum() == 0

    def test_output_is_binary_with_source_dimensions(self):
        for name, arr in CORPUS.items():
            out = canny(gray(arr), 50, 100, 1.0)
            assert set(np.unique(out.pixels)) <= {0, 255}
            assert out.pixels.shape == arr.shape

    def test_border_pixels_never_edges(self):
        for name in ("checker", "disk_r25", "noise_sigma80"):
            out = canny(gray(CORPUS[name]), 10, 30, 1.0).pixels
            assert out[0].sum() == 0 and out[-1].sum() == 0
            assert out[:, 0].sum() == 0 and out[:, -1].sum() == 0


class TestThresholdMonotonicity:
    @pytest.mark.parametrize("name", sorted(CORPUS))
    def test_raising_thresholds_never_adds_edges(self, name):
        arr = CORPUS[name]
        base = canny(gray(arr), 40.0, 90.0, 1.0).pixels
        for low, high in [(60.0, 90.0), (40.0, 140.0), (80.0, 160.0)]:
            tighter = canny(gray(arr), low, high, 1.0).pixels
            assert np.all(base[tighter == 255] == 255)


class TestHysteresisConnectivity:
    @pytest.mark.parametrize("name", ["disk_r14", "step_noise30", "checker"])
    def test_every_weak_pixel_connects_to_a_strong_pixel(self, name):
        arr = CORPUS[name]
        low, high, sigma = 30.0, 90.0, 1.0
        out = canny(gray(arr), low, high, sigma).pixels
        blurred = _blur(arr, sigma)
        gx, gy, mag = _sobel(blurred)
        nms = _suppress(gx, gy, mag)
        strong = (nms >= high) & (out == 255)
        # BFS from strong pixels through the output set must reach all of it
        reach = strong.copy()
        frontier = list(zip(*np.nonzero(strong)))
        while frontier:
            y, x = frontier.pop()
            for dy in (-1, 0, 1):
                for dx in (-1, 0, 1):
                    ny, nx = y + dy, x + dx
                    if 0 <= ny < out.shape[0] and 0 <= nx < out.shape[1]:
                        if out[ny, nx] == 255 and not reach[ny, nx]:
                            reach[ny, nx] = True
                            frontier.append((ny, nx))
        assert np.array_equal(reach, out == 255)


class TestValidation:
    def test_low_above_high_rejected(self):
        with pytest.raises(InvalidThresholdError):
            canny(gray(CORPUS["constant"]), 150, 100, 1.0)

    def test_out_of_range_thresholds(self):
        with pytest.raises(InvalidThresholdError):
            canny(gray(CORPUS["constant"]), -5, 100, 1.0)
        with pytest.raises(InvalidThresholdError):
            canny(gray(CORPUS["constant"]), 100, 300, 1.0)

    def test_negative_sigma(self):
        with pytest.raises(InvalidThresholdError):
            canny(gray(CORPUS["constant"]), 50, 100, -1.0)

    def test_too_small_image(self):
        with pytest.raises(InvalidThresholdError):
            canny(gray(np.zeros((2, 5))), 50, 100, 1.0)

    def test_edge_map_rejects_non_binary(self):
        with pytest.raises(ValueError):
            EdgeMap(np.full((4, 4), 7, dtype=np.uint8))
