import math

import numpy as np
import pytest

from src.augment.filters import (
    blur_array,
    convolution_matrix,
    gaussian_blur,
    gaussian_kernel,
    gaussian_noise,
    reflect_index,
)
from src.augment.geometry import AugmentParams, geometric_augment, resize_bilinear, rotate_array
from src.augment.pipeline import degrade_for_group, training_pipeline
from src.augment.rng import RngStream, stream_key
from src.errors import InvalidInputError
from src.models.image import ImageBuffer
from src.models.schemas import TestGroup, Variant


class TestKernel:
    @pytest.mark.parametrize("sigma", [0.5, 1.0, 2.5, 4.0, 8.0])
    def test_truncation_keeps_nearly_all_mass(self, sigma):
        kernel = gaussian_kernel(sigma)
        radius = len(kernel) // 2
        assert radius == math.ceil(3 * sigma)
        # center tap is 1 / (sum of the kept unnormalized weights)
        kept = 1.0 / kernel[radius]
        x = np.arange(-int(50 * sigma), int(50 * sigma) + 1, dtype=np.float64)
        full = math.fsum(np.exp(-(x**2) / (2 * sigma**2)))
        assert full == pytest.approx(sigma * math.sqrt(2 * math.pi), rel=0.02)
        assert 1 - kept / full < 0.003

    @pytest.mark.parametrize("sigma", [0.3, 1.0, 2.5, 32.0, 256.0])
    def test_normalized_symmetric(self, sigma):
        k = gaussian_kernel(sigma)
        assert abs(math.fsum(k) - 1.0) < 1e-12
        assert len(k) % 2 == 1
        assert np.allclose(k, k[::-1], atol=1e-15)
        assert len(k) <= 2 * math.ceil(3 * sigma) + 1

    def test_vanishing_sigma_is_identity(self):
        assert gaussian_kernel(1e-3).tolist() == [1.0]

    def test_rejects_non_positive(self):
        with pytest.raises(InvalidInputError):
            gaussian_kernel(0.0)

    def test_reflect_repeats_edge(self):
        assert reflect_index(np.array([-2, -1, 0, 4, 5, 6]), 5).tolist() == [1, 0, 0, 4, 4, 3]


class TestBlur:
    def test_constant_image_unchanged(self):
        img = ImageBuffer.constant(17, 11, 93)
        for sigma in (0.5, 3.0, 40.0):
            assert gaussian_blur(img, sigma) == img

    def test_five_by_five_oracle(self, random_image):
        img = random_image(5, 5, seed=4)
        sigma = 1.0
        k = gaussian_kernel(sigma)
        r = len(k) // 2
        src = img.as_float()
        horizontal = np.zeros((5, 5))
        for y in range(5):
            for x in range(5):
                for t in range(-r, r + 1):
                    xx = int(reflect_index(np.array([x + t]), 5)[0])
                    horizontal[y, x] += k[t + r] * src[y, xx]
        expected = np.zeros((5, 5))
        for y in range(5):
            for x in range(5):
                for t in range(-r, r + 1):
                    yy = int(reflect_index(np.array([y + t]), 5)[0])
                    expected[y, x] += k[t + r] * horizontal[yy, x]
        assert np.allclose(blur_array(src, sigma), expected, atol=1e-10)
        assert gaussian_blur(img, sigma).pixels.shape == (5, 5)

    def test_rows_of_convolution_matrix_sum_to_one(self):
        a = convolution_matrix(9, gaussian_kernel(4.0))
        assert np.allclose(a.sum(axis=1), 1.0, atol=1e-12)

    def test_heavy_blur_flattens(self, random_image):
        step = np.zeros((224, 224), dtype=np.uint8)
        step[:, 112:] = 255
        for img in (random_image(224, 224, seed=5), ImageBuffer(step)):
            out = gaussian_blur(img, 256.0).pixels
            assert int(out.max()) - int(out.min()) <= 2

    @pytest.mark.parametrize("sigma", [1.0, 3.5, 12.0])
    def test_mean_preserved(self, random_image, sigma):
        img = random_image(32, 24, seed=4)
        values = img.as_float()
        assert blur_array(values, sigma).mean() == pytest.approx(values.mean(), abs=1e-9)
        assert abs(gaussian_blur(img, sigma).as_float().mean() - values.mean()) <= 1.0

    def test_output_shape(self, random_image):
        assert gaussian_blur(random_image(13, 7), 2.0).pixels.shape == (7, 13)


class TestNoise:
    def test_empirical_std(self):
        img = ImageBuffer.constant(224, 224, 128)
        out = gaussian_noise(img, 30.0, RngStream(1, "noise")).as_float()
        assert abs(out.std() - 30.0) < 0.03 * 30.0

    def test_zero_sigma_is_identity(self, random_image):
        img = random_image()
        assert gaussian_noise(img, 0.0, RngStream(0)) == img

    def test_deterministic_per_stream(self, random_image):
        img = random_image()
        a = gaussian_noise(img, 12.0, RngStream(3, "s"))
        b = gaussian_noise(img, 12.0, RngStream(3, "s"))
        c = gaussian_noise(img, 12.0, RngStream(3, "t"))
        assert a == b
        assert a != c

    def test_negative_sigma(self, random_image):
        with pytest.raises(InvalidInputError):
            gaussian_noise(random_image(), -1.0, RngStream(0))


class TestGeometry:
    def test_all_coins_false_is_identity(self, random_image, scripted_rng):
        img = random_image()
        assert geometric_augment(img, AugmentParams(), scripted_rng([False] * 4)) == img

    def test_flips(self, random_image, scripted_rng):
        img = random_image(9, 6)
        out = geometric_augment(img, AugmentParams(), scripted_rng([False, True, True, False]))
        assert np.array_equal(out.pixels, img.pixels[::-1, ::-1])

    def test_shape_preserved(self, random_image):
        img = random_image(20, 14)
        out = geometric_augment(img, AugmentParams(apply_probability=1.0), RngStream(2, "geo"))
        assert out.pixels.shape == (14, 20)

    def test_zero_rotation_and_identity_resize(self, random_image):
        values = random_image(10, 10).as_float()
        assert np.allclose(rotate_array(values, 0.0), values)
        assert np.allclose(resize_bilinear(values, 10, 10), values)

    @pytest.mark.parametrize("degrees", [45.0, -45.0])
    def test_rotation_round_trip(self, degrees):
        yy, xx = np.mgrid[0:48, 0:48].astype(np.float64)
        values = np.rint(128 + 60 * np.sin(2 * np.pi * xx / 24) * np.cos(2 * np.pi * yy / 30))
        back = rotate_array(rotate_array(values, degrees), -degrees)
        # pixels whose round trip never samples a reflected border
        inside = np.hypot(yy - 23.5, xx - 23.5) <= 20
        assert np.mean(np.abs(np.rint(back) - values)[inside]) <= 3.0

    def test_quarter_turn(self, random_image):
        values = random_image(8, 8).as_float()
        assert np.allclose(rotate_array(values, 90.0), np.rot90(values, 1), atol=1e-9)


class TestPipeline:
    def test_variant_one_never_touches_intensities(self, random_image, scripted_rng):
        img = random_image()
        trace: list[str] = []
        out = training_pipeline(img, Variant.I, AugmentParams(), scripted_rng([False] * 4), trace)
        assert out == img
        assert trace == []

    def test_variant_two_blur_step(self, random_image, scripted_rng):
        img = random_image(32, 32)
        trace: list[str] = []
        rng = scripted_rng([True, False, False, False, False], uniforms=[3.0])
        out = training_pipeline(img, Variant.II, AugmentParams(), rng, trace)
        assert trace == ["blur"]
        assert out == gaussian_blur(img, 3.0)

    def test_variant_three_noise_step(self, random_image, scripted_rng):
        img = random_image()
        trace: list[str] = []
        rng = scripted_rng([True, False, False, False, False], uniforms=[10.0])
        out = training_pipeline(img, "III", AugmentParams(), rng, trace)
        assert trace == ["noise"]
        assert rng.normal_calls == 1
        assert out == img

    def test_unknown_variant(self, random_image, scripted_rng):
        with pytest.raises(InvalidInputError):
            training_pipeline(random_image(), "IV", AugmentParams(), scripted_rng([]))

    def test_blur_frequency(self, random_image):
        img = random_image(32, 32)
        hits = 0
        for i in range(400):
            trace: list[str] = []
            training_pipeline(img, Variant.II, AugmentParams(), RngStream(5, f"freq/{i}"), trace)
            hits += trace == ["blur"]
        assert 0.4 <= hits / 400 <= 0.6

    def test_noise_frequency_without_blur(self, random_image):
        img = random_image(8, 8)
        runs, noisy = 10_000, 0
        for i in range(runs):
            trace: list[str] = []
            training_pipeline(img, Variant.III, AugmentParams(), RngStream(6, f"freq/{i}"), trace)
            assert "blur" not in trace
            noisy += trace == ["noise"]
        assert abs(noisy / runs - 0.5) <= 0.02

    def test_deterministic(self, random_image):
        img = random_image(40, 40)
        params = AugmentParams()
        a = training_pipeline(img, Variant.III, params, RngStream(9, "det"))
        b = training_pipeline(img, Variant.III, params, RngStream(9, "det"))
        assert a == b


class TestRng:
    def test_stream_key_is_stable(self):
        assert stream_key("a", 1) == stream_key("a", 1)
        assert stream_key("a", 1) != stream_key("a", 2)

    def test_streams_are_independent_of_call_order(self):
        first = RngStream(4, "x").uniform(0, 1)
        RngStream(4, "y").uniform(0, 1)
        assert RngStream(4, "x").uniform(0, 1) == first
        assert RngStream(4, "x").derive(1).uniform(0, 1) != first


class TestDegradeForGroup:
    def test_clean_group_is_untouched(self, random_image):
        img = random_image(16, 16)
        out, blur_sigma, noise_sigma = degrade_for_group(img, TestGroup.CLEAN, RngStream(1, "g"))
        assert out == img
        assert blur_sigma is None and noise_sigma is None

    def test_sigmas_follow_group(self, random_image):
        img = random_image(16, 16)
        for i in range(50):
            _, b, n = degrade_for_group(img, "B", RngStream(2, f"b/{i}"), blur_cap=8.0)
            assert n is None and 1.0 <= b <= 8.0
            _, b, n = degrade_for_group(img, "C", RngStream(2, f"c/{i}"), noise_cap=12.0)
            assert b is None and 1.0 <= n <= 12.0
            _, b, n = degrade_for_group(img, TestGroup.BLUR_NOISE, RngStream(2, f"d/{i}"))
            assert 1.0 <= b <= 32.0 and 1.0 <= n <= 30.0

    def test_blur_then_noise(self, random_image, scripted_rng):
        img = random_image(16, 16)
        rng = scripted_rng([], uniforms=[2.0, 5.0])
        out, b, n = degrade_for_group(img, TestGroup.BLUR_NOISE, rng)
        assert (b, n) == (2.0, 5.0)
        assert rng.normal_calls == 1
        assert out == gaussian_blur(img, 2.0)

    def test_deterministic(self, random_image):
        img = random_image(16, 16)
        a = degrade_for_group(img, "D", RngStream(3, "same"))
        b = degrade_for_group(img, "D", RngStream(3, "same"))
        assert a == b

    def test_unknown_group(self, random_image):
        with pytest.raises(InvalidInputError):
            degrade_for_group(random_image(), "E", RngStream(0, "x"))
