import numpy as np
import pytest

from halftonelab import _kernels
from halftonelab.classic import (
    FLOYD_STEINBERG,
    JARVIS,
    DiffusionKernel,
    ThresholdMatrix,
    VariableKernelTable,
    bayer_matrix,
    dbs,
    error_diffusion,
    error_diffusion_variable,
    generate_vac_mask,
    load_mask,
    load_variable_kernel_table,
    ordered_dither,
    save_mask,
    white_noise_matrix,
    white_noise_threshold,
)
from halftonelab.errors import (
    InvalidParam,
    MalformedTable,
    WeightsDontNormalize,
)
from halftonelab.hvs import apply_hvs
from halftonelab.image import BinaryImage, GrayImage, constant_image
from halftonelab.metrics import mse
from halftonelab.spectral import bluenoise_report


class TestOrderedDither:
    def test_constant_zero(self):
        h = ordered_dither(constant_image(16, 16, 0.0), bayer_matrix(4))
        assert np.all(h.data == 0)

    def test_constant_one(self):
        h = ordered_dither(constant_image(16, 16, 1.0), bayer_matrix(4))
        assert np.all(h.data == 1)

    def test_bayer2_half_gray(self):
        h = ordered_dither(constant_image(8, 8, 0.5), bayer_matrix(2))
        tiles = h.data.reshape(4, 2, 4, 2).sum(axis=(1, 3))
        assert np.all(tiles == 2)

    @pytest.mark.parametrize("g", [0.1, 0.2, 0.3, 0.4, 0.5, 0.6, 0.7, 0.8, 0.9])
    def test_on_fraction_tracks_gray(self, g):
        m = bayer_matrix(8)
        h = ordered_dither(constant_image(64, 64, g), m)
        assert abs(h.data.mean() - g) <= 1 / m.side**2

    def test_threshold_matrix_validation(self):
        with pytest.raises(InvalidParam):
            ThresholdMatrix(np.zeros((4, 4)))


class TestVacMask:
    @pytest.fixture(scope="class")
    def mask(self, gauss_hvs):
        return generate_vac_mask(32, seed=5, hvs=gauss_hvs)

    def test_is_valid_threshold_matrix(self, mask):
        # ThresholdMatrix construction enforces the permutation invariant
        assert mask.side == 32

    def test_deterministic(self, gauss_hvs, mask):
        again = generate_vac_mask(32, seed=5, hvs=gauss_hvs)
        assert np.array_equal(mask.thresholds, again.thresholds)

    @pytest.mark.parametrize("g", [0.1, 0.3, 0.5, 0.7, 0.9])
    def test_tone(self, mask, g):
        h = ordered_dither(constant_image(64, 64, g), mask)
        assert abs(h.data.mean() - g) <= 1 / mask.side**2

    def test_less_low_frequency_than_white_mask(self, mask):
        white = white_noise_matrix(32, seed=5)
        hv = ordered_dither(constant_image(32, 32, 0.5), mask)
        hw = ordered_dither(constant_image(32, 32, 0.5), white)
        rv = bluenoise_report(hv, gray=0.5)
        rw = bluenoise_report(hw, gray=0.5)
        assert rv.low_freq_power_ratio < rw.low_freq_power_ratio

    def test_side_validation(self, gauss_hvs):
        with pytest.raises(InvalidParam):
            generate_vac_mask(24, seed=0, hvs=gauss_hvs)

    def test_save_load_round_trip(self, mask, tmp_path):
        save_mask(mask, tmp_path / "m.txt")
        again = load_mask(tmp_path / "m.txt")
        assert np.array_equal(mask.thresholds, again.thresholds)


class TestErrorDiffusion:
    def test_constant_extremes(self):
        assert np.all(error_diffusion(constant_image(8, 8, 0.0),
                                      FLOYD_STEINBERG).data == 0)
        assert np.all(error_diffusion(constant_image(8, 8, 1.0),
                                      FLOYD_STEINBERG).data == 1)

    def test_single_pixel_threshold(self):
        h = error_diffusion(constant_image(1, 1, 0.6), FLOYD_STEINBERG)
        assert h.data[0, 0] == 1

    def test_tie_maps_to_one(self):
        h = error_diffusion(constant_image(1, 1, 0.5), FLOYD_STEINBERG)
        assert h.data[0, 0] == 1

    @pytest.mark.parametrize("g", [0.1, 0.2, 0.3, 0.4, 0.5, 0.6, 0.7, 0.8, 0.9])
    def test_tone_preservation(self, g):
        h = error_diffusion(constant_image(64, 64, g), FLOYD_STEINBERG)
        assert abs(h.data.mean() - g) <= 0.01

    def test_jarvis_tone(self):
        h = error_diffusion(constant_image(64, 64, 0.37), JARVIS)
        assert abs(h.data.mean() - 0.37) <= 0.01

    def test_kernel_validation(self):
        with pytest.raises(InvalidParam):
            DiffusionKernel(taps=((-1, 0, 1.0),))  # points backwards
        with pytest.raises(WeightsDontNormalize):
            DiffusionKernel(taps=((1, 0, 0.5),))


class TestVariableKernelTable:
    @staticmethod
    def write_table(path, rows):
        path.write_text("\n".join(rows) + "\n")
        return path

    def test_constant_table_matches_fixed_kernel(self, tmp_path):
        w = (7 / 15, 3 / 15, 5 / 15)
        rows = [f"{lvl} {w[0]!r} {w[1]!r} {w[2]!r}" for lvl in range(256)]
        table = load_variable_kernel_table(self.write_table(tmp_path / "t.txt", rows))
        fixed = DiffusionKernel(taps=((1, 0, w[0]), (-1, 1, w[1]), (0, 1, w[2])))
        from halftonelab.corpus import synthetic_gray

        c = synthetic_gray(32, 32, 3, "mix")
        assert np.array_equal(error_diffusion_variable(c, table).data,
                              error_diffusion(c, fixed).data)

    def test_missing_row(self, tmp_path):
        rows = [f"{lvl} 0.5 0.25 0.25" for lvl in range(255)]  # level 255 absent
        with pytest.raises(MalformedTable):
            load_variable_kernel_table(self.write_table(tmp_path / "t.txt", rows))

    def test_weights_dont_normalize(self, tmp_path):
        rows = [f"{lvl} 0.5 0.25 0.25" for lvl in range(255)]
        rows.append("255 0.5 0.2 0.2")  # sums to 0.9
        with pytest.raises(WeightsDontNormalize):
            load_variable_kernel_table(self.write_table(tmp_path / "t.txt", rows))

    def test_bundled_placeholder_loads(self):
        import importlib.resources as res

        path = res.files("halftonelab").joinpath(
            "data/ostromoukhov_placeholder.txt")
        table = load_variable_kernel_table(str(path))
        assert isinstance(table, VariableKernelTable)
        h = error_diffusion_variable(constant_image(64, 64, 0.3), table)
        assert abs(h.data.mean() - 0.3) <= 0.01


class TestDbs:
    def test_error_never_increases(self, gauss_hvs, smooth_image):
        init = white_noise_threshold(smooth_image, 3)
        out = dbs(smooth_image, init, gauss_hvs, max_sweeps=6)
        before = mse(apply_hvs(gauss_hvs, init.astype_float()),
                     apply_hvs(gauss_hvs, smooth_image.data))
        after = mse(apply_hvs(gauss_hvs, out.astype_float()),
                    apply_hvs(gauss_hvs, smooth_image.data))
        assert after <= before

    def test_converged_state_is_fixed_point(self, gauss_hvs, smooth_image):
        init = white_noise_threshold(smooth_image, 3)
        converged = dbs(smooth_image, init, gauss_hvs, max_sweeps=40)
        again = dbs(smooth_image, converged, gauss_hvs, max_sweeps=1)
        assert np.array_equal(converged.data, again.data)

    def test_incremental_delta_matches_full_recompute(self, gauss_hvs):
        rng = np.random.default_rng(7)
        c = rng.uniform(0.05, 0.95, size=(32, 32))
        h = (rng.uniform(size=(32, 32)) < c).astype(np.uint8)
        e = (apply_hvs(gauss_hvs, h.astype(float))
             - apply_hvs(gauss_hvs, c))
        r = gauss_hvs.radius
        cy, cyn = _kernels.mirror_copies(32, r)
        cx, cxn = _kernels.mirror_copies(32, r)
        sse = float(np.sum(e * e))
        for _ in range(500):
            y, x = rng.integers(32), rng.integers(32)
            d = 1.0 - 2.0 * h[y, x]
            delta = _kernels.toggle_delta(e, gauss_hvs.kernel, r, y, x, d,
                                          cy, cyn, cx, cxn)
            h2 = h.copy()
            h2[y, x] = 1 - h2[y, x]
            e2 = (apply_hvs(gauss_hvs, h2.astype(float))
                  - apply_hvs(gauss_hvs, c))
            full = float(np.sum(e2 * e2)) - sse
            assert abs(delta - full) < 1e-9

    def test_beats_initialization(self, gauss_hvs, smooth_image):
        from halftonelab.metrics import hvs_psnr

        init = white_noise_threshold(smooth_image, 3)
        out = dbs(smooth_image, init, gauss_hvs, max_sweeps=8)
        assert (hvs_psnr(out, smooth_image, gauss_hvs)
                > hvs_psnr(init, smooth_image, gauss_hvs))
