import numpy as np
import pytest

from proglf import data
from proglf.geometry import EncodingConfig, encode_rays, ray_grid_for_camera, scale_intrinsics
from proglf.network import ArchSpec, ProgressiveMLP, forward_batch, init, mac_count_per_ray
from proglf.render import (
    RenderPolicy,
    benchmark,
    build_lod_map,
    dither_mask,
    lod_for_distance,
    lod_map_foveated,
    render,
)

SMALL = ArchSpec(input_dim=24, output_dim=4, num_weight_layers=4, lod_widths=(4, 8, 12, 16))


@pytest.fixture(scope="module")
def small_net():
    return init(SMALL, 0)


@pytest.fixture(scope="module")
def cam():
    return data.orbit_camera(16, 12, 0.4, 0.1, 1.5)


class TestDitherMask:
    def test_extremes(self):
        assert not dither_mask(10, 10, 0.0, 1).any()
        assert dither_mask(10, 10, 1.0, 1).all()

    def test_exact_count(self):
        assert dither_mask(10, 10, 0.5, 3).sum() == 50
        for f in (0.25, 0.33, 0.75):
            assert dither_mask(8, 8, f, 7).sum() == round(f * 64)

    def test_nested(self):
        a = dither_mask(12, 9, 0.3, 42)
        b = dither_mask(12, 9, 0.7, 42)
        assert not (a & ~b).any()

    def test_deterministic_per_seed(self):
        assert np.array_equal(dither_mask(6, 6, 0.5, 1), dither_mask(6, 6, 0.5, 1))
        assert not np.array_equal(dither_mask(20, 20, 0.5, 1), dither_mask(20, 20, 0.5, 2))


class TestFoveatedMap:
    def test_huge_radii_uniform_top(self):
        m = lod_map_foveated(10, 10, (5, 5), (100, 200, 300), num_lods=4)
        assert (m == 4).all()

    def test_gaze_pixel_top_lod(self):
        m = lod_map_foveated(20, 20, (10.5, 10.5), (2, 4, 6), num_lods=4)
        assert m[10, 10] == 4

    def test_non_increasing_with_distance(self):
        m = lod_map_foveated(30, 30, (15, 15), (3, 6, 9), num_lods=4)
        row = m[15, 15:]
        assert all(a >= b for a, b in zip(row, row[1:]))
        assert m.min() == 1

    def test_gaze_outside_rejected(self):
        with pytest.raises(ValueError):
            lod_map_foveated(10, 10, (20, 5), (2, 4, 6), num_lods=4)

    def test_wrong_radii_count_rejected(self):
        with pytest.raises(ValueError):
            lod_map_foveated(10, 10, (5, 5), (2, 4), num_lods=4)


class TestDistanceLod:
    def center_cam(self, fy=192.0, depth=3.0):
        return data.orbit_camera(256, 192, 0.0, 0.0, depth)

    def test_frame_filling_object_top_lod(self):
        cam = self.center_cam()
        # projected diameter >= full height -> top
        k = lod_for_distance(cam, (0, 0, 0), 1.0, 192, num_lods=4)
        assert k == 4

    def test_eighth_height_gives_lod1(self):
        cam = self.center_cam()
        d = np.linalg.norm(cam.translation)
        # radius chosen so projected diameter is exactly full_height / 8
        radius = (192 / 8) * d / (2 * cam.fy)
        assert lod_for_distance(cam, (0, 0, 0), radius, 192, num_lods=4) == 1

    def test_doubling_distance_drops_at_most_one(self):
        prev = None
        for dist in (1.0, 2.0, 4.0, 8.0, 16.0):
            cam = data.orbit_camera(64, 48, 0.0, 0.0, dist)
            k = lod_for_distance(cam, (0, 0, 0), 0.5, 48, num_lods=4)
            if prev is not None:
                assert prev - 1 <= k <= prev
            prev = k

    def test_behind_camera_rejected(self):
        cam = data.orbit_camera(16, 16, 0.0, 0.0, 1.5)
        behind = cam.translation + cam.rotation[:, 2] * -1.0
        with pytest.raises(ValueError):
            lod_for_distance(cam, behind, 0.5, 16)


class TestRender:
    def test_per_pixel_lod_faithfulness(self, small_net, cam):
        policy = RenderPolicy(mode="foveated", gaze_px=(8, 6), radii=(2, 4, 6))
        result = render(small_net, cam, policy)
        dirs, moments = ray_grid_for_camera(cam)
        feats = encode_rays(dirs, moments, EncodingConfig())
        flat = result.rgba.reshape(-1, 4)
        for i, k in enumerate(result.lod_map.reshape(-1)):
            expect = forward_batch(small_net, feats[i : i + 1], int(k))[0]
            # batched matmul may reassociate float32 sums; allow one ulp
            assert np.allclose(flat[i], expect, atol=2e-6)

    def test_fixed_mac_accounting(self, small_net, cam):
        for k in (1, 2, 3, 4):
            result = render(small_net, cam, RenderPolicy(mode="fixed", k=k))
            expect = cam.width_px * cam.height_px * mac_count_per_ray(SMALL, k)
            assert result.mac_counts["network"] == expect

    def test_occupancy_skips_empty_view(self, small_net):
        # constant-zero occupancy net: everything is "empty"
        occ_arch = ArchSpec(input_dim=24, output_dim=1, num_weight_layers=3, lod_widths=(16,))
        occ = init(occ_arch, 0)
        for w in occ.weights:
            w[:] = 0
        occ.biases[-1][:] = -10.0  # sigmoid ~ 0
        cam = data.orbit_camera(8, 8, 0.0, 0.0, 1.5)
        policy = RenderPolicy(mode="fixed", k=4, use_occupancy=True)
        result = render(small_net, cam, policy, occupancy=occ)
        assert (result.lod_map == 0).all()
        assert result.mac_counts["network"] == 0
        assert not result.rgba.any()

    def test_dithered_map_fraction(self, small_net, cam):
        policy = RenderPolicy(mode="dithered", from_k=1, to_k=3, fraction=0.5, dither_seed=9)
        result = render(small_net, cam, policy)
        n = cam.width_px * cam.height_px
        assert (result.lod_map == 3).sum() == round(0.5 * n)
        assert (result.lod_map == 1).sum() == n - round(0.5 * n)

    def test_reduced_precision_close(self, small_net, cam):
        full = render(small_net, cam, RenderPolicy(mode="fixed", k=4))
        half = render(small_net, cam, RenderPolicy(mode="fixed", k=4, reduced_precision=True))
        assert np.allclose(full.rgba, half.rgba, atol=0.02)

    def test_invalid_policy_rejected(self):
        with pytest.raises(ValueError):
            RenderPolicy(mode="warp")
        with pytest.raises(ValueError):
            RenderPolicy(fraction=1.5)
        with pytest.raises(ValueError):
            RenderPolicy(radii=(5, 3))
        with pytest.raises(ValueError):
            RenderPolicy(occupancy_threshold=0.0)


class TestBenchmark:
    def test_mac_ratio_and_ordering(self, small_net):
        cams = [data.orbit_camera(16, 12, a, 0.0, 1.5) for a in (0.0, 1.0)]
        b1 = benchmark(small_net, cams, 1, repetitions=3)
        b4 = benchmark(small_net, cams, 4, repetitions=3)
        assert b4["hidden_mac_per_ray"] == 16 * b1["hidden_mac_per_ray"]
        assert b1["network_macs_per_frame"] < b4["network_macs_per_frame"]
        assert b1["frames_timed"] == 4

    def test_too_few_repetitions_rejected(self, small_net):
        with pytest.raises(ValueError):
            benchmark(small_net, [data.orbit_camera(8, 8, 0, 0, 1.5)], 1, repetitions=2)


class TestOccupancySoundness:
    def test_few_foreground_pixels_skipped(self, small_dataset):
        from proglf.training import TrainConfig, train_occupancy

        occ = train_occupancy(small_dataset, TrainConfig(batch_size=512, seed=0), steps=4000)
        net = init(ArchSpec(input_dim=24, output_dim=4, num_weight_layers=4,
                            lod_widths=(4, 8, 12, 16)), 1)
        vi = small_dataset.split_indices("test")[0]
        view = small_dataset.views[vi]
        policy = RenderPolicy(mode="fixed", k=4, use_occupancy=True, occupancy_threshold=0.1)
        result = render(net, view.camera, policy, occupancy=occ, encoding=small_dataset.encoding)
        # majority-covered pixels: their centre ray genuinely hits the subject
        # (edge pixels with alpha < 0.5 are ambiguous for a per-ray classifier)
        fg = view.rgba[:, :, 3] >= 0.5
        skipped_fg = (result.lod_map == 0) & fg
        assert skipped_fg.sum() / fg.sum() < 0.01
