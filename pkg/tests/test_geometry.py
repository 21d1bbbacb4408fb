import numpy as np
import pytest
from hypothesis import given, strategies as st

from proglf.geometry import (
    Camera,
    EncodingConfig,
    PluckerRay,
    encode_ray,
    encode_rays,
    make_plucker,
    ray_grid_for_camera,
    rays_for_camera,
    scale_intrinsics,
)


def identity_camera(width=1, height=1, fx=1.0, fy=1.0, cx=0.5, cy=0.5):
    return Camera(
        width_px=width, height_px=height, fx=fx, fy=fy, cx=cx, cy=cy,
        rotation=np.eye(3), translation=np.zeros(3),
    )


class TestMakePlucker:
    def test_ray_through_origin_has_zero_moment(self):
        ray = make_plucker((0, 0, 0), (0, 0, 2))
        assert np.allclose(ray.direction, [0, 0, 1])
        assert np.allclose(ray.moment, [0, 0, 0])

    def test_hand_computed_moment(self):
        ray = make_plucker((1, 0, 0), (0, 0, 1))
        assert np.allclose(ray.direction, [0, 0, 1])
        assert np.allclose(ray.moment, [0, -1, 0])

    def test_origin_slide_invariance(self):
        a = make_plucker((1, 0, 0), (0, 0, 1))
        b = make_plucker((1, 0, 5), (0, 0, 1))
        assert np.allclose(a.direction, b.direction)
        assert np.allclose(a.moment, b.moment)

    def test_zero_direction_rejected(self):
        with pytest.raises(ValueError):
            make_plucker((1, 2, 3), (0, 0, 0))

    @given(
        st.lists(st.floats(-10, 10), min_size=3, max_size=3),
        st.lists(st.floats(-10, 10), min_size=3, max_size=3),
    )
    def test_plucker_constraint(self, origin, direction):
        if np.linalg.norm(direction) < 1e-3:
            return
        ray = make_plucker(origin, direction)
        assert abs(float(ray.direction @ ray.moment)) < 1e-6
        assert abs(np.linalg.norm(ray.direction) - 1) < 1e-6


class TestRaysForCamera:
    def test_principal_ray(self):
        cam = identity_camera()
        rays = rays_for_camera(cam)
        assert np.allclose(rays[0][0].direction, [0, 0, 1])

    def test_all_rays_satisfy_constraint(self):
        cam = Camera(
            width_px=2, height_px=2, fx=2.0, fy=2.0, cx=1.0, cy=1.0,
            rotation=np.eye(3), translation=np.array([1.0, 2.0, 3.0]),
        )
        rays = rays_for_camera(cam)
        assert len(rays) == 2 and len(rays[0]) == 2
        for row in rays:
            for r in row:
                assert abs(float(r.direction @ r.moment)) < 1e-6

    def test_grid_matches_nested_list(self):
        cam = Camera(
            width_px=3, height_px=2, fx=2.5, fy=2.0, cx=1.5, cy=1.0,
            rotation=np.eye(3), translation=np.array([0.5, -0.5, 0.0]),
        )
        dirs, moments = ray_grid_for_camera(cam)
        rays = rays_for_camera(cam)
        for r in range(2):
            for c in range(3):
                i = r * 3 + c
                assert np.allclose(rays[r][c].direction, dirs[i])
                assert np.allclose(rays[r][c].moment, moments[i])

    def test_identity_scale_is_noop_for_rays(self):
        cam = identity_camera(width=4, height=4, fx=3.0, fy=3.0, cx=2.0, cy=2.0)
        d1, m1 = ray_grid_for_camera(cam)
        d2, m2 = ray_grid_for_camera(scale_intrinsics(cam, 1))
        assert np.array_equal(d1, d2) and np.array_equal(m1, m2)


class TestScaleIntrinsics:
    def test_capture_resolution_to_eighth(self):
        cam = identity_camera(width=4032, height=3040, fx=3000.0, fy=3000.0, cx=2016.0, cy=1520.0)
        s = scale_intrinsics(cam, "1/8")
        assert (s.width_px, s.height_px) == (504, 380)
        assert s.fx == pytest.approx(375.0)

    def test_identity(self):
        cam = identity_camera(width=8, height=8)
        s = scale_intrinsics(cam, 1)
        assert (s.width_px, s.height_px, s.fx, s.fy, s.cx, s.cy) == (
            cam.width_px, cam.height_px, cam.fx, cam.fy, cam.cx, cam.cy,
        )
        assert np.array_equal(s.rotation, cam.rotation)

    def test_desk_scale_eighth(self):
        cam = identity_camera(width=256, height=192, cx=128.0, cy=96.0)
        s = scale_intrinsics(cam, 0.125)
        assert (s.width_px, s.height_px) == (32, 24)

    def test_composition_half_half_is_quarter(self):
        cam = identity_camera(width=64, height=32, fx=10.0, fy=12.0, cx=32.0, cy=16.0)
        twice = scale_intrinsics(scale_intrinsics(cam, "1/2"), "1/2")
        once = scale_intrinsics(cam, "1/4")
        assert twice.width_px == once.width_px and twice.height_px == once.height_px
        assert twice.fx == pytest.approx(once.fx) and twice.cy == pytest.approx(once.cy)

    def test_non_integral_rejected(self):
        cam = identity_camera(width=10, height=10)
        with pytest.raises(ValueError):
            scale_intrinsics(cam, "1/4")


class TestEncodeRay:
    def test_zero_components_encode_to_sin0_cos1(self):
        ray = PluckerRay(direction=np.array([0.0, 0.0, 1.0]), moment=np.zeros(3))
        feat = encode_ray(ray, EncodingConfig())
        assert len(feat) == 24
        # dx = 0: first two entries are (sin 0, cos 0)
        assert feat[0] == pytest.approx(0.0)
        assert feat[1] == pytest.approx(1.0)

    def test_default_length_is_24(self):
        cfg = EncodingConfig()
        assert cfg.encoded_dim == 24

    def test_raw_passthrough_length(self):
        cfg = EncodingConfig(num_frequencies=1, include_raw=True)
        assert cfg.encoded_dim == 18
        ray = make_plucker((1, 0, 0), (0, 1, 0))
        assert len(encode_ray(ray, cfg)) == 18

    def test_deterministic(self):
        ray = make_plucker((0.3, -0.2, 1.1), (0.5, 0.5, 0.1))
        cfg = EncodingConfig()
        assert np.array_equal(encode_ray(ray, cfg), encode_ray(ray, cfg))

    def test_batch_matches_single(self):
        rays = [make_plucker((i, 0, 0), (0.1, 0.2, 1.0)) for i in range(3)]
        cfg = EncodingConfig()
        dirs = np.stack([r.direction for r in rays])
        moms = np.stack([r.moment for r in rays])
        batch = encode_rays(dirs, moms, cfg)
        for i, r in enumerate(rays):
            assert np.array_equal(batch[i], encode_ray(r, cfg))


class TestCameraValidation:
    def test_non_orthonormal_rotation_rejected(self):
        with pytest.raises(ValueError):
            identity_camera().__class__(
                width_px=1, height_px=1, fx=1.0, fy=1.0, cx=0.5, cy=0.5,
                rotation=np.eye(3) * 2.0, translation=np.zeros(3),
            )

    def test_bad_resolution_rejected(self):
        with pytest.raises(ValueError):
            identity_camera(width=0)

    def test_dict_round_trip(self):
        cam = Camera(
            width_px=5, height_px=3, fx=2.0, fy=2.5, cx=2.5, cy=1.5,
            rotation=np.eye(3), translation=np.array([1.0, 2.0, 3.0]),
        )
        back = Camera.from_dict(cam.to_dict())
        assert back.width_px == cam.width_px
        assert np.allclose(back.rotation, cam.rotation)
        assert np.allclose(back.translation, cam.translation)
