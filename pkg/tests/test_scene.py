import dataclasses
import json
import math

import numpy as np
import pytest

from panoplan.errors import SceneParseError, SceneValidationError
from panoplan.scene import (
    NoiseSpec,
    PanoramaRecord,
    RoomContour,
    Scene,
    WdoDetection,
    WdoKind,
    load_scene,
    perturb,
    save_scene,
    scene_from_dict,
    scene_to_dict,
    validate_scene,
)
from panoplan.synth import HomeConfig, generate_synthetic_home


def make_wdo(kind=WdoKind.DOOR, x0=1.0, x1=2.0, y=2.0, normal=(0.0, -1.0)):
    return WdoDetection(
        kind=kind,
        endpoints=np.array([[x0, y], [x1, y]]),
        interior_normal=np.array(normal, dtype=float),
        confidence=1.0,
    )


def make_pano(pano_id=0, wdos=()):
    contour = RoomContour.from_vertices(
        np.array([[-2.0, -2.0], [3.0, -2.0], [3.0, 2.0], [-2.0, 2.0]])
    )
    return PanoramaRecord(
        id=pano_id,
        contour=contour,
        wdos=tuple(wdos),
        vanishing_angle=0.3,
        camera_height=1.6,
    )


class TestDetectionInvariants:
    def test_width_and_midpoint(self):
        w = make_wdo(x0=1.0, x1=3.5)
        assert w.width == pytest.approx(2.5)
        np.testing.assert_allclose(w.midpoint, [2.25, 2.0])

    def test_arrays_frozen(self):
        w = make_wdo()
        with pytest.raises(ValueError):
            w.endpoints[0, 0] = 9.0

    def test_normal_must_be_unit(self):
        with pytest.raises(SceneValidationError):
            make_wdo(normal=(0.0, -2.0)).validate()

    def test_normal_must_be_perpendicular(self):
        with pytest.raises(SceneValidationError):
            make_wdo(normal=(1.0, 0.0)).validate()

    def test_zero_width_rejected(self):
        with pytest.raises(SceneValidationError):
            make_wdo(x0=1.0, x1=1.0).validate()


class TestContourInvariants:
    def test_needs_three_vertices(self):
        contour = RoomContour.from_vertices(np.array([[0.0, 0.0], [1.0, 0.0]]))
        with pytest.raises(SceneValidationError):
            contour.validate()

    def test_must_contain_camera(self):
        off_center = np.array([[1.0, 1.0], [2.0, 1.0], [2.0, 2.0], [1.0, 2.0]])
        with pytest.raises(SceneValidationError):
            RoomContour.from_vertices(off_center).validate()

    def test_self_intersection_rejected(self):
        bowtie = np.array([[-1, -1], [1, 1], [1, -1], [-1, 1]], dtype=float)
        with pytest.raises(SceneValidationError):
            RoomContour.from_vertices(bowtie).validate()

    def test_confidence_length_checked(self):
        verts = np.array([[-1, -1], [1, -1], [1, 1], [-1, 1]], dtype=float)
        with pytest.raises(SceneValidationError):
            RoomContour(vertices=verts, confidence=np.ones(3)).validate()


class TestSceneValidation:
    def test_duplicate_ids_rejected(self):
        scene = Scene(panoramas=(make_pano(0), make_pano(0)), gt_floorplan=None)
        with pytest.raises(SceneValidationError):
            validate_scene(scene)

    def test_vanishing_angle_range(self):
        pano = dataclasses.replace(make_pano(), vanishing_angle=math.pi / 2)
        with pytest.raises(SceneValidationError):
            pano.validate()

    def test_camera_height_positive(self):
        pano = dataclasses.replace(make_pano(), camera_height=0.0)
        with pytest.raises(SceneValidationError):
            pano.validate()

    def test_generated_scene_validates(self):
        validate_scene(generate_synthetic_home(HomeConfig(n_rooms=3, seed=0)))


class TestRoundtrip:
    def test_save_load_byte_identical(self, tmp_path):
        scene = generate_synthetic_home(HomeConfig(n_rooms=3, panos_per_room=2, seed=5))
        p1 = tmp_path / "a.json"
        p2 = tmp_path / "b.json"
        save_scene(scene, str(p1))
        reloaded = load_scene(str(p1))
        save_scene(reloaded, str(p2))
        assert p1.read_bytes() == p2.read_bytes()

    def test_arrays_survive_exactly(self, tmp_path):
        scene = generate_synthetic_home(HomeConfig(n_rooms=2, seed=9))
        path = tmp_path / "scene.json"
        save_scene(scene, str(path))
        reloaded = load_scene(str(path))
        for a, b in zip(scene.panoramas, reloaded.panoramas):
            np.testing.assert_array_equal(a.contour.vertices, b.contour.vertices)
            assert a.camera_height == b.camera_height
            assert a.gt_pose.theta == b.gt_pose.theta
            for wa, wb in zip(a.wdos, b.wdos):
                np.testing.assert_array_equal(wa.endpoints, wb.endpoints)
                assert wa.kind == wb.kind

    def test_dict_roundtrip_without_gt(self):
        scene = generate_synthetic_home(HomeConfig(n_rooms=2, seed=1))
        stripped = Scene(
            panoramas=tuple(
                dataclasses.replace(p, gt_pose=None) for p in scene.panoramas
            ),
            gt_floorplan=None,
        )
        back = scene_from_dict(scene_to_dict(stripped))
        assert not back.has_gt_poses
        assert back.gt_floorplan is None


class TestParseErrors:
    def test_invalid_json_reports_position(self, tmp_path):
        path = tmp_path / "broken.json"
        path.write_text('{"format": "panoplan-scene",\n  "version": oops}')
        with pytest.raises(SceneParseError, match="line 2"):
            load_scene(str(path))

    def test_wrong_format_tag(self):
        with pytest.raises(SceneParseError, match="format"):
            scene_from_dict({"format": "other", "version": 1, "panoramas": []})

    def test_wrong_version(self):
        with pytest.raises(SceneParseError, match="version"):
            scene_from_dict({"format": "panoplan-scene", "version": 99, "panoramas": []})

    def test_missing_fields(self):
        with pytest.raises(SceneParseError):
            scene_from_dict({"format": "panoplan-scene", "version": 1,
                             "panoramas": [{"id": 0}]})

    def test_validation_error_on_load(self, tmp_path):
        scene = generate_synthetic_home(HomeConfig(n_rooms=2, seed=3))
        doc = scene_to_dict(scene)
        doc["panoramas"][1]["id"] = doc["panoramas"][0]["id"]
        path = tmp_path / "dupes.json"
        path.write_text(json.dumps(doc))
        with pytest.raises(SceneValidationError):
            load_scene(str(path))


class TestPerturb:
    def base(self):
        return generate_synthetic_home(HomeConfig(n_rooms=4, panos_per_room=2, seed=12))

    def test_deterministic(self):
        spec = NoiseSpec(sigma_vertex=0.05, sigma_wdo_endpoint=0.02, seed=3)
        a = perturb(self.base(), spec)
        b = perturb(self.base(), spec)
        for pa, pb in zip(a.panoramas, b.panoramas):
            np.testing.assert_array_equal(pa.contour.vertices, pb.contour.vertices)

    def test_gt_untouched(self):
        scene = self.base()
        noisy = perturb(scene, NoiseSpec(sigma_vertex=0.1, seed=0))
        for p, q in zip(scene.panoramas, noisy.panoramas):
            assert p.gt_pose == q.gt_pose
        for a, b in zip(scene.gt_floorplan, noisy.gt_floorplan):
            np.testing.assert_array_equal(a, b)

    def test_vertex_noise_std(self):
        # Aggregate over panos: the per-coordinate deviations should have
        # close to the requested standard deviation.
        scene = self.base()
        noisy = perturb(scene, NoiseSpec(sigma_vertex=0.05, seed=77))
        devs = np.concatenate(
            [
                (q.contour.vertices - p.contour.vertices).ravel()
                for p, q in zip(scene.panoramas, noisy.panoramas)
            ]
        )
        assert len(devs) > 300
        assert 0.043 < devs.std() < 0.057
        assert abs(devs.mean()) < 0.01

    def test_normals_stay_consistent(self):
        scene = self.base()
        noisy = perturb(scene, NoiseSpec(sigma_wdo_endpoint=0.05, seed=5))
        for p in noisy.panoramas:
            for w in p.wdos:
                seg = w.endpoints[1] - w.endpoints[0]
                assert abs(np.dot(seg, w.interior_normal)) < 1e-9
                assert np.linalg.norm(w.interior_normal) == pytest.approx(1.0)

    def test_drop_probability(self):
        scene = self.base()
        total = sum(len(p.wdos) for p in scene.panoramas)
        kept = []
        for seed in range(40):
            noisy = perturb(scene, NoiseSpec(p_drop_wdo=0.3, seed=seed))
            kept.append(sum(len(p.wdos) for p in noisy.panoramas))
        drop_rate = 1.0 - np.mean(kept) / total
        assert 0.25 < drop_rate < 0.35

    def test_vanishing_noise_wraps(self):
        scene = self.base()
        noisy = perturb(scene, NoiseSpec(sigma_vanishing=0.5, seed=2))
        for p in noisy.panoramas:
            assert 0.0 <= p.vanishing_angle < math.pi / 2

    def test_zero_noise_is_identity(self):
        scene = self.base()
        same = perturb(scene, NoiseSpec(seed=9))
        for p, q in zip(scene.panoramas, same.panoramas):
            np.testing.assert_array_equal(p.contour.vertices, q.contour.vertices)
            assert len(p.wdos) == len(q.wdos)
