import json
import math

import numpy as np
import pytest

import layoutpnp as lp


def test_projection_and_plane():
    k = lp.CameraIntrinsics()
    k.fx = k.fy = 100.0
    k.cx = k.cy = 50.0
    px = lp.project(k, lp.RigidTransform.identity(), np.array([1.0, 0.0, 2.0]))
    assert px.u == pytest.approx(100.0)
    assert px.v == pytest.approx(50.0)

    pts = np.array([[0, 0, 1], [1, 0, 1], [0, 1, 1], [1, 1, 1]], dtype=float)
    assert np.allclose(lp.fit_plane(pts).coeffs(), [0, 0, 1, -1])


def test_quaternion_round_trip():
    q = lp.UnitQuaternion.from_axis_angle(np.array([0.0, 0.0, 1.0]), 0.5)
    r = lp.quat_to_matrix(q.coeffs())
    assert np.allclose(r @ r.T, np.eye(3))
    back = lp.matrix_to_quat(r)
    assert lp.rotation_angle_between(q, back) < 1e-12


def test_noiseless_scene_recovery():
    cfg = lp.SynthConfig()
    cfg.seed = 3
    gt = lp.generate_scene(cfg)
    sol = lp.arrange_scene(gt.to_spec())
    for obj in gt.objects:
        err = lp.pose_error(gt.camera_transform(obj.id), sol.transforms[obj.id])
        assert err.rotation_deg < 1e-3
        assert err.translation < 1e-5 * gt.scene_extent
    assert sol.loss_trace[0].step == 0
    assert len(sol.loss_trace) == 201


def test_errors_carry_a_code():
    with pytest.raises(lp.Error) as info:
        lp.UnitQuaternion(0.0, 0.0, 0.0, 0.0)
    assert info.value.code == "InvalidInput"


def test_baselines():
    objs = [lp.SceneObject.from_extent(f"o{i}", np.zeros(3), np.ones(3), np.array([[0.5, 0.5, 0.5]]))
            for i in range(4)]
    circ = lp.baseline_circular(objs, 1.0)
    angles = sorted(math.atan2(t.translation[1], t.translation[0]) % (2 * math.pi) for t in circ.values())
    assert np.allclose(np.diff(angles), math.pi / 2)
    a = lp.baseline_uniform(objs, 7)
    b = lp.baseline_uniform(objs, 7)
    assert all(np.array_equal(a[i].translation, b[i].translation) for i in a)


def test_solution_json_round_trip():
    sol = lp.SceneSolution()
    sol.transforms = {"box": lp.RigidTransform.from_translation(np.array([0.1, 0.2, 3.0]))}
    text = lp.dump_solution(sol)
    assert json.loads(text)["version"] == "1"
    assert lp.dump_solution(lp.parse_solution(text)) == text


def test_cli_entry(tmp_path):
    scene = tmp_path / "s.json"
    code, out, err = lp.run_cli(["synth", "-o", str(scene), "--seed", "2"])
    assert code == 0, err
    assert scene.exists()
    code, _, err = lp.run_cli(["solve", str(tmp_path / "missing.json"), "-o", str(tmp_path / "x.json")])
    assert code == 1
    assert json.loads(err)["error"]["code"] == "IoError"
