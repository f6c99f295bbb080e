import numpy as np

from gsavatar.core import PoseState, validate, validate_rig
from gsavatar.deform import forward_kinematics, lbs
from gsavatar.toyrig import ToyRigSpec, make_animation, make_rig, make_scene


def test_same_seed_identical_rigs():
    a = make_rig(ToyRigSpec(seed=3))
    b = make_rig(ToyRigSpec(seed=3))
    np.testing.assert_array_equal(a.vertices, b.vertices)
    np.testing.assert_array_equal(a.vertex_shape_basis, b.vertex_shape_basis)
    np.testing.assert_array_equal(a.vertex_weights, b.vertex_weights)


def test_different_seed_differs():
    a = make_rig(ToyRigSpec(seed=1))
    b = make_rig(ToyRigSpec(seed=2))
    assert np.abs(a.vertex_shape_basis - b.vertex_shape_basis).max() > 0


def test_generated_assets_validate_clean():
    rig, cloud, poses, cams = make_scene(ToyRigSpec(), points_per_face=1)
    assert validate_rig(rig) == []
    assert validate(cloud, rig) == []


def test_jaw_open_moves_chin_not_skull_top():
    rig = make_rig(ToyRigSpec())
    theta = np.zeros((5, 3))
    theta[2, 0] = 0.3
    pose = PoseState(np.zeros(8), np.zeros(6), theta, np.zeros(3))
    tr = forward_kinematics(rig, pose)
    posed, _ = lbs(rig.vertices.astype(np.float64), tr,
                   rig.vertex_weights.astype(np.float64))
    disp = np.linalg.norm(posed - rig.vertices, axis=1)
    top = np.argmax(rig.vertices[:, 1])
    chin_region = (rig.vertices[:, 1] < -0.04) & (rig.vertices[:, 2] > 0.04)
    assert disp[top] < 1e-6
    assert disp[chin_region].max() > 5e-3


def test_rest_pose_keeps_template():
    rig = make_rig(ToyRigSpec())
    tr = forward_kinematics(rig, PoseState.rest(8, 6, 4))
    posed, _ = lbs(rig.vertices.astype(np.float64), tr,
                   rig.vertex_weights.astype(np.float64))
    np.testing.assert_allclose(posed, rig.vertices, atol=1e-12)


def test_eyeballs_one_hot():
    rig = make_rig(ToyRigSpec())
    w = rig.vertex_weights
    eye_rows = np.nonzero((w[:, 3] > 0) | (w[:, 4] > 0))[0]
    assert len(eye_rows) > 0
    np.testing.assert_allclose(w[eye_rows].max(axis=1), 1.0, atol=1e-7)


def test_blink_and_jaw_expression_slots():
    rig = make_rig(ToyRigSpec())
    # slot 0 (jaw assist) displaces downward near the chin
    assert rig.vertex_expr_basis[:, 1, 0].min() < -1e-3
    # slot 1 (blink) displaces downward near the eyes
    assert rig.vertex_expr_basis[:, 1, 1].min() < -1e-3


def test_animation_deterministic_and_sized():
    a = make_animation(ToyRigSpec(), 6)
    b = make_animation(ToyRigSpec(), 6)
    assert len(a) == 6
    for x, y in zip(a, b):
        np.testing.assert_array_equal(x.theta, y.theta)
        np.testing.assert_array_equal(x.psi, y.psi)


def test_scene_scales_with_points_per_face():
    rig, c1, _, _ = make_scene(ToyRigSpec(subdivision=8), points_per_face=1)
    _, c3, _, _ = make_scene(ToyRigSpec(subdivision=8), points_per_face=3)
    assert c3.n_points == 3 * c1.n_points
    assert c1.n_points == rig.n_faces
