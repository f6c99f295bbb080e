import numpy as np
import pytest

from gsavatar import io as gio
from gsavatar.envlight import bake_environment
from gsavatar.toyrig import ToyRigSpec, default_camera, make_animation, make_rig
from conftest import random_cloud

CLOUD_FIELDS = ("positions", "rotations", "log_scales", "opacities", "albedo",
                "roughness", "f0", "shape_basis", "expr_basis", "pose_basis",
                "blend_weights")


# --- avatar container ----------------------------------------------------------

def test_avatar_roundtrip_bit_exact(tmp_path):
    cloud = random_cloud(37, 0, n_shape=5, n_expr=4, n_joints=3)
    path = tmp_path / "a.gsav"
    gio.save_avatar(path, cloud)
    back = gio.load_avatar(path)
    for f in CLOUD_FIELDS:
        np.testing.assert_array_equal(getattr(back, f), getattr(cloud, f))
    assert back.ranges == cloud.ranges


def test_avatar_double_roundtrip_stable(tmp_path):
    cloud = random_cloud(11, 1)
    gio.save_avatar(tmp_path / "a.gsav", cloud)
    first = (tmp_path / "a.gsav").read_bytes()
    gio.save_avatar(tmp_path / "b.gsav", gio.load_avatar(tmp_path / "a.gsav"))
    assert (tmp_path / "b.gsav").read_bytes() == first


def test_avatar_bad_magic(tmp_path):
    p = tmp_path / "bad.gsav"
    p.write_bytes(b"NOPE" + b"\x00" * 64)
    with pytest.raises(gio.BadMagicError):
        gio.load_avatar(p)


def test_avatar_version_rejected(tmp_path):
    cloud = random_cloud(3, 2)
    p = tmp_path / "a.gsav"
    gio.save_avatar(p, cloud)
    raw = bytearray(p.read_bytes())
    raw[4] = 99  # bump version little-endian low byte
    p.write_bytes(bytes(raw))
    with pytest.raises(gio.VersionError) as err:
        gio.load_avatar(p)
    assert "99" in str(err.value)


def test_avatar_truncated_names_array(tmp_path):
    cloud = random_cloud(6, 3)
    p = tmp_path / "a.gsav"
    gio.save_avatar(p, cloud)
    raw = p.read_bytes()
    p.write_bytes(raw[:len(raw) - 10])
    with pytest.raises(gio.TruncatedError) as err:
        gio.load_avatar(p)
    assert "blend_weights" in str(err.value)


def test_avatar_trailing_bytes_dim_inconsistency(tmp_path):
    cloud = random_cloud(6, 4)
    p = tmp_path / "a.gsav"
    gio.save_avatar(p, cloud)
    p.write_bytes(p.read_bytes() + b"\x00" * 8)
    with pytest.raises(gio.DimensionError):
        gio.load_avatar(p)


# --- rig container ---------------------------------------------------------------

def test_rig_roundtrip(tmp_path):
    rig = make_rig(ToyRigSpec(subdivision=8))
    p = tmp_path / "r.gsrg"
    gio.save_rig(p, rig)
    back = gio.load_rig(p)
    np.testing.assert_array_equal(back.vertices, rig.vertices)
    np.testing.assert_array_equal(back.faces, rig.faces)
    np.testing.assert_array_equal(back.joint_parents, rig.joint_parents)
    np.testing.assert_array_equal(back.vertex_weights, rig.vertex_weights)
    assert back.jaw_index == rig.jaw_index


def test_rig_bad_magic(tmp_path):
    p = tmp_path / "x.gsrg"
    p.write_bytes(b"XXXX" + b"\x00" * 16)
    with pytest.raises(gio.BadMagicError):
        gio.load_rig(p)


# --- light container --------------------------------------------------------------

@pytest.fixture(scope="module")
def baked_env():
    h, w = 16, 32
    v, u = np.meshgrid(np.linspace(0, 1, h), np.linspace(0, 1, w),
                       indexing="ij")
    img = np.stack([0.2 + 0.5 * (1 - v)] * 3, axis=-1)
    return bake_environment(img, irr_res=8, env_res=16, mips=2, lut_res=16,
                            seed=0, prefilter_samples=64, lut_samples=128)


def test_light_roundtrip(tmp_path, baked_env):
    p = tmp_path / "l.gslt"
    gio.save_light(p, baked_env, meta={"seed": 0})
    back = gio.load_light(p)
    np.testing.assert_array_equal(back.irradiance.faces,
                                  baked_env.irradiance.faces)
    for a, b in zip(back.prefiltered, baked_env.prefiltered):
        np.testing.assert_array_equal(a.faces, b.faces)
    np.testing.assert_array_equal(back.brdf_lut, baked_env.brdf_lut)


def test_light_bad_magic(tmp_path):
    p = tmp_path / "x.gslt"
    p.write_bytes(b"ABCD" + b"\x00" * 32)
    with pytest.raises(gio.BadMagicError):
        gio.load_light(p)


# --- animation + camera -----------------------------------------------------------

def test_animation_roundtrip(tmp_path):
    poses = make_animation(ToyRigSpec(), n_frames=5)
    p = tmp_path / "anim.jsonl"
    gio.save_animation(p, poses)
    back = gio.load_animation(p)
    assert len(back) == 5
    for a, b in zip(back, poses):
        np.testing.assert_array_equal(a.theta, b.theta)
        np.testing.assert_array_equal(a.psi, b.psi)
        np.testing.assert_array_equal(a.beta, b.beta)


def test_animation_dim_change_rejected(tmp_path):
    p = tmp_path / "anim.jsonl"
    p.write_text('{"frame":0,"beta":[0],"psi":[0,0],"theta":[[0,0,0]],'
                 '"translation":[0,0,0]}\n'
                 '{"frame":1,"psi":[0],"theta":[[0,0,0]],'
                 '"translation":[0,0,0]}\n')
    with pytest.raises(gio.DimensionError):
        gio.load_animation(p)


def test_camera_roundtrip(tmp_path):
    cam = default_camera(128, 96)
    p = tmp_path / "cam.json"
    gio.save_camera(p, cam)
    back = gio.load_camera(p)
    assert (back.width, back.height) == (128, 96)
    np.testing.assert_array_equal(back.world_to_camera, cam.world_to_camera)
    assert back.fx == cam.fx


def test_cameras_list_roundtrip(tmp_path):
    cams = [default_camera(64, 64), default_camera(32, 32)]
    p = tmp_path / "cams.json"
    gio.save_cameras(p, cams)
    back = gio.load_cameras(p)
    assert len(back) == 2 and back[1].width == 32


# --- PFM / HDR ----------------------------------------------------------------------

def test_pfm_roundtrip_color(tmp_path):
    rng = np.random.default_rng(0)
    img = rng.uniform(0, 10, (7, 5, 3)).astype(np.float32)
    p = tmp_path / "x.pfm"
    gio.write_pfm(p, img)
    np.testing.assert_array_equal(gio.read_pfm(p), img)


def test_pfm_roundtrip_gray(tmp_path):
    img = np.arange(12, dtype=np.float32).reshape(3, 4)
    p = tmp_path / "g.pfm"
    gio.write_pfm(p, img)
    np.testing.assert_array_equal(gio.read_pfm(p), img)


def test_hdr_roundtrip_flat(tmp_path):
    rng = np.random.default_rng(1)
    img = rng.uniform(0.01, 8.0, (6, 9, 3))
    p = tmp_path / "e.hdr"
    gio.write_hdr(p, img)
    back = gio.read_hdr(p)
    # RGBE has an 8-bit mantissa: ~1/256 relative quantization
    assert (np.abs(back - img) / np.maximum(img.max(axis=2, keepdims=True),
                                            1e-9)).max() < 1.0 / 128


def test_hdr_rle_scanlines(tmp_path):
    # hand-build one RLE scanline: 8 px, constant color (run encoding)
    w, h = 8, 1
    header = b"#?RADIANCE\nFORMAT=32-bit_rle_rgbe\n\n-Y 1 +X 8\n"
    rgbe = [40, 80, 120, 130]  # some color with exponent 130
    scan = bytes([2, 2, 0, w])
    for c in range(4):
        scan += bytes([128 + w, rgbe[c]])  # one run of length 8
    p = tmp_path / "rle.hdr"
    p.write_bytes(header + scan)
    img = gio.read_hdr(p)
    assert img.shape == (1, 8, 3)
    expected = np.array(rgbe[:3], dtype=np.float64) * 2.0 ** (130 - 136)
    np.testing.assert_allclose(img[0, 0], expected, rtol=1e-6)
    assert np.abs(img - img[0, 0]).max() == 0.0


def test_hdr_bad_magic(tmp_path):
    p = tmp_path / "bad.hdr"
    p.write_bytes(b"not an hdr")
    with pytest.raises(gio.BadMagicError):
        gio.read_hdr(p)


def test_png_roundtrip_quantized(tmp_path):
    rng = np.random.default_rng(2)
    img = rng.uniform(0, 1, (16, 16, 3))
    p = tmp_path / "x.png"
    gio.write_png(p, img)
    back = gio.read_png(p)
    assert np.abs(back - img).max() < 0.01  # 8-bit display quantization
