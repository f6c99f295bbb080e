"""File formats: avatar/rig/light containers, animations, cameras, images.

Binary containers are little-endian with 4-byte magics:

  GSAV  avatar: header (version, convention flags, dims, material ranges)
        followed by f32 arrays in fixed order.
  GSRG  rig: JSON descriptor (dims, joint parents, jaw index, array table)
        followed by the raw arrays.
  GSLT  light: JSON bake metadata followed by PFM payloads for every
        cubemap face (irradiance + each prefiltered mip) and the raw BRDF
        table.

Animations are line-delimited JSON records, one frame per line. Cameras are
plain JSON. PFM and Radiance HDR readers/writers are self-contained.
"""

from __future__ import annotations

import json
import struct
from pathlib import Path

import numpy as np

from .core import (Camera, Cubemap, EnvironmentLight, GaussianCloud,
                   MaterialRanges, PoseState, Rig)

__all__ = [
    "AssetError", "BadMagicError", "VersionError", "TruncatedError",
    "DimensionError",
    "save_avatar", "load_avatar", "save_rig", "load_rig",
    "save_light", "load_light",
    "save_animation", "load_animation",
    "save_camera", "load_camera", "save_cameras", "load_cameras",
    "read_pfm", "write_pfm", "read_hdr", "write_hdr",
    "write_png", "read_png",
]

AVATAR_MAGIC = b"GSAV"
RIG_MAGIC = b"GSRG"
LIGHT_MAGIC = b"GSLT"
FORMAT_VERSION = 1
# convention flags carried in every avatar header
FLAG_POSE_FEATURE_ROW_MAJOR = 1
FLAG_WEIGHTS_INCLUDE_ROOT = 2


class AssetError(ValueError):
    """Base error for asset container problems."""


class BadMagicError(AssetError):
    pass


class VersionError(AssetError):
    pass


class TruncatedError(AssetError):
    pass


class DimensionError(AssetError):
    pass


class _Reader:
    def __init__(self, data: bytes, what: str):
        self.data = data
        self.pos = 0
        self.what = what

    def take(self, n: int, name: str) -> bytes:
        if self.pos + n > len(self.data):
            raise TruncatedError(
                f"{self.what}: truncated while reading {name} "
                f"(wanted {n} bytes at offset {self.pos}, "
                f"have {len(self.data) - self.pos})")
        out = self.data[self.pos:self.pos + n]
        self.pos += n
        return out

    def array(self, shape: tuple, name: str, dtype="<f4") -> np.ndarray:
        count = int(np.prod(shape)) if shape else 1
        raw = self.take(count * np.dtype(dtype).itemsize, name)
        return np.frombuffer(raw, dtype=dtype).reshape(shape)


# ---------------------------------------------------------------------------
# avatar container
# ---------------------------------------------------------------------------

def save_avatar(path, cloud: GaussianCloud) -> None:
    n, b, e, k = (cloud.n_points, cloud.n_shape, cloud.n_expr, cloud.n_joints)
    flags = FLAG_POSE_FEATURE_ROW_MAJOR | FLAG_WEIGHTS_INCLUDE_ROOT
    r = cloud.ranges
    parts = [AVATAR_MAGIC,
             struct.pack("<HH", FORMAT_VERSION, flags),
             struct.pack("<IIII", n, b, e, k),
             struct.pack("<dddd", r.roughness_min, r.roughness_max,
                         r.f0_min, r.f0_max)]
    for name in ("positions", "rotations", "log_scales", "opacities",
                 "albedo", "roughness", "f0", "shape_basis", "expr_basis",
                 "pose_basis", "blend_weights"):
        parts.append(np.ascontiguousarray(getattr(cloud, name),
                                          dtype="<f4").tobytes())
    Path(path).write_bytes(b"".join(parts))


def load_avatar(path) -> GaussianCloud:
    rd = _Reader(Path(path).read_bytes(), f"avatar asset {path}")
    magic = rd.take(4, "magic")
    if magic != AVATAR_MAGIC:
        raise BadMagicError(f"{path}: bad magic {magic!r}, expected GSAV")
    version, flags = struct.unpack("<HH", rd.take(4, "version"))
    if version != FORMAT_VERSION:
        raise VersionError(f"{path}: unsupported avatar version {version} "
                           f"(reader supports {FORMAT_VERSION})")
    n, b, e, k = struct.unpack("<IIII", rd.take(16, "dims"))
    ro_min, ro_max, f0_min, f0_max = struct.unpack("<dddd", rd.take(32, "ranges"))
    arrays = {}
    for name, shape in (("positions", (n, 3)), ("rotations", (n, 4)),
                        ("log_scales", (n, 3)), ("opacities", (n,)),
                        ("albedo", (n, 3)), ("roughness", (n,)), ("f0", (n,)),
                        ("shape_basis", (n, 3, b)), ("expr_basis", (n, 3, e)),
                        ("pose_basis", (n, 3, 9 * k)),
                        ("blend_weights", (n, k + 1))):
        arrays[name] = rd.array(shape, name)
    if rd.pos != len(rd.data):
        raise DimensionError(
            f"{path}: {len(rd.data) - rd.pos} trailing bytes after arrays; "
            f"header dims (N={n}, |shape|={b}, |expr|={e}, K={k}) inconsistent")
    ranges = MaterialRanges(float(ro_min), float(ro_max),
                            float(f0_min), float(f0_max))
    return GaussianCloud(ranges=ranges, **arrays)


# ---------------------------------------------------------------------------
# rig container
# ---------------------------------------------------------------------------

_RIG_ARRAYS = (("vertices", "<f4"), ("faces", "<i4"), ("rest_joints", "<f4"),
               ("vertex_shape_basis", "<f4"), ("vertex_expr_basis", "<f4"),
               ("vertex_pose_basis", "<f4"), ("vertex_weights", "<f4"))


def save_rig(path, rig: Rig) -> None:
    desc = {
        "n_vertices": rig.n_vertices, "n_faces": rig.n_faces,
        "n_shape": rig.n_shape, "n_expr": rig.n_expr,
        "n_joints": rig.n_joints,
        "joint_parents": [int(p) for p in rig.joint_parents],
        "jaw_index": rig.jaw_index,
        "arrays": [{"name": name, "dtype": dt,
                    "shape": list(getattr(rig, name).shape)}
                   for name, dt in _RIG_ARRAYS],
    }
    blob = json.dumps(desc, sort_keys=True).encode()
    parts = [RIG_MAGIC, struct.pack("<HI", FORMAT_VERSION, len(blob)), blob]
    for name, dt in _RIG_ARRAYS:
        parts.append(np.ascontiguousarray(getattr(rig, name), dtype=dt).tobytes())
    Path(path).write_bytes(b"".join(parts))


def load_rig(path) -> Rig:
    rd = _Reader(Path(path).read_bytes(), f"rig asset {path}")
    magic = rd.take(4, "magic")
    if magic != RIG_MAGIC:
        raise BadMagicError(f"{path}: bad magic {magic!r}, expected GSRG")
    version, jlen = struct.unpack("<HI", rd.take(6, "header"))
    if version != FORMAT_VERSION:
        raise VersionError(f"{path}: unsupported rig version {version}")
    desc = json.loads(rd.take(jlen, "descriptor"))
    arrays = {}
    for spec in desc["arrays"]:
        arrays[spec["name"]] = rd.array(tuple(spec["shape"]), spec["name"],
                                        spec["dtype"])
    return Rig(joint_parents=np.asarray(desc["joint_parents"], dtype=np.int32),
               jaw_index=int(desc["jaw_index"]),
               vertices=arrays["vertices"], faces=arrays["faces"],
               rest_joints=arrays["rest_joints"],
               vertex_shape_basis=arrays["vertex_shape_basis"],
               vertex_expr_basis=arrays["vertex_expr_basis"],
               vertex_pose_basis=arrays["vertex_pose_basis"],
               vertex_weights=arrays["vertex_weights"])


# ---------------------------------------------------------------------------
# light container
# ---------------------------------------------------------------------------

def save_light(path, env: EnvironmentLight, meta: dict | None = None) -> None:
    payloads = []
    blobs = []

    def add(kind, faces, **extra):
        for i in range(6):
            data = _pfm_bytes(faces[i])
            payloads.append({"kind": kind, "face": i, "bytes": len(data), **extra})
            blobs.append(data)

    add("irradiance", env.irradiance.faces)
    for m, cube in enumerate(env.prefiltered):
        add("prefiltered", cube.faces, mip=m)
    lut = np.ascontiguousarray(env.brdf_lut, dtype="<f4").tobytes()
    payloads.append({"kind": "brdf_lut", "res": env.lut_resolution,
                     "bytes": len(lut)})
    blobs.append(lut)

    desc = {
        "irr_res": env.irradiance.resolution,
        "env_res": env.prefiltered[0].resolution,
        "mips": env.n_mips,
        "lut_res": env.lut_resolution,
        "yaw": float(env.yaw_rotation),
        "face_order": "+x,-x,+y,-y,+z,-z",
        "microfacet": {"ndf": "ggx", "alpha": "roughness^2",
                       "geometry": "smith-schlick", "k": "roughness^2/2",
                       "pose_feature_order": "row-major"},
        "payloads": payloads,
    }
    if meta:
        desc["bake"] = meta
    blob = json.dumps(desc, sort_keys=True).encode()
    parts = [LIGHT_MAGIC, struct.pack("<HI", FORMAT_VERSION, len(blob)), blob]
    parts.extend(blobs)
    Path(path).write_bytes(b"".join(parts))


def load_light(path) -> EnvironmentLight:
    rd = _Reader(Path(path).read_bytes(), f"light asset {path}")
    magic = rd.take(4, "magic")
    if magic != LIGHT_MAGIC:
        raise BadMagicError(f"{path}: bad magic {magic!r}, expected GSLT")
    version, jlen = struct.unpack("<HI", rd.take(6, "header"))
    if version != FORMAT_VERSION:
        raise VersionError(f"{path}: unsupported light version {version}")
    desc = json.loads(rd.take(jlen, "descriptor"))

    irr_faces = [None] * 6
    pre_faces = [[None] * 6 for _ in range(desc["mips"])]
    lut = None
    for spec in desc["payloads"]:
        raw = rd.take(spec["bytes"], spec["kind"])
        if spec["kind"] == "irradiance":
            irr_faces[spec["face"]] = _pfm_from_bytes(raw)
        elif spec["kind"] == "prefiltered":
            pre_faces[spec["mip"]][spec["face"]] = _pfm_from_bytes(raw)
        elif spec["kind"] == "brdf_lut":
            res = spec["res"]
            lut = np.frombuffer(raw, dtype="<f4").reshape(res, res, 2)
        else:
            raise DimensionError(f"{path}: unknown payload kind {spec['kind']}")
    if any(f is None for f in irr_faces) or lut is None \
            or any(f is None for row in pre_faces for f in row):
        raise TruncatedError(f"{path}: missing payloads in light container")
    return EnvironmentLight(
        Cubemap(np.stack(irr_faces)),
        tuple(Cubemap(np.stack(row)) for row in pre_faces),
        lut, yaw_rotation=float(desc.get("yaw", 0.0)))


# ---------------------------------------------------------------------------
# animation + cameras
# ---------------------------------------------------------------------------

def save_animation(path, poses: list[PoseState],
                   shared_beta: bool = True) -> None:
    """One JSON record per line; beta written on frame 0 only when shared."""
    lines = []
    for i, p in enumerate(poses):
        rec = {"frame": i, "psi": p.psi.tolist(),
               "theta": p.theta.tolist(),
               "translation": p.translation.tolist(),
               "jaw_index": p.jaw_index}
        if not shared_beta or i == 0:
            rec["beta"] = p.beta.tolist()
        lines.append(json.dumps(rec, sort_keys=True))
    Path(path).write_text("\n".join(lines) + "\n")


def load_animation(path, n_shape: int | None = None) -> list[PoseState]:
    poses = []
    beta = None
    dims = None
    for ln, line in enumerate(Path(path).read_text().splitlines()):
        line = line.strip()
        if not line:
            continue
        rec = json.loads(line)
        if "beta" in rec:
            beta = np.asarray(rec["beta"], dtype=np.float64)
        if beta is None:
            if n_shape is None:
                raise DimensionError(
                    f"{path}:{ln + 1}: no beta on record and no n_shape given")
            beta = np.zeros(n_shape)
        pose = PoseState(beta=beta, psi=rec["psi"], theta=rec["theta"],
                         translation=rec["translation"],
                         jaw_index=int(rec.get("jaw_index", 2)))
        d = (pose.beta.shape[0], pose.psi.shape[0], pose.theta.shape)
        if dims is None:
            dims = d
        elif d != dims:
            raise DimensionError(
                f"{path}:{ln + 1}: dims {d} differ from first frame {dims}")
        poses.append(pose)
    return poses


def save_camera(path, camera: Camera) -> None:
    Path(path).write_text(json.dumps(_camera_dict(camera), sort_keys=True,
                                     indent=1) + "\n")


def _camera_dict(camera: Camera) -> dict:
    return {"width": camera.width, "height": camera.height,
            "fx": camera.fx, "fy": camera.fy, "cx": camera.cx,
            "cy": camera.cy,
            "world_to_camera": camera.world_to_camera.tolist(),
            "near": camera.near, "far": camera.far}


def _camera_from_dict(d: dict) -> Camera:
    return Camera(width=int(d["width"]), height=int(d["height"]),
                  fx=float(d["fx"]), fy=float(d["fy"]), cx=float(d["cx"]),
                  cy=float(d["cy"]),
                  world_to_camera=np.asarray(d["world_to_camera"]),
                  near=float(d.get("near", 0.01)),
                  far=float(d.get("far", 100.0)))


def load_camera(path) -> Camera:
    return _camera_from_dict(json.loads(Path(path).read_text()))


def save_cameras(path, cameras: list[Camera]) -> None:
    Path(path).write_text(json.dumps([_camera_dict(c) for c in cameras],
                                     sort_keys=True, indent=1) + "\n")


def load_cameras(path) -> list[Camera]:
    data = json.loads(Path(path).read_text())
    if isinstance(data, dict):
        return [_camera_from_dict(data)]
    return [_camera_from_dict(d) for d in data]


# ---------------------------------------------------------------------------
# PFM (portable float map)
# ---------------------------------------------------------------------------

def _pfm_bytes(image: np.ndarray) -> bytes:
    img = np.asarray(image, dtype=np.float32)
    color = img.ndim == 3 and img.shape[2] == 3
    if img.ndim == 3 and img.shape[2] == 1:
        img = img[:, :, 0]
        color = False
    header = (b"PF\n" if color else b"Pf\n")
    h, w = img.shape[:2]
    header += f"{w} {h}\n-1.0\n".encode()
    return header + np.ascontiguousarray(img[::-1], dtype="<f4").tobytes()


def _pfm_from_bytes(data: bytes) -> np.ndarray:
    if not (data.startswith(b"PF") or data.startswith(b"Pf")):
        raise BadMagicError("PFM payload: bad magic")
    color = data[:2] == b"PF"
    # header = magic line, dims line, scale line
    pos = 0
    fields = []
    while len(fields) < 4:
        nl = data.index(b"\n", pos)
        fields.extend(data[pos:nl].split())
        pos = nl + 1
    w, h = int(fields[1]), int(fields[2])
    scale = float(fields[3])
    dtype = "<f4" if scale < 0 else ">f4"
    count = w * h * (3 if color else 1)
    raw = data[pos:pos + count * 4]
    if len(raw) < count * 4:
        raise TruncatedError("PFM payload: truncated pixel data")
    img = np.frombuffer(raw, dtype=dtype).reshape(
        (h, w, 3) if color else (h, w))
    return np.ascontiguousarray(img[::-1]).astype(np.float32)


def write_pfm(path, image: np.ndarray) -> None:
    Path(path).write_bytes(_pfm_bytes(image))


def read_pfm(path) -> np.ndarray:
    return _pfm_from_bytes(Path(path).read_bytes())


# ---------------------------------------------------------------------------
# Radiance HDR (RGBE)
# ---------------------------------------------------------------------------

def write_hdr(path, image: np.ndarray) -> None:
    """Write a flat (non-RLE) Radiance RGBE file."""
    img = np.asarray(image, dtype=np.float64)
    if img.ndim != 3 or img.shape[2] != 3:
        raise ValueError("HDR writer expects an (H,W,3) image")
    h, w = img.shape[:2]
    maxv = img.max(axis=2)
    rgbe = np.zeros((h, w, 4), dtype=np.uint8)
    nz = maxv >= 1e-32
    mant, exp = np.frexp(maxv[nz])
    scale = mant * 256.0 / maxv[nz]
    rgbe[nz, 0] = np.clip(img[nz, 0] * scale, 0, 255).astype(np.uint8)
    rgbe[nz, 1] = np.clip(img[nz, 1] * scale, 0, 255).astype(np.uint8)
    rgbe[nz, 2] = np.clip(img[nz, 2] * scale, 0, 255).astype(np.uint8)
    rgbe[nz, 3] = (exp + 128).astype(np.uint8)
    header = (b"#?RADIANCE\nFORMAT=32-bit_rle_rgbe\n\n"
              + f"-Y {h} +X {w}\n".encode())
    Path(path).write_bytes(header + rgbe.tobytes())


def _decode_rgbe(rgbe: np.ndarray) -> np.ndarray:
    exp = rgbe[..., 3].astype(np.int32)
    scale = np.where(exp == 0, 0.0, np.ldexp(1.0, exp - 136))
    return rgbe[..., :3].astype(np.float32) * scale[..., None].astype(np.float32)


def read_hdr(path) -> np.ndarray:
    """Read a Radiance RGBE file (flat or new-style RLE scanlines)."""
    data = Path(path).read_bytes()
    if not data.startswith(b"#?"):
        raise BadMagicError(f"{path}: not a Radiance HDR file")
    pos = 0
    width = height = None
    while True:
        nl = data.index(b"\n", pos)
        line = data[pos:nl]
        pos = nl + 1
        if line.startswith(b"-Y"):
            parts = line.split()
            height, width = int(parts[1]), int(parts[3])
            break
        if pos >= len(data):
            raise TruncatedError(f"{path}: missing resolution line")
    out = np.empty((height, width, 4), dtype=np.uint8)
    for y in range(height):
        if pos + 4 > len(data):
            raise TruncatedError(f"{path}: truncated at scanline {y}")
        head = data[pos:pos + 4]
        if head[0] == 2 and head[1] == 2 and (head[2] << 8 | head[3]) == width:
            pos += 4  # new-style RLE, per-component
            for c in range(4):
                x = 0
                while x < width:
                    if pos >= len(data):
                        raise TruncatedError(f"{path}: truncated RLE run")
                    count = data[pos]
                    pos += 1
                    if count > 128:  # run of one value
                        run = count - 128
                        out[y, x:x + run, c] = data[pos]
                        pos += 1
                        x += run
                    else:  # literal run
                        out[y, x:x + count, c] = np.frombuffer(
                            data[pos:pos + count], dtype=np.uint8)
                        pos += count
                        x += count
        else:  # flat scanline
            need = width * 4
            row = np.frombuffer(data[pos:pos + need], dtype=np.uint8)
            if row.size < need:
                raise TruncatedError(f"{path}: truncated flat scanline {y}")
            out[y] = row.reshape(width, 4)
            pos += need
    return _decode_rgbe(out)


# ---------------------------------------------------------------------------
# PNG display output
# ---------------------------------------------------------------------------

DISPLAY_GAMMA = 1.0 / 2.2


def write_png(path, image: np.ndarray) -> None:
    """Linear [0,1] image to 8-bit PNG via gamma 1/2.2."""
    from .pipeline import png_bytes

    Path(path).write_bytes(png_bytes(image))


def read_png(path) -> np.ndarray:
    """8-bit PNG back to linear floats (inverse display gamma)."""
    from PIL import Image as PILImage

    u8 = np.asarray(PILImage.open(Path(path)))
    return np.power(u8.astype(np.float64) / 255.0, 1.0 / DISPLAY_GAMMA)
