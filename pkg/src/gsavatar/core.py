"""Shared data model: Gaussian clouds, rigs, poses, cameras, environment lights.

All array-backed types are immutable value objects: construct, never mutate.
Asset-backed arrays are stored float32 (the container dtype) so that
save/load round-trips are bit-exact; numeric pipelines upcast to float64
internally.

Conventions fixed here and relied on everywhere else:
  * quaternions are (w, x, y, z), unit norm;
  * scales are kept in log-space (positivity under optimization) and exposed
    as positive values through ``GaussianCloud.scales``;
  * cameras are pinhole, ``x_cam = R x_world + t`` with ``world_to_camera =
    [R | t]``, looking down +z, pixel centers at half-integer coordinates;
  * blend weights span K+1 transforms (root + K joints) and rows sum to 1.
"""

from __future__ import annotations

from dataclasses import dataclass, field, replace

import numpy as np

__all__ = [
    "MaterialRanges",
    "GaussianCloud",
    "Rig",
    "PoseState",
    "Camera",
    "EnvironmentLight",
    "GBuffer",
    "Violation",
    "validate",
    "clamp_materials",
]


def _f32(a, shape_hint=None) -> np.ndarray:
    out = np.ascontiguousarray(a, dtype=np.float32)
    return out


@dataclass(frozen=True)
class MaterialRanges:
    """Clamp ranges for roughness and base reflectance.

    Defaults span dielectric skin/hair: roughness [0.1, 1.0], f0 [0.02, 0.2].
    """

    roughness_min: float = 0.1
    roughness_max: float = 1.0
    f0_min: float = 0.02
    f0_max: float = 0.2

    def __post_init__(self):
        if not (self.roughness_min < self.roughness_max):
            raise ValueError("roughness range: min must be < max")
        if not (self.f0_min < self.f0_max):
            raise ValueError("f0 range: min must be < max")


@dataclass(frozen=True)
class GaussianCloud:
    """N Gaussian points with geometry, material, and deformation attributes.

    Shapes (N points, B shape dims, E expression dims, K joints):
      positions (N,3), rotations (N,4) unit quats, log_scales (N,3),
      opacities (N,), albedo (N,3), roughness (N,), f0 (N,),
      shape_basis (N,3,B), expr_basis (N,3,E), pose_basis (N,3,9K),
      blend_weights (N,K+1).
    """

    positions: np.ndarray
    rotations: np.ndarray
    log_scales: np.ndarray
    opacities: np.ndarray
    albedo: np.ndarray
    roughness: np.ndarray
    f0: np.ndarray
    shape_basis: np.ndarray
    expr_basis: np.ndarray
    pose_basis: np.ndarray
    blend_weights: np.ndarray
    ranges: MaterialRanges = field(default_factory=MaterialRanges)

    def __post_init__(self):
        for name in ("positions", "rotations", "log_scales", "opacities",
                     "albedo", "roughness", "f0", "shape_basis",
                     "expr_basis", "pose_basis", "blend_weights"):
            object.__setattr__(self, name, _f32(getattr(self, name)))

    @property
    def n_points(self) -> int:
        return int(self.positions.shape[0])

    @property
    def n_shape(self) -> int:
        return int(self.shape_basis.shape[2])

    @property
    def n_expr(self) -> int:
        return int(self.expr_basis.shape[2])

    @property
    def n_joints(self) -> int:
        """K: non-root joints (blend_weights has K+1 columns)."""
        return int(self.blend_weights.shape[1]) - 1

    @property
    def scales(self) -> np.ndarray:
        """Positive world-unit scales, exp of the stored log-scales."""
        return np.exp(self.log_scales)

    def with_materials(self, albedo=None, roughness=None, f0=None) -> "GaussianCloud":
        return replace(
            self,
            albedo=self.albedo if albedo is None else _f32(albedo),
            roughness=self.roughness if roughness is None else _f32(roughness),
            f0=self.f0 if f0 is None else _f32(f0),
        )


@dataclass(frozen=True)
class Rig:
    """Template mesh + joint hierarchy + per-vertex bases used to seed clouds.

    joint_parents has K+1 entries; the root (index 0) points to itself (-1
    also accepted). rest_joints are rest-pose joint locations (the linear
    joint regressor from shape parameters is out of scope; toy rigs fix
    joints).
    """

    vertices: np.ndarray            # (V,3) f32
    faces: np.ndarray               # (F,3) int32
    joint_parents: np.ndarray       # (K+1,) int32, root = -1 or 0
    rest_joints: np.ndarray         # (K+1,3) f32
    vertex_shape_basis: np.ndarray  # (V,3,B)
    vertex_expr_basis: np.ndarray   # (V,3,E)
    vertex_pose_basis: np.ndarray   # (V,3,9K)
    vertex_weights: np.ndarray      # (V,K+1)
    jaw_index: int = 2

    def __post_init__(self):
        object.__setattr__(self, "vertices", _f32(self.vertices))
        object.__setattr__(self, "faces",
                           np.ascontiguousarray(self.faces, dtype=np.int32))
        object.__setattr__(self, "joint_parents",
                           np.ascontiguousarray(self.joint_parents, dtype=np.int32))
        for name in ("rest_joints", "vertex_shape_basis", "vertex_expr_basis",
                     "vertex_pose_basis", "vertex_weights"):
            object.__setattr__(self, name, _f32(getattr(self, name)))

    @property
    def n_vertices(self) -> int:
        return int(self.vertices.shape[0])

    @property
    def n_faces(self) -> int:
        return int(self.faces.shape[0])

    @property
    def n_shape(self) -> int:
        return int(self.vertex_shape_basis.shape[2])

    @property
    def n_expr(self) -> int:
        return int(self.vertex_expr_basis.shape[2])

    @property
    def n_joints(self) -> int:
        """K: joints besides the root transform."""
        return int(self.joint_parents.shape[0]) - 1


@dataclass(frozen=True)
class PoseState:
    """One frame's parameters: shape, expression, per-joint axis-angles.

    theta is (K+1, 3); row 0 is the global rotation. translation is applied
    after the global rotation. jaw_index picks the joint compared by the jaw
    regularization loss.
    """

    beta: np.ndarray
    psi: np.ndarray
    theta: np.ndarray
    translation: np.ndarray
    jaw_index: int = 2

    def __post_init__(self):
        object.__setattr__(self, "beta", np.asarray(self.beta, dtype=np.float64))
        object.__setattr__(self, "psi", np.asarray(self.psi, dtype=np.float64))
        object.__setattr__(self, "theta", np.asarray(self.theta, dtype=np.float64))
        object.__setattr__(self, "translation",
                           np.asarray(self.translation, dtype=np.float64))

    @classmethod
    def rest(cls, n_shape: int, n_expr: int, n_joints: int,
             jaw_index: int = 2) -> "PoseState":
        return cls(np.zeros(n_shape), np.zeros(n_expr),
                   np.zeros((n_joints + 1, 3)), np.zeros(3), jaw_index)

    @property
    def jaw_pose(self) -> np.ndarray:
        return self.theta[self.jaw_index]


@dataclass(frozen=True)
class Camera:
    """Pinhole camera. world_to_camera is the 3x4 rigid [R|t]."""

    width: int
    height: int
    fx: float
    fy: float
    cx: float
    cy: float
    world_to_camera: np.ndarray
    near: float = 0.01
    far: float = 100.0

    def __post_init__(self):
        object.__setattr__(self, "world_to_camera",
                           np.asarray(self.world_to_camera, dtype=np.float64).reshape(3, 4))
        if not (self.fx > 0 and self.fy > 0):
            raise ValueError("focal lengths must be positive")
        if not (0 < self.near < self.far):
            raise ValueError("require 0 < near < far")

    @property
    def rotation(self) -> np.ndarray:
        return self.world_to_camera[:, :3]

    @property
    def translation(self) -> np.ndarray:
        return self.world_to_camera[:, 3]

    @property
    def center(self) -> np.ndarray:
        """Camera position in world coordinates."""
        return -self.rotation.T @ self.translation

    def to_camera(self, points: np.ndarray) -> np.ndarray:
        pts = np.asarray(points, dtype=np.float64)
        return pts @ self.rotation.T + self.translation

    def pixel_rays_world(self) -> np.ndarray:
        """(H,W,3) unit directions, camera center -> pixel, world space."""
        xs = (np.arange(self.width) + 0.5 - self.cx) / self.fx
        ys = (np.arange(self.height) + 0.5 - self.cy) / self.fy
        gx, gy = np.meshgrid(xs, ys)
        dirs = np.stack([gx, gy, np.ones_like(gx)], axis=-1)
        dirs = dirs @ self.rotation  # R^T applied row-wise
        return dirs / np.linalg.norm(dirs, axis=-1, keepdims=True)

    @classmethod
    def look_at(cls, eye, target, up=(0.0, 1.0, 0.0), width=512, height=512,
                focal=None, near=0.01, far=100.0) -> "Camera":
        """Build a camera at `eye` looking toward `target` (y-up world).

        Camera basis: z forward, x right, y down (pixel y grows downward).
        """
        eye = np.asarray(eye, dtype=np.float64)
        target = np.asarray(target, dtype=np.float64)
        up = np.asarray(up, dtype=np.float64)
        z = target - eye
        z = z / np.linalg.norm(z)
        x = np.cross(z, up)
        nx = np.linalg.norm(x)
        if nx < 1e-12:  # looking straight along up; pick an arbitrary right
            x = np.cross(z, np.array([1.0, 0.0, 0.0]))
            nx = np.linalg.norm(x)
        x = x / nx
        y = np.cross(z, x)
        rot = np.stack([x, y, z], axis=0)
        trans = -rot @ eye
        f = float(focal) if focal is not None else 1.2 * max(width, height)
        return cls(width, height, f, f, width / 2.0, height / 2.0,
                   np.concatenate([rot, trans[:, None]], axis=1), near, far)


@dataclass(frozen=True)
class Cubemap:
    """Six res^2 linear-RGB faces, order (+x,-x,+y,-y,+z,-z); see envlight."""

    faces: np.ndarray  # (6, res, res, 3) f32

    def __post_init__(self):
        object.__setattr__(self, "faces", _f32(self.faces))
        if self.faces.ndim != 4 or self.faces.shape[0] != 6 \
                or self.faces.shape[1] != self.faces.shape[2] \
                or self.faces.shape[3] != 3:
            raise ValueError(f"cubemap faces must be (6,res,res,3), got {self.faces.shape}")

    @property
    def resolution(self) -> int:
        return int(self.faces.shape[1])

    @classmethod
    def constant(cls, value, resolution: int) -> "Cubemap":
        v = np.broadcast_to(np.asarray(value, dtype=np.float32), (3,))
        return cls(np.tile(v, (6, resolution, resolution, 1)))


@dataclass(frozen=True)
class EnvironmentLight:
    """Precomputed lighting: irradiance cubemap, roughness-indexed prefiltered
    mip chain, and a (roughness, ndotv)-indexed BRDF scale/bias table."""

    irradiance: Cubemap
    prefiltered: tuple[Cubemap, ...]
    brdf_lut: np.ndarray  # (L, L, 2) f32
    yaw_rotation: float = 0.0

    def __post_init__(self):
        object.__setattr__(self, "prefiltered", tuple(self.prefiltered))
        object.__setattr__(self, "brdf_lut", _f32(self.brdf_lut))

    @property
    def n_mips(self) -> int:
        return len(self.prefiltered)

    @property
    def lut_resolution(self) -> int:
        return int(self.brdf_lut.shape[0])

    def with_yaw(self, yaw: float) -> "EnvironmentLight":
        return replace(self, yaw_rotation=float(yaw))


@dataclass(frozen=True)
class GBuffer:
    """Per-pixel splatted property maps at camera resolution.

    All channels are coverage-weighted (premultiplied by blending); normals
    are renormalized where alpha > 0.5 and are world-space.
    """

    albedo: np.ndarray     # (H,W,3)
    roughness: np.ndarray  # (H,W)
    f0: np.ndarray         # (H,W)
    normal: np.ndarray     # (H,W,3)
    depth: np.ndarray      # (H,W) camera-z
    alpha: np.ndarray      # (H,W)

    @property
    def height(self) -> int:
        return int(self.alpha.shape[0])

    @property
    def width(self) -> int:
        return int(self.alpha.shape[1])


@dataclass(frozen=True)
class Violation:
    """One invariant violation: which field, where, and the offending value."""

    field: str
    index: object
    value: object
    message: str

    def __str__(self) -> str:
        return f"{self.field}[{self.index}] = {self.value}: {self.message}"


def _first_bad(mask: np.ndarray):
    idx = np.argwhere(mask)
    return tuple(idx[0]) if idx.shape[1] > 1 else int(idx[0][0])


def validate(cloud: GaussianCloud, rig: Rig | None = None) -> list[Violation]:
    """Report every type-invariant violation; never raises.

    Checks quaternion norms, value ranges, weight-row sums, and (when a rig
    is given) basis dimension agreement.
    """
    out: list[Violation] = []
    n = cloud.n_points

    shapes = {
        "positions": (n, 3), "rotations": (n, 4), "log_scales": (n, 3),
        "opacities": (n,), "albedo": (n, 3), "roughness": (n,), "f0": (n,),
        "blend_weights": (n, cloud.n_joints + 1),
    }
    for name, want in shapes.items():
        got = getattr(cloud, name).shape
        if got != want:
            out.append(Violation(name, (), got, f"expected shape {want}"))

    for name in ("positions", "rotations", "log_scales", "opacities", "albedo",
                 "roughness", "f0", "shape_basis", "expr_basis", "pose_basis",
                 "blend_weights"):
        arr = getattr(cloud, name)
        bad = ~np.isfinite(arr)
        if bad.any():
            i = _first_bad(bad)
            out.append(Violation(name, i, arr[i] if np.ndim(arr) else arr,
                                 "non-finite value"))

    qn = np.linalg.norm(cloud.rotations.astype(np.float64), axis=1)
    bad = np.abs(qn - 1.0) > 1e-6
    if bad.any():
        i = _first_bad(bad)
        out.append(Violation("rotations", i, float(qn[i]),
                             "quaternion norm differs from 1 by more than 1e-6"))

    for name, lo, hi in (("opacities", 0.0, 1.0), ("albedo", 0.0, 1.0)):
        arr = getattr(cloud, name)
        bad = (arr < lo) | (arr > hi)
        if bad.any():
            i = _first_bad(bad)
            out.append(Violation(name, i, float(arr[i]),
                                 f"outside [{lo}, {hi}]"))

    r = cloud.ranges
    for name, lo, hi in (("roughness", r.roughness_min, r.roughness_max),
                         ("f0", r.f0_min, r.f0_max)):
        arr = getattr(cloud, name)
        # float32 storage of the bound itself must not trip the check
        bad = (arr < np.float32(lo) - 1e-6) | (arr > np.float32(hi) + 1e-6)
        if bad.any():
            i = _first_bad(bad)
            out.append(Violation(name, i, float(arr[i]),
                                 f"outside clamp range [{lo}, {hi}]"))

    w = cloud.blend_weights.astype(np.float64)
    bad = w < -1e-9
    if bad.any():
        i = _first_bad(bad)
        out.append(Violation("blend_weights", i, float(w[i]), "negative weight"))
    rowsum = w.sum(axis=1)
    bad = np.abs(rowsum - 1.0) > 1e-6
    if bad.any():
        i = _first_bad(bad)
        out.append(Violation("blend_weights", i, float(rowsum[i]),
                             "row does not sum to 1 within 1e-6"))

    if rig is not None:
        dims = {
            "shape_basis": (n, 3, rig.n_shape),
            "expr_basis": (n, 3, rig.n_expr),
            "pose_basis": (n, 3, 9 * rig.n_joints),
            "blend_weights": (n, rig.n_joints + 1),
        }
        for name, want in dims.items():
            got = getattr(cloud, name).shape
            if got != want:
                out.append(Violation(name, (), got,
                                     f"dimension disagrees with rig: expected {want}"))
    return out


def validate_rig(rig: Rig) -> list[Violation]:
    """Rig-side invariants: tree-shaped hierarchy, weight rows, face indices."""
    out: list[Violation] = []
    parents = rig.joint_parents
    for k in range(len(parents)):
        seen: set[int] = set()
        j = k
        while True:
            if j in seen:
                out.append(Violation("joint_parents", k, int(parents[k]),
                                     "cycle in joint hierarchy"))
                break
            seen.add(j)
            p = int(parents[j])
            if p == -1 or (p == j == 0):
                break  # reached the root
            if p == j:
                out.append(Violation("joint_parents", j, p,
                                     "self-parent at non-root joint"))
                break
            j = p
    if rig.faces.size and rig.faces.max() >= rig.n_vertices:
        i = _first_bad(rig.faces >= rig.n_vertices)
        out.append(Violation("faces", i, int(rig.faces[i]),
                             "face index out of vertex range"))
    w = rig.vertex_weights.astype(np.float64)
    if (w < -1e-9).any():
        i = _first_bad(w < -1e-9)
        out.append(Violation("vertex_weights", i, float(w[i]), "negative weight"))
    rowsum = w.sum(axis=1)
    if (np.abs(rowsum - 1.0) > 1e-6).any():
        i = _first_bad(np.abs(rowsum - 1.0) > 1e-6)
        out.append(Violation("vertex_weights", i, float(rowsum[i]),
                             "row does not sum to 1 within 1e-6"))
    return out


def clamp_materials(cloud: GaussianCloud,
                    ranges: MaterialRanges | None = None) -> GaussianCloud:
    """Clamp roughness and f0 element-wise into their declared ranges.

    Albedo and opacity are clamped to [0,1] as well; geometry is untouched.
    """
    r = ranges if ranges is not None else cloud.ranges
    return replace(
        cloud,
        roughness=np.clip(cloud.roughness, np.float32(r.roughness_min),
                          np.float32(r.roughness_max)),
        f0=np.clip(cloud.f0, np.float32(r.f0_min), np.float32(r.f0_max)),
        albedo=np.clip(cloud.albedo, 0.0, 1.0),
        opacities=np.clip(cloud.opacities, 0.0, 1.0),
        ranges=r,
    )
