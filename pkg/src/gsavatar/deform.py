"""Canonical-to-pose deformation: blendshapes, forward kinematics, skinning.

The deformation chain for a cloud under a pose state:

    X_c = X + offsets(beta, shape_basis)
    X_e = X_c + offsets(psi, expr_basis) + offsets(pose_feature(theta), pose_basis)
    X_p, R_blend = skin(X_e, joint transforms, blend_weights)

Point rotations co-rotate: q_p = quat(R_blend) * q, renormalized.

FK convention: each joint rotates about its rest location, composed
parent-to-child; the root additionally applies the global translation.
Pose features flatten (R(theta_k) - I) row-major for the K non-global
joints; the convention flag is written into the avatar asset header.
"""

from __future__ import annotations

from dataclasses import dataclass, replace

import numpy as np

from .core import GaussianCloud, MaterialRanges, PoseState, Rig

__all__ = [
    "rodrigues",
    "blendshape_offset",
    "pose_feature",
    "JointTransforms",
    "forward_kinematics",
    "lbs",
    "pose_cloud",
    "init_from_rig",
    "quat_from_matrix",
    "quat_multiply",
]

# Material defaults used at initialization: roughness, base reflectance, albedo.
INIT_ROUGHNESS = 0.9
INIT_F0 = 0.04
INIT_ALBEDO = 0.5


def rodrigues(axis_angle: np.ndarray) -> np.ndarray:
    """Axis-angle (3,) to rotation matrix; the zero vector maps to identity."""
    v = np.asarray(axis_angle, dtype=np.float64)
    angle = np.linalg.norm(v)
    if angle < 1e-12:
        return np.eye(3)
    k = v / angle
    kx = np.array([[0.0, -k[2], k[1]],
                   [k[2], 0.0, -k[0]],
                   [-k[1], k[0], 0.0]])
    return np.eye(3) + np.sin(angle) * kx + (1.0 - np.cos(angle)) * (kx @ kx)


def blendshape_offset(coeffs: np.ndarray, basis: np.ndarray) -> np.ndarray:
    """Linear blendshape offsets: offsets[i] = sum_m coeffs[m] * basis[i,:,m].

    The contraction runs in the basis dtype (BLAS matvec; float32 for cloud
    attributes) and the result is returned as float64.
    """
    basis = np.asarray(basis)
    coeffs = np.asarray(coeffs, dtype=basis.dtype)
    if basis.ndim != 3 or basis.shape[2] != coeffs.shape[0]:
        raise ValueError(
            f"coefficient length {coeffs.shape[0]} does not match basis "
            f"last dimension {basis.shape[-1] if basis.ndim == 3 else basis.shape}")
    n = basis.shape[0]
    out = basis.reshape(n * 3, -1) @ coeffs
    return out.reshape(n, 3).astype(np.float64)


def pose_feature(theta: np.ndarray) -> np.ndarray:
    """Flattened (R(theta_k) - I) for the K non-global joints, 9 entries each."""
    theta = np.asarray(theta, dtype=np.float64)
    k = theta.shape[0] - 1
    feat = np.empty(9 * k)
    eye = np.eye(3)
    for j in range(k):
        feat[9 * j: 9 * (j + 1)] = (rodrigues(theta[j + 1]) - eye).reshape(-1)
    return feat


@dataclass(frozen=True)
class JointTransforms:
    """World-space 3x4 rigid transforms per joint plus local rotations."""

    transforms: np.ndarray       # (K+1, 3, 4)
    local_rotations: np.ndarray  # (K+1, 3, 3)

    @property
    def n_transforms(self) -> int:
        return int(self.transforms.shape[0])


def _compose(a: np.ndarray, b: np.ndarray) -> np.ndarray:
    """Compose 3x4 rigid transforms: (a o b)(x) = a(b(x))."""
    out = np.empty((3, 4))
    out[:, :3] = a[:, :3] @ b[:, :3]
    out[:, 3] = a[:, :3] @ b[:, 3] + a[:, 3]
    return out


def forward_kinematics(rig: Rig, pose: PoseState) -> JointTransforms:
    """Compose per-joint world transforms down the parent hierarchy.

    Joint k's local transform rotates about its rest location:
    x -> j_k + R_k (x - j_k). The root transform additionally adds the
    global translation.
    """
    n = rig.n_joints + 1
    if pose.theta.shape != (n, 3):
        raise ValueError(
            f"pose theta shape {pose.theta.shape} does not match rig joints ({n},3)")
    joints = rig.rest_joints.astype(np.float64)
    locals_r = np.empty((n, 3, 3))
    world = np.empty((n, 3, 4))
    for k in range(n):
        r = rodrigues(pose.theta[k])
        locals_r[k] = r
        local = np.empty((3, 4))
        local[:, :3] = r
        local[:, 3] = joints[k] - r @ joints[k]
        if k == 0:
            local[:, 3] += pose.translation
            world[0] = local
        else:
            parent = int(rig.joint_parents[k])
            if parent < 0:
                parent = 0
            world[k] = _compose(world[parent], local)
    return JointTransforms(world, locals_r)


def lbs(points: np.ndarray, transforms: JointTransforms,
        weights: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Linear blend skinning: blend the 3x4 matrices, apply, return R_blend.

    Returns (posed points (N,3), blended rotation blocks (N,3,3)). The
    blended rotation is returned unorthogonalized for rotation propagation.
    """
    pts = np.asarray(points, dtype=np.float64)
    w = np.asarray(weights, dtype=np.float64)
    g = transforms.transforms
    if w.shape[1] != g.shape[0]:
        raise ValueError(
            f"weight columns {w.shape[1]} do not match transforms {g.shape[0]}")
    blended = np.einsum("nk,kij->nij", w, g)  # (N,3,4)
    r = blended[:, :, :3]
    posed = np.einsum("nij,nj->ni", r, pts) + blended[:, :, 3]
    return posed, r


def quat_multiply(a: np.ndarray, b: np.ndarray) -> np.ndarray:
    """Hamilton product of (w,x,y,z) quaternions; broadcasts over rows."""
    aw, ax, ay, az = np.moveaxis(np.asarray(a, dtype=np.float64), -1, 0)
    bw, bx, by, bz = np.moveaxis(np.asarray(b, dtype=np.float64), -1, 0)
    return np.stack([
        aw * bw - ax * bx - ay * by - az * bz,
        aw * bx + ax * bw + ay * bz - az * by,
        aw * by - ax * bz + ay * bw + az * bx,
        aw * bz + ax * by - ay * bx + az * bw,
    ], axis=-1)


def quat_from_matrix(m: np.ndarray) -> np.ndarray:
    """Rotation matrices (...,3,3) to unit quaternions (w,x,y,z).

    Vectorized Shepperd branch selection; tolerant of slightly
    non-orthonormal inputs such as blended skinning rotations.
    """
    m = np.asarray(m, dtype=np.float64)
    single = m.ndim == 2
    if single:
        m = m[None]
    m00, m01, m02 = m[..., 0, 0], m[..., 0, 1], m[..., 0, 2]
    m10, m11, m12 = m[..., 1, 0], m[..., 1, 1], m[..., 1, 2]
    m20, m21, m22 = m[..., 2, 0], m[..., 2, 1], m[..., 2, 2]

    c = np.stack([1.0 + m00 + m11 + m22, 1.0 + m00 - m11 - m22,
                  1.0 - m00 + m11 - m22, 1.0 - m00 - m11 + m22], axis=-1)
    s = 2.0 * np.sqrt(np.maximum(c, 1e-12))
    s0, s1, s2, s3 = s[..., 0], s[..., 1], s[..., 2], s[..., 3]
    cand = np.stack([
        np.stack([0.25 * s0, (m21 - m12) / s0, (m02 - m20) / s0,
                  (m10 - m01) / s0], axis=-1),
        np.stack([(m21 - m12) / s1, 0.25 * s1, (m01 + m10) / s1,
                  (m02 + m20) / s1], axis=-1),
        np.stack([(m02 - m20) / s2, (m01 + m10) / s2, 0.25 * s2,
                  (m12 + m21) / s2], axis=-1),
        np.stack([(m10 - m01) / s3, (m02 + m20) / s3, (m12 + m21) / s3,
                  0.25 * s3], axis=-1),
    ], axis=-2)
    pick = np.argmax(c, axis=-1)
    q = np.take_along_axis(cand, pick[..., None, None].repeat(4, -1),
                           axis=-2)[..., 0, :]
    q = q / np.linalg.norm(q, axis=-1, keepdims=True)
    return q[0] if single else q


def pose_cloud(cloud: GaussianCloud, rig: Rig, pose: PoseState) -> GaussianCloud:
    """Deform a cloud into pose space; all non-geometry attributes copied.

    With all-zero parameters this is the identity on positions and (up to
    normalization) rotations.
    """
    if pose.beta.shape[0] != cloud.n_shape:
        raise ValueError(f"beta length {pose.beta.shape[0]} != |shape| {cloud.n_shape}")
    if pose.psi.shape[0] != cloud.n_expr:
        raise ValueError(f"psi length {pose.psi.shape[0]} != |expr| {cloud.n_expr}")

    x = cloud.positions.astype(np.float64)
    x_c = x + blendshape_offset(pose.beta, cloud.shape_basis)
    x_e = (x_c
           + blendshape_offset(pose.psi, cloud.expr_basis)
           + blendshape_offset(pose_feature(pose.theta), cloud.pose_basis))

    transforms = forward_kinematics(rig, pose)
    x_p, r_blend = lbs(x_e, transforms, cloud.blend_weights)

    q_blend = quat_from_matrix(r_blend)
    q = quat_multiply(q_blend, cloud.rotations.astype(np.float64))
    q = q / np.linalg.norm(q, axis=1, keepdims=True)

    return replace(cloud, positions=x_p.astype(np.float32),
                   rotations=q.astype(np.float32))


def _uniform_barycentric(u: np.ndarray, v: np.ndarray) -> np.ndarray:
    """Map unit-square samples to uniform barycentric coordinates."""
    su = np.sqrt(u)
    return np.stack([1.0 - su, su * (1.0 - v), su * v], axis=-1)


def interpolate_face_attributes(rig: Rig, face_index: int,
                                bary: np.ndarray) -> dict:
    """Barycentric interpolation of one face's vertex attributes."""
    idx = rig.faces[face_index]
    b = np.asarray(bary, dtype=np.float64)

    def mix(arr):
        a = arr.astype(np.float64)
        return b[0] * a[idx[0]] + b[1] * a[idx[1]] + b[2] * a[idx[2]]

    w = mix(rig.vertex_weights)
    w = np.clip(w, 0.0, None)
    w = w / w.sum()
    return {
        "position": mix(rig.vertices),
        "shape_basis": mix(rig.vertex_shape_basis),
        "expr_basis": mix(rig.vertex_expr_basis),
        "pose_basis": mix(rig.vertex_pose_basis),
        "blend_weights": w,
    }


def init_from_rig(rig: Rig, points_per_face: int = 1, seed: int = 0,
                  ranges: MaterialRanges | None = None) -> GaussianCloud:
    """Seed a cloud by uniform sampling on the rig's mesh faces.

    Per face, `points_per_face` samples with uniform barycentric coordinates;
    positions, bases, and blend weights interpolate the face's vertex
    attributes (weights renormalized). Rotation starts at identity, scale is
    isotropic sqrt(face area)/3, opacity 0.5, materials at the standard
    initial values (roughness 0.9, f0 0.04, albedo 0.5).
    """
    if rig.n_faces == 0:
        raise ValueError("rig mesh has no faces")
    rng = np.random.default_rng(seed)
    f = rig.n_faces
    n = f * points_per_face

    verts = rig.vertices.astype(np.float64)
    tri = verts[rig.faces]  # (F,3,3)
    e1 = tri[:, 1] - tri[:, 0]
    e2 = tri[:, 2] - tri[:, 0]
    areas = 0.5 * np.linalg.norm(np.cross(e1, e2), axis=1)

    face_idx = np.repeat(np.arange(f), points_per_face)
    bary = _uniform_barycentric(rng.random(n), rng.random(n))

    def mix(vertex_attr):
        a = vertex_attr.astype(np.float64)[rig.faces[face_idx]]  # (n,3,...)
        return np.einsum("nv,nv...->n...", bary, a)

    positions = mix(rig.vertices)
    weights = np.clip(mix(rig.vertex_weights), 0.0, None)
    weights /= weights.sum(axis=1, keepdims=True)

    scale = np.sqrt(np.maximum(areas[face_idx], 1e-20)) / 3.0
    log_scales = np.log(np.repeat(scale[:, None], 3, axis=1))

    rotations = np.zeros((n, 4))
    rotations[:, 0] = 1.0

    r = ranges if ranges is not None else MaterialRanges()
    return GaussianCloud(
        positions=positions,
        rotations=rotations,
        log_scales=log_scales,
        opacities=np.full(n, 0.5),
        albedo=np.full((n, 3), INIT_ALBEDO),
        roughness=np.full(n, INIT_ROUGHNESS),
        f0=np.full(n, INIT_F0),
        shape_basis=mix(rig.vertex_shape_basis),
        expr_basis=mix(rig.vertex_expr_basis),
        pose_basis=mix(rig.vertex_pose_basis),
        blend_weights=weights,
        ranges=r,
    )
