"""Deterministic synthetic head rigs and scenes for tests and demos.

Procedural head: ellipsoid skull with a hinged jaw region and two eyeball
spheres, K = 4 joints (neck, jaw, left eye, right eye) under a global root.
Jaw blend weights fall off smoothly (compact support) from the hinge so the
chin moves while the skull top stays put; eyeball vertices bind one-hot to
their joints. Shape/expression bases are smooth cosine bumps; expression
slots 0 and 1 are a jaw-open assist and a blink so animations read as faces.
Everything is a pure function of the spec (and its seed).
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .core import Camera, PoseState, Rig
from .deform import init_from_rig

__all__ = ["ToyRigSpec", "make_rig", "make_scene", "make_animation",
           "default_camera", "orbit_camera", "FLAME_IMPORT_NOTES"]

HEAD_RADII = np.array([0.085, 0.105, 0.09])   # x, y, z half-axes (meters)
EYE_CENTERS = np.array([[-0.032, 0.018, 0.075], [0.032, 0.018, 0.075]])
EYE_RADIUS = 0.013
JOINT_NAMES = ("root", "neck", "jaw", "eye_l", "eye_r")


@dataclass(frozen=True)
class ToyRigSpec:
    """Parameters of the procedural head; same spec + seed = same bytes."""

    subdivision: int = 20            # latitude rings of the skull sphere
    jaw_hinge: tuple = (0.0, -0.015, 0.02)
    jaw_axis: tuple = (1.0, 0.0, 0.0)
    n_shape: int = 8
    n_expr: int = 6
    seed: int = 0

    def __post_init__(self):
        if self.subdivision < 4:
            raise ValueError("subdivision must be >= 4")
        if self.n_shape < 1 or self.n_expr < 2:
            raise ValueError("need n_shape >= 1 and n_expr >= 2 "
                             "(slots 0/1 are jaw-open and blink)")


def _uv_sphere(rings: int, segments: int, radii, center):
    """Lat-lon sphere with pole vertices; returns (verts, faces, unit dirs)."""
    verts = [np.array([0.0, 1.0, 0.0])]
    for i in range(1, rings):
        lat = np.pi * i / rings
        y = np.cos(lat)
        r = np.sin(lat)
        for j in range(segments):
            lon = 2.0 * np.pi * j / segments
            verts.append(np.array([r * np.sin(lon), y, r * np.cos(lon)]))
    verts.append(np.array([0.0, -1.0, 0.0]))
    dirs = np.asarray(verts)

    faces = []
    for j in range(segments):
        faces.append([0, 1 + j, 1 + (j + 1) % segments])
    for i in range(rings - 2):
        a = 1 + i * segments
        b = 1 + (i + 1) * segments
        for j in range(segments):
            j2 = (j + 1) % segments
            faces.append([a + j, b + j, b + j2])
            faces.append([a + j, b + j2, a + j2])
    last = len(verts) - 1
    a = 1 + (rings - 2) * segments
    for j in range(segments):
        faces.append([last, a + (j + 1) % segments, a + j])
    positions = dirs * np.asarray(radii) + np.asarray(center)
    return positions, np.asarray(faces, dtype=np.int32), dirs


def _smoothstep(t):
    t = np.clip(t, 0.0, 1.0)
    return t * t * (3.0 - 2.0 * t)


def _cos_bump(dirs: np.ndarray, center: np.ndarray, width: float) -> np.ndarray:
    """Smooth compact bump of angular radius `width` around unit `center`."""
    ang = np.arccos(np.clip(dirs @ center, -1.0, 1.0))
    t = np.clip(1.0 - ang / width, 0.0, 1.0)
    return (0.5 - 0.5 * np.cos(np.pi * t)) ** 2


def make_rig(spec: ToyRigSpec = ToyRigSpec()) -> Rig:
    """Build the procedural head rig."""
    rng = np.random.default_rng(spec.seed)
    rings = spec.subdivision
    segments = int(spec.subdivision * 1.5)

    skull_v, skull_f, skull_dirs = _uv_sphere(rings, segments, HEAD_RADII,
                                              np.zeros(3))
    eyes = [_uv_sphere(6, 8, np.full(3, EYE_RADIUS), c) for c in EYE_CENTERS]

    verts = [skull_v]
    faces = [skull_f]
    offset = len(skull_v)
    eye_slices = []
    for ev, ef, _ in eyes:
        verts.append(ev)
        faces.append(ef + offset)
        eye_slices.append(slice(offset, offset + len(ev)))
        offset += len(ev)
    vertices = np.concatenate(verts)
    faces = np.concatenate(faces)
    v_total = len(vertices)

    # joints: root at head base, neck below the skull, jaw at the hinge
    hinge = np.asarray(spec.jaw_hinge)
    rest_joints = np.stack([
        np.array([0.0, -0.09, 0.0]),
        np.array([0.0, -0.07, 0.0]),
        hinge,
        EYE_CENTERS[0],
        EYE_CENTERS[1],
    ])
    joint_parents = np.array([-1, 0, 1, 1, 1], dtype=np.int32)

    # blend weights: skull mostly neck; jaw weight falls off smoothly from
    # the hinge with compact support (zero above the hinge plane)
    w = np.zeros((v_total, 5))
    below = _smoothstep((hinge[1] - vertices[:, 1]) / 0.05)
    front = _smoothstep((vertices[:, 2] - hinge[2] + 0.02) / 0.05)
    jaw_w = 0.9 * below * front
    w[:, 2] = jaw_w
    w[:, 1] = 1.0 - jaw_w
    for k, sl in enumerate(eye_slices):
        w[sl] = 0.0
        w[sl, 3 + k] = 1.0

    # smooth radial shape bumps (seeded); eyeballs keep zero bases
    n_skull = len(skull_v)
    shape_basis = np.zeros((v_total, 3, spec.n_shape))
    for m in range(spec.n_shape):
        c = rng.normal(size=3)
        c /= np.linalg.norm(c)
        bump = _cos_bump(skull_dirs, c, width=rng.uniform(0.6, 1.2))
        shape_basis[:n_skull, :, m] = (skull_dirs * bump[:, None]
                                       * rng.uniform(0.008, 0.015))

    expr_basis = np.zeros((v_total, 3, spec.n_expr))
    chin = _smoothstep((hinge[1] - 0.02 - vertices[:, 1]) / 0.04) \
        * _smoothstep((vertices[:, 2] - 0.02) / 0.05)
    expr_basis[:, 1, 0] = -0.012 * chin            # jaw-open assist
    for k in range(2):
        top = EYE_CENTERS[k] + np.array([0.0, 0.02, 0.01])
        top = top / np.linalg.norm(top)
        blink = _cos_bump(skull_dirs, top, width=0.35)
        expr_basis[:n_skull, 1, 1] += -0.006 * blink  # blink
    for m in range(2, spec.n_expr):
        c = rng.normal(size=3)
        c /= np.linalg.norm(c)
        bump = _cos_bump(skull_dirs, c, width=rng.uniform(0.4, 0.9))
        expr_basis[:n_skull, :, m] = (skull_dirs * bump[:, None]
                                      * rng.uniform(0.004, 0.009))

    # no pose correctives on the toy rig: deformation comes from FK/LBS alone
    pose_basis = np.zeros((v_total, 3, 9 * 4))

    return Rig(vertices=vertices, faces=faces, joint_parents=joint_parents,
               rest_joints=rest_joints, vertex_shape_basis=shape_basis,
               vertex_expr_basis=expr_basis, vertex_pose_basis=pose_basis,
               vertex_weights=w, jaw_index=2)


def make_animation(spec: ToyRigSpec, n_frames: int = 8,
                   jaw_max: float = 0.3) -> list[PoseState]:
    """Jaw open/close with a slight head turn and a blink, deterministic."""
    poses = []
    for f in range(n_frames):
        t = f / max(n_frames - 1, 1)
        theta = np.zeros((5, 3))
        theta[0, 1] = 0.25 * np.sin(2.0 * np.pi * t)        # head yaw
        theta[2, 0] = jaw_max * 0.5 * (1 - np.cos(2.0 * np.pi * t))  # jaw
        theta[3, 1] = 0.15 * np.sin(2.0 * np.pi * t)        # eyes dart
        theta[4, 1] = 0.15 * np.sin(2.0 * np.pi * t)
        psi = np.zeros(spec.n_expr)
        psi[0] = 0.5 * (1 - np.cos(2.0 * np.pi * t))
        psi[1] = max(0.0, np.sin(4.0 * np.pi * t))          # blink pulses
        poses.append(PoseState(beta=np.zeros(spec.n_shape), psi=psi,
                               theta=theta, translation=np.zeros(3),
                               jaw_index=2))
    return poses


def default_camera(width: int = 512, height: int = 512) -> Camera:
    """Front view filling most of the frame."""
    return Camera.look_at(eye=(0.0, 0.0, 0.42), target=(0.0, 0.0, 0.0),
                          width=width, height=height,
                          focal=1.2 * max(width, height), near=0.05, far=5.0)


def orbit_camera(azimuth: float, elevation: float, distance: float,
                 width: int = 512, height: int = 512,
                 target=(0.0, 0.0, 0.0)) -> Camera:
    """Orbit camera around the head; azimuth 0 is the front view (+z)."""
    ce = np.cos(elevation)
    eye = np.asarray(target) + distance * np.array(
        [np.sin(azimuth) * ce, np.sin(elevation), np.cos(azimuth) * ce])
    return Camera.look_at(eye=eye, target=target, width=width, height=height,
                          focal=1.2 * max(width, height), near=0.05, far=5.0)


def make_scene(spec: ToyRigSpec = ToyRigSpec(), points_per_face: int = 1,
               n_frames: int = 8, width: int = 512, height: int = 512):
    """Rig + cloud + animation + cameras, all deterministic under the spec."""
    rig = make_rig(spec)
    cloud = init_from_rig(rig, points_per_face=points_per_face, seed=spec.seed)
    poses = make_animation(spec, n_frames)
    cameras = [default_camera(width, height)]
    return rig, cloud, poses, cameras


FLAME_IMPORT_NOTES = """\
Importing a real parametric head model is intentionally a stub. The mapping
a converter must implement:

  vertices            <- model template vertices (v_template)
  faces               <- model triangle list
  rest_joints         <- joint regressor applied to the template (root,
                         neck, jaw, eye_l, eye_r), K = 4
  joint_parents       <- kinematic tree, re-rooted so index 0 is global
  vertex_shape_basis  <- first |shape| columns of the shape space,
                         reshaped (V, 3, |shape|)
  vertex_expr_basis   <- first |expr| columns of the expression space
  vertex_pose_basis   <- pose-corrective space reshaped (V, 3, 9K) with the
                         row-major (R - I) feature order declared in the
                         avatar asset header
  vertex_weights      <- skinning weights, with a zero root column appended
                         so rows span K+1 transforms and still sum to 1

No model weights ship here; generate toy rigs with `gsavatar toy` instead.
"""
