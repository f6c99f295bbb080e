import dataclasses

import numpy as np
import pytest

from gsavatar.core import Camera, Cubemap, EnvironmentLight, GaussianCloud
from gsavatar.envlight import (compute_brdf_lut, compute_irradiance,
                               cubemap_directions, prefilter_ggx)
from gsavatar.toyrig import ToyRigSpec, make_scene


def random_cloud(n, seed, spread=0.12, scale_range=(0.005, 0.03),
                 n_shape=2, n_expr=2, n_joints=1) -> GaussianCloud:
    rng = np.random.default_rng(seed)
    q = rng.normal(size=(n, 4))
    q /= np.linalg.norm(q, axis=1, keepdims=True)
    w = rng.uniform(0.0, 1.0, (n, n_joints + 1))
    w /= w.sum(axis=1, keepdims=True)
    return GaussianCloud(
        positions=rng.uniform(-spread, spread, (n, 3)),
        rotations=q,
        log_scales=np.log(rng.uniform(*scale_range, (n, 3))),
        opacities=rng.uniform(0.2, 1.0, n),
        albedo=rng.uniform(0.0, 1.0, (n, 3)),
        roughness=rng.uniform(0.1, 1.0, n),
        f0=rng.uniform(0.02, 0.2, n),
        shape_basis=rng.normal(0, 0.01, (n, 3, n_shape)),
        expr_basis=rng.normal(0, 0.01, (n, 3, n_expr)),
        pose_basis=rng.normal(0, 0.001, (n, 3, 9 * n_joints)),
        blend_weights=w)


def subsample(cloud: GaussianCloud, idx) -> GaussianCloud:
    return dataclasses.replace(
        cloud,
        positions=cloud.positions[idx], rotations=cloud.rotations[idx],
        log_scales=cloud.log_scales[idx], opacities=cloud.opacities[idx],
        albedo=cloud.albedo[idx], roughness=cloud.roughness[idx],
        f0=cloud.f0[idx], shape_basis=cloud.shape_basis[idx],
        expr_basis=cloud.expr_basis[idx], pose_basis=cloud.pose_basis[idx],
        blend_weights=cloud.blend_weights[idx])


def gradient_env(seed=0, radiance=0.5, res=32) -> Cubemap:
    dirs = cubemap_directions(res)
    x, y, z = dirs[..., 0], dirs[..., 1], dirs[..., 2]
    f = np.stack([radiance * (0.6 + 0.4 * (x + 1) / 2),
                  radiance * (0.6 + 0.4 * (y + 1) / 2),
                  radiance * (0.6 + 0.4 * (z + 1) / 2)], axis=-1)
    return Cubemap(f.astype(np.float32))


@pytest.fixture(scope="session")
def small_env() -> EnvironmentLight:
    cube = gradient_env()
    return EnvironmentLight(compute_irradiance(cube, 16),
                            prefilter_ggx(cube, 32, 3, samples=256, seed=0),
                            compute_brdf_lut(64, samples=1024, seed=0))


@pytest.fixture(scope="session")
def toy():
    spec = ToyRigSpec()
    rig, cloud, poses, cams = make_scene(spec, points_per_face=1, n_frames=4,
                                         width=96, height=96)
    return spec, rig, cloud, poses, cams


@pytest.fixture(scope="session")
def small_camera() -> Camera:
    return Camera.look_at(eye=(0, 0, 0.5), target=(0, 0, 0),
                          width=64, height=64, focal=80)
