import dataclasses

import numpy as np
import pytest

from gsavatar.core import Cubemap, EnvironmentLight
from gsavatar.envlight import (compute_brdf_lut, compute_irradiance,
                               prefilter_ggx)
from gsavatar.fitting import (fit_materials, shade_pixels, shading_gradients,
                              MAX_FIT_POINTS)
from gsavatar.losses import mae
from gsavatar.pipeline import render_frame
from gsavatar.shade import ShadeParams
from gsavatar.toyrig import ToyRigSpec, make_scene, orbit_camera
from conftest import gradient_env, random_cloud, subsample


@pytest.fixture(scope="module")
def env() -> EnvironmentLight:
    cube = gradient_env(radiance=0.8)
    return EnvironmentLight(compute_irradiance(cube, 16),
                            prefilter_ggx(cube, 32, 3, 256, 0),
                            compute_brdf_lut(64, 1024, 0))


def _random_pixel(rng):
    albedo = rng.uniform(0.05, 0.95, 3)
    o = rng.uniform(0.12, 0.98)
    f0 = rng.uniform(0.03, 0.19)
    n = rng.normal(size=3)
    n /= np.linalg.norm(n)
    x = rng.uniform(0.1, 0.99)
    up = np.array([0, 0, 1.0]) if abs(n[2]) < 0.999 else np.array([1.0, 0, 0])
    t = np.cross(up, n)
    t /= np.linalg.norm(t)
    b = np.cross(n, t)
    phi = rng.uniform(0, 2 * np.pi)
    s = np.sqrt(1 - x * x)
    v = t * s * np.cos(phi) + b * s * np.sin(phi) + n * x
    alpha = rng.uniform(0.3, 1.0)
    return albedo, o, f0, n, v, alpha


def _near_knot(value, res, h=5e-3):
    u = value * res - 0.5
    return abs(u - round(u)) < h


def test_gradient_check_100_random_pixels(env):
    rng = np.random.default_rng(5)
    params = ShadeParams()
    h = 1e-4
    checked = 0
    for _ in range(400):
        if checked >= 100:
            break
        albedo, o, f0, n, v, alpha = _random_pixel(rng)
        # stay away from interpolation/clamp knots where the analytic
        # derivative legitimately jumps
        lut_res = env.lut_resolution
        x = float(np.clip(np.dot(n, v), 0, 1))
        if _near_knot(o, lut_res) or _near_knot(x, lut_res) \
                or _near_knot(o, env.n_mips - 1) or abs((1 - o) - f0) < 1e-3:
            continue
        checked += 1
        g = shading_gradients(albedo, o, f0, n, v, alpha, env, params)

        def out(a_, o_, f_):
            return shade_pixels(np.asarray(a_, float)[None], np.array([o_]),
                                np.array([f_]), n[None], v[None],
                                np.array([alpha]), env, params)[0]

        for c in range(3):
            ap, am = albedo.copy(), albedo.copy()
            ap[c] += h
            am[c] -= h
            fd = (out(ap, o, f0)[c] - out(am, o, f0)[c]) / (2 * h)
            assert abs(g.d_albedo[c] - fd) <= 1e-3 * max(abs(fd), 1e-6)
        fd = (out(albedo, o + h, f0) - out(albedo, o - h, f0)) / (2 * h)
        assert np.abs(g.d_roughness - fd).max() <= \
            1e-3 * max(np.abs(fd).max(), 1e-6)
        fd = (out(albedo, o, f0 + h) - out(albedo, o, f0 - h)) / (2 * h)
        assert np.abs(g.d_f0 - fd).max() <= 1e-3 * max(np.abs(fd).max(), 1e-6)
    assert checked == 100


def test_gradient_diffuse_term_is_irradiance(env):
    from gsavatar.shade import sample_irradiance
    n = np.array([0.0, 0.0, 1.0])
    g = shading_gradients(np.array([0.5, 0.5, 0.5]), 0.4, 0.1, n, n, 1.0, env)
    irr = sample_irradiance(env, n)
    # the specular term carries no albedo dependence, so d(out)/d(albedo)
    # is exactly the irradiance sample
    np.testing.assert_allclose(g.d_albedo, irr, atol=1e-12)


def test_gradient_zero_environment():
    env0 = EnvironmentLight(
        Cubemap.constant(0.0, 8),
        (Cubemap.constant(0.0, 8), Cubemap.constant(0.0, 4)),
        compute_brdf_lut(16, 128, 0))
    g = shading_gradients(np.array([0.5, 0.5, 0.5]), 0.5, 0.1,
                          np.array([0, 0, 1.0]), np.array([0, 0, 1.0]), 1.0,
                          env0)
    assert np.abs(g.d_albedo).max() == 0.0
    assert np.abs(g.d_roughness).max() == 0.0
    assert np.abs(g.d_f0).max() == 0.0


def _fit_fixture(n_points=16, seed=11):
    spec = ToyRigSpec()
    rig, cloud, poses, _ = make_scene(spec, points_per_face=1, n_frames=3)
    order = np.argsort(-cloud.positions[:, 2])
    chosen = []
    for i in order:
        p = cloud.positions[i]
        if p[2] < 0.03:
            break
        if all(np.linalg.norm(p - cloud.positions[j]) > 0.045
               for j in chosen):
            chosen.append(i)
        if len(chosen) >= n_points:
            break
    small = subsample(cloud, np.array(chosen))
    n = len(chosen)
    small = dataclasses.replace(
        small, log_scales=small.log_scales + np.float32(np.log(2.2)),
        opacities=np.full(n, 0.95, dtype=np.float32))
    rng = np.random.default_rng(seed)
    truth = small.with_materials(albedo=rng.uniform(0.15, 0.9, (n, 3)),
                                 roughness=rng.uniform(0.2, 0.95, n),
                                 f0=rng.uniform(0.03, 0.18, n))
    cams = [orbit_camera(a, e, 0.42, 72, 72)
            for a, e in ((-0.55, 0.1), (0.0, 0.0), (0.55, -0.1))]
    rest = [poses[0]] * 3
    return rig, small, truth, rest, cams


def test_fit_zero_iterations_identity(env):
    rig, small, truth, rest, cams = _fit_fixture(4)
    targets = [render_frame(truth, rig, p, c, env)[0]
               for p, c in zip(rest, cams)]
    res = fit_materials(small, rig, rest, cams, targets, env, iters=0)
    np.testing.assert_array_equal(res.cloud.albedo, small.albedo)
    np.testing.assert_array_equal(res.cloud.roughness, small.roughness)
    assert len(res.trace) == 1


def test_fit_three_gaussian_recovery(env):
    rig, small, truth, rest, cams = _fit_fixture(3)
    targets = [render_frame(truth, rig, p, c, env)[0]
               for p, c in zip(rest, cams)]
    res = fit_materials(small, rig, rest, cams, targets, env,
                        iters=300, step=0.4)
    assert mae(res.cloud.albedo, truth.albedo) < 0.05
    assert res.trace[-1].total <= res.trace[0].total


def test_fit_loss_decreases(env):
    rig, small, truth, rest, cams = _fit_fixture(8)
    targets = [render_frame(truth, rig, p, c, env)[0]
               for p, c in zip(rest, cams)]
    res = fit_materials(small, rig, rest, cams, targets, env,
                        iters=60, step=0.3)
    totals = [r.total for r in res.trace]
    best = np.minimum.accumulate(totals)
    assert best[-1] < totals[0]
    assert res.trace[-1].total <= res.trace[0].total


def test_fit_rejects_oversized_scene(env):
    rig, small, truth, rest, cams = _fit_fixture(2)
    big = subsample(random_cloud(MAX_FIT_POINTS + 1, 0, n_shape=8, n_expr=6,
                                 n_joints=4),
                    np.arange(MAX_FIT_POINTS + 1))
    with pytest.raises(ValueError):
        fit_materials(big, rig, rest, cams, [np.zeros((8, 8, 3))] * 3, env)


def test_fit_respects_clamp_ranges(env):
    rig, small, truth, rest, cams = _fit_fixture(6)
    targets = [render_frame(truth, rig, p, c, env)[0]
               for p, c in zip(rest, cams)]
    res = fit_materials(small, rig, rest, cams, targets, env,
                        iters=40, step=0.5)
    r = small.ranges
    assert (res.cloud.roughness >= np.float32(r.roughness_min)).all()
    assert (res.cloud.roughness <= np.float32(r.roughness_max)).all()
    assert (res.cloud.f0 >= np.float32(r.f0_min)).all()
    assert (res.cloud.f0 <= np.float32(r.f0_max)).all()
    assert (res.cloud.albedo >= 0).all() and (res.cloud.albedo <= 1).all()
