"""Command-line interface.

Subcommands: toy (generate synthetic assets), prefilter (bake a light from
an HDR panorama), render (shaded frames + optional raw channel dumps), fit
(desk-scale material fitting with a CSV trace and loss figure), bench
(throughput report), serve (interactive HTTP session), import-flame (stub).

Every run with identical inputs, flags, and seeds writes byte-identical
artifacts. GSAV_THREADS overrides the worker thread count.
"""

from __future__ import annotations

import argparse
import csv
import sys
import time
from pathlib import Path

import numpy as np

from . import io as gio
from .core import PoseState
from .envlight import (bake_environment, compute_brdf_lut, compute_irradiance,
                       equirect_to_cubemap, prefilter_ggx)
from .core import EnvironmentLight
from .fitting import fit_materials
from .losses import LossWeights
from .pipeline import render_frame
from .rasterize import ALL_CHANNELS, rasterize, set_threads
from .shade import ShadeParams, shade
from .deform import pose_cloud
from .toyrig import FLAME_IMPORT_NOTES, ToyRigSpec, make_scene


def _add_shade_flags(p: argparse.ArgumentParser):
    p.add_argument("--f0-scale", type=float, default=1.0,
                   help="base-reflectance multiplier (material editing)")
    p.add_argument("--roughness-scale", type=float, default=1.0)
    p.add_argument("--env-yaw", type=float, default=0.0,
                   help="environment rotation about +y, radians")
    p.add_argument("--exposure", type=float, default=1.0)


def _shade_params(args) -> ShadeParams:
    return ShadeParams(f0_scale=args.f0_scale,
                       roughness_scale=args.roughness_scale,
                       env_yaw=args.env_yaw, exposure=args.exposure)


def _parse_bg(text: str):
    if text == "black":
        return None
    vals = [float(v) for v in text.split(",")]
    if len(vals) != 3:
        raise SystemExit("--bg must be 'black' or three comma-separated floats")
    return vals


def cmd_toy(args) -> int:
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    spec = ToyRigSpec(subdivision=args.subdivision, seed=args.seed)
    rig, cloud, poses, cameras = make_scene(
        spec, points_per_face=args.points_per_face, n_frames=args.frames,
        width=args.size, height=args.size)
    gio.save_rig(out / "rig.gsrg", rig)
    gio.save_avatar(out / "avatar.gsav", cloud)
    gio.save_animation(out / "animation.jsonl", poses)
    gio.save_camera(out / "camera.json", cameras[0])
    gio.save_cameras(out / "cameras.json", cameras * len(poses))

    if not args.no_light:
        # soft studio gradient, deterministic
        h, w = 64, 128
        v, u = np.meshgrid(np.linspace(0, 1, h), np.linspace(0, 1, w),
                           indexing="ij")
        sky = np.stack([0.35 + 0.35 * (1 - v), 0.38 + 0.33 * (1 - v),
                        0.42 + 0.3 * (1 - v)], axis=-1)
        sun = 0.6 * np.exp(-((u - 0.3) ** 2 + (v - 0.3) ** 2) / 0.02)[..., None]
        env = bake_environment(sky + sun, seed=args.seed)
        gio.save_light(out / "light.gslt", env, meta={"seed": args.seed})
    print(f"toy scene written to {out} "
          f"({cloud.n_points} points, {len(poses)} frames)")
    return 0


def cmd_prefilter(args) -> int:
    src = Path(args.input)
    if src.suffix.lower() == ".hdr":
        img = gio.read_hdr(src)
    elif src.suffix.lower() == ".pfm":
        img = gio.read_pfm(src)
    else:
        raise SystemExit(f"unsupported environment input {src.suffix} "
                         "(expected .hdr or .pfm)")
    cube = equirect_to_cubemap(img, max(args.env_res, args.irr_res) * 2)
    env = EnvironmentLight(
        compute_irradiance(cube, args.irr_res),
        prefilter_ggx(cube, args.env_res, args.mips,
                      samples=args.prefilter_samples, seed=args.seed),
        compute_brdf_lut(args.lut_res, samples=args.lut_samples,
                         seed=args.seed))
    Path(args.output).parent.mkdir(parents=True, exist_ok=True)
    gio.save_light(args.output, env, meta={
        "seed": args.seed, "prefilter_samples": args.prefilter_samples,
        "lut_samples": args.lut_samples, "source": src.name})
    print(f"light asset written to {args.output} "
          f"(irr {args.irr_res}, env {args.env_res}x{args.mips} mips, "
          f"lut {args.lut_res})")
    return 0


def _load_poses(args, n_shape: int) -> list[PoseState]:
    if args.animation:
        return gio.load_animation(args.animation, n_shape=n_shape)
    poses = gio.load_animation(args.pose, n_shape=n_shape)
    return poses[:1]


def cmd_render(args) -> int:
    set_threads(args.threads)
    cloud = gio.load_avatar(args.avatar)
    rig = gio.load_rig(args.rig)
    env = gio.load_light(args.light)
    camera = gio.load_camera(args.camera)
    poses = _load_poses(args, cloud.n_shape)
    params = _shade_params(args)
    bg = _parse_bg(args.bg)
    channels = args.channels.split(",") if args.channels else []
    for ch in channels:
        if ch not in ALL_CHANNELS:
            raise SystemExit(f"unknown channel '{ch}' "
                             f"(available: {','.join(ALL_CHANNELS)})")

    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    for i, pose in enumerate(poses):
        image, gbuf = render_frame(cloud, rig, pose, camera, env, params,
                                   background=bg)
        gio.write_png(out / f"frame_{i:04d}.png", image)
        for ch in channels:
            data = getattr(gbuf, ch)
            gio.write_pfm(out / f"frame_{i:04d}_{ch}.pfm",
                          data.astype(np.float32))
    print(f"rendered {len(poses)} frame(s) to {out}")
    return 0


def _read_target_dir(path, count: int, what: str) -> list[np.ndarray]:
    directory = Path(path)
    frames = []
    for i in range(count):
        f = directory / f"frame_{i:04d}.png"
        if not f.exists():
            raise SystemExit(f"missing {what} frame {f}")
        frames.append(gio.read_png(f))
    return frames


def cmd_fit(args) -> int:
    set_threads(args.threads)
    cloud = gio.load_avatar(args.avatar)
    rig = gio.load_rig(args.rig)
    env = gio.load_light(args.light)
    poses = gio.load_animation(args.animation, n_shape=cloud.n_shape)
    cameras = gio.load_cameras(args.cameras)
    if len(cameras) == 1:
        cameras = cameras * len(poses)
    targets = _read_target_dir(args.targets, len(poses), "target")
    albedo_targets = None
    if args.albedo_targets:
        albedo_targets = _read_target_dir(args.albedo_targets, len(poses),
                                          "albedo target")
    weights = LossWeights(jaw=args.lambda_jaw, l1=args.lambda_l1,
                          normal=args.lambda_normal, albedo=args.lambda_albedo,
                          tv=args.lambda_tv)

    result = fit_materials(cloud, rig, poses, cameras, targets, env,
                           weights=weights, iters=args.iters, step=args.step,
                           albedo_targets=albedo_targets)
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    gio.save_avatar(out / "fitted.gsav", result.cloud)
    _write_trace(out / "trace.csv", result.trace, weights)
    _plot_trace(out / "trace.png", result.trace)
    final = result.trace[-1]
    print(f"fit finished: {args.iters} iters, total {final.total:.6f}, "
          f"MAE* {100 * final.mae:.3f}; outputs in {out}")
    return 0


def _write_trace(path, trace, weights: LossWeights) -> None:
    with open(path, "w", newline="") as fh:
        fh.write(f"# weights: jaw={weights.jaw} l1={weights.l1} "
                 f"normal={weights.normal} albedo={weights.albedo} "
                 f"tv={weights.tv}\n")
        writer = csv.writer(fh)
        writer.writerow(["iteration", "rgb", "jaw", "normal", "albedo", "tv",
                         "mae", "mae_star", "d_ssim", "total"])
        for i, r in enumerate(trace):
            writer.writerow([i, f"{r.rgb:.9g}", f"{r.jaw:.9g}",
                             f"{r.normal:.9g}", f"{r.albedo:.9g}",
                             f"{r.tv:.9g}", f"{r.mae:.9g}",
                             f"{100 * r.mae:.9g}", f"{r.d_ssim:.9g}",
                             f"{r.total:.9g}"])


def _plot_trace(path, trace) -> None:
    import matplotlib
    matplotlib.use("Agg")
    import matplotlib.pyplot as plt

    it = np.arange(len(trace))
    fig, ax = plt.subplots(figsize=(6, 4))
    ax.plot(it, [r.total for r in trace], label="total", lw=2)
    ax.plot(it, [r.rgb for r in trace], label="rgb", lw=1)
    ax.plot(it, [r.mae for r in trace], label="mae", lw=1)
    ax.set_xlabel("iteration")
    ax.set_ylabel("loss")
    ax.set_yscale("log")
    ax.legend(loc="upper right", frameon=False)
    ax.set_title("material fit loss trace")
    fig.tight_layout()
    fig.savefig(path, dpi=110)
    plt.close(fig)


def cmd_bench(args) -> int:
    threads = set_threads(args.threads)
    cloud = gio.load_avatar(args.avatar)
    rig = gio.load_rig(args.rig)
    env = gio.load_light(args.light)
    camera = gio.load_camera(args.camera)

    # procedural animation over the requested frame count
    k1 = rig.n_joints + 1
    poses = []
    for f in range(args.frames):
        t = f / max(args.frames - 1, 1)
        theta = np.zeros((k1, 3))
        theta[0, 1] = 0.3 * np.sin(2 * np.pi * t)
        theta[min(rig.jaw_index, k1 - 1), 0] = 0.15 * (1 - np.cos(2 * np.pi * t))
        poses.append(PoseState(np.zeros(cloud.n_shape), np.zeros(cloud.n_expr),
                               theta, np.zeros(3), rig.jaw_index))

    # warm up kernels outside the timed loop
    posed = pose_cloud(cloud, rig, poses[0])
    gbuf = rasterize(posed, camera)
    shade(gbuf, camera, env)

    t_deform = t_raster = t_shade = 0.0
    t0 = time.perf_counter()
    for pose in poses:
        s = time.perf_counter()
        posed = pose_cloud(cloud, rig, pose)
        t_deform += time.perf_counter() - s
        s = time.perf_counter()
        gbuf = rasterize(posed, camera)
        t_raster += time.perf_counter() - s
        s = time.perf_counter()
        shade(gbuf, camera, env)
        t_shade += time.perf_counter() - s
    wall = time.perf_counter() - t0
    fps = args.frames / wall

    n = args.frames
    rows = [("points", cloud.n_points), ("resolution",
            f"{camera.width}x{camera.height}"), ("frames", n),
            ("threads", threads), ("fps", f"{fps:.2f}"),
            ("deform_ms", f"{1000 * t_deform / n:.2f}"),
            ("rasterize_ms", f"{1000 * t_raster / n:.2f}"),
            ("shade_ms", f"{1000 * t_shade / n:.2f}")]
    for k, v in rows:
        print(f"{k:>14}: {v}")

    if args.out:
        out = Path(args.out)
        out.mkdir(parents=True, exist_ok=True)
        with open(out / "bench.csv", "w", newline="") as fh:
            writer = csv.writer(fh)
            writer.writerow([k for k, _ in rows])
            writer.writerow([v for _, v in rows])
        _plot_bench(out / "bench.png",
                    [1000 * t_deform / n, 1000 * t_raster / n,
                     1000 * t_shade / n])
    return 0


def _plot_bench(path, stage_ms) -> None:
    import matplotlib
    matplotlib.use("Agg")
    import matplotlib.pyplot as plt

    fig, ax = plt.subplots(figsize=(5, 3.2))
    stages = ["deform", "rasterize", "shade"]
    ax.bar(stages, stage_ms, color=["#4878d0", "#ee854a", "#6acc64"])
    ax.set_ylabel("ms / frame")
    ax.set_title("per-stage render time")
    fig.tight_layout()
    fig.savefig(path, dpi=110)
    plt.close(fig)


def cmd_serve(args) -> int:
    from .server import serve

    set_threads(args.threads)
    return serve(avatar=args.avatar, rig=args.rig, lights_dir=args.lights,
                 host=args.host, port=args.port, size=args.size,
                 static_dir=args.static)


def cmd_import_flame(args) -> int:
    sys.stderr.write(FLAME_IMPORT_NOTES)
    return 2


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(
        prog="gsavatar",
        description="Relightable Gaussian head-avatar renderer. PNG output "
                    "uses display gamma 1/2.2 (not piecewise sRGB).")
    sub = ap.add_subparsers(dest="command", required=True)

    p = sub.add_parser("toy", help="generate a deterministic synthetic scene")
    p.add_argument("--out", required=True)
    p.add_argument("--points-per-face", type=int, default=1)
    p.add_argument("--frames", type=int, default=8)
    p.add_argument("--subdivision", type=int, default=20)
    p.add_argument("--size", type=int, default=512)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--no-light", action="store_true",
                   help="skip baking the default studio light")
    p.set_defaults(func=cmd_toy)

    p = sub.add_parser("prefilter", help="bake a light asset from an HDR map")
    p.add_argument("--input", required=True, help=".hdr or .pfm equirect")
    p.add_argument("--output", required=True)
    p.add_argument("--irr-res", type=int, default=16)
    p.add_argument("--env-res", type=int, default=32)
    p.add_argument("--mips", type=int, default=3)
    p.add_argument("--lut-res", type=int, default=64)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--prefilter-samples", type=int, default=256)
    p.add_argument("--lut-samples", type=int, default=1024)
    p.set_defaults(func=cmd_prefilter)

    p = sub.add_parser("render", help="render shaded frames")
    p.add_argument("--avatar", required=True)
    p.add_argument("--rig", required=True)
    p.add_argument("--light", required=True)
    p.add_argument("--camera", required=True)
    g = p.add_mutually_exclusive_group(required=True)
    g.add_argument("--pose", help="single-frame animation file")
    g.add_argument("--animation")
    p.add_argument("--out", required=True)
    p.add_argument("--channels", default="",
                   help="comma-separated raw G-buffer dumps (PFM): "
                        + ",".join(ALL_CHANNELS))
    p.add_argument("--bg", default="black", help="'black' or r,g,b floats")
    p.add_argument("--threads", type=int, default=None)
    _add_shade_flags(p)
    p.set_defaults(func=cmd_render)

    p = sub.add_parser("fit", help="fit per-point materials to target frames")
    p.add_argument("--avatar", required=True)
    p.add_argument("--rig", required=True)
    p.add_argument("--light", required=True)
    p.add_argument("--animation", required=True)
    p.add_argument("--cameras", required=True)
    p.add_argument("--targets", required=True)
    p.add_argument("--albedo-targets", default=None)
    p.add_argument("--out", required=True)
    p.add_argument("--iters", type=int, default=500)
    p.add_argument("--step", type=float, default=0.01)
    p.add_argument("--lambda-jaw", type=float, default=0.1)
    p.add_argument("--lambda-l1", type=float, default=0.8)
    p.add_argument("--lambda-normal", type=float, default=1e-5)
    p.add_argument("--lambda-albedo", type=float, default=0.25)
    p.add_argument("--lambda-tv", type=float, default=0.02)
    p.add_argument("--threads", type=int, default=None)
    p.set_defaults(func=cmd_fit)

    p = sub.add_parser("bench", help="frame-throughput benchmark")
    p.add_argument("--avatar", required=True)
    p.add_argument("--rig", required=True)
    p.add_argument("--light", required=True)
    p.add_argument("--camera", required=True)
    p.add_argument("--frames", type=int, default=50)
    p.add_argument("--threads", type=int, default=None)
    p.add_argument("--out", default=None)
    p.set_defaults(func=cmd_bench)

    p = sub.add_parser("serve", help="interactive HTTP rendering session")
    p.add_argument("--avatar", required=True)
    p.add_argument("--rig", required=True)
    p.add_argument("--lights", required=True, help="directory of .gslt assets")
    p.add_argument("--host", default="127.0.0.1")
    p.add_argument("--port", type=int, default=8090)
    p.add_argument("--size", type=int, default=512)
    p.add_argument("--static", default=None,
                   help="directory of viewer assets (default frontend/dist)")
    p.add_argument("--threads", type=int, default=None)
    p.set_defaults(func=cmd_serve)

    p = sub.add_parser("import-flame",
                       help="stub: documents the parametric-model mapping")
    p.set_defaults(func=cmd_import_flame)
    return ap


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    return args.func(args)


if __name__ == "__main__":
    sys.exit(main())
