"""Relightable Gaussian head-avatar renderer.

Library layout:
  core      shared data model (clouds, rigs, poses, cameras, lights)
  deform    blendshapes + forward kinematics + linear blend skinning
  rasterize tile-based splatting into multi-channel G-buffers
  envlight  environment-light bakes + Monte Carlo reference integrator
  shade     deferred split-sum image-based-lighting shading
  losses    loss suite and image metrics
  fitting   analytic shading gradients + desk-scale material fitter
  io        asset containers and image formats
  toyrig    deterministic synthetic head rigs/scenes
  pipeline  deform -> splat -> shade frame composition
  cli       command-line interface; server: the interactive session
"""

from .core import (Camera, Cubemap, EnvironmentLight, GaussianCloud, GBuffer,
                   MaterialRanges, PoseState, Rig, Violation, clamp_materials,
                   validate)
from .deform import (blendshape_offset, forward_kinematics, init_from_rig,
                     lbs, pose_cloud, pose_feature, rodrigues)
from .envlight import (bake_environment, compute_brdf_lut, compute_irradiance,
                       equirect_to_cubemap, mc_reference, prefilter_ggx)
from .fitting import fit_materials, shading_gradients
from .losses import (LossBundle, LossReport, LossWeights, d_ssim, l_albedo,
                     l_jaw, l_normal, l_rgb, mae, mae_star, psnr, ssim,
                     total_loss, tv)
from .pipeline import render_frame
from .rasterize import (gaussian_weight, normals_from_depth, point_normal,
                        project, rasterize, rasterize_brute)
from .shade import ShadeParams, fresnel_ks, reflect, shade

__version__ = "0.1.0"
