"""Recover motion-blur, depth-of-field and noise parameters from image pairs.

Each fit compares a distorted observation against its clean counterpart,
given the scene geometry (depth for DoF, optical flow for motion blur).
"""

import json
import time
from dataclasses import dataclass, field
from math import ceil
from typing import Optional

import numpy as np

from ._validation import check_depth, check_flow, check_image, check_same_size
from .core import (
    GaussianBlurBank,
    build_laplacian_pyramid,
    gaussian_pyramid,
    local_std,
    local_std_subgrid,
    to_luminance,
)
from .exceptions import DegenerateFitError, InvalidInputError
from .synthesis import DofModel, MbModel, NoiseModel, _as_3d, predict_noise_std, synthesize_mb

DOF_SEARCH_MAX = 10.0
DOF_SEARCH_STEPS = 100
MB_SEARCH_STEPS = 10
TEXTURE_SIGMA = 2.0
TEXTURE_THRESHOLD = 0.02
DOF_DAMPING = 1e-8

__all__ = [
    "ModelSet",
    "SceneBundle",
    "dof_sigma_grid",
    "estimate_sigma_map",
    "fit_all",
    "fit_dof_model",
    "fit_mb_exposure",
    "fit_noise_model",
    "mb_beta_grid",
    "predict_noise_std",
    "texture_mask",
]


@dataclass
class SceneBundle:
    """One frame: clean RGB, geometry and (optionally) the distorted observation."""

    clean: np.ndarray
    depth: np.ndarray
    flow: np.ndarray
    distorted: Optional[np.ndarray] = None
    frame_id: str = ""


@dataclass
class ModelSet:
    mb: MbModel = field(default_factory=MbModel)
    dof: DofModel = field(default_factory=DofModel)
    noise: NoiseModel = field(default_factory=NoiseModel)
    provenance: dict = field(default_factory=dict)

    def to_dict(self):
        return {
            "version": 1,
            "mb": {"beta": float(self.mb.beta)},
            "dof": {
                "a": float(self.dof.a),
                "b": float(self.dof.b),
                "c": float(self.dof.c),
                "sigma_max": float(self.dof.sigma_max),
            },
            "noise": {
                "levels": int(self.noise.level_count),
                "pool_sigma": float(self.noise.pool_sigma),
                "stride": int(self.noise.stride),
                "maps": self.noise.maps.tolist(),
            },
            "provenance": self.provenance,
        }

    @classmethod
    def from_dict(cls, doc):
        try:
            if doc.get("version") != 1:
                raise InvalidInputError(f"unsupported model version {doc.get('version')!r}")
            noise = doc["noise"]
            maps = np.asarray(noise["maps"], dtype=np.float64)
            if len(maps) != noise["levels"]:
                raise InvalidInputError(
                    f"noise declares {noise['levels']} levels but has {len(maps)} maps"
                )
            return cls(
                mb=MbModel(beta=float(doc["mb"]["beta"])),
                dof=DofModel(**{k: float(doc["dof"][k]) for k in ("a", "b", "c", "sigma_max")}),
                noise=NoiseModel(
                    maps=maps,
                    pool_sigma=float(noise["pool_sigma"]),
                    stride=int(noise["stride"]),
                ),
                provenance=doc.get("provenance", {}),
            )
        except (KeyError, TypeError) as exc:
            raise InvalidInputError(f"malformed model document: {exc!r}") from exc

    def to_json(self):
        # json uses repr() for floats, which round-trips exactly
        return json.dumps(self.to_dict(), indent=2, sort_keys=False)

    @classmethod
    def from_json(cls, text):
        return cls.from_dict(json.loads(text))


# -- noise -------------------------------------------------------------------


def fit_noise_model(input, denoised, levels=4, pool_sigma=4.0, stride=32, pool_radius=4):
    """Fit per-band affine maps from luminance to local noise std.

    The noise estimate ``input - denoised`` is split into ``levels`` Laplacian
    bands (the low-pass residual is ignored). For every band the per-channel
    local std is regressed on the denoised luminance, sampled on a subgrid
    whose stride halves with each level.

    Returns
    -------
    NoiseModel
        With ``fit_info_`` attached: per-level sample counts, RMS residuals
        and a ``degenerate`` flag for levels whose luminance was constant.
    """
    input = check_image(input, channels=3, name="input")
    denoised = check_image(denoised, channels=3, name="denoised")
    check_same_size(input, denoised, name="denoised")
    model = NoiseModel.zeros(levels, pool_sigma=pool_sigma, stride=stride,
                             pool_radius=pool_radius)
    pyr = build_laplacian_pyramid(input - denoised, levels)
    lum = gaussian_pyramid(to_luminance(denoised), levels)
    info = []
    for lvl, band in enumerate(pyr.levels):
        sigma, radius = model.pool_params(lvl)
        step = model.level_stride(lvl)
        start = step // 2
        y = lum[lvl][start::step, start::step].ravel()
        s = local_std_subgrid(band, sigma, radius, start, step).reshape(-1, 3)
        if np.ptp(y) <= 1e-12:
            model.maps[lvl, 0] = 0.0
            model.maps[lvl, 1] = s.mean(axis=0)
            resid = s - model.maps[lvl, 1]
            degenerate = True
        else:
            design = np.column_stack([y, np.ones_like(y)])
            coef, *_ = np.linalg.lstsq(design, s, rcond=None)
            model.maps[lvl] = coef
            resid = s - design @ coef
            degenerate = False
        info.append({
            "level": lvl,
            "samples": int(len(y)),
            "rms": float(np.sqrt(np.mean(resid ** 2))),
            "degenerate": degenerate,
        })
    model.fit_info_ = info
    return model


# -- depth of field ------------------------------------------------------------


def dof_sigma_grid(steps=DOF_SEARCH_STEPS, sigma_max=DOF_SEARCH_MAX):
    return np.linspace(0.0, sigma_max, steps)


def estimate_sigma_map(input, sharp, grid=None):
    """Per-pixel blur std that best explains ``input`` as a blurred ``sharp``.

    Every candidate std on ``grid`` (default: 100 points over [0, 10]) blurs
    the whole sharp image; each pixel keeps the candidate with the lowest
    squared error summed over channels. Ties keep the smaller std.
    """
    input = check_image(input, name="input")
    sharp = check_image(sharp, name="sharp")
    if input.shape != sharp.shape:
        raise InvalidInputError(f"input {input.shape} and sharp {sharp.shape} differ in shape")
    grid = dof_sigma_grid() if grid is None else np.asarray(grid, dtype=np.float64)
    from ._kernels import argmin_update

    bank = GaussianBlurBank(sharp, grid.max())
    target = np.ascontiguousarray(_as_3d(input))
    best_err = np.full(input.shape[:2], np.inf)
    best_sigma = np.zeros(input.shape[:2])
    for s in grid:
        argmin_update(best_err, best_sigma, _as_3d(bank.blur(s)), target, float(s))
    return best_sigma


def texture_mask(sharp, threshold=TEXTURE_THRESHOLD, sigma_pool=TEXTURE_SIGMA):
    """True where the pooled luminance std of ``sharp`` exceeds ``threshold``."""
    sharp = check_image(sharp, channels=(1, 3), name="sharp")
    if sharp.ndim == 3 and sharp.shape[2] == 3:
        y = to_luminance(sharp)
    else:
        y = sharp.reshape(sharp.shape[:2])
    return local_std(y, sigma_pool) > threshold


def fit_dof_model(sigmas, depth, mask, damping=DOF_DAMPING, sigma_max=DOF_SEARCH_MAX):
    """Least-squares quadratic ``sigma = a Z^2 + b Z + c`` over masked pixels.

    Solved through the normal equations with ``damping`` added to the
    diagonal. The RMS residual is attached as ``residual_rms_``.

    Raises
    ------
    DegenerateFitError
        If the masked pixels cover fewer than three distinct depths.
    """
    sigmas = np.asarray(sigmas, dtype=np.float64)
    depth = check_depth(depth, sigmas)
    mask = np.asarray(mask, dtype=bool)
    if mask.shape != sigmas.shape:
        raise InvalidInputError(f"mask shape {mask.shape} does not match {sigmas.shape}")
    z = depth[mask]
    s = sigmas[mask]
    n_depths = len(np.unique(z))
    if len(z) < 3 or n_depths < 3:
        raise DegenerateFitError(
            f"quadratic DoF fit needs >= 3 distinct depths among textured pixels, "
            f"got {n_depths} depth(s) over {len(z)} pixel(s)"
        )
    design = np.column_stack([z * z, z, np.ones_like(z)])
    lhs = design.T @ design + damping * np.eye(3)
    rhs = design.T @ s
    a, b, c = np.linalg.solve(lhs, rhs)
    model = DofModel(a=float(a), b=float(b), c=float(c), sigma_max=sigma_max)
    model.residual_rms_ = float(np.sqrt(np.mean((design @ np.array([a, b, c]) - s) ** 2)))
    return model


# -- motion blur ---------------------------------------------------------------


def mb_beta_grid(steps=MB_SEARCH_STEPS):
    return np.linspace(0.0, 1.0, steps)


def _mb_border(flow):
    return int(ceil(np.hypot(flow[..., 0], flow[..., 1]).max()))


def fit_mb_exposure(input, sharp, flow, grid=None):
    """Exposure fraction from an exhaustive search over ``grid``.

    The default grid has 10 points over [0, 1], endpoints included. A border
    as wide as the largest flow vector is excluded from the MSE. Ties go to
    the smaller exposure. The per-candidate losses are attached as
    ``losses_``.
    """
    input = check_image(input, name="input")
    sharp = check_image(sharp, name="sharp")
    if input.shape != sharp.shape:
        raise InvalidInputError(f"input {input.shape} and sharp {sharp.shape} differ in shape")
    flow = check_flow(flow, input)
    grid = mb_beta_grid() if grid is None else np.asarray(grid, dtype=np.float64)
    b = _mb_border(flow)
    h, w = input.shape[:2]
    if 2 * b >= min(h, w):
        b = 0
    inner = (slice(b, h - b), slice(b, w - b))
    target = input[inner]
    losses = []
    for beta in grid:
        pred = synthesize_mb(sharp, MbModel(float(beta)), flow)[inner]
        diff = pred - target
        # per-row partial sums combined in row order
        losses.append(float(np.sum(np.sum((diff * diff).reshape(diff.shape[0], -1), axis=1)))
                      / diff.size)
    losses = np.array(losses)
    best = int(np.argmin(losses))  # first minimum, i.e. the smaller beta
    model = MbModel(float(grid[best]))
    model.losses_ = losses
    return model


# -- orchestration -------------------------------------------------------------


def fit_all(bundle, skip=(), frame_id=None):
    """Run the noise, DoF and motion-blur fits on one bundle.

    The three fits are independent. A fit that fails leaves the identity model
    for that distortion in place; its status and message are recorded in
    ``provenance["stages"]``.

    Parameters
    ----------
    bundle : SceneBundle
        Must carry ``distorted``; ``clean`` serves as the restored image for
        all three fits.
    skip : iterable of {"noise", "dof", "mb"}
        Stages to leave at identity.
    """
    if bundle.distorted is None:
        raise InvalidInputError("bundle has no distorted image to fit against")
    observed = check_image(bundle.distorted, channels=3, name="distorted")
    clean = check_image(bundle.clean, channels=3, name="clean")
    check_same_size(observed, clean, name="clean")
    result = ModelSet()
    stages = {}
    result.provenance = {
        "frame_id": frame_id if frame_id is not None else bundle.frame_id,
        "stages": stages,
    }

    def run(name, fn):
        if name in skip:
            stages[name] = {"status": "skipped", "seconds": 0.0}
            return
        t0 = time.perf_counter()
        try:
            extra = fn()
            stages[name] = {"status": "ok", **extra}
        except (DegenerateFitError, InvalidInputError) as exc:
            kind = "degenerate" if isinstance(exc, DegenerateFitError) else "error"
            stages[name] = {"status": kind, "message": str(exc)}
        stages[name]["seconds"] = time.perf_counter() - t0

    def noise():
        result.noise = fit_noise_model(observed, clean)
        return {"levels": result.noise.fit_info_}

    def dof():
        sigmas = estimate_sigma_map(observed, clean)
        mask = texture_mask(clean)
        result.dof = fit_dof_model(sigmas, bundle.depth, mask)
        return {"residual_rms": result.dof.residual_rms_, "masked_pixels": int(mask.sum())}

    def mb():
        result.mb = fit_mb_exposure(observed, clean, bundle.flow)
        return {"losses": result.mb.losses_.tolist()}

    run("noise", noise)
    run("dof", dof)
    run("mb", mb)
    return result


def aggregate_models(models):
    """Per-parameter median over several single-frame fits."""
    models = list(models)
    if not models:
        raise InvalidInputError("no models to aggregate")
    maps = np.median(np.stack([m.noise.maps for m in models]), axis=0)
    first = models[0]
    return ModelSet(
        mb=MbModel(float(np.median([m.mb.beta for m in models]))),
        dof=DofModel(*np.median([m.dof.coef for m in models], axis=0).tolist(),
                     sigma_max=first.dof.sigma_max),
        noise=NoiseModel(maps=maps, pool_sigma=first.noise.pool_sigma,
                         stride=first.noise.stride, pool_radius=first.noise.pool_radius),
        provenance={"aggregate": "median", "frames": [m.provenance for m in models]},
    )
