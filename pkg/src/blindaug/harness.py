"""Synthetic scenes with exact geometry, ground-truth distortion and recovery checks.

Scenes are fronto-parallel planes, each with a procedural texture, a
constant depth and a constant image-space velocity. Textures are evaluated
analytically in the plane's own coordinates, so frame ``t + 1`` is frame
``t`` translated by the velocity and the flow map is exact.
"""

import csv
import json
import math
import time
from dataclasses import asdict, dataclass, field
from pathlib import Path
from typing import List, Optional, Tuple

import numpy as np

from ._random import standard_normal, uniform_hash
from ._validation import check_image
from .core import to_luminance
from .estimation import (
    SceneBundle,
    estimate_sigma_map,
    fit_dof_model,
    fit_mb_exposure,
    fit_noise_model,
    mb_beta_grid,
    texture_mask,
)
from .exceptions import DegenerateFitError, InvalidInputError
from .synthesis import (
    DofModel,
    MbModel,
    NoiseModel,
    distort_chain,
    noise_total_std,
    synthesize_noise,
)

TEXTURES = ("checker", "value-noise", "stripes")


@dataclass
class PlaneSpec:
    """One textured plane covering the half-open pixel rectangle ``region``.

    ``region`` is ``(x0, y0, x1, y1)``. ``colors`` are the two RGB endpoints
    the scalar texture interpolates between; ``None`` draws them from the
    scene seed.
    """

    depth: float
    region: Tuple[int, int, int, int]
    texture: str = "value-noise"
    scale: float = 8.0
    velocity: Tuple[float, float] = (0.0, 0.0)
    colors: Optional[Tuple[Tuple[float, float, float], Tuple[float, float, float]]] = None


@dataclass
class SceneSpec:
    width: int
    height: int
    planes: List[PlaneSpec]
    frames: int = 1
    seed: int = 0

    @classmethod
    def from_dict(cls, doc):
        try:
            planes = []
            for p in doc["planes"]:
                colors = p.get("colors")
                planes.append(PlaneSpec(**{
                    **p,
                    "region": tuple(p["region"]),
                    "velocity": tuple(p.get("velocity", (0.0, 0.0))),
                    "colors": None if colors is None else tuple(tuple(c) for c in colors),
                }))
            return cls(width=int(doc["width"]), height=int(doc["height"]), planes=planes,
                       frames=int(doc.get("frames", 1)), seed=int(doc.get("seed", 0)))
        except (KeyError, TypeError) as exc:
            raise InvalidInputError(f"malformed scene spec: {exc!r}") from exc

    def to_dict(self):
        return asdict(self)

    def validate(self):
        if self.width < 1 or self.height < 1 or self.frames < 1:
            raise InvalidInputError("scene needs positive width, height and frame count")
        cover = np.zeros((self.height, self.width), dtype=np.int64)
        for i, p in enumerate(self.planes):
            if not (p.depth > 0 and math.isfinite(p.depth)):
                raise InvalidInputError(f"plane {i}: depth must be positive, got {p.depth}")
            if p.texture not in TEXTURES:
                raise InvalidInputError(f"plane {i}: unknown texture {p.texture!r}")
            if not p.scale > 0:
                raise InvalidInputError(f"plane {i}: texture scale must be positive")
            x0, y0, x1, y1 = p.region
            if not (0 <= x0 < x1 <= self.width and 0 <= y0 < y1 <= self.height):
                raise InvalidInputError(f"plane {i}: region {p.region} outside the frame")
            cover[y0:y1, x0:x1] += 1
        if not np.all(cover == 1):
            raise InvalidInputError("plane regions must tile the frame without gaps or overlaps")

    @property
    def depths(self):
        return sorted({p.depth for p in self.planes})


def _value_noise(u, v, scale, key):
    """Smoothly interpolated lattice noise, three octaves, in [0, 1]."""
    total = np.zeros_like(u)
    for octave, weight in enumerate((0.5, 0.3, 0.2)):
        s = scale / 2 ** octave
        gu, gv = u / s, v / s
        iu, iv = np.floor(gu), np.floor(gv)
        fu, fv = gu - iu, gv - iv
        fu = fu * fu * (3 - 2 * fu)
        fv = fv * fv * (3 - 2 * fv)
        iu = iu.astype(np.int64)
        iv = iv.astype(np.int64)

        def lattice(du, dv):
            return uniform_hash(key + octave, iu + du, iv + dv)

        top = lattice(0, 0) * (1 - fu) + lattice(1, 0) * fu
        bottom = lattice(0, 1) * (1 - fu) + lattice(1, 1) * fu
        total += weight * (top * (1 - fv) + bottom * fv)
    # stretch the central mass of the octave sum back towards [0, 1]
    return np.clip((total - 0.5) * 2.0 + 0.5, 0.0, 1.0)


def _texture(kind, u, v, scale, key):
    if kind == "checker":
        return ((np.floor(u / scale) + np.floor(v / scale)) % 2).astype(np.float64)
    if kind == "stripes":
        phase = (u * math.cos(math.radians(30)) + v * math.sin(math.radians(30))) / scale
        return 0.5 + 0.5 * np.sin(2 * math.pi * phase)
    return _value_noise(u, v, scale, key)


def _plane_colors(spec, i, plane):
    if plane.colors is not None:
        return np.asarray(plane.colors, dtype=np.float64)
    rng = np.random.default_rng([spec.seed, i])
    dark = rng.uniform(0.0, 0.25, 3)
    bright = rng.uniform(0.75, 1.0, 3)
    return np.stack([dark, bright])


def generate_scene(spec):
    """Render every frame of ``spec`` with exact depth and flow.

    Returns
    -------
    list of SceneBundle
        One bundle per frame; ``distorted`` is left empty.
    """
    spec.validate()
    h, w = spec.height, spec.width
    yy, xx = np.mgrid[0:h, 0:w].astype(np.float64)
    bundles = []
    for t in range(spec.frames):
        clean = np.zeros((h, w, 3))
        depth = np.zeros((h, w))
        flow = np.zeros((h, w, 2))
        for i, plane in enumerate(spec.planes):
            x0, y0, x1, y1 = plane.region
            sl = (slice(y0, y1), slice(x0, x1))
            vx, vy = plane.velocity
            # content moves by +velocity per frame
            u = xx[sl] - t * vx
            v = yy[sl] - t * vy
            tex = _texture(plane.texture, u, v, plane.scale, key=spec.seed * 1000 + 17 * i)
            lo, hi = _plane_colors(spec, i, plane)
            clean[sl] = lo + tex[..., None] * (hi - lo)
            depth[sl] = plane.depth
            flow[sl] = (vx, vy)
        bundles.append(SceneBundle(clean=clean, depth=depth, flow=flow, frame_id=f"{t:04d}"))
    return bundles


def heteroscedastic_noise(img, k_readout, k_shot, seed=0):
    """Add Gaussian noise with std ``k_readout + k_shot * sqrt(Y)`` per pixel.

    ``Y`` is the BT.601 luminance of ``img`` (clamped at zero under the root).
    Draws are keyed by pixel coordinates, so results do not depend on order.
    """
    img = check_image(img, channels=3)
    if k_readout < 0 or k_shot < 0:
        raise InvalidInputError("noise coefficients must be non-negative")
    if k_readout == 0 and k_shot == 0:
        return img.copy()
    sigma = heteroscedastic_std(to_luminance(img), k_readout, k_shot)
    h, w = img.shape[:2]
    return img + sigma[..., None] * standard_normal(seed, h, w, 3)


def heteroscedastic_std(y, k_readout, k_shot):
    return k_readout + k_shot * np.sqrt(np.maximum(np.asarray(y, dtype=np.float64), 0.0))


@dataclass
class GtDistortion:
    """Known distortion applied to clean frames.

    Noise is either a fitted-family ``noise`` model or the heteroscedastic
    pair ``(k_readout, k_shot)``; not both.
    """

    mb: Optional[MbModel] = None
    dof: Optional[DofModel] = None
    noise: Optional[NoiseModel] = None
    k_readout: Optional[float] = None
    k_shot: Optional[float] = None
    seed: int = 0

    def __post_init__(self):
        hetero = self.k_readout is not None or self.k_shot is not None
        if hetero:
            if self.noise is not None:
                raise InvalidInputError("give either a noise model or k_readout/k_shot")
            self.k_readout = float(self.k_readout or 0.0)
            self.k_shot = float(self.k_shot or 0.0)
            if self.k_readout < 0 or self.k_shot < 0:
                raise InvalidInputError("noise coefficients must be non-negative")

    @property
    def heteroscedastic(self):
        return self.k_readout is not None


def apply_gt_distortions(bundle, gt):
    """Return a copy of ``bundle`` whose ``distorted`` is DoF, then MB, then noise."""
    out = distort_chain(bundle.clean, dof=gt.dof, depth=bundle.depth, mb=gt.mb,
                        flow=bundle.flow, noise=gt.noise, seed=gt.seed)
    if gt.heteroscedastic:
        out = heteroscedastic_noise(out, gt.k_readout, gt.k_shot, gt.seed)
    return SceneBundle(clean=bundle.clean, depth=bundle.depth, flow=bundle.flow,
                       distorted=out, frame_id=bundle.frame_id)


# -- validation ----------------------------------------------------------------

DEFAULT_DEPTHS = (2.0, 5.0, 9.0)
Y_GRID = tuple(np.round(np.linspace(0.1, 0.9, 9), 10))
CURVE_SAMPLES = 50


def _focal_quadratic(focus, shallowness, linear=0.0):
    """Coefficients of ``shallowness (Z - focus)^2 + linear (Z - focus)``."""
    return (shallowness, -2 * shallowness * focus + linear,
            shallowness * focus ** 2 - linear * focus)


# focal plane on one of the scene planes; G >= 0 and max G <= 8 px over DEFAULT_DEPTHS
DEFAULT_DOF_CASES = (
    _focal_quadratic(2.0, 0.1),
    _focal_quadratic(5.0, 0.5),
    _focal_quadratic(9.0, 0.08),
    _focal_quadratic(5.0, 0.2),
    _focal_quadratic(2.0, 0.02, linear=0.6),
)


def default_scene(size=512, frames=2, seed=0):
    """Three checker planes at different depths moving in different directions."""
    cuts = [0, size // 3, 2 * size // 3, size]
    velocities = [(12.0, 0.0), (-6.0, 4.0), (0.0, -8.0)]
    planes = [
        PlaneSpec(depth=z, region=(cuts[i], 0, cuts[i + 1], size), texture="checker",
                  scale=8.0, velocity=velocities[i])
        for i, z in enumerate(DEFAULT_DEPTHS)
    ]
    return SceneSpec(width=size, height=size, planes=planes, frames=frames, seed=seed)


def default_noise_scene(size=512, frames=2, seed=0):
    """One full-frame value-noise plane spanning black to white."""
    plane = PlaneSpec(depth=3.0, region=(0, 0, size, size), texture="value-noise",
                      scale=16.0, colors=((0.0, 0.0, 0.0), (1.0, 1.0, 1.0)))
    return SceneSpec(width=size, height=size, planes=[plane], frames=frames, seed=seed)


def random_noise_cases(n=10, seed=0, readout=(0.01, 0.03), shot=(0.005, 0.04)):
    rng = np.random.default_rng([seed, 4577])
    return [(float(rng.uniform(*readout)), float(rng.uniform(*shot))) for _ in range(n)]


@dataclass
class ValidationConfig:
    """What to distort and recover.

    ``scene`` feeds the motion-blur and DoF cases, ``noise_scene`` the noise
    cases. Each case is distorted with one distortion only, plus
    heteroscedastic noise ``case_noise = (k_readout, k_shot)`` on the
    motion-blur and DoF cases when given.
    """

    scene: SceneSpec = field(default_factory=default_scene)
    noise_scene: SceneSpec = field(default_factory=default_noise_scene)
    mb_cases: List[float] = field(default_factory=lambda: mb_beta_grid().tolist())
    dof_cases: List[Tuple[float, float, float]] = field(
        default_factory=lambda: [tuple(c) for c in DEFAULT_DOF_CASES])
    noise_cases: List[Tuple[float, float]] = field(default_factory=random_noise_cases)
    case_noise: Optional[Tuple[float, float]] = None
    seed: int = 0

    @classmethod
    def from_dict(cls, doc):
        """Build a config from JSON; missing keys take the paper-sized defaults."""
        seed = int(doc.get("seed", 0))
        size = int(doc.get("size", 512))
        frames = int(doc.get("frames", 2))
        cfg = cls(
            scene=(SceneSpec.from_dict(doc["scene"]) if "scene" in doc
                   else default_scene(size, frames, seed)),
            noise_scene=(SceneSpec.from_dict(doc["noise_scene"]) if "noise_scene" in doc
                         else default_noise_scene(size, frames, seed)),
            seed=seed,
            case_noise=tuple(float(v) for v in doc["case_noise"]) if doc.get("case_noise")
            else None,
        )
        if "mb_cases" in doc:
            cfg.mb_cases = [float(b) for b in doc["mb_cases"]]
        if "dof_cases" in doc:
            cfg.dof_cases = [tuple(float(v) for v in c) for c in doc["dof_cases"]]
        if "noise_cases" in doc:
            cfg.noise_cases = [tuple(float(v) for v in c) for c in doc["noise_cases"]]
        elif "noise_random" in doc:
            cfg.noise_cases = random_noise_cases(int(doc["noise_random"]), seed)
        return cfg

    def to_dict(self):
        return {
            "seed": self.seed,
            "scene": self.scene.to_dict(),
            "noise_scene": self.noise_scene.to_dict(),
            "mb_cases": list(self.mb_cases),
            "dof_cases": [list(c) for c in self.dof_cases],
            "noise_cases": [list(c) for c in self.noise_cases],
            "case_noise": list(self.case_noise) if self.case_noise else None,
        }


@dataclass
class ValidationReport:
    config: dict = field(default_factory=dict)
    cases: List[dict] = field(default_factory=list)

    def to_dict(self):
        return {"config": self.config, "cases": self.cases}

    def by_kind(self, kind):
        return [c for c in self.cases if c["kind"] == kind]


def _mse(a, b):
    d = a - b
    return float(np.mean(d * d))


def _gt(seed, noise, **stages):
    k_readout, k_shot = noise if noise else (None, None)
    return GtDistortion(k_readout=k_readout, k_shot=k_shot, seed=seed, **stages)


def _mb_case(beta, bundles, seed, noise=None):
    frames = []
    for b in bundles:
        d = apply_gt_distortions(b, _gt(seed, noise, mb=MbModel(beta)))
        t0 = time.perf_counter()
        fit = fit_mb_exposure(d.distorted, b.clean, b.flow)
        seconds = time.perf_counter() - t0
        redo = distort_chain(b.clean, mb=fit, flow=b.flow)
        frames.append({"frame": b.frame_id, "beta": fit.beta,
                       "abs_error": abs(fit.beta - beta),
                       "redistort_mse": _mse(redo, d.distorted), "seconds": seconds})
    mean_beta = float(np.mean([f["beta"] for f in frames]))
    return {
        "gt": {"beta": beta},
        "recovered": {"beta": mean_beta},
        "errors": {
            "beta_abs_error": max(f["abs_error"] for f in frames),
            "beta_mean_abs_error": abs(mean_beta - beta),
            "redistort_mse": max(f["redistort_mse"] for f in frames),
        },
        "frames": frames,
    }


def _dof_curve_errors(fit, gt, depth, mask):
    z = depth[mask]
    if z.size == 0:
        return 0.0, 0.0
    diff = np.abs(fit(z) - gt(z))
    return float(diff.mean()), float(diff.max())


def _dof_case(coef, bundles, seed, noise=None):
    gt = DofModel(*coef)
    frames = []
    for b in bundles:
        d = apply_gt_distortions(b, _gt(seed, noise, dof=gt))
        t0 = time.perf_counter()
        sigmas = estimate_sigma_map(d.distorted, b.clean)
        mask = texture_mask(b.clean)
        fit = fit_dof_model(sigmas, b.depth, mask)
        seconds = time.perf_counter() - t0
        mean_err, max_err = _dof_curve_errors(fit, gt, b.depth, mask)
        redo = distort_chain(b.clean, dof=fit, depth=b.depth)
        frames.append({"frame": b.frame_id, "coef": fit.coef.tolist(),
                       "curve_mean_abs_error": mean_err, "curve_max_abs_error": max_err,
                       "residual_rms": fit.residual_rms_,
                       "depths": sorted(set(np.unique(b.depth[mask]).tolist())),
                       "redistort_mse": _mse(redo, d.distorted), "seconds": seconds})
    coef_med = np.median([f["coef"] for f in frames], axis=0)
    return {
        "gt": {"a": gt.a, "b": gt.b, "c": gt.c},
        "recovered": dict(zip("abc", coef_med.tolist())),
        "errors": {
            "curve_mean_abs_error": max(f["curve_mean_abs_error"] for f in frames),
            "curve_max_abs_error": max(f["curve_max_abs_error"] for f in frames),
            "redistort_mse": max(f["redistort_mse"] for f in frames),
        },
        "frames": frames,
    }


def noise_relative_errors(model, k_readout, k_shot, ys=Y_GRID):
    """Relative error of the model's synthesized std against ``k_r + k_s sqrt(Y)``.

    The synthesized std is averaged over RGB. Where the ground truth is zero
    the absolute error is reported instead.
    """
    out = []
    for y in ys:
        pred = float(noise_total_std(model, y).mean())
        gt = float(heteroscedastic_std(y, k_readout, k_shot))
        out.append((y, gt, pred, abs(pred - gt) / gt if gt > 0 else abs(pred)))
    return out


def _noise_case(k, bundles, seed, noise=None):
    k_readout, k_shot = k
    frames = []
    for i, b in enumerate(bundles):
        d = apply_gt_distortions(
            b, GtDistortion(k_readout=k_readout, k_shot=k_shot, seed=seed * 7919 + i))
        t0 = time.perf_counter()
        fit = fit_noise_model(d.distorted, b.clean)
        seconds = time.perf_counter() - t0
        rel = noise_relative_errors(fit, k_readout, k_shot)
        redo = synthesize_noise(b.clean, fit, seed)
        frames.append({"frame": b.frame_id, "maps": fit.maps.tolist(),
                       "curve": [{"y": y, "gt": g, "pred": p, "rel_error": e}
                                 for y, g, p, e in rel],
                       "max_rel_error": max(e for *_, e in rel),
                       "redistort_mse": _mse(redo, d.distorted), "seconds": seconds})
    maps_med = np.median([f["maps"] for f in frames], axis=0)
    return {
        "gt": {"k_readout": k_readout, "k_shot": k_shot},
        "recovered": {"maps": maps_med.tolist()},
        "errors": {
            "noise_max_rel_error": max(f["max_rel_error"] for f in frames),
            "redistort_mse": max(f["redistort_mse"] for f in frames),
        },
        "frames": frames,
    }


def run_validation(config=None, scene_bundles=None, noise_bundles=None):
    """Distort generated frames with known parameters and recover them.

    Parameters
    ----------
    config : ValidationConfig, optional
        Defaults to 10 exposures, 5 DoF quadratics and 10 heteroscedastic
        noise settings.
    scene_bundles, noise_bundles : list of SceneBundle, optional
        Pre-rendered frames to use instead of generating ``config.scene`` /
        ``config.noise_scene``.

    Returns
    -------
    ValidationReport
        One entry per case, in declaration order. A failing case is recorded
        with ``status: "failed"`` and does not stop the run.
    """
    config = config or ValidationConfig()
    if scene_bundles is None and (config.mb_cases or config.dof_cases):
        scene_bundles = generate_scene(config.scene)
    if noise_bundles is None and config.noise_cases:
        noise_bundles = generate_scene(config.noise_scene)
    report = ValidationReport(config=config.to_dict())
    jobs = ([("mb", f"mb_{i:02d}", c, _mb_case, scene_bundles)
             for i, c in enumerate(config.mb_cases)]
            + [("dof", f"dof_{i:02d}", c, _dof_case, scene_bundles)
               for i, c in enumerate(config.dof_cases)]
            + [("noise", f"noise_{i:02d}", c, _noise_case, noise_bundles)
               for i, c in enumerate(config.noise_cases)])
    for kind, case_id, case, fn, bundles in jobs:
        t0 = time.perf_counter()
        try:
            entry = {"id": case_id, "kind": kind, "status": "ok",
                     **fn(case, bundles, config.seed, config.case_noise)}
        except (InvalidInputError, DegenerateFitError) as exc:
            entry = {"id": case_id, "kind": kind, "status": "failed", "message": str(exc)}
        entry["seconds"] = time.perf_counter() - t0
        report.cases.append(entry)
    return report


def _primary_error(case):
    errors = case.get("errors", {})
    for key in ("beta_abs_error", "curve_mean_abs_error", "noise_max_rel_error"):
        if key in errors:
            return errors[key]
    return ""


def _fmt_params(d):
    if "maps" in d:
        return f"noise_maps[{np.asarray(d['maps']).size}]"
    return " ".join(f"{k}={v:.6g}" for k, v in d.items())


def _curve_rows(case, depth_range):
    kind = case["kind"]
    if case["status"] != "ok":
        return []
    if kind == "mb":
        return [(case["id"], kind, "beta", case["gt"]["beta"], case["gt"]["beta"],
                 case["recovered"]["beta"])]
    if kind == "dof":
        gt = DofModel(**case["gt"])
        fit = DofModel(**case["recovered"])
        zs = np.linspace(depth_range[0], depth_range[1], CURVE_SAMPLES)
        return [(case["id"], kind, "depth", z, gt(z), fit(z)) for z in zs.tolist()]
    curve = case["frames"][0]["curve"]
    return [(case["id"], kind, "luminance", p["y"], p["gt"], p["pred"]) for p in curve]


def emit_report(report, out_dir):
    """Write ``report.json``, ``summary.csv`` and ``curves.csv`` into ``out_dir``.

    DoF curves are sampled at 50 depths spanning the scene's occupied range.
    """
    out_dir = Path(out_dir)
    try:
        out_dir.mkdir(parents=True, exist_ok=True)
        with open(out_dir / "report.json", "w") as f:
            json.dump(report.to_dict(), f, indent=2)
            f.write("\n")
        with open(out_dir / "summary.csv", "w", newline="") as f:
            w = csv.writer(f)
            w.writerow(["case", "kind", "status", "gt", "recovered", "error",
                        "redistort_mse", "seconds"])
            for c in report.cases:
                w.writerow([c["id"], c["kind"], c["status"],
                            _fmt_params(c.get("gt", {})), _fmt_params(c.get("recovered", {})),
                            _primary_error(c), c.get("errors", {}).get("redistort_mse", ""),
                            f"{c['seconds']:.4f}"])
        planes = report.config.get("scene", {}).get("planes", [])
        depths = [p["depth"] for p in planes] or [1.0]
        with open(out_dir / "curves.csv", "w", newline="") as f:
            w = csv.writer(f)
            w.writerow(["case", "kind", "x_name", "x", "gt", "recovered"])
            for c in report.cases:
                w.writerows(_curve_rows(c, (min(depths), max(depths))))
    except OSError as exc:
        raise OSError(f"cannot write report to {out_dir}: {exc}") from exc
    return [out_dir / n for n in ("report.json", "summary.csv", "curves.csv")]
