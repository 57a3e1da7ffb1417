"""Command-line front end.

Exit status: 0 success, 1 usage error, 2 I/O or format error, 3 degenerate fit.
"""

import argparse
import json
import sys
from pathlib import Path

import numpy as np

from . import _config
from .estimation import ModelSet, SceneBundle, fit_all
from .exceptions import DegenerateFitError, FileFormatError, InvalidInputError
from .harness import (
    GtDistortion,
    SceneSpec,
    ValidationConfig,
    apply_gt_distortions,
    emit_report,
    generate_scene,
    run_validation,
)
from .io import read_flo, read_pfm, read_png, write_flo, write_pfm, write_png
from .synthesis import DofModel, MbModel, NoiseModel, composite_virtual, distort_chain

EXIT_OK, EXIT_USAGE, EXIT_IO, EXIT_DEGENERATE = 0, 1, 2, 3


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        raise UsageError(f"{self.prog}: error: {message}")


def _existing(path):
    p = Path(path)
    if not p.is_file():
        raise FileFormatError(f"{p}: no such file")
    return p


def _read_json(path):
    try:
        return json.loads(_existing(path).read_text())
    except json.JSONDecodeError as exc:
        raise FileFormatError(f"{path}: invalid JSON ({exc})") from exc


def _read_model(path):
    return ModelSet.from_dict(_read_json(path))


def _write_text(path, text):
    try:
        Path(path).write_text(text)
    except OSError as exc:
        raise FileFormatError(f"{path}: cannot write ({exc})") from exc


def _out_dir(path):
    p = Path(path)
    try:
        p.mkdir(parents=True, exist_ok=True)
    except OSError as exc:
        raise FileFormatError(f"{p}: cannot create directory ({exc})") from exc
    return p


def cmd_fit(args):
    skip = tuple(name for name in ("mb", "dof", "noise") if getattr(args, f"skip_{name}"))
    if args.depth is None and "dof" not in skip:
        raise UsageError("fit: --depth is required unless --skip-dof is given")
    if args.flow is None and "mb" not in skip:
        raise UsageError("fit: --flow is required unless --skip-mb is given")
    observed = read_png(_existing(args.input), mode="RGB")
    clean = read_png(_existing(args.clean), mode="RGB")
    depth = read_pfm(_existing(args.depth)) if args.depth else np.ones(clean.shape[:2])
    flow = read_flo(_existing(args.flow)) if args.flow else np.zeros(clean.shape[:2] + (2,))
    bundle = SceneBundle(clean=clean, depth=depth, flow=flow, distorted=observed,
                         frame_id=Path(args.input).name)
    models = fit_all(bundle, skip=skip)
    degenerate = [k for k, v in models.provenance["stages"].items()
                  if v["status"] == "degenerate"]
    if degenerate:
        raise DegenerateFitError("; ".join(models.provenance["stages"][k]["message"]
                                           for k in degenerate))
    failed = [k for k, v in models.provenance["stages"].items() if v["status"] == "error"]
    if failed:
        raise InvalidInputError("; ".join(models.provenance["stages"][k]["message"]
                                          for k in failed))
    _write_text(args.out, models.to_json() + "\n")


def _geometry(args, models, depth_attr, flow_attr, shape):
    depth_path = getattr(args, depth_attr)
    flow_path = getattr(args, flow_attr)
    depth = flow = None
    if not models.dof.is_identity():
        if depth_path is None:
            raise UsageError(f"--{depth_attr} is required for a model with depth of field")
        depth = read_pfm(_existing(depth_path))
    if not models.mb.is_identity():
        if flow_path is None:
            raise UsageError(f"--{flow_attr} is required for a model with motion blur")
        flow = read_flo(_existing(flow_path))
    for name, arr in (("depth", depth), ("flow", flow)):
        if arr is not None and arr.shape[:2] != shape[:2]:
            raise InvalidInputError(f"{name} size {arr.shape[:2]} does not match image {shape[:2]}")
    return depth, flow


def cmd_distort(args):
    models = _read_model(args.model)
    img = read_png(_existing(args.input), mode="RGB")
    depth, flow = _geometry(args, models, "depth", "flow", img.shape)
    out = distort_chain(img, dof=models.dof, depth=depth, mb=models.mb, flow=flow,
                        noise=models.noise, seed=args.seed)
    write_png(args.out, out)


def cmd_composite(args):
    models = _read_model(args.model)
    real = read_png(_existing(args.real), mode="RGB")
    virtual = read_png(_existing(args.virtual), mode="RGB")
    alpha = read_png(_existing(args.alpha), mode="L")
    depth, flow = _geometry(args, models, "vdepth", "vflow", virtual.shape)
    out = composite_virtual(real, virtual, alpha, depth, flow, dof=models.dof,
                            mb=models.mb, noise=models.noise, seed=args.seed)
    write_png(args.out, out)


def _gt_from_dict(doc):
    return GtDistortion(
        mb=MbModel(**doc["mb"]) if "mb" in doc else None,
        dof=DofModel(**doc["dof"]) if "dof" in doc else None,
        noise=NoiseModel(maps=doc["noise"]["maps"]) if "noise" in doc else None,
        k_readout=doc.get("k_readout"),
        k_shot=doc.get("k_shot"),
        seed=int(doc.get("seed", 0)),
    )


def cmd_gen(args):
    doc = _read_json(args.spec)
    spec = SceneSpec.from_dict(doc)
    gt = _gt_from_dict(doc["distortion"]) if "distortion" in doc else None
    out = _out_dir(args.out)
    for i, bundle in enumerate(generate_scene(spec)):
        write_png(out / f"frame_{i:04d}.png", bundle.clean)
        write_pfm(out / f"depth_{i:04d}.pfm", bundle.depth)
        write_flo(out / f"flow_{i:04d}.flo", bundle.flow)
        if gt is not None:
            write_png(out / f"distorted_{i:04d}.png", apply_gt_distortions(bundle, gt).distorted)


def _load_frames(directory):
    directory = Path(directory)
    frames = sorted(directory.glob("frame_*.png"))
    if not frames:
        raise FileFormatError(f"{directory}: no frame_*.png files")
    bundles = []
    for f in frames:
        idx = f.stem.split("_")[1]
        bundles.append(SceneBundle(
            clean=read_png(f, mode="RGB"),
            depth=read_pfm(_existing(directory / f"depth_{idx}.pfm")),
            flow=read_flo(_existing(directory / f"flow_{idx}.flo")),
            frame_id=idx,
        ))
    return bundles


def cmd_validate(args):
    doc = _read_json(args.config) if args.config else {}
    config = ValidationConfig.from_dict(doc)
    scene_bundles = None
    frames_dir = args.frames or doc.get("frames_dir")
    if frames_dir:
        scene_bundles = _load_frames(frames_dir)
    report = run_validation(config, scene_bundles=scene_bundles)
    try:
        emit_report(report, _out_dir(args.out))
    except OSError as exc:
        raise FileFormatError(str(exc)) from exc
    failed = [c["id"] for c in report.cases if c["status"] != "ok"]
    if failed:
        print(f"validate: {len(failed)} case(s) failed: {', '.join(failed)}", file=sys.stderr)


def build_parser():
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--threads", type=int, default=None,
                        help="cap on internal parallelism (default: all cores)")

    parser = _Parser(prog="blindaug", description=__doc__.splitlines()[0])
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)

    p = sub.add_parser("fit", parents=[common], help="estimate a camera model from an image pair")
    p.add_argument("--input", required=True, help="distorted camera image (PNG)")
    p.add_argument("--clean", required=True, help="restored/clean image (PNG)")
    p.add_argument("--depth", help="depth map (PFM)")
    p.add_argument("--flow", help="optical flow (.flo)")
    p.add_argument("--out", required=True, help="model JSON to write")
    for name in ("mb", "dof", "noise"):
        p.add_argument(f"--skip-{name}", action="store_true")
    p.set_defaults(func=cmd_fit)

    p = sub.add_parser("distort", parents=[common], help="apply a camera model to an image")
    p.add_argument("--input", required=True)
    p.add_argument("--model", required=True)
    p.add_argument("--depth")
    p.add_argument("--flow")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_distort)

    p = sub.add_parser("composite", parents=[common],
                       help="distort a virtual layer and composite it over a real frame")
    p.add_argument("--real", required=True)
    p.add_argument("--virtual", required=True)
    p.add_argument("--alpha", required=True)
    p.add_argument("--vdepth")
    p.add_argument("--vflow")
    p.add_argument("--model", required=True)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_composite)

    p = sub.add_parser("gen", parents=[common], help="render a synthetic scene")
    p.add_argument("--spec", required=True, help="scene JSON")
    p.add_argument("--out", required=True, help="output directory")
    p.set_defaults(func=cmd_gen)

    p = sub.add_parser("validate", parents=[common], help="run the parameter-recovery harness")
    p.add_argument("--config", help="validation JSON (default: paper-sized cases)")
    p.add_argument("--frames", help="directory written by `gen` to use as the scene")
    p.add_argument("--out", required=True, help="report directory")
    p.set_defaults(func=cmd_validate)
    return parser


def main(argv=None):
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
        if args.threads is not None:
            if args.threads < 1:
                raise UsageError("--threads must be >= 1")
            _config.set_num_threads(args.threads)
        args.func(args)
    except UsageError as exc:
        print(exc, file=sys.stderr)
        return EXIT_USAGE
    except DegenerateFitError as exc:
        print(f"blindaug: degenerate fit: {exc}", file=sys.stderr)
        return EXIT_DEGENERATE
    except (FileFormatError, InvalidInputError, OSError) as exc:
        print(f"blindaug: {exc}", file=sys.stderr)
        return EXIT_IO
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
