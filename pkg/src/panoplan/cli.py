"""Command-line entry points: generate, reconstruct, evaluate, render.

Exit codes: 0 success, 1 usage or configuration error, 2 IO or parse
error, 3 numerical failure.
"""

from __future__ import annotations

import argparse
import json
import os
import sys
from typing import Optional

import numpy as np

from .errors import (
    ConfigError,
    DegenerateInputError,
    MissingGroundTruthError,
    SceneParseError,
    SceneValidationError,
    SolverFailureError,
)
from .evaluation import (
    EvalReport,
    align_ransac,
    cc_distribution,
    evaluate_reconstruction,
    localization_pct,
    pose_errors,
    save_report_plots,
)
from .pipeline import (
    PipelineConfig,
    load_pipeline_config,
    read_reconstruction,
    reconstruct,
    write_reconstruction,
)
from .scene import NoiseSpec, Scene, atomic_write_text, load_scene, perturb, save_scene
from .synth import HomeConfig, generate_synthetic_home
from .textures import value_noise

EXIT_OK = 0
EXIT_USAGE = 1
EXIT_IO = 2
EXIT_NUMERIC = 3


class _Parser(argparse.ArgumentParser):
    """argparse exits 2 on usage errors; remap to the documented code 1."""

    def error(self, message: str):
        self.print_usage(sys.stderr)
        raise SystemExit2(message)


class SystemExit2(Exception):
    def __init__(self, message: str):
        super().__init__(message)


def _build_parser() -> _Parser:
    parser = _Parser(prog="panoplan", description=__doc__)
    sub = parser.add_subparsers(dest="command", required=True)

    g = sub.add_parser("generate", help="write a synthetic scene file")
    g.add_argument("out", help="output scene path (.json)")
    g.add_argument("--rooms", type=int, default=5)
    g.add_argument("--panos-per-room", type=int, default=1)
    g.add_argument("--seed", type=int, default=0)
    g.add_argument("--non-manhattan", type=float, default=0.0,
                   help="probability of chamfered corners per room")
    g.add_argument("--noise-vertex", type=float, default=0.0,
                   help="contour vertex noise sigma (m)")
    g.add_argument("--noise-wdo", type=float, default=0.0,
                   help="W/D/O endpoint noise sigma (m)")
    g.add_argument("--noise-vanishing-deg", type=float, default=0.0)
    g.add_argument("--drop-wdo", type=float, default=0.0,
                   help="probability of dropping each detection")
    g.add_argument("--noise-seed", type=int, default=0)

    r = sub.add_parser("reconstruct", help="reconstruct a floorplan from a scene")
    r.add_argument("scene", help="input scene path")
    r.add_argument("--out", required=True, help="output directory")
    r.add_argument("--config", help="pipeline config JSON file")
    r.add_argument("--verifier", choices=("oracle", "xcorr"))
    r.add_argument("--aggregation", choices=("spanning_tree", "pgo"))
    r.add_argument("--no-axis-align", action="store_true")
    r.add_argument("--accept-threshold", type=float)
    r.add_argument("--cell-size", type=float)
    r.add_argument("--texture-seed", type=int)
    r.add_argument("--dump-bev", action="store_true",
                   help="also write per-pano BEV renders (needs gt poses)")

    e = sub.add_parser("evaluate", help="score a reconstruction against ground truth")
    e.add_argument("scene", help="scene path with ground truth")
    e.add_argument("recon", help="reconstruction output directory")
    e.add_argument("--out", help="report directory (default: recon dir)")
    e.add_argument("--ransac-seed", type=int, default=0)
    e.add_argument("--plots", action="store_true", help="write evaluation plots")

    v = sub.add_parser("render", help="render ground-truth floorplan and BEV views")
    v.add_argument("scene", help="scene path with ground truth")
    v.add_argument("--out", required=True, help="output directory")
    v.add_argument("--bev", action="store_true", help="write per-pano BEV renders")
    v.add_argument("--texture-seed", type=int, default=0)
    return parser


def _cmd_generate(args) -> int:
    cfg = HomeConfig(
        n_rooms=args.rooms,
        panos_per_room=args.panos_per_room,
        seed=args.seed,
        non_manhattan_prob=args.non_manhattan,
    )
    scene = generate_synthetic_home(cfg)
    if args.noise_vertex or args.noise_wdo or args.noise_vanishing_deg or args.drop_wdo:
        scene = perturb(
            scene,
            NoiseSpec(
                sigma_vertex=args.noise_vertex,
                sigma_wdo_endpoint=args.noise_wdo,
                sigma_vanishing=np.radians(args.noise_vanishing_deg),
                p_drop_wdo=args.drop_wdo,
                seed=args.noise_seed,
            ),
        )
    save_scene(scene, args.out)
    kinds: dict[str, int] = {}
    for p in scene.panoramas:
        for w in p.wdos:
            kinds[w.kind.value] = kinds.get(w.kind.value, 0) + 1
    counts = ", ".join(f"{v} {k}s" for k, v in sorted(kinds.items()))
    print(f"wrote {args.out}: {len(scene.gt_floorplan)} rooms, "
          f"{len(scene.panoramas)} panoramas, {counts}")
    return EXIT_OK


def _pipeline_config(args) -> PipelineConfig:
    overrides = {}
    if args.verifier is not None:
        overrides["verifier"] = args.verifier
    if args.aggregation is not None:
        overrides["aggregation"] = args.aggregation
    if args.no_axis_align:
        overrides["axis_align"] = False
    if args.accept_threshold is not None:
        overrides["accept_threshold"] = args.accept_threshold
    if args.cell_size is not None:
        overrides["cell_size"] = args.cell_size
    if args.texture_seed is not None:
        overrides["texture_seed"] = args.texture_seed
    if args.config:
        return load_pipeline_config(args.config, overrides)
    cfg = PipelineConfig.from_dict(overrides)
    return cfg


def _dump_bevs(scene: Scene, out_dir: str, texture_seed: int) -> None:
    from .bev import BevConfig, densify, render_bev

    if not scene.has_gt_poses:
        raise MissingGroundTruthError("BEV rendering needs ground-truth poses")
    os.makedirs(out_dir, exist_ok=True)
    textures = {
        "floor": value_noise(scale=0.7, seed=texture_seed),
        "ceiling": value_noise(scale=0.9, seed=texture_seed + 1),
    }
    config = BevConfig()
    for pano in scene.panoramas:
        for surface, texture in textures.items():
            grid, _ = densify(render_bev(pano, surface, texture, config),
                              config.reliability_kernel)
            grid.to_image().save(os.path.join(out_dir, f"pano_{pano.id}_{surface}.png"))


def _cmd_reconstruct(args) -> int:
    scene = load_scene(args.scene)
    config = _pipeline_config(args)
    result = reconstruct(scene, config)
    write_reconstruction(result, scene, args.out)
    if args.dump_bev:
        _dump_bevs(scene, os.path.join(args.out, "bev"), config.texture_seed)
    if result.empty:
        print("warning: no connected component with at least 2 panoramas; "
              "wrote an empty floorplan", file=sys.stderr)
    pct = localization_pct(len(result.poses), len(scene.panoramas))
    print(f"wrote {args.out}: localized {len(result.poses)}/{len(scene.panoramas)} "
          f"panoramas ({pct:.1f}%), {len(result.groups)} rooms")
    return EXIT_OK


def _empty_report(n_localized: int, total: int, components) -> EvalReport:
    pdf, cdf = cc_distribution(components, total) if components else (np.array([]), np.array([]))
    return EvalReport(
        localization_pct=localization_pct(n_localized, total),
        rotation_mean_deg=None,
        rotation_median_deg=None,
        translation_mean_m=None,
        translation_median_m=None,
        floorplan_iou=0.0,
        cc_pdf=tuple(float(v) for v in pdf),
        cc_cdf=tuple(float(v) for v in cdf),
        n_panos=total,
        n_localized=n_localized,
    )


def _cmd_evaluate(args) -> int:
    scene = load_scene(args.scene)
    if not scene.has_gt_poses:
        raise MissingGroundTruthError(f"{args.scene} has no ground-truth poses to evaluate against")
    est_poses, groups, manifest = read_reconstruction(args.recon)
    total = len(scene.panoramas)
    components = manifest.get("components", [])
    gt_poses = {p.id: p.gt_pose for p in scene.panoramas}

    if len(est_poses) < 2:
        report = _empty_report(len(est_poses), total, components)
    else:
        report = evaluate_reconstruction(
            est_poses,
            gt_poses,
            total_panos=total,
            components=components,
            est_rooms=[g.contour for g in groups if g.contour is not None],
            gt_rooms=scene.gt_floorplan,
            ransac_seed=args.ransac_seed,
        )

    out_dir = args.out or args.recon
    os.makedirs(out_dir, exist_ok=True)
    atomic_write_text(os.path.join(out_dir, "report.json"), report.to_json())
    atomic_write_text(os.path.join(out_dir, "report.txt"), report.to_text())
    if args.plots and len(est_poses) >= 2:
        transform = align_ransac(est_poses, gt_poses, seed=args.ransac_seed)
        rot, trans = pose_errors(est_poses, gt_poses, transform)
        save_report_plots(report, rot, trans, out_dir)
    print(report.to_text(), end="")
    return EXIT_OK


def _cmd_render(args) -> int:
    from .floorplan import raster_to_image, rasterize_rooms, write_floorplan_svg

    scene = load_scene(args.scene)
    if not scene.has_gt_poses or not scene.gt_floorplan:
        raise MissingGroundTruthError(f"{args.scene} lacks ground-truth poses or floorplan")
    os.makedirs(args.out, exist_ok=True)

    segments: dict[str, list] = {}
    cameras = []
    for p in scene.panoramas:
        cameras.append([p.gt_pose.x, p.gt_pose.y])
        for w in p.wdos:
            segments.setdefault(w.kind.value, []).append(p.gt_pose.apply(w.endpoints))
    write_floorplan_svg(
        os.path.join(args.out, "floorplan.svg"),
        list(scene.gt_floorplan),
        segments,
        np.array(cameras),
    )
    raster_to_image(rasterize_rooms(scene.gt_floorplan)).save(
        os.path.join(args.out, "floorplan.png")
    )
    if args.bev:
        _dump_bevs(scene, os.path.join(args.out, "bev"), args.texture_seed)
    print(f"wrote {args.out}: floorplan.svg, floorplan.png"
          + (", bev/" if args.bev else ""))
    return EXIT_OK


_COMMANDS = {
    "generate": _cmd_generate,
    "reconstruct": _cmd_reconstruct,
    "evaluate": _cmd_evaluate,
    "render": _cmd_render,
}


def main(argv: Optional[list[str]] = None) -> int:
    parser = _build_parser()
    try:
        args = parser.parse_args(argv)
        return _COMMANDS[args.command](args)
    except SystemExit2 as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except (ConfigError, MissingGroundTruthError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except (SceneParseError, SceneValidationError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_IO
    except json.JSONDecodeError as exc:
        print(f"error: invalid JSON input: {exc}", file=sys.stderr)
        return EXIT_IO
    except OSError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_IO
    except (SolverFailureError, DegenerateInputError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_NUMERIC


if __name__ == "__main__":
    sys.exit(main())
