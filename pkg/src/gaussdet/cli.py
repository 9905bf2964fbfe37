"""Command-line interface.

Every subcommand reads and writes the JSON/CSV interchange formats. On
failure a machine-readable error record is printed to stderr and the exit
code is nonzero.
"""

from __future__ import annotations

import argparse
import json
import sys
from pathlib import Path

from gaussdet import harness, postproc
from gaussdet.core import Gaussian2D, scene_from_json
from gaussdet.divergence import kl, sym_kl
from gaussdet.encoding import PredictionGrid
from gaussdet.errors import GaussdetError, FormatError
from gaussdet.fit import Correction, bbox_of, fit_gaussian
from gaussdet.graddesc import fit_by_descent, gradient_check
from gaussdet.losses import LossWeights, mix_loss, rep_loss, seg_loss, total_loss


def _gaussian_arg(text: str) -> Gaussian2D:
    data = json.loads(text)
    try:
        return Gaussian2D(
            float(data["mu_x"]),
            float(data["mu_y"]),
            float(data["sigma_x"]),
            float(data["sigma_y"]),
            float(data["rho"]),
        )
    except (KeyError, TypeError) as exc:
        raise FormatError(f"bad gaussian JSON: {exc}") from exc


def _tau_override(text: str) -> tuple[int, float]:
    cls, _, value = text.partition("=")
    try:
        return int(cls), float(value)
    except ValueError as exc:
        raise FormatError(f"expected CLASS=TAU, got {text!r}") from exc


def _cmd_fit(args) -> int:
    scene = scene_from_json(Path(args.scene).read_text())
    correction = Correction.UNIT_PIXEL if args.unit_pixel else Correction.NONE
    out = []
    for obj in scene.objects:
        g = fit_gaussian(obj.pixels, correction)
        box = bbox_of(obj.pixels)
        out.append(
            {
                "id": obj.object_id,
                "class": obj.class_id,
                "gaussian": {
                    "mu_x": g.mu_x,
                    "mu_y": g.mu_y,
                    "sigma_x": g.sigma_x,
                    "sigma_y": g.sigma_y,
                    "rho": g.rho,
                },
                "bbox": box.as_list(),
            }
        )
    print(json.dumps(out))
    return 0


def _cmd_kl(args) -> int:
    p = _gaussian_arg(args.p)
    q = _gaussian_arg(args.q)
    value = sym_kl(p, q) if args.sym else kl(p, q)
    print(repr(value))
    return 0


def _cmd_loss(args) -> int:
    grid = PredictionGrid.from_json(Path(args.grid).read_text())
    scene = scene_from_json(Path(args.scene).read_text())
    targets = harness.cell_targets_from_scene(scene, grid.scale)
    l_seg = seg_loss(grid.class_scores, targets.class_ids)
    l_rep = rep_loss(grid, targets)
    l_mix = mix_loss(grid, targets)
    weights = LossWeights(alpha=args.alpha, beta=args.beta)
    print(
        json.dumps(
            {
                "seg": l_seg,
                "rep": l_rep,
                "mix": l_mix,
                "total": total_loss(l_seg, l_rep, l_mix, weights),
            }
        )
    )
    return 0


def _cmd_gradcheck(args) -> int:
    print(repr(gradient_check(trials=args.trials, seed=args.seed)))
    return 0


def _cmd_descend(args) -> int:
    result = fit_by_descent(
        target=_gaussian_arg(args.target),
        init=_gaussian_arg(args.init),
        step=args.step,
        max_iters=args.max_iters,
        tol=args.tol,
    )
    g = result.gaussian
    print(
        json.dumps(
            {
                "iterations": result.iterations,
                "final_divergence": result.divergence,
                "gaussian": {
                    "mu_x": g.mu_x,
                    "mu_y": g.mu_y,
                    "sigma_x": g.sigma_x,
                    "sigma_y": g.sigma_y,
                    "rho": g.rho,
                },
            }
        )
    )
    return 0


def _cmd_nms(args) -> int:
    dets = postproc.detections_from_json(Path(args.dets).read_text())
    cfg = postproc.NmsConfig(
        default_tau=args.tau_default, thresholds=dict(args.tau or [])
    )
    kept = postproc.divergence_nms(dets, cfg)
    print(postproc.detections_to_json(kept))
    return 0


def _cmd_cluster(args) -> int:
    grid = PredictionGrid.from_json(Path(args.grid).read_text())
    kept = postproc.detections_from_json(Path(args.dets).read_text())
    print(postproc.cluster_pixels(grid, kept).to_json())
    return 0


def _cmd_synth(args) -> int:
    spec = harness.SynthSpec.from_json(Path(args.spec).read_text())
    scenes = harness.synth_scenes(spec)
    paths = harness.save_scenes(scenes, args.out)
    print(json.dumps({"scenes": len(paths), "out": str(Path(args.out))}))
    return 0


def _cmd_pairs(args) -> int:
    scenes = harness.load_scenes(args.scenes)
    records = harness.pair_analysis(scenes)
    harness.write_pair_csv(records, args.out)
    print(json.dumps({"pairs": len(records), "out": args.out}))
    return 0


def _cmd_report(args) -> int:
    records = harness.read_pair_csv(args.pairs)
    print(json.dumps(harness.decoupling_report(records, args.tau).to_dict()))
    return 0


def _cmd_calibrate(args) -> int:
    records = harness.read_pair_csv(args.pairs)
    cfg = harness.calibrate_tau(records, args.max_false_merge)
    print(
        json.dumps(
            {
                "default_tau": cfg.default_tau,
                "per_class": {str(c): t for c, t in sorted(cfg.thresholds.items())},
            }
        )
    )
    return 0


def _cmd_oracle_grid(args) -> int:
    scene = scene_from_json(Path(args.scene).read_text())
    grid = harness.oracle_grid(
        scene, scale=args.scale, n=args.n, noise=args.noise, seed=args.seed
    )
    if args.out:
        Path(args.out).write_text(grid.to_json())
        print(json.dumps({"out": args.out}))
    else:
        print(grid.to_json())
    return 0


def _cmd_eval(args) -> int:
    pred = postproc.InstanceMap.from_json(Path(args.pred).read_text())
    scene = scene_from_json(Path(args.gt).read_text())
    print(json.dumps(harness.evaluate_ap(pred, scene).to_dict()))
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="gaussdet",
        description="Bivariate-normal object representation toolkit",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("fit", help="fit Gaussians to every object in a scene")
    p.add_argument("--scene", required=True)
    p.add_argument("--unit-pixel", action="store_true")
    p.set_defaults(func=_cmd_fit)

    p = sub.add_parser("kl", help="divergence between two Gaussians")
    p.add_argument("--p", required=True, help="Gaussian as JSON")
    p.add_argument("--q", required=True, help="Gaussian as JSON")
    p.add_argument("--sym", action="store_true", help="symmetrized divergence")
    p.set_defaults(func=_cmd_kl)

    p = sub.add_parser("loss", help="evaluate the objective on a grid and scene")
    p.add_argument("--grid", required=True)
    p.add_argument("--scene", required=True)
    p.add_argument("--alpha", type=float, required=True)
    p.add_argument("--beta", type=float, required=True)
    p.set_defaults(func=_cmd_loss)

    p = sub.add_parser("gradcheck", help="max analytic vs numeric gradient error")
    p.add_argument("--trials", type=int, default=100)
    p.add_argument("--seed", type=int, default=0)
    p.set_defaults(func=_cmd_gradcheck)

    p = sub.add_parser("descend", help="fit one Gaussian to another by descent")
    p.add_argument("--target", required=True)
    p.add_argument("--init", required=True)
    p.add_argument("--step", type=float, default=0.5)
    p.add_argument("--max-iters", type=int, default=10000)
    p.add_argument("--tol", type=float, default=1e-6)
    p.set_defaults(func=_cmd_descend)

    p = sub.add_parser("nms", help="divergence non-max suppression")
    p.add_argument("--dets", required=True)
    p.add_argument("--tau-default", type=float, default=1.0)
    p.add_argument(
        "--tau", action="append", type=_tau_override, metavar="CLASS=V"
    )
    p.set_defaults(func=_cmd_nms)

    p = sub.add_parser("cluster", help="assign pixels to kept detections")
    p.add_argument("--grid", required=True)
    p.add_argument("--dets", required=True)
    p.set_defaults(func=_cmd_cluster)

    p = sub.add_parser("synth", help="generate synthetic scenes")
    p.add_argument("--spec", required=True)
    p.add_argument("-o", "--out", required=True)
    p.set_defaults(func=_cmd_synth)

    p = sub.add_parser("pairs", help="pairwise IoU / divergence analysis")
    p.add_argument("--scenes", required=True)
    p.add_argument("-o", "--out", required=True)
    p.set_defaults(func=_cmd_pairs)

    p = sub.add_parser("report", help="decoupling summary at a threshold")
    p.add_argument("--pairs", required=True)
    p.add_argument("--tau", type=float, required=True)
    p.set_defaults(func=_cmd_report)

    p = sub.add_parser("calibrate", help="derive thresholds from pair records")
    p.add_argument("--pairs", required=True)
    p.add_argument("--max-false-merge", type=float, required=True)
    p.set_defaults(func=_cmd_calibrate)

    p = sub.add_parser("oracle-grid", help="synthesize a perfect prediction grid")
    p.add_argument("--scene", required=True)
    p.add_argument("--scale", type=int, default=1)
    p.add_argument("--n", type=int, default=1)
    p.add_argument("--noise", type=float, default=0.0)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("-o", "--out")
    p.set_defaults(func=_cmd_oracle_grid)

    p = sub.add_parser("eval", help="mask AP of an instance map against a scene")
    p.add_argument("--pred", required=True)
    p.add_argument("--gt", required=True)
    p.set_defaults(func=_cmd_eval)

    return parser


def main(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except GaussdetError as exc:
        record = {"error": type(exc).__name__, "message": str(exc)}
        print(json.dumps(record), file=sys.stderr)
        return 1
    except (OSError, json.JSONDecodeError) as exc:
        record = {"error": type(exc).__name__, "message": str(exc)}
        print(json.dumps(record), file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
