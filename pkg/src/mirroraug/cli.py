"""Command line interface: ``mirroraug {run,calibrate,ir-fit,reflect,...}``."""

from __future__ import annotations

import argparse
import json
import logging
import sys

import numpy as np

from .avatar import default_rig, load_rig, save_rig
from .calibration import load_observation_log, repeatability_protocol
from .errors import MirrorAugError
from .geometry import MirrorPlane, apply_point, reflection_about
from .mirror import estimate_mirror
from .pipeline import Scenario, report, run_pipeline
from .sensing import fit_ir_model, max_tracking_distance, read_ir_csv

log = logging.getLogger("mirroraug")


def _emit(text, path):
    if path:
        with open(path, "w") as fh:
            fh.write(text)
    else:
        sys.stdout.write(text)


def cmd_run(args):
    sc = Scenario.load(args.scenario)
    if args.seed is not None:
        sc = Scenario.from_dict({**sc.to_dict(), "seed": args.seed})
    rig = load_rig(args.rig) if args.rig else None
    metrics = run_pipeline(sc, rig)
    for p in report(metrics, args.out):
        log.info("wrote %s", p)
    s = metrics.summary()
    print(f"status: {s['status']}  augmented frames: {s['frames_augmented']}/{s['frames_total']}")
    if s["anchor_error_m"]:
        print(f"anchor error mean {s['anchor_error_m']['mean']:.6g} m, "
              f"image rms mean {s['image_rms_px']['mean']:.6g} px, "
              f"frame age mean {s['frame_age_ms']['mean']:.6g} ms")
    return 0


def cmd_calibrate(args):
    sessions = load_observation_log(args.log)
    rep = repeatability_protocol(sessions)
    _emit(rep.to_json(indent=2) + "\n", args.json)
    if args.csv:
        with open(args.csv, "w") as fh:
            fh.write(rep.to_csv())
    t, r = rep.translation_stats, rep.rotation_stats
    print(f"translation: mean {t['mean'] * 100:.3f} cm, median {t['median'] * 100:.3f} cm, "
          f"std {t['stddev'] * 100:.3f} cm", file=sys.stderr)
    print(f"rotation:    mean {r['mean']:.3f} deg, median {r['median']:.3f} deg, "
          f"std {r['stddev']:.3f} deg", file=sys.stderr)
    return 0


def cmd_ir_fit(args):
    model = fit_ir_model(read_ir_csv(args.csv), args.threshold)
    d_direct, _ = max_tracking_distance(model, reflected=False)
    d_refl, mirror_d = max_tracking_distance(model, reflected=True)
    doc = model.to_dict()
    doc.update(max_direct_distance_m=d_direct, max_reflected_distance_m=d_refl,
               max_mirror_distance_m=mirror_d)
    _emit(json.dumps(doc, indent=2) + "\n", args.out)
    return 0


def cmd_reflect(args):
    if args.marker is not None:
        est = estimate_mirror(args.marker)
        plane, H = est.plane, est.reflection
    else:
        if args.normal is None or args.offset is None:
            raise MirrorAugError("reflect needs either --marker or both --normal and --offset")
        n = np.asarray(args.normal, dtype=float)
        plane = MirrorPlane(n / np.linalg.norm(n), args.offset)
        H = reflection_about(plane)
    doc = {"normal": plane.normal.tolist(), "offset": plane.offset, "reflection": H.matrix.tolist()}
    if args.point:
        doc["points"] = apply_point(H, np.asarray(args.point, dtype=float)).tolist()
    print(json.dumps(doc, indent=2))
    return 0


def cmd_export_rig(args):
    armature, mesh = default_rig()
    save_rig(args.path, armature, mesh)
    return 0


def cmd_example_scenario(args):
    _emit(json.dumps(Scenario().to_dict(), indent=2) + "\n", args.out)
    return 0


def build_parser():
    p = argparse.ArgumentParser(prog="mirroraug", description=__doc__)
    p.add_argument("-v", "--verbose", action="store_true")
    sub = p.add_subparsers(dest="command", required=True)

    r = sub.add_parser("run", help="simulate a scenario and write overlay metrics")
    r.add_argument("scenario", help="scenario JSON file")
    r.add_argument("-o", "--out", default="out", help="output directory (default: out)")
    r.add_argument("--rig", help="rig JSON sidecar (default: built-in avatar)")
    r.add_argument("--seed", type=int, help="override the scenario seed")
    r.set_defaults(func=cmd_run)

    c = sub.add_parser("calibrate", help="repeatability report from a co-calibration log")
    c.add_argument("log", help="observation log JSON")
    c.add_argument("--json", help="write report JSON here (default: stdout)")
    c.add_argument("--csv", help="also write a one-row CSV summary")
    c.set_defaults(func=cmd_calibrate)

    i = sub.add_parser("ir-fit", help="fit the IR falloff model to a sample CSV")
    i.add_argument("csv", help="CSV with distance_m,intensity,reflected")
    i.add_argument("--threshold", type=float, required=True, help="tracking intensity threshold")
    i.add_argument("-o", "--out", help="write model JSON here (default: stdout)")
    i.set_defaults(func=cmd_ir_fit)

    f = sub.add_parser("reflect", help="mirror reflection utility")
    f.add_argument("--normal", type=float, nargs=3, metavar=("NX", "NY", "NZ"))
    f.add_argument("--offset", type=float, help="plane offset d in n.x = d (m)")
    f.add_argument("--marker", type=float, nargs=3, metavar=("X", "Y", "Z"),
                   help="estimate the plane from an observed marker center instead")
    f.add_argument("--point", type=float, nargs=3, action="append", metavar=("X", "Y", "Z"),
                   help="point to reflect (repeatable)")
    f.set_defaults(func=cmd_reflect)

    e = sub.add_parser("export-rig", help="write the built-in avatar as PLY + JSON sidecar")
    e.add_argument("path", help="sidecar JSON path; the PLY is written next to it")
    e.set_defaults(func=cmd_export_rig)

    x = sub.add_parser("example-scenario", help="print the default scenario JSON")
    x.add_argument("-o", "--out")
    x.set_defaults(func=cmd_example_scenario)
    return p


def main(argv=None):
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        return args.func(args)
    except MirrorAugError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except (OSError, json.JSONDecodeError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
