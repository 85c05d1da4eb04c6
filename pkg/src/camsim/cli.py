"""Batch experiment driver.

Commands: synth, run, sweep-pixel, sweep-exposure, edge-case, eval, plot.
All experiment parameters live in a single JSON config; flags only select
the command, config path, seed override, and verbosity. CAMSIM_THREADS caps
the scene worker pool. Exit codes: 0 ok, 2 config error, 3 runtime error.
"""

from __future__ import annotations

import argparse
import csv
import json
import math
import os
import sys
import traceback
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, replace
from pathlib import Path

import numpy as np

from . import evalmetrics as ev
from .annotation import LabelPolicy, apply_policy, export_dataset, project_truth
from .detector import ProxyDetectorConfig, import_detections, proxy_detect
from .exposure import (ExposurePlan, bracketed_capture, center_weighted_duration,
                       hdr_combine)
from .isp import render, write_ppm
from .optics import LensSpec, radiance_to_irradiance
from .plotting import curve_svg
from .rng import stream_key
from .scene import (Scene, edge_case_scene, load_scene, save_scene, spec_from_dict,
                    synthesize)
from .sensor import SensorSpec, capture, derive_geometry
from .spectral import luminance_weights

EXIT_OK = 0
EXIT_CONFIG = 2
EXIT_RUNTIME = 3


class ConfigError(Exception):
    pass


@dataclass
class RunConfig:
    scenes: dict
    lens: LensSpec
    sensor: SensorSpec
    exposure: ExposurePlan
    isp: dict
    policy: LabelPolicy
    detector: dict
    output_dir: Path
    seed: int
    target_lux: float | None = None
    save_images: bool = False
    make_plot: bool = False

    @staticmethod
    def from_file(path, seed_override: int | None = None) -> "RunConfig":
        path = Path(path)
        if not path.is_file():
            raise ConfigError(f"config file not found: {path}")
        try:
            d = json.loads(path.read_text())
        except json.JSONDecodeError as e:
            raise ConfigError(f"config JSON invalid: {e}") from e
        return RunConfig.from_dict(d, seed_override)

    @staticmethod
    def from_dict(d: dict, seed_override: int | None = None) -> "RunConfig":
        try:
            scenes = d["scenes"]
            if scenes.get("source") not in ("synth", "dir"):
                raise ConfigError("scenes.source must be 'synth' or 'dir'")
            if scenes["source"] == "dir" and not Path(scenes["path"]).is_dir():
                raise ConfigError(f"scene directory not found: {scenes['path']}")
            det = d.get("detector", {"proxy": {}})
            if "import" in det and not Path(det["import"]).is_file():
                raise ConfigError(f"detections file not found: {det['import']}")
            return RunConfig(
                scenes=scenes,
                lens=LensSpec.from_dict(d.get("lens", {})),
                sensor=SensorSpec.from_dict(d.get("sensor", {})),
                exposure=ExposurePlan.from_dict(d.get("exposure", {"mode": "center_weighted"})),
                isp=d.get("isp", {"stages": ["demosaic", "color", "gamma"],
                                  "gamma": {"mode": "adaptive", "target": 0.2}}),
                policy=LabelPolicy.from_dict(d.get("policy", {})),
                detector=det,
                output_dir=Path(d.get("output_dir", "out")),
                seed=seed_override if seed_override is not None else d.get("seed", 0),
                target_lux=d.get("target_lux"),
                save_images=d.get("save_images", False),
                make_plot=d.get("plot", False),
            )
        except KeyError as e:
            raise ConfigError(f"config missing key: {e}") from e
        except (ValueError, TypeError) as e:
            raise ConfigError(str(e)) from e


def _n_workers() -> int:
    env = os.environ.get("CAMSIM_THREADS")
    if env:
        return max(1, int(env))
    return min(8, os.cpu_count() or 1)


def _load_scenes(cfg: RunConfig) -> tuple:
    """([(scene_id, Scene)] ordered by id, [(scene_id, error)])."""
    src = cfg.scenes
    out, errors = [], []
    if src["source"] == "dir":
        root = Path(src["path"])
        dirs = sorted(p for p in root.iterdir() if (p / "radiance.sic").is_file())
        for p in dirs:
            try:
                out.append((p.name, load_scene(p)))
            except Exception as e:  # skip the broken scene, keep the rest
                errors.append((p.name, e))
        return out, errors
    spec = spec_from_dict(src.get("spec", {}))
    count = int(src.get("count", 1))
    for i in range(count):
        s = replace(spec, seed=cfg.seed + i)
        out.append((f"scene_{i:04d}", synthesize(s)))
    return out, errors


def _scale_to_lux(sc: Scene, lens: LensSpec, target_lux: float) -> Scene:
    """Scalar radiance scale so mean sensor-plane illuminance hits the target."""
    current = radiance_to_irradiance(sc, lens).mean_illuminance_lux
    if current <= 0:
        return sc
    return sc.scaled(target_lux / current)


def _process_scene(args):
    """One scene through capture -> ISP -> annotate -> detect."""
    cfg, scene_id, index, sc = args
    lens, sensor = cfg.lens, cfg.sensor
    if cfg.target_lux is not None:
        sc = _scale_to_lux(sc, lens, cfg.target_lux)
    plan = cfg.exposure
    seed = int(stream_key(cfg.seed, 3, index) & np.uint64(0x7FFFFFFF))
    if plan.mode == "bracketed":
        frames = bracketed_capture(sc, lens, sensor, plan.durations_s, seed)
        source = hdr_combine(frames)
        duration = plan.durations_s[0]
        rows, cols = frames[0].dn.shape
    else:
        duration = plan.t_s if plan.mode == "fixed" else \
            center_weighted_duration(sc, lens, sensor, plan)
        frame = capture(sc, lens, sensor, duration, seed)
        source = frame
        rows, cols = frame.dn.shape
    image = render(source, cfg.isp)
    boxes = apply_policy(project_truth(sc, rows, cols), cfg.policy)
    gts = [ev.as_gt(scene_id, b) for b in boxes]
    if "import" in cfg.detector:
        dets = []  # filled from the import after the pool completes
    else:
        pconf = ProxyDetectorConfig.from_dict(
            {**cfg.detector.get("proxy", {}), "seed": seed})
        dets = proxy_detect(image, boxes, pconf, image_id=scene_id)
    return scene_id, {"gts": gts, "dets": dets, "duration_s": duration,
                      "rows": rows, "cols": cols, "image": image if cfg.save_images else None,
                      "boxes": boxes}


def run_pipeline(cfg: RunConfig) -> dict:
    """Full cmd_run: returns the summary dict and writes all artifacts."""
    out = cfg.output_dir
    out.mkdir(parents=True, exist_ok=True)
    scenes, errors = _load_scenes(cfg)
    jobs = [(cfg, sid, i, sc) for i, (sid, sc) in enumerate(scenes)]
    results = {}
    if jobs:
        with ThreadPoolExecutor(max_workers=_n_workers()) as pool:
            for job, res in zip(jobs, pool.map(_safe_process, jobs)):
                if isinstance(res, Exception):
                    errors.append((job[1], res))
                else:
                    results[res[0]] = res[1]
    ordered = sorted(results)

    gts, dets, images_meta, truths = [], [], [], {}
    for sid in ordered:
        r = results[sid]
        gts.extend(r["gts"])
        dets.extend(r["dets"])
        images_meta.append({"id": sid, "file": f"{sid}.ppm",
                            "width": r["cols"], "height": r["rows"]})
        truths[sid] = r["boxes"]
        if r["image"] is not None:
            write_ppm(r["image"], out / f"{sid}.ppm")
    if "import" in cfg.detector:
        sizes = {m["id"]: (m["width"], m["height"]) for m in images_meta}
        dets = import_detections(cfg.detector["import"], sizes)

    curve = ev.ap_vs_distance(dets, gts, max_distance_m=cfg.policy.max_distance_m)
    ev.write_metrics_csv(curve, out / "metrics.csv")
    summary = ev.write_summary_json(curve, dets, gts, out / "summary.json")
    (out / "detections.json").write_text(json.dumps(ev.detections_to_json(dets), indent=1))
    export_dataset(images_meta, truths, out / "dataset.json", seed=cfg.seed)
    durations = {sid: results[sid]["duration_s"] for sid in ordered}
    (out / "exposures.json").write_text(json.dumps(durations, indent=1))
    if errors:
        (out / "errors.log").write_text(
            "\n".join(f"{sid}: {exc}" for sid, exc in errors))
    if cfg.make_plot:
        pts = [(0.5 * (b.low_m + b.high_m), b.ap) for b in curve.bins if b.ap is not None]
        curve_svg([("AP", pts)], out / "ap_vs_distance.svg")
    summary["n_images"] = len(ordered)
    summary["n_errors"] = len(errors)
    return summary


def _safe_process(job):
    try:
        return _process_scene(job)
    except Exception as e:  # keep processing the remaining scenes
        return e


# ------------------------------------------------------------- commands ----

def cmd_synth(args) -> int:
    spec_doc = json.loads(Path(args.spec).read_text())
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    base = spec_from_dict(spec_doc)
    entries = []
    for i in range(args.count):
        s = replace(base, seed=(args.seed if args.seed is not None else base.seed) + i)
        sc = synthesize(s)
        name = f"scene_{i:04d}"
        save_scene(sc, out / name)
        entries.append({"id": name, "seed": s.seed,
                        "mean_luminance": sc.meta.mean_luminance,
                        "dynamic_range_log10": sc.meta.dynamic_range_log10})
    (out / "manifest.json").write_text(json.dumps({"scenes": entries}, indent=1))
    print(f"synthesized {len(entries)} scenes into {out}")
    return EXIT_OK


def cmd_run(args) -> int:
    cfg = RunConfig.from_file(args.config, args.seed)
    summary = run_pipeline(cfg)
    print(json.dumps(summary, indent=1))
    return EXIT_OK if summary["n_errors"] == 0 else EXIT_RUNTIME


def cmd_sweep_pixel(args) -> int:
    cfg = RunConfig.from_file(args.config, args.seed)
    sizes = args.sizes or [1.5, 3.0, 6.0]
    rows_out = []
    for size in sizes:
        sub = replace(cfg, sensor=cfg.sensor.with_pixel_size(size),
                      output_dir=cfg.output_dir / f"pixel_{size:g}um")
        rows, cols = derive_geometry(size, sub.sensor)
        summary = run_pipeline(sub)
        rows_out.append([size, rows, cols, summary["ap_overall"],
                         summary["od50_m"] if not summary["od50_beyond_range"] else "beyond-range"])
    cfg.output_dir.mkdir(parents=True, exist_ok=True)
    with open(cfg.output_dir / "sweep_pixel.csv", "w", newline="") as f:
        w = csv.writer(f)
        w.writerow(["pixel_size_um", "rows", "cols", "ap_overall", "od50_m"])
        w.writerows(rows_out)
    print(f"wrote {cfg.output_dir / 'sweep_pixel.csv'}")
    return EXIT_OK


def cmd_sweep_exposure(args) -> int:
    cfg = RunConfig.from_file(args.config, args.seed)
    lux_levels = args.lux or [10.0, 500.0]
    plans = {
        "fixed_12ms": ExposurePlan("fixed", t_s=12e-3),
        "fixed_0.12ms": ExposurePlan("fixed", t_s=0.12e-3),
        "fixed_12us": ExposurePlan("fixed", t_s=12e-6),
        "center_weighted": ExposurePlan("center_weighted"),
        "bracketed": ExposurePlan("bracketed"),
    }
    rows_out = []
    cw_durations: dict = {}
    for lux in lux_levels:
        for name, plan in plans.items():
            sub = replace(cfg, exposure=plan, target_lux=lux,
                          output_dir=cfg.output_dir / f"lux{lux:g}_{name}")
            summary = run_pipeline(sub)
            rows_out.append([lux, name, summary["ap_overall"],
                             summary["od50_m"] if not summary["od50_beyond_range"]
                             else "beyond-range"])
            if name == "center_weighted":
                durs = json.loads((sub.output_dir / "exposures.json").read_text())
                cw_durations[lux] = sorted(durs.values())
    cfg.output_dir.mkdir(parents=True, exist_ok=True)
    with open(cfg.output_dir / "sweep_exposure.csv", "w", newline="") as f:
        w = csv.writer(f)
        w.writerow(["lux", "plan", "ap_overall", "od50_m"])
        w.writerows(rows_out)
    edges = np.geomspace(12e-6, 16e-3, 13)
    with open(cfg.output_dir / "cw_duration_histogram.csv", "w", newline="") as f:
        w = csv.writer(f)
        w.writerow(["lux", "bin_low_s", "bin_high_s", "count"])
        for lux, durs in cw_durations.items():
            hist, _ = np.histogram(durs, bins=edges)
            for i, c in enumerate(hist):
                w.writerow([lux, f"{edges[i]:.6g}", f"{edges[i + 1]:.6g}", int(c)])
    print(f"wrote {cfg.output_dir / 'sweep_exposure.csv'}")
    return EXIT_OK


def cmd_edge_case(args) -> int:
    cfg = RunConfig.from_file(args.config, args.seed)
    report = edge_case_report(cfg)
    cfg.output_dir.mkdir(parents=True, exist_ok=True)
    (cfg.output_dir / "edge_case.json").write_text(json.dumps(report, indent=1))
    print(json.dumps(report, indent=1))
    return EXIT_OK


def edge_case_report(cfg: RunConfig) -> dict:
    """Run the fixed edge-case scene under center-weighted and bracketed
    exposure; report per-target detectability and detection outcome."""
    from .detector import detectability

    sc = edge_case_scene()
    lens, sensor = cfg.lens, cfg.sensor
    seed = cfg.seed
    report = {"algorithms": {}}
    plans = {
        "center_weighted": ExposurePlan("center_weighted"),
        "bracketed": ExposurePlan("bracketed"),
    }
    for name, plan in plans.items():
        if plan.mode == "bracketed":
            frames = bracketed_capture(sc, lens, sensor, plan.durations_s, seed)
            source = hdr_combine(frames)
            rows, cols = frames[0].dn.shape
            duration = list(plan.durations_s)
        else:
            t = center_weighted_duration(sc, lens, sensor, plan)
            source = capture(sc, lens, sensor, t, seed)
            rows, cols = source.dn.shape
            duration = t
        image = render(source, cfg.isp)
        boxes = apply_policy(project_truth(sc, rows, cols), cfg.policy)
        pconf = ProxyDetectorConfig.from_dict({**cfg.detector.get("proxy", {}), "seed": seed})
        dets = proxy_detect(image, boxes, pconf, image_id=name)
        targets = {}
        for b in boxes:
            d = detectability(image.values, b, pconf.min_pixels, pconf.snr_scale)
            hit = any(ev.iou(det, b) >= 0.5 for det in dets)
            targets[str(b.instance_id)] = {
                "class": b.class_name, "distance_m": b.distance_m,
                "dprime": d, "detected": hit,
            }
        report["algorithms"][name] = {"duration_s": duration, "targets": targets}
    return report


def cmd_eval(args) -> int:
    dataset = json.loads(Path(args.dataset).read_text())
    sizes = {im["id"]: (im["width"], im["height"]) for im in dataset["images"]}
    gts = [
        ev.GTBox(a["image_id"],
                 (a["bbox"][0], a["bbox"][1],
                  a["bbox"][0] + a["bbox"][2], a["bbox"][1] + a["bbox"][3]),
                 a.get("distance_m", 1.0))
        for a in dataset["annotations"]
    ]
    dets = import_detections(args.detections, sizes)
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    curve = ev.ap_vs_distance(dets, gts)
    ev.write_metrics_csv(curve, out / "metrics.csv")
    summary = ev.write_summary_json(curve, dets, gts, out / "summary.json")
    print(json.dumps(summary, indent=1))
    return EXIT_OK


def cmd_plot(args) -> int:
    series = []
    for path in args.csv:
        curve = ev.read_metrics_csv(path)
        pts = [(0.5 * (b.low_m + b.high_m), b.ap) for b in curve.bins if b.ap is not None]
        series.append((Path(path).stem, pts))
    curve_svg(series, args.out)
    print(f"wrote {args.out}")
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="camsim", description=__doc__)
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("synth", help="generate seeded scene directories")
    p.add_argument("spec")
    p.add_argument("out")
    p.add_argument("-n", "--count", type=int, default=1)
    p.add_argument("--seed", type=int)
    p.set_defaults(func=cmd_synth)

    p = sub.add_parser("run", help="full pipeline over the configured scenes")
    p.add_argument("config")
    p.add_argument("--seed", type=int)
    p.set_defaults(func=cmd_run)

    p = sub.add_parser("sweep-pixel", help="pixel-size sweep with OD50 collation")
    p.add_argument("config")
    p.add_argument("--sizes", type=float, nargs="+")
    p.add_argument("--seed", type=int)
    p.set_defaults(func=cmd_sweep_pixel)

    p = sub.add_parser("sweep-exposure", help="exposure algorithm comparison")
    p.add_argument("config")
    p.add_argument("--lux", type=float, nargs="+")
    p.add_argument("--seed", type=int)
    p.set_defaults(func=cmd_sweep_exposure)

    p = sub.add_parser("edge-case", help="specular/shadow stress scene comparison")
    p.add_argument("config")
    p.add_argument("--seed", type=int)
    p.set_defaults(func=cmd_edge_case)

    p = sub.add_parser("eval", help="score external detections against a dataset")
    p.add_argument("dataset")
    p.add_argument("detections")
    p.add_argument("out")
    p.set_defaults(func=cmd_eval)

    p = sub.add_parser("plot", help="metrics CSV(s) to an SVG curve")
    p.add_argument("csv", nargs="+")
    p.add_argument("out")
    p.set_defaults(func=cmd_plot)
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except ConfigError as e:
        print(f"config error: {e}", file=sys.stderr)
        return EXIT_CONFIG
    except FileNotFoundError as e:
        print(f"config error: {e}", file=sys.stderr)
        return EXIT_CONFIG
    except Exception as e:
        if getattr(args, "verbose", False):
            traceback.print_exc()
        print(f"runtime error: {e}", file=sys.stderr)
        return EXIT_RUNTIME


if __name__ == "__main__":
    sys.exit(main())
