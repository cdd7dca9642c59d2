"""Command line entry point.

Subcommands: synth, train-pose, train-cam, eval, compare-ransac,
compare-8pt, ablate-extrinsics.  Every run reads an optional flat JSON
config (--config), writes its artifacts under --out, and exits 0 on
success, 2 on configuration problems, 3 on dataset problems, 4 on
numerical failures.  Reports are deterministic given the config and
seeds: JSON with sorted keys plus CSV and gnuplot-ready .dat tables,
never timestamps.
"""

from __future__ import annotations

import argparse
import json
import os
import sys
from dataclasses import fields

import numpy as np

from .errors import ConfigError, ContractError, DatasetError, \
    NumericalError
from .features import camera_errors, mpjpe
from .geometry import relative_pose
from .scoring import ScoringNetwork
from .synth import (NoiseSpec, RigSpec, load_dataset, make_dataset,
                    sample_probe_points, save_dataset)
from .training import (EVAL_STRATEGIES, TrainConfig, config_fingerprint,
                       evaluate_camera, evaluate_pose, extrinsics_ablation,
                       ransac_triangulation_baseline, train,
                       vanilla_8pt_baseline, write_csv, write_gnuplot_dat,
                       write_report_json)

CAMERA_METRICS = ("e_rot", "e_trans", "e_2d", "e_3d")


def _read_config(path) -> dict:
    if path is None:
        return {}
    try:
        with open(path) as fh:
            doc = json.load(fh)
    except FileNotFoundError:
        raise ConfigError(f"no such config file: {path}")
    except json.JSONDecodeError as e:
        raise ConfigError(f"cannot parse config {path}: {e}")
    if not isinstance(doc, dict):
        raise ConfigError(f"config {path} must hold a JSON object")
    return doc


def _train_config(args, task) -> TrainConfig:
    doc = _read_config(args.config)
    if doc.setdefault("task", task) != task:
        raise ConfigError(f"config task {doc['task']!r}, subcommand wants "
                          f"{task!r}")
    cfg = TrainConfig.from_dict(doc)
    if args.seed is not None:
        cfg.seed = args.seed
    if args.dataset is not None:
        cfg.dataset = args.dataset
    if args.out is not None:
        cfg.out = args.out
    if getattr(args, "weights", None) is not None:
        cfg.weights = args.weights
    return cfg


def _out_dir(cfg_or_path) -> str:
    out = cfg_or_path if isinstance(cfg_or_path, str) else cfg_or_path.out
    out = out or "."
    os.makedirs(out, exist_ok=True)
    return out


def _load_dataset(path):
    if path is None:
        raise ConfigError("a dataset is required (--dataset)")
    return load_dataset(path)


def _load_net(path, expect_task=None):
    if path is None:
        raise ConfigError("trained weights are required (--weights)")
    try:
        return ScoringNetwork.load(path, expect_task=expect_task)
    except FileNotFoundError:
        raise ConfigError(f"no such weights file: {path}")


SYNTH_ONLY_KEYS = ("frames", "motion_seed", "noise_seed")


def cmd_synth(args) -> int:
    doc = _read_config(args.config)
    rig_keys = {f.name for f in fields(RigSpec)}
    noise_keys = {f.name for f in fields(NoiseSpec)}
    unknown = set(doc) - rig_keys - noise_keys - set(SYNTH_ONLY_KEYS)
    if unknown:
        raise ConfigError(f"unknown config keys: {sorted(unknown)}")
    rig_params = {k: tuple(v) if isinstance(v, list) else v
                  for k, v in doc.items() if k in rig_keys}
    if args.seed is not None:
        rig_params["seed"] = args.seed
    try:
        rig = RigSpec(**rig_params)
        noise = NoiseSpec(**{k: v for k, v in doc.items()
                             if k in noise_keys})
    except ValueError as e:
        raise ConfigError(str(e))
    frames = int(doc.get("frames", 60))
    ds = make_dataset(rig, noise, frames,
                      motion_seed=doc.get("motion_seed", rig.seed + 1),
                      noise_seed=doc.get("noise_seed", rig.seed + 2))
    out = os.path.join(_out_dir(args.out or "."), "dataset.json")
    save_dataset(ds, out)
    print(f"wrote {out}: {frames} frames, {len(ds.cameras)} cameras "
          f"({rig.preset})")
    return 0


def _run_training(args, task) -> int:
    cfg = _train_config(args, task)
    ds = _load_dataset(cfg.dataset)
    net, report = train(cfg, ds)
    out = _out_dir(cfg)
    weights_path = os.path.join(out, f"{task}_weights.npz")
    net.save(weights_path)
    write_report_json(report, os.path.join(out, "train_report.json"))
    write_gnuplot_dat(os.path.join(out, "loss.dat"),
                      {"iteration": list(range(1, len(
                          report["loss_history"]) + 1)),
                       "loss": report["loss_history"]})
    last = report["loss_history"][-1] if report["loss_history"] else \
        float("nan")
    print(f"trained {task} scorer: {cfg.iterations} iterations, "
          f"{report['optimizer_steps']} optimizer steps, "
          f"final loss {last:.6g}")
    print(f"wrote {weights_path}")
    return 0


def cmd_train_pose(args) -> int:
    return _run_training(args, "pose")


def cmd_train_cam(args) -> int:
    return _run_training(args, "camera")


def _pose_table(report) -> tuple[list, list]:
    header = ["strategy", "mpjpe_mm"]
    rows = [[s, report[s]["mpjpe_mean"]] for s in report]
    return header, rows


def _camera_table(report) -> tuple[list, list]:
    header = ["strategy", *CAMERA_METRICS]
    rows = [[s, *[report[s][m] for m in CAMERA_METRICS]] for s in report]
    return header, rows


def _emit_eval(report, out, task, fingerprint) -> None:
    doc = {"task": task, "fingerprint": fingerprint, "strategies": report}
    write_report_json(doc, os.path.join(out, "report.json"))
    header, rows = (_pose_table if task == "pose" else _camera_table)(report)
    write_csv(os.path.join(out, "report.csv"), header, rows)
    if task == "pose":
        columns = {"frame": list(range(len(
            next(iter(report.values()))["mpjpe_per_frame"])))}
        columns.update({s: report[s]["mpjpe_per_frame"] for s in report})
        write_gnuplot_dat(os.path.join(out, "per_frame.dat"), columns)


def cmd_eval(args) -> int:
    cfg = _train_config(args, args_task(args))
    net = _load_net(cfg.weights)
    ds = _load_dataset(cfg.dataset)
    out = _out_dir(args.out or ".")
    if net.task == "pose":
        report = evaluate_pose(net, ds,
                               strategies=EVAL_STRATEGIES + ("ransac",),
                               pool_size=cfg.pool_size,
                               temperature=cfg.temperature, seed=cfg.seed)
        best = min(report, key=lambda s: report[s]["mpjpe_mean"])
    else:
        report = evaluate_camera(net, ds, pool_size=cfg.pool_size,
                                 subset_size=cfg.subset_size,
                                 temperature=cfg.temperature, seed=cfg.seed)
        best = min(report, key=lambda s: report[s]["e_3d"])
    _emit_eval(report, out, net.task, config_fingerprint(cfg))
    print(f"evaluated {len(report)} strategies on {ds.frames} frames; "
          f"best: {best}")
    print(f"wrote {os.path.join(out, 'report.json')}")
    return 0


def args_task(args) -> str:
    """eval and the comparison commands accept either task's config; the
    config's own task field (default pose) decides the defaults used."""
    doc = _read_config(args.config)
    return doc.get("task", "pose")


def cmd_compare_ransac(args) -> int:
    cfg = _train_config(args, "pose")
    ds = _load_dataset(cfg.dataset)
    out = _out_dir(args.out or ".")
    if cfg.weights is not None:
        net = _load_net(cfg.weights, expect_task="pose")
        report = evaluate_pose(net, ds,
                               strategies=EVAL_STRATEGIES + ("ransac",),
                               pool_size=cfg.pool_size,
                               temperature=cfg.temperature, seed=cfg.seed)
    else:
        rng = np.random.default_rng(cfg.seed)
        errs = [mpjpe(ransac_triangulation_baseline(
            det, ds.cameras, rng_seed=int(rng.integers(2**63))),
            ds.poses[f]) for f, det in enumerate(ds.detections)]
        report = {"ransac": {"mpjpe_mean": float(np.mean(errs)),
                             "mpjpe_per_frame": errs}}
    _emit_eval(report, out, "pose", config_fingerprint(cfg))
    ransac_err = report["ransac"]["mpjpe_mean"]
    print(f"ransac baseline MPJPE {ransac_err:.3f} mm over {ds.frames} "
          f"frames")
    if "weight" in report:
        print(f"scored blend MPJPE {report['weight']['mpjpe_mean']:.3f} mm")
    print(f"wrote {os.path.join(out, 'report.json')}")
    return 0


def cmd_compare_8pt(args) -> int:
    cfg = _train_config(args, "camera")
    ds = _load_dataset(cfg.dataset)
    out = _out_dir(args.out or ".")
    if cfg.weights is not None:
        net = _load_net(cfg.weights, expect_task="camera")
        report = evaluate_camera(net, ds, pool_size=cfg.pool_size,
                                 subset_size=cfg.subset_size,
                                 temperature=cfg.temperature, seed=cfg.seed)
    else:
        if len(ds.cameras) != 2:
            raise ConfigError("camera comparison needs a two-view dataset")
        pair = (ds.cameras[0], ds.cameras[1])
        probes = sample_probe_points(ds.cameras, 40, rng_seed=cfg.seed + 7919)
        est = vanilla_8pt_baseline(ds.detections, pair)
        report = {"baseline_8pt": camera_errors(
            est, relative_pose(*pair), pair[0], pair[1].intrinsics, probes)}
    _emit_eval(report, out, "camera", config_fingerprint(cfg))
    print(f"8-point baseline E_3D {report['baseline_8pt']['e_3d']:.3f} mm")
    if "weight" in report:
        print(f"scored blend E_3D {report['weight']['e_3d']:.3f} mm")
    print(f"wrote {os.path.join(out, 'report.json')}")
    return 0


def cmd_ablate_extrinsics(args) -> int:
    cfg = _train_config(args, "pose")
    pose_net = _load_net(cfg.weights, expect_task="pose")
    if cfg.cam_weights is None:
        raise ConfigError("extrinsics ablation needs cam_weights in the "
                          "config (path to trained camera weights)")
    cam_net = _load_net(cfg.cam_weights, expect_task="camera")
    ds = _load_dataset(cfg.dataset)
    out = _out_dir(args.out or ".")
    report = extrinsics_ablation(pose_net, cam_net, ds,
                                 pool_size=cfg.pool_size,
                                 temperature=cfg.temperature,
                                 subset_size=cfg.subset_size, seed=cfg.seed)
    doc = {"task": "ablation", "fingerprint": config_fingerprint(cfg),
           "mpjpe_mm": report}
    write_report_json(doc, os.path.join(out, "report.json"))
    write_csv(os.path.join(out, "report.csv"), ["extrinsics", "mpjpe_mm"],
              [[k, v] for k, v in report.items()])
    parts = ", ".join(f"{k}={v:.2f}" for k, v in report.items())
    print(f"ablation MPJPE (mm): {parts}")
    print(f"wrote {os.path.join(out, 'report.json')}")
    return 0


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(
        prog="stochtri",
        description="Scored hypothesis pools for multi-view triangulation "
                    "and two-view relative pose, with synthetic data and "
                    "classical baselines.")
    sub = p.add_subparsers(dest="command", required=True)
    specs = [
        ("synth", cmd_synth, "generate a synthetic dataset"),
        ("train-pose", cmd_train_pose, "train the pose hypothesis scorer"),
        ("train-cam", cmd_train_cam, "train the camera hypothesis scorer"),
        ("eval", cmd_eval, "evaluate trained weights on a dataset"),
        ("compare-ransac", cmd_compare_ransac,
         "pose strategies against the RANSAC triangulation baseline"),
        ("compare-8pt", cmd_compare_8pt,
         "camera strategies against the all-correspondence 8-point solve"),
        ("ablate-extrinsics", cmd_ablate_extrinsics,
         "pose error under true vs estimated extrinsics"),
    ]
    for name, func, help_text in specs:
        s = sub.add_parser(name, help=help_text)
        s.add_argument("--config", help="flat JSON config file")
        s.add_argument("--seed", type=int, help="override the config seed")
        s.add_argument("--out", help="output directory (default .)")
        s.add_argument("--dataset", help="dataset JSON path")
        s.add_argument("--weights", help="trained weights (.npz)")
        s.set_defaults(func=func)
    return p


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except (ConfigError, ContractError) as e:
        print(f"error: {e}", file=sys.stderr)
        return 2
    except DatasetError as e:
        print(f"error: {e}", file=sys.stderr)
        return 3
    except NumericalError as e:
        print(f"error: {e}", file=sys.stderr)
        return 4


if __name__ == "__main__":
    raise SystemExit(main())
