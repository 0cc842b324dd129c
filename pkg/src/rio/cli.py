"""Command-line entry points: gen | train | ensemble | ttt | eval | plot.

Every command is deterministic given --seed and its config; outputs carry
no timestamps, so reruns are byte-identical. On failure a single
machine-readable line `error: <Kind>: <message>` goes to stderr and the
exit code is nonzero. The environment variable RIO_THREADS caps BLAS
thread pools when threadpoolctl is available.
"""

from __future__ import annotations

import argparse
import contextlib
import csv
import glob
import json
import os
import sys
from dataclasses import replace

import numpy as np

from .config import RunConfig, load_run_config
from .data import ImuSequence, load_sequence, save_sequence
from .ensemble import load_ensemble, save_ensemble, train_ensemble
from .errors import InvalidConfig, RioError, TooShort
from .model import init_model, save_checkpoint
from .plots import render_run_plot
from .synth import ScenarioSpec, ShiftSpec, gen_scenario, inject_shifts, preset_spec
from .trajmetrics import evaluate_sequence, gt_trajectory, reconstruct, write_metrics_csv, write_metrics_summary
from .training import build_dataset, joint_train
from .ttt import run_stream, write_event_log


# ---------------------------------------------------------------------------
# small file helpers


def _write_series_csv(path: str, header: list[str], t: np.ndarray, values: np.ndarray) -> None:
    os.makedirs(os.path.dirname(os.path.abspath(path)) or ".", exist_ok=True)
    with open(path, "w", newline="") as f:
        writer = csv.writer(f)
        writer.writerow(header)
        for ti, row in zip(t, values):
            writer.writerow([repr(float(ti))] + [repr(float(x)) for x in row])


def _read_series_csv(path: str, columns: int) -> tuple[np.ndarray, np.ndarray]:
    table = np.loadtxt(path, delimiter=",", skiprows=1, ndmin=2)
    if table.shape[1] != columns + 1:
        raise ValueError(f"{path!r}: expected {columns + 1} columns")
    return table[:, 0], table[:, 1:]


def write_velocities_csv(path, t, vel):
    _write_series_csv(path, ["t", "vx", "vy", "vz"], t, vel)


def read_velocities_csv(path):
    return _read_series_csv(path, 3)


def write_trajectory_csv(path, t, pos):
    _write_series_csv(path, ["t", "px", "py", "pz"], t, pos)


def read_trajectory_csv(path):
    return _read_series_csv(path, 3)


def _data_sequences(directory: str) -> list[tuple[str, ImuSequence]]:
    paths = sorted(p for p in glob.glob(os.path.join(directory, "*.csv")))
    if not paths:
        raise FileNotFoundError(f"no sequence CSVs in {directory!r}")
    return [(os.path.splitext(os.path.basename(p))[0], load_sequence(p)) for p in paths]


def _sidecar_scenario(seq_path: str) -> str:
    sidecar = os.path.splitext(seq_path)[0] + ".json"
    if os.path.exists(sidecar):
        with open(sidecar) as f:
            return json.load(f).get("preset") or "custom"
    return "default"


def _write_stats(stem: str, stats) -> None:
    with open(stem + ".stats.csv", "w", newline="") as f:
        writer = csv.writer(f)
        writer.writerow(["epoch", "supervised_loss", "aux_loss", "gated_fraction", "val_mse"])
        writer.writerow([0, "nan", "nan", "nan", repr(stats.initial_val_mse)])
        for e in stats.epochs:
            writer.writerow([e.epoch, repr(e.supervised_loss), repr(e.aux_loss),
                             repr(e.gated_fraction), repr(e.val_mse)])
    with open(stem + ".stats.json", "w") as f:
        json.dump({"initial_val_mse": stats.initial_val_mse,
                   "epochs": [vars(e) for e in stats.epochs]}, f, indent=1, sort_keys=True)


# ---------------------------------------------------------------------------
# commands


def cmd_gen(args, run: RunConfig) -> int:
    os.makedirs(args.out, exist_ok=True)
    for i in range(args.count):
        seed = run.seed + i
        if args.preset:
            spec, shifts = preset_spec(args.preset, seed, args.duration)
            preset = args.preset
        else:
            with open(args.spec) as f:
                raw = json.load(f)
            unknown = set(raw) - {"scenario", "shifts", "preset", "seed"}
            if unknown:
                raise InvalidConfig(f"unknown spec file keys: {sorted(unknown)}")
            spec = ScenarioSpec.from_dict({**raw["scenario"], "seed": seed})
            shifts = tuple(ShiftSpec.from_dict(s) for s in raw.get("shifts", []))
            preset = raw.get("preset")
        seq = inject_shifts(gen_scenario(spec), shifts)
        stem = os.path.join(args.out, f"seq_{i:03d}")
        save_sequence(seq, stem + ".csv")
        with open(stem + ".json", "w") as f:
            json.dump({"preset": preset, "seed": seed, "scenario": spec.to_dict(),
                       "shifts": [s.to_dict() for s in shifts]}, f, indent=1, sort_keys=True)
    print(f"wrote {args.count} sequence(s) to {args.out}")
    return 0


def _split_train_val(args, stride: int):
    named = _data_sequences(args.data)
    if args.val_data:
        val_named = _data_sequences(args.val_data)
    else:
        n_val = max(1, int(round(args.val_fraction * len(named)))) if len(named) > 1 else 0
        val_named = named[len(named) - n_val:]
        named = named[: len(named) - n_val] or val_named
    train_set = build_dataset([s for _, s in named], stride)
    val_set = build_dataset([s for _, s in val_named], stride) if val_named else (np.zeros((0, 6, 200), np.float32), np.zeros((0, 3)))
    return train_set, val_set


def cmd_train(args, run: RunConfig) -> int:
    cfg = run.train
    train_set, val_set = _split_train_val(args, cfg.window_stride)
    params, stats = joint_train(init_model(run.model, run.seed), train_set, val_set, cfg)
    save_checkpoint(params, args.out)
    _write_stats(args.out, stats)
    last = stats.epochs[-1]
    print(f"trained {len(stats.epochs)} epochs: val_mse {stats.initial_val_mse:.4g} -> {last.val_mse:.4g}")
    return 0


def cmd_ensemble(args, run: RunConfig) -> int:
    cfg = run.train
    train_set, val_set = _split_train_val(args, cfg.window_stride)
    seeds = run.ensemble.seeds(run.seed)
    state, stats = train_ensemble(run.model, train_set, val_set, cfg, seeds)
    state.variance_reduction = run.ensemble.variance_reduction
    state.predictor = run.ensemble.predictor
    save_ensemble(state, args.out)
    for i, st in enumerate(stats):
        _write_stats(os.path.join(args.out, f"member_{i:02d}"), st)
    print(f"trained {state.size} members (seeds {list(seeds)}) into {args.out}")
    return 0


def cmd_ttt(args, run: RunConfig) -> int:
    state = load_ensemble(args.ensemble)
    seq = load_sequence(args.seq)
    cfg = replace(run.ttt, mode=args.mode) if args.mode else run.ttt
    velocities, events = run_stream(state, seq, cfg)
    os.makedirs(args.out, exist_ok=True)
    starts = np.arange(len(velocities)) * cfg.sample_stride
    centers = 0.5 * (seq.t[starts] + seq.t[starts + 199])
    write_velocities_csv(os.path.join(args.out, "velocities.csv"), centers, velocities)
    write_event_log(events, os.path.join(args.out, "events.csv"))
    est, _gt = reconstruct(velocities, seq, cfg.sample_stride)
    t_traj = est.t0 + np.arange(len(est)) / est.rate
    write_trajectory_csv(os.path.join(args.out, "trajectory.csv"), t_traj, est.positions)
    actions = [e.action.value for e in events]
    print(f"mode {cfg.mode}: {len(velocities)} velocities, "
          f"{actions.count('updated')} updated / {actions.count('skipped')} skipped / "
          f"{actions.count('restored')} restored")
    return 0


def cmd_eval(args, run: RunConfig) -> int:
    if len(args.est) != len(args.seq):
        raise InvalidConfig(f"--est and --seq must pair up ({len(args.est)} vs {len(args.seq)})")
    policy = args.policy or run.eval.policy
    rows = []
    for est_path, seq_path in zip(args.est, args.seq):
        _, vel = read_velocities_csv(est_path)
        seq = load_sequence(seq_path)
        try:
            metrics = evaluate_sequence(vel, seq, policy, run.eval.rte_interval_s, run.eval.rte_style)
            rte_val = metrics.rte
        except TooShort as exc:
            metrics = evaluate_sequence(vel, seq, policy, rte_interval_s=None, rte_style=run.eval.rte_style)
            rte_val = float("nan")
            print(f"warning: rte undefined for {seq_path}: {exc}", file=sys.stderr)
        rows.append({
            "sequence": os.path.splitext(os.path.basename(seq_path))[0],
            "scenario": _sidecar_scenario(seq_path),
            "ate_m": metrics.ate, "rte_m": rte_val, "d_drift": metrics.d_drift,
        })
    write_metrics_csv(args.out + ".csv", rows)
    write_metrics_summary(args.out + ".json", rows)
    for row in rows:
        print(f"{row['sequence']}: ate {row['ate_m']:.4g} m, rte {row['rte_m']:.4g} m, "
              f"d_drift {row['d_drift']:.4g}")
    return 0


def cmd_plot(args, run: RunConfig) -> int:
    seq = load_sequence(args.seq)
    gt = gt_trajectory(seq)
    curves = [("ground_truth", gt.positions)]
    err_curves = []
    gt_vel = np.diff(gt.positions, axis=0) * gt.rate
    t_err = gt.t0 + np.arange(len(gt_vel)) / gt.rate
    for path in args.traj:
        label = os.path.splitext(os.path.basename(path))[0]
        if label == "trajectory":  # fall back to the run directory name
            label = os.path.basename(os.path.dirname(os.path.abspath(path))) or label
        t, pos = read_trajectory_csv(path)
        curves.append((label, pos))
        n = min(len(pos) - 1, len(gt_vel))
        est_vel = np.diff(pos[: n + 1], axis=0) * gt.rate
        err = np.linalg.norm(est_vel - gt_vel[:n], axis=1)
        err_curves.append((label, t_err[:n], err))
    render_run_plot(args.out, curves, err_curves, title=args.title or "")
    print(f"wrote {args.out}")
    return 0


# ---------------------------------------------------------------------------
# argument parsing and dispatch


def _build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="rio", description=__doc__.splitlines()[0])
    sub = parser.add_subparsers(dest="command", required=True)

    def common(p):
        p.add_argument("--config", help="JSON config file")
        p.add_argument("--seed", type=int, help="master seed (overrides config)")

    g = sub.add_parser("gen", help="generate synthetic sequences")
    common(g)
    src = g.add_mutually_exclusive_group(required=True)
    src.add_argument("--preset", help="named scenario preset")
    src.add_argument("--spec", help="scenario spec JSON file")
    g.add_argument("--count", type=int, default=1)
    g.add_argument("--duration", type=float, help="override preset duration (s)")
    g.add_argument("--out", required=True, help="output directory")

    t = sub.add_parser("train", help="train one model (joint or pure supervised)")
    common(t)
    t.add_argument("--data", required=True, help="directory of training sequence CSVs")
    t.add_argument("--val-data", help="directory of validation sequences")
    t.add_argument("--val-fraction", type=float, default=0.2)
    t.add_argument("--out", required=True, help="checkpoint stem (writes .json/.bin)")
    t.add_argument("--epochs", type=int)
    t.add_argument("--batch-size", type=int)
    t.add_argument("--lr", type=float)
    t.add_argument("--aux-weight", type=float, help="0 disables the equivariance task")
    t.add_argument("--stride", type=int, help="window stride in frames")

    e = sub.add_parser("ensemble", help="train M independent members")
    common(e)
    e.add_argument("--data", required=True)
    e.add_argument("--val-data")
    e.add_argument("--val-fraction", type=float, default=0.2)
    e.add_argument("--out", required=True, help="ensemble directory")
    e.add_argument("--members", "-M", type=int)
    e.add_argument("--seeds", help="comma-separated member seeds")
    e.add_argument("--epochs", type=int)
    e.add_argument("--batch-size", type=int)
    e.add_argument("--lr", type=float)
    e.add_argument("--aux-weight", type=float)
    e.add_argument("--stride", type=int)

    s = sub.add_parser("ttt", help="streaming inference with test-time training")
    common(s)
    s.add_argument("--ensemble", required=True, help="ensemble directory")
    s.add_argument("--seq", required=True, help="sequence CSV")
    s.add_argument("--mode", choices=["adaptive", "naive", "off"])
    s.add_argument("--out", required=True, help="output directory")
    s.add_argument("--max-updates", type=int)
    s.add_argument("--ttt-lr", type=float)

    v = sub.add_parser("eval", help="trajectory metrics for velocity estimates")
    common(v)
    v.add_argument("--est", action="append", required=True, help="velocities CSV (repeatable)")
    v.add_argument("--seq", action="append", required=True, help="paired sequence CSV (repeatable)")
    v.add_argument("--policy", choices=["aligned", "umeyama"])
    v.add_argument("--out", required=True, help="report stem (writes .csv/.json)")

    p = sub.add_parser("plot", help="overlay trajectories and velocity errors as SVG")
    common(p)
    p.add_argument("--seq", required=True, help="sequence CSV with ground truth")
    p.add_argument("--traj", action="append", required=True, help="trajectory CSV (repeatable)")
    p.add_argument("--title")
    p.add_argument("--out", required=True, help="output SVG path")
    return parser


def _overrides(args) -> dict:
    mapping = {
        "seed": "seed",
        "epochs": "train.epochs",
        "batch_size": "train.batch_size",
        "lr": "train.lr",
        "aux_weight": "train.aux_weight",
        "stride": "train.window_stride",
        "members": "ensemble.members",
        "max_updates": "ttt.max_updates_per_batch",
        "ttt_lr": "ttt.lr",
    }
    out = {}
    for attr, dotted in mapping.items():
        value = getattr(args, attr, None)
        if value is not None:
            out[dotted] = value
    if getattr(args, "seeds", None):
        out["ensemble.member_seeds"] = [int(s) for s in args.seeds.split(",")]
        out.setdefault("ensemble.members", len(out["ensemble.member_seeds"]))
    return out


def _thread_cap():
    cap = os.environ.get("RIO_THREADS")
    if not cap:
        return contextlib.nullcontext()
    try:
        from threadpoolctl import threadpool_limits
        return threadpool_limits(limits=int(cap))
    except (ImportError, ValueError):
        return contextlib.nullcontext()


_COMMANDS = {
    "gen": cmd_gen,
    "train": cmd_train,
    "ensemble": cmd_ensemble,
    "ttt": cmd_ttt,
    "eval": cmd_eval,
    "plot": cmd_plot,
}


def main(argv=None) -> int:
    args = _build_parser().parse_args(argv)
    try:
        run = load_run_config(args.config, _overrides(args))
        with _thread_cap():
            return _COMMANDS[args.command](args, run)
    except (RioError, OSError, ValueError) as exc:
        print(f"error: {type(exc).__name__}: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
