"""Pipeline entry point: demo generation, segmentation, learning, evaluation,
benchmarking, and serving.

All randomness funnels through one --seed; stages derive sub-seeds by fixed
offsets so a full pipeline run is reproducible end to end.
"""

from __future__ import annotations

import argparse
import json
import sys
import time
from pathlib import Path

import numpy as np

from . import bnirl, engine, kinematics, policy, segmentation, server, subgoals
from .kinematics import task_from_dict, task_to_dict
from .trajectory import load_trajectory, save_trajectory

_SEED_SEGMENT = 2000
_SEED_BNIRL = 3000


class StageError(Exception):
    def __init__(self, stage: str, message: str):
        super().__init__(message)
        self.stage = stage


def _load_task(path: str):
    try:
        doc = json.loads(Path(path).read_text())
    except OSError as exc:
        raise StageError("task", f"cannot read task config {path}: {exc}") from exc
    return task_from_dict(doc)


def _demo_paths(demo_dir: str, fmt: str) -> list[Path]:
    paths = sorted(Path(demo_dir).glob(f"demo_*.{fmt}"))
    if not paths:
        raise StageError("segment", f"no demo_*.{fmt} files in {demo_dir}")
    return paths


def cmd_gen_demo(args) -> int:
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    links = kinematics.default_links()
    task = kinematics.default_task(links)
    script = kinematics.load_script(args.script) if args.script else None
    demos = []
    for i in range(args.demos):
        traj, oracle = kinematics.generate_expert_demo(
            task, links, cycles=args.cycles, noise_std=args.noise,
            seed=args.seed + 101 * i, script=script,
        )
        traj.meta["demo"] = i
        demos.append((traj, oracle))
    for i, (traj, oracle) in enumerate(demos):
        (out / f"demo_{i}.{args.format}").write_bytes(
            save_trajectory(traj, args.format)
        )
        (out / f"oracle_{i}.json").write_text(json.dumps({
            "cycles": oracle.cycles,
            "cycle_frames": oracle.cycle_frames,
            "runs": [
                {"e": list(p.e), "start": s, "end": e, "phase": w["phase"]}
                for (p, s, e), w in zip(oracle.runs, oracle.waypoints)
            ],
            "events": [[t, kind] for t, kind in oracle.events],
        }))
    (out / "task.json").write_text(json.dumps(task_to_dict(task, links), indent=1))
    print(f"gen-demo: wrote {len(demos)} demos ({demos[0][0].n_frames} frames each) "
          f"and task.json to {out}")
    return 0


def cmd_segment(args) -> int:
    task_path = args.task or str(Path(args.demos) / "task.json")
    _ = _load_task(task_path)  # validates early; segmentation itself is task-free
    paths = _demo_paths(args.demos, args.format)
    trajs = []
    for p in paths:
        try:
            trajs.append(load_trajectory(p, args.format))
        except ValueError as exc:
            raise StageError("segment", f"{p}: {exc}") from exc
    eta = args.eta if args.eta is not None else None
    model = segmentation.fit_velocity_clusters(
        trajs, seed=args.seed + _SEED_SEGMENT, eta=eta
    )
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    total = 0
    for i, traj in enumerate(trajs):
        segs, _ = segmentation.segment_trajectory(traj, model, min_len=args.min_len)
        total += len(segs)
        with open(out / f"segments_{i}.jsonl", "w") as fh:
            for seg in segs:
                fh.write(json.dumps({
                    "primitive_id": seg.primitive.id,
                    "e": list(seg.primitive.e),
                    "start": seg.start_frame,
                    "end": seg.end_frame,
                    "s": seg.s.vec.tolist(),
                    "mean_v": seg.mean_v.tolist(),
                    "var_v": seg.var_v.tolist(),
                }) + "\n")
    (out / "clusters.json").write_text(json.dumps(model.to_dict(), indent=1))
    print(f"segment: wrote {total} segments over {len(trajs)} demos to {out}")
    return 0


def _read_segments(seg_dir: str):
    paths = sorted(Path(seg_dir).glob("segments_*.jsonl"))
    if not paths:
        raise StageError("learn", f"no segments_*.jsonl files in {seg_dir}")
    per_demo = []
    for p in paths:
        segs = []
        for lineno, line in enumerate(p.read_text().splitlines(), start=1):
            if not line.strip():
                continue
            try:
                rec = json.loads(line)
                segs.append(segmentation.PrimitiveSegment(
                    primitive=segmentation.ActionPrimitive(tuple(rec["e"])),
                    start_frame=int(rec["start"]),
                    end_frame=int(rec["end"]),
                    s=kinematics.EndEffectorPose.from_vec(rec["s"]),
                    mean_v=np.array(rec["mean_v"], dtype=float),
                    var_v=np.array(rec["var_v"], dtype=float),
                ))
            except (KeyError, ValueError) as exc:
                raise StageError("learn", f"{p} line {lineno}: {exc}") from exc
        per_demo.append(segs)
    return per_demo


def cmd_learn(args) -> int:
    task, _, _, _ = _load_task(args.task)
    per_demo = _read_segments(args.segments)
    clusters_path = Path(args.segments) / "clusters.json"
    clusters = None
    if clusters_path.exists():
        clusters = segmentation.VelocityClusterModel.from_dict(
            json.loads(clusters_path.read_text())
        )

    observations = []
    for segs in per_demo:
        for seg in segs:
            observations.append(segmentation.Observation(
                s=seg.s, a=seg.primitive, direction=np.zeros(4)
            ))
    obs = segmentation.ObservationSet(items=observations)
    sgs = subgoals.infer_subgoals(obs, task, lam=args.lam)
    model = policy.learn_policy(per_demo, sgs)

    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    (out / "subgoals.json").write_text(subgoals.save_subgoals(sgs))
    (out / "policy.json").write_text(
        policy.save_policy(model, subgoals_ref="subgoals.json", clusters=clusters)
    )
    counts = {}
    for sg in sgs.subgoals:
        counts[sgs.task.objects[sg.object_index].name] = (
            counts.get(sgs.task.objects[sg.object_index].name, 0) + 1
        )
    print(f"learn: {len(sgs)} subgoals ({counts}), "
          f"{len(model.chains)} chains -> {out}")
    return 0


def _load_model_bundle(model_path: str, task_path: str):
    task, links, max_speeds, home_q = _load_task(task_path)
    model_file = Path(model_path)
    doc_text = model_file.read_text()
    ref = json.loads(doc_text).get("subgoals_ref", "subgoals.json")
    sg_path = model_file.parent / ref
    if not sg_path.exists():
        raise StageError("serve", f"subgoal set {sg_path} not found")
    sgs = subgoals.load_subgoals(sg_path.read_text(), task)
    model, clusters, _ = policy.load_policy(doc_text, sgs)
    if clusters is None:
        raise StageError(
            "serve", f"{model_path} carries no velocity cluster model; "
            "re-run the learn stage with clusters.json present"
        )
    return model, clusters, task, links, max_speeds, home_q


def cmd_eval(args) -> int:
    model, clusters, task, links, _, _ = _load_model_bundle(args.model, args.task)
    try:
        traj = load_trajectory(Path(args.replay), args.format)
    except ValueError as exc:
        raise StageError("eval", f"{args.replay}: {exc}") from exc
    session = engine.replay_trajectory(model, clusters, traj, task, links,
                                       min_len=args.min_len)
    metrics = engine.compute_metrics(session.log, model.subgoals)
    out = Path(args.out)
    out.write_text(json.dumps(metrics.to_dict(), indent=1))
    print(f"eval: {len(metrics.cycle_times)} cycles -> {out}")
    return 0


def cmd_serve(args) -> int:
    model, clusters, task, links, _, _ = _load_model_bundle(args.model, args.task)
    server.serve(model, clusters, task, links, bind=args.bind, seed=args.seed,
                 realtime=not args.no_pace)
    return 0


def _bench_scaling(args, out: Path) -> int:
    sizes = [int(s) for s in args.sizes.split(",") if s]
    if not sizes:
        raise StageError("bench", "no sizes given")
    links = kinematics.default_links()
    task = kinematics.default_task(links)
    rows = []
    for size in sizes:
        cycles = max(1, int(np.ceil(size / 310)))
        traj, _ = kinematics.generate_expert_demo(
            task, links, cycles=cycles, noise_std=0.02, seed=args.seed
        )
        model = segmentation.fit_velocity_clusters([traj], seed=args.seed)
        best = np.inf
        for _ in range(3):
            t0 = time.perf_counter()
            segmentation.segment_trajectory(traj, model)
            best = min(best, time.perf_counter() - t0)
        rows.append((traj.n_frames, best))
    with open(out, "w") as fh:
        fh.write("frames,seconds\n")
        for frames, secs in rows:
            fh.write(f"{frames},{secs:.6f}\n")
    for (f1, t1), (f2, t2) in zip(rows, rows[1:]):
        print(f"bench: {f1} -> {f2} frames: time ratio {t2 / t1:.2f}")
    print(f"bench: wrote {out}")
    return 0


def _bench_bnirl(args, out: Path) -> int:
    from .kinematics import EndEffectorPose

    items = []
    for base in (np.zeros(4), np.array([2.0, 2.0, 0.0, 0.0])):
        for off in (np.zeros(4), np.array([0.4, 0, 0, 0]), np.array([0, 0.4, 0, 0])):
            s = base + off
            d = base - s
            n = np.linalg.norm(d)
            items.append(segmentation.Observation(
                s=EndEffectorPose.from_vec(s), a=None,
                direction=d / n if n > 1e-12 else np.zeros(4),
            ))
    obs = segmentation.ObservationSet(items=items)
    cfg = bnirl.BnirlConfig(alpha=args.alpha, concentration=args.concentration,
                            iterations=args.iters, burn_in=args.burn_in,
                            seed=args.seed + _SEED_BNIRL)
    samples = bnirl.gibbs_sample_partitions(obs, cfg)
    mode = bnirl.posterior_mode(samples)

    task = kinematics.TaskConfig(objects=(
        kinematics.TaskObject("a", np.zeros(3)),
        kinematics.TaskObject("b", np.array([2.0, 2.0, 0.0])),
    ))
    sgs = subgoals.infer_subgoals(obs, task, lam=1.0)
    ari = bnirl.adjusted_rand_index(mode.canonical(), sgs.assignment)
    report = {
        "bnirl_mode": list(mode.canonical()),
        "dpmirl_assignment": sgs.assignment.tolist(),
        "adjusted_rand_index": ari,
        "samples": len(samples),
    }
    out.write_text(json.dumps(report, indent=1))
    print(f"bench bnirl: ARI {ari:.3f} -> {out}")
    return 0


def cmd_bench(args) -> int:
    out = Path(args.out)
    if args.mode == "scaling":
        return _bench_scaling(args, out)
    return _bench_bnirl(args, out)


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="opguide",
        description="Learn and serve operator instruction policies from "
                    "task demonstrations.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("gen-demo", help="generate scripted expert demonstrations")
    p.add_argument("--out", default="artifacts/demos")
    p.add_argument("--demos", type=int, default=6)
    p.add_argument("--cycles", type=int, default=5,
                   help="truck-loading cycles per demo (default 5)")
    p.add_argument("--noise", type=float, default=0.02,
                   help="velocity noise std, rad/s (default 0.02)")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--format", choices=("jsonl", "csv"), default="jsonl")
    p.add_argument("--script", default=None, help="expert script JSON path")
    p.set_defaults(func=cmd_gen_demo, stage="gen-demo")

    p = sub.add_parser("segment", help="fit velocity clusters and cut demos")
    p.add_argument("--demos", default="artifacts/demos")
    p.add_argument("--task", default=None, help="task.json (default: in demo dir)")
    p.add_argument("--out", default="artifacts/segments")
    p.add_argument("--min-len", type=int, default=segmentation.DEFAULT_MIN_LEN,
                   help="debounce: shorter runs merge into the previous segment")
    p.add_argument("--eta", type=float, default=None,
                   help="stationary density threshold (default: density at "
                        "mean + 2 sigma of each joint's stationary cluster)")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--format", choices=("jsonl", "csv"), default="jsonl")
    p.set_defaults(func=cmd_segment, stage="segment")

    p = sub.add_parser("learn", help="infer subgoals and the instruction policy")
    p.add_argument("--segments", default="artifacts/segments")
    p.add_argument("--task", default="artifacts/demos/task.json")
    p.add_argument("--out", default="artifacts/model")
    p.add_argument("--lambda", dest="lam", type=float, default=None,
                   help="cluster penalty (default: (0.25 x nearest object "
                        "separation)^2)")
    p.set_defaults(func=cmd_learn, stage="learn")

    p = sub.add_parser("eval", help="replay a recorded log through the engine")
    p.add_argument("--replay", required=True, help="trajectory file to replay")
    p.add_argument("--model", default="artifacts/model/policy.json")
    p.add_argument("--task", default="artifacts/demos/task.json")
    p.add_argument("--out", default="artifacts/metrics.json")
    p.add_argument("--min-len", type=int, default=segmentation.DEFAULT_MIN_LEN)
    p.add_argument("--format", choices=("jsonl", "csv"), default="jsonl")
    p.set_defaults(func=cmd_eval, stage="eval")

    p = sub.add_parser("serve", help="run the real-time instruction service")
    p.add_argument("--bind", default="127.0.0.1:7373")
    p.add_argument("--model", default="artifacts/model/policy.json")
    p.add_argument("--task", default="artifacts/demos/task.json")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--no-pace", action="store_true",
                   help="run ticks as fast as inputs arrive (lock-step replays)")
    p.set_defaults(func=cmd_serve, stage="serve")

    p = sub.add_parser("bench", help="scaling and baseline-agreement benchmarks")
    p.add_argument("mode", nargs="?", choices=("scaling", "bnirl"),
                   default="scaling")
    p.add_argument("--sizes", default="10000,20000,40000",
                   help="comma-separated frame counts (scaling mode)")
    p.add_argument("--alpha", type=float, default=5.0)
    p.add_argument("--concentration", type=float, default=1.0)
    p.add_argument("--iters", type=int, default=2000)
    p.add_argument("--burn-in", type=int, default=500)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out", default="artifacts/bench.out")
    p.set_defaults(func=cmd_bench, stage="bench")
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except StageError as exc:
        print(f"error in stage {exc.stage}: {exc}", file=sys.stderr)
        return 2
    except (ValueError, OSError, KeyError) as exc:
        print(f"error in stage {args.stage}: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
