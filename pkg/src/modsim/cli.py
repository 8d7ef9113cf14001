"""Command-line entry points: run, gen-dataset, replay, serve.

Exit codes for ``run``: 0 when the success predicate holds, 2 when the
task fails, 1 on errors. ``replay --verify`` exits 0 iff the re-executed
frames and events are bit-identical to the recorded ones. All outputs are
fully determined by the seeds on the command line / in the config.
"""

from __future__ import annotations

import argparse
import json
import os
import sys
import time

from . import dataset, executor, modlang, service


def _load_script(arg: str | None) -> list:
    """Script entries from a JSON file path or an inline JSON string."""
    if not arg:
        return []
    if os.path.exists(arg):
        with open(arg, encoding="utf-8") as fh:
            entries = json.load(fh)
    else:
        entries = json.loads(arg)
    script = []
    for entry in entries:
        ir = (
            modlang.ModulationIR.from_json(entry["ir"])
            if "ir" in entry
            else modlang.parse(entry["text"])
        )
        script.append((int(entry["frame"]), ir))
    return script


def _print_events(trace: executor.EpisodeTrace):
    for ev in trace.events:
        extra = ""
        if ev.kind in ("action_started", "action_completed"):
            extra = f" {ev.payload['kind']} [{ev.payload['subtask']}]"
        elif ev.kind == "subtask_completed":
            extra = f" {ev.payload['subtask']} (target {ev.payload.get('target_label')})"
        elif ev.kind in ("grasped", "released"):
            extra = f" {ev.payload['label']}"
        elif ev.kind in ("modulation_applied", "modulation_rejected"):
            extra = f" {ev.payload['ir']['raw_text']!r}"
            if ev.kind == "modulation_rejected":
                extra += f" ({ev.payload['reason']})"
        elif ev.kind in ("task_done", "task_failed"):
            extra = f" subtasks={ev.payload['subtasks']}"
        print(f"  [{ev.t:8.2f}s f{ev.frame_index:05d}] {ev.kind}{extra}")


def cmd_run(args) -> int:
    script = _load_script(args.script)
    ex = executor.start_episode(args.task, args.variation, args.seed, v_max=args.v_max)
    if not args.turbo:
        # paced mode: watchable in a terminal at the simulation rate
        trace = None
        frames = [executor.capture(ex)]
        queue = list(script)
        while ex.status == executor.RUNNING:
            while queue and queue[0][0] == ex.step_count:
                executor.inject(ex, queue.pop(0)[1])
            if ex.status not in (executor.RUNNING,):
                break
            executor.step(ex)
            frames.append(executor.capture(ex))
            time.sleep(executor.DT)
        trace = executor.EpisodeTrace(
            task_id=ex.task_id, variation_id=ex.variation_id, seed=ex.seed,
            script=script, frames=frames, events=list(ex.events), marks=list(ex.marks),
            modulations=list(ex.modulations), success=bool(ex.success),
            final_status=ex.status, failure_reason=ex.failure_reason,
            subtask_status=dict(ex.subtask_status or {}), registry=ex.registry,
        )
    else:
        trace = executor.run_to_completion(ex, script)
    print(f"episode {args.task}/{args.variation} seed={args.seed} "
          f"frames={len(trace.frames) - 1} status={trace.final_status}")
    _print_events(trace)
    if args.out:
        rec = dataset.record(trace)
        with open(args.out, "w", encoding="utf-8") as fh:
            fh.write(json.dumps(rec.to_json(), ensure_ascii=False) + "\n")
        print(f"wrote {args.out}")
    return 0 if trace.success else 2


def cmd_gen_dataset(args) -> int:
    if args.config:
        with open(args.config, encoding="utf-8") as fh:
            config = json.load(fh)
    else:
        config = dataset.default_config()
    if args.seed is not None:
        config["dataset_seed"] = args.seed
    started = time.time()
    summary = dataset.generate_dataset(config, args.out)
    print(f"dataset written to {args.out} in {time.time() - started:.1f}s")
    print(f"  instances:    {summary['instances']}")
    print(f"  episodes:     {summary['episodes']}")
    print(f"  instructions: {summary['instructions']}")
    print("  per condition:")
    for condition, count in summary["by_condition"].items():
        print(f"    {condition}: {count}")
    return 0


def cmd_replay(args) -> int:
    with open(args.episode, encoding="utf-8") as fh:
        lines = [line for line in fh if line.strip()]
    status = 0
    for line in lines:
        rec = json.loads(line)
        if args.verify:
            ok, why = dataset.replay_record(rec)
            tag = "ok" if ok else f"MISMATCH ({why})"
            print(f"{rec['episode_id']}: {tag}")
            if not ok:
                status = 1
        else:
            print(f"{rec['episode_id']}: frames={len(rec['frames'])} "
                  f"success={rec['success']}")
    return status


def cmd_serve(args) -> int:
    config = service.ServiceConfig()
    if args.config:
        with open(args.config, encoding="utf-8") as fh:
            config = service.ServiceConfig.from_json(json.load(fh))
    service.serve(args.bind, config)
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="modsim",
        description="deterministic task simulator with language-based plan modulation",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p_run = sub.add_parser("run", help="run one episode headless and print its event log")
    p_run.add_argument("--task", required=True, help="task id (see `modsim serve` /tasks)")
    p_run.add_argument("--variation", default="v0", help="variation id (default v0)")
    p_run.add_argument("--seed", type=int, required=True, help="scene seed")
    p_run.add_argument("--script", help="modulation script: JSON file or inline JSON "
                                        '[{"frame": 0, "text": "stack object #2 first"}]')
    p_run.add_argument("--out", help="write the episode record (JSONL) here")
    p_run.add_argument("--turbo", action="store_true",
                       help="run as fast as possible instead of pacing at 20 Hz")
    p_run.add_argument("--v-max", type=float, default=executor.DEFAULT_V_MAX,
                       help="gripper speed limit in m/s (default 1.0)")
    p_run.set_defaults(fn=cmd_run)

    p_gen = sub.add_parser("gen-dataset", help="generate the paired modulation dataset")
    p_gen.add_argument("--config", help="dataset config JSON (defaults to desk scale)")
    p_gen.add_argument("--out", required=True, help="output directory for the JSONL files")
    p_gen.add_argument("--seed", type=int, help="override the config's dataset_seed")
    p_gen.set_defaults(fn=cmd_gen_dataset)

    p_replay = sub.add_parser("replay", help="re-execute recorded episodes")
    p_replay.add_argument("--episode", required=True, help="episode JSONL file")
    p_replay.add_argument("--verify", action="store_true",
                          help="bit-compare the re-executed frames and events")
    p_replay.set_defaults(fn=cmd_replay)

    p_serve = sub.add_parser("serve", help="run the interactive session service")
    p_serve.add_argument("--bind", default="127.0.0.1:8750", help="host:port to listen on")
    p_serve.add_argument("--config", help="service config JSON "
                                          '({"turbo": false, "dataset_dir": "..."})')
    p_serve.set_defaults(fn=cmd_serve)
    return parser


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.fn(args)
    except (executor.InvalidScript, executor.StepCapExceeded) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    except modlang.ParseError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    except Exception as exc:  # unknown task, bad config, io errors
        print(f"error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
