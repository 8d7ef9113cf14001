"""Episode recording, baseline/modulated pairing, and dataset export.

A modulation instance pairs two episodes that share (task, variation,
seed): a baseline run with an empty script and a modulated run whose
script injected one or more commands. The frames of the two runs are
identical up to the first modulation point, which is the machine analogue
of the two crowdsourcing videos with a red exclamation mark at the moment
behavior deviates.

Instructions are generated from per-(task, op) template banks with seeded
lexical variation, in the four conditions (LL/HL) x (LS/HS); every
generated string parses back to an IR structurally equal to the scripted
one. The export is newline-delimited JSON (episodes.jsonl, instances.jsonl,
instructions.jsonl, manifest.jsonl), schema-checked before anything is
written, and written atomically (temp file + rename).
"""

from __future__ import annotations

import hashlib
import json
import os
from dataclasses import dataclass, field

import jsonschema
import numpy as np

from . import augment as augment_mod
from . import executor, modlang, tasks
from .labels import TargetRef
from .modlang import ModulationIR

SCHEMA_VERSION = 1

CONDITIONS = (("LL", "LS"), ("LL", "HS"), ("HL", "LS"), ("HL", "HS"))


class NoTemplates(Exception):
    """No template bank exists for this (task, op) pair or condition."""


@dataclass
class EpisodeRecord:
    episode_id: str
    task_id: str
    variation_id: str
    seed: int
    script: list  # [{"frame": int, "text": str, "ir": {...}}]
    frames: list
    events: list
    marks: list
    success: bool
    final_status: str
    subtask_status: dict
    labels: dict
    augmented_observations: list
    schema_version: int = SCHEMA_VERSION

    def to_json(self) -> dict:
        return {
            "schema_version": self.schema_version,
            "episode_id": self.episode_id,
            "task_id": self.task_id,
            "variation_id": self.variation_id,
            "seed": self.seed,
            "script": self.script,
            "frames": self.frames,
            "events": self.events,
            "marks": self.marks,
            "success": self.success,
            "final_status": self.final_status,
            "subtask_status": self.subtask_status,
            "labels": self.labels,
            "augmented_observations": self.augmented_observations,
        }


@dataclass
class Instruction:
    instruction_id: str
    instance_id: str
    text: str
    specificity: str       # LS | HS
    modulation_kind: str   # LL | HL
    template_id: str
    difficulty_rating: int | None = None           # populated by real workers only
    could_not_generate_reason: str | None = None

    def to_json(self) -> dict:
        return {
            "schema_version": SCHEMA_VERSION,
            "instruction_id": self.instruction_id,
            "instance_id": self.instance_id,
            "text": self.text,
            "specificity": self.specificity,
            "modulation_kind": self.modulation_kind,
            "template_id": self.template_id,
            "difficulty_rating": self.difficulty_rating,
            "could_not_generate_reason": self.could_not_generate_reason,
        }


@dataclass
class ModulationInstance:
    instance_id: str
    baseline_episode_id: str
    modulated_episode_id: str
    task_id: str
    variation_id: str
    seed: int
    modulation_points: list  # [{"frame_index", "cursor", "kind", "op", "text"}]
    kinds: list              # which of LL/HL this instance's script exercises
    instructions: list = field(default_factory=list)
    baseline_record: EpisodeRecord | None = None
    modulated_record: EpisodeRecord | None = None

    def conditions(self) -> list[tuple[str, str]]:
        return [(k, s) for k, s in CONDITIONS if k in self.kinds]

    def to_json(self) -> dict:
        return {
            "schema_version": SCHEMA_VERSION,
            "instance_id": self.instance_id,
            "baseline_episode_id": self.baseline_episode_id,
            "modulated_episode_id": self.modulated_episode_id,
            "task_id": self.task_id,
            "variation_id": self.variation_id,
            "seed": self.seed,
            "modulation_points": self.modulation_points,
            "kinds": self.kinds,
            "conditions": ["-".join(c) for c in self.conditions()],
        }


def _script_json(script: list[tuple[int, ModulationIR]]) -> list:
    return [{"frame": f, "text": ir.raw_text, "ir": ir.to_json()} for f, ir in script]


def script_from_json(data: list) -> list[tuple[int, ModulationIR]]:
    return [(entry["frame"], ModulationIR.from_json(entry["ir"])) for entry in data]


def _script_digest(script: list[tuple[int, ModulationIR]]) -> str:
    if not script:
        return "baseline"
    blob = json.dumps(_script_json(script), sort_keys=True).encode()
    return "mod-" + hashlib.sha256(blob).hexdigest()[:8]


def episode_id_for(task_id: str, variation_id: str, seed: int,
                   script: list[tuple[int, ModulationIR]]) -> str:
    return f"{task_id}-{variation_id}-s{seed}-{_script_digest(script)}"


def record(trace: executor.EpisodeTrace) -> EpisodeRecord:
    """Lossless, JSON-ready serialization of a finished trace."""
    observations = []
    for mod in trace.modulations:
        try:
            obs = augment_mod.augment(
                mod.ir.raw_text, mod.scene_before, trace.registry, mod.context_id
            )
            obs_json = obs.to_json()
        except modlang.ParseError as exc:
            obs_json = {"error": str(exc)}
        observations.append({"frame_index": mod.frame_index, "observation": obs_json})
    return EpisodeRecord(
        episode_id=episode_id_for(trace.task_id, trace.variation_id, trace.seed, trace.script),
        task_id=trace.task_id,
        variation_id=trace.variation_id,
        seed=trace.seed,
        script=_script_json(trace.script),
        frames=[f.to_json() for f in trace.frames],
        events=[e.to_json() for e in trace.events],
        marks=[m.to_json() for m in trace.marks],
        success=trace.success,
        final_status=trace.final_status,
        subtask_status=trace.subtask_status,
        labels=dict(trace.registry.by_object),
        augmented_observations=observations,
    )


def replay_record(rec_json: dict) -> tuple[bool, str]:
    """Re-execute a recorded episode and bit-compare frames and events."""
    script = script_from_json(rec_json["script"])
    trace = executor.run_episode(
        rec_json["task_id"], rec_json["variation_id"], rec_json["seed"], script
    )
    fresh = record(trace).to_json()
    for key in ("frames", "events", "marks", "success", "final_status"):
        if fresh[key] != rec_json[key]:
            return False, f"mismatch in {key}"
    return True, ""


def make_instance(
    task_id: str,
    variation_id: str,
    seed: int,
    script: list[tuple[int, ModulationIR]],
) -> ModulationInstance:
    """Run the baseline and modulated episodes and pair them.

    Every script entry must actually apply (a rejection makes the script
    invalid for this episode and raises).
    """
    if not script:
        raise ValueError("make_instance needs a non-empty modulation script")
    baseline = executor.run_episode(task_id, variation_id, seed, [])
    modulated = executor.run_episode(task_id, variation_id, seed, script)
    if len(modulated.marks) != len(script):
        rejected = [e.payload for e in modulated.events if e.kind == "modulation_rejected"]
        raise executor.InvalidScript(f"script entries were rejected: {rejected}")
    base_rec = record(baseline)
    mod_rec = record(modulated)
    points = [
        {
            "frame_index": mark.frame_index,
            "cursor": mark.cursor,
            "kind": ir.kind,
            "op": ir.op,
            "text": ir.raw_text,
            "ir": ir.to_json(),
        }
        for mark, (_, ir) in zip(modulated.marks, script)
    ]
    kinds = sorted({ir.kind for _, ir in script})
    return ModulationInstance(
        instance_id=f"{task_id}-{variation_id}-s{seed}-{_script_digest(script)[4:]}",
        baseline_episode_id=base_rec.episode_id,
        modulated_episode_id=mod_rec.episode_id,
        task_id=task_id,
        variation_id=variation_id,
        seed=seed,
        modulation_points=points,
        kinds=kinds,
        baseline_record=base_rec,
        modulated_record=mod_rec,
    )


# --- default per-task modulation scripts ---------------------------------------

def default_script(task_id: str, variation_id: str) -> list[tuple[int, ModulationIR]]:
    """The stock script for dataset generation: one LL plus one HL command."""
    spec = tasks.get_task(task_id)
    var = spec.variation(variation_id)
    if task_id == "stack_cups":
        return [
            (0, modlang.make_reorder(TargetRef.by_label("object #2"), "first")),
            (6, modlang.make_set_speed(0.3)),
        ]
    if task_id == "bring_object":
        old_color = var.bindings["target_bottle"][0]
        new_color = var.bindings["other_bottle"][0]
        return [
            (0, modlang.make_substitute(
                new=TargetRef.by_attributes(color=new_color),
                old=TargetRef.by_attributes(color=old_color),
            )),
            (4, modlang.make_avoid(TargetRef.by_attributes(shape="plate"))),
        ]
    if task_id == "place_on_shelf":
        return [
            (0, modlang.make_set_speed(0.5)),
            (6, modlang.make_skip(TargetRef.by_label("object #2"))),
        ]
    raise tasks.UnknownTask(task_id)


# --- instruction templates ------------------------------------------------------

_PUNCT = ("", "!", ".")
_SPEED_WORD = {value: word for word, value in modlang.SPEED_PRESETS.items()}
_HS_TAILS = (
    "to move it",
    "when you move it",
    "while you carry it",
    "so it does not spill",
    "and take your time",
    "when moving the object",
    "with it please",
    "the whole way",
)


def _surfaces(ref: TargetRef, terse: bool) -> list[str]:
    """Grammar-equivalent surface forms of a reference."""
    if ref.kind == "by_label":
        k = ref.label.split("#", 1)[1]
        return [f"object {k}", f"object #{k}"] if terse else [f"object #{k}"]
    if ref.kind == "other_of":
        return [f"the other {ref.shape}"]
    if ref.shape is None:
        return [f"the {ref.color}"] if terse else [f"the {ref.color} one"]
    if ref.color is None:
        return [ref.shape, f"the {ref.shape}"] if terse else [f"the {ref.shape}"]
    return [f"{ref.color} {ref.shape}"] if terse else [f"the {ref.color} {ref.shape}"]


def template_bank(task_id: str, ir: ModulationIR, specificity: str) -> list[tuple[str, str]]:
    """All (template_id, text) surface variants for one scripted command."""
    terse = specificity == "LS"
    out: list[tuple[str, str]] = []

    def add(idx: int, text: str):
        out.append((f"{task_id}-{ir.op}-{specificity}-t{idx:03d}", text))

    i = 0
    if ir.op == modlang.OP_REORDER:
        verbs = ("",) if terse else tuple(f"{v} " for v in modlang.VERBS)
        for verb in verbs:
            for surface in _surfaces(ir.target, terse):
                for p in _PUNCT:
                    add(i, f"{verb}{surface} {ir.position}{p}")
                    i += 1
    elif ir.op == modlang.OP_SUBSTITUTE:
        commas = (" ",) if terse else (", ", " ")
        for old_s in _surfaces(ir.old, terse):
            for new_s in _surfaces(ir.new, terse):
                for comma in commas:
                    for conj in ("but", "use"):
                        for p in _PUNCT:
                            add(i, f"not {old_s}{comma}{conj} {new_s}{p}")
                            i += 1
    elif ir.op == modlang.OP_SET_SPEED:
        word = _SPEED_WORD.get(ir.scale)
        if word is None:
            add(0, f"speed {ir.scale}")
            return out
        if terse:
            for form in (word, f"be {word}"):
                for p in _PUNCT:
                    add(i, f"{form}{p}")
                    i += 1
        else:
            for tail in _HS_TAILS:
                for p in _PUNCT:
                    add(i, f"be {word} {tail}{p}")
                    i += 1
    elif ir.op == modlang.OP_AVOID:
        for surface in _surfaces(ir.target, terse):
            for p in _PUNCT:
                add(i, f"avoid {surface}{p}")
                i += 1
    elif ir.op == modlang.OP_SKIP and ir.target is not None:
        for surface in _surfaces(ir.target, terse):
            for p in _PUNCT:
                add(i, f"skip {surface}{p}")
                i += 1
    elif ir.op == modlang.OP_SKIP:
        for p in _PUNCT:
            add(i, f"skip {ir.subtask}{p}")
            i += 1
    elif ir.op == modlang.OP_ABORT:
        for form in ("stop", "abort"):
            for p in _PUNCT:
                add(i, f"{form}{p}")
                i += 1
    if not out:
        raise NoTemplates(f"no templates for ({task_id}, {ir.op})")
    return out


def _condition_seed(dataset_seed: int, instance_id: str, condition: tuple[str, str]) -> int:
    blob = f"{dataset_seed}:{instance_id}:{condition[0]}:{condition[1]}".encode()
    return int.from_bytes(hashlib.sha256(blob).digest()[:8], "big")


def gen_instructions(
    instance: ModulationInstance,
    condition: tuple[str, str],
    n: int,
    dataset_seed: int = 0,
) -> list[Instruction]:
    """n seeded instruction samples for one (kind, specificity) cell.

    Sampling is without replacement while the bank lasts, then with
    replacement; every text is checked to re-parse to the scripted IR.
    """
    kind, specificity = condition
    if n < 1:
        raise ValueError("n must be >= 1")
    scripted = [p for p in instance.modulation_points if p["kind"] == kind]
    if not scripted:
        raise NoTemplates(f"instance {instance.instance_id} has no {kind} modulation")
    ir = modlang.ModulationIR.from_json(scripted[0]["ir"])
    bank = template_bank(instance.task_id, ir, specificity)
    rng = np.random.Generator(np.random.PCG64(_condition_seed(dataset_seed, instance.instance_id, condition)))
    order = list(rng.permutation(len(bank)))
    picks = [order[i] if i < len(bank) else int(rng.integers(0, len(bank))) for i in range(n)]
    instructions = []
    for i, pick in enumerate(picks):
        template_id, text = bank[pick]
        parsed = modlang.parse(text)
        if parsed != ir:
            raise AssertionError(
                f"template {template_id!r} text {text!r} parses to a different IR"
            )
        instructions.append(Instruction(
            instruction_id=f"{instance.instance_id}-{kind}-{specificity}-{i:03d}",
            instance_id=instance.instance_id,
            text=text,
            specificity=specificity,
            modulation_kind=kind,
            template_id=template_id,
        ))
    return instructions


# --- export ---------------------------------------------------------------------

_POSE7_SCHEMA = {"type": "array", "items": {"type": "number"}, "minItems": 7, "maxItems": 7}

EPISODE_SCHEMA = {
    "type": "object",
    "required": ["schema_version", "episode_id", "task_id", "variation_id", "seed",
                 "script", "frames", "events", "success", "final_status", "labels"],
    "properties": {
        "schema_version": {"const": SCHEMA_VERSION},
        "episode_id": {"type": "string"},
        "task_id": {"type": "string"},
        "variation_id": {"type": "string"},
        "seed": {"type": "integer"},
        "script": {"type": "array"},
        "frames": {
            "type": "array",
            "items": {
                "type": "object",
                "required": ["index", "t", "status", "gripper", "objects", "views"],
                "properties": {
                    "index": {"type": "integer", "minimum": 0},
                    "t": {"type": "number", "minimum": 0},
                    "gripper": {
                        "type": "object",
                        "required": ["pose", "aperture"],
                        "properties": {"pose": _POSE7_SCHEMA},
                    },
                },
            },
        },
        "events": {"type": "array"},
        "success": {"type": "boolean"},
        "final_status": {"type": "string"},
        "labels": {"type": "object"},
    },
}

INSTANCE_SCHEMA = {
    "type": "object",
    "required": ["schema_version", "instance_id", "baseline_episode_id",
                 "modulated_episode_id", "task_id", "variation_id", "seed",
                 "modulation_points", "kinds", "conditions"],
    "properties": {
        "schema_version": {"const": SCHEMA_VERSION},
        "modulation_points": {
            "type": "array",
            "minItems": 1,
            "items": {
                "type": "object",
                "required": ["frame_index", "cursor", "kind", "op", "text"],
                "properties": {"kind": {"enum": ["LL", "HL"]}},
            },
        },
    },
}

INSTRUCTION_SCHEMA = {
    "type": "object",
    "required": ["schema_version", "instruction_id", "instance_id", "text",
                 "specificity", "modulation_kind", "template_id"],
    "properties": {
        "schema_version": {"const": SCHEMA_VERSION},
        "specificity": {"enum": ["LS", "HS"]},
        "modulation_kind": {"enum": ["LL", "HL"]},
        "text": {"type": "string", "minLength": 1},
    },
}

MANIFEST_SCHEMA = {
    "type": "object",
    "required": ["schema_version", "instance_id", "baseline_episode_id",
                 "modulated_episode_id", "modulation_point_frames"],
    "properties": {
        "schema_version": {"const": SCHEMA_VERSION},
        "modulation_point_frames": {
            "type": "array", "items": {"type": "integer", "minimum": 0}, "minItems": 1,
        },
    },
}


class ExportError(Exception):
    pass


def _write_jsonl_atomic(path: str, rows: list[dict]):
    tmp = path + ".tmp"
    with open(tmp, "w", encoding="utf-8") as fh:
        for row in rows:
            fh.write(json.dumps(row, ensure_ascii=False) + "\n")
    os.replace(tmp, path)


def export(
    records: list[EpisodeRecord],
    instances: list[ModulationInstance],
    out_dir: str,
) -> dict:
    """Validate and write the four JSONL files; returns per-condition counts.

    Instructions are read from each instance's attached list. Validation
    failures abort before any file is touched.
    """
    episode_rows = [r.to_json() for r in records]
    instance_rows = [inst.to_json() for inst in instances]
    instruction_rows = [ins.to_json() for inst in instances for ins in inst.instructions]
    manifest_rows = [
        {
            "schema_version": SCHEMA_VERSION,
            "instance_id": inst.instance_id,
            "baseline_episode_id": inst.baseline_episode_id,
            "modulated_episode_id": inst.modulated_episode_id,
            "modulation_point_frames": [p["frame_index"] for p in inst.modulation_points],
        }
        for inst in instances
    ]
    for rows, schema, name in (
        (episode_rows, EPISODE_SCHEMA, "episodes"),
        (instance_rows, INSTANCE_SCHEMA, "instances"),
        (instruction_rows, INSTRUCTION_SCHEMA, "instructions"),
        (manifest_rows, MANIFEST_SCHEMA, "manifest"),
    ):
        for row in rows:
            try:
                jsonschema.validate(row, schema)
            except jsonschema.ValidationError as exc:
                raise ExportError(f"{name} row failed schema validation: {exc.message}") from exc

    os.makedirs(out_dir, exist_ok=True)
    _write_jsonl_atomic(os.path.join(out_dir, "episodes.jsonl"), episode_rows)
    _write_jsonl_atomic(os.path.join(out_dir, "instances.jsonl"), instance_rows)
    _write_jsonl_atomic(os.path.join(out_dir, "instructions.jsonl"), instruction_rows)
    _write_jsonl_atomic(os.path.join(out_dir, "manifest.jsonl"), manifest_rows)

    counts: dict[str, int] = {"-".join(c): 0 for c in CONDITIONS}
    for row in instruction_rows:
        counts[f"{row['modulation_kind']}-{row['specificity']}"] += 1
    return {
        "episodes": len(episode_rows),
        "instances": len(instance_rows),
        "instructions": len(instruction_rows),
        "by_condition": counts,
    }


def partition_by_seed(
    instances: list[ModulationInstance],
    fractions: dict[str, float],
    salt: int = 0,
) -> dict[str, list[ModulationInstance]]:
    """Deterministic split keyed on each instance's episode seed.

    An instance lands in the same split regardless of list order or how
    many other instances exist, so regenerated datasets partition stably.
    """
    if abs(sum(fractions.values()) - 1.0) > 1e-9:
        raise ValueError("fractions must sum to 1")
    names = list(fractions)
    bounds = []
    acc = 0.0
    for name in names:
        acc += fractions[name]
        bounds.append(acc)
    out: dict[str, list[ModulationInstance]] = {name: [] for name in names}
    for inst in instances:
        blob = f"{salt}:{inst.task_id}:{inst.variation_id}:{inst.seed}".encode()
        u = int.from_bytes(hashlib.sha256(blob).digest()[:8], "big") / 2**64
        for name, bound in zip(names, bounds):
            if u < bound or name == names[-1]:
                out[name].append(inst)
                break
    return out


# --- end-to-end pipeline ----------------------------------------------------------

def default_config() -> dict:
    return {
        "tasks": ["stack_cups", "bring_object", "place_on_shelf"],
        "variations": None,  # null means every variation of each task
        "seeds": [1, 2, 3, 4, 5],
        "instructions_per_condition": 30,
        "dataset_seed": 7,
    }


def generate_dataset(config: dict, out_dir: str) -> dict:
    """Run every (task, variation, seed) with its default script and export."""
    cfg = {**default_config(), **config}
    records: list[EpisodeRecord] = []
    instances: list[ModulationInstance] = []
    for task_id in cfg["tasks"]:
        spec = tasks.get_task(task_id)
        variations = cfg["variations"] or [v.variation_id for v in spec.variations]
        if isinstance(variations, dict):
            variations = variations[task_id]
        for variation_id in variations:
            for seed in cfg["seeds"]:
                script = default_script(task_id, variation_id)
                inst = make_instance(task_id, variation_id, seed, script)
                for condition in inst.conditions():
                    inst.instructions.extend(gen_instructions(
                        inst, condition, cfg["instructions_per_condition"],
                        dataset_seed=cfg["dataset_seed"],
                    ))
                records.extend([inst.baseline_record, inst.modulated_record])
                instances.append(inst)
    summary = export(records, instances, out_dir)
    summary["config"] = cfg
    return summary
