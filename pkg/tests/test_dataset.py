"""Dataset forge: recording, pairing, instruction generation, export."""

import json
import os

import pytest

from modsim import dataset, executor, modlang
from modsim.dataset import (
    CONDITIONS,
    NoTemplates,
    default_script,
    export,
    gen_instructions,
    generate_dataset,
    make_instance,
    record,
    replay_record,
    template_bank,
)


def test_record_baseline_has_no_modulation_events():
    trace = executor.run_episode("stack_cups", "v0", 5)
    rec = record(trace)
    assert rec.script == []
    kinds = {e["kind"] for e in rec.events}
    assert "modulation_applied" not in kinds
    assert rec.success
    assert rec.marks == []


def test_record_modulated_has_exactly_one_applied_event():
    trace = executor.run_episode(
        "stack_cups", "v0", 5, script=[(0, modlang.parse("stack object #2 first"))]
    )
    rec = record(trace)
    applied = [e for e in rec.events if e["kind"] == "modulation_applied"]
    assert len(applied) == 1
    assert len(rec.marks) == 1
    assert rec.augmented_observations[0]["observation"]["augmented_text"] == "stack TARGET first"


def test_replay_reproduces_record():
    trace = executor.run_episode(
        "bring_object", "v0", 3, script=default_script("bring_object", "v0")
    )
    rec = record(trace).to_json()
    ok, why = replay_record(rec)
    assert ok, why
    # a corrupted record is caught
    rec["frames"][5]["gripper"]["pose"][0] += 0.5
    ok, why = replay_record(rec)
    assert not ok and "frames" in why


def test_make_instance_single_entry_single_point():
    inst = make_instance(
        "stack_cups", "v0", 7, [(0, modlang.parse("stack object #2 first"))]
    )
    assert len(inst.modulation_points) == 1
    assert inst.kinds == ["HL"]
    assert inst.baseline_record.seed == inst.modulated_record.seed == 7


def test_make_instance_two_entries_two_points():
    inst = make_instance("stack_cups", "v0", 7, default_script("stack_cups", "v0"))
    assert len(inst.modulation_points) == 2
    assert inst.kinds == ["HL", "LL"]


def test_instance_baseline_prefix_equals_modulated_through_first_point():
    for task, var, seed in (
        ("stack_cups", "v0", 4),
        ("bring_object", "v1", 9),
        ("place_on_shelf", "v0", 2),
    ):
        inst = make_instance(task, var, seed, default_script(task, var))
        first = inst.modulation_points[0]["frame_index"]
        base_frames = inst.baseline_record.frames
        mod_frames = inst.modulated_record.frames
        assert base_frames[: first + 1] == mod_frames[: first + 1]
        assert base_frames[first + 1] != mod_frames[first + 1]


def test_make_instance_requires_applicable_script():
    with pytest.raises(executor.InvalidScript):
        # reorder of the base cup's subtask does not exist -> rejected
        make_instance("stack_cups", "v0", 7, [(0, modlang.parse("stack object #3 first"))])
    with pytest.raises(ValueError):
        make_instance("stack_cups", "v0", 7, [])


def test_gen_instructions_counts_and_distinctness():
    inst = make_instance("stack_cups", "v0", 7, default_script("stack_cups", "v0"))
    three = gen_instructions(inst, ("HL", "HS"), 3, dataset_seed=1)
    assert len(three) == 3
    assert len({i.text for i in three}) == 3
    thirty = gen_instructions(inst, ("HL", "LS"), 30, dataset_seed=1)
    assert len(thirty) == 30
    assert all(i.modulation_kind == "HL" and i.specificity == "LS" for i in thirty)


def test_gen_instructions_parse_back_to_scripted_ir():
    for task, var in (("stack_cups", "v0"), ("bring_object", "v0"), ("place_on_shelf", "v1")):
        script = default_script(task, var)
        inst = make_instance(task, var, 3, script)
        for condition in inst.conditions():
            kind = condition[0]
            scripted_ir = next(ir for _, ir in script if ir.kind == kind)
            for ins in gen_instructions(inst, condition, 12, dataset_seed=5):
                assert modlang.parse(ins.text) == scripted_ir


def test_gen_instructions_seeded_and_deterministic():
    inst = make_instance("stack_cups", "v0", 7, default_script("stack_cups", "v0"))
    a = [i.text for i in gen_instructions(inst, ("LL", "HS"), 10, dataset_seed=3)]
    b = [i.text for i in gen_instructions(inst, ("LL", "HS"), 10, dataset_seed=3)]
    c = [i.text for i in gen_instructions(inst, ("LL", "HS"), 10, dataset_seed=4)]
    assert a == b
    assert a != c


def test_gen_instructions_no_templates_for_missing_kind():
    inst = make_instance(
        "stack_cups", "v0", 7, [(0, modlang.parse("stack object #2 first"))]
    )
    with pytest.raises(NoTemplates):
        gen_instructions(inst, ("LL", "LS"), 5)


def test_template_bank_is_grammar_total():
    # every template across every task/op/specificity parses
    total = 0
    for task in ("stack_cups", "bring_object", "place_on_shelf"):
        for var in ("v0", "v1"):
            for _, ir in default_script(task, var):
                for spec in ("LS", "HS"):
                    for template_id, text in template_bank(task, ir, spec):
                        assert modlang.parse(text) == ir, (template_id, text)
                        total += 1
    assert total >= 100


def test_export_writes_four_jsonl_files_with_counts(tmp_path):
    inst = make_instance("stack_cups", "v0", 7, default_script("stack_cups", "v0"))
    for condition in inst.conditions():
        inst.instructions.extend(gen_instructions(inst, condition, 30, dataset_seed=2))
    out = str(tmp_path / "ds")
    summary = export(
        [inst.baseline_record, inst.modulated_record], [inst], out
    )
    # 1 instance, 4 conditions x 30 -> 120 instruction lines
    assert summary["instructions"] == 120
    assert summary["by_condition"] == {"LL-LS": 30, "LL-HS": 30, "HL-LS": 30, "HL-HS": 30}
    with open(os.path.join(out, "instructions.jsonl")) as fh:
        lines = [json.loads(line) for line in fh]
    assert len(lines) == 120
    for name in ("episodes.jsonl", "instances.jsonl", "manifest.jsonl"):
        assert os.path.exists(os.path.join(out, name))
    with open(os.path.join(out, "manifest.jsonl")) as fh:
        manifest = [json.loads(line) for line in fh]
    assert manifest[0]["modulation_point_frames"] == [0, 6]
    assert not any(name.endswith(".tmp") for name in os.listdir(out))


def test_export_empty_inputs_produce_empty_files(tmp_path):
    out = str(tmp_path / "empty")
    summary = export([], [], out)
    assert summary["episodes"] == 0 and summary["instructions"] == 0
    for name in ("episodes.jsonl", "instances.jsonl", "instructions.jsonl", "manifest.jsonl"):
        path = os.path.join(out, name)
        assert os.path.exists(path)
        assert open(path).read() == ""


def test_export_schema_validation_aborts_write(tmp_path):
    inst = make_instance("stack_cups", "v0", 7, default_script("stack_cups", "v0"))
    inst.instructions.append(dataset.Instruction(
        instruction_id="x", instance_id=inst.instance_id, text="",
        specificity="LS", modulation_kind="HL", template_id="t",
    ))
    out = str(tmp_path / "bad")
    with pytest.raises(dataset.ExportError):
        export([inst.baseline_record, inst.modulated_record], [inst], out)
    assert not os.path.exists(os.path.join(out, "episodes.jsonl"))


def test_exported_instructions_all_reparse(tmp_path):
    cfg = {**dataset.default_config(), "seeds": [1], "instructions_per_condition": 4}
    out = str(tmp_path / "ds")
    generate_dataset(cfg, out)
    with open(os.path.join(out, "instructions.jsonl")) as fh:
        rows = [json.loads(line) for line in fh]
    assert rows
    for row in rows:
        ir = modlang.parse(row["text"])
        assert ir.kind == row["modulation_kind"]


def test_generate_dataset_counts_match_config_arithmetic(tmp_path):
    cfg = {
        "tasks": ["stack_cups", "bring_object"],
        "variations": None,
        "seeds": [1, 2],
        "instructions_per_condition": 5,
        "dataset_seed": 11,
    }
    out = str(tmp_path / "ds")
    summary = generate_dataset(cfg, out)
    # 2 tasks x 2 variations x 2 seeds = 8 instances, 16 episodes
    assert summary["instances"] == 8
    assert summary["episodes"] == 16
    # each instance's script carries one LL and one HL entry -> 4 cells x 5
    assert summary["instructions"] == 8 * 4 * 5
    for condition in ("LL-LS", "LL-HS", "HL-LS", "HL-HS"):
        assert summary["by_condition"][condition] == 8 * 5


def test_pose_seven_tuple_convention():
    trace = executor.run_episode("stack_cups", "v0", 5)
    rec = record(trace).to_json()
    frame = rec["frames"][0]
    assert len(frame["gripper"]["pose"]) == 7
    for obj in frame["objects"]:
        assert len(obj["pose"]) == 7
    # [x, y, z, qw, qx, qy, qz]: identity orientation for tabletop objects
    assert frame["objects"][0]["pose"][3:] == [1.0, 0.0, 0.0, 0.0]


def test_partition_by_seed_is_stable_and_exhaustive():
    instances = []
    for task in ("stack_cups", "bring_object"):
        for seed in range(1, 13):
            instances.append(make_instance(task, "v0", seed, default_script(task, "v0")))
    fractions = {"train": 0.6, "val": 0.2, "test": 0.2}
    split = dataset.partition_by_seed(instances, fractions, salt=3)
    assert sum(len(v) for v in split.values()) == len(instances)
    assert all(split[name] for name in fractions)  # nothing degenerate at this size
    # membership depends only on (task, variation, seed), not list order
    again = dataset.partition_by_seed(list(reversed(instances)), fractions, salt=3)
    for name in fractions:
        assert {i.instance_id for i in split[name]} == {i.instance_id for i in again[name]}
    with pytest.raises(ValueError):
        dataset.partition_by_seed(instances, {"train": 0.5})
