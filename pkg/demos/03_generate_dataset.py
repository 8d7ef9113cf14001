#!/usr/bin/env python3
"""Walkthrough: building the paired modulation dataset.

Generates a miniature dataset (1 seed per task/variation to keep it quick;
bump the config for the full desk scale), then dissects one modulation
instance: the paired episodes, the modulation points, and the four
(LL/HL) x (LS/HS) instruction cells.
"""

import json
import os
import tempfile

from modsim import dataset

out_dir = os.path.join(tempfile.gettempdir(), "modsim-demo-dataset")
config = {**dataset.default_config(), "seeds": [1, 2], "instructions_per_condition": 10}
summary = dataset.generate_dataset(config, out_dir)

print("=== export summary ===")
print(f"  out dir      {out_dir}")
print(f"  instances    {summary['instances']}")
print(f"  episodes     {summary['episodes']}")
print(f"  instructions {summary['instructions']}")
for condition, count in summary["by_condition"].items():
    print(f"    {condition}: {count}")

with open(os.path.join(out_dir, "instances.jsonl")) as fh:
    instances = [json.loads(line) for line in fh]
with open(os.path.join(out_dir, "instructions.jsonl")) as fh:
    instructions = [json.loads(line) for line in fh]
episodes = {}
with open(os.path.join(out_dir, "episodes.jsonl")) as fh:
    for line in fh:
        rec = json.loads(line)
        episodes[rec["episode_id"]] = rec

inst = instances[0]
print(f"\n=== one instance: {inst['instance_id']} ===")
print(f"  baseline : {inst['baseline_episode_id']}")
print(f"  modulated: {inst['modulated_episode_id']}")
for point in inst["modulation_points"]:
    print(f"  modulation point: frame {point['frame_index']} "
          f"({point['kind']} {point['op']}: {point['text']!r})")

base = episodes[inst["baseline_episode_id"]]
mod = episodes[inst["modulated_episode_id"]]
first = inst["modulation_points"][0]["frame_index"]
same = sum(1 for a, b in zip(base["frames"], mod["frames"]) if a == b)
print(f"  frames: baseline={len(base['frames'])} modulated={len(mod['frames'])}; "
      f"identical prefix={same} (first mark at {first})")

print("\n=== instruction samples for this instance ===")
mine = [row for row in instructions if row["instance_id"] == inst["instance_id"]]
for condition in ("LL-LS", "LL-HS", "HL-LS", "HL-HS"):
    cell = [row["text"] for row in mine
            if f"{row['modulation_kind']}-{row['specificity']}" == condition]
    print(f"  {condition} ({len(cell)}):")
    for text in cell[:3]:
        print(f"    - {text!r}")

print("\n=== the crowdsourcing manifest line (two videos + the mark) ===")
with open(os.path.join(out_dir, "manifest.jsonl")) as fh:
    print("  " + fh.readline().strip())
