/**
 * View-model rules replayed over the golden transcript: byte-equal labels,
 * marker placement at the modulation frame, TARGET tinting, log building.
 */

import { readFileSync } from "node:fs";
import { join } from "node:path";
import { describe, expect, it } from "vitest";

import {
  ackSummary,
  initialState,
  reduce,
  SessionState,
  timelineExtent,
  timelineMarkers,
  viewDrawList,
} from "../src/model";
import { parseServerLine, ServerMessage } from "../src/protocol";

const transcript: ServerMessage[] = readFileSync(
  join(__dirname, "golden", "reorder_session_server.jsonl"),
  "utf-8",
)
  .split("\n")
  .filter((line) => line.trim().length > 0)
  .map(parseServerLine);

function replay(): SessionState {
  let state = initialState();
  for (const msg of transcript) {
    state = reduce(state, msg);
  }
  return state;
}

describe("replaying the golden session", () => {
  const state = replay();

  it("ends done and successful with the full event log", () => {
    expect(state.done?.success).toBe(true);
    expect(state.events.length).toBeGreaterThan(10);
    expect(state.log.length).toBeGreaterThan(0);
  });

  it("renders labels byte-equal to the wire, no client-side relabeling", () => {
    let checked = 0;
    let rendered = initialState();
    for (const msg of transcript) {
      rendered = reduce(rendered, msg);
      if (msg.type !== "frame") continue;
      const draws = viewDrawList(msg, rendered.targetObjectId);
      for (const [v, view] of msg.views.entries()) {
        for (const [i, overlay] of view.overlays.entries()) {
          expect(draws[v]!.boxes[i]!.label).toBe(overlay.label);
          checked += 1;
        }
      }
    }
    expect(checked).toBeGreaterThan(100);
  });

  it("places the timeline marker exactly at the modulation_applied frame", () => {
    const applied = state.events.find((e) => e.kind === "modulation_applied");
    if (!applied) throw new Error("golden transcript has no modulation");
    const expectedFrame = (applied.payload as { mark: { frame_index: number } }).mark
      .frame_index;
    const markers = timelineMarkers(state, timelineExtent(state));
    expect(markers).toHaveLength(1);
    expect(markers[0]!.frameIndex).toBe(expectedFrame);
    expect(markers[0]!.position).toBeCloseTo(
      expectedFrame / Math.max(timelineExtent(state), 1),
      12,
    );
  });

  it("tints the acked target object in every view", () => {
    expect(state.targetObjectId).toBe("item-2");
    const lastFrame = state.frame!;
    for (const view of viewDrawList(lastFrame, state.targetObjectId)) {
      const targets = view.boxes.filter((b) => b.isTarget);
      expect(targets).toHaveLength(1);
      expect(targets[0]!.objectId).toBe("item-2");
      expect(targets[0]!.label).toBe("object #2");
    }
  });

  it("summarizes the ack for the transparency readout", () => {
    const summary = ackSummary(state.lastAck!);
    expect(summary).toContain("HL reorder");
    expect(summary).toContain("grounded to object #2");
  });

  it("logs subtasks in the modulated order (object #2's subtask first)", () => {
    const subtasks = state.events
      .filter((e) => e.kind === "subtask_completed")
      .map((e) => (e.payload as { subtask: string }).subtask);
    expect(subtasks).toEqual(["stack_second_cup", "stack_first_cup"]);
  });

  it("exposes the gripper marker position per view", () => {
    const frame = state.frame!;
    for (const view of viewDrawList(frame, null)) {
      expect(view.gripperPx).not.toBeNull();
      const [u, v] = view.gripperPx!;
      expect(Number.isFinite(u) && Number.isFinite(v)).toBe(true);
    }
  });
});

describe("reducer details", () => {
  it("hello resets state but keeps nothing stale", () => {
    const hello = transcript[0]!;
    let state = replay();
    state = reduce(state, hello);
    expect(state.frame).toBeNull();
    expect(state.events).toHaveLength(0);
    expect(state.tasks.length).toBe(3);
  });

  it("an error message lands in lastError without clobbering frames", () => {
    let state = replay();
    const before = state.frame;
    state = reduce(state, {
      type: "error",
      code: "parse_error",
      message: "unknown word 'froob'",
    });
    expect(state.lastError?.code).toBe("parse_error");
    expect(state.frame).toBe(before);
  });
});
