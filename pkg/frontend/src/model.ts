/**
 * Pure view-model for the steering panel.
 *
 * Everything the canvases and widgets show is derived here from the raw
 * wire messages, with no DOM access, so the rendering rules are unit
 * testable: labels pass through byte-for-byte (never re-generated client
 * side), timeline markers sit exactly at the modulation_applied frame
 * indices, and the TARGET tint follows the ack's grounded object id.
 */

import type {
  AckMsg,
  DoneMsg,
  ErrorMsg,
  EventMsg,
  FrameMsg,
  HelloMsg,
  ServerMessage,
  TaskInfo,
} from "./protocol.js";

export interface LogLine {
  frameIndex: number;
  text: string;
}

export interface SessionState {
  tasks: TaskInfo[];
  frame: FrameMsg | null;
  lastAck: AckMsg | null;
  lastError: ErrorMsg | null;
  done: DoneMsg | null;
  events: EventMsg[];
  /** object_id to tint as TARGET in every view */
  targetObjectId: string | null;
  log: LogLine[];
}

export function initialState(): SessionState {
  return {
    tasks: [],
    frame: null,
    lastAck: null,
    lastError: null,
    done: null,
    events: [],
    targetObjectId: null,
    log: [],
  };
}

function describeEvent(ev: EventMsg): string {
  const p = ev.payload as Record<string, unknown>;
  switch (ev.kind) {
    case "subtask_completed":
      return `subtask done: ${p.subtask} (target ${p.target_label ?? "-"})`;
    case "grasped":
      return `grasped ${p.label}`;
    case "released":
      return `released ${p.label}`;
    case "modulation_applied": {
      const ir = p.ir as Record<string, unknown>;
      return `modulation applied: "${ir.raw_text}"`;
    }
    case "modulation_rejected": {
      const ir = p.ir as Record<string, unknown>;
      return `modulation rejected (${p.reason}): "${ir.raw_text}"`;
    }
    case "task_done":
      return "task done";
    case "task_failed":
      return `task failed (${p.reason})`;
    default:
      return ev.kind;
  }
}

/** Fold one server message into the session state (pure). */
export function reduce(state: SessionState, msg: ServerMessage): SessionState {
  switch (msg.type) {
    case "hello":
      return { ...initialState(), tasks: msg.tasks };
    case "frame":
      return { ...state, frame: msg };
    case "ack":
      return {
        ...state,
        lastAck: msg,
        targetObjectId: msg.target_object_id ?? state.targetObjectId,
      };
    case "event":
      return {
        ...state,
        events: [...state.events, msg],
        log: [...state.log, { frameIndex: msg.frame_index, text: describeEvent(msg) }],
      };
    case "error":
      return { ...state, lastError: msg };
    case "done":
      return { ...state, done: msg };
  }
}

export function resetForNewEpisode(state: SessionState): SessionState {
  return { ...initialState(), tasks: state.tasks };
}

// --- canvas draw model ----------------------------------------------------

export interface BoxDraw {
  /** rendered verbatim from the wire; never reformatted */
  label: string;
  objectId: string;
  bbox: [number, number, number, number];
  isTarget: boolean;
}

export interface ViewDraw {
  cameraId: string;
  boxes: BoxDraw[];
  gripperPx: [number, number] | null;
}

export function viewDrawList(frame: FrameMsg, targetObjectId: string | null): ViewDraw[] {
  return frame.views.map((view) => ({
    cameraId: view.camera_id,
    boxes: view.overlays.map((o) => ({
      label: o.label,
      objectId: o.object_id,
      bbox: o.bbox,
      isTarget: targetObjectId !== null && o.object_id === targetObjectId,
    })),
    gripperPx: view.gripper_px,
  }));
}

// --- timeline ---------------------------------------------------------------

export interface TimelineMarker {
  frameIndex: number;
  /** horizontal position in [0, 1] along the timeline */
  position: number;
}

/**
 * Red exclamation markers: one per applied modulation, placed at exactly
 * the frame index reported by the modulation_applied event.
 */
export function timelineMarkers(state: SessionState, totalFrames: number): TimelineMarker[] {
  const span = Math.max(totalFrames, 1);
  return state.events
    .filter((e) => e.kind === "modulation_applied")
    .map((e) => {
      const mark = (e.payload as { mark: { frame_index: number } }).mark;
      return { frameIndex: mark.frame_index, position: mark.frame_index / span };
    });
}

export function timelineExtent(state: SessionState): number {
  if (state.done) return state.done.frames;
  return state.frame ? state.frame.index : 0;
}

// --- ack display --------------------------------------------------------------

/** Human-readable echo of the parsed IR, shown for transparency. */
export function ackSummary(ack: AckMsg): string {
  const ir = ack.parsed as Record<string, unknown>;
  const parts = [`${ir.kind} ${ir.op}`];
  if (ir.target) parts.push(`target=${JSON.stringify(ir.target)}`);
  if (ir.old) parts.push(`old=${JSON.stringify(ir.old)}`);
  if (ir.new) parts.push(`new=${JSON.stringify(ir.new)}`);
  if (ir.scale !== undefined) parts.push(`scale=${ir.scale}`);
  if (ir.position) parts.push(`position=${ir.position}`);
  if (ir.subtask) parts.push(`subtask=${ir.subtask}`);
  if (ack.target_label) parts.push(`grounded to ${ack.target_label}`);
  return parts.join("  ");
}
