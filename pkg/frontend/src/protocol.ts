/**
 * Wire protocol for the modsim session service.
 *
 * Messages are newline-delimited JSON riding WebSocket text frames; one
 * JSON object per line, possibly several lines per WebSocket message.
 * The zod schemas below are the client's contract with the server; the
 * tests validate recorded golden transcripts against them, and every
 * outgoing message is built through the helpers here so the UI cannot
 * send anything off-protocol.
 */

import { z } from "zod";

export const PROTOCOL_VERSION = 1;

// --- server -> client ---------------------------------------------------

export const BBoxSchema = z.tuple([z.number(), z.number(), z.number(), z.number()]);

export const OverlaySchema = z.object({
  label: z.string().regex(/^object #[1-9][0-9]*$/),
  object_id: z.string(),
  bbox: BBoxSchema,
});

export const ViewSchema = z.object({
  camera_id: z.string(),
  overlays: z.array(OverlaySchema),
  gripper_px: z.tuple([z.number(), z.number()]).nullable(),
});

export const MarkSchema = z.object({
  frame_index: z.number().int().nonnegative(),
  cursor: z.number().int().nonnegative(),
});

export const FrameSchema = z.object({
  type: z.literal("frame"),
  index: z.number().int().nonnegative(),
  t: z.number().nonnegative(),
  status: z.string(),
  gripper: z.object({
    pose: z.array(z.number()).length(7),
    aperture: z.enum(["open", "closed"]),
    held: z.string().nullable(),
  }),
  objects: z.array(z.object({ object_id: z.string(), pose: z.array(z.number()).length(7) })),
  views: z.array(ViewSchema),
  marks: z.array(MarkSchema),
  plan: z.object({
    cursor: z.number().int().nonnegative(),
    length: z.number().int().nonnegative(),
    subtask: z.string().nullable(),
    skipped: z.array(z.string()),
  }),
});

export const TaskInfoSchema = z.object({
  task_id: z.string(),
  description: z.string(),
  variations: z.array(z.string()),
  subtasks: z.array(z.string()),
});

export const HelloSchema = z.object({
  type: z.literal("hello"),
  protocol_version: z.number().int(),
  tasks: z.array(TaskInfoSchema),
});

export const AckSchema = z.object({
  type: z.literal("ack"),
  command_id: z.string().nullable(),
  parsed: z.record(z.string(), z.unknown()),
  target_object_id: z.string().optional(),
  target_label: z.string().optional(),
});

export const EventSchema = z.object({
  type: z.literal("event"),
  kind: z.string(),
  t: z.number(),
  frame_index: z.number().int().nonnegative(),
  payload: z.record(z.string(), z.unknown()),
});

export const ErrorSchema = z.object({
  type: z.literal("error"),
  code: z.string(),
  message: z.string(),
  command_id: z.string().optional(),
});

export const DoneSchema = z.object({
  type: z.literal("done"),
  success: z.boolean(),
  frames: z.number().int().nonnegative(),
});

export const ServerMessageSchema = z.discriminatedUnion("type", [
  HelloSchema,
  FrameSchema,
  AckSchema,
  EventSchema,
  ErrorSchema,
  DoneSchema,
]);

export type Overlay = z.infer<typeof OverlaySchema>;
export type View = z.infer<typeof ViewSchema>;
export type Mark = z.infer<typeof MarkSchema>;
export type FrameMsg = z.infer<typeof FrameSchema>;
export type HelloMsg = z.infer<typeof HelloSchema>;
export type AckMsg = z.infer<typeof AckSchema>;
export type EventMsg = z.infer<typeof EventSchema>;
export type ErrorMsg = z.infer<typeof ErrorSchema>;
export type DoneMsg = z.infer<typeof DoneSchema>;
export type ServerMessage = z.infer<typeof ServerMessageSchema>;
export type TaskInfo = z.infer<typeof TaskInfoSchema>;

export function parseServerLine(line: string): ServerMessage {
  return ServerMessageSchema.parse(JSON.parse(line));
}

// --- client -> server ---------------------------------------------------

export const StartSchema = z
  .object({
    type: z.literal("start"),
    task: z.string().min(1),
    variation: z.string().min(1),
    seed: z.number().int().nonnegative(),
  })
  .strict();

export const CommandSchema = z
  .object({
    type: z.literal("command"),
    command_id: z.string().min(1),
    text: z.string().min(1),
  })
  .strict();

export const ControlSchema = z
  .object({ type: z.enum(["pause", "resume", "stop"]) })
  .strict();

export const ClientMessageSchema = z.union([StartSchema, CommandSchema, ControlSchema]);
export type ClientMessage = z.infer<typeof ClientMessageSchema>;

/** Every outgoing message funnels through here; throws if off-protocol. */
export function encodeClientMessage(msg: ClientMessage): string {
  return JSON.stringify(ClientMessageSchema.parse(msg)) + "\n";
}

export function startMessage(task: string, variation: string, seed: number): ClientMessage {
  return { type: "start", task, variation, seed };
}

export function commandMessage(commandId: string, text: string): ClientMessage {
  return { type: "command", command_id: commandId, text };
}

export function controlMessage(kind: "pause" | "resume" | "stop"): ClientMessage {
  return { type: kind };
}
