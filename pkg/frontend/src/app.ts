/**
 * Steering panel wiring: connect, pick a task, watch the labeled views,
 * type modulation commands mid-run, see the parsed IR echoed back and the
 * red exclamation markers appear on the timeline.
 */

import { SessionClient, sessionUrl } from "./client.js";
import {
  ackSummary,
  initialState,
  reduce,
  resetForNewEpisode,
  SessionState,
  timelineExtent,
  timelineMarkers,
  viewDrawList,
} from "./model.js";
import { commandMessage, controlMessage, ServerMessage, startMessage } from "./protocol.js";
import { drawTimeline, drawView } from "./render.js";

const el = {
  status: document.querySelector("#status") as HTMLElement,
  task: document.querySelector("#task") as HTMLSelectElement,
  variation: document.querySelector("#variation") as HTMLSelectElement,
  seed: document.querySelector("#seed") as HTMLInputElement,
  start: document.querySelector("#start") as HTMLButtonElement,
  pause: document.querySelector("#pause") as HTMLButtonElement,
  resume: document.querySelector("#resume") as HTMLButtonElement,
  stop: document.querySelector("#stop") as HTMLButtonElement,
  views: document.querySelector("#views") as HTMLElement,
  timeline: document.querySelector("#timeline") as HTMLCanvasElement,
  command: document.querySelector("#command") as HTMLInputElement,
  sendCommand: document.querySelector("#send-command") as HTMLButtonElement,
  ack: document.querySelector("#ack") as HTMLElement,
  log: document.querySelector("#log") as HTMLElement,
};

let state: SessionState = initialState();
let client: SessionClient | null = null;
const canvases = new Map<string, HTMLCanvasElement>();

function canvasFor(cameraId: string, width: number, height: number): HTMLCanvasElement {
  let canvas = canvases.get(cameraId);
  if (!canvas) {
    const wrap = document.createElement("div");
    wrap.className = "view";
    const title = document.createElement("div");
    title.className = "view-title";
    title.textContent = cameraId;
    canvas = document.createElement("canvas");
    canvas.width = width;
    canvas.height = height;
    wrap.appendChild(title);
    wrap.appendChild(canvas);
    el.views.appendChild(wrap);
    canvases.set(cameraId, canvas);
  }
  return canvas;
}

function repaint() {
  if (state.frame) {
    for (const view of viewDrawList(state.frame, state.targetObjectId)) {
      // canvas size matches the server's camera image size (320x240 rig)
      drawView(canvasFor(view.cameraId, 320, 240), view);
    }
  }
  const extent = timelineExtent(state);
  const progress = state.done ? 1 : 0.0; // the bar itself tracks episode progress
  drawTimeline(
    el.timeline,
    state.done ? 1 : Math.min(1, extent / Math.max(extent + 40, 1)),
    timelineMarkers(state, Math.max(extent, 1)),
  );
  void progress;

  const frame = state.frame;
  if (state.done) {
    el.status.textContent = `done: success=${state.done.success} (${state.done.frames} frames)`;
  } else if (frame) {
    el.status.textContent =
      `frame ${frame.index}  t=${frame.t.toFixed(2)}s  status=${frame.status}` +
      `  subtask=${frame.plan.subtask ?? "-"}`;
  }
  if (state.lastAck) {
    el.ack.textContent = ackSummary(state.lastAck);
  }
  if (state.lastError) {
    el.ack.textContent = `error [${state.lastError.code}] ${state.lastError.message}`;
  }
  el.log.textContent = state.log
    .map((line) => `f${String(line.frameIndex).padStart(4, "0")}  ${line.text}`)
    .join("\n");
  el.log.scrollTop = el.log.scrollHeight;
}

function fillTaskPicker() {
  el.task.innerHTML = "";
  for (const task of state.tasks) {
    const opt = document.createElement("option");
    opt.value = task.task_id;
    opt.textContent = task.task_id;
    el.task.appendChild(opt);
  }
  fillVariationPicker();
}

function fillVariationPicker() {
  const task = state.tasks.find((t) => t.task_id === el.task.value);
  el.variation.innerHTML = "";
  for (const variation of task ? task.variations : []) {
    const opt = document.createElement("option");
    opt.value = variation;
    opt.textContent = variation;
    el.variation.appendChild(opt);
  }
}

function onMessage(msg: ServerMessage) {
  state = reduce(state, msg);
  if (msg.type === "hello") {
    fillTaskPicker();
    el.status.textContent = `connected (protocol v${msg.protocol_version})`;
  }
  repaint();
}

function connect() {
  client = new SessionClient(sessionUrl(), onMessage, () => {
    el.status.textContent = "disconnected";
  });
}

el.task.addEventListener("change", fillVariationPicker);

el.start.addEventListener("click", () => {
  if (!client) return;
  state = resetForNewEpisode(state);
  for (const canvas of canvases.values()) {
    canvas.parentElement?.remove();
  }
  canvases.clear();
  client.send(startMessage(el.task.value, el.variation.value, Number(el.seed.value) || 0));
});

el.pause.addEventListener("click", () => client?.send(controlMessage("pause")));
el.resume.addEventListener("click", () => client?.send(controlMessage("resume")));
el.stop.addEventListener("click", () => client?.send(controlMessage("stop")));

function sendCommand() {
  const text = el.command.value.trim();
  if (!client || !text) return;
  client.send(commandMessage(client.nextCommandId(), text));
  el.command.value = "";
}

el.sendCommand.addEventListener("click", sendCommand);
el.command.addEventListener("keydown", (ev) => {
  if (ev.key === "Enter") sendCommand();
});

connect();
