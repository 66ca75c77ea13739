// App bootstrap: episode list, timeline canvas with draggable boundaries,
// instruction editor, approval flow, keyboard shortcuts.

import { ApiClient } from "./api.js";
import { TimeScale, chipLayout, formatTime, hitBoundary } from "./scale.js";
import { TimelineStore } from "./state.js";
import { DragPreview, defaultLayout, renderTimeline } from "./timeline.js";
import type { EpisodeSummary } from "./types.js";

const api = new ApiClient("");

const listEl = document.getElementById("episode-list") as HTMLUListElement;
const bannerEl = document.getElementById("banner") as HTMLDivElement;
const titleEl = document.getElementById("episode-title") as HTMLDivElement;
const canvas = document.getElementById("timeline") as HTMLCanvasElement;
const annEl = document.getElementById("annotations") as HTMLDivElement;
const approveBtn = document.getElementById("approve") as HTMLButtonElement;
const statusEl = document.getElementById("status") as HTMLDivElement;

let store: TimelineStore | null = null;
let drag: DragPreview | null = null;

function banner(message: string, retry?: () => void): void {
  bannerEl.innerHTML = "";
  if (!message) {
    bannerEl.classList.add("hidden");
    return;
  }
  bannerEl.classList.remove("hidden");
  bannerEl.textContent = message;
  if (retry) {
    const btn = document.createElement("button");
    btn.textContent = "retry";
    btn.onclick = retry;
    bannerEl.appendChild(btn);
  }
}

async function refreshEpisodeList(): Promise<void> {
  try {
    const episodes = await api.listEpisodes();
    banner("");
    listEl.innerHTML = "";
    episodes.forEach((ep: EpisodeSummary) => {
      const li = document.createElement("li");
      const btn = document.createElement("button");
      btn.textContent = `${ep.id} — ${ep.task} (${ep.n_annotations} subtasks${ep.approved ? ", approved" : ""})`;
      btn.onclick = () => openEpisode(ep.id);
      li.appendChild(btn);
      listEl.appendChild(li);
    });
  } catch {
    banner("review service unreachable", refreshEpisodeList);
  }
}

function scaleFor(store: TimelineStore): TimeScale {
  return new TimeScale(store.signals?.duration_s ?? 1, canvas.width);
}

function redraw(): void {
  if (!store) return;
  const s = store;
  if (s.status === "not-found") {
    titleEl.textContent = `episode not found`;
    return;
  }
  if (s.status === "error") {
    banner(s.lastError?.message ?? "load failed", () => s.load());
    return;
  }
  if (s.status !== "ready" || !s.signals) return;

  titleEl.textContent = `${s.episodeId}${s.approved ? " — APPROVED (read-only)" : ""}`;
  const scale = scaleFor(s);
  const view = s.viewAnnotations;
  const kinds = view.slice(0, -1).map((a) => a.end_kind);
  const ctx = canvas.getContext("2d")!;
  renderTimeline(
    ctx,
    s.signals,
    s.boundaries,
    kinds,
    chipLayout(s.signals.transcript, s.signals.transcript_lead_s, scale),
    defaultLayout(scale),
    s.selectedBoundary,
    s.approved,
    drag,
  );

  annEl.innerHTML = "";
  view.forEach((a, i) => {
    const row = document.createElement("div");
    row.className = "annotation-row";
    const label = document.createElement("span");
    label.className = "bounds";
    label.textContent = `[${formatTime(a.start)} – ${formatTime(a.end)}] ${a.review_status}`;
    const input = document.createElement("input");
    input.value = a.instruction;
    input.placeholder = "(no instruction)";
    input.disabled = s.approved;
    input.onchange = () => void s.setInstruction(i, input.value);
    const splitBtn = document.createElement("button");
    splitBtn.textContent = "split";
    splitBtn.disabled = s.approved;
    splitBtn.onclick = () => void s.split(i, (a.start + a.end) / 2);
    const mergeBtn = document.createElement("button");
    mergeBtn.textContent = "merge →";
    mergeBtn.disabled = s.approved || i === view.length - 1;
    mergeBtn.onclick = () => void s.merge(i);
    row.append(label, input, splitBtn, mergeBtn);
    annEl.appendChild(row);
  });

  approveBtn.disabled = s.approved;
  if (s.lastError) {
    statusEl.textContent = `rejected [${s.lastError.code}]: ${s.lastError.message}`;
    statusEl.className = "error";
  } else {
    statusEl.textContent = s.approved ? "approved and locked" : "ready";
    statusEl.className = "";
  }
}

async function openEpisode(id: string): Promise<void> {
  store = new TimelineStore(api, id);
  store.onChange(redraw);
  await store.load();
}

canvas.addEventListener("pointerdown", (ev) => {
  if (!store || store.status !== "ready" || store.approved) return;
  const rect = canvas.getBoundingClientRect();
  const x = ev.clientX - rect.left;
  const hit = hitBoundary(store.boundaries, scaleFor(store), x, 8);
  if (hit >= 0) {
    store.selectedBoundary = hit;
    drag = { index: hit, t: store.boundaries[hit] };
    canvas.setPointerCapture(ev.pointerId);
    redraw();
  }
});

canvas.addEventListener("pointermove", (ev) => {
  if (!store || drag === null) return;
  const rect = canvas.getBoundingClientRect();
  drag = { index: drag.index, t: scaleFor(store).tOf(ev.clientX - rect.left) };
  redraw();
});

canvas.addEventListener("pointerup", () => {
  if (!store || drag === null) return;
  const { index, t } = drag;
  drag = null;
  const snapped = store.snap(t);
  const violation = store.validateMove(index, snapped);
  if (violation) {
    // local pre-validation: blocked before any network call
    statusEl.textContent = `blocked: ${violation}`;
    statusEl.className = "error";
    redraw();
    return;
  }
  void store.moveBoundary(index, snapped);
});

document.addEventListener("keydown", (ev) => {
  if (!store || store.status !== "ready") return;
  if (ev.key === "n") store.selectNextBoundary(1);
  else if (ev.key === "p") store.selectNextBoundary(-1);
  else if (ev.key === "ArrowRight" || ev.key === "ArrowLeft") {
    if (store.approved) return;
    const i = store.selectedBoundary;
    const rate = store.signals?.sample_rate_hz ?? 30;
    const delta = (ev.key === "ArrowRight" ? 1 : -1) / rate;
    const target = store.boundaries[i] + delta;
    if (store.validateMove(i, target) === null) void store.moveBoundary(i, target);
  }
});

approveBtn.addEventListener("click", async () => {
  if (!store) return;
  const empty = store.emptyInstructionIndices();
  if (empty.length > 0) {
    const ok = window.confirm(
      `subtasks without instructions: ${empty.map((i) => `#${i + 1}`).join(", ")}\napprove anyway?`,
    );
    if (!ok) return;
  }
  const count = await store.approve();
  if (count !== null) {
    statusEl.textContent = `approved; ${count} subtask episodes extracted`;
    statusEl.className = "";
    void refreshEpisodeList();
  }
});

void refreshEpisodeList();
