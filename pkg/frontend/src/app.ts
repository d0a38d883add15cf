/** Browser entry point: one poll loop, delegated clicks, keyboard shortcuts.
 *
 * All rendering and submission rules live in render.ts / state.ts; this file
 * only moves strings into the DOM and events out of it.
 */

import { fetchPending, fetchStatus, submitDecline, submitLabel } from "./api.js";
import { classCount, renderBanner, renderPendingList, renderStatus } from "./render.js";
import { ConsoleState, performResolution } from "./state.js";
import type { StatusSnapshot } from "./types.js";

const POLL_MS = 1000;

const state = new ConsoleState();
let lastStatus: StatusSnapshot | null = null;

const listEl = document.getElementById("pending")!;
const statusEl = document.getElementById("status")!;
const bannerEl = document.getElementById("banner")!;

function redraw(): void {
  listEl.innerHTML = renderPendingList(state.items);
  statusEl.innerHTML = renderStatus(lastStatus);
  bannerEl.innerHTML = renderBanner(state.banner);
}

async function refresh(): Promise<void> {
  try {
    const [pending, status] = await Promise.all([fetchPending(), fetchStatus()]);
    state.syncPending(pending);
    lastStatus = status;
  } catch {
    state.setBanner("cannot reach the labeling service; retrying");
  }
  redraw();
}

async function resolve(id: number, send: () => Promise<{ status: number; verdict: string }>): Promise<void> {
  const outcome = await performResolution(state, id, send);
  if (outcome === "conflict") {
    await refresh();
    return;
  }
  redraw();
}

listEl.addEventListener("click", (ev) => {
  const el = ev.target as HTMLElement;
  const btn = el.closest<HTMLElement>("[data-action]");
  if (btn && btn.dataset.id !== undefined) {
    const id = Number(btn.dataset.id);
    if (btn.dataset.action === "label") {
      const cls = Number(btn.dataset.class);
      void resolve(id, () => submitLabel(id, cls));
    } else {
      void resolve(id, () => submitDecline(id));
    }
    return;
  }
  const card = el.closest<HTMLElement>(".card");
  if (card && card.dataset.id !== undefined) {
    state.select(Number(card.dataset.id));
    redraw();
  }
});

document.addEventListener("keydown", (ev) => {
  if (ev.ctrlKey || ev.metaKey || ev.altKey) {
    return;
  }
  const sel = state.selected();
  if (!sel) {
    return;
  }
  if (/^[0-9]$/.test(ev.key)) {
    const cls = Number(ev.key);
    if (cls < classCount(sel.hint)) {
      const id = sel.id;
      void resolve(id, () => submitLabel(id, cls));
    }
  } else if (ev.key === "x" || ev.key === "X") {
    const id = sel.id;
    void resolve(id, () => submitDecline(id));
  }
});

void refresh();
setInterval(() => {
  void refresh();
}, POLL_MS);
