/** Pure markup builders for the labeling console.
 *
 * Everything here maps JSON from the service to HTML/SVG strings and nothing
 * else, so the geometry and cell-count guarantees can be tested without a
 * browser.  The DOM glue in app.ts only ever assigns these strings.
 */

import type { PendingItem, StatusSnapshot, UiItem } from "./types.js";

/** Side of the square SVG plots, in px. */
export const PLOT_SIZE = 220;
/** Margin between the SVG edge and the unit square, in px. */
export const PLOT_PAD = 10;
/** Pixels per unit of input space inside the plots. */
export const PLOT_SCALE = PLOT_SIZE - 2 * PLOT_PAD;

export const DIGIT_SIDE = 28;
export const TRAJECTORY_POINTS = 10;
const TRAJECTORY_WRISTS = 2;
const TRAJECTORY_AXES = 3;

/** Class labels offered per rendering hint; index = class id. */
const CLASS_NAMES: Record<string, string[]> = {
  "2d-point": ["0", "1"],
  "digit-image": Array.from({ length: 10 }, (_, k) => String(k)),
  trajectory: ["assembling", "retrieving", "reaching", "abnormal"],
};

export function classNames(hint: string): string[] {
  return CLASS_NAMES[hint] ?? [];
}

export function classCount(hint: string): number {
  return classNames(hint).length;
}

export function escapeHtml(s: string): string {
  return s
    .replace(/&/g, "&amp;")
    .replace(/</g, "&lt;")
    .replace(/>/g, "&gt;")
    .replace(/"/g, "&quot;");
}

/** Input-space x to plot x. */
function px(v: number): number {
  return PLOT_PAD + v * PLOT_SCALE;
}

/** Input-space y to plot y (flipped so the origin sits bottom-left). */
function py(v: number): number {
  return PLOT_PAD + (1 - v) * PLOT_SCALE;
}

function svgOpen(cls: string): string {
  return (
    `<svg class="${cls}" viewBox="0 0 ${PLOT_SIZE} ${PLOT_SIZE}" ` +
    `width="${PLOT_SIZE}" height="${PLOT_SIZE}" role="img">` +
    `<rect class="frame" x="${PLOT_PAD}" y="${PLOT_PAD}" ` +
    `width="${PLOT_SCALE}" height="${PLOT_SCALE}"/>`
  );
}

/** Scatter of root and adversary with the L-inf ball that separates them.
 *
 * The box is centered on the root and has side 2·delta: the adversary sits
 * on its boundary, which is exactly the claim the verifier made.
 */
export function renderPoint2dFigure(item: PendingItem): string {
  const [rx, ry] = item.root_payload;
  const [ax, ay] = item.payload;
  const side = 2 * item.delta * PLOT_SCALE;
  const parts = [svgOpen("plot point2d")];
  parts.push(
    `<rect class="box" x="${px(rx) - side / 2}" y="${py(ry) - side / 2}" ` +
      `width="${side}" height="${side}"/>`,
  );
  parts.push(
    `<line class="link" x1="${px(rx)}" y1="${py(ry)}" ` +
      `x2="${px(ax)}" y2="${py(ay)}"/>`,
  );
  parts.push(`<circle class="pt root" cx="${px(rx)}" cy="${py(ry)}" r="4"/>`);
  parts.push(`<circle class="pt adv" cx="${px(ax)}" cy="${py(ay)}" r="4"/>`);
  parts.push("</svg>");
  return parts.join("");
}

/** One 28x28 grayscale grid: exactly 784 cells, row-major. */
export function renderDigitGrid(values: number[]): string {
  const cells: string[] = [`<div class="digit-grid">`];
  for (const v of values) {
    const g = Math.round(Math.min(1, Math.max(0, v)) * 255);
    cells.push(`<div class="pix" style="background:rgb(${g},${g},${g})"></div>`);
  }
  cells.push("</div>");
  return cells.join("");
}

function renderDigitFigure(item: PendingItem): string {
  return (
    `<div class="digit-pair">` +
    `<figure><figcaption>training point</figcaption>` +
    renderDigitGrid(item.root_payload) +
    `</figure>` +
    `<figure><figcaption>adversary</figcaption>` +
    renderDigitGrid(item.payload) +
    `</figure></div>`
  );
}

/** (timestep, wrist, axis) coordinate from the flat 60-vector. */
function trajAt(flat: number[], step: number, wrist: number, axis: number): number {
  return flat[(step * TRAJECTORY_WRISTS + wrist) * TRAJECTORY_AXES + axis];
}

function trajPoints(flat: number[], wrist: number): string {
  const pts: string[] = [];
  for (let s = 0; s < TRAJECTORY_POINTS; s++) {
    pts.push(`${px(trajAt(flat, s, wrist, 0))},${py(trajAt(flat, s, wrist, 1))}`);
  }
  return pts.join(" ");
}

/** x/y projection of both wrist paths: dashed root, solid adversary. */
export function renderTrajectoryFigure(item: PendingItem): string {
  const parts = [svgOpen("plot trajectory")];
  for (let w = 0; w < TRAJECTORY_WRISTS; w++) {
    parts.push(
      `<polyline class="path root w${w}" points="${trajPoints(item.root_payload, w)}"/>`,
    );
  }
  for (let w = 0; w < TRAJECTORY_WRISTS; w++) {
    const pts = trajPoints(item.payload, w);
    parts.push(`<polyline class="path adv w${w}" points="${pts}"/>`);
    for (const pair of pts.split(" ")) {
      const [x, y] = pair.split(",");
      parts.push(`<circle class="node w${w}" cx="${x}" cy="${y}" r="2.5"/>`);
    }
  }
  parts.push("</svg>");
  return parts.join("");
}

export function renderFigure(item: PendingItem): string {
  if (item.hint === "2d-point" && item.payload.length === 2) {
    return renderPoint2dFigure(item);
  }
  if (item.hint === "digit-image" && item.payload.length === DIGIT_SIDE ** 2) {
    return renderDigitFigure(item);
  }
  if (
    item.hint === "trajectory" &&
    item.payload.length === TRAJECTORY_POINTS * TRAJECTORY_WRISTS * TRAJECTORY_AXES
  ) {
    return renderTrajectoryFigure(item);
  }
  return (
    `<p class="unrenderable">no renderer for hint ` +
    `"${escapeHtml(item.hint)}" with ${item.payload.length} values</p>`
  );
}

function renderButtons(item: UiItem): string {
  const dis = item.submitted ? " disabled" : "";
  const btns = classNames(item.hint).map((name, k) => {
    const text = name === String(k) ? name : `${k} ${escapeHtml(name)}`;
    return (
      `<button class="label" data-action="label" data-id="${item.id}" ` +
      `data-class="${k}"${dis}>${text}</button>`
    );
  });
  btns.push(
    `<button class="decline" data-action="decline" data-id="${item.id}"${dis}>` +
      `decline (X)</button>`,
  );
  const inflight = item.submitted ? `<span class="inflight">submitting…</span>` : "";
  return `<div class="actions">${btns.join("")}${inflight}</div>`;
}

export function renderCard(item: UiItem): string {
  const cls = item.selected ? "card selected" : "card";
  return (
    `<article class="${cls}" data-id="${item.id}">` +
    `<header>#${item.id} · ${escapeHtml(item.hint)} · ` +
    `root label <b>${item.root_label}</b> · δ ${item.delta.toFixed(4)}</header>` +
    renderFigure(item) +
    renderButtons(item) +
    `</article>`
  );
}

/** Cards in server (enqueue) order; re-rendering the same list is stable. */
export function renderPendingList(items: UiItem[]): string {
  if (items.length === 0) {
    return `<p class="empty">no pending items</p>`;
  }
  return items.map(renderCard).join("");
}

function stat(label: string, value: string, field?: string): string {
  const data = field ? ` data-field="${field}"` : "";
  return `<span class="stat">${label} <b${data}>${value}</b></span>`;
}

export function renderStatus(s: StatusSnapshot | null): string {
  if (s === null) {
    return `<span class="stat muted">connecting…</span>`;
  }
  const resolved = s.resolved ?? {};
  const frac = s.true_adversary_fraction;
  return [
    stat("epoch", String(s.epoch ?? 0)),
    stat("round", String(s.round ?? 0)),
    stat("queue", String(s.queue_depth ?? 0), "queue"),
    stat("labeled", String(resolved["labeled"] ?? 0)),
    stat("declined", String(resolved["declined"] ?? 0)),
    stat("timed out", String(resolved["timed-out"] ?? 0)),
    stat("true-adversary fraction", frac == null ? "—" : frac.toFixed(2), "fraction"),
  ].join(" ");
}

export function renderBanner(msg: string | null): string {
  return msg === null ? "" : `<p class="banner">${escapeHtml(msg)}</p>`;
}
