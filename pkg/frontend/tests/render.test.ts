import { describe, expect, it } from "vitest";

import {
  PLOT_PAD,
  PLOT_SCALE,
  classCount,
  classNames,
  escapeHtml,
  renderBanner,
  renderCard,
  renderDigitGrid,
  renderFigure,
  renderPendingList,
  renderPoint2dFigure,
  renderStatus,
  renderTrajectoryFigure,
} from "../src/render";
import type { UiItem } from "../src/types";

function item(over: Partial<UiItem> = {}): UiItem {
  return {
    id: 7,
    hint: "2d-point",
    payload: [0.47, 0.6],
    root_payload: [0.4, 0.6],
    root_label: 0,
    delta: 0.07,
    enqueue_time: 0,
    selected: false,
    submitted: false,
    ...over,
  };
}

function count(haystack: string, needle: string): number {
  return haystack.split(needle).length - 1;
}

describe("digit rendering", () => {
  it("renders exactly 784 cells for a 28x28 payload", () => {
    const values = Array.from({ length: 784 }, (_, i) => i / 783);
    expect(count(renderDigitGrid(values), `class="pix"`)).toBe(784);
  });

  it("maps intensities to grayscale, clamped to [0, 1]", () => {
    const html = renderDigitGrid([0, 1, 0.5, -0.2, 1.7]);
    expect(html).toContain("rgb(0,0,0)");
    expect(html).toContain("rgb(255,255,255)");
    expect(html).toContain("rgb(128,128,128)");
    expect(html).not.toContain("rgb(-");
    expect(count(html, "rgb(255,255,255)")).toBe(2); // the clamped 1.7 too
  });

  it("shows the root and the adversary side by side", () => {
    const values = Array.from({ length: 784 }, () => 0.3);
    const fig = renderFigure(item({ hint: "digit-image", payload: values, root_payload: values }));
    expect(count(fig, `class="digit-grid"`)).toBe(2);
    expect(count(fig, `class="pix"`)).toBe(2 * 784);
    expect(fig).toContain("training point");
    expect(fig).toContain("adversary");
  });
});

describe("2d scatter geometry", () => {
  const it7 = item(); // root (0.4, 0.6), adversary (0.47, 0.6), delta 0.07

  function boxAttrs(svg: string): { x: number; y: number; w: number; h: number } {
    const m = svg.match(
      /<rect class="box" x="([^"]+)" y="([^"]+)" width="([^"]+)" height="([^"]+)"/,
    );
    expect(m).not.toBeNull();
    return { x: +m![1], y: +m![2], w: +m![3], h: +m![4] };
  }

  it("draws the L-inf box with side 2*delta", () => {
    const { w, h } = boxAttrs(renderPoint2dFigure(it7));
    expect(w).toBeCloseTo(2 * 0.07 * PLOT_SCALE, 9);
    expect(h).toBeCloseTo(w, 9);
  });

  it("centers the box on the root point", () => {
    const svg = renderPoint2dFigure(it7);
    const { x, y, w, h } = boxAttrs(svg);
    const cx = PLOT_PAD + 0.4 * PLOT_SCALE;
    const cy = PLOT_PAD + (1 - 0.6) * PLOT_SCALE;
    expect(x + w / 2).toBeCloseTo(cx, 9);
    expect(y + h / 2).toBeCloseTo(cy, 9);
    expect(svg).toContain(`<circle class="pt root" cx="${cx}" cy="${cy}"`);
  });

  it("puts the adversary marker at its own coordinates", () => {
    const svg = renderPoint2dFigure(it7);
    const ax = PLOT_PAD + 0.47 * PLOT_SCALE;
    const ay = PLOT_PAD + (1 - 0.6) * PLOT_SCALE;
    expect(svg).toContain(`<circle class="pt adv" cx="${ax}" cy="${ay}"`);
  });

  it("keeps the adversary on the box boundary when the step is axis-aligned", () => {
    const svg = renderPoint2dFigure(it7);
    const { x, w } = boxAttrs(svg);
    const ax = PLOT_PAD + 0.47 * PLOT_SCALE;
    expect(ax).toBeCloseTo(x + w, 9); // right edge: perturbation was +delta in x
  });
});

describe("trajectory rendering", () => {
  function flat(fill: (step: number, wrist: number, axis: number) => number): number[] {
    const out: number[] = [];
    for (let s = 0; s < 10; s++) {
      for (let w = 0; w < 2; w++) {
        for (let a = 0; a < 3; a++) {
          out.push(fill(s, w, a));
        }
      }
    }
    return out;
  }

  const payload = flat((s, w, a) => (a === 0 ? s / 10 : a === 1 ? 0.2 + 0.5 * w : 0.9));
  const root = flat((s, w, a) => (a === 0 ? s / 10 : a === 1 ? 0.25 + 0.5 * w : 0.9));
  const traj = item({ hint: "trajectory", payload, root_payload: root });

  it("draws two wrist polylines each for root and adversary", () => {
    const svg = renderTrajectoryFigure(traj);
    expect(count(svg, `class="path root`)).toBe(2);
    expect(count(svg, `class="path adv`)).toBe(2);
  });

  it("gives every polyline 10 points", () => {
    const svg = renderTrajectoryFigure(traj);
    const lists = [...svg.matchAll(/points="([^"]+)"/g)].map((m) => m[1]);
    expect(lists).toHaveLength(4);
    for (const pts of lists) {
      expect(pts.split(" ")).toHaveLength(10);
    }
  });

  it("projects the x/y axes of the flat (step, wrist, axis) layout", () => {
    const svg = renderTrajectoryFigure(traj);
    const adv = [...svg.matchAll(/class="path adv w0" points="([^"]+)"/g)][0][1];
    const [x0, y0] = adv.split(" ")[0].split(",").map(Number);
    expect(x0).toBeCloseTo(PLOT_PAD + payload[0] * PLOT_SCALE, 9);
    expect(y0).toBeCloseTo(PLOT_PAD + (1 - payload[1]) * PLOT_SCALE, 9);
  });
});

describe("fallbacks", () => {
  it("degrades gracefully on an unknown hint", () => {
    const fig = renderFigure(item({ hint: "spectrogram" }));
    expect(fig).toContain("no renderer");
    expect(fig).toContain("spectrogram");
  });

  it("degrades gracefully on a payload/hint length mismatch", () => {
    const fig = renderFigure(item({ hint: "digit-image" })); // 2 values, not 784
    expect(fig).toContain("no renderer");
  });
});

describe("cards and list", () => {
  it("offers one button per class plus decline", () => {
    expect(count(renderCard(item()), `data-action="label"`)).toBe(2);
    const values = Array.from({ length: 784 }, () => 0);
    const digit = renderCard(item({ hint: "digit-image", payload: values, root_payload: values }));
    expect(count(digit, `data-action="label"`)).toBe(10);
    expect(count(digit, `data-action="decline"`)).toBe(1);
  });

  it("names the trajectory classes on their buttons", () => {
    const payload = Array.from({ length: 60 }, () => 0.5);
    const card = renderCard(item({ hint: "trajectory", payload, root_payload: payload }));
    for (const name of classNames("trajectory")) {
      expect(card).toContain(name);
    }
    expect(classCount("trajectory")).toBe(4);
  });

  it("disables the buttons while a submission is in flight", () => {
    const card = renderCard(item({ submitted: true }));
    expect(count(card, "disabled")).toBe(3); // 2 class buttons + decline
    expect(card).toContain("submitting…");
  });

  it("says so when the queue is empty", () => {
    expect(renderPendingList([])).toContain("no pending items");
  });

  it("renders items in the order the server gave them", () => {
    const items = [item({ id: 5 }), item({ id: 9 })];
    const html = renderPendingList(items);
    expect(html.indexOf(`data-id="5"`)).toBeLessThan(html.indexOf(`data-id="9"`));
  });

  it("is idempotent: the same list renders to the same markup", () => {
    const items = [item({ id: 5 }), item({ id: 9, selected: true })];
    expect(renderPendingList(items)).toBe(renderPendingList(items));
  });
});

describe("status panel", () => {
  it("shows a connecting note before the first poll", () => {
    expect(renderStatus(null)).toContain("connecting");
  });

  it("shows the queue depth as a badge", () => {
    const html = renderStatus({ queue_depth: 3 });
    expect(html).toMatch(/data-field="queue">3</);
  });

  it("rounds the true-adversary fraction to two decimals", () => {
    const html = renderStatus({ true_adversary_fraction: 2 / 3 });
    expect(html).toMatch(/data-field="fraction">0\.67</);
  });

  it("shows a dash while no round has labeled anything", () => {
    expect(renderStatus({ true_adversary_fraction: null })).toMatch(/data-field="fraction">—</);
    expect(renderStatus({})).toMatch(/data-field="fraction">—</);
  });

  it("carries the resolved counters through", () => {
    const html = renderStatus({
      resolved: { labeled: 4, declined: 1, "timed-out": 2 },
    });
    expect(html).toContain("labeled <b>4</b>");
    expect(html).toContain("declined <b>1</b>");
    expect(html).toContain("timed out <b>2</b>");
  });
});

describe("escaping", () => {
  it("escapes markup in strings bound for the page", () => {
    expect(escapeHtml(`<script>"&`)).toBe("&lt;script&gt;&quot;&amp;");
    expect(renderBanner(`<b>`)).toContain("&lt;b&gt;");
    expect(renderBanner(null)).toBe("");
  });
});
