/** Thin fetch wrappers over the four labeling-service endpoints. */

import type { PendingItem, StatusSnapshot, SubmitResult } from "./types.js";

export async function fetchPending(base = ""): Promise<PendingItem[]> {
  const r = await fetch(`${base}/api/pending`);
  if (!r.ok) {
    throw new Error(`pending: HTTP ${r.status}`);
  }
  return (await r.json()) as PendingItem[];
}

export async function fetchStatus(base = ""): Promise<StatusSnapshot> {
  const r = await fetch(`${base}/api/status`);
  if (!r.ok) {
    throw new Error(`status: HTTP ${r.status}`);
  }
  return (await r.json()) as StatusSnapshot;
}

async function post(path: string, body: unknown, base: string): Promise<SubmitResult> {
  const r = await fetch(base + path, {
    method: "POST",
    headers: { "Content-Type": "application/json" },
    body: JSON.stringify(body),
  });
  let verdict = "";
  try {
    verdict = ((await r.json()) as { verdict?: string }).verdict ?? "";
  } catch {
    // non-JSON error body; the status code still tells the story
  }
  return { status: r.status, verdict };
}

export function submitLabel(id: number, cls: number, base = ""): Promise<SubmitResult> {
  return post("/api/label", { id, class: cls }, base);
}

export function submitDecline(id: number, base = ""): Promise<SubmitResult> {
  return post("/api/decline", { id }, base);
}
