/** Client-side list state: selection, in-flight guards, and the banner.
 *
 * The service is the source of truth; nothing here persists.  Each refresh
 * replaces the list with the server's enqueue-ordered view while carrying
 * over the two bits of purely client-side state (selection, in-flight flag).
 */

import type { PendingItem, SubmitResult, UiItem } from "./types.js";

export class ConsoleState {
  items: UiItem[] = [];
  banner: string | null = null;

  /** Replace the list with a fresh server view, keeping selection stable. */
  syncPending(incoming: PendingItem[]): void {
    const old = new Map(this.items.map((i) => [i.id, i]));
    const selectedId = this.selected()?.id;
    this.items = incoming.map((p) => ({
      ...p,
      submitted: old.get(p.id)?.submitted ?? false,
      selected: false,
    }));
    const keep =
      selectedId === undefined
        ? undefined
        : this.items.find((i) => i.id === selectedId);
    const target = keep ?? this.items[0];
    if (target) {
      target.selected = true;
    }
  }

  selected(): UiItem | undefined {
    return this.items.find((i) => i.selected);
  }

  select(id: number): void {
    for (const i of this.items) {
      i.selected = i.id === id;
    }
  }

  /** Claim the submission slot for an item; false if one is already open. */
  beginSubmit(id: number): boolean {
    const item = this.items.find((i) => i.id === id);
    if (!item || item.submitted) {
      return false;
    }
    item.submitted = true;
    return true;
  }

  /** Release the slot after a failed transport so the user can retry. */
  failSubmit(id: number): void {
    const item = this.items.find((i) => i.id === id);
    if (item) {
      item.submitted = false;
    }
  }

  /** Drop a resolved item and move the selection to its neighbour. */
  resolve(id: number): void {
    const idx = this.items.findIndex((i) => i.id === id);
    if (idx < 0) {
      return;
    }
    const wasSelected = this.items[idx].selected;
    this.items.splice(idx, 1);
    if (wasSelected && this.items.length > 0) {
      this.items[Math.min(idx, this.items.length - 1)].selected = true;
    }
  }

  setBanner(msg: string): void {
    this.banner = msg;
  }

  clearBanner(): void {
    this.banner = null;
  }
}

export type ResolutionOutcome =
  | "resolved"
  | "conflict"
  | "rejected"
  | "ignored"
  | "network-error";

/** Drive one label/decline submission through the shared state rules.
 *
 * - at most one in-flight submission per id ("ignored" otherwise);
 * - HTTP 200 removes the item;
 * - HTTP 409 keeps it and raises the stale-item banner (the caller must
 *   refresh, which is what actually drops it);
 * - transport failure releases the slot again so a retry is possible.
 */
export async function performResolution(
  state: ConsoleState,
  id: number,
  send: () => Promise<SubmitResult>,
): Promise<ResolutionOutcome> {
  if (!state.beginSubmit(id)) {
    return "ignored";
  }
  let res: SubmitResult;
  try {
    res = await send();
  } catch {
    state.failSubmit(id);
    state.setBanner(`network error: item #${id} not submitted; try again`);
    return "network-error";
  }
  if (res.status === 200) {
    state.resolve(id);
    state.clearBanner();
    return "resolved";
  }
  if (res.status === 409) {
    state.setBanner(`item #${id} was already resolved elsewhere; refreshing`);
    return "conflict";
  }
  state.failSubmit(id);
  state.setBanner(`rejected (${res.verdict || String(res.status)}) for item #${id}`);
  return "rejected";
}
