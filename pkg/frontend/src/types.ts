/** Wire types for the labeling service's JSON endpoints. */

/** One unresolved labeling request, as served by `GET /api/pending`. */
export interface PendingItem {
  id: number;
  /** How to draw the payload: "2d-point" | "digit-image" | "trajectory". */
  hint: string;
  /** The adversarial input, flattened to floats in [0, 1]. */
  payload: number[];
  /** The unperturbed training point the adversary was grown from. */
  root_payload: number[];
  root_label: number;
  /** Minimal L-infinity distance at which the classifier flips. */
  delta: number;
  enqueue_time: number;
}

/** Live training counters from `GET /api/status`. */
export interface StatusSnapshot {
  epoch?: number;
  round?: number;
  d0_size?: number;
  d_adv_size?: number;
  queue_depth?: number;
  human_labeled?: number;
  assumed?: number;
  true_adversary_fraction?: number | null;
  resolved?: Record<string, number>;
}

/** A pending item plus client-side render state. */
export interface UiItem extends PendingItem {
  selected: boolean;
  /** True while an HTTP resolution for this item is in flight. */
  submitted: boolean;
}

export interface SubmitResult {
  status: number;
  /** Service verdict string: "ok", "unknown-id", "bad-class", "already-resolved". */
  verdict: string;
}
