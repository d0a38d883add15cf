import { afterEach, describe, expect, it, vi } from "vitest";

import { fetchPending, fetchStatus, submitDecline, submitLabel } from "../src/api";

interface Call {
  url: string;
  init?: RequestInit;
}

function stubFetch(status: number, body: unknown): Call[] {
  const calls: Call[] = [];
  vi.stubGlobal("fetch", (url: string, init?: RequestInit) => {
    calls.push({ url, init });
    return Promise.resolve({
      ok: status >= 200 && status < 300,
      status,
      json: () =>
        body === undefined
          ? Promise.reject(new SyntaxError("empty body"))
          : Promise.resolve(body),
    });
  });
  return calls;
}

afterEach(() => {
  vi.unstubAllGlobals();
});

describe("reads", () => {
  it("fetches the pending list from /api/pending", async () => {
    const calls = stubFetch(200, [{ id: 3, hint: "2d-point" }]);
    const items = await fetchPending();
    expect(calls[0].url).toBe("/api/pending");
    expect(items[0].id).toBe(3);
  });

  it("fetches counters from /api/status", async () => {
    const calls = stubFetch(200, { queue_depth: 2 });
    const snap = await fetchStatus();
    expect(calls[0].url).toBe("/api/status");
    expect(snap.queue_depth).toBe(2);
  });

  it("throws on a non-2xx read", async () => {
    stubFetch(503, { error: "down" });
    await expect(fetchPending()).rejects.toThrow("HTTP 503");
  });

  it("respects a base URL prefix", async () => {
    const calls = stubFetch(200, []);
    await fetchPending("http://127.0.0.1:9999");
    expect(calls[0].url).toBe("http://127.0.0.1:9999/api/pending");
  });
});

describe("writes", () => {
  it("posts the label as JSON {id, class}", async () => {
    const calls = stubFetch(200, { ok: true, verdict: "ok", id: 4 });
    const res = await submitLabel(4, 2);
    expect(calls[0].url).toBe("/api/label");
    expect(calls[0].init?.method).toBe("POST");
    expect(
      (calls[0].init?.headers as Record<string, string>)["Content-Type"],
    ).toBe("application/json");
    expect(JSON.parse(calls[0].init?.body as string)).toEqual({ id: 4, class: 2 });
    expect(res).toEqual({ status: 200, verdict: "ok" });
  });

  it("posts the decline as JSON {id}", async () => {
    const calls = stubFetch(200, { ok: true, verdict: "ok", id: 4 });
    const res = await submitDecline(4);
    expect(calls[0].url).toBe("/api/decline");
    expect(JSON.parse(calls[0].init?.body as string)).toEqual({ id: 4 });
    expect(res.status).toBe(200);
  });

  it("passes 4xx verdicts through instead of throwing", async () => {
    stubFetch(409, { ok: false, verdict: "already-resolved", id: 4 });
    expect(await submitLabel(4, 0)).toEqual({
      status: 409,
      verdict: "already-resolved",
    });
  });

  it("tolerates a non-JSON error body", async () => {
    stubFetch(500, undefined);
    expect(await submitDecline(4)).toEqual({ status: 500, verdict: "" });
  });
});
