import { describe, expect, it } from "vitest";

import { ApiError, SessionApi } from "../src/api.js";
import type { Frame } from "../src/types.js";

type Call = { url: string; init?: RequestInit };

function jsonResponse(body: unknown, status = 200): Response {
  return new Response(JSON.stringify(body), {
    status,
    headers: { "content-type": "application/json" },
  });
}

function ndjsonResponse(lines: unknown[]): Response {
  const text = lines.map((l) => JSON.stringify(l)).join("\n") + "\n";
  return new Response(text, { status: 200 });
}

function mockApi(handler: (call: Call) => Response) {
  const calls: Call[] = [];
  const fetchFn = (async (url: RequestInfo | URL, init?: RequestInit) => {
    const call = { url: String(url), init };
    calls.push(call);
    return handler(call);
  }) as typeof fetch;
  return { api: new SessionApi("http://test", fetchFn), calls };
}

describe("SessionApi", () => {
  it("creates sessions with the requested configuration", async () => {
    const { api, calls } = mockApi(() => jsonResponse({ session_id: "s0009" }));
    const sid = await api.createSession({ log: "rows_00", mode: "gnss", seed: 4 });
    expect(sid).toBe("s0009");
    expect(calls[0].url).toBe("http://test/sessions");
    expect(JSON.parse(String(calls[0].init?.body))).toEqual({
      log: "rows_00", mode: "gnss", seed: 4,
    });
  });

  it("surfaces server rejections as ApiError with detail", async () => {
    const { api } = mockApi(() =>
      jsonResponse({ detail: "unknown parameter fields: ['warp']" }, 400));
    await expect(api.patchParams("s1", { warp: 1 })).rejects.toThrowError(
      /unknown parameter/);
    await expect(api.patchParams("s1", { warp: 1 })).rejects.toBeInstanceOf(
      ApiError);
  });

  it("streams step frames through the NDJSON reader", async () => {
    const frames = [
      { t: 0.2, metrics: { final_error: 1 } },
      { t: 0.4, metrics: { final_error: 0.5 } },
    ];
    const { api, calls } = mockApi(() => ndjsonResponse(frames));
    const seen: number[] = [];
    const count = await api.step("s1", 2, (f: Frame) => seen.push(f.t), 500);
    expect(count).toBe(2);
    expect(seen).toEqual([0.2, 0.4]);
    expect(JSON.parse(String(calls[0].init?.body))).toEqual({
      n_steps: 2, particle_cap: 500,
    });
  });

  it("omits the particle cap when not requested", async () => {
    const { api, calls } = mockApi(() => ndjsonResponse([]));
    await api.step("s1", 3, () => {});
    expect(JSON.parse(String(calls[0].init?.body))).toEqual({ n_steps: 3 });
  });

  it("lists logs and fetches state", async () => {
    const { api, calls } = mockApi((call) =>
      call.url.endsWith("/logs")
        ? jsonResponse({ logs: [{ name: "rows_00" }] })
        : jsonResponse({ session_id: "s1", params: {} }));
    const { logs } = await api.listLogs();
    expect(logs[0].name).toBe("rows_00");
    await api.getState("s1");
    expect(calls[1].url).toBe("http://test/sessions/s1");
  });
});
