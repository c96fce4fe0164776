import { afterEach, describe, expect, it, vi } from "vitest";
import { ApiClient, ApiError } from "../src/api.js";

function mockFetch(status: number, payload: unknown) {
  const fn = vi.fn(async () => ({
    ok: status < 400,
    status,
    json: async () => payload,
  }));
  vi.stubGlobal("fetch", fn);
  return fn;
}

afterEach(() => vi.unstubAllGlobals());

describe("api client is one request per action", () => {
  it.each([
    ["createSession", (api: ApiClient) => api.createSession({ n_bits: 8 }), "POST", "/api/v1/sessions"],
    ["view", (api: ApiClient) => api.view("s1", "bob"), "GET", "/api/v1/sessions/s1/view?role=bob"],
    ["stageChoice", (api: ApiClient) => api.stageChoice("s1", { role: "alice", bit: 1, basis: "HV" }), "POST", "/api/v1/sessions/s1/choice"],
    ["step", (api: ApiClient) => api.step("s1", 3), "POST", "/api/v1/sessions/s1/step"],
    ["setEve", (api: ApiClient) => api.setEve("s1", { enabled: true }), "POST", "/api/v1/sessions/s1/eve"],
    ["setChannel", (api: ApiClient) => api.setChannel("s1", { drift_offset_deg: 5 }), "POST", "/api/v1/sessions/s1/channel"],
    ["reveal", (api: ApiClient) => api.reveal("s1"), "POST", "/api/v1/sessions/s1/reveal"],
    ["compare", (api: ApiClient) => api.compare("s1"), "POST", "/api/v1/sessions/s1/compare"],
    ["abort", (api: ApiClient) => api.abort("s1"), "POST", "/api/v1/sessions/s1/abort"],
    ["otp", (api: ApiClient) => api.otp("s1", { plaintext: "x" }), "POST", "/api/v1/sessions/s1/otp"],
    ["report", (api: ApiClient) => api.report("s1"), "GET", "/api/v1/sessions/s1/report"],
  ])("%s issues exactly one call", async (_name, call, method, path) => {
    const fn = mockFetch(200, {});
    await call(new ApiClient(""));
    expect(fn).toHaveBeenCalledTimes(1);
    const [url, init] = fn.mock.calls[0] as unknown as [string, RequestInit | undefined];
    expect(url).toBe(path);
    expect(init?.method ?? "GET").toBe(method);
  });

  it("propagates structured service errors", async () => {
    mockFetch(409, { detail: { error: "session is not accepting rounds" } });
    await expect(new ApiClient("").step("s1")).rejects.toBeInstanceOf(ApiError);
  });

  it("sends JSON bodies verbatim (no client-side protocol additions)", async () => {
    const fn = mockFetch(200, {});
    await new ApiClient("").stageChoice("s1", { role: "bob", basis: "DAD" });
    const [, init] = fn.mock.calls[0] as unknown as [string, RequestInit];
    expect(JSON.parse(init.body as string)).toStrictEqual({ role: "bob", basis: "DAD" });
  });
});
