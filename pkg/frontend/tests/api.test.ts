import { afterEach, describe, expect, it, vi } from "vitest";

import { ApiError, ConsoleApi } from "../src/api.js";

function jsonResponse(body: unknown, status = 200): Response {
  return new Response(JSON.stringify(body), {
    status,
    headers: { "Content-Type": "application/json" },
  });
}

afterEach(() => {
  vi.unstubAllGlobals();
});

describe("ConsoleApi", () => {
  it("posts the query wire format", async () => {
    const fetchMock = vi.fn().mockResolvedValue(
      jsonResponse({
        answer: "a",
        chunks: [],
        retrieval_ms: 1,
        generation_ms: 2,
        session_id: "s",
      }),
    );
    vi.stubGlobal("fetch", fetchMock);
    const api = new ConsoleApi("http://host:1234/");
    await api.query("why?", "troubleshooting", 7, "sess");
    expect(fetchMock).toHaveBeenCalledWith(
      "http://host:1234/v1/query",
      expect.objectContaining({ method: "POST" }),
    );
    const body = JSON.parse(fetchMock.mock.calls[0][1].body as string);
    expect(body).toEqual({
      question: "why?",
      task: "troubleshooting",
      top_k: 7,
      session_id: "sess",
    });
  });

  it("omits session_id until the runtime assigns one", async () => {
    const fetchMock = vi.fn().mockResolvedValue(
      jsonResponse({ answer: "", chunks: [], retrieval_ms: 0, generation_ms: 0, session_id: "x" }),
    );
    vi.stubGlobal("fetch", fetchMock);
    await new ConsoleApi("http://h").query("q", "knowledge_acquisition", 3, null);
    const body = JSON.parse(fetchMock.mock.calls[0][1].body as string);
    expect("session_id" in body).toBe(false);
  });

  it("parses the structured error envelope", async () => {
    vi.stubGlobal(
      "fetch",
      vi.fn().mockResolvedValue(
        jsonResponse({ error: { type: "EmptyIndex", message: "index is empty" } }, 409),
      ),
    );
    const api = new ConsoleApi("http://h");
    const err = await api.retrieve("q", 3).catch((e) => e as ApiError);
    expect(err).toBeInstanceOf(ApiError);
    expect(err.status).toBe(409);
    expect(err.errorType).toBe("EmptyIndex");
    expect(err.message).toBe("index is empty");
  });

  it("encodes chunk ids in the path", async () => {
    const fetchMock = vi.fn().mockResolvedValue(
      jsonResponse({ id: "a b", doc_id: "d", title_path: [], body: "", token_count: 0, method: "targeted" }),
    );
    vi.stubGlobal("fetch", fetchMock);
    await new ConsoleApi("http://h").getChunk("a b");
    expect(fetchMock.mock.calls[0][0]).toBe("http://h/v1/chunks/a%20b");
  });

  it("healthy() is false when the service is unreachable", async () => {
    vi.stubGlobal("fetch", vi.fn().mockRejectedValue(new TypeError("ECONNREFUSED")));
    expect(await new ConsoleApi("http://down").healthy()).toBe(false);
  });
});
