import type { ChunkDetail, QueryResponse, RetrieveResponse, Task } from "./types.js";

export class ApiError extends Error {
  constructor(
    public status: number,
    public errorType: string,
    message: string,
  ) {
    super(message);
    this.name = "ApiError";
  }
}

async function raiseFor(resp: Response): Promise<never> {
  let errorType = "HttpError";
  let message = `${resp.status} ${resp.statusText}`;
  try {
    const body = await resp.json();
    if (body && body.error) {
      errorType = body.error.type ?? errorType;
      message = body.error.message ?? message;
    } else if (body && body.detail) {
      // FastAPI validation errors
      message = JSON.stringify(body.detail);
      errorType = "ValidationError";
    }
  } catch {
    // non-JSON error body; keep the status line
  }
  throw new ApiError(resp.status, errorType, message);
}

/** Thin typed client for the runtime HTTP API. One base-URL setting. */
export class ConsoleApi {
  constructor(public baseUrl: string) {
    this.baseUrl = baseUrl.replace(/\/+$/, "");
  }

  private async post<T>(path: string, payload: unknown): Promise<T> {
    const resp = await fetch(`${this.baseUrl}${path}`, {
      method: "POST",
      headers: { "Content-Type": "application/json" },
      body: JSON.stringify(payload),
    });
    if (!resp.ok) await raiseFor(resp);
    return resp.json() as Promise<T>;
  }

  async query(
    question: string,
    task: Task,
    topK: number,
    sessionId?: string | null,
  ): Promise<QueryResponse> {
    const payload: Record<string, unknown> = { question, task, top_k: topK };
    if (sessionId) payload.session_id = sessionId;
    return this.post<QueryResponse>("/v1/query", payload);
  }

  async retrieve(question: string, topK: number): Promise<RetrieveResponse> {
    return this.post<RetrieveResponse>("/v1/retrieve", { question, top_k: topK });
  }

  async getChunk(chunkId: string): Promise<ChunkDetail> {
    const resp = await fetch(`${this.baseUrl}/v1/chunks/${encodeURIComponent(chunkId)}`);
    if (!resp.ok) await raiseFor(resp);
    return resp.json() as Promise<ChunkDetail>;
  }

  async healthy(): Promise<boolean> {
    try {
      const resp = await fetch(`${this.baseUrl}/healthz`);
      return resp.ok;
    } catch {
      return false;
    }
  }
}
