import { ApiError, ConsoleApi } from "./api.js";
import { Session } from "./session.js";
import { renderChunkDetail, renderError, renderTurn } from "./view.js";
import type { Task } from "./types.js";

const DEFAULT_BASE_URL = "http://127.0.0.1:8080";

function q<T extends HTMLElement>(selector: string): T {
  const node = document.querySelector<T>(selector);
  if (!node) throw new Error(`missing element ${selector}`);
  return node;
}

function currentBaseUrl(): string {
  const fromQuery = new URLSearchParams(window.location.search).get("api");
  return fromQuery || localStorage.getItem("opsrag.baseUrl") || DEFAULT_BASE_URL;
}

function bootstrap(): void {
  const baseUrlInput = q<HTMLInputElement>("#base-url");
  const taskSelect = q<HTMLSelectElement>("#task");
  const topKInput = q<HTMLInputElement>("#top-k");
  const questionInput = q<HTMLTextAreaElement>("#question");
  const sendButton = q<HTMLButtonElement>("#send");
  const newSessionButton = q<HTMLButtonElement>("#new-session");
  const saveButton = q<HTMLButtonElement>("#save-transcript");
  const loadInput = q<HTMLInputElement>("#load-transcript");
  const transcript = q<HTMLDivElement>("#transcript");
  const inspector = q<HTMLDivElement>("#inspector");
  const errors = q<HTMLDivElement>("#errors");
  const statusDot = q<HTMLSpanElement>("#status");

  baseUrlInput.value = currentBaseUrl();
  let api = new ConsoleApi(baseUrlInput.value);
  let session = new Session(api);

  async function refreshHealth(): Promise<void> {
    const ok = await api.healthy();
    statusDot.textContent = ok ? "service: up" : "service: unreachable";
    statusDot.className = ok ? "status up" : "status down";
  }

  baseUrlInput.addEventListener("change", () => {
    localStorage.setItem("opsrag.baseUrl", baseUrlInput.value);
    api = new ConsoleApi(baseUrlInput.value);
    session = new Session(api);
    transcript.replaceChildren();
    void refreshHealth();
  });

  function showError(message: string, retry?: () => void): void {
    const banner = renderError(message);
    const retryButton = banner.querySelector<HTMLButtonElement>(".error-retry");
    if (retryButton) {
      if (retry) {
        retryButton.addEventListener("click", () => {
          banner.remove();
          retry();
        });
      } else {
        retryButton.remove();
      }
    }
    errors.replaceChildren(banner);
  }

  async function inspectChunk(chunkId: string): Promise<void> {
    try {
      const detail = await api.getChunk(chunkId);
      inspector.replaceChildren(renderChunkDetail(detail));
    } catch (err) {
      const message =
        err instanceof ApiError && err.status === 404
          ? `chunk ${chunkId} not found`
          : `chunk lookup failed: ${(err as Error).message}`;
      inspector.replaceChildren(renderError(message));
      inspector.querySelector(".error-retry")?.remove();
    }
  }

  async function submit(): Promise<void> {
    const question = questionInput.value;
    const task = taskSelect.value as Task;
    const topK = Math.max(1, Number(topKInput.value) || 5);
    if (!question.trim() || session.busy) return;
    sendButton.disabled = true;
    errors.replaceChildren();
    try {
      const turn = await session.submit(question, task, topK);
      const node = renderTurn(turn);
      node.querySelectorAll<HTMLButtonElement>(".citation-inspect").forEach((button) => {
        button.addEventListener("click", (event) => {
          event.preventDefault();
          void inspectChunk(button.dataset.chunkId ?? "");
        });
      });
      transcript.append(node);
      node.scrollIntoView({ block: "end" });
      questionInput.value = "";
    } catch (err) {
      const message =
        err instanceof ApiError
          ? `${err.errorType}: ${err.message}`
          : (err as Error).message;
      showError(message, () => void submit());
    } finally {
      sendButton.disabled = false;
    }
  }

  sendButton.addEventListener("click", () => void submit());
  questionInput.addEventListener("keydown", (event) => {
    if (event.key === "Enter" && (event.ctrlKey || event.metaKey)) void submit();
  });

  newSessionButton.addEventListener("click", () => {
    session = new Session(api);
    transcript.replaceChildren();
    inspector.replaceChildren();
    errors.replaceChildren();
  });

  saveButton.addEventListener("click", () => {
    const blob = new Blob([session.toJSON()], { type: "application/json" });
    const link = document.createElement("a");
    link.href = URL.createObjectURL(blob);
    link.download = `opsrag-session-${session.sessionId ?? "new"}.json`;
    link.click();
    URL.revokeObjectURL(link.href);
  });

  loadInput.addEventListener("change", async () => {
    const file = loadInput.files?.[0];
    if (!file) return;
    try {
      session = Session.fromJSON(await file.text(), api);
      taskSelect.value = session.task;
      topKInput.value = String(session.topK);
      transcript.replaceChildren(...session.turns.map(renderTurn));
    } catch (err) {
      showError(`could not load transcript: ${(err as Error).message}`);
    } finally {
      loadInput.value = "";
    }
  });

  void refreshHealth();
}

document.addEventListener("DOMContentLoaded", bootstrap);
