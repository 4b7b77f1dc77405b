import type { ChunkDetail, CitedChunk, Turn } from "./types.js";

// Rendering is string-free of business logic: every figure on screen is a
// field from a runtime payload.

function el<K extends keyof HTMLElementTagNameMap>(
  tag: K,
  className?: string,
  text?: string,
): HTMLElementTagNameMap[K] {
  const node = document.createElement(tag);
  if (className) node.className = className;
  if (text !== undefined) node.textContent = text;
  return node;
}

export function renderCitationPanel(chunk: CitedChunk, index: number): HTMLElement {
  const panel = el("details", "citation-panel");
  panel.dataset.chunkId = chunk.id;
  const summary = el("summary", "citation-summary");
  summary.append(
    el("span", "citation-rank", `#${index}`),
    el("span", "citation-id", chunk.id),
    el("span", "citation-score", chunk.score.toFixed(4)),
  );
  const inspect = el("button", "citation-inspect", "inspect");
  inspect.type = "button";
  inspect.dataset.chunkId = chunk.id;
  summary.append(inspect);
  panel.append(summary, el("pre", "citation-text", chunk.text));
  return panel;
}

export function renderTurn(turn: Turn): HTMLElement {
  const node = el("section", "turn");
  node.dataset.task = turn.task;

  const question = el("div", "bubble question");
  question.append(
    el("span", "task-tag", turn.task === "troubleshooting" ? "TS" : "KA"),
    el("p", "question-text", turn.question),
  );

  const answer = el("div", "bubble answer");
  answer.append(el("p", "answer-text", turn.response.answer));
  answer.append(
    el(
      "p",
      "latency",
      `retrieval ${turn.response.retrieval_ms.toFixed(1)} ms · ` +
        `generation ${turn.response.generation_ms.toFixed(1)} ms`,
    ),
  );

  const citations = el("div", "citations");
  turn.response.chunks.forEach((chunk, i) => {
    citations.append(renderCitationPanel(chunk, i));
  });

  node.append(question, answer, citations);
  return node;
}

export function renderChunkDetail(detail: ChunkDetail): HTMLElement {
  const node = el("div", "chunk-detail");
  node.dataset.chunkId = detail.id;
  const crumbs = el("nav", "title-path");
  if (detail.title_path.length === 0) {
    crumbs.append(el("span", "crumb crumb-empty", "(no title path)"));
  }
  detail.title_path.forEach((title, i) => {
    if (i > 0) crumbs.append(el("span", "crumb-sep", "›"));
    crumbs.append(el("span", "crumb", title));
  });
  node.append(
    el("h3", "chunk-id", detail.id),
    crumbs,
    el("p", "chunk-meta", `${detail.token_count} tokens · ${detail.method} · ${detail.doc_id}`),
    el("pre", "chunk-body", detail.body),
  );
  return node;
}

export function renderError(message: string): HTMLElement {
  const banner = el("div", "error-banner");
  banner.setAttribute("role", "alert");
  banner.append(el("span", "error-message", message));
  const retry = el("button", "error-retry", "retry");
  retry.type = "button";
  banner.append(retry);
  return banner;
}

export function renderTranscript(turns: readonly Turn[]): HTMLElement {
  const node = el("div", "transcript");
  for (const turn of turns) {
    node.append(renderTurn(turn));
  }
  return node;
}
