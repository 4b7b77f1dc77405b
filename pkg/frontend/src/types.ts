// Wire types mirroring the runtime's HTTP API. The console never invents
// numbers: everything rendered comes from one of these payloads.

export type Task = "knowledge_acquisition" | "troubleshooting";

export interface CitedChunk {
  id: string;
  score: number;
  text: string;
}

export interface QueryResponse {
  answer: string;
  chunks: CitedChunk[];
  retrieval_ms: number;
  generation_ms: number;
  session_id: string;
}

export interface RetrieveResponse {
  chunks: CitedChunk[];
}

export interface ChunkDetail {
  id: string;
  doc_id: string;
  title_path: string[];
  body: string;
  token_count: number;
  method: string;
}

export interface Turn {
  question: string;
  task: Task;
  topK: number;
  response: QueryResponse;
}

export interface TranscriptFile {
  version: 1;
  sessionId: string | null;
  task: Task;
  topK: number;
  turns: Turn[];
}
