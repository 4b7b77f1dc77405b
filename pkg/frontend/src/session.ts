import type { ConsoleApi } from "./api.js";
import type { Task, TranscriptFile, Turn } from "./types.js";

/**
 * One QA session: an append-only list of turns plus the current selector
 * state. At most one query is in flight at a time; follow-up questions reuse
 * the session id the runtime assigned on the first turn.
 */
export class Session {
  readonly turns: Turn[] = [];
  sessionId: string | null = null;
  task: Task = "knowledge_acquisition";
  topK = 5;
  private inFlight = false;

  constructor(private api: ConsoleApi) {}

  get busy(): boolean {
    return this.inFlight;
  }

  async submit(question: string, task: Task, topK: number): Promise<Turn> {
    if (this.inFlight) {
      throw new Error("a query is already in flight for this session");
    }
    if (!question.trim()) {
      throw new Error("question is empty");
    }
    this.inFlight = true;
    try {
      const response = await this.api.query(question, task, topK, this.sessionId);
      this.sessionId = response.session_id;
      this.task = task;
      this.topK = topK;
      const turn: Turn = { question, task, topK, response };
      this.turns.push(turn);
      return turn;
    } finally {
      this.inFlight = false;
    }
  }

  toJSON(): string {
    const file: TranscriptFile = {
      version: 1,
      sessionId: this.sessionId,
      task: this.task,
      topK: this.topK,
      turns: this.turns,
    };
    return JSON.stringify(file, null, 2);
  }

  static fromJSON(json: string, api: ConsoleApi): Session {
    const file = JSON.parse(json) as TranscriptFile;
    if (file.version !== 1) {
      throw new Error(`unsupported transcript version ${String(file.version)}`);
    }
    const session = new Session(api);
    session.sessionId = file.sessionId;
    session.task = file.task;
    session.topK = file.topK;
    for (const turn of file.turns) {
      session.turns.push(turn);
    }
    return session;
  }
}
