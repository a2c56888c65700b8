// Thin client over the design service HTTP API.

import type { CandidateCard, Design, Target, TrajectoryDict, ValidationReport } from "./schema.js";

export type FetchLike = (input: string, init?: RequestInit) => Promise<Response>;

export class ApiError extends Error {
  constructor(message: string, public status: number, public body: unknown = null) {
    super(message);
  }
}

export interface InverseEpoch {
  epoch: number;
  score: number;
  adopted: string;
}

export interface InverseResult {
  done: true;
  design: Design;
  history: InverseEpoch[];
}

/** Split streamed JSONL, tolerating a trailing partial line. */
export function parseJsonLines(buffer: string): { rows: unknown[]; rest: string } {
  const rows: unknown[] = [];
  const parts = buffer.split("\n");
  const rest = parts.pop() ?? "";
  for (const part of parts) {
    if (part.trim().length) rows.push(JSON.parse(part));
  }
  return { rows, rest };
}

export class StudioApi {
  constructor(private fetchImpl: FetchLike = (i, init) => fetch(i, init), private base = "") {}

  private async post(path: string, payload: unknown): Promise<Response> {
    return this.fetchImpl(this.base + path, {
      method: "POST",
      headers: { "Content-Type": "application/json" },
      body: JSON.stringify(payload),
    });
  }

  async modelInfo(): Promise<Record<string, unknown>> {
    const res = await this.fetchImpl(this.base + "/api/model/info");
    if (!res.ok) throw new ApiError("model info unavailable", res.status);
    return (await res.json()) as Record<string, unknown>;
  }

  async validate(design: Design): Promise<ValidationReport> {
    const res = await this.post("/api/validate", design);
    if (!res.ok) throw new ApiError("validation request failed", res.status, await res.json());
    return (await res.json()) as ValidationReport;
  }

  /** 422 responses carry the blocking validation report. */
  async simulate(design: Design, withOracle = false): Promise<TrajectoryDict> {
    const res = await this.post("/api/simulate", { design, with_oracle: withOracle });
    const body = await res.json();
    if (res.status === 422) {
      throw new ApiError("design has validation errors", 422, body);
    }
    if (!res.ok) throw new ApiError("simulation failed", res.status, body);
    return body as TrajectoryDict;
  }

  async inverseStep(
    design: Design,
    targets: Target[],
    topk = 5,
    step = 2.0
  ): Promise<{ candidates: CandidateCard[]; dropped: unknown[] }> {
    const res = await this.post("/api/inverse/step", { design, targets, topk, step });
    const body = await res.json();
    if (!res.ok) throw new ApiError("inverse step failed", res.status, body);
    return body as { candidates: CandidateCard[]; dropped: unknown[] };
  }

  /** Streams one epoch row at a time; returns the final design+history. */
  async inverseRun(
    design: Design,
    targets: Target[],
    epochs: number,
    step: number,
    onEpoch: (row: InverseEpoch) => void
  ): Promise<InverseResult> {
    const res = await this.post("/api/inverse/run", { design, targets, epochs, step });
    if (!res.ok) throw new ApiError("inverse run failed", res.status, await res.json());
    let finalRow: InverseResult | null = null;
    const handle = (row: unknown) => {
      if (row && typeof row === "object" && "done" in (row as object)) {
        finalRow = row as InverseResult;
      } else {
        onEpoch(row as InverseEpoch);
      }
    };
    if (res.body && typeof res.body.getReader === "function") {
      const reader = res.body.getReader();
      const decoder = new TextDecoder();
      let buffer = "";
      for (;;) {
        const { done, value } = await reader.read();
        if (done) break;
        buffer += decoder.decode(value, { stream: true });
        const { rows, rest } = parseJsonLines(buffer);
        buffer = rest;
        rows.forEach(handle);
      }
      parseJsonLines(buffer + "\n").rows.forEach(handle);
    } else {
      parseJsonLines((await res.text()) + "\n").rows.forEach(handle);
    }
    if (!finalRow) throw new ApiError("stream ended without a result", 500);
    return finalRow;
  }

  async saveDesign(id: string, design: Design): Promise<void> {
    const res = await this.fetchImpl(this.base + `/api/designs/${id}`, {
      method: "PUT",
      headers: { "Content-Type": "application/json" },
      body: JSON.stringify(design),
    });
    if (!res.ok) throw new ApiError("save failed", res.status);
  }

  async loadDesign(id: string): Promise<Design> {
    const res = await this.fetchImpl(this.base + `/api/designs/${id}`);
    if (!res.ok) throw new ApiError(`design ${id} not found`, res.status);
    return (await res.json()) as Design;
  }
}
