import type {
  CorrectionPayload,
  ExplanationView,
  InferenceSummary,
  RetrainJob,
} from "./model.js";

export class ApiError extends Error {
  constructor(public status: number, message: string) {
    super(message);
  }
}

export class Api {
  constructor(private base: string) {}

  private async call<T>(method: string, path: string, body?: unknown): Promise<T> {
    const res = await fetch(this.base + path, {
      method,
      headers: body === undefined ? {} : { "content-type": "application/json" },
      body: body === undefined ? undefined : JSON.stringify(body),
    });
    const data = await res.json().catch(() => null);
    if (!res.ok) throw new ApiError(res.status, (data && data.error) || res.statusText);
    return data as T;
  }

  pending(): Promise<InferenceSummary[]> {
    return this.call("GET", "/inferences?status=pending");
  }

  explanation(id: string): Promise<ExplanationView> {
    return this.call("GET", `/explanations/${encodeURIComponent(id)}`);
  }

  correct(p: CorrectionPayload): Promise<{ id: string }> {
    return this.call("POST", "/corrections", p);
  }

  createSession(ids?: string[]): Promise<{ id: string; queue: string[]; cursor: number; status: string }> {
    return this.call("POST", "/sessions", ids ? { explanation_ids: ids } : {});
  }

  session(id: string): Promise<{ id: string; queue: string[]; cursor: number; status: string }> {
    return this.call("GET", `/sessions/${encodeURIComponent(id)}`);
  }

  setCursor(id: string, cursor: number): Promise<unknown> {
    return this.call("POST", `/sessions/${encodeURIComponent(id)}/cursor`, { cursor });
  }

  submitSession(id: string): Promise<unknown> {
    return this.call("POST", `/sessions/${encodeURIComponent(id)}/submit`);
  }

  retrain(): Promise<RetrainJob> {
    return this.call("POST", "/retrain");
  }

  job(id: string): Promise<RetrainJob> {
    return this.call("GET", `/jobs/${encodeURIComponent(id)}`);
  }
}
