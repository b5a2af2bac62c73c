// Client-side review state. Pure functions only, so it can be tested
// without a browser.

export interface NamedTriple {
  h: string;
  r: string;
  t: string;
}

export interface OptionView {
  index: number;
  option: { kind: "fact" | "none_of_the_above"; fact?: unknown };
  fact: NamedTriple | null;
  text: string;
}

export interface HopView {
  index: number;
  fact: NamedTriple;
  slot: "head" | "tail";
  text: string;
  options: OptionView[];
}

export interface ExplanationView {
  id: string;
  generation: number;
  status: "pending" | "submitted";
  explanation: { text: string; predicted: boolean };
  hops: HopView[];
}

export interface InferenceSummary {
  explanation_id: string;
  text: string;
  predicted: boolean;
  status: "pending" | "submitted";
}

export interface CorrectionPayload {
  explanation_id: string;
  hop_index: number;
  chosen: number;
  session_id?: string;
}

export interface LinkReport {
  mrr: number;
}

export interface RetrainJob {
  id: string;
  status: "queued" | "running" | "done" | "failed";
  before: LinkReport | null;
  after: LinkReport | null;
  error: string | null;
}

export type Submission = "idle" | "submitting" | "submitted" | "error";

export interface ReviewState {
  sessionId: string | null;
  queue: string[];
  cursor: number;
  active: ExplanationView | null;
  /** hop index -> chosen option index */
  selections: Map<number, number>;
  submission: Submission;
  /** explanation id -> server record ids */
  confirmed: Map<string, string[]>;
}

export function emptyState(): ReviewState {
  return {
    sessionId: null,
    queue: [],
    cursor: 0,
    active: null,
    selections: new Map(),
    submission: "idle",
    confirmed: new Map(),
  };
}

export function select(s: ReviewState, hop: number, option: number): ReviewState {
  if (!s.active || hop < 0 || hop >= s.active.hops.length) return s;
  if (option < 0 || option >= s.active.hops[hop].options.length) return s;
  const selections = new Map(s.selections);
  selections.set(hop, option);
  return { ...s, selections };
}

/** Hops still waiting for a choice. */
export function missingHops(s: ReviewState): number[] {
  if (!s.active) return [];
  return s.active.hops.map((h) => h.index).filter((i) => !s.selections.has(i));
}

export function canSubmit(s: ReviewState): boolean {
  return (
    s.active !== null &&
    s.active.status === "pending" &&
    s.submission !== "submitting" &&
    !s.confirmed.has(s.active.id) &&
    missingHops(s).length === 0
  );
}

/** One POST /corrections body per hop, in hop order. */
export function payloads(s: ReviewState): CorrectionPayload[] {
  if (!s.active) return [];
  const id = s.active.id;
  return s.active.hops.map((h) => {
    const p: CorrectionPayload = { explanation_id: id, hop_index: h.index, chosen: s.selections.get(h.index)! };
    if (s.sessionId) p.session_id = s.sessionId;
    return p;
  });
}

export function progress(s: ReviewState): string {
  if (s.queue.length === 0) return "0 / 0";
  return `${Math.min(s.cursor + 1, s.queue.length)} / ${s.queue.length}`;
}

export function mrrDelta(job: RetrainJob): number | null {
  if (!job.before || !job.after) return null;
  return job.after.mrr - job.before.mrr;
}
