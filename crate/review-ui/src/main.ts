import { Api, ApiError } from "./api.js";
import {
  canSubmit,
  emptyState,
  missingHops,
  mrrDelta,
  payloads,
  progress,
  select,
  ReviewState,
  RetrainJob,
} from "./model.js";

const api = new Api((document.body.dataset.api ?? "").replace(/\/$/, ""));
let state: ReviewState = emptyState();

const $ = (id: string) => document.getElementById(id)!;

function el<K extends keyof HTMLElementTagNameMap>(tag: K, text?: string, cls?: string): HTMLElementTagNameMap[K] {
  const e = document.createElement(tag);
  if (text !== undefined) e.textContent = text;
  if (cls) e.className = cls;
  return e;
}

function banner(msg: string | null, retry?: () => void) {
  const b = $("banner");
  b.replaceChildren();
  b.hidden = msg === null;
  if (msg === null) return;
  b.append(el("span", msg));
  if (retry) {
    const btn = el("button", "Retry");
    btn.onclick = () => {
      banner(null);
      retry();
    };
    b.append(btn);
  }
}

async function guarded(f: () => Promise<void>) {
  try {
    await f();
  } catch (e) {
    if (e instanceof ApiError) banner(`Server said ${e.status}: ${e.message}`);
    else banner("Cannot reach the review service.", () => void guarded(f));
  }
}

function setUrlSession(id: string | null) {
  const url = new URL(window.location.href);
  if (id) url.searchParams.set("session", id);
  else url.searchParams.delete("session");
  history.replaceState(null, "", url);
}

async function start() {
  const id = new URLSearchParams(window.location.search).get("session");
  if (id) {
    const s = await api.session(id);
    state = { ...emptyState(), sessionId: s.id, queue: s.queue, cursor: s.cursor };
    if (s.status === "submitted") return renderDone();
    return loadActive();
  }
  const pending = await api.pending();
  const main = $("main");
  main.replaceChildren();
  if (pending.length === 0) {
    main.append(el("p", "Nothing to review right now.", "empty"));
    return renderRetrain();
  }
  const list = el("ol");
  for (const p of pending) list.append(el("li", p.text));
  const go = el("button", `Review ${pending.length} inference${pending.length === 1 ? "" : "s"}`);
  go.onclick = () =>
    void guarded(async () => {
      const s = await api.createSession();
      state = { ...emptyState(), sessionId: s.id, queue: s.queue, cursor: s.cursor };
      setUrlSession(s.id);
      await loadActive();
    });
  main.append(el("h2", "Pending inferences"), list, go);
}

async function loadActive() {
  if (state.cursor >= state.queue.length) return finishSession();
  const x = await api.explanation(state.queue[state.cursor]);
  state = { ...state, active: x, selections: new Map(), submission: "idle" };
  render();
}

function render() {
  const main = $("main");
  main.replaceChildren();
  const x = state.active;
  if (!x) return;
  main.append(el("p", `Inference ${progress(state)}`, "progress"));
  main.append(el("blockquote", x.explanation.text));
  main.append(
    el("p", x.hops.length > 0 ? "For each fact the robot relied on, pick the most correct version." : "No facts to check here. Submit to move on."),
  );
  for (const hop of x.hops) {
    const fs = el("fieldset");
    fs.append(el("legend", `Fact ${hop.index + 1}: ${hop.text}`));
    for (const o of hop.options) {
      const label = el("label");
      const r = el("input");
      r.type = "radio";
      r.name = `hop-${hop.index}`;
      r.checked = state.selections.get(hop.index) === o.index;
      r.disabled = state.submission === "submitting" || x.status !== "pending";
      r.onchange = () => {
        state = select(state, hop.index, o.index);
        render();
      };
      label.append(r, document.createTextNode(" " + o.text));
      fs.append(label);
    }
    main.append(fs);
  }
  const submit = el("button", "Submit");
  submit.disabled = !canSubmit(state);
  submit.onclick = () => void guarded(submitActive);
  main.append(submit);
  const missing = missingHops(state);
  if (missing.length > 0) {
    main.append(el("span", `Choose an option for fact ${missing.map((i) => i + 1).join(", ")}.`, "hint"));
  }
}

async function submitActive() {
  if (!canSubmit(state)) return;
  const x = state.active!;
  state = { ...state, submission: "submitting" };
  render();
  try {
    const ids: string[] = [];
    for (const p of payloads(state)) ids.push((await api.correct(p)).id);
    const confirmed = new Map(state.confirmed);
    confirmed.set(x.id, ids);
    state = { ...state, confirmed, submission: "submitted", cursor: state.cursor + 1 };
  } catch (e) {
    state = { ...state, submission: "error" };
    render();
    throw e;
  }
  if (state.sessionId && state.cursor < state.queue.length) await api.setCursor(state.sessionId, state.cursor);
  await loadActive();
}

async function finishSession() {
  if (state.sessionId) {
    try {
      await api.submitSession(state.sessionId);
    } catch (e) {
      // Already submitted from another tab is fine.
      if (!(e instanceof ApiError && e.status === 409)) throw e;
    }
  }
  renderDone();
}

function renderDone() {
  const main = $("main");
  main.replaceChildren(el("p", "Session submitted. Thank you!"));
  const again = el("button", "Back to pending inferences");
  again.onclick = () => {
    setUrlSession(null);
    state = emptyState();
    void guarded(start);
  };
  main.append(again);
  renderRetrain();
}

function renderRetrain() {
  const panel = $("retrain");
  panel.replaceChildren();
  const btn = el("button", "Retrain with corrections");
  btn.onclick = () =>
    void guarded(async () => {
      try {
        const job = await api.retrain();
        btn.disabled = true;
        await poll(job.id);
      } catch (e) {
        if (e instanceof ApiError && e.status === 409) {
          panel.append(el("p", "Retrain in progress.", "hint"));
          return;
        }
        throw e;
      } finally {
        btn.disabled = false;
      }
    });
  panel.append(btn);
}

async function poll(id: string) {
  const panel = $("retrain");
  const status = el("p", `Job ${id}: queued`);
  panel.append(status);
  for (;;) {
    const job: RetrainJob = await api.job(id);
    status.textContent = `Job ${id}: ${job.status}`;
    if (job.status === "failed") {
      status.className = "error";
      status.textContent = `Job ${id} failed: ${job.error ?? "unknown error"}`;
      return;
    }
    if (job.status === "done") {
      const d = mrrDelta(job);
      status.textContent =
        `Job ${id} done. MRR before ${job.before!.mrr.toFixed(3)}, after ${job.after!.mrr.toFixed(3)}` +
        (d === null ? "" : ` (${d >= 0 ? "+" : ""}${d.toFixed(3)})`);
      return;
    }
    await new Promise((r) => setTimeout(r, 1000));
  }
}

void guarded(start);
