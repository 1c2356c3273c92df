// Single page review flow: run picker, review table, metrics panel.
//
// All state lives in one App instance and every interaction re-renders from
// it, so nothing survives in the DOM that the service does not know about.
// Rendering is innerHTML replacement; events are delegated from the root.

import type { FetchLike } from "./api.js";
import { ApiClient, ApiError } from "./api.js";
import type { Filter } from "./agreement.js";
import { applyFilter, toView } from "./agreement.js";
import { selectionProblem, toggleCode } from "./picker.js";
import type { MetricsReport, RunDetail, RunListRow, TurnRowView } from "./types.js";
import type { EditorState } from "./views.js";
import {
  renderBanner,
  renderFilterBar,
  renderLineage,
  renderMetricsPanel,
  renderProgress,
  renderRetryBanner,
  renderRunOptions,
  renderTable,
} from "./views.js";

export const POLL_MS = 3000;

interface Banner {
  kind: "error" | "info" | "success";
  text: string;
  retry: boolean;
}

interface AppState {
  runs: RunListRow[];
  runId: string | null;
  detail: RunDetail | null;
  rows: TurnRowView[];
  metrics: MetricsReport | null;
  metricsMode: string;
  filter: Filter;
  editor: EditorState | null;
  banner: Banner | null;
}

const SHELL = `
  <header class="top"><h1>coding run review</h1>
    <label class="run-pick">run <select id="run-select"></select></label>
  </header>
  <div id="banner-slot"></div>
  <main class="columns">
    <section id="review-slot" class="review-col"></section>
    <aside id="metrics-slot" class="metrics-col"></aside>
  </main>`;

export class App {
  private api: ApiClient;
  private state: AppState = {
    runs: [],
    runId: null,
    detail: null,
    rows: [],
    metrics: null,
    metricsMode: "exact",
    filter: { kind: "all" },
    editor: null,
    banner: null,
  };
  private pollTimer: ReturnType<typeof setTimeout> | null = null;

  constructor(private root: HTMLElement, fetchImpl?: FetchLike) {
    this.api = new ApiClient(fetchImpl);
    this.root.innerHTML = SHELL;
    this.root.addEventListener("click", (ev) => this.onClick(ev));
    this.root.addEventListener("change", (ev) => this.onChange(ev));
    this.root.addEventListener("input", (ev) => this.onInput(ev));
  }

  async start(): Promise<void> {
    await this.refreshRuns();
    this.render();
  }

  stop(): void {
    if (this.pollTimer !== null) {
      clearTimeout(this.pollTimer);
      this.pollTimer = null;
    }
  }

  private async refreshRuns(): Promise<void> {
    try {
      this.state.runs = await this.api.runs();
    } catch (exc) {
      this.fail(exc);
    }
  }

  async selectRun(runId: string | null): Promise<void> {
    this.stop();
    this.state.runId = runId;
    this.state.detail = null;
    this.state.rows = [];
    this.state.metrics = null;
    this.state.editor = null;
    this.state.banner = null;
    this.state.filter = { kind: "all" };
    if (runId !== null) await this.loadRun();
    this.render();
  }

  private async loadRun(): Promise<void> {
    const runId = this.state.runId;
    if (runId === null) return;
    try {
      const detail = await this.api.run(runId);
      this.state.detail = detail;
      if (detail.status === "complete") {
        const results = await this.api.results(runId);
        this.state.rows = results.map(toView);
        await this.loadMetrics();
      } else if (detail.status === "running") {
        this.schedulePoll();
      }
    } catch (exc) {
      this.fail(exc);
    }
  }

  private async loadMetrics(): Promise<void> {
    const runId = this.state.runId;
    if (runId === null) return;
    try {
      this.state.metrics = await this.api.metrics(runId, this.state.metricsMode);
    } catch (exc) {
      if (exc instanceof ApiError && exc.code === "no_gold") {
        this.state.metrics = null;
        return;
      }
      throw exc;
    }
  }

  private schedulePoll(): void {
    this.stop();
    this.pollTimer = setTimeout(() => {
      this.pollTimer = null;
      void this.pollOnce();
    }, POLL_MS);
  }

  private async pollOnce(): Promise<void> {
    await this.loadRun();
    this.render();
  }

  private openEditor(turnId: number): void {
    const row = this.state.rows.find((r) => r.turn_id === turnId);
    if (!row) return;
    this.state.editor = {
      turn_id: turnId,
      selection: [...(row.adjudicated_codes ?? row.predicted_codes)],
      note: "",
      problem: null,
    };
    this.render();
  }

  private async saveAdjudication(): Promise<void> {
    const editor = this.state.editor;
    const runId = this.state.runId;
    if (editor === null || runId === null) return;
    const problem = selectionProblem(editor.selection);
    if (problem !== null) {
      editor.problem = problem;
      this.render();
      return;
    }
    try {
      const saved = await this.api.adjudicate(runId, {
        turn_id: editor.turn_id,
        codes: editor.selection,
        note: editor.note,
      });
      const row = this.state.rows.find((r) => r.turn_id === editor.turn_id);
      if (row) row.adjudicated_codes = saved.codes;
      this.state.editor = null;
      this.state.detail = await this.api.run(runId);
    } catch (exc) {
      if (exc instanceof ApiError && exc.status === 422) {
        editor.problem = exc.message;
      } else {
        this.fail(exc);
      }
    }
    this.render();
  }

  private async compileFeedback(): Promise<void> {
    const runId = this.state.runId;
    if (runId === null) return;
    try {
      const result = await this.api.compileFeedback(runId);
      this.state.detail = await this.api.run(runId);
      this.state.banner = {
        kind: "success",
        text: `feedback compiled into config ${result.new_config_hash}`,
        retry: false,
      };
    } catch (exc) {
      if (exc instanceof ApiError && exc.status === 422) {
        this.state.banner = { kind: "error", text: `feedback rejected: ${exc.message}`, retry: false };
      } else {
        this.fail(exc);
      }
    }
    this.render();
  }

  private async retry(): Promise<void> {
    this.state.banner = null;
    await this.refreshRuns();
    if (this.state.runId !== null) await this.loadRun();
    this.render();
  }

  private fail(exc: unknown): void {
    if (exc instanceof ApiError) {
      this.state.banner = { kind: "error", text: exc.message, retry: exc.code === "unreachable" };
    } else {
      this.state.banner = { kind: "error", text: String(exc), retry: false };
    }
  }

  private onClick(ev: Event): void {
    const target = ev.target as HTMLElement;
    if (target.classList.contains("adjudicate-btn")) {
      this.openEditor(Number(target.dataset.turn));
    } else if (target.classList.contains("save-btn")) {
      void this.saveAdjudication();
    } else if (target.classList.contains("cancel-btn")) {
      this.state.editor = null;
      this.render();
    } else if (target.id === "feedback-btn") {
      void this.compileFeedback();
    } else if (target.id === "retry-btn") {
      void this.retry();
    }
  }

  private onChange(ev: Event): void {
    const target = ev.target as HTMLInputElement;
    if (target.id === "run-select") {
      void this.selectRun(target.value === "" ? null : target.value);
    } else if (target.name === "filter") {
      if (target.value === "code") {
        const select = this.root.querySelector<HTMLSelectElement>("#filter-code");
        this.state.filter = { kind: "code", code: select ? select.value : "ELI" };
      } else {
        this.state.filter = { kind: target.value as "all" | "disagreements" };
      }
      this.state.editor = null;
      this.render();
    } else if (target.id === "filter-code") {
      this.state.filter = { kind: "code", code: target.value };
      this.state.editor = null;
      this.render();
    } else if (target.name === "mode") {
      this.state.metricsMode = target.value;
      void this.loadMetrics()
        .then(() => this.render())
        .catch((exc) => {
          this.fail(exc);
          this.render();
        });
    } else if (target.classList.contains("code-box")) {
      const editor = this.state.editor;
      if (editor !== null) {
        editor.selection = toggleCode(editor.selection, target.value);
        editor.problem = null;
        this.render();
      }
    }
  }

  private onInput(ev: Event): void {
    const target = ev.target as HTMLInputElement;
    if (target.classList.contains("note-input") && this.state.editor !== null) {
      this.state.editor.note = target.value;
    }
  }

  private render(): void {
    const { state } = this;
    const select = this.root.querySelector<HTMLSelectElement>("#run-select");
    if (select) select.innerHTML = renderRunOptions(state.runs, state.runId);

    const bannerSlot = this.root.querySelector<HTMLElement>("#banner-slot");
    if (bannerSlot) {
      if (state.banner === null) bannerSlot.innerHTML = "";
      else if (state.banner.retry) bannerSlot.innerHTML = renderRetryBanner(state.banner.text);
      else bannerSlot.innerHTML = renderBanner(state.banner.kind, state.banner.text);
    }

    const review = this.root.querySelector<HTMLElement>("#review-slot");
    const metrics = this.root.querySelector<HTMLElement>("#metrics-slot");
    if (!review || !metrics) return;
    const detail = state.detail;
    if (detail === null) {
      review.innerHTML = `<div class="muted">select a run to review</div>`;
      metrics.innerHTML = "";
      return;
    }
    if (detail.status !== "complete") {
      review.innerHTML = renderProgress(detail);
      metrics.innerHTML = "";
      return;
    }
    review.innerHTML =
      `<div class="filter-bar">${renderFilterBar(state.filter, detail.pending_adjudications)}</div>` +
      renderTable(applyFilter(state.rows, state.filter), state.editor) +
      renderLineage(detail);
    metrics.innerHTML = renderMetricsPanel(state.metrics, state.metricsMode);
  }
}

export async function bootstrap(root: HTMLElement, fetchImpl?: FetchLike): Promise<App> {
  const app = new App(root, fetchImpl);
  await app.start();
  return app;
}
