// @vitest-environment happy-dom

import { afterEach, describe, expect, it } from "vitest";

import { ApiClient } from "../src/api.js";
import type { FetchLike } from "../src/api.js";
import type { App } from "../src/app.js";
import { bootstrap } from "../src/app.js";
import type { LineageEntry, MetricsReport, ResultRow } from "../src/types.js";

const HASH_A = "a".repeat(64);
const HASH_B = "b".repeat(64);

// In-memory stand-in for the review service. It keeps adjudications and
// lineage across "page reloads" (fresh bootstraps against the same instance),
// which is what the persistence tests lean on.
class FakeService {
  status = "complete";
  failure: string | null = null;
  failedBatch: number | null = null;
  hasGold = true;
  overBudget = false;
  unreachable = false;
  currentHash = HASH_A;
  lineage: LineageEntry[] = [];
  adjudications = new Map<number, { codes: string[]; note: string }>();
  pendingTurns = new Set<number>();
  requests: string[] = [];

  private results(): ResultRow[] {
    const rows: ResultRow[] = [
      {
        turn_id: 1,
        speaker: "Teacher",
        text: "Why does the ice float?",
        predicted_codes: ["A"],
        justification: "affirmation",
        gold_codes: ["A"],
        adjudicated_codes: null,
      },
      {
        turn_id: 2,
        speaker: "Student",
        text: "Because it is lighter than water.",
        predicted_codes: ["Q"],
        justification: "",
        gold_codes: ["EL"],
        adjudicated_codes: null,
      },
      {
        turn_id: 3,
        speaker: "Teacher",
        text: "Good. Say more about density.",
        predicted_codes: ["A"],
        justification: "",
        gold_codes: ["A", "RE"],
        adjudicated_codes: null,
      },
      {
        turn_id: 4,
        speaker: "Student",
        text: "(inaudible)",
        predicted_codes: ["UC"],
        justification: "",
        gold_codes: ["UC"],
        adjudicated_codes: null,
      },
    ];
    for (const row of rows) {
      if (!this.hasGold) row.gold_codes = null;
      const adj = this.adjudications.get(row.turn_id);
      if (adj) row.adjudicated_codes = [...adj.codes].sort();
    }
    return rows;
  }

  private detail() {
    return {
      run_id: "run-1",
      lesson_id: "demo",
      config_hash: HASH_A,
      current_config_hash: this.currentHash,
      backend_id: "mock",
      status: this.status,
      policy: { batch_size: 2, reset_between_batches: true, verify_rules_first: false },
      batches_sent: 2,
      batches_parsed: this.status === "complete" ? 2 : 1,
      turns_coded: this.status === "complete" ? 4 : 2,
      failure: this.failure,
      failed_batch: this.failedBatch,
      pending_adjudications: this.pendingTurns.size,
      lineage: this.lineage,
    };
  }

  private metrics(mode: string): MetricsReport {
    const exact = mode === "exact";
    const perCode = ["ELI", "EL", "IRE", "RE", "IC", "SC", "RC", "A", "Q", "RB", "RW", "OI", "UC"].map(
      (code) => ({
        code,
        precision: code === "A" ? (exact ? 0.5 : 1.0) : code === "Q" ? 0.0 : null,
        recall: code === "A" ? 0.5 : null,
        accuracy: 0.75,
        f1: code === "A" ? 0.5 : null,
      })
    );
    return {
      match_mode: mode,
      turn_count: 4,
      turn_precision: exact ? 0.5 : 0.75,
      per_code: perCode,
    };
  }

  fetch: FetchLike = async (path, init) => {
    if (this.unreachable) throw new TypeError("fetch failed");
    const method = init?.method ?? "GET";
    this.requests.push(`${method} ${path}`);
    const json = (body: unknown, status = 200) =>
      new Response(JSON.stringify(body), {
        status,
        headers: { "content-type": "application/json" },
      });
    const url = new URL(path, "http://service");
    const route = `${method} ${url.pathname}`;
    if (route === "GET /api/runs") {
      return json([
        { run_id: "run-1", lesson_id: "demo", status: this.status, turn_count: 4 },
      ]);
    }
    if (route === "GET /api/runs/run-1") return json(this.detail());
    if (route === "GET /api/runs/run-1/results") return json(this.results());
    if (route === "GET /api/runs/run-1/metrics") {
      if (!this.hasGold) {
        return json({ error: "no_gold", message: "lesson 'demo' has no gold labels" }, 422);
      }
      return json(this.metrics(url.searchParams.get("mode") ?? "exact"));
    }
    if (route === "POST /api/runs/run-1/adjudications") {
      const body = JSON.parse(init?.body as string) as {
        turn_id: number;
        codes: string[];
        note: string;
      };
      if (body.codes.length === 0) {
        return json({ error: "validation", message: "empty code list" }, 422);
      }
      if (body.codes.includes("UC") && body.codes.length > 1) {
        return json(
          { error: "validation", message: "UC cannot be combined with other codes" },
          422
        );
      }
      this.adjudications.set(body.turn_id, { codes: body.codes, note: body.note });
      this.pendingTurns.add(body.turn_id);
      return json({
        turn_id: body.turn_id,
        codes: [...body.codes].sort(),
        note: body.note,
        agent_codes: [],
      });
    }
    if (route === "POST /api/runs/run-1/feedback/compile") {
      if (this.pendingTurns.size === 0) {
        return json(
          { error: "no_pending_adjudications", message: "no adjudications to compile" },
          422
        );
      }
      if (this.overBudget) {
        return json(
          { error: "feedback_rejected", message: "estimated 130000 tokens exceeds budget of 120000" },
          422
        );
      }
      const parent = this.currentHash;
      this.currentHash = HASH_B;
      this.lineage.push({
        parent_hash: parent,
        config_hash: HASH_B,
        cycle: this.lineage.length,
        turn_ids: [...this.pendingTurns].sort((a, b) => a - b),
      });
      this.pendingTurns.clear();
      return json({ new_config_hash: HASH_B });
    }
    return json({ error: "unknown_run", message: `no route ${route}` }, 404);
  };
}

const apps: App[] = [];

function mount(): HTMLElement {
  const root = document.createElement("div");
  document.body.appendChild(root);
  return root;
}

async function until(cond: () => boolean, what: string): Promise<void> {
  const start = Date.now();
  while (!cond()) {
    if (Date.now() - start > 2000) throw new Error(`timed out waiting for ${what}`);
    await new Promise((resolve) => setTimeout(resolve, 5));
  }
}

function pickRun(root: HTMLElement): void {
  const select = root.querySelector<HTMLSelectElement>("#run-select");
  if (!select) throw new Error("no run select");
  select.value = "run-1";
  select.dispatchEvent(new Event("change", { bubbles: true }));
}

async function openRun(server: FakeService): Promise<HTMLElement> {
  const root = mount();
  apps.push(await bootstrap(root, server.fetch));
  await until(
    () => (root.querySelector<HTMLSelectElement>("#run-select")?.options.length ?? 0) > 1,
    "run options"
  );
  pickRun(root);
  await until(
    () => root.querySelector("tr.turn-row, .banner, .empty") !== null,
    "run content"
  );
  return root;
}

function visibleTurnIds(root: HTMLElement): string[] {
  return [...root.querySelectorAll<HTMLElement>("tr.turn-row")].map(
    (tr) => tr.dataset.turn ?? ""
  );
}

function setRadio(root: HTMLElement, name: string, value: string): void {
  const radio = root.querySelector<HTMLInputElement>(`input[name="${name}"][value="${value}"]`);
  if (!radio) throw new Error(`no radio ${name}=${value}`);
  radio.checked = true;
  radio.dispatchEvent(new Event("change", { bubbles: true }));
}

function toggleBox(root: HTMLElement, code: string): void {
  const box = root.querySelector<HTMLInputElement>(`input.code-box[value="${code}"]`);
  if (!box) throw new Error(`no checkbox for ${code}`);
  box.checked = !box.checked;
  box.dispatchEvent(new Event("change", { bubbles: true }));
}

async function adjudicateTurn(root: HTMLElement, turn: number, codes: string[], note: string) {
  root.querySelector<HTMLButtonElement>(`.adjudicate-btn[data-turn="${turn}"]`)?.click();
  await until(() => root.querySelector(".editor-row") !== null, "editor");
  const selected = [
    ...root.querySelectorAll<HTMLInputElement>("input.code-box:checked"),
  ].map((box) => box.value);
  for (const code of selected) if (!codes.includes(code)) toggleBox(root, code);
  for (const code of codes) {
    const box = root.querySelector<HTMLInputElement>(`input.code-box[value="${code}"]`);
    if (box && !box.checked) toggleBox(root, code);
  }
  const noteInput = root.querySelector<HTMLInputElement>(".note-input");
  if (noteInput) {
    noteInput.value = note;
    noteInput.dispatchEvent(new Event("input", { bubbles: true }));
  }
  root.querySelector<HTMLButtonElement>(".save-btn")?.click();
  await until(() => root.querySelector(".editor-row") === null, "editor to close");
}

afterEach(() => {
  for (const app of apps.splice(0)) app.stop();
  document.body.innerHTML = "";
});

describe("review page", () => {
  it("shows the run and filters to exactly the exact-set mismatches", async () => {
    const server = new FakeService();
    const root = await openRun(server);
    expect(visibleTurnIds(root)).toEqual(["1", "2", "3", "4"]);

    setRadio(root, "filter", "disagreements");
    // turn 2 disagrees outright; turn 3 overlaps but is not an exact match
    expect(visibleTurnIds(root)).toEqual(["2", "3"]);
    expect(root.querySelector('tr[data-turn="3"] .state')?.textContent).toBe("partial");

    setRadio(root, "filter", "all");
    expect(visibleTurnIds(root)).toEqual(["1", "2", "3", "4"]);
  });

  it("filters by a single code across predicted and gold sets", async () => {
    const server = new FakeService();
    const root = await openRun(server);
    setRadio(root, "filter", "code");
    const codeSelect = root.querySelector<HTMLSelectElement>("#filter-code");
    codeSelect!.value = "RE";
    codeSelect!.dispatchEvent(new Event("change", { bubbles: true }));
    expect(visibleTurnIds(root)).toEqual(["3"]);
  });

  it("persists an adjudication across a page reload", async () => {
    const server = new FakeService();
    const root = await openRun(server);
    await adjudicateTurn(root, 2, ["EL"], "gold has the explanation");
    await until(
      () => root.querySelector('tr[data-turn="2"] .badge.adjudicated') !== null,
      "adjudication badge"
    );
    expect(root.querySelector("#feedback-btn")?.textContent).toContain("1 pending");

    // reload: a fresh page against the same service
    const second = await openRun(server);
    const badge = second.querySelector('tr[data-turn="2"] .badge.adjudicated');
    expect(badge?.textContent).toBe("EL");
    expect(second.querySelector("#feedback-btn")?.textContent).toContain("1 pending");
    expect(server.adjudications.get(2)?.note).toBe("gold has the explanation");
  });

  it("blocks invalid selections inline without calling the service", async () => {
    const server = new FakeService();
    const root = await openRun(server);
    root.querySelector<HTMLButtonElement>('.adjudicate-btn[data-turn="2"]')?.click();
    await until(() => root.querySelector(".editor-row") !== null, "editor");

    toggleBox(root, "Q"); // deselect the only code
    root.querySelector<HTMLButtonElement>(".save-btn")?.click();
    await until(
      () => root.querySelector(".editor-problem")?.textContent !== "",
      "inline problem"
    );
    expect(root.querySelector(".editor-problem")?.textContent).toBe("select at least one code");
    expect(server.requests.filter((r) => r.startsWith("POST"))).toHaveLength(0);
  });

  it("greys out the other codes while UC is selected", async () => {
    const server = new FakeService();
    const root = await openRun(server);
    root.querySelector<HTMLButtonElement>('.adjudicate-btn[data-turn="2"]')?.click();
    await until(() => root.querySelector(".editor-row") !== null, "editor");

    toggleBox(root, "UC");
    const boxes = [...root.querySelectorAll<HTMLInputElement>("input.code-box")];
    const uc = boxes.find((b) => b.value === "UC");
    expect(uc?.checked).toBe(true);
    expect(uc?.disabled).toBe(false);
    for (const box of boxes.filter((b) => b.value !== "UC")) {
      expect(box.disabled).toBe(true);
      expect(box.checked).toBe(false);
    }
  });

  it("compiles feedback into a new config hash visible in the run lineage", async () => {
    const server = new FakeService();
    const root = await openRun(server);
    await adjudicateTurn(root, 2, ["EL"], "");

    root.querySelector<HTMLButtonElement>("#feedback-btn")?.click();
    await until(() => root.querySelector(".banner.success") !== null, "success banner");
    expect(root.querySelector(".banner.success")?.textContent).toContain(HASH_B);

    // the new hash is served back through the run detail lineage
    const detail = await new ApiClient(server.fetch).run("run-1");
    expect(detail.lineage).toHaveLength(1);
    expect(detail.lineage[0].config_hash).toBe(HASH_B);
    expect(detail.lineage[0].parent_hash).toBe(HASH_A);
    expect(detail.current_config_hash).toBe(HASH_B);

    expect(root.querySelector(".lineage")?.textContent).toContain(HASH_B);
    const btn = root.querySelector<HTMLButtonElement>("#feedback-btn");
    expect(btn?.disabled).toBe(true);
  });

  it("disables the feedback control at zero pending with a tooltip", async () => {
    const server = new FakeService();
    const root = await openRun(server);
    const btn = root.querySelector<HTMLButtonElement>("#feedback-btn");
    expect(btn?.disabled).toBe(true);
    expect(btn?.title).toBe("no pending adjudications");
  });

  it("shows the over-budget rejection with the token estimate", async () => {
    const server = new FakeService();
    server.overBudget = true;
    const root = await openRun(server);
    await adjudicateTurn(root, 2, ["EL"], "");

    root.querySelector<HTMLButtonElement>("#feedback-btn")?.click();
    await until(() => root.querySelector(".banner.error") !== null, "rejection banner");
    const banner = root.querySelector(".banner.error")?.textContent ?? "";
    expect(banner).toContain("feedback rejected");
    expect(banner).toContain("estimated 130000 tokens exceeds budget of 120000");
  });

  it("renders dashes for undefined metrics and re-fetches on mode switch", async () => {
    const server = new FakeService();
    const root = await openRun(server);
    await until(() => root.querySelector("table.metrics") !== null, "metrics table");

    const cells = (code: string) =>
      [...root.querySelectorAll("table.metrics tbody tr")]
        .map((tr) => [...tr.querySelectorAll("td")].map((td) => td.textContent))
        .find((row) => row[0] === code);
    expect(cells("RE")).toEqual(["RE", "-", "-", "75.0%", "-"]);
    expect(cells("A")).toEqual(["A", "50.0%", "50.0%", "75.0%", "50.0%"]);
    expect(cells("Q")?.[1]).toBe("0.0%");
    expect(root.querySelector(".turn-precision")?.textContent).toContain(
      "turn precision (exact): 50.0% over 4 turns"
    );

    setRadio(root, "mode", "overlap");
    await until(
      () => root.querySelector(".turn-precision")?.textContent?.includes("overlap") ?? false,
      "overlap metrics"
    );
    expect(root.querySelector(".turn-precision")?.textContent).toContain(
      "turn precision (overlap): 75.0% over 4 turns"
    );
    expect(cells("A")?.[1]).toBe("100.0%");
  });

  it("handles a lesson without gold labels", async () => {
    const server = new FakeService();
    server.hasGold = false;
    const root = await openRun(server);
    expect(root.querySelector("#metrics-slot")?.textContent).toContain("no gold labels");
    expect(root.querySelector('tr[data-turn="1"]')?.textContent).toContain("no gold");

    setRadio(root, "filter", "disagreements");
    expect(visibleTurnIds(root)).toEqual([]);
    expect(root.querySelector(".empty")).not.toBeNull();
  });

  it("shows a progress view for a run that is still going", async () => {
    const server = new FakeService();
    server.status = "running";
    const root = await openRun(server);
    const progress = root.querySelector(".banner.info")?.textContent ?? "";
    expect(progress).toContain("run in progress");
    expect(progress).toContain("1 of 2 batches");
    expect(root.querySelector("table.review")).toBeNull();

    // once the service reports completion, re-picking the run shows the table
    server.status = "complete";
    pickRun(root);
    await until(() => root.querySelector("tr.turn-row") !== null, "table after completion");
    expect(visibleTurnIds(root)).toHaveLength(4);
  });

  it("shows the failure for a failed run", async () => {
    const server = new FakeService();
    server.status = "failed";
    server.failure = "backend exploded";
    server.failedBatch = 1;
    const root = await openRun(server);
    const banner = root.querySelector(".banner.error")?.textContent ?? "";
    expect(banner).toContain("run failed at batch 1");
    expect(banner).toContain("backend exploded");
  });

  it("offers a retry when the service is unreachable, then recovers", async () => {
    const server = new FakeService();
    server.unreachable = true;
    const root = mount();
    apps.push(await bootstrap(root, server.fetch));
    await until(() => root.querySelector("#retry-btn") !== null, "retry banner");
    expect(root.querySelector(".banner.error")?.textContent).toContain("unreachable");

    server.unreachable = false;
    root.querySelector<HTMLButtonElement>("#retry-btn")?.click();
    await until(
      () => (root.querySelector<HTMLSelectElement>("#run-select")?.options.length ?? 0) > 1,
      "runs after retry"
    );
    expect(root.querySelector(".banner.error")).toBeNull();
  });
});
