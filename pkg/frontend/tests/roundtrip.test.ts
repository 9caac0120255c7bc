// End-to-end review round-trip against a live `serve` process: decisions
// submitted through the same client/controller path the UI buttons drive
// must come back out of the export byte-for-byte in the service's formats.
import { afterAll, beforeAll, describe, expect, it } from "vitest";
import { type ChildProcess, spawn } from "node:child_process";
import { mkdtempSync, writeFileSync } from "node:fs";
import { createServer } from "node:net";
import { tmpdir } from "node:os";
import { join } from "node:path";
import { ApiClient, ApiError } from "../src/api.js";
import { SessionController, type FlowState } from "../src/controller.js";
import { MatchAuditBuilder } from "../src/matchAudit.js";
import type { CandidateItem, MatchAuditItem, Verdict } from "../src/types.js";

const ANNOTATOR = "ann1";

// -- fixtures ---------------------------------------------------------------

const EXAMPLES = [0, 1, 2, 3, 4].map((i) => ({
  id: `ex-00${i}`,
  document: `Article ${i}: the council met on Tuesday and voted to fund the new library annex.`,
  summary: `Summary ${i}: the council voted on Wednesday to fund the library annex.`,
  gold_label: "inconsistent",
  gold_descriptions: [
    { id: "A", text: "The summary says Wednesday, but the meeting was on Tuesday." },
  ],
  split: "test",
  provenance: {},
}));

const CANDIDATES = EXAMPLES.map((example, i) => ({
  candidate_id: `c${i}`,
  example_id: example.id,
  fact: "the council voted on Wednesday",
  description: "The summary moves the vote from Tuesday to Wednesday.",
}));

const PLAN: Array<{ verdict: Verdict; note?: string }> = [
  { verdict: "new_valid" },
  { verdict: "invalid" },
  { verdict: "already_annotated" },
  { verdict: "undecidable", note: "summary ambiguous about the meeting day" },
  { verdict: "new_valid" },
];

const MINE_SUMMARY =
  "Police in Peru have clashed with squatters who have been occupying a " +
  "gold mine in the north of the country.";

const MINE_ITEM = {
  example_id: "peru-mine-001",
  summary: MINE_SUMMARY,
  predicted: [
    {
      id: "A",
      text:
        "The summary says the mine is in the north of the country, but the " +
        "text does not mention a location.",
    },
    {
      id: "B",
      text:
        "The text reports one officer killed and 10 injured, but the summary " +
        "leaves this out.",
    },
    {
      id: "C",
      text:
        "The summary calls it a gold mine, while the text never specifies " +
        "the mineral.",
    },
  ],
  gold: [
    {
      id: "A",
      text: "The summary is not correct because it adds the location being in Peru.",
    },
    {
      id: "B",
      text: "The summary is not correct because it adds the mine being a gold mine.",
    },
    {
      id: "C",
      text:
        "The summary is not correct because it adds it taking place in the " +
        "north of the country.",
    },
  ],
};

// -- live server ------------------------------------------------------------

let proc: ChildProcess | null = null;
let stderrLog = "";
let client: ApiClient;
let workDir: string;
let datasetPath: string;
let candidatesPath: string;
let auditItemsPath: string;

function freePort(): Promise<number> {
  return new Promise((resolve, reject) => {
    const probe = createServer();
    probe.on("error", reject);
    probe.listen(0, "127.0.0.1", () => {
      const address = probe.address();
      if (address === null || typeof address === "string") {
        probe.close(() => reject(new Error("no port assigned")));
        return;
      }
      const port = address.port;
      probe.close(() => resolve(port));
    });
  });
}

async function waitForHealth(timeoutMs: number): Promise<void> {
  const deadline = Date.now() + timeoutMs;
  let lastError: unknown = null;
  while (Date.now() < deadline) {
    try {
      const health = await client.health();
      if (health.status === "ok") return;
    } catch (exc) {
      lastError = exc;
    }
    await new Promise((resolve) => setTimeout(resolve, 200));
  }
  throw new Error(`service did not come up: ${lastError}\nserver stderr:\n${stderrLog}`);
}

function writeJsonl(path: string, records: unknown[]): void {
  writeFileSync(path, records.map((r) => JSON.stringify(r)).join("\n") + "\n");
}

beforeAll(async () => {
  workDir = mkdtempSync(join(tmpdir(), "halloc-ui-"));
  datasetPath = join(workDir, "dataset.jsonl");
  candidatesPath = join(workDir, "candidates.jsonl");
  auditItemsPath = join(workDir, "audit-items.jsonl");
  writeJsonl(datasetPath, EXAMPLES);
  writeJsonl(candidatesPath, CANDIDATES);
  writeJsonl(auditItemsPath, [MINE_ITEM]);

  const port = await freePort();
  proc = spawn(
    "python3",
    [
      "-m",
      "halloc.cli",
      "serve",
      "--data-dir",
      join(workDir, "data"),
      "--port",
      String(port),
    ],
    { cwd: workDir, stdio: ["ignore", "ignore", "pipe"] },
  );
  proc.stderr?.on("data", (chunk: Buffer) => {
    stderrLog += chunk.toString();
  });
  client = new ApiClient(`http://127.0.0.1:${port}`);
  await waitForHealth(30_000);
});

afterAll(async () => {
  if (proc) {
    proc.kill("SIGTERM");
    await new Promise((resolve) => setTimeout(resolve, 300));
    if (proc.exitCode === null) proc.kill("SIGKILL");
  }
});

// -- helpers ----------------------------------------------------------------

function reviewing(state: FlowState) {
  if (state.phase !== "reviewing") {
    throw new Error(`expected reviewing, got ${JSON.stringify(state)}`);
  }
  return state;
}

function done(state: FlowState) {
  if (state.phase !== "done") {
    throw new Error(`expected done, got ${JSON.stringify(state)}`);
  }
  return state;
}

async function newCandidateSession(): Promise<string> {
  const descriptor = await client.createSession({
    kind: "candidate_review",
    items_path: candidatesPath,
    dataset_path: datasetPath,
  });
  expect(descriptor.kind).toBe("candidate_review");
  expect(descriptor.progress).toEqual({ decided: 0, total: 5 });
  return descriptor.session_id;
}

function canonical(record: Record<string, unknown>): string {
  return JSON.stringify(
    ["candidate_id", "annotator_id", "verdict", "note", "timestamp"].map(
      (key) => record[key] ?? null,
    ),
  );
}

/** Shape check for one exported match-audit record. */
function expectMatchRecordShape(record: Record<string, unknown>): void {
  expect(Object.keys(record)).toEqual([
    "example_id",
    "assignment",
    "judge_model_id",
    "transcript_ref",
  ]);
  expect(typeof record.example_id).toBe("string");
  expect(typeof record.judge_model_id).toBe("string");
  expect(
    record.transcript_ref === null || typeof record.transcript_ref === "string",
  ).toBe(true);
  expect(typeof record.assignment).toBe("object");
  expect(record.assignment).not.toBeNull();
  for (const [pred, gold] of Object.entries(
    record.assignment as Record<string, unknown>,
  )) {
    expect(typeof pred).toBe("string");
    expect(gold === null || typeof gold === "string").toBe(true);
  }
}

// -- the round-trip ----------------------------------------------------------

describe("review round-trip against a live serve", () => {
  it("five candidate decisions in, the same five out of the export", async () => {
    const sessionId = await newCandidateSession();
    const controller = new SessionController(client, sessionId, ANNOTATOR);
    const submitted: Array<Record<string, unknown>> = [];

    await controller.start();
    let step = 0;
    while (controller.state.phase === "reviewing") {
      const item = reviewing(controller.state).item as CandidateItem;
      // the service joins document+summary context onto each candidate
      expect(item.document).toContain("council met on Tuesday");
      expect(item.summary).toContain("voted on Wednesday");
      const index = Number(item.candidate_id.slice(1));
      const choice = PLAN[index];
      const decision: Record<string, unknown> = {
        candidate_id: item.candidate_id,
        verdict: choice.verdict,
        timestamp: 1755000000 + index,
      };
      if (choice.note) decision.note = choice.note;
      expect(await controller.submit(decision)).toBe(true);
      submitted.push({
        candidate_id: item.candidate_id,
        annotator_id: ANNOTATOR,
        verdict: choice.verdict,
        note: choice.note ?? null,
        timestamp: 1755000000 + index,
      });
      step += 1;
      expect(step).toBeLessThanOrEqual(5);
    }
    expect(submitted).toHaveLength(5);
    expect(done(controller.state).progress).toEqual({ decided: 5, total: 5 });

    const exported = await client.exportSession(sessionId);
    const records = exported
      .trimEnd()
      .split("\n")
      .map((line) => JSON.parse(line) as Record<string, unknown>);
    expect(records).toHaveLength(5);
    expect(new Set(records.map(canonical))).toEqual(new Set(submitted.map(canonical)));
  });

  it("rejected decisions keep the item on display with the reason", async () => {
    const sessionId = await newCandidateSession();
    const controller = new SessionController(client, sessionId, ANNOTATOR);
    await controller.start();
    const first = reviewing(controller.state).item as CandidateItem;

    expect(
      await controller.submit({ candidate_id: first.candidate_id, verdict: "maybe" }),
    ).toBe(false);
    let state = reviewing(controller.state);
    expect(state.item).toEqual(first);
    expect(state.rejection).toMatch(/verdict/);

    expect(
      await controller.submit({
        candidate_id: first.candidate_id,
        verdict: "undecidable",
      }),
    ).toBe(false);
    state = reviewing(controller.state);
    expect(state.item).toEqual(first);
    expect(state.rejection).toMatch(/note/);

    expect(
      await controller.submit({ candidate_id: first.candidate_id, verdict: "invalid" }),
    ).toBe(true);
    expect(reviewing(controller.state).progress.decided).toBe(1);
  });

  it("export of a partially decided candidate session is blocked", async () => {
    const sessionId = await newCandidateSession();
    const controller = new SessionController(client, sessionId, ANNOTATOR);
    await controller.start();
    const first = reviewing(controller.state).item as CandidateItem;
    await controller.submit({ candidate_id: first.candidate_id, verdict: "invalid" });

    const failure = await client.exportSession(sessionId).then(
      () => null,
      (exc: unknown) => exc,
    );
    expect(failure).toBeInstanceOf(ApiError);
    expect((failure as ApiError).status).toBe(409);
    expect((failure as ApiError).detail).toMatch(/undecided/);
  });

  it("a fresh controller resumes exactly where the annotator left off", async () => {
    const sessionId = await newCandidateSession();
    const first = new SessionController(client, sessionId, ANNOTATOR);
    await first.start();
    await first.submit({
      candidate_id: (reviewing(first.state).item as CandidateItem).candidate_id,
      verdict: "invalid",
    });
    await first.submit({
      candidate_id: (reviewing(first.state).item as CandidateItem).candidate_id,
      verdict: "new_valid",
    });

    const resumed = new SessionController(client, sessionId, ANNOTATOR);
    await resumed.start();
    const state = reviewing(resumed.state);
    expect(state.progress).toEqual({ decided: 2, total: 5 });
    expect((state.item as CandidateItem).candidate_id).toBe("c2");
  });

  it("match-audit assignment exports byte-identical to the judge record format", async () => {
    const descriptor = await client.createSession({
      kind: "match_audit",
      items_path: auditItemsPath,
    });
    const controller = new SessionController(client, descriptor.session_id, ANNOTATOR);
    await controller.start();
    const item = reviewing(controller.state).item as MatchAuditItem;
    expect(item.example_id).toBe("peru-mine-001");

    const builder = new MatchAuditBuilder(item.predicted, item.gold);
    builder.assign("A", "C");
    builder.assign("B", null);
    builder.assign("C", "B");
    expect(builder.complete).toBe(true);
    expect(
      await controller.submit({
        example_id: item.example_id,
        assignment: builder.build(),
      }),
    ).toBe(true);
    expect(controller.state.phase).toBe("done");

    const exported = await client.exportSession(descriptor.session_id);
    expect(exported).toBe(
      '{"example_id": "peru-mine-001", "assignment": {"A": "C", "B": null, "C": "B"}, ' +
        '"judge_model_id": "human:ann1", "transcript_ref": null}\n',
    );
    expectMatchRecordShape(JSON.parse(exported.trimEnd()) as Record<string, unknown>);
  });

  it("serves the verbatim matching instructions for the audit pane", async () => {
    const template = await client.template("judge.match");
    expect(template.template_id).toBe("judge.match");
    expect(template.body).toContain("<Predicted Output>");
  });
});
