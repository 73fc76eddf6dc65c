/** Scripted end-to-end review pass against a live service.
 *
 * Drives the same code paths the browser buttons call (ApiClient +
 * ReviewSession + SpanEditor) through the full four-stage loop, then checks
 * that the UI-driven export is byte-identical to a CLI-driven run of the
 * same project, and that editor-built spans are never rejected by the
 * server.
 */

import { execFileSync, spawn, type ChildProcess } from "node:child_process";
import { mkdtempSync, readFileSync, rmSync } from "node:fs";
import { tmpdir } from "node:os";
import { join } from "node:path";
import { afterAll, beforeAll, describe, expect, it } from "vitest";

import { ApiClient } from "../src/api.js";
import { SpanEditor } from "../src/model.js";
import { ReviewSession } from "../src/session.js";
import { ENTITY_TYPES } from "../src/types.js";

const PORT = 21000 + (process.pid % 2000);
const BASE = `http://127.0.0.1:${PORT}`;

let workdir: string;
let server: ChildProcess | undefined;
let datasetPath: string;
let documents: unknown[];

function cli(...args: string[]): string {
  return execFileSync("resume-ner", args, { encoding: "utf-8" });
}

async function waitForServer(): Promise<void> {
  for (let attempt = 0; attempt < 150; attempt++) {
    try {
      const response = await fetch(`${BASE}/projects`);
      if (response.ok) return;
    } catch {
      // not up yet
    }
    await new Promise((resolve) => setTimeout(resolve, 100));
  }
  throw new Error("service did not come up");
}

beforeAll(async () => {
  workdir = mkdtempSync(join(tmpdir(), "review-ui-e2e-"));
  cli("fixture", "--out", join(workdir, "corpus"), "--seed", "5", "--scale", "0.04");
  datasetPath = join(workdir, "corpus", "dataset.jsonl");
  const lines = readFileSync(datasetPath, "utf-8").trim().split("\n");
  documents = lines.slice(1).map((line) => JSON.parse(line));

  server = spawn(
    "resume-ner",
    ["serve", "--data-root", join(workdir, "store"), "--port", String(PORT)],
    { stdio: "ignore" },
  );
  await waitForServer();
}, 60_000);

afterAll(() => {
  server?.kill();
  rmSync(workdir, { recursive: true, force: true });
});

const PROJECT_CONFIG = {
  seed: 3,
  seed_fraction: 0.3,
  split: { seed: 3, restarts: 2 },
};
const TRAIN_CONFIG = { seed: 1, max_epochs: 8, patience: 5 };

async function createProject(api: ApiClient, projectId: string): Promise<void> {
  await api.createProject({
    project_id: projectId,
    config: PROJECT_CONFIG,
    dataset: { schema_version: 1, documents },
  });
}

async function reviewAll(session: ReviewSession): Promise<number> {
  let submitted = 0;
  await session.loadNext();
  while (session.item !== null) {
    session.editor!.acceptAll();
    const outcome = await session.submit();
    expect(outcome.accepted).toBe(true);
    submitted += 1;
    await session.loadNext();
  }
  return submitted;
}

describe("scripted review pass through the UI code paths", () => {
  it("runs seed-annotate -> review -> train -> model-annotate -> review -> finalize", async () => {
    const api = new ApiClient(BASE);
    await createProject(api, "ui");
    const session = new ReviewSession(api, "ui");

    await session.runStage("seed-annotate");
    expect(session.view!.state).toBe("SEED_ANNOTATED");
    const pass1 = await reviewAll(session);
    expect(pass1).toBeGreaterThan(0);
    expect((await session.refresh()).state).toBe("REVIEW1_DONE");

    await session.train(TRAIN_CONFIG);
    expect(session.view!.state).toBe("MODEL_TRAINED");
    expect(session.view!.last_train_summary!.dev_f1).toBeGreaterThanOrEqual(0);

    await session.runStage("model-annotate");
    const pass2 = await reviewAll(session);
    expect(pass2).toBe(session.view!.sections);
    expect(session.phase).toBe("finalized");

    await session.runStage("finalize");
    expect(session.view!.state).toBe("FINALIZED");
  }, 120_000);

  it("produces an export byte-identical to the CLI-driven flow", async () => {
    const api = new ApiClient(BASE);
    const uiExport = await api.exportDataset("ui");

    const project = join(workdir, "store-cli", "cli");
    cli(
      "bootstrap", "create", "--project", project, "--dataset", datasetPath,
      "--seed", String(PROJECT_CONFIG.seed),
      "--seed-fraction", String(PROJECT_CONFIG.seed_fraction),
      "--restarts", String(PROJECT_CONFIG.split.restarts),
    );
    cli("bootstrap", "seed-annotate", "--project", project);
    cli("bootstrap", "review", "--project", project, "--accept-proposals");
    cli(
      "bootstrap", "train", "--project", project,
      "--seed", String(TRAIN_CONFIG.seed),
      "--max-epochs", String(TRAIN_CONFIG.max_epochs),
      "--patience", String(TRAIN_CONFIG.patience),
    );
    cli("bootstrap", "model-annotate", "--project", project);
    cli("bootstrap", "review", "--project", project, "--accept-proposals");
    const cliExportPath = join(workdir, "cli-export.jsonl");
    cli("bootstrap", "finalize", "--project", project, "--out", cliExportPath);

    const cliExport = readFileSync(cliExportPath, "utf-8");
    expect(uiExport).toBe(cliExport);
  }, 120_000);

  it("editor-built spans are never rejected by the server", async () => {
    const api = new ApiClient(BASE);
    await createProject(api, "fuzz");
    const session = new ReviewSession(api, "fuzz");
    await session.runStage("seed-annotate");

    let state = 0xc0ffee;
    const random = () => {
      state = (state * 1664525 + 1013904223) >>> 0;
      return state / 2 ** 32;
    };

    let submissions = 0;
    await session.loadNext();
    while (session.item !== null) {
      const item = session.item;
      const editor = new SpanEditor(item.text.length, item.tokens, item.proposals);
      if (random() < 0.5) editor.acceptAll();
      for (let op = 0; op < 12; op++) {
        const roll = random();
        const type = ENTITY_TYPES[Math.floor(random() * 8)]!;
        const a = Math.floor(random() * (item.text.length + 2)) - 1;
        const b = Math.floor(random() * (item.text.length + 2)) - 1;
        if (roll < 0.5) editor.add(a, b, type);
        else if (roll < 0.7) editor.remove(Math.floor(random() * (editor.working.length + 1)));
        else if (roll < 0.85) editor.retype(Math.floor(random() * (editor.working.length + 1)), type);
        else editor.rebound(Math.floor(random() * (editor.working.length + 1)), a, b);
      }
      // whatever the editor produced must be accepted: bounds/overlap safe
      const result = await api.submitReview(
        "fuzz", item.section_id, item.revision, [...editor.working],
      );
      expect(result.revision).toBe(item.revision + 1);
      submissions += 1;
      await session.loadNext();
    }
    expect(submissions).toBeGreaterThan(0);
  }, 120_000);
});
