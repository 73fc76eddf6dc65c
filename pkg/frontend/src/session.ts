/** Review workflow driver: the DOM layer and the scripted e2e both run this. */

import { ApiClient, ApiRequestError } from "./api.js";
import { SpanEditor } from "./model.js";
import type { EntityType, ProjectView, QueueItem } from "./types.js";

export type SessionPhase =
  | "idle"
  | "reviewing"
  | "queue-exhausted"
  | "training"
  | "conflict"
  | "finalized";

export interface SubmitOutcome {
  accepted: boolean;
  conflict: boolean;
}

/** Which review pass is open (or would be next) for a project state. */
export function activePass(state: string): 1 | 2 {
  return state === "MODEL_ANNOTATED" || state === "REVIEW2_IN_PROGRESS" || state === "FINALIZED"
    ? 2
    : 1;
}

export class ReviewSession {
  view: ProjectView | null = null;
  item: QueueItem | null = null;
  editor: SpanEditor | null = null;
  phase: SessionPhase = "idle";
  lastError: string | null = null;
  /** per-type counts of spans submitted in this session (dashboard) */
  submittedCounts: Record<string, number> = {};

  constructor(
    readonly api: ApiClient,
    readonly projectId: string,
  ) {}

  async refresh(): Promise<ProjectView> {
    this.view = await this.api.getProject(this.projectId);
    if (this.view.state === "FINALIZED") {
      this.phase = "finalized";
    }
    return this.view;
  }

  async loadNext(): Promise<boolean> {
    const view = this.view ?? (await this.refresh());
    const pass = activePass(view.state);
    const payload = await this.api.nextItem(this.projectId, pass);
    this.view = { ...view, state: payload.state };
    if (payload.item === null) {
      this.item = null;
      this.editor = null;
      this.phase = payload.state === "FINALIZED" ? "finalized" : "queue-exhausted";
      return false;
    }
    this.item = payload.item;
    this.editor = new SpanEditor(
      payload.item.text.length,
      payload.item.tokens,
      payload.item.proposals,
    );
    this.phase = "reviewing";
    this.lastError = null;
    return true;
  }

  /** Submit the working set; stale revisions keep local edits and flag a
   * conflict so the user can reload. */
  async submit(): Promise<SubmitOutcome> {
    if (!this.item || !this.editor) {
      throw new Error("nothing loaded to submit");
    }
    if (!this.editor.canSubmit()) {
      this.lastError = this.editor.violations()[0]?.message ?? "invalid spans";
      return { accepted: false, conflict: false };
    }
    try {
      const result = await this.api.submitReview(
        this.projectId,
        this.item.section_id,
        this.item.revision,
        [...this.editor.working],
      );
      for (const span of this.editor.working) {
        this.submittedCounts[span.type] = (this.submittedCounts[span.type] ?? 0) + 1;
      }
      if (this.view) {
        this.view = { ...this.view, state: result.state };
      }
      return { accepted: true, conflict: false };
    } catch (error) {
      if (error instanceof ApiRequestError && error.code === "VERSION_CONFLICT") {
        this.phase = "conflict"; // edits stay in this.editor
        this.lastError = error.message;
        return { accepted: false, conflict: true };
      }
      throw error;
    }
  }

  async acceptAllAndNext(): Promise<boolean> {
    if (!this.editor) {
      return this.loadNext();
    }
    this.editor.acceptAll();
    const outcome = await this.submit();
    if (!outcome.accepted) {
      return true; // stay on the item; caller inspects phase/lastError
    }
    return this.loadNext();
  }

  setType(index: number, digit: number): void {
    const types: readonly EntityType[] = [
      "CITY",
      "DATE",
      "DEGREE",
      "DIPLOMA_MAJOR",
      "JOB_TITLE",
      "LANGUAGE",
      "COUNTRY",
      "SKILL",
    ];
    const type = types[digit - 1];
    if (type && this.editor) {
      this.editor.retype(index, type);
    }
  }

  /** Run a synchronous stage (seed-annotate, model-annotate, finalize). */
  async runStage(stage: "seed-annotate" | "model-annotate" | "finalize"): Promise<void> {
    await this.api.advanceStage(this.projectId, stage);
    await this.refresh();
  }

  /** Kick off training and poll the job until it finishes. */
  async train(
    body?: { max_epochs?: number; patience?: number; seed?: number },
    pollMs = 150,
    timeoutMs = 120_000,
  ): Promise<void> {
    const response = (await this.api.advanceStage(this.projectId, "train", body ?? {})) as {
      job_id: string;
    };
    this.phase = "training";
    const deadline = Date.now() + timeoutMs;
    for (;;) {
      const status = await this.api.jobStatus(this.projectId, response.job_id);
      if (status.status === "succeeded") {
        break;
      }
      if (status.status === "failed") {
        throw new Error(`training failed: ${status.error}`);
      }
      if (Date.now() > deadline) {
        throw new Error("training timed out");
      }
      await new Promise((resolve) => setTimeout(resolve, pollMs));
    }
    await this.refresh();
    this.phase = "idle";
  }
}
