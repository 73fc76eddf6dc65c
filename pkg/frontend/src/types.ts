/** Wire types, field-for-field with the service's JSON bodies. */

export const ENTITY_TYPES = [
  "CITY",
  "DATE",
  "DEGREE",
  "DIPLOMA_MAJOR",
  "JOB_TITLE",
  "LANGUAGE",
  "COUNTRY",
  "SKILL",
] as const;

export type EntityType = (typeof ENTITY_TYPES)[number];

export type Provenance = "SEED" | "MODEL" | "HUMAN";

export interface Token {
  text: string;
  start: number;
  end: number;
}

export interface ProposedSpan {
  start: number;
  end: number;
  type: EntityType;
  provenance: Provenance;
}

export interface WorkingSpan {
  start: number;
  end: number;
  type: EntityType;
}

export interface Progress {
  done: number;
  total: number;
}

export interface ProjectView {
  project_id: string;
  state: string;
  documents: number;
  sections: number;
  seed_documents: string[];
  progress: { pass1: Progress; pass2: Progress };
  trained_rounds: number;
  model_path: string | null;
  last_train_summary: {
    dev_f1: number;
    best_epoch: number;
    epochs_run: number;
    train_sections: number;
    dev_sections: number;
  } | null;
  events: number;
  revisions: Record<string, number>;
  busy: boolean;
}

export interface QueueItem {
  section_id: string;
  kind: string;
  text: string;
  tokens: Token[];
  proposals: ProposedSpan[];
  pass: number;
  revision: number;
}

export interface QueuePayload {
  item: QueueItem | null;
  progress: Progress;
  state: string;
}

export interface ReviewResult {
  state: string;
  revision: number;
  progress: Progress;
}

export interface JobStatus {
  job_id: string;
  project_id: string;
  status: "running" | "succeeded" | "failed";
  result?: { dev_f1: number; best_epoch: number; epochs_run: number };
  error?: string;
}

export interface ApiErrorBody {
  code: string;
  message: string;
  context: Record<string, unknown>;
}
