/** Typed client for the review service; the one place that touches fetch. */

import type {
  ApiErrorBody,
  JobStatus,
  ProjectView,
  QueuePayload,
  ReviewResult,
  WorkingSpan,
} from "./types.js";

export class ApiRequestError extends Error {
  constructor(
    readonly status: number,
    readonly code: string,
    message: string,
    readonly context: Record<string, unknown> = {},
  ) {
    super(message);
  }
}

async function parseError(response: Response): Promise<never> {
  let body: ApiErrorBody | null = null;
  try {
    body = (await response.json()) as ApiErrorBody;
  } catch {
    // non-JSON error body; fall through to a generic error
  }
  throw new ApiRequestError(
    response.status,
    body?.code ?? "HTTP_ERROR",
    body?.message ?? `HTTP ${response.status}`,
    body?.context ?? {},
  );
}

export class ApiClient {
  constructor(readonly baseUrl: string) {}

  private async request<T>(path: string, init?: RequestInit): Promise<T> {
    const response = await fetch(`${this.baseUrl}${path}`, init);
    if (!response.ok) {
      await parseError(response);
    }
    return (await response.json()) as T;
  }

  private json(body: unknown): RequestInit {
    return {
      method: "POST",
      headers: { "content-type": "application/json" },
      body: JSON.stringify(body),
    };
  }

  createProject(body: unknown): Promise<ProjectView> {
    return this.request("/projects", this.json(body));
  }

  getProject(projectId: string): Promise<ProjectView> {
    return this.request(`/projects/${projectId}`);
  }

  listProjects(): Promise<{ projects: ProjectView[] }> {
    return this.request("/projects");
  }

  advanceStage(
    projectId: string,
    stage: "seed-annotate" | "train" | "model-annotate" | "finalize",
    body?: unknown,
  ): Promise<Record<string, unknown>> {
    return this.request(
      `/projects/${projectId}/stages/${stage}`,
      body === undefined ? { method: "POST" } : this.json(body),
    );
  }

  jobStatus(projectId: string, jobId: string): Promise<JobStatus> {
    return this.request(`/projects/${projectId}/jobs/${jobId}`);
  }

  nextItem(projectId: string, pass: number): Promise<QueuePayload> {
    return this.request(`/projects/${projectId}/queue/next?pass=${pass}`);
  }

  submitReview(
    projectId: string,
    sectionId: string,
    revision: number,
    spans: WorkingSpan[],
  ): Promise<ReviewResult> {
    return this.request(
      `/projects/${projectId}/sections/${sectionId}/review`,
      this.json({ revision, spans }),
    );
  }

  async exportDataset(projectId: string): Promise<string> {
    const response = await fetch(`${this.baseUrl}/projects/${projectId}/export`);
    if (!response.ok) {
      await parseError(response);
    }
    return response.text();
  }

  exportUrl(projectId: string): string {
    return `${this.baseUrl}/projects/${projectId}/export`;
  }
}
