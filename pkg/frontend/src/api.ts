// Thin typed client over the annotation service. Every mutation waits for
// the server's acknowledgment; nothing is cached client-side.

import type {
  FeatureDetail,
  FeatureImages,
  FeaturesOverview,
  FeatureView,
  LikertAnswer,
  NextTask,
  Phase,
  PhaseState,
  Question,
  RecordsView,
  VocabularyEdit,
  VocabularyView,
} from "./types.js";

export class ApiError extends Error {
  constructor(
    readonly status: number,
    readonly detail: string,
  ) {
    super(`${status}: ${detail}`);
    this.name = "ApiError";
  }
}

/** The surface the views program against; ApiClient is the real one. */
export interface Api {
  listFeatures(): Promise<FeaturesOverview>;
  getFeature(id: number): Promise<FeatureDetail>;
  featureImages(id: number): Promise<FeatureImages>;
  openAnnotate(id: number, text: string): Promise<FeatureView>;
  closedAnnotate(id: number, labels: number[]): Promise<FeatureView>;
  vocabulary(): Promise<VocabularyView>;
  editVocabulary(edits: VocabularyEdit[]): Promise<VocabularyView>;
  setPhase(to: Phase): Promise<PhaseState>;
  nextTask(question: Question, worker: string): Promise<NextTask>;
  respond(
    taskId: string,
    workerId: string,
    answer: LikertAnswer,
  ): Promise<{ recorded: boolean; task_id: string }>;
  records(): Promise<RecordsView>;
}

export class ApiClient implements Api {
  constructor(private readonly base: string = "") {}

  private async request<T>(path: string, init: RequestInit = {}): Promise<T> {
    const headers = new Headers(init.headers);
    if (init.body !== undefined) {
      headers.set("content-type", "application/json");
    }
    const res = await fetch(this.base + path, { ...init, headers });
    if (!res.ok) {
      let detail = res.statusText;
      try {
        const body: unknown = await res.json();
        if (
          typeof body === "object" &&
          body !== null &&
          typeof (body as { detail?: unknown }).detail === "string"
        ) {
          detail = (body as { detail: string }).detail;
        }
      } catch {
        // error body was not JSON; keep the status text
      }
      throw new ApiError(res.status, detail);
    }
    return (await res.json()) as T;
  }

  private post<T>(path: string, body: unknown): Promise<T> {
    return this.request<T>(path, {
      method: "POST",
      body: JSON.stringify(body),
    });
  }

  listFeatures(): Promise<FeaturesOverview> {
    return this.request("/features");
  }

  getFeature(id: number): Promise<FeatureDetail> {
    return this.request(`/features/${id}`);
  }

  featureImages(id: number): Promise<FeatureImages> {
    return this.request(`/features/${id}/images`);
  }

  openAnnotate(id: number, text: string): Promise<FeatureView> {
    return this.post(`/features/${id}/open`, { text });
  }

  closedAnnotate(id: number, labels: number[]): Promise<FeatureView> {
    return this.post(`/features/${id}/closed`, { labels });
  }

  vocabulary(): Promise<VocabularyView> {
    return this.request("/vocabulary");
  }

  editVocabulary(edits: VocabularyEdit[]): Promise<VocabularyView> {
    return this.post("/vocabulary", { edits });
  }

  setPhase(to: Phase): Promise<PhaseState> {
    return this.post("/phase", { to });
  }

  nextTask(question: Question, worker: string): Promise<NextTask> {
    const q = new URLSearchParams({ question, worker });
    return this.request(`/tasks/next?${q}`);
  }

  respond(
    taskId: string,
    workerId: string,
    answer: LikertAnswer,
  ): Promise<{ recorded: boolean; task_id: string }> {
    return this.post(`/tasks/${encodeURIComponent(taskId)}/response`, {
      worker_id: workerId,
      answer,
    });
  }

  records(): Promise<RecordsView> {
    return this.request("/records");
  }
}
