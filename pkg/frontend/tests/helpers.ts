// Shared test scaffolding: an in-memory Api fake that mimics the server's
// visible behavior (phases, 409s, task rotation) closely enough to drive
// the views, plus a recorder of every call the views make.

import type { Api } from "../src/api.js";
import { ApiError } from "../src/api.js";
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
  Task,
  VocabularyEdit,
  VocabularyView,
} from "../src/types.js";

export interface Call {
  method: string;
  args: unknown[];
}

export class FakeApi implements Api {
  phase: Phase = "open";
  round = 1;
  openTexts = new Map<number, string[]>();
  labels = new Map<number, number[]>();
  vocab = new Map<number, string>();
  featureCount = 3;
  images = new Map<number, FeatureImages>();
  tasks: Task[] = [];
  answered = new Set<string>(); // `${sample}|${question}|${worker}`
  calls: Call[] = [];
  failNextEdit: string | null = null;
  failNextOpen: { status: number; detail: string } | null = null;

  private log(method: string, ...args: unknown[]): void {
    this.calls.push({ method, args });
  }

  private view(f: number): FeatureView {
    return {
      feature: f,
      open_texts: [...(this.openTexts.get(f) ?? [])],
      labels: (this.labels.get(f) ?? []).map((id) => ({
        label_id: id,
        name: this.vocab.get(id) ?? `label ${id}`,
      })),
    };
  }

  async listFeatures(): Promise<FeaturesOverview> {
    this.log("listFeatures");
    return {
      phase: this.phase,
      round: this.round,
      features: Array.from({ length: this.featureCount }, (_, f) =>
        this.view(f),
      ),
    };
  }

  async getFeature(id: number): Promise<FeatureDetail> {
    this.log("getFeature", id);
    return { phase: this.phase, round: this.round, ...this.view(id) };
  }

  async featureImages(id: number): Promise<FeatureImages> {
    this.log("featureImages", id);
    return (
      this.images.get(id) ?? {
        feature: id,
        items: [
          {
            sample_id: `s${id}`,
            image: `images/s${id}.png`,
            overlay: `overlays/rf_s${id}_${id}.png`,
          },
        ],
      }
    );
  }

  async openAnnotate(id: number, text: string): Promise<FeatureView> {
    this.log("openAnnotate", id, text);
    if (this.failNextOpen) {
      const { status, detail } = this.failNextOpen;
      this.failNextOpen = null;
      throw new ApiError(status, detail);
    }
    if (this.phase !== "open") {
      throw new ApiError(409, `phase is ${this.phase}, not open`);
    }
    if (text.trim() === "") throw new ApiError(400, "empty annotation");
    const texts = this.openTexts.get(id) ?? [];
    texts.push(text);
    this.openTexts.set(id, texts);
    return this.view(id);
  }

  async closedAnnotate(id: number, labels: number[]): Promise<FeatureView> {
    this.log("closedAnnotate", id, labels);
    if (this.phase !== "closed") {
      throw new ApiError(409, `phase is ${this.phase}, not closed`);
    }
    for (const l of labels) {
      if (!this.vocab.has(l)) throw new ApiError(400, `unknown label ${l}`);
    }
    this.labels.set(id, [...labels]);
    return this.view(id);
  }

  async vocabulary(): Promise<VocabularyView> {
    this.log("vocabulary");
    return {
      phase: this.phase,
      round: this.round,
      labels: [...this.vocab.entries()]
        .sort(([a], [b]) => a - b)
        .map(([label_id, name]) => ({
          label_id,
          name,
          features: [...this.labels.values()].filter((ls) =>
            ls.includes(label_id),
          ).length,
        })),
    };
  }

  async editVocabulary(edits: VocabularyEdit[]): Promise<VocabularyView> {
    this.log("editVocabulary", edits);
    if (this.failNextEdit) {
      const detail = this.failNextEdit;
      this.failNextEdit = null;
      throw new ApiError(400, detail); // nothing applied
    }
    for (const edit of edits) {
      if (edit.op === "add") {
        const id = Math.max(0, ...this.vocab.keys()) + 1;
        this.vocab.set(id, edit.name);
      } else if (edit.op === "rename") {
        this.vocab.set(edit.label_id, edit.name);
      } else if (edit.op === "delete") {
        this.vocab.delete(edit.label_id);
      }
      // merge/split elided: tests assert on the submitted batch instead
    }
    return this.vocabulary();
  }

  async setPhase(to: Phase): Promise<PhaseState> {
    this.log("setPhase", to);
    this.phase = to;
    return { phase: this.phase, round: this.round };
  }

  async nextTask(question: Question, worker: string): Promise<NextTask> {
    this.log("nextTask", question, worker);
    const open = this.tasks.filter(
      (t) =>
        t.question === question &&
        !this.answered.has(`${t.sample_id}|${question}|${worker}`),
    );
    return { task: open[0] ?? null, remaining: open.length };
  }

  async respond(
    taskId: string,
    workerId: string,
    answer: LikertAnswer,
  ): Promise<{ recorded: boolean; task_id: string }> {
    this.log("respond", taskId, workerId, answer);
    const task = this.tasks.find((t) => t.task_id === taskId);
    if (!task) throw new ApiError(404, `no task ${taskId}`);
    const key = `${task.sample_id}|${task.question}|${workerId}`;
    if (this.answered.has(key)) {
      throw new ApiError(409, `already answered ${taskId}`);
    }
    this.answered.add(key);
    return { recorded: true, task_id: taskId };
  }

  async records(): Promise<RecordsView> {
    this.log("records");
    return { source: "live", records: [] };
  }
}

export function mount(): HTMLElement {
  document.body.innerHTML = "";
  const root = document.createElement("div");
  document.body.append(root);
  return root;
}

/** Let queued promise callbacks (view refreshes) settle. */
export async function flush(): Promise<void> {
  for (let i = 0; i < 10; i++) {
    await Promise.resolve();
  }
}

export function click(node: Element | null): void {
  if (!node) throw new Error("expected an element to click");
  (node as HTMLElement).dispatchEvent(
    new MouseEvent("click", { bubbles: true }),
  );
}
