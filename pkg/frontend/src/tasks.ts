// Consistency task flow: fetch the next open (sample, question) pair for
// this worker, render it blinded, record a 4-point answer, move on.
//
// Blinding is enforced here in the renderer, on top of the server's own
// payload blinding: the PCR renderer reads an allowlist of fields that
// excludes any label, and the LCR renderer never constructs an <img> (or
// any other resource-loading element). A payload that smuggled extra
// fields past the server would still not reach the screen.

import type { Api } from "./api.js";
import { ApiError } from "./api.js";
import { clear, el } from "./dom.js";
import type {
  LcrPayload,
  LikertAnswer,
  PcrPayload,
  Question,
  Task,
} from "./types.js";
import { LIKERT_ANSWERS } from "./types.js";

export function renderPcrPayload(payload: PcrPayload): HTMLElement {
  // allowlist: prompt, image, overlays, features — never a label
  const overlays = el("div", { class: "task-overlays" });
  for (const overlay of payload.overlays) {
    overlays.append(
      el("img", { src: "/" + overlay, alt: "highlighted region" }),
    );
  }
  const features = el("ul", { class: "task-features" });
  for (const f of payload.features) {
    features.append(el("li", { text: f.text }));
  }
  return el(
    "div",
    { class: "task-pcr" },
    el("p", { class: "prompt", text: payload.prompt }),
    el("img", {
      class: "task-image",
      src: "/" + payload.image,
      alt: "input image",
    }),
    overlays,
    features,
  );
}

export function renderLcrPayload(payload: LcrPayload): HTMLElement {
  // text only: the question is about the label/feature relation, so the
  // sample image (and anything that could load one) stays out of the DOM
  const features = el("ul", { class: "task-features" });
  for (const f of payload.features) {
    features.append(el("li", { text: f.text }));
  }
  return el(
    "div",
    { class: "task-lcr" },
    el("p", { class: "prompt", text: payload.prompt }),
    el("p", { class: "task-label", text: `class: ${payload.label}` }),
    features,
  );
}

export class TaskFlow {
  private worker = "local";
  private question: Question = "PCR";
  private completed = 0;
  private note: string | null = null;

  constructor(
    private readonly api: Api,
    private readonly root: HTMLElement,
  ) {}

  async show(): Promise<void> {
    const next = await this.api.nextTask(this.question, this.worker);
    this.render(next.task, next.remaining);
  }

  private render(task: Task | null, remaining: number): void {
    clear(this.root);
    const workerInput = el("input", {
      type: "text",
      class: "worker-id",
      "aria-label": "worker id",
      change: () => {
        this.worker = workerInput.value.trim() || "local";
        this.completed = 0;
        void this.show();
      },
    });
    workerInput.value = this.worker;

    const questionPick = el("div", { class: "question-pick" });
    for (const q of ["PCR", "LCR"] as const) {
      questionPick.append(
        el("button", {
          class: this.question === q ? "active" : "",
          text: q,
          click: () => {
            this.question = q;
            void this.show();
          },
        }),
      );
    }

    this.root.append(
      el(
        "header",
        { class: "task-header" },
        workerInput,
        questionPick,
        el("span", {
          class: "task-progress",
          text: `answered ${this.completed}, ${remaining} remaining`,
        }),
        this.note
          ? el("div", { class: "banner", role: "status", text: this.note })
          : null,
      ),
      task === null
        ? el("p", {
            class: "all-done",
            text: "no open tasks for this worker and question",
          })
        : this.taskPanel(task),
    );
  }

  private taskPanel(task: Task): HTMLElement {
    const body =
      task.question === "PCR"
        ? renderPcrPayload(task.payload as PcrPayload)
        : renderLcrPayload(task.payload as LcrPayload);

    const scale = el("div", { class: "likert" });
    let chosen: LikertAnswer | null = null;
    for (const answer of LIKERT_ANSWERS) {
      const radio = el("input", {
        type: "radio",
        name: "likert",
        value: answer,
        change: () => {
          chosen = answer;
          submit.disabled = false;
        },
      });
      scale.append(
        el("label", { class: "likert-option" }, radio, answer.replace("_", " ")),
      );
    }
    const submit = el("button", {
      class: "submit-answer",
      text: "record answer",
      click: () => {
        if (chosen !== null) void this.submit(task, chosen);
      },
    });
    submit.disabled = true;

    return el("section", { class: "task-panel" }, body, scale, submit);
  }

  private async submit(task: Task, answer: LikertAnswer): Promise<void> {
    try {
      await this.api.respond(task.task_id, this.worker, answer);
      this.completed += 1;
      this.note = null;
    } catch (err) {
      if (err instanceof ApiError && err.status === 409) {
        // someone (or an earlier session) already answered: skip ahead
        this.note = "already answered; skipped to the next task";
      } else {
        this.note = err instanceof ApiError ? err.detail : String(err);
      }
    }
    await this.show();
  }
}
