// Blinded question flow. The two renderers enforce the blinding the study
// design depends on: PCR workers must never see the class name, LCR workers
// must never see the image.

import { beforeEach, describe, expect, it } from "vitest";

import { renderLcrPayload, renderPcrPayload, TaskFlow } from "../src/tasks.js";
import type { LcrPayload, PcrPayload, Task } from "../src/types.js";
import { click, FakeApi, flush, mount } from "./helpers.js";

const FEATURES = [
  { feature: 4, text: "red disk" },
  { feature: 9, text: "stripes" },
];

function pcrTask(sampleId: string): Task {
  return {
    task_id: `pcr-${sampleId}`,
    sample_id: sampleId,
    question: "PCR",
    payload: {
      prompt: "Is the highlighted feature relevant to the whole or parts of the image?",
      image: `images/${sampleId}.png`,
      overlays: [`overlays/rf_${sampleId}_4.png`],
      features: FEATURES,
      // a leaky server field must not reach the DOM
      label: "class3",
    } as PcrPayload,
  };
}

function lcrTask(sampleId: string): Task {
  return {
    task_id: `lcr-${sampleId}`,
    sample_id: sampleId,
    question: "LCR",
    payload: {
      prompt: "If an object shows these features, is it an object of this class?",
      label: "class3",
      features: FEATURES,
    },
  };
}

describe("payload renderers", () => {
  it("PCR shows image and overlays but never a class name", () => {
    const node = renderPcrPayload(pcrTask("s1").payload as PcrPayload);
    const html = node.innerHTML;
    expect(html).not.toContain("class3");
    const images = [...node.querySelectorAll("img")].map((i) => i.getAttribute("src"));
    expect(images).toEqual(["/images/s1.png", "/overlays/rf_s1_4.png"]);
    expect(html).toContain("red disk");
  });

  it("LCR shows the class name but never an image", () => {
    const node = renderLcrPayload(lcrTask("s1").payload as LcrPayload);
    expect(node.textContent).toContain("class3");
    expect(node.querySelector("img")).toBeNull();
    expect(node.innerHTML).not.toContain(".png");
  });
});

describe("answer flow", () => {
  let api: FakeApi;
  let root: HTMLElement;
  let flow: TaskFlow;

  beforeEach(async () => {
    api = new FakeApi();
    api.tasks = [pcrTask("s1"), pcrTask("s2"), lcrTask("s1")];
    root = mount();
    flow = new TaskFlow(api, root);
    await flow.show();
  });

  function answer(value: string): void {
    const radio = root.querySelector<HTMLInputElement>(`input[name=likert][value=${value}]`);
    if (!radio) throw new Error(`no likert radio for ${value}`);
    radio.click();
    click(root.querySelector(".submit-answer"));
  }

  it("records the answer and advances to the next task", async () => {
    expect(root.innerHTML).toContain("/images/s1.png");
    answer("agree");
    await flush();

    const posts = api.calls.filter((c) => c.method === "respond");
    expect(posts).toHaveLength(1);
    expect(posts[0]?.args).toEqual(["pcr-s1", "local", "agree"]);
    // moved on to s2, progress updated
    expect(root.querySelector(".task-progress")?.textContent).toContain("answered 1");
    expect(root.innerHTML).toContain("/images/s2.png");
  });

  it("submit stays disabled until a likert option is picked", () => {
    const submit = root.querySelector<HTMLButtonElement>(".submit-answer");
    expect(submit?.disabled).toBe(true);
  });

  it("skips past a task someone else already answered", async () => {
    // another session answers s1 between our fetch and our submit
    api.answered.add("s1|PCR|local");
    answer("disagree");
    await flush();

    expect(root.querySelector(".banner")?.textContent).toContain("already answered");
    expect(root.innerHTML).toContain("/images/s2.png");
  });

  it("switching question type serves that queue, blinded", async () => {
    const buttons = [...root.querySelectorAll<HTMLButtonElement>(".question-pick button")];
    click(buttons.find((b) => b.textContent === "LCR") ?? null);
    await flush();

    expect(root.textContent).toContain("class3");
    expect(root.querySelector(".task-panel img")).toBeNull();
  });

  it("shows completion when the queue is drained", async () => {
    api.tasks = [pcrTask("s1")];
    await flow.show();
    answer("strongly_agree");
    await flush();

    expect(root.querySelector(".all-done")).not.toBeNull();
    expect(root.querySelector(".task-progress")?.textContent).toContain("answered 1");
  });
});
