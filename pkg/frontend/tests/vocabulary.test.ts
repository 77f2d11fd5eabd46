// Vocabulary editor: batches are composed locally and land on the server
// in a single atomic POST; a rejected batch leaves the view on the server's
// state with the edits still staged.

import { beforeEach, describe, expect, it } from "vitest";

import { VocabularyEditor } from "../src/vocabulary.js";
import { click, FakeApi, flush, mount } from "./helpers.js";

let api: FakeApi;
let root: HTMLElement;
let editor: VocabularyEditor;

beforeEach(async () => {
  api = new FakeApi();
  api.phase = "organize";
  api.vocab = new Map([
    [1, "stripes"],
    [2, "streaks"],
    [3, "red disk"],
  ]);
  root = mount();
  editor = new VocabularyEditor(api, root);
  await editor.show();
});

function addLabel(name: string): void {
  const input = root.querySelector<HTMLInputElement>(".add-input");
  if (!input) throw new Error("add form not rendered");
  input.value = name;
  click(root.querySelector(".add-label"));
}

describe("batch composition", () => {
  it("stages adds, renames, and merges without touching the server", async () => {
    addLabel("wavy");
    await flush();

    // merge 1 and 2 into 3: tick rows 1 and 2, then "merge into" on row 3
    const rows = root.querySelectorAll<HTMLElement>(".vocab-row");
    rows[0]?.querySelector<HTMLInputElement>("input[type=checkbox]")?.click();
    rows[1]?.querySelector<HTMLInputElement>("input[type=checkbox]")?.click();
    const buttons = [...(rows[2]?.querySelectorAll("button") ?? [])];
    click(buttons.find((b) => b.textContent === "merge into") ?? null);
    await flush();

    expect(editor.batch).toEqual([
      { op: "add", name: "wavy" },
      { op: "merge", sources: [1, 2], target: 3 },
    ]);
    expect(api.calls.filter((c) => c.method === "editVocabulary")).toHaveLength(0);
  });

  it("submits the whole batch as one request", async () => {
    addLabel("wavy");
    await flush();
    addLabel("zigzag");
    await flush();

    click(root.querySelector(".apply-batch"));
    await flush();

    const posts = api.calls.filter((c) => c.method === "editVocabulary");
    expect(posts).toHaveLength(1);
    expect(posts[0]?.args[0]).toEqual([
      { op: "add", name: "wavy" },
      { op: "add", name: "zigzag" },
    ]);
    expect(editor.batch).toEqual([]); // cleared on success
    const names = [...root.querySelectorAll(".rename-input")].map(
      (i) => (i as HTMLInputElement).value,
    );
    expect(names).toContain("wavy");
    expect(names).toContain("zigzag");
  });

  it("keeps the staged batch and the old vocabulary when the server rejects it", async () => {
    addLabel("stripes"); // duplicate name: the server will refuse
    await flush();
    api.failNextEdit = 'duplicate label name "stripes"';

    click(root.querySelector(".apply-batch"));
    await flush();

    expect(root.querySelector(".banner")?.textContent).toContain("duplicate");
    expect(editor.batch).toEqual([{ op: "add", name: "stripes" }]);
    // vocabulary unchanged: still exactly the three server-side labels
    const names = [...root.querySelectorAll(".rename-input")].map(
      (i) => (i as HTMLInputElement).value,
    );
    expect(names).toEqual(["stripes", "streaks", "red disk"]);
  });

  it("drops a staged edit without affecting the rest", async () => {
    addLabel("wavy");
    await flush();
    addLabel("zigzag");
    await flush();

    click(root.querySelector('[aria-label="drop edit 0"]'));
    await flush();

    expect(editor.batch).toEqual([{ op: "add", name: "zigzag" }]);
  });
});
