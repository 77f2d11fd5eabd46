// Gallery flows: open annotation (submit, advance, 409 recovery) and the
// closed-phase checklist (full-set posts, empty-set confirmation).

import { beforeEach, describe, expect, it } from "vitest";

import { GalleryView } from "../src/gallery.js";
import { click, FakeApi, flush, mount } from "./helpers.js";

let api: FakeApi;
let root: HTMLElement;

beforeEach(() => {
  api = new FakeApi();
  root = mount();
});

function textarea(): HTMLTextAreaElement {
  const node = root.querySelector<HTMLTextAreaElement>("textarea.open-text");
  if (!node) throw new Error("open-annotation textarea not rendered");
  return node;
}

function type(node: HTMLTextAreaElement, text: string): void {
  node.value = text;
  node.dispatchEvent(new Event("input", { bubbles: true }));
}

describe("open annotation", () => {
  it("shows exactly the images the server sampled for the feature", async () => {
    api.images.set(0, {
      feature: 0,
      items: [
        { sample_id: "a", image: "images/a.png", overlay: "overlays/rf_a_0.png" },
        { sample_id: "b", image: "images/b.png", overlay: "overlays/rf_b_0.png" },
      ],
    });
    await new GalleryView(api, root).show();

    const sources = [...root.querySelectorAll<HTMLImageElement>(".image-grid img")]
      .map((img) => img.getAttribute("src"));
    expect(sources).toEqual([
      "/images/a.png",
      "/overlays/rf_a_0.png",
      "/images/b.png",
      "/overlays/rf_b_0.png",
    ]);
  });

  it("disables submit while the text is blank", async () => {
    await new GalleryView(api, root).show();
    const submit = root.querySelector<HTMLButtonElement>(".submit-open");
    expect(submit?.disabled).toBe(true);

    type(textarea(), "two thick stripes");
    expect(submit?.disabled).toBe(false);

    type(textarea(), "   ");
    expect(submit?.disabled).toBe(true);
  });

  it("submits, then advances to the next unannotated feature", async () => {
    api.openTexts.set(1, ["already described"]);
    await new GalleryView(api, root).show();

    type(textarea(), "red blob");
    click(root.querySelector(".submit-open"));
    await flush();

    expect(api.openTexts.get(0)).toEqual(["red blob"]);
    // feature 1 is taken, so the gallery should land on feature 2
    expect(root.querySelector("h2")?.textContent).toBe("feature 2");
  });

  it("keeps the typed text and shows a banner when the server says 409", async () => {
    api.failNextOpen = { status: 409, detail: "phase is organize, not open" };
    await new GalleryView(api, root).show();

    type(textarea(), "precious description");
    click(root.querySelector(".submit-open"));
    await flush();

    expect(root.querySelector(".banner")?.textContent).toContain(
      "phase is organize",
    );
    expect(textarea().value).toBe("precious description");

    // retry without retyping
    click(root.querySelector(".submit-open"));
    await flush();
    expect(api.openTexts.get(0)).toEqual(["precious description"]);
  });
});

describe("closed annotation", () => {
  beforeEach(() => {
    api.phase = "closed";
    api.round = 2;
    api.vocab = new Map([
      [1, "stripes"],
      [2, "red disk"],
      [3, "grid"],
    ]);
  });

  it("posts the full selected label set", async () => {
    await new GalleryView(api, root).show();

    const boxes = root.querySelectorAll<HTMLInputElement>(
      ".checklist input[type=checkbox]",
    );
    expect(boxes).toHaveLength(3);
    boxes[0]?.click();
    boxes[2]?.click();
    click(root.querySelector(".submit-closed"));
    await flush();

    expect(api.labels.get(0)).toEqual([1, 3]);
    // the re-rendered view reflects the server state
    const assigned = [...root.querySelectorAll(".closed-labels li")].map(
      (li) => li.textContent,
    );
    expect(assigned).toEqual(["stripes", "grid"]);
  });

  it("asks for confirmation before storing an empty label set", async () => {
    await new GalleryView(api, root).show();

    click(root.querySelector(".submit-closed"));
    await flush();
    expect(api.labels.has(0)).toBe(false); // not saved yet
    expect(
      root.querySelector(".confirm-note")?.classList.contains("hidden"),
    ).toBe(false);

    click(root.querySelector(".submit-closed"));
    await flush();
    expect(api.labels.get(0)).toEqual([]);
  });

  it("counts deliberately-empty saves in the progress indicator", async () => {
    const view = new GalleryView(api, root);
    await view.show();

    click(root.querySelector(".submit-closed"));
    await flush();
    click(root.querySelector(".submit-closed"));
    await flush();

    expect(root.querySelector(".gallery-header span")?.textContent).toContain(
      "annotated 1/3",
    );
  });
});
