// Single-page shell: a nav bar switching between the three flows, plus the
// phase controls that move the whole annotation process forward.

import { ApiClient } from "./api.js";
import { ApiError } from "./api.js";
import { clear, el } from "./dom.js";
import { GalleryView } from "./gallery.js";
import { TaskFlow } from "./tasks.js";
import type { Phase } from "./types.js";
import { VocabularyEditor } from "./vocabulary.js";

type ViewName = "annotate" | "vocabulary" | "tasks";

export function mountApp(root: HTMLElement, api: ApiClient): void {
  const nav = el("nav", { class: "app-nav" });
  const phaseBar = el("div", { class: "phase-bar" });
  const status = el("span", { class: "phase-status" });
  const body = el("main", { class: "app-body" });
  root.append(el("header", { class: "app-header" }, nav, phaseBar, status), body);

  const gallery = new GalleryView(api, body);
  const vocabulary = new VocabularyEditor(api, body);
  const tasks = new TaskFlow(api, body);

  let active: ViewName = "annotate";

  async function refreshStatus(): Promise<void> {
    try {
      const overview = await api.listFeatures();
      status.textContent = `phase ${overview.phase}, round ${overview.round}`;
    } catch (err) {
      status.textContent =
        err instanceof ApiError ? err.detail : "server unreachable";
    }
  }

  function showView(name: ViewName): void {
    active = name;
    clear(body);
    nav
      .querySelectorAll("button")
      .forEach((b) => b.classList.toggle("active", b.dataset.view === name));
    const view =
      name === "annotate" ? gallery : name === "vocabulary" ? vocabulary : tasks;
    void view.show().catch((err: unknown) => {
      clear(body);
      body.append(
        el("div", {
          class: "banner",
          role: "alert",
          text: err instanceof ApiError ? err.detail : String(err),
        }),
      );
    });
    void refreshStatus();
  }

  for (const [name, title] of [
    ["annotate", "Annotate"],
    ["vocabulary", "Vocabulary"],
    ["tasks", "Questions"],
  ] as const) {
    nav.append(
      el("button", {
        "data-view": name,
        text: title,
        click: () => showView(name),
      }),
    );
  }

  for (const phase of ["open", "organize", "closed"] as const) {
    phaseBar.append(
      el("button", {
        class: "phase-button",
        text: `→ ${phase}`,
        click: () => void setPhase(phase),
      }),
    );
  }

  async function setPhase(to: Phase): Promise<void> {
    try {
      await api.setPhase(to);
    } catch (err) {
      status.textContent = err instanceof ApiError ? err.detail : String(err);
      return;
    }
    showView(active);
  }

  showView("annotate");
}

// Browser entry point; tests import the pieces directly instead.
const rootNode = document.getElementById("app");
if (rootNode) {
  mountApp(rootNode, new ApiClient(""));
}
