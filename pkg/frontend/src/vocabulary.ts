// Organize-phase vocabulary editor. Edits are composed locally into a
// batch (add / rename / merge / split / delete) and submitted in one POST;
// the server applies the whole batch or none of it, so a rejected batch
// leaves the vocabulary exactly as the last GET showed it.

import type { Api } from "./api.js";
import { ApiError } from "./api.js";
import { clear, el } from "./dom.js";
import type { VocabularyEdit, VocabularyView } from "./types.js";

function describe(edit: VocabularyEdit): string {
  switch (edit.op) {
    case "add":
      return `add "${edit.name}"`;
    case "rename":
      return `rename #${edit.label_id} to "${edit.name}"`;
    case "delete":
      return `delete #${edit.label_id}`;
    case "merge":
      return `merge #${edit.sources.join(", #")} into #${edit.target}`;
    case "split":
      return `split #${edit.label_id} into ${edit.names
        .map((n) => `"${n}"`)
        .join(", ")}`;
  }
}

export class VocabularyEditor {
  private pending: VocabularyEdit[] = [];
  private mergeSources = new Set<number>();
  private error: string | null = null;

  constructor(
    private readonly api: Api,
    private readonly root: HTMLElement,
  ) {}

  /** Exposed for tests: the batch exactly as it would be submitted. */
  get batch(): readonly VocabularyEdit[] {
    return this.pending;
  }

  stage(edit: VocabularyEdit): void {
    this.pending.push(edit);
  }

  async show(): Promise<void> {
    const vocab = await this.api.vocabulary();
    this.render(vocab);
  }

  private render(vocab: VocabularyView): void {
    clear(this.root);
    this.root.append(
      el(
        "header",
        { class: "vocab-header" },
        el("span", {
          text: `vocabulary — phase ${vocab.phase}, round ${vocab.round}`,
        }),
        this.error
          ? el("div", { class: "banner", role: "alert", text: this.error })
          : null,
      ),
      this.labelTable(vocab),
      this.addForm(),
      this.pendingPanel(),
    );
  }

  private labelTable(vocab: VocabularyView): HTMLElement {
    const table = el("table", { class: "vocab-table" });
    table.append(
      el(
        "tr",
        {},
        el("th", { text: "merge" }),
        el("th", { text: "label" }),
        el("th", { text: "features" }),
        el("th", { text: "" }),
      ),
    );
    for (const label of vocab.labels) {
      const mergeBox = el("input", {
        type: "checkbox",
        "aria-label": `merge source ${label.name}`,
        change: () => {
          if (mergeBox.checked) this.mergeSources.add(label.label_id);
          else this.mergeSources.delete(label.label_id);
        },
      });
      const renameInput = el("input", {
        type: "text",
        class: "rename-input",
        value: label.name,
      });
      renameInput.value = label.name;
      table.append(
        el(
          "tr",
          { class: "vocab-row", "data-label": String(label.label_id) },
          el("td", {}, mergeBox),
          el(
            "td",
            {},
            renameInput,
            el("button", {
              text: "rename",
              click: () => {
                if (renameInput.value.trim() === "") return;
                this.stage({
                  op: "rename",
                  label_id: label.label_id,
                  name: renameInput.value.trim(),
                });
                this.refreshPending();
              },
            }),
          ),
          el("td", { text: String(label.features) }),
          el(
            "td",
            {},
            el("button", {
              text: "merge into",
              click: () => {
                const sources = [...this.mergeSources].filter(
                  (s) => s !== label.label_id,
                );
                if (sources.length === 0) return;
                this.stage({
                  op: "merge",
                  sources: sources.sort((a, b) => a - b),
                  target: label.label_id,
                });
                this.mergeSources.clear();
                this.refreshPending();
              },
            }),
            el("button", {
              text: "split",
              click: () => {
                const names = window
                  .prompt(`split "${label.name}" into (comma-separated):`)
                  ?.split(",")
                  .map((n) => n.trim())
                  .filter(Boolean);
                if (!names || names.length < 2) return;
                this.stage({ op: "split", label_id: label.label_id, names });
                this.refreshPending();
              },
            }),
            el("button", {
              text: "delete",
              click: () => {
                this.stage({ op: "delete", label_id: label.label_id });
                this.refreshPending();
              },
            }),
          ),
        ),
      );
    }
    return table;
  }

  private addForm(): HTMLElement {
    const input = el("input", {
      type: "text",
      class: "add-input",
      placeholder: "new label name",
    });
    return el(
      "div",
      { class: "add-form" },
      input,
      el("button", {
        class: "add-label",
        text: "add label",
        click: () => {
          if (input.value.trim() === "") return;
          this.stage({ op: "add", name: input.value.trim() });
          input.value = "";
          this.refreshPending();
        },
      }),
    );
  }

  private pendingPanel(): HTMLElement {
    const list = el("ul", { class: "pending-edits" });
    this.pending.forEach((edit, i) => {
      list.append(
        el(
          "li",
          {},
          describe(edit),
          el("button", {
            text: "x",
            "aria-label": `drop edit ${i}`,
            click: () => {
              this.pending.splice(i, 1);
              this.refreshPending();
            },
          }),
        ),
      );
    });
    const apply = el("button", {
      class: "apply-batch",
      text: `apply ${this.pending.length} edit(s)`,
      click: () => void this.applyBatch(),
    });
    apply.disabled = this.pending.length === 0;
    return el("div", { class: "pending-panel" }, list, apply);
  }

  private refreshPending(): void {
    // re-render from the last known server state without refetching;
    // pending edits are purely local until applied
    void this.show();
  }

  private async applyBatch(): Promise<void> {
    try {
      await this.api.editVocabulary(this.pending);
      this.pending = [];
      this.error = null;
    } catch (err) {
      // batch was rejected atomically; keep it staged for correction
      this.error = err instanceof ApiError ? err.detail : String(err);
    }
    await this.show();
  }
}
