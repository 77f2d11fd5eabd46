// Feature gallery: browse each conv-final feature's sampled images (with
// receptive-field overlays), see its current annotations, and submit
// open-phase texts or closed-phase label sets. The server is the single
// source of truth: every mutation is followed by a re-fetch, so what the
// gallery shows is always what a GET would return.

import type { Api } from "./api.js";
import { ApiError } from "./api.js";
import { clear, el } from "./dom.js";
import type {
  FeatureImages,
  FeaturesOverview,
  FeatureView,
  VocabularyView,
} from "./types.js";

export class GalleryView {
  private current = 0;
  private showOverlays = true;
  private draft = ""; // in-flight open-annotation text, preserved on errors
  private selected = new Set<number>();
  private confirmingEmpty = false;
  private banner: string | null = null;
  // Closed-phase features saved this session, so deliberately-empty label
  // sets still count toward progress (the server view can't tell an empty
  // assignment from an unvisited feature).
  private visited = new Set<number>();

  constructor(
    private readonly api: Api,
    private readonly root: HTMLElement,
  ) {}

  async show(featureId?: number): Promise<void> {
    if (featureId !== undefined && featureId !== this.current) {
      this.current = featureId;
      this.draft = "";
      this.selected = new Set();
      this.confirmingEmpty = false;
      this.banner = null;
    }
    const overview = await this.api.listFeatures();
    const images = await this.api.featureImages(this.current);
    const vocab =
      overview.phase === "closed" ? await this.api.vocabulary() : null;
    const detail = overview.features[this.current];
    if (!detail) throw new Error(`no feature ${this.current}`);
    if (this.selected.size === 0) {
      this.selected = new Set(detail.labels.map((l) => l.label_id));
    }
    this.render(overview, detail, images, vocab);
  }

  private render(
    overview: FeaturesOverview,
    detail: FeatureView,
    images: FeatureImages,
    vocab: VocabularyView | null,
  ): void {
    clear(this.root);
    this.root.append(
      this.header(overview),
      this.featureStrip(overview),
      el(
        "section",
        { class: "feature-panel" },
        el("h2", { text: `feature ${detail.feature}` }),
        this.imageGrid(images),
        this.annotationList(detail),
        this.form(overview, detail, vocab),
      ),
    );
  }

  private header(overview: FeaturesOverview): HTMLElement {
    const labeled = overview.features.filter(
      (f) => f.labels.length > 0 || this.visited.has(f.feature),
    ).length;
    const progress =
      overview.phase === "closed"
        ? ` — annotated ${labeled}/${overview.features.length}`
        : "";
    return el(
      "header",
      { class: "gallery-header" },
      el("span", {
        text: `phase: ${overview.phase} (round ${overview.round})${progress}`,
      }),
      this.banner
        ? el("div", { class: "banner", role: "alert", text: this.banner })
        : null,
    );
  }

  private featureStrip(overview: FeaturesOverview): HTMLElement {
    const strip = el("nav", { class: "feature-strip" });
    for (const f of overview.features) {
      const annotated =
        overview.phase === "open"
          ? f.open_texts.length > 0
          : f.labels.length > 0 || this.visited.has(f.feature);
      strip.append(
        el("button", {
          class: [
            "feature-chip",
            f.feature === this.current ? "active" : "",
            annotated ? "done" : "",
          ]
            .filter(Boolean)
            .join(" "),
          text: String(f.feature),
          click: () => void this.show(f.feature),
        }),
      );
    }
    return strip;
  }

  private imageGrid(images: FeatureImages): HTMLElement {
    const toggle = el("label", { class: "overlay-toggle" });
    const box = el("input", {
      type: "checkbox",
      checked: this.showOverlays,
      change: () => {
        this.showOverlays = !this.showOverlays;
        grid
          .querySelectorAll<HTMLImageElement>("img.overlay")
          .forEach((img) => img.classList.toggle("hidden", !this.showOverlays));
      },
    });
    toggle.append(box, "show receptive fields");

    const grid = el("div", { class: "image-grid" });
    for (const item of images.items) {
      grid.append(
        el(
          "figure",
          { class: "cell" },
          el("img", { src: "/" + item.image, alt: item.sample_id }),
          el("img", {
            src: "/" + item.overlay,
            alt: `receptive field on ${item.sample_id}`,
            class: "overlay" + (this.showOverlays ? "" : " hidden"),
          }),
          el("figcaption", { text: item.sample_id }),
        ),
      );
    }
    if (images.items.length === 0) {
      grid.append(
        el("p", {
          class: "empty",
          text: "no training sample activates this feature",
        }),
      );
    }
    return el("div", {}, toggle, grid);
  }

  private annotationList(detail: FeatureView): HTMLElement {
    const list = el("div", { class: "annotations" });
    if (detail.open_texts.length) {
      const ul = el("ul", { class: "open-texts" });
      for (const text of detail.open_texts) {
        ul.append(el("li", { text }));
      }
      list.append(el("h3", { text: "open annotations" }), ul);
    }
    if (detail.labels.length) {
      const ul = el("ul", { class: "closed-labels" });
      for (const label of detail.labels) {
        ul.append(el("li", { text: label.name }));
      }
      list.append(el("h3", { text: "assigned labels" }), ul);
    }
    return list;
  }

  private form(
    overview: FeaturesOverview,
    detail: FeatureView,
    vocab: VocabularyView | null,
  ): HTMLElement {
    if (overview.phase === "open") return this.openForm(overview);
    if (overview.phase === "closed" && vocab) {
      return this.closedForm(detail, vocab);
    }
    return el("p", {
      class: "phase-note",
      text: "annotation is paused while the vocabulary is being organized",
    });
  }

  private openForm(overview: FeaturesOverview): HTMLElement {
    const area = el("textarea", {
      class: "open-text",
      placeholder: "describe what these images have in common",
      input: () => {
        this.draft = area.value;
        submit.disabled = area.value.trim() === "";
      },
    });
    area.value = this.draft;
    const submit = el("button", {
      class: "submit-open",
      text: "submit description",
      click: () => void this.submitOpen(overview, area.value),
    });
    submit.disabled = this.draft.trim() === "";
    return el("div", { class: "open-form" }, area, submit);
  }

  private async submitOpen(
    overview: FeaturesOverview,
    text: string,
  ): Promise<void> {
    try {
      await this.api.openAnnotate(this.current, text);
    } catch (err) {
      // keep the typed text so the worker can retry after the banner
      this.banner = err instanceof ApiError ? err.detail : String(err);
      this.draft = text;
      await this.show();
      return;
    }
    this.banner = null;
    this.draft = "";
    const next = overview.features.find(
      (f) => f.feature !== this.current && f.open_texts.length === 0,
    );
    await this.show(next ? next.feature : undefined);
  }

  private closedForm(
    detail: FeatureView,
    vocab: VocabularyView,
  ): HTMLElement {
    const checklist = el("div", { class: "checklist" });
    for (const label of vocab.labels) {
      const box = el("input", {
        type: "checkbox",
        value: String(label.label_id),
        checked: this.selected.has(label.label_id),
        change: () => {
          if (box.checked) this.selected.add(label.label_id);
          else this.selected.delete(label.label_id);
          this.confirmingEmpty = false;
          confirmNote.classList.add("hidden");
        },
      });
      checklist.append(el("label", { class: "check" }, box, label.name));
    }
    const confirmNote = el("p", {
      class: "confirm-note" + (this.confirmingEmpty ? "" : " hidden"),
      text:
        "no labels selected — save again to mark this feature " +
        "uninterpretable",
    });
    const save = el("button", {
      class: "submit-closed",
      text: "save labels",
      click: () => void this.submitClosed(),
    });
    return el("div", { class: "closed-form" }, checklist, confirmNote, save);
  }

  private async submitClosed(): Promise<void> {
    if (this.selected.size === 0 && !this.confirmingEmpty) {
      this.confirmingEmpty = true;
      const note = this.root.querySelector(".confirm-note");
      if (note) note.classList.remove("hidden");
      return;
    }
    try {
      await this.api.closedAnnotate(this.current, [...this.selected].sort());
    } catch (err) {
      this.banner = err instanceof ApiError ? err.detail : String(err);
      await this.show();
      return;
    }
    this.banner = null;
    this.confirmingEmpty = false;
    this.visited.add(this.current);
    await this.show();
  }
}
