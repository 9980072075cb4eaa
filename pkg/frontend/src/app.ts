/** Triage console: a pending queue sorted by the service, an overlay viewer,
 * and a decision form with keyboard shortcuts.
 *
 * The app holds no derived numbers: rows and panels show service responses
 * verbatim, and the queue preserves the service's sort order.  Decisions
 * update the list in place (no reload) and advance to the next case.
 */

import { ApiError, getCase, getLayer, listPendingCases, postDecision } from "./api.js";
import { Queue } from "./queue.js";
import { composeView, paint } from "./render.js";
import type {
  CaseDetail,
  DecisionAction,
  HeatmapLayer,
  LayerPayload,
} from "./types.js";
import { HEATMAP_LAYERS } from "./types.js";
import { validateDecision } from "./validate.js";

const REVIEWER_KEY = "uqseg.reviewer";

function el<K extends keyof HTMLElementTagNameMap>(
  tag: K,
  attrs: Record<string, string> = {},
  text = "",
): HTMLElementTagNameMap[K] {
  const node = document.createElement(tag);
  for (const [key, value] of Object.entries(attrs)) node.setAttribute(key, value);
  if (text) node.textContent = text;
  return node;
}

function fmtMm(value: number | null | undefined): string {
  return value == null ? "n/a" : `${value.toFixed(2)} mm`;
}

export class App {
  readonly queue = new Queue();
  caseDetail: CaseDetail | null = null;
  heatmapLayer: HeatmapLayer = "data";
  opacity = 0.6;
  showContour = true;

  private layerCache = new Map<string, Map<string, LayerPayload>>();
  private root: HTMLElement;
  private banner: HTMLElement;
  private queuePane: HTMLElement;
  private casePane: HTMLElement;
  private reviewerInput: HTMLInputElement;
  private onKeyBound: (event: KeyboardEvent) => void;

  constructor(root: HTMLElement) {
    this.root = root;
    root.replaceChildren();

    const header = el("header");
    header.append(el("h1", {}, "uqseg review"));
    const reviewerLabel = el("label", { class: "reviewer" }, "reviewer ");
    this.reviewerInput = el("input", {
      id: "reviewer",
      type: "text",
      placeholder: "your name",
    });
    this.reviewerInput.value = localStorage.getItem(REVIEWER_KEY) ?? "";
    this.reviewerInput.addEventListener("change", () => {
      localStorage.setItem(REVIEWER_KEY, this.reviewerInput.value);
    });
    reviewerLabel.append(this.reviewerInput);
    header.append(reviewerLabel);

    this.banner = el("div", { id: "banner", hidden: "" });
    const main = el("main");
    this.queuePane = el("aside", { id: "queue" });
    this.casePane = el("section", { id: "case" });
    main.append(this.queuePane, this.casePane);
    root.append(header, this.banner, main);

    this.onKeyBound = (event) => this.onKey(event);
    document.addEventListener("keydown", this.onKeyBound);
    this.renderCaseEmpty("select a case from the queue");
  }

  /** Detach document-level listeners; a page hosts one live app at a time. */
  dispose(): void {
    document.removeEventListener("keydown", this.onKeyBound);
  }

  get reviewer(): string {
    return this.reviewerInput.value;
  }

  // ---- queue -------------------------------------------------------------

  async refresh(): Promise<void> {
    try {
      this.queue.replace(await listPendingCases());
      this.hideBanner();
    } catch (error) {
      this.showBanner(`service unreachable: ${(error as Error).message}`, true);
      return;
    }
    this.renderQueue();
    if (this.queue.isEmpty) this.renderCaseEmpty("all reviewed");
  }

  renderQueue(): void {
    this.queuePane.replaceChildren(el("h2", {}, "pending"));
    if (this.queue.isEmpty) {
      this.queuePane.append(el("p", { class: "empty" }, "all reviewed"));
      return;
    }
    const list = el("ul", { class: "cases" });
    for (const summary of this.queue.cases) {
      const row = el("li", { class: "case-row", "data-case-id": summary.case_id });
      row.append(
        el("span", { class: "cid" }, summary.case_id),
        el("span", { class: "modality" }, summary.modality),
        el("span", { class: "mm" }, fmtMm(summary.measurement_mm)),
        el("span", { class: "score" }, summary.uncertainty_score.toFixed(4)),
      );
      if (summary.ood_flag) row.append(el("span", { class: "badge ood" }, "OOD"));
      if (summary.error) row.append(el("span", { class: "badge error" }, "error"));
      row.addEventListener("click", () => {
        void this.open(summary.case_id);
      });
      list.append(row);
    }
    this.queuePane.append(list);
  }

  // ---- case view ---------------------------------------------------------

  async open(caseId: string): Promise<void> {
    let detail: CaseDetail;
    try {
      detail = await getCase(caseId);
    } catch (error) {
      if (error instanceof ApiError && error.status === 404) {
        this.caseDetail = null;
        this.renderCaseEmpty(`case ${caseId} not found; pick another from the queue`);
        return;
      }
      this.showBanner(`service unreachable: ${(error as Error).message}`, true);
      return;
    }
    this.caseDetail = detail;
    this.renderCase();
    await this.repaint();
  }

  private async layer(caseId: string, name: string): Promise<LayerPayload> {
    let perCase = this.layerCache.get(caseId);
    if (!perCase) {
      perCase = new Map();
      this.layerCache.set(caseId, perCase);
    }
    const cached = perCase.get(name);
    if (cached) return cached;
    const fetched = await getLayer(caseId, name);
    perCase.set(name, fetched);
    return fetched;
  }

  async repaint(): Promise<void> {
    const detail = this.caseDetail;
    const canvas = this.casePane.querySelector<HTMLCanvasElement>("canvas");
    if (!detail || !canvas) return;
    try {
      const base = await this.layer(detail.case_id, "image");
      const mask = this.showContour ? await this.layer(detail.case_id, "mask") : null;
      const heatmap = await this.layer(detail.case_id, this.heatmapLayer);
      const rgba = composeView(base, {
        heatmap,
        mask,
        showContour: this.showContour,
        opacity: this.opacity,
      });
      paint(canvas, rgba, base.width, base.height);
    } catch (error) {
      this.showBanner(`layer load failed: ${(error as Error).message}`, false);
    }
  }

  private renderCaseEmpty(message: string): void {
    this.casePane.replaceChildren(el("p", { class: "empty" }, message));
  }

  renderCase(): void {
    const detail = this.caseDetail;
    if (!detail) return;
    this.casePane.replaceChildren();

    const title = el("h2", {}, detail.case_id);
    if (detail.ood_flag) title.append(el("span", { class: "badge ood" }, "OOD"));
    this.casePane.append(title);

    const viewer = el("div", { class: "viewer" });
    viewer.append(el("canvas", { id: "overlay" }));

    const controls = el("div", { class: "controls" });
    const layerSelect = el("select", { id: "layer" });
    for (const name of HEATMAP_LAYERS) {
      const option = el("option", { value: name }, name);
      if (name === this.heatmapLayer) option.setAttribute("selected", "");
      layerSelect.append(option);
    }
    layerSelect.addEventListener("change", () => {
      this.heatmapLayer = layerSelect.value as HeatmapLayer;
      void this.repaint();
    });
    const opacitySlider = el("input", {
      id: "opacity",
      type: "range",
      min: "0",
      max: "1",
      step: "0.05",
      value: String(this.opacity),
    });
    opacitySlider.addEventListener("input", () => {
      this.opacity = Number(opacitySlider.value);
      void this.repaint();
    });
    const contourToggle = el("input", { id: "contour", type: "checkbox" });
    contourToggle.checked = this.showContour;
    contourToggle.addEventListener("change", () => {
      this.showContour = contourToggle.checked;
      void this.repaint();
    });
    const layerLabel = el("label", {}, "layer ");
    layerLabel.append(layerSelect);
    const opacityLabel = el("label", {}, "opacity ");
    opacityLabel.append(opacitySlider);
    const contourLabel = el("label", {}, "contour ");
    contourLabel.append(contourToggle);
    controls.append(layerLabel, opacityLabel, contourLabel);
    viewer.append(controls);
    this.casePane.append(viewer);

    const panel = el("dl", { class: "measurement" });
    const addRow = (label: string, value: string, id?: string) => {
      panel.append(el("dt", {}, label));
      panel.append(el("dd", id ? { id } : {}, value));
    };
    addRow("measurement", fmtMm(detail.measurement?.value_mm), "measured-mm");
    addRow("method", detail.method);
    addRow("uncertainty", detail.uncertainty_score.toFixed(4));
    if (detail.gt_measurement_mm != null) {
      addRow("ground truth", fmtMm(detail.gt_measurement_mm), "gt-mm");
      if (detail.abs_error_mm != null && detail.rel_error_pct != null) {
        addRow("error", `${detail.abs_error_mm.toFixed(2)} mm (${detail.rel_error_pct.toFixed(2)}%)`);
      }
    }
    if (detail.error) addRow("pipeline error", detail.error);
    this.casePane.append(panel);

    const form = el("div", { class: "decision" });
    const acceptButton = el("button", { id: "accept" }, "Accept (A)");
    const overrideValue = el("input", {
      id: "override-value",
      type: "number",
      step: "any",
      placeholder: "mm",
    });
    const overrideButton = el("button", { id: "override" }, "Override (O)");
    const noteInput = el("input", { id: "note", type: "text", placeholder: "note" });
    const rejectButton = el("button", { id: "reject" }, "Reject (R)");
    const feedback = el("p", { id: "decision-feedback", class: "feedback" });

    acceptButton.addEventListener("click", () => {
      void this.decide("accept");
    });
    overrideButton.addEventListener("click", () => {
      void this.decide("override");
    });
    rejectButton.addEventListener("click", () => {
      void this.decide("reject");
    });

    form.append(acceptButton, overrideValue, overrideButton, noteInput, rejectButton, feedback);
    this.casePane.append(form);
  }

  // ---- decisions ---------------------------------------------------------

  async decide(action: DecisionAction): Promise<void> {
    const detail = this.caseDetail;
    if (!detail) return;
    const valueMm =
      action === "override"
        ? this.casePane.querySelector<HTMLInputElement>("#override-value")?.value ?? ""
        : "";
    const note = this.casePane.querySelector<HTMLInputElement>("#note")?.value ?? "";
    const checked = validateDecision(action, valueMm, note, this.reviewer);
    const feedback = this.casePane.querySelector<HTMLElement>("#decision-feedback");
    if (!checked.ok) {
      if (feedback) feedback.textContent = checked.message;
      return;                       // invalid form: no request leaves the browser
    }
    try {
      await postDecision(detail.case_id, checked.body);
    } catch (error) {
      if (feedback) feedback.textContent = (error as Error).message;
      return;
    }
    const next = this.queue.remove(detail.case_id);
    this.renderQueue();
    if (next) {
      await this.open(next.case_id);
    } else {
      this.caseDetail = null;
      this.renderCaseEmpty("all reviewed");
    }
  }

  private onKey(event: KeyboardEvent): void {
    const target = event.target as HTMLElement | null;
    if (target && (target.tagName === "INPUT" || target.tagName === "TEXTAREA" ||
                   target.tagName === "SELECT")) {
      return;
    }
    if (!this.caseDetail) return;
    const key = event.key.toLowerCase();
    if (key === "a") {
      void this.decide("accept");
    } else if (key === "o") {
      this.casePane.querySelector<HTMLInputElement>("#override-value")?.focus();
    } else if (key === "r") {
      this.casePane.querySelector<HTMLInputElement>("#note")?.focus();
    }
  }

  // ---- banner ------------------------------------------------------------

  private showBanner(message: string, retry: boolean): void {
    this.banner.replaceChildren(el("span", {}, message));
    if (retry) {
      const button = el("button", { id: "retry" }, "retry");
      button.addEventListener("click", () => {
        void this.refresh();
      });
      this.banner.append(button);
    }
    this.banner.removeAttribute("hidden");
  }

  private hideBanner(): void {
    this.banner.setAttribute("hidden", "");
    this.banner.replaceChildren();
  }
}

let current: App | null = null;

export function initApp(root: HTMLElement): App {
  current?.dispose();
  current = new App(root);
  return current;
}
