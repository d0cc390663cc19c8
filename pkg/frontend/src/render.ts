/** DOM builders for tapes, steps, diffs, and run status. No app state here. */

import type { DiffReportDoc, StepCategory, StepDoc, TapeDoc, TapeListEntry } from "./models.js";

/** One color per step category, used as the row accent. */
export const CATEGORY_COLORS: Record<StepCategory, string> = {
  thought: "#a855f7", // purple: the agent reasoning to itself
  action: "#3b82f6", // blue: the agent acting on the world
  observation: "#22c55e", // green: the world answering back
  control: "#eab308", // yellow: delegation and flow (call/respond/set_next_node)
};

const PAYLOAD_HIDDEN_KEYS = new Set(["kind", "category", "metadata"]);

/** The step's payload fields (steps are flat documents). */
export function stepPayload(step: StepDoc): Record<string, unknown> {
  const payload: Record<string, unknown> = {};
  for (const [key, value] of Object.entries(step)) {
    if (!PAYLOAD_HIDDEN_KEYS.has(key)) payload[key] = value;
  }
  return payload;
}

/** One line of human-oriented summary for a step row. */
export function summarizeStep(step: StepDoc): string {
  const payload = stepPayload(step);
  if (typeof payload.content === "string") return payload.content;
  if (typeof payload.text === "string") return payload.text;
  if (Array.isArray(payload.calls)) {
    const names = payload.calls
      .map((call) => (typeof call === "object" && call !== null ? (call as { name?: string }).name : undefined))
      .filter((name): name is string => typeof name === "string");
    return names.length ? `calls: ${names.join(", ")}` : "calls";
  }
  if (typeof payload.reason === "string") return payload.reason;
  if (typeof payload.agent === "string" && step.kind === "call") return `call ${payload.agent}`;
  return JSON.stringify(payload);
}

export interface StepRowOptions {
  /** When set, the row gets an Edit button invoking this with the step index. */
  onEdit?: (index: number) => void;
}

export function renderStepRow(step: StepDoc, index: number, options: StepRowOptions = {}): HTMLElement {
  const row = document.createElement("div");
  row.className = `step-row step-${step.category}`;
  row.dataset.category = step.category;
  row.dataset.kind = step.kind;
  row.dataset.index = String(index);
  row.style.borderLeftColor = CATEGORY_COLORS[step.category] ?? "#9ca3af";

  const header = document.createElement("div");
  header.className = "step-header";

  const indexBadge = document.createElement("span");
  indexBadge.className = "step-index";
  indexBadge.textContent = String(index);
  header.appendChild(indexBadge);

  const kindBadge = document.createElement("span");
  kindBadge.className = "step-kind";
  kindBadge.textContent = step.kind;
  kindBadge.style.color = CATEGORY_COLORS[step.category] ?? "inherit";
  header.appendChild(kindBadge);

  const categoryBadge = document.createElement("span");
  categoryBadge.className = "step-category";
  categoryBadge.textContent = step.category;
  header.appendChild(categoryBadge);

  if (step.metadata.agent) {
    const agentBadge = document.createElement("span");
    agentBadge.className = "step-agent";
    agentBadge.textContent = step.metadata.node
      ? `${step.metadata.agent} · ${step.metadata.node}`
      : step.metadata.agent;
    header.appendChild(agentBadge);
  }

  if (options.onEdit) {
    const editButton = document.createElement("button");
    editButton.type = "button";
    editButton.className = "step-edit";
    editButton.textContent = "Edit";
    editButton.addEventListener("click", () => options.onEdit?.(index));
    header.appendChild(editButton);
  }

  row.appendChild(header);

  const body = document.createElement("div");
  body.className = "step-body";
  body.textContent = summarizeStep(step);
  row.appendChild(body);

  const details = document.createElement("details");
  details.className = "step-json";
  const summary = document.createElement("summary");
  summary.textContent = "payload";
  details.appendChild(summary);
  const pre = document.createElement("pre");
  pre.textContent = JSON.stringify(stepPayload(step), null, 2);
  details.appendChild(pre);
  row.appendChild(details);

  return row;
}

export interface TapeRenderOptions extends StepRowOptions {}

/** The tape view: lineage header plus one row per step. */
export function renderTape(tape: TapeDoc, options: TapeRenderOptions = {}): HTMLElement {
  const section = document.createElement("section");
  section.className = "tape";
  section.dataset.tapeId = tape.metadata.id;

  const header = document.createElement("header");
  header.className = "tape-meta";
  const title = document.createElement("h2");
  title.textContent = `Tape ${tape.metadata.id}`;
  header.appendChild(title);
  const lineage = document.createElement("p");
  lineage.className = "tape-lineage";
  const parent = tape.metadata.parent_id ? `forked from ${tape.metadata.parent_id}` : "no parent";
  const author = tape.metadata.author ? ` · by ${tape.metadata.author}` : "";
  lineage.textContent = `${tape.steps.length} steps · ${parent}${author}`;
  header.appendChild(lineage);
  section.appendChild(header);

  const steps = document.createElement("div");
  steps.className = "steps";
  tape.steps.forEach((step, index) => steps.appendChild(renderStepRow(step, index, options)));
  section.appendChild(steps);

  return section;
}

export function renderTapeList(entries: TapeListEntry[], onOpen: (tapeId: string) => void): HTMLElement {
  const list = document.createElement("ul");
  list.className = "tape-list";
  for (const entry of entries) {
    const item = document.createElement("li");
    item.className = "tape-list-entry";
    item.dataset.tapeId = entry.tape_id;

    const open = document.createElement("button");
    open.type = "button";
    open.className = "tape-open";
    open.textContent = entry.tape_id;
    open.addEventListener("click", () => onOpen(entry.tape_id));
    item.appendChild(open);

    const meta = document.createElement("span");
    meta.className = "tape-list-meta";
    const parent = entry.parent_id ? ` · child of ${entry.parent_id}` : "";
    const author = entry.author ? ` · ${entry.author}` : "";
    meta.textContent = `${entry.steps} steps${author}${parent}`;
    item.appendChild(meta);

    list.appendChild(item);
  }
  return list;
}

export function renderDiff(report: DiffReportDoc): HTMLElement {
  const container = document.createElement("div");
  container.className = "diff-report";

  const heading = document.createElement("p");
  heading.className = "diff-heading";
  heading.textContent = report.equal
    ? `Tapes are equal (${report.a_length} steps, mode=${report.mode})`
    : `Tapes diverge at step ${report.first_divergence} (mode=${report.mode})`;
  container.appendChild(heading);

  if (!report.equal) {
    const list = document.createElement("ul");
    list.className = "diff-entries";
    for (const entry of report.entries) {
      const item = document.createElement("li");
      item.className = `diff-entry diff-${entry.status}`;
      const where =
        entry.status === "changed"
          ? `changed: ${entry.changed_paths.join(", ")}`
          : entry.status === "only_in_a"
            ? "only in left tape"
            : "only in right tape";
      item.textContent = `step ${entry.index} — ${where}`;
      list.appendChild(item);
    }
    container.appendChild(list);
  }
  return container;
}

export type BannerState = "running" | "finished" | "failed";

export function renderRunBanner(state: BannerState, detail: string): HTMLElement {
  const banner = document.createElement("div");
  banner.className = `run-banner run-${state}`;
  banner.dataset.state = state;
  banner.textContent =
    state === "running" ? `Run in progress — ${detail}` : state === "finished" ? `Finished — ${detail}` : `Failed — ${detail}`;
  return banner;
}
