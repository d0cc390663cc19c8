/** The studio application: browse tapes, edit steps into forks, resume runs live. */

import { StudioApi } from "./api.js";
import type { RunEvent, StepDoc, TapeDoc } from "./models.js";
import {
  renderRunBanner,
  renderStepRow,
  renderTape,
  renderTapeList,
  type BannerState,
} from "./render.js";
import { subscribeRunEvents, type EventSourceFactory } from "./sse.js";

const SAMPLE_AGENT_CONFIG = {
  name: "calc",
  llms: { default: { provider: "mock", script: [] as string[] } },
  nodes: [
    {
      type: "mono",
      name: "main",
      system_template: "You solve arithmetic with the calculator tool.",
      guidance: "Reply with a JSON list of steps.",
      allowed_steps: ["tool_calls", "set_next_node", "assistant_message"],
    },
  ],
};

export interface StudioConfig {
  /** Single place the API location is set, e.g. "http://127.0.0.1:8000". */
  baseUrl: string;
  eventSourceFactory?: EventSourceFactory;
}

export class StudioApp {
  readonly api: StudioApi;
  private readonly eventSourceFactory?: EventSourceFactory;
  private root!: HTMLElement;
  private listPane!: HTMLElement;
  private tapePane!: HTMLElement;
  private runPane!: HTMLElement;
  private statusLine!: HTMLElement;
  private currentTape: TapeDoc | null = null;
  private closeStream: (() => void) | null = null;

  constructor(config: StudioConfig) {
    this.api = new StudioApi(config.baseUrl);
    this.eventSourceFactory = config.eventSourceFactory;
  }

  /** Build the static frame inside root and load the tape list. */
  async mount(root: HTMLElement): Promise<void> {
    this.root = root;
    root.innerHTML = "";
    root.classList.add("studio");

    const heading = document.createElement("h1");
    heading.textContent = "tapeloop studio";
    root.appendChild(heading);

    this.statusLine = document.createElement("p");
    this.statusLine.className = "status-line";
    root.appendChild(this.statusLine);

    this.listPane = document.createElement("div");
    this.listPane.className = "pane pane-list";
    root.appendChild(this.listPane);

    this.tapePane = document.createElement("div");
    this.tapePane.className = "pane pane-tape";
    root.appendChild(this.tapePane);

    this.runPane = document.createElement("div");
    this.runPane.className = "pane pane-run";
    root.appendChild(this.runPane);

    await this.refreshTapeList();
  }

  private setStatus(text: string): void {
    this.statusLine.textContent = text;
  }

  async refreshTapeList(): Promise<void> {
    try {
      const entries = await this.api.listTapes();
      this.listPane.innerHTML = "";
      this.listPane.appendChild(renderTapeList(entries, (tapeId) => void this.openTape(tapeId)));
      this.setStatus(`${entries.length} tape(s) in the store`);
    } catch (error) {
      this.setStatus(`could not list tapes: ${describe(error)}`);
    }
  }

  async openTape(tapeId: string): Promise<void> {
    try {
      const tape = await this.api.getTape(tapeId);
      this.showTape(tape);
    } catch (error) {
      this.setStatus(`could not open tape ${tapeId}: ${describe(error)}`);
    }
  }

  private showTape(tape: TapeDoc): void {
    this.currentTape = tape;
    this.tapePane.innerHTML = "";
    this.tapePane.appendChild(renderTape(tape, { onEdit: (index) => this.openEditor(index) }));
    this.tapePane.appendChild(this.buildResumeControls(tape));
    this.setStatus(`viewing tape ${tape.metadata.id}`);
  }

  /** Inline editor for one step; saving forks the tape through the API. */
  private openEditor(index: number): void {
    const tape = this.currentTape;
    if (!tape) return;
    const existing = this.tapePane.querySelector(".step-editor");
    existing?.remove();

    const step = tape.steps[index];
    const editor = document.createElement("div");
    editor.className = "step-editor";
    editor.dataset.index = String(index);

    const label = document.createElement("p");
    label.textContent = `Editing step ${index} (${step.kind}) — saving forks a new tape`;
    editor.appendChild(label);

    const textarea = document.createElement("textarea");
    textarea.className = "step-editor-input";
    const { metadata: _metadata, ...editable } = step;
    textarea.value = JSON.stringify(editable, null, 2);
    editor.appendChild(textarea);

    const save = document.createElement("button");
    save.type = "button";
    save.className = "step-editor-save";
    save.textContent = "Save as fork";
    save.addEventListener("click", () => void this.saveEdit(tape, index, textarea.value));
    editor.appendChild(save);

    const cancel = document.createElement("button");
    cancel.type = "button";
    cancel.className = "step-editor-cancel";
    cancel.textContent = "Cancel";
    cancel.addEventListener("click", () => editor.remove());
    editor.appendChild(cancel);

    this.tapePane.appendChild(editor);
  }

  private async saveEdit(tape: TapeDoc, index: number, rawStep: string): Promise<void> {
    let replacement: Partial<StepDoc>;
    try {
      replacement = JSON.parse(rawStep) as Partial<StepDoc>;
    } catch {
      this.setStatus("edit is not valid JSON");
      return;
    }
    try {
      const forked = await this.api.forkTape(tape.metadata.id, index, replacement);
      await this.refreshTapeList();
      this.showTape(forked.tape);
      const conflicts = forked.conflicts_with_runs.length
        ? ` (conflicts with running run(s): ${forked.conflicts_with_runs.join(", ")})`
        : "";
      this.setStatus(
        `forked ${tape.metadata.id} at step ${index} into ${forked.tape.metadata.id}${conflicts}`,
      );
    } catch (error) {
      this.setStatus(`fork failed: ${describe(error)}`);
    }
  }

  /** Resume panel: agent/env config inputs plus the button that starts a run. */
  private buildResumeControls(tape: TapeDoc): HTMLElement {
    const panel = document.createElement("div");
    panel.className = "resume-panel";

    const label = document.createElement("p");
    label.textContent = `Resume from tape ${tape.metadata.id}`;
    panel.appendChild(label);

    const agentInput = document.createElement("textarea");
    agentInput.className = "agent-config-input";
    agentInput.value = JSON.stringify(SAMPLE_AGENT_CONFIG, null, 2);
    panel.appendChild(agentInput);

    const envInput = document.createElement("textarea");
    envInput.className = "env-config-input";
    envInput.value = JSON.stringify({ tools: ["calculator"] }, null, 2);
    panel.appendChild(envInput);

    const resume = document.createElement("button");
    resume.type = "button";
    resume.className = "resume-button";
    resume.textContent = "Resume run";
    resume.addEventListener("click", () =>
      void this.resumeRun(tape.metadata.id, agentInput.value, envInput.value),
    );
    panel.appendChild(resume);

    return panel;
  }

  async resumeRun(tapeId: string, rawAgentConfig: string, rawEnvConfig: string): Promise<void> {
    let agentConfig: Record<string, unknown>;
    let envConfig: Record<string, unknown>;
    try {
      agentConfig = JSON.parse(rawAgentConfig) as Record<string, unknown>;
      envConfig = rawEnvConfig.trim() ? (JSON.parse(rawEnvConfig) as Record<string, unknown>) : {};
    } catch {
      this.setStatus("agent/env config is not valid JSON");
      return;
    }

    this.closeStream?.();
    this.runPane.innerHTML = "";
    const banner = renderRunBanner("running", "starting");
    this.runPane.appendChild(banner);
    const liveSteps = document.createElement("div");
    liveSteps.className = "live-steps";
    this.runPane.appendChild(liveSteps);

    let runId: string;
    try {
      runId = await this.api.startRun({ agent_config: agentConfig, tape_id: tapeId, env_config: envConfig });
    } catch (error) {
      this.replaceBanner("failed", describe(error));
      return;
    }
    this.setStatus(`run ${runId} started from ${tapeId}`);

    let liveIndex = this.currentTape?.steps.length ?? 0;
    this.closeStream = subscribeRunEvents(
      this.api.runEventsUrl(runId),
      {
        onEvent: (event: RunEvent) => {
          switch (event.type) {
            case "snapshot":
              this.replaceBanner("running", `run ${runId} (${event.payload.status})`);
              break;
            case "step":
              liveSteps.appendChild(renderStepRow(event.payload, liveIndex));
              liveIndex += 1;
              break;
            case "agent_tape":
            case "env_tape":
              this.replaceBanner("running", `run ${runId} — tape at ${event.payload.length} steps`);
              break;
            case "finished":
              this.replaceBanner(
                "finished",
                `reason ${event.payload.reason}, final tape ${event.payload.tape_id}`,
              );
              void this.refreshTapeList();
              break;
            case "error":
              this.replaceBanner("failed", event.payload.message);
              break;
            case "partial_step":
              break; // streamed fragments; the full step event follows
          }
        },
        onTransportError: () => this.replaceBanner("failed", "event stream dropped"),
      },
      this.eventSourceFactory,
    );
  }

  private replaceBanner(state: BannerState, detail: string): void {
    const previous = this.runPane.querySelector(".run-banner");
    const banner = renderRunBanner(state, detail);
    if (previous) previous.replaceWith(banner);
    else this.runPane.prepend(banner);
  }
}

function describe(error: unknown): string {
  return error instanceof Error ? error.message : String(error);
}

/** Browser entry point: mount on #studio-root using the page's own origin
 * unless a data-base-url attribute overrides it. */
export function bootFromDocument(): void {
  const root = document.getElementById("studio-root");
  if (!root) return;
  const baseUrl = root.dataset.baseUrl || window.location.origin;
  const app = new StudioApp({ baseUrl });
  void app.mount(root);
}

if (typeof document !== "undefined" && document.getElementById("studio-root")) {
  bootFromDocument();
}
