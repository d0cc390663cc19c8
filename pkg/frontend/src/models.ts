/** Document shapes served by the tapeloop HTTP API, mirrored one to one. */

export type StepCategory = "thought" | "action" | "observation" | "control";

export interface StepMetadataDoc {
  id: string;
  agent: string;
  node: string;
  prompt_id: string | null;
  other: Record<string, unknown>;
}

/** Steps are flat documents: payload fields sit next to kind/category. */
export interface StepDoc {
  kind: string;
  category: StepCategory;
  metadata: StepMetadataDoc;
  [payloadField: string]: unknown;
}

export interface TapeMetadataDoc {
  id: string;
  parent_id: string | null;
  author: string;
  n_added: number;
}

export interface TapeDoc {
  metadata: TapeMetadataDoc;
  steps: StepDoc[];
}

/** One row of GET /api/tapes. */
export interface TapeListEntry {
  tape_id: string;
  file: string;
  parent_id: string | null;
  author: string;
  steps: number;
  created_at: string;
}

export type DiffMode = "content" | "provenance" | "full";
export type DiffStatus = "changed" | "only_in_a" | "only_in_b";

export interface DiffEntryDoc {
  index: number;
  status: DiffStatus;
  changed_paths: string[];
}

export interface DiffReportDoc {
  a: string;
  b: string;
  a_length: number;
  b_length: number;
  mode: DiffMode;
  equal: boolean;
  first_divergence: number | null;
  entries: DiffEntryDoc[];
}

export type RunStatus = "running" | "finished" | "failed";

/** GET /api/runs/{id}. */
export interface RunHandleDoc {
  run_id: string;
  status: RunStatus;
  reason: string | null;
  input_tape_id: string;
  current_tape_id: string;
  final_tape_id: string | null;
  conflict: boolean;
  error: string | null;
  config: Record<string, unknown>;
}

export interface ForkResponseDoc {
  tape: TapeDoc;
  conflicts_with_runs: string[];
}

export interface StartRunRequest {
  agent_config: Record<string, unknown>;
  tape_id: string;
  env_config?: Record<string, unknown>;
  loop?: Record<string, unknown>;
}

/** GET /api/llm_calls/{prompt_id}. */
export interface LlmCallDoc {
  prompt_id: string;
  model: string;
  prompt: { messages: Array<{ role: string; content: string }> };
  output: unknown;
  input_tokens: number | null;
  output_tokens: number | null;
  created_at: string;
}

/** Server-sent events on GET /api/runs/{id}/events. */
export type RunEvent =
  | { type: "snapshot"; run_id: string; payload: { status: RunStatus; tape: TapeDoc } }
  | { type: "step"; run_id: string; payload: StepDoc }
  | { type: "partial_step"; run_id: string; payload: StepDoc }
  | { type: "agent_tape"; run_id: string; payload: { tape_id: string; length: number } }
  | { type: "env_tape"; run_id: string; payload: { tape_id: string; length: number } }
  | { type: "finished"; run_id: string; payload: { reason: string; tape_id: string; conflict: boolean } }
  | { type: "error"; run_id: string; payload: { message: string } };

export function isRunEvent(value: unknown): value is RunEvent {
  if (typeof value !== "object" || value === null) return false;
  const record = value as Record<string, unknown>;
  return typeof record.type === "string" && typeof record.run_id === "string" && "payload" in record;
}
