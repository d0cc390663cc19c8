/** Shared fakes: step/tape builders, a fetch router, a controllable EventSource. */

import { vi } from "vitest";
import type { StepCategory, StepDoc, TapeDoc } from "../src/models.js";
import type { EventSourceLike } from "../src/sse.js";

let idCounter = 0;

export function makeStep(
  kind: string,
  category: StepCategory,
  payload: Record<string, unknown> = {},
  meta: Partial<StepDoc["metadata"]> = {},
): StepDoc {
  idCounter += 1;
  return {
    kind,
    category,
    ...payload,
    metadata: {
      id: `step-${idCounter}`,
      agent: "",
      node: "",
      prompt_id: null,
      other: {},
      ...meta,
    },
  };
}

export function makeTape(steps: StepDoc[], meta: Partial<TapeDoc["metadata"]> = {}): TapeDoc {
  idCounter += 1;
  return {
    metadata: {
      id: `tape-${idCounter}`,
      parent_id: null,
      author: "",
      n_added: steps.length,
      ...meta,
    },
    steps,
  };
}

/** The five-step sample the studio acceptance checks render: one step per
 * category plus a second action, ids pinned for assertions. */
export function fiveStepTape(): TapeDoc {
  return makeTape(
    [
      makeStep("user_message", "observation", { content: "what is 6*7?" }),
      makeStep("plan", "thought", { content: "Use the calculator." }, { agent: "calc", node: "main" }),
      makeStep(
        "tool_calls",
        "action",
        { calls: [{ id: "c1", name: "calculator", arguments: '{"expression": "6*7"}' }] },
        { agent: "calc", node: "main", prompt_id: "prompt-1" },
      ),
      makeStep("set_next_node", "control", { next_node: 0 }, { agent: "calc", node: "main" }),
      makeStep("tool_result", "observation", { call_id: "c1", result: 42, text: "42", tool_name: "calculator" }),
    ],
    { id: "tape-golden" },
  );
}

export interface RecordedRequest {
  method: string;
  url: string;
  body: unknown;
}

export type Route = (request: RecordedRequest) => { status?: number; json: unknown } | undefined;

/** Install a fetch stub routing by method+url; returns the recorded requests. */
export function stubFetch(route: Route): RecordedRequest[] {
  const requests: RecordedRequest[] = [];
  vi.stubGlobal("fetch", async (input: RequestInfo | URL, init?: RequestInit) => {
    const url = String(input);
    const method = init?.method ?? "GET";
    const body = init?.body ? JSON.parse(String(init.body)) : undefined;
    const request: RecordedRequest = { method, url, body };
    requests.push(request);
    const matched = route(request);
    if (!matched) {
      return new Response(JSON.stringify({ detail: `no stub for ${method} ${url}` }), {
        status: 404,
        headers: { "Content-Type": "application/json" },
      });
    }
    return new Response(JSON.stringify(matched.json), {
      status: matched.status ?? 200,
      headers: { "Content-Type": "application/json" },
    });
  });
  return requests;
}

/** An EventSource double the test drives by hand. */
export class FakeEventSource implements EventSourceLike {
  static instances: FakeEventSource[] = [];
  onmessage: ((event: { data: string }) => void) | null = null;
  onerror: ((event: unknown) => void) | null = null;
  closed = false;

  constructor(readonly url: string) {
    FakeEventSource.instances.push(this);
  }

  close(): void {
    this.closed = true;
  }

  emit(event: unknown): void {
    this.onmessage?.({ data: typeof event === "string" ? event : JSON.stringify(event) });
  }

  static reset(): void {
    FakeEventSource.instances = [];
  }

  static latest(): FakeEventSource {
    const last = FakeEventSource.instances[FakeEventSource.instances.length - 1];
    if (!last) throw new Error("no EventSource was opened");
    return last;
  }
}

export const fakeEventSourceFactory = (url: string): EventSourceLike => new FakeEventSource(url);

/** Let queued microtasks (awaited fetches, handlers) settle. */
export async function flush(): Promise<void> {
  for (let i = 0; i < 10; i += 1) await Promise.resolve();
}
