/** Live run events over server-sent events. */

import { isRunEvent, type RunEvent } from "./models.js";

export interface RunStreamHandlers {
  onEvent: (event: RunEvent) => void;
  /** Transport-level failure (the server closing after "finished" is normal). */
  onTransportError?: () => void;
}

/** Minimal EventSource surface, injectable so tests and node can fake it. */
export interface EventSourceLike {
  onmessage: ((event: { data: string }) => void) | null;
  onerror: ((event: unknown) => void) | null;
  close(): void;
}

export type EventSourceFactory = (url: string) => EventSourceLike;

function defaultFactory(url: string): EventSourceLike {
  const ctor = (globalThis as { EventSource?: new (url: string) => EventSourceLike }).EventSource;
  if (!ctor) throw new Error("no EventSource available; pass an EventSourceFactory");
  return new ctor(url);
}

/**
 * Subscribe to a run's event stream. The server first replays the full
 * history (snapshot plus every prior event), then tails live events, so
 * subscribing after the run started loses nothing. Returns a close function;
 * the stream also closes itself once a finished or error event arrives.
 */
export function subscribeRunEvents(
  url: string,
  handlers: RunStreamHandlers,
  factory: EventSourceFactory = defaultFactory,
): () => void {
  const source = factory(url);
  let closed = false;
  const close = () => {
    if (closed) return;
    closed = true;
    source.close();
  };
  source.onmessage = (message) => {
    let parsed: unknown;
    try {
      parsed = JSON.parse(message.data);
    } catch {
      return; // not a JSON event; ignore
    }
    if (!isRunEvent(parsed)) return;
    handlers.onEvent(parsed);
    if (parsed.type === "finished" || parsed.type === "error") close();
  };
  source.onerror = () => {
    if (closed) return; // the server ends the stream after a terminal event
    close();
    handlers.onTransportError?.();
  };
  return close;
}
