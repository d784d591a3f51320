// Wire protocol: newline-delimited JSON messages over one bidirectional
// stream per session. The console never computes instructions; it renders
// what the server says and streams operator axes back.

export type Style = "bars" | "circles" | "none";

export interface StateMessage {
  type: "state";
  seq: number;
  t: number;
  q: number[];
  v: number[];
  ee: number[];
  bucket_load: number;
  truck_fill: number;
}

export interface AxisInstruction {
  direction: -1 | 0 | 1;
  magnitude: number;
  matched: boolean;
}

export interface InstructionMessage {
  type: "instruction";
  seq: number;
  t: number;
  subgoal: number;
  desired: { e: number[]; id: number };
  per_axis: AxisInstruction[];
  style: string;
}

export interface EventMessage {
  type: "event";
  kind: string;
  t: number;
}

export interface MetricsMessage {
  type: "metrics";
  cycle_times: number[];
  actions_per_cycle: number[];
  erroneous_actions_per_cycle: number[];
  dump_heights: number[];
}

export interface ErrorMessage {
  type: "error";
  msg: string;
}

export type ServerMessage =
  | StateMessage
  | InstructionMessage
  | EventMessage
  | MetricsMessage
  | ErrorMessage;

// Transport abstraction: TCP socket in Node, WebSocket bridge in the
// browser. Implementations deliver complete lines (without the newline).
export interface LineTransport {
  send(line: string): void;
  onLine(handler: (line: string) => void): void;
  onClose(handler: () => void): void;
  close(): void;
}

export type ConnectionStatus = "connecting" | "live" | "ended" | "error";

export interface UiSessionState {
  status: ConnectionStatus;
  style: Style;
  state: StateMessage | null;
  instruction: InstructionMessage | null;
  events: EventMessage[];
  metrics: MetricsMessage | null;
  lastError: string | null;
}

/** Splits a byte/text stream into newline-delimited frames. */
export class LineSplitter {
  private buffer = "";

  push(chunk: string, emit: (line: string) => void): void {
    this.buffer += chunk;
    let idx: number;
    while ((idx = this.buffer.indexOf("\n")) >= 0) {
      const line = this.buffer.slice(0, idx);
      this.buffer = this.buffer.slice(idx + 1);
      if (line.trim().length > 0) emit(line);
    }
  }
}

/**
 * One operator session. Sends hello on construction; rendering consumers
 * read `view` (latest-known state, so a lost or reordered message never
 * blanks the display). Input sequence numbers are monotone from 0.
 */
export class ProtocolSession {
  readonly view: UiSessionState;
  private seq = 0;
  private helloAcked = false;
  private listeners: Array<(view: UiSessionState) => void> = [];

  constructor(private transport: LineTransport, style: Style) {
    this.view = {
      status: "connecting",
      style,
      state: null,
      instruction: null,
      events: [],
      metrics: null,
      lastError: null,
    };
    transport.onLine((line) => this.handleLine(line));
    transport.onClose(() => {
      if (this.view.status !== "error") {
        this.view.status = "ended";
      }
      this.notify();
    });
    transport.send(JSON.stringify({ type: "hello", style }));
  }

  onUpdate(listener: (view: UiSessionState) => void): void {
    this.listeners.push(listener);
  }

  /** True once the server acknowledged the hello with its first state. */
  get live(): boolean {
    return this.helloAcked && this.view.status === "live";
  }

  /** Send one 25 Hz axes sample; values are clamped to [-1, 1]. */
  sendAxes(axes: number[]): number {
    const clamped = axes
      .slice(0, 4)
      .map((a) => Math.max(-1, Math.min(1, Number.isFinite(a) ? a : 0)));
    while (clamped.length < 4) clamped.push(0);
    const seq = this.seq++;
    this.transport.send(
      JSON.stringify({ type: "input", seq, axes: clamped }),
    );
    return seq;
  }

  end(): void {
    this.transport.send(JSON.stringify({ type: "end" }));
  }

  close(): void {
    this.transport.close();
  }

  private handleLine(line: string): void {
    let msg: ServerMessage;
    try {
      msg = JSON.parse(line) as ServerMessage;
    } catch {
      return; // tolerate garbage frames
    }
    switch (msg.type) {
      case "state":
        // first state message is the hello acknowledgement
        this.helloAcked = true;
        this.view.status = "live";
        if (!this.view.state || msg.seq >= this.view.state.seq) {
          this.view.state = msg;
        }
        break;
      case "instruction":
        if (!this.view.instruction || msg.seq >= this.view.instruction.seq) {
          this.view.instruction = msg;
        }
        break;
      case "event":
        this.view.events.push(msg);
        break;
      case "metrics":
        this.view.metrics = msg;
        this.view.status = "ended";
        break;
      case "error":
        this.view.lastError = msg.msg;
        this.view.status = "error";
        break;
    }
    this.notify();
  }

  private notify(): void {
    for (const fn of this.listeners) fn(this.view);
  }
}
