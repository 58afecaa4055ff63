// Wire protocol types mirroring PROTOCOL.md exactly: one JSON object per
// WebSocket text frame with keys kind / run_id / node / trial / payload.

export type Kind =
  | "Join"
  | "Assigned"
  | "NarrativeShow"
  | "PreDocSubmit"
  | "TrialPrompt"
  | "HashtagSubmit"
  | "TrialReveal"
  | "PostDocSubmit"
  | "RunComplete"
  | "Error";

export interface WireMessage {
  kind: Kind;
  run_id: string;
  node: number | null;
  trial: number | null;
  payload: Record<string, unknown>;
}

export interface AssignedPayload {
  node: number;
  token: string;
  n: number;
  structure: string;
  trials: number;
  narrative_id: string;
}

export interface NarrativePayload {
  phase: "pre" | "post";
  narrative: string;
  word_limit: number;
  hashtag_count: number;
  deadline_s: number;
}

export interface RevealPayload {
  own: string;
  partner: string;
  matched: boolean;
  point: number;
  cumulative: number;
}

export interface CompletePayload {
  points: Record<string, number>;
  trials: number;
}

export interface ErrorPayload {
  code: string;
  message: string;
}

const KINDS: ReadonlySet<string> = new Set([
  "Join", "Assigned", "NarrativeShow", "PreDocSubmit", "TrialPrompt",
  "HashtagSubmit", "TrialReveal", "PostDocSubmit", "RunComplete", "Error",
]);

export function parseMessage(raw: string): WireMessage {
  const obj = JSON.parse(raw) as Partial<WireMessage>;
  if (typeof obj !== "object" || obj === null || !KINDS.has(String(obj.kind))) {
    throw new Error(`bad message kind in ${raw.slice(0, 80)}`);
  }
  return {
    kind: obj.kind as Kind,
    run_id: String(obj.run_id ?? ""),
    node: obj.node ?? null,
    trial: obj.trial ?? null,
    payload: (obj.payload ?? {}) as Record<string, unknown>,
  };
}

export function encodeMessage(msg: WireMessage): string {
  // Key order is part of the contract.
  return JSON.stringify({
    kind: msg.kind,
    run_id: msg.run_id,
    node: msg.node,
    trial: msg.trial,
    payload: msg.payload,
  });
}

export function makeJoin(runId: string, token?: string | null): WireMessage {
  return {
    kind: "Join",
    run_id: runId,
    node: null,
    trial: null,
    payload: token ? { token } : {},
  };
}
