// Pure view-model: the screen a participant sees is a function of the last
// server message and the local clock, nothing else. All transitions happen
// in applyMessage / local marks; rendering reads the view and never computes
// scores itself (matched/points come verbatim from TrialReveal).

import type {
  AssignedPayload,
  CompletePayload,
  ErrorPayload,
  NarrativePayload,
  RevealPayload,
  WireMessage,
} from "./protocol.js";

export type Screen =
  | { name: "connecting" }
  | { name: "lobby" }
  | {
      name: "narrative";
      phase: "pre" | "post";
      narrative: string;
      wordLimit: number;
      hashtagCount: number;
      sent: boolean;
      acked: boolean;
    }
  | { name: "trial"; trial: number; own: string | null; sent: boolean; acked: boolean }
  | { name: "reveal"; trial: number; reveal: RevealPayload }
  | { name: "complete"; points: Record<string, number>; trials: number }
  | { name: "fatal"; code: string; message: string };

export interface ClientView {
  runId: string;
  node: number | null;
  token: string | null;
  structure: string | null;
  trials: number | null;
  cumulative: number;
  screen: Screen;
  deadlineAt: number | null; // epoch ms; advisory client countdown
  notice: string | null; // inline validation/server notice for the screen
}

export function initialView(runId: string): ClientView {
  return {
    runId,
    node: null,
    token: null,
    structure: null,
    trials: null,
    cumulative: 0,
    screen: { name: "connecting" },
    deadlineAt: null,
    notice: null,
  };
}

const FATAL_CODES = new Set([
  "run_full",
  "run_started",
  "bad_token",
  "aborted",
  "unknown_run",
  "not_joined",
]);

export function applyMessage(view: ClientView, msg: WireMessage, nowMs: number): ClientView {
  switch (msg.kind) {
    case "Assigned": {
      const p = msg.payload as unknown as AssignedPayload;
      return {
        ...view,
        node: p.node,
        token: p.token,
        structure: p.structure,
        trials: p.trials,
        screen: { name: "lobby" },
        notice: null,
      };
    }
    case "NarrativeShow": {
      const p = msg.payload as unknown as NarrativePayload;
      return {
        ...view,
        screen: {
          name: "narrative",
          phase: p.phase,
          narrative: p.narrative,
          wordLimit: p.word_limit,
          hashtagCount: p.hashtag_count,
          sent: false,
          acked: false,
        },
        deadlineAt: nowMs + p.deadline_s * 1000,
        notice: null,
      };
    }
    case "PreDocSubmit":
    case "PostDocSubmit": {
      if (view.screen.name === "narrative" && msg.payload["ok"] === true) {
        return { ...view, screen: { ...view.screen, acked: true }, notice: null };
      }
      return view;
    }
    case "TrialPrompt": {
      const deadlineS = Number(msg.payload["deadline_s"] ?? 0);
      return {
        ...view,
        screen: {
          name: "trial",
          trial: msg.trial ?? 0,
          own: null,
          sent: false,
          acked: false,
        },
        deadlineAt: nowMs + deadlineS * 1000,
        notice: null,
      };
    }
    case "HashtagSubmit": {
      if (view.screen.name === "trial" && msg.payload["ok"] === true) {
        return { ...view, screen: { ...view.screen, acked: true }, notice: null };
      }
      return view;
    }
    case "TrialReveal": {
      // Displayed verbatim: the client performs no scoring of its own.
      const reveal = msg.payload as unknown as RevealPayload;
      return {
        ...view,
        cumulative: reveal.cumulative,
        screen: { name: "reveal", trial: msg.trial ?? 0, reveal },
        deadlineAt: null,
        notice: null,
      };
    }
    case "RunComplete": {
      const p = msg.payload as unknown as CompletePayload;
      return {
        ...view,
        screen: { name: "complete", points: p.points, trials: p.trials },
        deadlineAt: null,
        notice: null,
      };
    }
    case "Error": {
      const p = msg.payload as unknown as ErrorPayload;
      if (FATAL_CODES.has(p.code)) {
        return { ...view, screen: { name: "fatal", code: p.code, message: p.message } };
      }
      // Recoverable rejection: surface it and re-enable the form.
      let screen = view.screen;
      if (screen.name === "narrative" || screen.name === "trial") {
        screen = { ...screen, sent: false };
      }
      return { ...view, screen, notice: `${p.code}: ${p.message}` };
    }
    default:
      return view;
  }
}

/** Mark the current form as sent (disabled until acknowledged or rejected). */
export function markSent(view: ClientView, own?: string): ClientView {
  if (view.screen.name === "narrative") {
    return { ...view, screen: { ...view.screen, sent: true }, notice: null };
  }
  if (view.screen.name === "trial") {
    return {
      ...view,
      screen: { ...view.screen, sent: true, own: own ?? view.screen.own },
      notice: null,
    };
  }
  return view;
}

export function withNotice(view: ClientView, notice: string): ClientView {
  return { ...view, notice };
}

/** Advisory countdown; the server clock is authoritative. */
export function remainingSeconds(view: ClientView, nowMs: number): number | null {
  if (view.deadlineAt === null) {
    return null;
  }
  return Math.max(0, (view.deadlineAt - nowMs) / 1000);
}

/** True while the current form must not accept another submission. */
export function inputLocked(view: ClientView): boolean {
  const s = view.screen;
  if (s.name === "narrative" || s.name === "trial") {
    return s.sent || s.acked;
  }
  return true;
}
