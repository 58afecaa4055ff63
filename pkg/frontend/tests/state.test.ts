import { describe, expect, it } from "vitest";

import type { WireMessage } from "../src/protocol.js";
import {
  applyMessage,
  initialView,
  inputLocked,
  markSent,
  remainingSeconds,
  type ClientView,
} from "../src/state.js";

const RUN = "r1";
const T0 = 1_000_000;

function msg(kind: WireMessage["kind"], payload: Record<string, unknown>, trial: number | null = null): WireMessage {
  return { kind, run_id: RUN, node: 0, trial, payload };
}

const ASSIGNED = msg("Assigned", {
  node: 0, token: "tok", n: 20, structure: "ring", trials: 40, narrative_id: "fukushima",
});
const NARRATIVE = msg("NarrativeShow", {
  phase: "pre", narrative: "Once upon a disaster.", word_limit: 140,
  hashtag_count: 10, deadline_s: 600,
});
const PROMPT1 = msg("TrialPrompt", { deadline_s: 60 }, 1);
const REVEAL1 = msg("TrialReveal", {
  own: "#a", partner: "#b", matched: false, point: 0, cumulative: 0,
}, 1);

function play(messages: WireMessage[], start: ClientView = initialView(RUN)): ClientView {
  let view = start;
  for (const m of messages) {
    view = applyMessage(view, m, T0);
  }
  return view;
}

describe("screen transitions", () => {
  it("walks join -> narrative -> trial -> reveal -> complete", () => {
    let view = play([ASSIGNED]);
    expect(view.screen.name).toBe("lobby");
    expect(view.node).toBe(0);
    expect(view.token).toBe("tok");

    view = play([NARRATIVE], view);
    expect(view.screen).toMatchObject({ name: "narrative", phase: "pre", wordLimit: 140, hashtagCount: 10 });

    view = play([PROMPT1], view);
    expect(view.screen).toMatchObject({ name: "trial", trial: 1, sent: false });

    view = play([REVEAL1], view);
    expect(view.screen.name).toBe("reveal");

    view = play([msg("RunComplete", { points: { "0": 7 }, trials: 40 })], view);
    expect(view.screen).toMatchObject({ name: "complete", trials: 40 });
  });

  it("is a pure function of the transcript (replayable)", () => {
    const transcript = [ASSIGNED, NARRATIVE, PROMPT1, REVEAL1];
    expect(play(transcript)).toEqual(play(transcript));
  });
});

describe("reveal page", () => {
  it("displays the TrialReveal payload verbatim, no client-side scoring", () => {
    const payload = { own: "#x y", partner: "#Setsuden", matched: true, point: 1, cumulative: 9 };
    const view = play([ASSIGNED, NARRATIVE, PROMPT1, msg("TrialReveal", payload, 1)]);
    expect(view.screen.name).toBe("reveal");
    if (view.screen.name === "reveal") {
      expect(view.screen.reveal).toEqual(payload);
    }
    expect(view.cumulative).toBe(9);
  });

  it("never shows a partner response before the reveal", () => {
    const secret = "partner-secret-zzz";
    const transcript = [
      ASSIGNED,
      NARRATIVE,
      msg("PreDocSubmit", { ok: true }),
      PROMPT1,
      msg("HashtagSubmit", { ok: true }, 1),
    ];
    let view = initialView(RUN);
    for (const m of transcript) {
      view = applyMessage(view, m, T0);
      expect(JSON.stringify(view)).not.toContain(secret);
    }
    view = applyMessage(
      view,
      msg("TrialReveal", { own: "#a", partner: secret, matched: false, point: 0, cumulative: 0 }, 1),
      T0,
    );
    expect(JSON.stringify(view)).toContain(secret);
  });
});

describe("form locking", () => {
  it("locks after send, stays locked on ack, unlocks on rejection", () => {
    let view = play([ASSIGNED, NARRATIVE]);
    expect(inputLocked(view)).toBe(false);
    view = markSent(view);
    expect(inputLocked(view)).toBe(true);
    view = applyMessage(view, msg("PreDocSubmit", { ok: true }), T0);
    expect(inputLocked(view)).toBe(true);

    let trial = play([PROMPT1], view);
    trial = markSent(trial, "#mine");
    expect(inputLocked(trial)).toBe(true);
    const rejected = applyMessage(
      trial, msg("Error", { code: "validation", message: "bad" }), T0,
    );
    expect(inputLocked(rejected)).toBe(false);
    expect(rejected.notice).toContain("validation");
  });
});

describe("errors", () => {
  it("fatal codes end the session", () => {
    const view = play([msg("Error", { code: "run_full", message: "run already has 20 players" })]);
    expect(view.screen).toMatchObject({ name: "fatal", code: "run_full" });
  });

  it("recoverable codes become notices", () => {
    const view = play([ASSIGNED, NARRATIVE, msg("Error", { code: "duplicate", message: "already submitted" })]);
    expect(view.screen.name).toBe("narrative");
    expect(view.notice).toContain("duplicate");
  });
});

describe("countdown", () => {
  it("derives from the deadline and the local clock", () => {
    const view = play([ASSIGNED, NARRATIVE, PROMPT1]);
    expect(remainingSeconds(view, T0)).toBeCloseTo(60);
    expect(remainingSeconds(view, T0 + 59_000)).toBeCloseTo(1);
    expect(remainingSeconds(view, T0 + 80_000)).toBe(0);
    const done = play([REVEAL1], view);
    expect(remainingSeconds(done, T0)).toBeNull();
  });
});
