import { describe, expect, it } from "vitest";

import { SessionClient, type SocketLike } from "../src/client.js";
import { encodeMessage, type WireMessage } from "../src/protocol.js";
import type { ClientView } from "../src/state.js";

class FakeSocket implements SocketLike {
  sent: string[] = [];
  onopen: ((ev?: unknown) => void) | null = null;
  onmessage: ((ev: { data: unknown }) => void) | null = null;
  onclose: ((ev?: unknown) => void) | null = null;
  onerror: ((ev?: unknown) => void) | null = null;

  send(data: string): void {
    this.sent.push(data);
  }

  close(): void {}

  serverSays(msg: WireMessage): void {
    this.onmessage?.({ data: encodeMessage(msg) });
  }
}

function setup(): { socket: FakeSocket; client: SessionClient; views: ClientView[] } {
  const socket = new FakeSocket();
  const views: ClientView[] = [];
  const client = new SessionClient(socket, "r", (v) => views.push(v), null, () => 123);
  socket.onopen?.();
  return { socket, client, views };
}

function driveToNarrative(socket: FakeSocket): void {
  socket.serverSays({
    kind: "Assigned", run_id: "r", node: 0, trial: null,
    payload: { node: 0, token: "t", n: 2, structure: "ring", trials: 2, narrative_id: "x" },
  });
  socket.serverSays({
    kind: "NarrativeShow", run_id: "r", node: 0, trial: null,
    payload: { phase: "pre", narrative: "story", word_limit: 140, hashtag_count: 10, deadline_s: 600 },
  });
}

const TEN_TAGS = Array.from({ length: 10 }, (_, i) => `tag${i}`);

describe("join flow", () => {
  it("sends Join when the socket opens", () => {
    const { socket } = setup();
    expect(socket.sent).toHaveLength(1);
    expect(JSON.parse(socket.sent[0])).toMatchObject({ kind: "Join", run_id: "r", payload: {} });
  });

  it("passes a rejoin token when given", () => {
    const socket = new FakeSocket();
    new SessionClient(socket, "r", () => {}, "tok123");
    socket.onopen?.();
    expect(JSON.parse(socket.sent[0]).payload).toEqual({ token: "tok123" });
  });

  it("rejoins with the assigned token after a reconnect", () => {
    const { socket, client } = setup();
    driveToNarrative(socket);
    let disconnected = 0;
    client.onDisconnect = () => {
      disconnected += 1;
    };
    socket.onclose?.();
    expect(disconnected).toBe(1);
    expect(client.current().notice).toMatch(/rejoining/);

    const fresh = new FakeSocket();
    client.attachSocket(fresh);
    fresh.onopen?.();
    expect(JSON.parse(fresh.sent[0])).toMatchObject({
      kind: "Join",
      payload: { token: "t" },
    });
  });
});

describe("document submission", () => {
  it("blocks a 141-word tweet without sending any frame", () => {
    const { socket, client } = setup();
    driveToNarrative(socket);
    const before = socket.sent.length;
    const result = client.submitDocument(Array(141).fill("w").join(" "), TEN_TAGS);
    expect(result.ok).toBe(false);
    expect(result.error).toMatch(/141 words/);
    expect(socket.sent.length).toBe(before);
    expect(client.current().notice).toMatch(/141 words/);
  });

  it("blocks nine hashtags without sending any frame", () => {
    const { socket, client } = setup();
    driveToNarrative(socket);
    const before = socket.sent.length;
    const result = client.submitDocument("fine", TEN_TAGS.slice(0, 9));
    expect(result.ok).toBe(false);
    expect(socket.sent.length).toBe(before);
  });

  it("sends a valid document and locks until acknowledged", () => {
    const { socket, client } = setup();
    driveToNarrative(socket);
    const result = client.submitDocument("a fine tweet", TEN_TAGS);
    expect(result.ok).toBe(true);
    const frame = JSON.parse(socket.sent.at(-1)!);
    expect(frame).toMatchObject({
      kind: "PreDocSubmit",
      payload: { tweet: "a fine tweet", hashtags: TEN_TAGS },
    });
    // Double submission is refused locally while pending.
    expect(client.submitDocument("again", TEN_TAGS).ok).toBe(false);
    socket.serverSays({ kind: "PreDocSubmit", run_id: "r", node: 0, trial: null, payload: { ok: true } });
    expect(client.submitDocument("again", TEN_TAGS).ok).toBe(false);
  });
});

describe("trial submission", () => {
  it("submits one hashtag per trial and refuses duplicates", () => {
    const { socket, client } = setup();
    driveToNarrative(socket);
    client.submitDocument("ok", TEN_TAGS);
    socket.serverSays({ kind: "PreDocSubmit", run_id: "r", node: 0, trial: null, payload: { ok: true } });
    socket.serverSays({ kind: "TrialPrompt", run_id: "r", node: 0, trial: 1, payload: { deadline_s: 60 } });

    expect(client.submitHashtag("  ").ok).toBe(false);
    const result = client.submitHashtag("#mine");
    expect(result.ok).toBe(true);
    expect(JSON.parse(socket.sent.at(-1)!)).toMatchObject({
      kind: "HashtagSubmit", trial: 1, payload: { hashtag: "#mine" },
    });
    expect(client.submitHashtag("#other").ok).toBe(false);
  });

  it("ignores submissions outside a trial", () => {
    const { client } = setup();
    expect(client.submitHashtag("#x").ok).toBe(false);
  });
});
