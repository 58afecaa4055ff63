// Session controller: one WebSocket, one view, renders serialized per
// message. Validation runs before anything is sent; an invalid form never
// produces a frame.

import { encodeMessage, makeJoin, parseMessage, type WireMessage } from "./protocol.js";
import {
  applyMessage,
  initialView,
  markSent,
  withNotice,
  type ClientView,
} from "./state.js";
import { validateDocument, validateTrialHashtag } from "./validate.js";

/** The subset of the browser WebSocket API the client needs; the `ws`
 * package used in tests implements the same surface. */
export interface SocketLike {
  send(data: string): void;
  close(): void;
  onopen: ((ev?: unknown) => void) | null;
  onmessage: ((ev: { data: unknown }) => void) | null;
  onclose: ((ev?: unknown) => void) | null;
  onerror: ((ev?: unknown) => void) | null;
}

export type ViewListener = (view: ClientView) => void;

export interface SubmitResult {
  ok: boolean;
  error?: string;
}

export class SessionClient {
  private view: ClientView;
  private socket: SocketLike;
  readonly sentFrames: string[] = [];
  /** Called when the connection drops mid-run; the owner may reconnect by
   * passing a fresh socket to attachSocket (rejoin reuses the token). */
  onDisconnect: (() => void) | null = null;

  constructor(
    socket: SocketLike,
    readonly runId: string,
    private readonly onView: ViewListener,
    private readonly token: string | null = null,
    private readonly now: () => number = Date.now,
  ) {
    this.view = initialView(runId);
    this.socket = socket;
    this.attachSocket(socket);
    this.onView(this.view);
  }

  attachSocket(socket: SocketLike): void {
    this.socket = socket;
    socket.onopen = () => this.join();
    socket.onmessage = (ev) => this.receive(String(ev.data));
    socket.onclose = () => {
      if (this.socket !== socket) {
        return; // superseded by a reconnect
      }
      if (this.view.screen.name !== "complete" && this.view.screen.name !== "fatal") {
        this.update(withNotice(this.view, "connection lost; rejoining…"));
        this.onDisconnect?.();
      }
    };
  }

  current(): ClientView {
    return this.view;
  }

  private update(view: ClientView): void {
    this.view = view;
    this.onView(view);
  }

  private sendMessage(msg: WireMessage): void {
    const frame = encodeMessage(msg);
    this.sentFrames.push(frame);
    this.socket.send(frame);
  }

  receive(raw: string): void {
    this.update(applyMessage(this.view, parseMessage(raw), this.now()));
  }

  join(): void {
    // After an assignment, reconnects carry the node token back.
    this.sendMessage(makeJoin(this.runId, this.view.token ?? this.token));
  }

  /** Pre/post tweet + hashtags. Blocks locally on validation failure. */
  submitDocument(tweet: string, hashtags: string[]): SubmitResult {
    const screen = this.view.screen;
    if (screen.name !== "narrative") {
      return { ok: false, error: "no document form is open" };
    }
    if (screen.sent || screen.acked) {
      return { ok: false, error: "document already submitted" };
    }
    const problem = validateDocument(tweet, hashtags, screen.wordLimit, screen.hashtagCount);
    if (problem !== null) {
      this.update(withNotice(this.view, problem));
      return { ok: false, error: problem };
    }
    this.update(markSent(this.view));
    this.sendMessage({
      kind: screen.phase === "pre" ? "PreDocSubmit" : "PostDocSubmit",
      run_id: this.runId,
      node: this.view.node,
      trial: null,
      payload: { tweet, hashtags },
    });
    return { ok: true };
  }

  /** One hashtag for the current trial. */
  submitHashtag(tag: string): SubmitResult {
    const screen = this.view.screen;
    if (screen.name !== "trial") {
      return { ok: false, error: "no trial is running" };
    }
    if (screen.sent || screen.acked) {
      return { ok: false, error: "hashtag already submitted for this trial" };
    }
    const problem = validateTrialHashtag(tag);
    if (problem !== null) {
      this.update(withNotice(this.view, problem));
      return { ok: false, error: problem };
    }
    this.update(markSent(this.view, tag));
    this.sendMessage({
      kind: "HashtagSubmit",
      run_id: this.runId,
      node: this.view.node,
      trial: screen.trial,
      payload: { hashtag: tag },
    });
    return { ok: true };
  }
}
