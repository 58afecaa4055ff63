// DOM rendering: each view change redraws the screen container; a light
// interval refreshes only the countdown text so typing is never disturbed.

import type { SessionClient } from "./client.js";
import { inputLocked, remainingSeconds, type ClientView } from "./state.js";
import { splitHashtags, wordCount } from "./validate.js";

function el<K extends keyof HTMLElementTagNameMap>(
  tag: K,
  attrs: Record<string, string> = {},
  text?: string,
): HTMLElementTagNameMap[K] {
  const node = document.createElement(tag);
  for (const [k, v] of Object.entries(attrs)) {
    node.setAttribute(k, v);
  }
  if (text !== undefined) {
    node.textContent = text;
  }
  return node;
}

export class Renderer {
  private root: HTMLElement;
  private client: SessionClient | null = null;
  private lastSignature = "";
  private view: ClientView | null = null;

  constructor(root: HTMLElement) {
    this.root = root;
    setInterval(() => this.refreshCountdown(), 250);
  }

  attach(client: SessionClient): void {
    this.client = client;
  }

  private refreshCountdown(): void {
    if (!this.view) {
      return;
    }
    const span = document.getElementById("countdown");
    if (span) {
      const left = remainingSeconds(this.view, Date.now());
      span.textContent = left === null ? "" : `${Math.ceil(left)}s left`;
    }
  }

  render(view: ClientView): void {
    this.view = view;
    // Re-render only when something structural changed; the countdown is
    // refreshed separately so form input is preserved.
    const signature = JSON.stringify([view.screen, view.notice, view.node, view.cumulative]);
    if (signature === this.lastSignature) {
      return;
    }
    this.lastSignature = signature;
    this.root.replaceChildren(this.buildScreen(view));
    this.refreshCountdown();
  }

  private header(view: ClientView, title: string): HTMLElement {
    const head = el("div", { class: "header" });
    head.append(el("h2", {}, title));
    const meta: string[] = [];
    if (view.node !== null) {
      meta.push(`player ${view.node}`);
    }
    meta.push(`points ${view.cumulative}`);
    head.append(el("div", { class: "meta" }, meta.join(" · ")));
    head.append(el("div", { class: "countdown", id: "countdown" }));
    if (view.notice) {
      head.append(el("div", { class: "notice", id: "notice" }, view.notice));
    }
    return head;
  }

  private buildScreen(view: ClientView): HTMLElement {
    const box = el("div", { class: "screen" });
    const s = view.screen;
    switch (s.name) {
      case "connecting":
        box.append(this.header(view, "Connecting"), el("p", {}, "Contacting the experiment server…"));
        break;
      case "lobby":
        box.append(
          this.header(view, "Waiting room"),
          el("p", {}, "You are in. The run starts when every player has joined."),
        );
        break;
      case "narrative": {
        box.append(this.header(view, s.phase === "pre" ? "Read, then write" : "One more tweet"));
        const story = el("div", { class: "narrative" });
        for (const para of s.narrative.split(/\n\s*\n/)) {
          story.append(el("p", {}, para.trim()));
        }
        box.append(story);
        box.append(
          el("p", {}, `Write a tweet about the story (at most ${s.wordLimit} words) ` +
            `and exactly ${s.hashtagCount} hashtags (one per line).`),
        );
        const tweet = el("textarea", { id: "tweet", rows: "5", cols: "60" });
        const counter = el("div", { class: "wordcount", id: "wordcount" }, "0 words");
        tweet.addEventListener("input", () => {
          counter.textContent = `${wordCount(tweet.value)} words`;
        });
        const tags = el("textarea", { id: "hashtags", rows: "10", cols: "30" });
        const button = el("button", { id: "submit-doc" }, "Submit");
        if (inputLocked(view)) {
          tweet.setAttribute("disabled", "true");
          tags.setAttribute("disabled", "true");
          button.setAttribute("disabled", "true");
          button.textContent = s.acked ? "Submitted — waiting for the others" : "Submitting…";
        }
        button.addEventListener("click", () => {
          this.client?.submitDocument(tweet.value, splitHashtags(tags.value));
        });
        box.append(tweet, counter, el("p", {}, "Hashtags:"), tags, button);
        break;
      }
      case "trial": {
        box.append(this.header(view, `Trial ${s.trial}${view.trials ? ` of ${view.trials}` : ""}`));
        box.append(el("p", {}, "Write one hashtag describing the story. You earn a point when it matches your partner's."));
        const input = el("input", { id: "hashtag", type: "text", placeholder: "#…" });
        const button = el("button", { id: "submit-hashtag" }, "Submit");
        if (inputLocked(view)) {
          input.setAttribute("disabled", "true");
          button.setAttribute("disabled", "true");
          button.textContent = s.acked ? "Submitted — waiting for your partner" : "Submitting…";
          if (s.own !== null) {
            input.setAttribute("value", s.own);
          }
        }
        button.addEventListener("click", () => {
          this.client?.submitHashtag(input.value);
        });
        input.addEventListener("keydown", (ev) => {
          if ((ev as KeyboardEvent).key === "Enter") {
            this.client?.submitHashtag(input.value);
          }
        });
        box.append(input, button);
        break;
      }
      case "reveal": {
        box.append(this.header(view, `Trial ${s.trial} result`));
        const table = el("table", { class: "reveal", id: "reveal" });
        const rows: Array<[string, string]> = [
          ["Your hashtag", s.reveal.own === "" ? "(no response)" : s.reveal.own],
          ["Partner's hashtag", s.reveal.partner === "" ? "(no response)" : s.reveal.partner],
          ["Matched", s.reveal.matched ? "yes" : "no"],
          ["Point this trial", String(s.reveal.point)],
          ["Cumulative points", String(s.reveal.cumulative)],
        ];
        for (const [label, value] of rows) {
          const tr = el("tr");
          tr.append(el("th", {}, label), el("td", {}, value));
          table.append(tr);
        }
        box.append(table, el("p", {}, "The next trial starts automatically."));
        break;
      }
      case "complete": {
        box.append(this.header(view, "Run complete"));
        const own = view.node !== null ? s.points[String(view.node)] : undefined;
        box.append(
          el("p", {}, `All ${s.trials} trials are done. ` +
            (own !== undefined ? `You finished with ${own} points.` : "")),
          el("p", {}, "Thank you for taking part."),
        );
        break;
      }
      case "fatal":
        box.append(
          this.header(view, "Cannot continue"),
          el("p", { class: "error" }, `${s.code}: ${s.message}`),
        );
        break;
    }
    return box;
  }
}
