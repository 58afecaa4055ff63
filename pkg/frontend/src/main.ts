// Entry point: configuration comes from URL query parameters.
//   ?server=127.0.0.1:8765&run=live-1[&token=<rejoin token>]
// `server` defaults to the page's own host; the token printed on the
// assignment screen lets a participant rejoin after a disconnect.

import { SessionClient } from "./client.js";
import { Renderer } from "./render.js";

function config(): { wsUrl: string; runId: string; token: string | null } {
  const params = new URLSearchParams(window.location.search);
  const server = params.get("server") ?? window.location.host;
  const runId = params.get("run") ?? "";
  const token = params.get("token");
  const scheme = window.location.protocol === "https:" ? "wss" : "ws";
  return { wsUrl: `${scheme}://${server}/ws/${runId}`, runId, token };
}

function start(): void {
  const root = document.getElementById("app");
  if (!root) {
    throw new Error("missing #app container");
  }
  const { wsUrl, runId, token } = config();
  if (!runId) {
    root.textContent = "Missing ?run=<run id> in the URL.";
    return;
  }
  const renderer = new Renderer(root);
  const client = new SessionClient(
    new WebSocket(wsUrl) as unknown as import("./client.js").SocketLike,
    runId,
    (view) => renderer.render(view),
    token,
  );
  // Auto-rejoin with the same token after a dropped connection.
  client.onDisconnect = () => {
    setTimeout(() => {
      client.attachSocket(
        new WebSocket(wsUrl) as unknown as import("./client.js").SocketLike,
      );
    }, 1000);
  };
  renderer.attach(client);
}

window.addEventListener("load", start);
