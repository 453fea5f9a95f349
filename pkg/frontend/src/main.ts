// Entry point: ?session=<id> selects the board; the API is same-origin.

import { ApiClient } from "./api";
import { BoardController } from "./board";

function bootstrap(): void {
  const root = document.getElementById("app");
  if (!root) throw new Error("missing #app element");
  const sessionId = new URLSearchParams(window.location.search).get("session");
  if (!sessionId) {
    root.textContent = "Add ?session=<id> to the URL to open a board.";
    return;
  }
  const controller = new BoardController(root, new ApiClient(""), sessionId);
  controller.load().catch((error) => {
    root.textContent = `Failed to load session: ${(error as Error).message}`;
  });
}

document.addEventListener("DOMContentLoaded", bootstrap);
