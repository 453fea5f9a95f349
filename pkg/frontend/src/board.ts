// Board controller: renders the fetched board, wires drag/lock/capacity/gear
// interactions, and keeps the server authoritative. Nothing renders
// optimistically; every mutation re-renders from the server's response, and
// a 409 refetches the board and toasts the conflict.

import { ApiClient } from "./api";
import { renderReports } from "./reports";
import { ApiError, BoardDoc, ConflictError, WhatIfDoc } from "./types";
import { BoardView, Highlight, boardView, formatScore, highlightFromCrossRefs } from "./viewmodel";

export class BoardController {
  readonly root: HTMLElement;
  private readonly api: ApiClient;
  private readonly sessionId: string;

  board: BoardDoc | null = null;
  highlight: Highlight | null = null;
  dragging: string | null = null;
  lastPreview: WhatIfDoc | null = null;
  busy = false;

  /** Resolves when the most recent async interaction has settled (tests). */
  pending: Promise<void> = Promise.resolve();

  constructor(root: HTMLElement, api: ApiClient, sessionId: string) {
    this.root = root;
    this.api = api;
    this.sessionId = sessionId;
    this.wireEvents();
  }

  async load(): Promise<void> {
    this.board = await this.api.getBoard(this.sessionId);
    this.render();
  }

  // --- rendering -------------------------------------------------------

  render(): void {
    if (!this.board) return;
    const view = boardView(this.board, this.highlight);
    this.root.replaceChildren(
      this.renderHeader(view),
      this.renderGrid(view),
      this.renderReportsPanel(),
      this.renderToasts(),
    );
  }

  private renderHeader(view: BoardView): HTMLElement {
    const header = document.createElement("header");
    header.className = "board-header";
    const total = document.createElement("span");
    total.id = "board-total";
    total.textContent = view.totalLabel;
    const gear = document.createElement("button");
    gear.id = "gear";
    gear.textContent = "⚙";
    gear.title = "Re-optimize around current locks and capacities";
    gear.disabled = this.busy;
    if (this.busy) gear.classList.add("busy");
    const preview = document.createElement("span");
    preview.id = "move-preview";
    if (this.lastPreview) {
      preview.textContent =
        `${formatScore(this.lastPreview.pair_score)} → ` +
        `total ${formatScore(this.lastPreview.projected_total)}`;
      if (!this.lastPreview.compatible) preview.classList.add("incompatible_red");
    }
    const exportLink = document.createElement("a");
    exportLink.id = "export-link";
    exportLink.textContent = "Export CSV";
    exportLink.href = this.api.exportUrl(this.sessionId, "csv");
    header.append(total, preview, exportLink, gear);
    return header;
  }

  private renderGrid(view: BoardView): HTMLElement {
    const grid = document.createElement("main");
    grid.className = "board-grid";
    for (const group of view.groups) {
      const tile = document.createElement("section");
      tile.className = "location-tile";
      tile.dataset.location = group.location.id;
      if (group.location.overCapacity) tile.classList.add("over-capacity");
      if (group.location.highlighted) tile.classList.add("crossref_yellow");

      const title = document.createElement("h3");
      title.textContent = group.location.label;
      const badges = document.createElement("div");
      badges.className = "capacity-badges";
      for (const [dimension, text] of [
        ["cases", group.location.caseBadge],
        ["members", group.location.memberBadge],
      ] as const) {
        const badge = document.createElement("span");
        badge.textContent = text;
        for (const delta of [-1, +1]) {
          const arrow = document.createElement("button");
          arrow.className = "cap-arrow";
          arrow.dataset.location = group.location.id;
          arrow.dataset.dimension = dimension;
          arrow.dataset.delta = String(delta);
          arrow.textContent = delta > 0 ? "▲" : "▼";
          arrow.disabled = this.busy;
          badge.appendChild(arrow);
        }
        badges.appendChild(badge);
      }
      tile.append(title, badges);
      for (const caseVm of group.cases) {
        tile.appendChild(this.renderCaseTile(caseVm));
      }
      grid.appendChild(tile);
    }
    const tray = document.createElement("section");
    tray.className = "location-tile unassigned-tray";
    tray.dataset.location = "";
    const title = document.createElement("h3");
    title.textContent = "Unassigned";
    tray.appendChild(title);
    for (const caseVm of view.unassigned) {
      tray.appendChild(this.renderCaseTile(caseVm));
    }
    grid.appendChild(tray);
    return grid;
  }

  private renderCaseTile(vm: ReturnType<typeof boardView>["unassigned"][number]): HTMLElement {
    const tile = document.createElement("div");
    tile.className = `case-tile ${vm.styleState}`;
    tile.dataset.case = vm.id;
    tile.draggable = vm.draggable && !this.busy;

    const score = document.createElement("span");
    score.className = "score-badge";
    score.textContent = vm.scoreBadge;
    const label = document.createElement("span");
    label.textContent = vm.label;
    tile.append(score, label);

    const lock = document.createElement("button");
    lock.className = "lock-toggle";
    lock.dataset.case = vm.id;
    lock.textContent = vm.locked ? "🔒" : "🔓";
    lock.disabled = this.busy || (!vm.locked && this.board?.placement[vm.id] == null);
    tile.appendChild(lock);

    if (vm.hasCrossRefs) {
      const icon = document.createElement("span");
      icon.className = "crossref-icon";
      icon.dataset.case = vm.id;
      icon.textContent = "✕";
      tile.appendChild(icon);
    }
    return tile;
  }

  private renderReportsPanel(): HTMLElement {
    const panel = document.createElement("aside");
    panel.className = "reports-panel";
    if (this.board) renderReports(panel, this.board);
    return panel;
  }

  private renderToasts(): HTMLElement {
    const zone = document.createElement("div");
    zone.className = "toast-zone";
    return zone;
  }

  toast(message: string): void {
    const zone = this.root.querySelector(".toast-zone");
    if (!zone) return;
    const note = document.createElement("div");
    note.className = "toast";
    note.textContent = message;
    zone.appendChild(note);
  }

  // --- interactions ----------------------------------------------------

  private wireEvents(): void {
    this.root.addEventListener("dragstart", (event) => {
      const tile = (event.target as HTMLElement).closest<HTMLElement>(".case-tile");
      if (!tile || this.busy) return;
      const caseId = tile.dataset.case ?? null;
      if (caseId && this.board && caseId in this.board.locks) return; // locked: no drag
      this.dragging = caseId;
      this.lastPreview = null;
    });
    this.root.addEventListener("dragenter", (event) => {
      const zone = (event.target as HTMLElement).closest<HTMLElement>("[data-location]");
      if (!zone || this.dragging === null) return;
      const target = zone.dataset.location === "" ? null : zone.dataset.location ?? null;
      this.track(this.previewMove(this.dragging, target));
    });
    this.root.addEventListener("dragover", (event) => event.preventDefault());
    this.root.addEventListener("drop", (event) => {
      const zone = (event.target as HTMLElement).closest<HTMLElement>("[data-location]");
      if (!zone || this.dragging === null) return;
      event.preventDefault();
      const caseId = this.dragging;
      const target = zone.dataset.location === "" ? null : zone.dataset.location ?? null;
      this.dragging = null;
      this.track(this.mutate(() => this.api.move(this.sessionId, this.revision(), caseId, target)));
    });
    this.root.addEventListener("dragend", () => {
      this.dragging = null;
      this.lastPreview = null;
      this.render();
    });
    this.root.addEventListener("click", (event) => {
      const element = event.target as HTMLElement;
      const lock = element.closest<HTMLElement>(".lock-toggle");
      if (lock?.dataset.case) {
        const caseId = lock.dataset.case;
        this.track(this.mutate(() => this.api.toggleLock(this.sessionId, this.revision(), caseId)));
        return;
      }
      const arrow = element.closest<HTMLElement>(".cap-arrow");
      if (arrow?.dataset.location) {
        const { location, dimension, delta } = arrow.dataset;
        this.track(this.mutate(() => this.api.adjustCapacity(
          this.sessionId, this.revision(), location!,
          dimension as "cases" | "members", Number(delta))));
        return;
      }
      if (element.closest("#gear")) {
        this.track(this.mutate(() => this.api.reoptimize(this.sessionId, this.revision())));
      }
    });
    this.root.addEventListener("mouseover", (event) => {
      const icon = (event.target as HTMLElement).closest<HTMLElement>(".crossref-icon");
      if (icon?.dataset.case) this.track(this.showCrossRefs(icon.dataset.case));
    });
    this.root.addEventListener("mouseout", (event) => {
      const icon = (event.target as HTMLElement).closest<HTMLElement>(".crossref-icon");
      if (icon && this.highlight) {
        this.highlight = null;
        this.render();
      }
    });
  }

  private revision(): number {
    if (!this.board) throw new Error("board not loaded");
    return this.board.revision;
  }

  private track(op: Promise<void>): void {
    this.pending = this.pending.then(() => op);
  }

  private async previewMove(caseId: string, target: string | null): Promise<void> {
    try {
      this.lastPreview = await this.api.whatIf(this.sessionId, caseId, target);
      this.render();
    } catch (error) {
      this.toast((error as Error).message);
    }
  }

  private async showCrossRefs(caseId: string): Promise<void> {
    try {
      this.highlight = highlightFromCrossRefs(await this.api.crossRefs(this.sessionId, caseId));
      this.render();
    } catch (error) {
      this.toast((error as Error).message);
    }
  }

  /** One mutation in flight at a time; render only from server responses. */
  private async mutate(op: () => Promise<BoardDoc>): Promise<void> {
    if (this.busy || !this.board) return;
    this.busy = true;
    this.render();
    let message: string | null = null;
    try {
      this.board = await op();
    } catch (error) {
      if (error instanceof ConflictError) {
        this.board = await this.api.getBoard(this.sessionId);
        message = `Board changed elsewhere (now at revision ${error.currentRevision}); reloaded.`;
      } else if (error instanceof ApiError) {
        message = `${error.code}: ${error.message}`;
      } else {
        throw error;
      }
    } finally {
      this.busy = false;
      this.lastPreview = null;
      this.render();
      if (message) this.toast(message);
    }
  }
}
