import { describe, expect, it } from "vitest";

import { boardView, caseTile, highlightFromCrossRefs, locationTile } from "../src/viewmodel";
import { CROSSREFS_F1, baseBoard } from "./fixtures";

describe("caseTile", () => {
  const { board } = baseBoard();
  const byId = (id: string) => board.cases.find((c) => c.id === id)!;

  it("derives normal state for a compatible unlocked placement", () => {
    const tile = caseTile(byId("F1"), null);
    expect(tile.styleState).toBe("normal");
    expect(tile.draggable).toBe(true);
    expect(tile.scoreBadge).toBe("0.90");
  });

  it("locked placements are locked and not draggable", () => {
    const tile = caseTile(byId("F2"), null);
    expect(tile.styleState).toBe("locked");
    expect(tile.draggable).toBe(false);
  });

  it("incompatible placements go red", () => {
    expect(caseTile(byId("F3"), null).styleState).toBe("incompatible_red");
  });

  it("hover highlight wins over other states", () => {
    const highlight = highlightFromCrossRefs(CROSSREFS_F1);
    expect(caseTile(byId("F2"), highlight).styleState).toBe("crossref_yellow");
    expect(caseTile(byId("F1"), highlight).styleState).toBe("crossref_yellow");
    expect(caseTile(byId("F3"), highlight).styleState).toBe("incompatible_red");
  });

  it("unassigned cases are draggable and score zero", () => {
    const tile = caseTile(byId("F4"), null);
    expect(tile.styleState).toBe("normal");
    expect(tile.scoreBadge).toBe("0.00");
  });
});

describe("locationTile", () => {
  it("carries capacity badges and highlight", () => {
    const { board } = baseBoard();
    const highlight = highlightFromCrossRefs(CROSSREFS_F1);
    const alpha = locationTile(board.locations[0], board, highlight);
    expect(alpha.caseBadge).toBe("C 2/2");
    expect(alpha.memberBadge).toBe("R 5/8");
    expect(alpha.highlighted).toBe(false);
    const gamma = locationTile(board.locations[2], board, highlight);
    expect(gamma.highlighted).toBe(true);
  });

  it("flags over-capacity from the violations payload", () => {
    const { board } = baseBoard();
    board.violations.push({ kind: "over_capacity", location: "A", dimension: "cases" });
    expect(locationTile(board.locations[0], board, null).overCapacity).toBe(true);
    expect(locationTile(board.locations[1], board, null).overCapacity).toBe(false);
  });
});

describe("boardView", () => {
  it("groups every case exactly once and formats the total", () => {
    const { board } = baseBoard();
    const view = boardView(board, null);
    expect(view.totalLabel).toBe("2.20");
    const grouped = view.groups.flatMap((g) => g.cases.map((c) => c.id));
    expect([...grouped, ...view.unassigned.map((c) => c.id)].sort()).toEqual(
      ["F1", "F2", "F3", "F4"]);
    expect(view.groups[0].cases.map((c) => c.id)).toEqual(["F1", "F2"]);
    expect(view.unassigned.map((c) => c.id)).toEqual(["F4"]);
  });
});
