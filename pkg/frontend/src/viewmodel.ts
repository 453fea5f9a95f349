// Pure derivation of tile view models from the fetched board plus transient
// hover state. Nothing here talks to the network or the DOM, so every visual
// state is unit-testable against payloads.

import { BoardDoc, CaseDoc, CrossRefsDoc, LocationDoc } from "./types";

export type StyleState = "normal" | "incompatible_red" | "crossref_yellow" | "locked";

export interface CaseTile {
  kind: "case";
  id: string;
  label: string;
  scoreBadge: string;
  styleState: StyleState;
  locked: boolean;
  draggable: boolean;
  hasCrossRefs: boolean;
}

export interface LocationTile {
  kind: "location";
  id: string;
  label: string;
  caseBadge: string;
  memberBadge: string;
  overCapacity: boolean;
  highlighted: boolean;
}

export interface Highlight {
  source: string;
  cases: Set<string>;
  locations: Set<string>;
}

export interface BoardView {
  totalLabel: string;
  groups: { location: LocationTile; cases: CaseTile[] }[];
  unassigned: CaseTile[];
}

export function highlightFromCrossRefs(doc: CrossRefsDoc): Highlight {
  return {
    source: doc.case,
    cases: new Set(doc.linked_cases.map((l) => l.id)),
    locations: new Set(doc.linked_locations.map((l) => l.id)),
  };
}

export const formatScore = (score: number): string => score.toFixed(2);

export function caseTile(doc: CaseDoc, highlight: Highlight | null): CaseTile {
  let style: StyleState = "normal";
  if (highlight && (highlight.cases.has(doc.id) || highlight.source === doc.id)) {
    style = "crossref_yellow";
  } else if (doc.location !== null && !doc.compatible) {
    style = "incompatible_red";
  } else if (doc.locked) {
    style = "locked";
  }
  return {
    kind: "case",
    id: doc.id,
    label: doc.name || doc.id,
    scoreBadge: formatScore(doc.score),
    styleState: style,
    locked: doc.locked,
    draggable: !doc.locked,
    hasCrossRefs: doc.has_cross_refs,
  };
}

export function locationTile(
  doc: LocationDoc,
  board: BoardDoc,
  highlight: Highlight | null,
): LocationTile {
  const over = board.violations.some(
    (v) => v.kind === "over_capacity" && v.location === doc.id,
  );
  return {
    kind: "location",
    id: doc.id,
    label: doc.name || doc.id,
    caseBadge: `C ${doc.placed_cases}/${doc.case_capacity}`,
    memberBadge: `R ${doc.placed_members}/${doc.member_capacity}`,
    overCapacity: over,
    highlighted: highlight !== null && highlight.locations.has(doc.id),
  };
}

export function boardView(board: BoardDoc, highlight: Highlight | null): BoardView {
  const byLocation = new Map<string | null, CaseTile[]>();
  for (const doc of [...board.cases].sort((a, b) => a.id.localeCompare(b.id))) {
    const tiles = byLocation.get(doc.location) ?? [];
    tiles.push(caseTile(doc, highlight));
    byLocation.set(doc.location, tiles);
  }
  return {
    totalLabel: formatScore(board.total_score),
    groups: board.locations.map((loc) => ({
      location: locationTile(loc, board, highlight),
      cases: byLocation.get(loc.id) ?? [],
    })),
    unassigned: byLocation.get(null) ?? [],
  };
}
