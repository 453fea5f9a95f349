// Read-only reports panel: per-location subscription bars, and an attribute
// profile comparing each location's desired levels against the average
// levels of the cases currently placed there and across the whole board.

import { BoardDoc } from "./types";

export interface SubscriptionRow {
  locationId: string;
  placed: number;
  capacity: number;
  ratio: number; // 1 when capacity is 0
  full: boolean;
  undersubscribed: boolean;
}

export interface AttributeProfile {
  locationId: string;
  desired: number[];
  placedAverage: number[]; // zeros when the location is empty
  overallAverage: number[];
}

export function subscriptionRows(board: BoardDoc): SubscriptionRow[] {
  return board.locations.map((loc) => {
    const ratio = loc.case_capacity > 0 ? loc.placed_cases / loc.case_capacity : 1;
    return {
      locationId: loc.id,
      placed: loc.placed_cases,
      capacity: loc.case_capacity,
      ratio,
      full: loc.placed_cases >= loc.case_capacity || loc.placed_members >= loc.member_capacity,
      undersubscribed: ratio < 0.5,
    };
  });
}

function meanLevels(levels: number[][], width: number): number[] {
  const out = new Array(width).fill(0);
  if (!levels.length) return out;
  for (const vec of levels) {
    for (let k = 0; k < width; k += 1) out[k] += vec[k] ?? 0;
  }
  return out.map((v) => v / levels.length);
}

export function attributeProfiles(board: BoardDoc): AttributeProfile[] {
  const width = board.locations[0]?.desired_levels.length ?? 0;
  const placedVectors = board.cases.filter((c) => c.location !== null).map((c) => c.levels);
  const overall = meanLevels(placedVectors, width);
  return board.locations.map((loc) => ({
    locationId: loc.id,
    desired: loc.desired_levels,
    placedAverage: meanLevels(
      board.cases.filter((c) => c.location === loc.id).map((c) => c.levels),
      width,
    ),
    overallAverage: overall,
  }));
}

export function renderReports(panel: HTMLElement, board: BoardDoc): void {
  panel.replaceChildren();
  const heading = document.createElement("h2");
  heading.textContent = "Reports";
  panel.appendChild(heading);

  const subs = document.createElement("div");
  subs.className = "subscription-bars";
  for (const row of subscriptionRows(board)) {
    const item = document.createElement("div");
    item.className = "subscription-row";
    item.dataset.location = row.locationId;
    if (row.full) item.classList.add("full");
    if (row.undersubscribed) item.classList.add("undersubscribed");
    const bar = document.createElement("div");
    bar.className = "bar";
    bar.style.width = `${Math.min(1, row.ratio) * 100}%`;
    const label = document.createElement("span");
    label.textContent = `${row.locationId} ${row.placed}/${row.capacity}`;
    item.append(label, bar);
    subs.appendChild(item);
  }
  panel.appendChild(subs);

  const profiles = document.createElement("div");
  profiles.className = "attribute-profiles";
  for (const profile of attributeProfiles(board)) {
    const block = document.createElement("div");
    block.className = "attribute-profile";
    block.dataset.location = profile.locationId;
    const title = document.createElement("span");
    title.textContent = profile.locationId;
    block.appendChild(title);
    profile.desired.forEach((desired, k) => {
      const lane = document.createElement("div");
      lane.className = "attribute-lane";
      const desiredMark = document.createElement("i");
      desiredMark.className = "desired";
      desiredMark.style.left = `${desired * 100}%`;
      const placedBar = document.createElement("b");
      placedBar.className = "placed";
      placedBar.style.width = `${(profile.placedAverage[k] ?? 0) * 100}%`;
      const overallMark = document.createElement("i");
      overallMark.className = "overall";
      overallMark.style.left = `${(profile.overallAverage[k] ?? 0) * 100}%`;
      lane.append(placedBar, desiredMark, overallMark);
      block.appendChild(lane);
    });
    profiles.appendChild(block);
  }
  panel.appendChild(profiles);
}
