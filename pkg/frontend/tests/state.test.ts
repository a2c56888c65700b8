import { describe, expect, it } from "vitest";

import { starterGrid } from "../src/schema.js";
import type { TrajectoryDict, ValidationReport } from "../src/schema.js";
import * as state from "../src/state.js";

const okReport: ValidationReport = { ok: true, errors: [], warnings: [] };
const errReport: ValidationReport = {
  ok: false,
  errors: [{ code: "JOINT_CONFIG_ERROR", element: "design", message: "broken" }],
  warnings: [],
};

function fakeTrajectory(frames = 12): TrajectoryDict {
  return {
    design: null,
    source: "surrogate",
    frames: Array.from({ length: frames }, () => ({
      adjacency: [],
      nodes: [],
      edges: [],
      fixed_origin: [0, 0, 0],
    })),
  };
}

describe("simulate gating", () => {
  it("blocks simulation until a clean validation arrives", () => {
    let s = state.initialState(starterGrid(52));
    expect(state.canSimulate(s)).toBe(false);
    s = state.withValidation(s, s.requestSeq, errReport);
    expect(state.canSimulate(s)).toBe(false);
    s = state.withValidation(s, s.requestSeq, okReport);
    expect(state.canSimulate(s)).toBe(true);
  });
});

describe("stale responses", () => {
  it("discards validation from a superseded edit", () => {
    let s = state.initialState(starterGrid(52));
    const oldSeq = s.requestSeq;
    s = state.withDesign(s, starterGrid(40)); // bumps the sequence
    s = state.withValidation(s, oldSeq, okReport);
    expect(s.validation).toBeNull();
  });

  it("discards a trajectory from a superseded edit", () => {
    let s = state.initialState(starterGrid(52));
    const oldSeq = s.requestSeq;
    s = state.withDesign(s, starterGrid(40));
    s = state.withTrajectory(s, oldSeq, fakeTrajectory());
    expect(s.trajectory).toBeNull();
  });
});

describe("frame scrubbing", () => {
  it("clamps the slider to trajectory bounds", () => {
    let s = state.initialState(starterGrid(52));
    s = state.withTrajectory(s, s.requestSeq, fakeTrajectory(12));
    expect(state.clampFrame(s, -3)).toBe(0);
    expect(state.clampFrame(s, 11)).toBe(11);
    expect(state.clampFrame(s, 25)).toBe(11);
    s = state.withFrame(s, 500);
    expect(s.frame).toBe(11);
  });

  it("editing resets to the design frame", () => {
    let s = state.initialState(starterGrid(52));
    s = state.withTrajectory(s, s.requestSeq, fakeTrajectory());
    s = state.withFrame(s, 7);
    s = state.withDesign(s, starterGrid(40));
    expect(s.frame).toBe(0);
    expect(s.trajectory).toBeNull();
  });
});

describe("targets", () => {
  it("keeps one target per joint, sorted", () => {
    let s = state.initialState(starterGrid(52));
    s = state.withTarget(s, { joint: 5, x: 0, y: 0, z: 10 });
    s = state.withTarget(s, { joint: 2, x: 1, y: 1, z: 5 });
    s = state.withTarget(s, { joint: 5, x: 9, y: 9, z: 9 });
    expect(s.targets.map((t) => t.joint)).toEqual([2, 5]);
    expect(s.targets[1].x).toBe(9);
    s = state.withoutTarget(s, 2);
    expect(s.targets.map((t) => t.joint)).toEqual([5]);
  });
});

describe("hybrid flow", () => {
  it("applying a card adopts its design and extends the score trace", () => {
    let s = state.initialState(starterGrid(52));
    const card = { descriptor: "move joint 3", score: 4.5, design: starterGrid(40) };
    s = state.applyCandidate(s, card);
    expect(s.design.joints[0].x).toBe(-40);
    expect(s.scoreHistory).toEqual([4.5]);
  });

  it("auto-run score trace is what the chart renders (non-increasing input stays so)", () => {
    let s = state.initialState(starterGrid(52));
    for (const score of [9.4, 7.2, 7.2, 5.0]) s = state.pushScore(s, score);
    const trace = s.scoreHistory;
    expect([...trace].sort((a, b) => b - a)).toEqual(trace);
  });
});
