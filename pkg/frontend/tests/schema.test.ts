import { describe, expect, it } from "vitest";

import {
  cycleActuator,
  designsEqual,
  exportDesign,
  importDesign,
  moveJoint,
  setFixedJoint,
  starterGrid,
} from "../src/schema.js";

describe("starter grid", () => {
  it("has the 3x3 / 12-beam shape with one fixed joint", () => {
    const d = starterGrid(52);
    expect(d.joints).toHaveLength(9);
    expect(d.beams).toHaveLength(12);
    expect(d.joints.filter((j) => j.fixed)).toHaveLength(1);
    expect(d.joints.find((j) => j.fixed)!.row).toBe(1);
  });

  it("spans two spacings per side", () => {
    const d = starterGrid(40);
    const xs = d.joints.map((j) => j.x);
    expect(Math.max(...xs) - Math.min(...xs)).toBe(80);
  });
});

describe("actuator cycling", () => {
  it("steps through quarter levels and wraps from 1 to 0", () => {
    let d = starterGrid(52);
    const values: number[] = [];
    for (let i = 0; i < 6; i++) {
      d = cycleActuator(d, 3);
      values.push(d.beams.find((b) => b.id === 3)!.actuator);
    }
    expect(values).toEqual([0.25, 0.5, 0.75, 1, 0, 0.25]);
  });

  it("a 0.75 beam goes to 1.0 then wraps to 0", () => {
    let d = starterGrid(52);
    d.beams[5].actuator = 0.75;
    d = cycleActuator(d, 5);
    expect(d.beams[5].actuator).toBe(1);
    d = cycleActuator(d, 5);
    expect(d.beams[5].actuator).toBe(0);
  });

  it("does not mutate the input design", () => {
    const d = starterGrid(52);
    cycleActuator(d, 0);
    expect(d.beams[0].actuator).toBe(0);
  });
});

describe("fixed joint", () => {
  it("keeps exactly one joint fixed", () => {
    const d = setFixedJoint(starterGrid(52), 7);
    expect(d.joints.filter((j) => j.fixed).map((j) => j.id)).toEqual([7]);
  });
});

describe("export / import", () => {
  it("round-trips a design exactly", () => {
    let d = starterGrid(52);
    d = cycleActuator(d, 2);
    d = moveJoint(d, 0, -57.5, -49.25);
    const text = exportDesign(d);
    const back = importDesign(text);
    expect(designsEqual(back, d)).toBe(true);
    expect(exportDesign(back)).toBe(text);
  });

  it("writes the documented schema fields in order", () => {
    const obj = JSON.parse(exportDesign(starterGrid(52)));
    expect(Object.keys(obj)).toEqual(["schema_version", "units", "joints", "beams"]);
    expect(Object.keys(obj.joints[0])).toEqual(["id", "row", "col", "x", "y", "fixed"]);
    expect(Object.keys(obj.beams[0])).toEqual(["id", "a", "b", "actuator"]);
    expect(obj.schema_version).toBe(1);
    expect(obj.units).toBe("mm");
  });

  it("rejects unknown schema versions", () => {
    expect(() => importDesign('{"schema_version": 2}')).toThrow();
  });
});
