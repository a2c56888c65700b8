import { describe, expect, it } from "vitest";

import { defaultCamera, frameQuads, project, sortByDepth, toCamera } from "../src/render3d.js";
import type { FrameDict } from "../src/schema.js";

function boxFrame(): FrameDict {
  // one joint cuboid at the origin and one beam with three unit sections
  const corners: number[] = [];
  for (const sx of [-1, 1]) for (const sy of [-1, 1]) for (const sz of [-1, 1]) corners.push(sx * 3.6, sy * 3.6, sz * 2);
  // node row: 24 corner channels + center + fixed
  const nodeRow = [...corners, 0, 0, 0, 1];
  const edgeVerts: number[] = [];
  for (let s = 0; s < 3; s++)
    for (const [w, t] of [[-1, -1], [1, -1], [1, 1], [-1, 1]])
      edgeVerts.push(10 + s * 20, w * 3.6, t * 2);
  const edgeRow = [...edgeVerts, ...Array(12).fill(0), 0.5, 30, 0, 0];
  return { adjacency: [], nodes: [nodeRow], edges: [edgeRow], fixed_origin: [0, 0, 0] };
}

describe("projection", () => {
  it("projects the orbit center to the canvas center", () => {
    const cam = defaultCamera(50);
    const p = project([0, 0, 0], cam, 400, 300)!;
    expect(p.x).toBeCloseTo(200, 6);
    expect(p.y).toBeCloseTo(150, 6);
  });

  it("nearer points project with smaller depth and larger offsets", () => {
    const cam = { yaw: 0, pitch: 0, dist: 100, center: [0, 0, 0] as [number, number, number], fov: 0.7 };
    // with yaw=pitch=0 the camera looks along -y: larger y is farther
    const near = project([10, -20, 0], cam, 400, 300)!;
    const far = project([10, 20, 0], cam, 400, 300)!;
    expect(near.depth).toBeLessThan(far.depth);
    expect(Math.abs(near.x - 200)).toBeGreaterThan(Math.abs(far.x - 200));
  });

  it("drops points behind the camera", () => {
    const cam = { yaw: 0, pitch: 0, dist: 5, center: [0, 0, 0] as [number, number, number], fov: 0.7 };
    expect(project([0, -50, 0], cam, 400, 300)).toBeNull();
  });

  it("world +z maps to screen-up at zero pitch", () => {
    const cam = { yaw: 0, pitch: 0, dist: 100, center: [0, 0, 0] as [number, number, number], fov: 0.7 };
    const up = project([0, 0, 10], cam, 400, 300)!;
    expect(up.y).toBeLessThan(150);
  });
});

describe("frame quads", () => {
  it("emits 6 faces per joint and 8 sweep quads per beam", () => {
    const quads = frameQuads(boxFrame());
    const joints = quads.filter((q) => q.kind === "joint");
    const beams = quads.filter((q) => q.kind === "beam");
    expect(joints).toHaveLength(6);
    expect(beams).toHaveLength(8); // 2 section gaps x 4 sides
    for (const q of quads) expect(q.pts).toHaveLength(4);
  });

  it("ghost frames keep geometry but change kind", () => {
    const quads = frameQuads(boxFrame(), true);
    expect(new Set(quads.map((q) => q.kind))).toEqual(new Set(["ghost"]));
  });

  it("painter sort puts far quads first", () => {
    const cam = defaultCamera(60);
    const entries = sortByDepth(frameQuads(boxFrame()), cam);
    for (let i = 1; i < entries.length; i++) {
      expect(entries[i - 1].depth).toBeGreaterThanOrEqual(entries[i].depth);
    }
  });

  it("camera transform is distance-preserving", () => {
    const cam = defaultCamera(60);
    const a: [number, number, number] = [3, -4, 5];
    const b: [number, number, number] = [-1, 2, 0.5];
    const ca = toCamera(a, cam);
    const cb = toCamera(b, cam);
    const before = Math.hypot(a[0] - b[0], a[1] - b[1], a[2] - b[2]);
    const after = Math.hypot(ca[0] - cb[0], ca[1] - cb[1], ca[2] - cb[2]);
    expect(after).toBeCloseTo(before, 9);
  });
});
