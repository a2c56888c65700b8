// Minimal 3D quad renderer: orbit camera, perspective projection, painter sort.

import type { FrameDict } from "./schema.js";

export interface Camera {
  yaw: number; // radians about +z
  pitch: number; // radians above the xy-plane
  dist: number; // mm from the orbit center
  center: [number, number, number];
  fov: number; // vertical field of view, radians
}

export function defaultCamera(radius: number): Camera {
  return { yaw: -0.7, pitch: 0.5, dist: radius * 3.2, center: [0, 0, 0], fov: 0.7 };
}

export type Vec3 = [number, number, number];

/** World -> camera coordinates (x right, y up, z away from viewer). */
export function toCamera(p: Vec3, cam: Camera): Vec3 {
  const [cx, cy, cz] = cam.center;
  let x = p[0] - cx;
  let y = p[1] - cy;
  let z = p[2] - cz;
  // yaw about z
  const cy1 = Math.cos(cam.yaw), sy1 = Math.sin(cam.yaw);
  [x, y] = [cy1 * x + sy1 * y, -sy1 * x + cy1 * y];
  // pitch about the (rotated) x axis; world z becomes screen-up
  const cp = Math.cos(cam.pitch), sp = Math.sin(cam.pitch);
  const y2 = cp * z - sp * y;
  const z2 = sp * z + cp * y + cam.dist;
  return [x, y2, z2];
}

/** Perspective projection to pixels; returns null behind the camera. */
export function project(
  p: Vec3,
  cam: Camera,
  width: number,
  height: number
): { x: number; y: number; depth: number } | null {
  const [x, y, z] = toCamera(p, cam);
  if (z <= 1e-6) return null;
  const f = height / 2 / Math.tan(cam.fov / 2);
  return { x: width / 2 + (f * x) / z, y: height / 2 - (f * y) / z, depth: z };
}

export interface Quad {
  pts: Vec3[]; // 4 corners
  kind: "joint" | "beam" | "ghost";
  element: number;
  shade: number; // 0..1 lighting factor
}

function unflatten(row: number[], count: number): Vec3[] {
  const out: Vec3[] = [];
  for (let i = 0; i < count; i++) out.push([row[3 * i], row[3 * i + 1], row[3 * i + 2]]);
  return out;
}

// Cuboid corner k has sign bits (bx, by, bz), k = 4*bx + 2*by + bz; faces
// list the corner indices of each side in drawing order.
const CUBOID_FACES = [
  [0, 1, 3, 2], // -x
  [4, 5, 7, 6], // +x
  [0, 1, 5, 4], // -y
  [2, 3, 7, 6], // +y
  [0, 2, 6, 4], // -z
  [1, 3, 7, 5], // +z
];

function shadeFor(pts: Vec3[]): number {
  // flat shading against a fixed light direction
  const u: Vec3 = [pts[1][0] - pts[0][0], pts[1][1] - pts[0][1], pts[1][2] - pts[0][2]];
  const v: Vec3 = [pts[2][0] - pts[0][0], pts[2][1] - pts[0][1], pts[2][2] - pts[0][2]];
  const n: Vec3 = [
    u[1] * v[2] - u[2] * v[1],
    u[2] * v[0] - u[0] * v[2],
    u[0] * v[1] - u[1] * v[0],
  ];
  const len = Math.hypot(n[0], n[1], n[2]) || 1;
  const light: Vec3 = [0.4, 0.25, 0.88];
  const dot = Math.abs((n[0] * light[0] + n[1] * light[1] + n[2] * light[2]) / len);
  return 0.55 + 0.45 * dot;
}

/** Joint cuboids and beam section sweeps of one frame as shaded quads. */
export function frameQuads(frame: FrameDict, ghost = false): Quad[] {
  const quads: Quad[] = [];
  const kindJoint = ghost ? "ghost" : "joint";
  const kindBeam = ghost ? "ghost" : "beam";
  frame.nodes.forEach((row, j) => {
    const corners = unflatten(row.slice(0, 24), 8);
    for (const face of CUBOID_FACES) {
      const pts = face.map((i) => corners[i]);
      quads.push({ pts, kind: kindJoint, element: j, shade: shadeFor(pts) });
    }
  });
  frame.edges.forEach((row, e) => {
    const verts = unflatten(row.slice(0, 36), 12); // 3 sections x 4 corners
    for (let s = 0; s < 2; s++) {
      const a = verts.slice(4 * s, 4 * s + 4);
      const b = verts.slice(4 * (s + 1), 4 * (s + 1) + 4);
      for (let c = 0; c < 4; c++) {
        const pts = [a[c], a[(c + 1) % 4], b[(c + 1) % 4], b[c]];
        quads.push({ pts, kind: kindBeam, element: e, shade: shadeFor(pts) });
      }
    }
  });
  return quads;
}

export function sortByDepth(
  quads: Quad[],
  cam: Camera
): { quad: Quad; depth: number }[] {
  const entries = quads.map((quad) => {
    let depth = 0;
    for (const p of quad.pts) depth += toCamera(p, cam)[2];
    return { quad, depth: depth / quad.pts.length };
  });
  entries.sort((a, b) => b.depth - a.depth); // far first
  return entries;
}

const BEAM_COLOR = [235, 130, 60];
const JOINT_COLOR = [90, 120, 170];
const GHOST_COLOR = [150, 150, 150];

export function drawScene(
  ctx: CanvasRenderingContext2D,
  quads: Quad[],
  cam: Camera,
  width: number,
  height: number
): void {
  ctx.clearRect(0, 0, width, height);
  ctx.fillStyle = "#10151c";
  ctx.fillRect(0, 0, width, height);
  for (const { quad } of sortByDepth(quads, cam)) {
    const pts = quad.pts.map((p) => project(p, cam, width, height));
    if (pts.some((p) => p === null)) continue;
    const [c0, c1, c2] = quad.kind === "beam" ? BEAM_COLOR : quad.kind === "joint" ? JOINT_COLOR : GHOST_COLOR;
    const s = quad.shade;
    ctx.beginPath();
    ctx.moveTo(pts[0]!.x, pts[0]!.y);
    for (const p of pts.slice(1)) ctx.lineTo(p!.x, p!.y);
    ctx.closePath();
    ctx.fillStyle =
      quad.kind === "ghost"
        ? `rgba(${c0},${c1},${c2},0.28)`
        : `rgb(${Math.round(c0 * s)},${Math.round(c1 * s)},${Math.round(c2 * s)})`;
    ctx.fill();
    ctx.strokeStyle = "rgba(0,0,0,0.25)";
    ctx.stroke();
  }
}
