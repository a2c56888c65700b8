// Client-side mirror of the design / trajectory JSON schemas.

export interface Joint {
  id: number;
  row: number;
  col: number;
  x: number;
  y: number;
  fixed: boolean;
}

export interface Beam {
  id: number;
  a: number;
  b: number;
  actuator: number;
}

export interface Design {
  schema_version: 1;
  units: "mm";
  joints: Joint[];
  beams: Beam[];
}

export interface FrameDict {
  adjacency: number[][];
  nodes: number[][];
  edges: number[][];
  fixed_origin: number[];
}

export interface TrajectoryDict {
  design: Design | null;
  source: string;
  frames: FrameDict[];
  oracle_frames?: FrameDict[];
}

export interface ValidationIssue {
  code: string;
  element: string;
  message: string;
}

export interface ValidationReport {
  ok: boolean;
  errors: ValidationIssue[];
  warnings: ValidationIssue[];
}

export interface Target {
  joint: number;
  x: number;
  y: number;
  z: number;
}

export interface CandidateCard {
  descriptor: string;
  score: number;
  design: Design;
  final_frame?: FrameDict;
}

export const ACTUATOR_LEVELS = [0, 0.25, 0.5, 0.75, 1] as const;

export function cloneDesign(design: Design): Design {
  return JSON.parse(JSON.stringify(design)) as Design;
}

/** Quarter-level cycle: 0 -> 0.25 -> ... -> 1 -> 0. */
export function cycleActuator(design: Design, beamId: number): Design {
  const next = cloneDesign(design);
  const beam = next.beams.find((b) => b.id === beamId);
  if (!beam) return next;
  const idx = ACTUATOR_LEVELS.findIndex((v) => Math.abs(v - beam.actuator) < 1e-9);
  beam.actuator = ACTUATOR_LEVELS[(idx + 1) % ACTUATOR_LEVELS.length];
  return next;
}

export function moveJoint(design: Design, jointId: number, x: number, y: number): Design {
  const next = cloneDesign(design);
  const joint = next.joints.find((j) => j.id === jointId);
  if (joint) {
    joint.x = x;
    joint.y = y;
  }
  return next;
}

/** Exactly one joint stays fixed; re-fixing the fixed joint is a no-op. */
export function setFixedJoint(design: Design, jointId: number): Design {
  const next = cloneDesign(design);
  for (const j of next.joints) j.fixed = j.id === jointId;
  return next;
}

export function deleteBeam(design: Design, beamId: number): Design {
  const next = cloneDesign(design);
  next.beams = next.beams.filter((b) => b.id !== beamId);
  return next;
}

/** Regular 3x3 starter grid centered on the fixed middle joint. */
export function starterGrid(spacing: number): Design {
  const joints: Joint[] = [];
  for (let r = 0; r < 3; r++) {
    for (let c = 0; c < 3; c++) {
      joints.push({
        id: r * 3 + c,
        row: r,
        col: c,
        x: (c - 1) * spacing,
        y: (r - 1) * spacing,
        fixed: r === 1 && c === 1,
      });
    }
  }
  const beams: Beam[] = [];
  let id = 0;
  for (let r = 0; r < 3; r++)
    for (let c = 0; c < 2; c++) beams.push({ id: id++, a: r * 3 + c, b: r * 3 + c + 1, actuator: 0 });
  for (let r = 0; r < 2; r++)
    for (let c = 0; c < 3; c++) beams.push({ id: id++, a: r * 3 + c, b: (r + 1) * 3 + c, actuator: 0 });
  return { schema_version: 1, units: "mm", joints, beams };
}

export const STARTER_LIBRARY = [
  { name: "compact (40 mm)", spacing: 40 },
  { name: "standard (52 mm)", spacing: 52 },
  { name: "wide (65 mm)", spacing: 65 },
];

/** Canonical export: the same field order the backend writes. */
export function exportDesign(design: Design): string {
  const obj = {
    schema_version: design.schema_version,
    units: design.units,
    joints: design.joints.map((j) => ({
      id: j.id,
      row: j.row,
      col: j.col,
      x: j.x,
      y: j.y,
      fixed: j.fixed,
    })),
    beams: design.beams.map((b) => ({ id: b.id, a: b.a, b: b.b, actuator: b.actuator })),
  };
  return JSON.stringify(obj, null, 2);
}

export function importDesign(text: string): Design {
  const obj = JSON.parse(text) as Design;
  if (obj.schema_version !== 1) throw new Error(`unsupported schema_version ${obj.schema_version}`);
  return obj;
}

export function designsEqual(a: Design, b: Design): boolean {
  return exportDesign(a) === exportDesign(b);
}
