// Top-down 2D grid editor: drag joints, click beams to cycle actuators,
// double-click a joint to make it the fixed one. Validation badges render
// on the offending elements (errors red, warnings amber).

import type { Design, Target, ValidationReport } from "./schema.js";

export interface EditorCallbacks {
  onDesignEdit(design: Design): void;
  onJointPick(jointId: number): void;
}

const SCALE = 2.2; // px per mm
const JOINT_R = 9;

export class GridEditor {
  private ctx: CanvasRenderingContext2D;
  private design!: Design;
  private validation: ValidationReport | null = null;
  private targets: Target[] = [];
  private dragging: number | null = null;
  private dragMoved = false;

  constructor(private canvas: HTMLCanvasElement, private callbacks: EditorCallbacks) {
    this.ctx = canvas.getContext("2d")!;
    canvas.addEventListener("pointerdown", (e) => this.pointerDown(e));
    canvas.addEventListener("pointermove", (e) => this.pointerMove(e));
    canvas.addEventListener("pointerup", (e) => this.pointerUp(e));
    canvas.addEventListener("dblclick", (e) => this.doubleClick(e));
  }

  setDesign(design: Design): void {
    this.design = design;
    this.draw();
  }

  setValidation(report: ValidationReport | null): void {
    this.validation = report;
    this.draw();
  }

  setTargets(targets: Target[]): void {
    this.targets = targets;
    this.draw();
  }

  private toPx(x: number, y: number): [number, number] {
    return [this.canvas.width / 2 + x * SCALE, this.canvas.height / 2 - y * SCALE];
  }

  private toMm(px: number, py: number): [number, number] {
    return [(px - this.canvas.width / 2) / SCALE, (this.canvas.height / 2 - py) / SCALE];
  }

  private jointAt(px: number, py: number): number | null {
    for (const j of this.design.joints) {
      const [x, y] = this.toPx(j.x, j.y);
      if (Math.hypot(px - x, py - y) <= JOINT_R + 4) return j.id;
    }
    return null;
  }

  private beamAt(px: number, py: number): number | null {
    const byId = new Map(this.design.joints.map((j) => [j.id, j]));
    for (const b of this.design.beams) {
      const ja = byId.get(b.a)!;
      const jb = byId.get(b.b)!;
      const [x1, y1] = this.toPx(ja.x, ja.y);
      const [x2, y2] = this.toPx(jb.x, jb.y);
      const len2 = (x2 - x1) ** 2 + (y2 - y1) ** 2;
      if (len2 === 0) continue;
      const t = Math.max(0, Math.min(1, ((px - x1) * (x2 - x1) + (py - y1) * (y2 - y1)) / len2));
      const dx = px - (x1 + t * (x2 - x1));
      const dy = py - (y1 + t * (y2 - y1));
      if (Math.hypot(dx, dy) < 7) return b.id;
    }
    return null;
  }

  private pointerDown(e: PointerEvent): void {
    const joint = this.jointAt(e.offsetX, e.offsetY);
    if (joint !== null) {
      this.dragging = joint;
      this.dragMoved = false;
      this.canvas.setPointerCapture(e.pointerId);
    }
  }

  private pointerMove(e: PointerEvent): void {
    if (this.dragging === null) return;
    const [x, y] = this.toMm(e.offsetX, e.offsetY);
    const joint = this.design.joints.find((j) => j.id === this.dragging)!;
    joint.x = Math.round(x * 10) / 10;
    joint.y = Math.round(y * 10) / 10;
    this.dragMoved = true;
    this.draw();
  }

  private pointerUp(e: PointerEvent): void {
    if (this.dragging === null) {
      const beam = this.beamAt(e.offsetX, e.offsetY);
      if (beam !== null) this.callbacks.onDesignEdit(cycleBeam(this.design, beam));
      return;
    }
    const picked = this.dragging;
    this.dragging = null;
    if (this.dragMoved) {
      this.callbacks.onDesignEdit(this.design);
    } else {
      this.callbacks.onJointPick(picked);
    }
  }

  private doubleClick(e: PointerEvent | MouseEvent): void {
    const joint = this.jointAt(e.offsetX, e.offsetY);
    if (joint !== null) {
      for (const j of this.design.joints) j.fixed = j.id === joint;
      this.callbacks.onDesignEdit(this.design);
    }
  }

  private issueBadges(): Map<string, "error" | "warning"> {
    const badges = new Map<string, "error" | "warning">();
    if (!this.validation) return badges;
    for (const w of this.validation.warnings) badges.set(w.element, "warning");
    for (const err of this.validation.errors) badges.set(err.element, "error");
    return badges;
  }

  draw(): void {
    const { ctx, canvas } = this;
    ctx.clearRect(0, 0, canvas.width, canvas.height);
    ctx.fillStyle = "#182030";
    ctx.fillRect(0, 0, canvas.width, canvas.height);
    const badges = this.issueBadges();
    const byId = new Map(this.design.joints.map((j) => [j.id, j]));

    for (const b of this.design.beams) {
      const ja = byId.get(b.a)!;
      const jb = byId.get(b.b)!;
      const [x1, y1] = this.toPx(ja.x, ja.y);
      const [x2, y2] = this.toPx(jb.x, jb.y);
      ctx.lineWidth = 6;
      const heat = b.actuator;
      ctx.strokeStyle = heat > 0 ? `rgb(${140 + 115 * heat},${120 - 60 * heat},40)` : "#53617a";
      ctx.beginPath();
      ctx.moveTo(x1, y1);
      ctx.lineTo(x2, y2);
      ctx.stroke();
      const badge = badges.get(`beam:${b.id}`);
      if (badge) this.badge((x1 + x2) / 2, (y1 + y2) / 2, badge);
      if (b.actuator > 0) {
        ctx.fillStyle = "#ffd9a0";
        ctx.font = "11px sans-serif";
        ctx.fillText(b.actuator.toFixed(2), (x1 + x2) / 2 + 6, (y1 + y2) / 2 - 6);
      }
    }

    for (const j of this.design.joints) {
      const [x, y] = this.toPx(j.x, j.y);
      ctx.beginPath();
      ctx.arc(x, y, JOINT_R, 0, Math.PI * 2);
      ctx.fillStyle = j.fixed ? "#d8e6ff" : "#7d95c4";
      ctx.fill();
      if (j.fixed) {
        ctx.strokeStyle = "#ffffff";
        ctx.lineWidth = 2;
        ctx.stroke();
      }
      const target = this.targets.find((t) => t.joint === j.id);
      if (target) {
        const [tx, ty] = this.toPx(target.x, target.y);
        ctx.strokeStyle = "#67e8a2";
        ctx.lineWidth = 1.5;
        ctx.setLineDash([4, 3]);
        ctx.beginPath();
        ctx.moveTo(x, y);
        ctx.lineTo(tx, ty);
        ctx.stroke();
        ctx.setLineDash([]);
        ctx.beginPath();
        ctx.arc(tx, ty, 5, 0, Math.PI * 2);
        ctx.strokeStyle = "#67e8a2";
        ctx.stroke();
      }
    }
    const designBadge = badges.get("design");
    if (designBadge) this.badge(24, 24, designBadge);
  }

  private badge(x: number, y: number, kind: "error" | "warning"): void {
    const { ctx } = this;
    ctx.beginPath();
    ctx.arc(x, y, 8, 0, Math.PI * 2);
    ctx.fillStyle = kind === "error" ? "#e5484d" : "#f5a524";
    ctx.fill();
    ctx.fillStyle = "#fff";
    ctx.font = "bold 11px sans-serif";
    ctx.textAlign = "center";
    ctx.fillText("!", x, y + 4);
    ctx.textAlign = "start";
  }
}

function cycleBeam(design: Design, beamId: number): Design {
  const levels = [0, 0.25, 0.5, 0.75, 1];
  const beam = design.beams.find((b) => b.id === beamId)!;
  const idx = levels.findIndex((v) => Math.abs(v - beam.actuator) < 1e-9);
  beam.actuator = levels[(idx + 1) % levels.length];
  return design;
}
