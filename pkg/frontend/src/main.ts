// Design studio wiring: editor, rollout viewport, targets, hybrid panel.

import { StudioApi, ApiError, InverseEpoch } from "./api.js";
import { GridEditor } from "./editor.js";
import { Camera, defaultCamera, drawScene, frameQuads } from "./render3d.js";
import {
  CandidateCard,
  Design,
  STARTER_LIBRARY,
  Target,
  exportDesign,
  importDesign,
  starterGrid,
} from "./schema.js";
import * as state from "./state.js";

const api = new StudioApi();
let s = state.initialState(starterGrid(52));

const $ = <T extends HTMLElement>(id: string): T => document.getElementById(id) as T;

const editor = new GridEditor($("editor") as HTMLCanvasElement, {
  onDesignEdit(design: Design) {
    update(state.withDesign(s, design));
    void revalidate();
  },
  onJointPick(jointId: number) {
    s = { ...s, selectedJoint: jointId };
    $("target-joint").textContent = `joint ${jointId}`;
  },
});

const viewport = $("viewport") as HTMLCanvasElement;
const vctx = viewport.getContext("2d")!;
let camera: Camera = defaultCamera(90);
let showOracle = false;

function drawViewport(): void {
  if (!s.trajectory) {
    vctx.clearRect(0, 0, viewport.width, viewport.height);
    vctx.fillStyle = "#10151c";
    vctx.fillRect(0, 0, viewport.width, viewport.height);
    vctx.fillStyle = "#5b6b85";
    vctx.font = "14px sans-serif";
    vctx.fillText("no rollout yet: validate + simulate", 20, 30);
    return;
  }
  const frame = s.trajectory.frames[s.frame];
  let quads = frameQuads(frame);
  if (showOracle && s.trajectory.oracle_frames) {
    quads = quads.concat(frameQuads(s.trajectory.oracle_frames[s.frame], true));
  }
  drawScene(vctx, quads, camera, viewport.width, viewport.height);
  $("frame-label").textContent = `frame ${s.frame} / 11`;
}

let orbiting = false;
viewport.addEventListener("pointerdown", () => (orbiting = true));
viewport.addEventListener("pointerup", () => (orbiting = false));
viewport.addEventListener("pointermove", (e) => {
  if (!orbiting) return;
  camera = { ...camera, yaw: camera.yaw + e.movementX * 0.01, pitch: Math.max(0.05, Math.min(1.5, camera.pitch + e.movementY * 0.01)) };
  drawViewport();
});
viewport.addEventListener("wheel", (e) => {
  e.preventDefault();
  camera = { ...camera, dist: Math.max(60, camera.dist * (e.deltaY > 0 ? 1.1 : 0.9)) };
  drawViewport();
});

function update(next: state.EditorState): void {
  s = next;
  editor.setDesign(s.design);
  editor.setValidation(s.validation);
  editor.setTargets(s.targets);
  const slider = $("frame-slider") as HTMLInputElement;
  slider.disabled = !s.trajectory;
  slider.value = String(s.frame);
  ($("simulate") as HTMLButtonElement).disabled = !state.canSimulate(s);
  ($("hybrid") as HTMLButtonElement).disabled = !state.canSimulate(s) || !s.targets.length;
  ($("autorun") as HTMLButtonElement).disabled = !state.canSimulate(s) || !s.targets.length;
  renderIssues();
  renderCards();
  drawChart();
  drawViewport();
}

function renderIssues(): void {
  const box = $("issues");
  box.innerHTML = "";
  if (!s.validation) return;
  for (const issue of s.validation.errors) {
    const div = document.createElement("div");
    div.className = "issue error";
    div.textContent = `${issue.code}: ${issue.message}`;
    box.appendChild(div);
  }
  for (const issue of s.validation.warnings) {
    const div = document.createElement("div");
    div.className = "issue warning";
    div.textContent = `${issue.code}: ${issue.message}`;
    box.appendChild(div);
  }
}

async function revalidate(): Promise<void> {
  const seq = s.requestSeq;
  try {
    const report = await api.validate(s.design);
    update(state.withValidation(s, seq, report));
    banner(null);
  } catch (err) {
    banner("validation request failed; editing offline");
  }
}

async function simulate(): Promise<void> {
  const seq = s.requestSeq;
  banner(null);
  try {
    const traj = await api.simulate(s.design, showOracle);
    update(state.withTrajectory(s, seq, traj));
  } catch (err) {
    if (err instanceof ApiError && err.status === 422) {
      banner("design has blocking validation errors");
    } else {
      banner("simulation request failed");
    }
  }
}

function renderCards(): void {
  const box = $("cards");
  box.innerHTML = "";
  s.ranking.forEach((card, i) => {
    const el = document.createElement("div");
    el.className = "card";
    const preview = document.createElement("canvas");
    preview.width = 120;
    preview.height = 90;
    if (card.final_frame) {
      const ctx = preview.getContext("2d")!;
      drawScene(ctx, frameQuads(card.final_frame), defaultCamera(90), 120, 90);
    }
    const label = document.createElement("div");
    label.innerHTML = `<b>#${i + 1}</b> ${card.descriptor}<br>score ${card.score.toFixed(2)} mm`;
    const pick = document.createElement("button");
    pick.textContent = "apply";
    pick.addEventListener("click", () => {
      update(state.applyCandidate(s, card));
      void revalidate();
    });
    el.append(preview, label, pick);
    box.appendChild(el);
  });
}

function drawChart(): void {
  const chart = $("chart") as HTMLCanvasElement;
  const ctx = chart.getContext("2d")!;
  ctx.clearRect(0, 0, chart.width, chart.height);
  ctx.fillStyle = "#182030";
  ctx.fillRect(0, 0, chart.width, chart.height);
  const hist = s.scoreHistory;
  if (hist.length < 1) return;
  const max = Math.max(...hist, 1e-6);
  ctx.strokeStyle = "#67e8a2";
  ctx.lineWidth = 2;
  ctx.beginPath();
  hist.forEach((v, i) => {
    const x = 10 + (i / Math.max(hist.length - 1, 1)) * (chart.width - 20);
    const y = chart.height - 10 - (v / max) * (chart.height - 20);
    i === 0 ? ctx.moveTo(x, y) : ctx.lineTo(x, y);
  });
  ctx.stroke();
  ctx.fillStyle = "#9fb3d1";
  ctx.font = "11px sans-serif";
  ctx.fillText(`score ${hist[hist.length - 1].toFixed(2)} mm`, 10, 14);
}

async function hybridStep(): Promise<void> {
  const seq = s.requestSeq;
  banner(null);
  try {
    const res = await api.inverseStep(s.design, s.targets, 5, stepSize());
    update(state.withRanking(s, seq, res.candidates));
  } catch (err) {
    banner(err instanceof ApiError ? `ranking failed (${err.status})` : "ranking failed");
  }
}

async function autoRun(): Promise<void> {
  banner(null);
  update(state.resetScoreHistory(s));
  const epochs = Number(($("epochs") as HTMLInputElement).value) || 8;
  try {
    const result = await api.inverseRun(s.design, s.targets, epochs, stepSize(), (row: InverseEpoch) => {
      update(state.pushScore(s, row.score));
    });
    update(state.withDesign(s, result.design));
    void revalidate();
  } catch (err) {
    banner("auto-run failed; design unchanged");
  }
}

function stepSize(): number {
  return Number(($("step") as HTMLInputElement).value) || 2.0;
}

function banner(text: string | null): void {
  const el = $("banner");
  el.textContent = text ?? "";
  el.style.display = text ? "block" : "none";
}

// -- toolbar wiring ---------------------------------------------------------

const starterSel = $("starter") as HTMLSelectElement;
STARTER_LIBRARY.forEach((item, i) => {
  const opt = document.createElement("option");
  opt.value = String(item.spacing);
  opt.textContent = item.name;
  if (i === 1) opt.selected = true;
  starterSel.appendChild(opt);
});
starterSel.addEventListener("change", () => {
  update(state.withDesign(s, starterGrid(Number(starterSel.value))));
  void revalidate();
});

$("simulate").addEventListener("click", () => void simulate());
$("hybrid").addEventListener("click", () => void hybridStep());
$("autorun").addEventListener("click", () => void autoRun());

($("frame-slider") as HTMLInputElement).addEventListener("input", (e) => {
  update(state.withFrame(s, Number((e.target as HTMLInputElement).value)));
});

($("overlay") as HTMLInputElement).addEventListener("change", (e) => {
  showOracle = (e.target as HTMLInputElement).checked;
  drawViewport();
});

$("set-target").addEventListener("click", () => {
  if (s.selectedJoint === null) {
    banner("pick a joint first (click it in the editor)");
    return;
  }
  const t: Target = {
    joint: s.selectedJoint,
    x: Number(($("tx") as HTMLInputElement).value),
    y: Number(($("ty") as HTMLInputElement).value),
    z: Number(($("tz") as HTMLInputElement).value),
  };
  update(state.withTarget(s, t));
});

$("clear-targets").addEventListener("click", () => {
  update({ ...s, targets: [] });
});

$("export").addEventListener("click", () => {
  const blob = new Blob([exportDesign(s.design)], { type: "application/json" });
  const a = document.createElement("a");
  a.href = URL.createObjectURL(blob);
  a.download = "design.json";
  a.click();
});

($("import") as HTMLInputElement).addEventListener("change", async (e) => {
  const file = (e.target as HTMLInputElement).files?.[0];
  if (!file) return;
  try {
    update(state.withDesign(s, importDesign(await file.text())));
    void revalidate();
  } catch {
    banner("could not parse that design file");
  }
});

$("save").addEventListener("click", async () => {
  const id = ($("design-id") as HTMLInputElement).value || "draft";
  try {
    await api.saveDesign(id, s.design);
    banner(null);
  } catch {
    banner("save failed");
  }
});

$("load").addEventListener("click", async () => {
  const id = ($("design-id") as HTMLInputElement).value || "draft";
  try {
    update(state.withDesign(s, await api.loadDesign(id)));
    void revalidate();
  } catch {
    banner(`no stored design named "${id}"`);
  }
});

update(s);
void revalidate();
