// Editor state and the pure update rules the UI relies on.

import type {
  CandidateCard,
  Design,
  Target,
  TrajectoryDict,
  ValidationReport,
} from "./schema.js";

export interface EditorState {
  design: Design;
  validation: ValidationReport | null;
  trajectory: TrajectoryDict | null;
  frame: number; // active frame index, always within trajectory bounds
  targets: Target[];
  ranking: CandidateCard[];
  scoreHistory: number[];
  requestSeq: number; // stale simulate/inverse responses are discarded
  selectedJoint: number | null;
  offline: boolean;
}

export function initialState(design: Design): EditorState {
  return {
    design,
    validation: null,
    trajectory: null,
    frame: 0,
    targets: [],
    ranking: [],
    scoreHistory: [],
    requestSeq: 0,
    selectedJoint: null,
    offline: false,
  };
}

export function canSimulate(state: EditorState): boolean {
  return state.validation !== null && state.validation.ok;
}

/** Editing invalidates previous simulation output and bumps the sequence. */
export function withDesign(state: EditorState, design: Design): EditorState {
  return {
    ...state,
    design,
    trajectory: null,
    frame: 0,
    ranking: [],
    requestSeq: state.requestSeq + 1,
  };
}

export function withValidation(
  state: EditorState,
  seq: number,
  report: ValidationReport
): EditorState {
  if (seq !== state.requestSeq) return state; // superseded by a newer edit
  return { ...state, validation: report };
}

export function withTrajectory(
  state: EditorState,
  seq: number,
  trajectory: TrajectoryDict
): EditorState {
  if (seq !== state.requestSeq) return state;
  return { ...state, trajectory, frame: 0 };
}

export function clampFrame(state: EditorState, frame: number): number {
  if (!state.trajectory) return 0;
  return Math.min(Math.max(Math.round(frame), 0), state.trajectory.frames.length - 1);
}

export function withFrame(state: EditorState, frame: number): EditorState {
  return { ...state, frame: clampFrame(state, frame) };
}

export function withTarget(state: EditorState, target: Target): EditorState {
  const targets = state.targets.filter((t) => t.joint !== target.joint).concat([target]);
  targets.sort((a, b) => a.joint - b.joint);
  return { ...state, targets };
}

export function withoutTarget(state: EditorState, joint: number): EditorState {
  return { ...state, targets: state.targets.filter((t) => t.joint !== joint) };
}

export function withRanking(
  state: EditorState,
  seq: number,
  ranking: CandidateCard[]
): EditorState {
  if (seq !== state.requestSeq) return state;
  return { ...state, ranking };
}

/** Choosing a card adopts its design; the score trace extends. */
export function applyCandidate(state: EditorState, card: CandidateCard): EditorState {
  const next = withDesign(state, card.design);
  return { ...next, scoreHistory: [...state.scoreHistory, card.score] };
}

export function resetScoreHistory(state: EditorState): EditorState {
  return { ...state, scoreHistory: [] };
}

export function pushScore(state: EditorState, score: number): EditorState {
  return { ...state, scoreHistory: [...state.scoreHistory, score] };
}
