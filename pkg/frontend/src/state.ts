/** View state and pure update functions.
 *
 * The workbench never computes attribute math: every number shown comes out
 * of a service response verbatim.  Values render greyed once the session
 * revision moves past the revision they were computed at.
 */

import type {
  ClassifyResult,
  CoreResult,
  MaxWeakResult,
  PredicateRow,
  RunResponse,
  SessionSummary,
  ShiftRow,
  SolveResult,
  TreeNode,
} from "./types";

/** Weakened-constant changes below this are numeric dust, not shifts. */
export const SHIFT_DISPLAY_THRESHOLD = 1e-4;

export type Badge = "pinned" | "leaf" | "derived";

export interface PanelRow extends PredicateRow {
  inCore: boolean;
  shift: number | null;
}

export interface BannerState {
  kind: "ok" | "bad" | "warn";
  text: string;
  /** offer find-core / relax actions when the verdict is infeasible */
  offerRepair: boolean;
}

export interface ViewState {
  sessionId: string;
  domain: string;
  revision: number;
  tree: TreeNode;
  rows: PanelRow[];
  /** latest valuation and the revision it was computed at */
  values: Record<string, number> | null;
  valuesRevision: number | null;
  previousValues: Record<string, number> | null;
  banner: BannerState | null;
  core: string[];
  shiftRows: ShiftRow[] | null;
  distance: number | null;
  error: string | null;
}

export function initialView(session: SessionSummary): ViewState {
  return {
    sessionId: session.id,
    domain: session.domain,
    revision: session.revision,
    tree: session.tree,
    rows: session.predicates.map((p) => ({ ...p, inCore: false, shift: null })),
    values: null,
    valuesRevision: null,
    previousValues: null,
    banner: null,
    core: [],
    shiftRows: null,
    distance: null,
    error: null,
  };
}

/** The pin predicates the service synthesizes look like `"label" = 0.25`. */
const PIN_RE = /^"((?:[^"\\]|\\.)*)" = -?\d/;

export function pinnedLabels(rows: PanelRow[]): Set<string> {
  const out = new Set<string>();
  for (const row of rows) {
    if (row.hard || !row.enabled) continue;
    const m = PIN_RE.exec(row.text);
    if (m) out.add(m[1].replace(/\\(.)/g, "$1"));
  }
  return out;
}

export function badgeFor(node: TreeNode, pins: Set<string>): Badge {
  if (pins.has(node.label)) return "pinned";
  return node.refinement === "LEAF" ? "leaf" : "derived";
}

export function valuesStale(state: ViewState): boolean {
  return state.valuesRevision !== null && state.valuesRevision !== state.revision;
}

export function applySession(state: ViewState, session: SessionSummary): ViewState {
  const coreSet = new Set(state.core);
  return {
    ...state,
    revision: session.revision,
    rows: session.predicates.map((p) => ({
      ...p,
      inCore: coreSet.has(p.id),
      shift: state.rows.find((r) => r.id === p.id)?.shift ?? null,
    })),
  };
}

export function applySolve(state: ViewState, run: RunResponse<SolveResult>): ViewState {
  const result = run.result;
  const feasible = result.status === "FEASIBLE";
  return {
    ...state,
    previousValues: state.values,
    values: result.valuation ?? state.values,
    valuesRevision: result.valuation ? run.revision : state.valuesRevision,
    banner: {
      kind: feasible ? "ok" : "bad",
      text: result.status,
      offerRepair: !feasible,
    },
    // a feasible head-revision solve clears stale core highlighting
    core: feasible ? [] : state.core,
    rows: feasible ? state.rows.map((r) => ({ ...r, inCore: false })) : state.rows,
    error: null,
  };
}

export function applyClassify(state: ViewState, run: RunResponse<ClassifyResult>): ViewState {
  const verdict = run.result.verdict;
  return {
    ...state,
    banner: {
      kind: verdict === "INCONSISTENT" ? "bad" : verdict === "DETERMINED" ? "ok" : "warn",
      text: run.result.caveat ? `${verdict} (caveat)` : verdict,
      offerRepair: verdict === "INCONSISTENT",
    },
    error: null,
  };
}

export function applyCore(state: ViewState, run: RunResponse<CoreResult>): ViewState {
  const core = new Set(run.result.core);
  return {
    ...state,
    core: run.result.core,
    rows: state.rows.map((r) => ({ ...r, inCore: core.has(r.id) })),
    error: null,
  };
}

export function applyMaxweak(state: ViewState, run: RunResponse<MaxWeakResult>): ViewState {
  const result = run.result;
  const shiftBySource = new Map<string, number>();
  for (const row of result.per_predicate) {
    // normalized halves carry ids like `<origin>#le`; fold back onto origins
    const origin = row.id.includes("#") ? row.id.slice(0, row.id.lastIndexOf("#")) : row.id;
    shiftBySource.set(origin, Math.max(shiftBySource.get(origin) ?? 0, row.shift));
  }
  return {
    ...state,
    previousValues: state.values,
    values: result.valuation,
    valuesRevision: run.revision,
    shiftRows: result.per_predicate.filter((r) => r.shift > SHIFT_DISPLAY_THRESHOLD),
    distance: result.distance,
    banner: {
      kind: result.converged ? "ok" : "warn",
      text: result.converged ? "FEASIBLE (weakened)" : "NOT CONVERGED",
      offerRepair: false,
    },
    rows: state.rows.map((r) => ({
      ...r,
      shift: shiftBySource.has(r.id) && shiftBySource.get(r.id)! > SHIFT_DISPLAY_THRESHOLD
        ? shiftBySource.get(r.id)!
        : null,
    })),
    error: null,
  };
}

export function applyMutation(state: ViewState, revision: number): ViewState {
  return { ...state, revision, error: null };
}

export function applyError(state: ViewState, message: string): ViewState {
  return { ...state, error: message };
}

export function toggleRow(state: ViewState, id: string, enabled: boolean): ViewState {
  return {
    ...state,
    rows: state.rows.map((r) => (r.id === id ? { ...r, enabled } : r)),
  };
}

export interface NodeDelta {
  label: string;
  before: number;
  after: number;
}

/** Per-node change between the previous and the current valuation. */
export function valuationDeltas(state: ViewState, epsilon = 1e-9): NodeDelta[] {
  if (!state.values || !state.previousValues) return [];
  const out: NodeDelta[] = [];
  for (const [label, after] of Object.entries(state.values)) {
    const before = state.previousValues[label];
    if (before !== undefined && Math.abs(before - after) > epsilon) {
      out.push({ label, before, after });
    }
  }
  out.sort((a, b) => a.label.localeCompare(b.label));
  return out;
}
