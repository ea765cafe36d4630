/** JSON shapes served by the atdecor session service. */

export type Refinement = "LEAF" | "OR" | "AND";

export interface TreeNode {
  label: string;
  refinement: Refinement;
  children: TreeNode[];
}

export interface PredicateRow {
  id: string;
  text: string;
  hard: boolean;
  provenance: string;
  enabled: boolean;
}

export interface SessionSummary {
  id: string;
  revision: number;
  domain: string;
  tree: TreeNode;
  labels: string[];
  predicates: PredicateRow[];
}

export type SolveStatus =
  | "FEASIBLE"
  | "INFEASIBLE_PROVED"
  | "INFEASIBLE_PRESUMED"
  | "UNKNOWN";

export interface SolveResult {
  status: SolveStatus;
  valuation: Record<string, number> | null;
  residual: number | null;
  restarts_used: number;
  certificate: unknown;
}

export interface ClassifyResult {
  verdict: "DETERMINED" | "UNDETERMINED" | "INCONSISTENT";
  witness_pair: Array<Record<string, number>> | null;
  caveat: boolean;
}

export interface CoreResult {
  core: string[];
  minimal: boolean;
  member_checks: Record<string, string>;
}

export interface ShiftRow {
  id: string;
  text: string;
  weakened_text: string;
  original: number;
  weakened: number;
  shift: number;
}

export interface MaxWeakResult {
  weakened: string[];
  valuation: Record<string, number>;
  distance: number;
  per_predicate: ShiftRow[];
  converged: boolean;
  kkt_residual: number;
  hard_violation: number;
}

export type Operation =
  | "solve"
  | "classify"
  | "core"
  | "relax-inclusion"
  | "relax-inclusion-exact"
  | "relax-maxweak";

export interface RunResponse<T = unknown> {
  operation: Operation;
  revision: number;
  stale: boolean;
  result: T;
}

export interface SessionEvent {
  seq: number;
  type: "revision" | "progress" | "result";
  revision?: number;
  reason?: string;
  op?: string;
  [key: string]: unknown;
}
