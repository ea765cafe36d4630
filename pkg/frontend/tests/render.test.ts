import { describe, expect, it } from "vitest";

import {
  renderApp,
  renderBanner,
  renderPanel,
  renderShiftTable,
  renderTreeSvg,
} from "../src/render";
import {
  applyCore,
  applyMaxweak,
  applyMutation,
  applySolve,
  initialView,
} from "../src/state";
import { layoutTree } from "../src/layout";
import type {
  CoreResult,
  MaxWeakResult,
  RunResponse,
  SessionSummary,
  SolveResult,
} from "../src/types";

import sessionFixture from "./fixtures/session_atm.json";
import solveInfeasible from "./fixtures/run_solve_infeasible.json";
import solveFeasible from "./fixtures/run_solve_feasible.json";
import coreFixture from "./fixtures/run_core.json";
import maxweakFixture from "./fixtures/run_maxweak.json";

const session = sessionFixture as unknown as SessionSummary;
const infeasible = solveInfeasible as unknown as RunResponse<SolveResult>;
const feasible = solveFeasible as unknown as RunResponse<SolveResult>;
const core = coreFixture as unknown as RunResponse<CoreResult>;
const maxweak = maxweakFixture as unknown as RunResponse<MaxWeakResult>;

function cells(html: string, cls: string): string[] {
  const re = new RegExp(`<td class="${cls}">([^<]*)</td>`, "g");
  return [...html.matchAll(re)].map((m) => m[1]);
}

describe("layout", () => {
  it("gives every node a slot and parents sit over their children", () => {
    const layout = layoutTree(session.tree);
    expect(layout.nodes).toHaveLength(20);
    expect(layout.edges).toHaveLength(19);
    const pos = new Map(layout.nodes.map((n) => [n.label, n]));
    for (const e of layout.edges) {
      expect(pos.get(e.parent)!.y).toBeLessThan(pos.get(e.child)!.y);
    }
  });
});

describe("banner", () => {
  it("renders feasibility and repair affordances", () => {
    const bad = renderBanner(applySolve(initialView(session), infeasible));
    expect(bad).toContain("INFEASIBLE_PROVED");
    expect(bad).toContain('data-action="run-core"');
    const ok = renderBanner(applySolve(initialView(session), feasible));
    expect(ok).toContain("FEASIBLE");
    expect(ok).not.toContain("run-core");
  });
});

describe("tree svg", () => {
  it("shows service values to four decimals at the root", () => {
    const vs = applySolve(initialView(session), feasible);
    const svg = renderTreeSvg(vs);
    const want = feasible.result.valuation!["ATM fraud"].toFixed(4);
    expect(svg).toContain(`>${want}</text>`);
  });

  it("draws one arc per conjunctive refinement", () => {
    const svg = renderTreeSvg(initialView(session));
    const arcs = svg.match(/class="and-arc"/g) ?? [];
    expect(arcs).toHaveLength(3); // ATM fraud, get credentials, card skimming
  });

  it("marks values stale only after a newer revision", () => {
    let vs = applyMutation(initialView(session), feasible.revision);
    vs = applySolve(vs, feasible);
    expect(renderTreeSvg(vs)).not.toContain("stale");
    vs = applyMutation(vs, feasible.revision + 1);
    expect(renderTreeSvg(vs)).toContain("stale");
  });
});

describe("panel", () => {
  it("renders toggles for soft predicates only and highlights the core", () => {
    const vs = applyCore(initialView(session), core);
    const html = renderPanel(vs);
    const toggles = html.match(/data-action="toggle"/g) ?? [];
    expect(toggles).toHaveLength(13);
    const coreRows = html.match(/class="soft in-core"/g) ?? [];
    expect(coreRows).toHaveLength(3);
  });
});

describe("shift table", () => {
  it("prints numeric bounds exactly as served", () => {
    const vs = applyMaxweak(initialView(session), maxweak);
    const html = renderShiftTable(vs);
    const originals = cells(html, "num-original").map(Number);
    const weakened = cells(html, "num-weakened").map(Number);
    const want = maxweak.result.per_predicate.filter((r) => r.shift > 1e-4);
    expect(originals).toHaveLength(want.length);
    want.forEach((row, i) => {
      expect(Object.is(originals[i], row.original)).toBe(true);
      expect(Object.is(weakened[i], row.weakened)).toBe(true);
    });
  });
});

describe("full app", () => {
  it("assembles toolbar, banner, tree, panel", () => {
    const html = renderApp(applySolve(initialView(session), feasible));
    for (const fragment of ["toolbar", "banner", "<svg", "panel"]) {
      expect(html).toContain(fragment);
    }
  });

  it("escapes labels and predicate text", () => {
    const evil: SessionSummary = {
      ...session,
      tree: { label: '<script>"x"', refinement: "LEAF", children: [] },
      labels: ['<script>"x"'],
      predicates: [
        {
          id: "p",
          text: '"<script>\\"x\\"" <= 1',
          hard: false,
          provenance: "soft-domain-knowledge",
          enabled: true,
        },
      ],
    };
    const html = renderApp(initialView(evil));
    expect(html).not.toContain("<script>");
  });
});
