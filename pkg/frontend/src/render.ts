/** HTML/SVG string renderers over the view state.
 *
 * Tree node values render to 4 decimals; the weakening shift table instead
 * prints the raw numbers exactly as received so they stay comparable with
 * the service JSON value-for-value.
 */

import { layoutTree } from "./layout";
import {
  badgeFor,
  pinnedLabels,
  valuesStale,
  type ViewState,
} from "./state";
import type { TreeNode } from "./types";

const X_STEP = 110;
const Y_STEP = 90;
const PAD = 60;

export function esc(text: string): string {
  return text
    .replace(/&/g, "&amp;")
    .replace(/</g, "&lt;")
    .replace(/>/g, "&gt;")
    .replace(/"/g, "&quot;");
}

export function fmtValue(v: number): string {
  return v.toFixed(4);
}

function collectByLabel(root: TreeNode, out = new Map<string, TreeNode>()): Map<string, TreeNode> {
  out.set(root.label, root);
  for (const c of root.children) collectByLabel(c, out);
  return out;
}

export function renderBanner(state: ViewState): string {
  if (!state.banner) return `<div class="banner banner-none" id="banner">no result yet</div>`;
  const { kind, text, offerRepair } = state.banner;
  const repair = offerRepair
    ? `<button data-action="run-core">find core</button>` +
      `<button data-action="run-maxweak">relax</button>`
    : "";
  return `<div class="banner banner-${kind}" id="banner">${esc(text)}${repair}</div>`;
}

export function renderTreeSvg(state: ViewState): string {
  const layout = layoutTree(state.tree);
  const byLabel = collectByLabel(state.tree);
  const pins = pinnedLabels(state.rows);
  const stale = valuesStale(state);
  const pos = new Map(layout.nodes.map((n) => [n.label, n]));
  const px = (x: number) => PAD + x * X_STEP;
  const py = (y: number) => PAD + y * Y_STEP;

  const parts: string[] = [];
  for (const e of layout.edges) {
    const p = pos.get(e.parent)!;
    const c = pos.get(e.child)!;
    parts.push(
      `<line class="edge" x1="${px(p.x)}" y1="${py(p.y)}" x2="${px(c.x)}" y2="${py(c.y)}"/>`,
    );
  }
  // conjunctive refinements carry the conventional arc across their children
  for (const n of layout.nodes) {
    if (n.refinement !== "AND") continue;
    const node = byLabel.get(n.label)!;
    const first = pos.get(node.children[0].label)!;
    const last = pos.get(node.children[node.children.length - 1].label)!;
    const t = 0.35;
    const x1 = px(n.x) + (px(first.x) - px(n.x)) * t;
    const y1 = py(n.y) + (py(first.y) - py(n.y)) * t;
    const x2 = px(n.x) + (px(last.x) - px(n.x)) * t;
    const y2 = py(n.y) + (py(last.y) - py(n.y)) * t;
    parts.push(
      `<path class="and-arc" d="M ${x1} ${y1} Q ${px(n.x)} ${py(n.y) + 55} ${x2} ${y2}"/>`,
    );
  }
  const deltas = new Map<string, number>();
  if (state.values && state.previousValues) {
    for (const [label, v] of Object.entries(state.values)) {
      const before = state.previousValues[label];
      if (before !== undefined && Math.abs(before - v) > 1e-9) {
        deltas.set(label, v - before);
      }
    }
  }
  for (const n of layout.nodes) {
    const badge = badgeFor(byLabel.get(n.label)!, pins);
    const value = state.values?.[n.label];
    const delta = deltas.get(n.label);
    const cls = [
      "node",
      `badge-${badge}`,
      stale ? "stale" : "",
      delta === undefined ? "" : delta > 0 ? "delta-up" : "delta-down",
    ]
      .filter(Boolean)
      .join(" ");
    const valueText =
      value === undefined || value === null
        ? ""
        : `<text class="value" x="${px(n.x)}" y="${py(n.y) + 30}">${fmtValue(value)}</text>`;
    parts.push(
      `<g class="${cls}" data-label="${esc(n.label)}">` +
        `<circle cx="${px(n.x)}" cy="${py(n.y)}" r="10"/>` +
        `<text class="label" x="${px(n.x)}" y="${py(n.y) - 16}">${esc(n.label)}</text>` +
        valueText +
        `</g>`,
    );
  }
  const w = PAD * 2 + (layout.width - 1) * X_STEP + X_STEP;
  const h = PAD * 2 + (layout.height - 1) * Y_STEP + Y_STEP / 2;
  return `<svg id="tree" viewBox="0 0 ${w} ${h}" width="${w}" height="${h}">${parts.join("")}</svg>`;
}

export function renderPanel(state: ViewState): string {
  const rows = state.rows
    .map((r) => {
      const cls = [r.hard ? "hard" : "soft", r.inCore ? "in-core" : "", r.enabled ? "" : "disabled"]
        .filter(Boolean)
        .join(" ");
      const toggle = r.hard
        ? ""
        : `<input type="checkbox" data-action="toggle" data-id="${esc(r.id)}" ${r.enabled ? "checked" : ""}/>`;
      const shift = r.shift === null ? "" : `Δ ${r.shift.toExponential(2)}`;
      return (
        `<tr class="${cls}" data-id="${esc(r.id)}">` +
        `<td>${toggle}</td>` +
        `<td class="pred-text">${esc(r.text)}</td>` +
        `<td>${r.hard ? "hard" : esc(r.provenance)}</td>` +
        `<td class="core-flag">${r.inCore ? "core" : ""}</td>` +
        `<td class="shift-flag">${shift}</td>` +
        `</tr>`
      );
    })
    .join("");
  return (
    `<table id="panel"><thead><tr>` +
    `<th></th><th>predicate</th><th>kind</th><th>core</th><th>weakened</th>` +
    `</tr></thead><tbody>${rows}</tbody></table>`
  );
}

export function renderShiftTable(state: ViewState): string {
  if (!state.shiftRows) return "";
  const rows = state.shiftRows
    .map(
      (r) =>
        `<tr>` +
        `<td class="soft-col">${esc(r.text)}</td>` +
        `<td class="weak-col">${esc(r.weakened_text)}</td>` +
        `<td class="num-original">${String(r.original)}</td>` +
        `<td class="num-weakened">${String(r.weakened)}</td>` +
        `</tr>`,
    )
    .join("");
  const distance = state.distance === null ? "" : ` (distance ${String(state.distance)})`;
  return (
    `<div id="shift-table"><h3>weakened predicates${esc(distance)}</h3>` +
    `<table><thead><tr><th>soft predicate</th><th>weakened predicate</th>` +
    `<th>bound</th><th>weakened bound</th></tr></thead><tbody>${rows}</tbody></table></div>`
  );
}

export function renderToolbar(state: ViewState): string {
  const rev = `session ${esc(state.sessionId)} · ${esc(state.domain)} · rev ${state.revision}`;
  return (
    `<div id="toolbar"><span id="session-info">${rev}</span>` +
    `<button data-action="run-solve">solve</button>` +
    `<button data-action="run-classify">classify</button>` +
    `<button data-action="run-core">core</button>` +
    `<button data-action="run-inclusion">relax (drop)</button>` +
    `<button data-action="run-maxweak">relax (weaken)</button>` +
    `<span id="pin-form"><input id="pin-label" placeholder="label"/>` +
    `<input id="pin-value" placeholder="value" size="8"/>` +
    `<button data-action="pin">pin</button></span></div>`
  );
}

export function renderApp(state: ViewState): string {
  const error = state.error ? `<div id="error" class="banner banner-bad">${esc(state.error)}</div>` : "";
  return (
    renderToolbar(state) +
    renderBanner(state) +
    error +
    `<div id="main">${renderTreeSvg(state)}${renderPanel(state)}</div>` +
    renderShiftTable(state)
  );
}
