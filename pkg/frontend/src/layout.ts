/** Tiered top-down tree layout: leaves take consecutive horizontal slots,
 * parents center over their children.  Unit coordinates; the renderer
 * scales them to pixels. */

import type { TreeNode } from "./types";

export interface LaidOutNode {
  label: string;
  refinement: TreeNode["refinement"];
  depth: number;
  x: number;
  y: number;
}

export interface LayoutEdge {
  parent: string;
  child: string;
}

export interface TreeLayout {
  nodes: LaidOutNode[];
  edges: LayoutEdge[];
  width: number;
  height: number;
}

export function layoutTree(root: TreeNode): TreeLayout {
  const nodes: LaidOutNode[] = [];
  const edges: LayoutEdge[] = [];
  let nextSlot = 0;
  let maxDepth = 0;

  function place(node: TreeNode, depth: number): number {
    maxDepth = Math.max(maxDepth, depth);
    let x: number;
    if (node.children.length === 0) {
      x = nextSlot++;
    } else {
      const xs = node.children.map((c) => {
        edges.push({ parent: node.label, child: c.label });
        return place(c, depth + 1);
      });
      x = (xs[0] + xs[xs.length - 1]) / 2;
    }
    nodes.push({ label: node.label, refinement: node.refinement, depth, x, y: depth });
    return x;
  }

  place(root, 0);
  return { nodes, edges, width: Math.max(1, nextSlot), height: maxDepth + 1 };
}
