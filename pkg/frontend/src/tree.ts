/* Explorer tree: flatten the API's nested nodes into render rows.
 *
 * The tree starts with the database root (tables underneath) and the
 * cube root (measures, dimensions and the preset cuboids). Cuboid rows
 * are clickable and open the exploration pane. */

import { TreeNode } from "./api.js";
import { esc } from "./charts.js";

export interface TreeRow {
  label: string;
  kind: TreeNode["kind"];
  depth: number;
  path: string;
  hasChildren: boolean;
  expanded: boolean;
}

export type ExpansionSet = Set<string>;

export function flattenTree(roots: TreeNode[], expanded: ExpansionSet): TreeRow[] {
  const rows: TreeRow[] = [];
  const walk = (node: TreeNode, depth: number, prefix: string) => {
    const path = prefix ? `${prefix}/${node.label}` : node.label;
    const isOpen = expanded.has(path);
    rows.push({
      label: node.label,
      kind: node.kind,
      depth,
      path,
      hasChildren: node.children.length > 0,
      expanded: isOpen,
    });
    if (isOpen) {
      for (const child of node.children) walk(child, depth + 1, path);
    }
  };
  for (const root of roots) walk(root, 0, "");
  return rows;
}

export function toggle(expanded: ExpansionSet, path: string): ExpansionSet {
  const next = new Set(expanded);
  if (next.has(path)) next.delete(path);
  else next.add(path);
  return next;
}

export function cuboidLeaves(roots: TreeNode[]): string[] {
  const found: string[] = [];
  const walk = (node: TreeNode) => {
    if (node.kind === "cuboid") found.push(node.label);
    node.children.forEach(walk);
  };
  roots.forEach(walk);
  return found;
}

const ICONS: Record<TreeNode["kind"], string> = {
  database: "\u{1F5C4}",
  table: "\u{1F4C4}",
  cube: "\u{1F9CA}",
  measures: "\u{1F4CF}",
  dimensions: "\u{1F9ED}",
  cuboid: "▦",
};

export function treeHtml(rows: TreeRow[]): string {
  return rows
    .map((r) => {
      const caret = r.hasChildren ? (r.expanded ? "▾" : "▸") : " ";
      const cls = r.kind === "cuboid" ? "tree-row cuboid" : "tree-row";
      return `<div class="${cls}" data-path="${esc(r.path)}" data-kind="${r.kind}" ` +
        `data-label="${esc(r.label)}" style="padding-left:${r.depth * 16}px">` +
        `<span class="caret">${caret}</span> ${ICONS[r.kind]} ${esc(r.label)}</div>`;
    })
    .join("");
}
