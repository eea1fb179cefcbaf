/** Tool catalog: arity, palette grouping, and keyboard shortcuts. */

import type { AnnotationLabel } from "./types.js";

export interface ToolSpec {
  label: AnnotationLabel;
  arity: 1 | 2;
  group: "wheels" | "centerline" | "edges" | "corners" | "symmetries" | "directions";
  shortcut: string;
  hint: string;
}

export const TOOLS: ToolSpec[] = [
  { label: "wheel-front-left", arity: 1, group: "wheels", shortcut: "1", hint: "front-left wheel ground contact" },
  { label: "wheel-front-right", arity: 1, group: "wheels", shortcut: "2", hint: "front-right wheel ground contact" },
  { label: "wheel-rear-left", arity: 1, group: "wheels", shortcut: "3", hint: "rear-left wheel ground contact" },
  { label: "wheel-rear-right", arity: 1, group: "wheels", shortcut: "4", hint: "rear-right wheel ground contact" },
  { label: "center-front", arity: 1, group: "centerline", shortcut: "q", hint: "front badge / centerline mark" },
  { label: "center-back", arity: 1, group: "centerline", shortcut: "w", hint: "rear badge / centerline mark" },
  { label: "center-top", arity: 1, group: "centerline", shortcut: "e", hint: "antenna / roof centerline mark" },
  { label: "edge-front-left", arity: 1, group: "edges", shortcut: "a", hint: "point on the front-left vertical edge" },
  { label: "edge-front-right", arity: 1, group: "edges", shortcut: "s", hint: "point on the front-right vertical edge" },
  { label: "edge-rear-left", arity: 1, group: "edges", shortcut: "d", hint: "point on the rear-left vertical edge" },
  { label: "edge-rear-right", arity: 1, group: "edges", shortcut: "f", hint: "point on the rear-right vertical edge" },
  { label: "corner-top-front-left", arity: 1, group: "corners", shortcut: "z", hint: "top front-left box corner" },
  { label: "corner-top-front-right", arity: 1, group: "corners", shortcut: "x", hint: "top front-right box corner" },
  { label: "corner-top-rear-left", arity: 1, group: "corners", shortcut: "c", hint: "top rear-left box corner" },
  { label: "corner-top-rear-right", arity: 1, group: "corners", shortcut: "v", hint: "top rear-right box corner" },
  { label: "symmetry-front", arity: 2, group: "symmetries", shortcut: "t", hint: "left then right point on the front face" },
  { label: "symmetry-back", arity: 2, group: "symmetries", shortcut: "y", hint: "left then right point on the back face" },
  { label: "symmetry-roof", arity: 2, group: "symmetries", shortcut: "u", hint: "left then right point on the roof" },
  { label: "dir-forward", arity: 2, group: "directions", shortcut: "g", hint: "tail then tip, pointing forward" },
  { label: "dir-sideways", arity: 2, group: "directions", shortcut: "h", hint: "tail then tip, pointing left" },
  { label: "dir-upward", arity: 2, group: "directions", shortcut: "j", hint: "tail then tip, pointing up" },
];

const BY_LABEL = new Map(TOOLS.map((t) => [t.label, t]));

export function toolSpec(label: AnnotationLabel): ToolSpec {
  const spec = BY_LABEL.get(label);
  if (!spec) throw new Error(`unknown tool ${label}`);
  return spec;
}

export function arity(label: AnnotationLabel): 1 | 2 {
  return toolSpec(label).arity;
}

export const GROUPS = ["wheels", "centerline", "edges", "corners", "symmetries", "directions"] as const;
