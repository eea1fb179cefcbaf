/** Wireframe and badge rendering.
 *
 * The UI never projects geometry itself: corners arrive in pixel space
 * from the solve service and are drawn verbatim (single source of truth).
 * Colors encode the DoF verdict: green solvable, amber gauge-only
 * -deficient, and under-constrained draws no wireframe at all.
 */

import type { Annotation, DofStatus, Point2, SolveResponse } from "./types.js";

/** Minimal 2D context surface, so tests can record draw calls. */
export interface Canvas2D {
  beginPath(): void;
  moveTo(x: number, y: number): void;
  lineTo(x: number, y: number): void;
  arc(x: number, y: number, r: number, a0: number, a1: number): void;
  stroke(): void;
  fill(): void;
  fillText(text: string, x: number, y: number): void;
  strokeStyle: string;
  fillStyle: string;
  lineWidth: number;
  font: string;
}

export const STATUS_COLORS: Record<DofStatus, string> = {
  solvable: "#2ecc71",
  "gauge-only-deficient": "#f5a623",
  "under-constrained": "#999999",
};

// Corner order: bottom ring rear-left, rear-right, front-right,
// front-left, then the top ring in the same order.  The front face is
// therefore corners {2, 3, 6, 7}.
const FRONT_FACE_EDGES = new Set(["2-6", "3-7", "2-3", "6-7"]);

export interface OverlayResult {
  /** image-space corner positions actually drawn (=== service corners) */
  drawnCorners: Point2[];
  wireframeColor: string | null;
}

export function drawOverlay(
  ctx: Canvas2D,
  resp: SolveResponse,
  annotations: Annotation[],
  opts: { showResiduals?: boolean } = {},
): OverlayResult {
  const status = resp.dof.status;
  const wf = resp.projected_wireframe_px;
  if (status === "under-constrained" || !wf) {
    drawClicks(ctx, annotations);
    return { drawnCorners: [], wireframeColor: null };
  }
  const color = STATUS_COLORS[status];
  const corners = wf.corners;

  ctx.lineWidth = 2;
  for (const [i, j] of wf.edges) {
    const front = FRONT_FACE_EDGES.has(`${Math.min(i, j)}-${Math.max(i, j)}`);
    ctx.strokeStyle = front ? "#ff5533" : color;
    ctx.beginPath();
    ctx.moveTo(corners[i][0], corners[i][1]);
    ctx.lineTo(corners[j][0], corners[j][1]);
    ctx.stroke();
  }
  ctx.fillStyle = color;
  for (const [x, y] of corners) {
    ctx.beginPath();
    ctx.arc(x, y, 3, 0, Math.PI * 2);
    ctx.fill();
  }

  drawClicks(ctx, annotations);
  if (opts.showResiduals !== false && resp.per_point_residuals_px) {
    drawResidualBadges(ctx, annotations, resp.per_point_residuals_px);
  }
  return { drawnCorners: corners.map((c) => [c[0], c[1]]), wireframeColor: color };
}

function drawClicks(ctx: Canvas2D, annotations: Annotation[]): void {
  ctx.fillStyle = "#3498db";
  for (const ann of annotations) {
    for (const [x, y] of ann.points) {
      ctx.beginPath();
      ctx.arc(x, y, 4, 0, Math.PI * 2);
      ctx.fill();
    }
  }
}

function drawResidualBadges(ctx: Canvas2D, annotations: Annotation[], residuals: number[]): void {
  // residuals arrive per click, in annotation order
  ctx.font = "11px sans-serif";
  ctx.fillStyle = "#ffffff";
  let k = 0;
  for (const ann of annotations) {
    for (const [x, y] of ann.points) {
      const r = residuals[k++];
      if (r === undefined) return;
      ctx.fillText(`${r.toFixed(1)}px`, x + 6, y - 6);
    }
  }
}
