/** Annotation session state: pure logic, no DOM and no geometry math.
 *
 * Enforces label arity at entry (two-point tools buffer the first click),
 * tracks a per-vehicle timer that starts on the first click and stops on
 * accept/fail, and exports/imports the annotation document schema.
 */

import { arity } from "./labels.js";
import type {
  Annotation,
  AnnotationDocument,
  AnnotationLabel,
  CameraIntrinsics,
  Point2,
  SolveResponse,
  VehicleRecord,
} from "./types.js";

export type Clock = () => number; // seconds

export interface VehicleState {
  id: string;
  prototypeClass?: string;
  annotations: Annotation[];
  lastResponse?: SolveResponse;
  startedAt?: number;
  elapsedS: number;
  status?: "accepted" | "failed";
}

export class Session {
  camera?: CameraIntrinsics;
  imageRef?: string;
  vehicles: VehicleState[] = [];
  activeVehicle = 0;
  activeTool: AnnotationLabel = "wheel-front-left";
  /** buffered first click of a two-point tool */
  pending: Point2 | null = null;

  constructor(private clock: Clock = () => Date.now() / 1000) {}

  get vehicle(): VehicleState {
    if (!this.vehicles.length) this.addVehicle();
    return this.vehicles[this.activeVehicle];
  }

  addVehicle(prototypeClass?: string): VehicleState {
    const v: VehicleState = {
      id: `vehicle-${this.vehicles.length}`,
      prototypeClass,
      annotations: [],
      elapsedS: 0,
    };
    this.vehicles.push(v);
    this.activeVehicle = this.vehicles.length - 1;
    return v;
  }

  selectTool(tool: AnnotationLabel): void {
    this.activeTool = tool;
    this.pending = null; // switching tools drops a half-entered pair
  }

  /**
   * Register a click for the active tool.  Returns the completed
   * annotation, or null when a two-point tool still waits for its
   * second click.  The vehicle timer starts on the first click.
   */
  addClick(xy: Point2): Annotation | null {
    const v = this.vehicle;
    if (v.status) return null; // accepted/failed vehicles are frozen
    if (v.startedAt === undefined) v.startedAt = this.clock();
    if (arity(this.activeTool) === 2) {
      if (this.pending === null) {
        this.pending = xy;
        return null;
      }
      const ann: Annotation = { label: this.activeTool, points: [this.pending, xy] };
      this.pending = null;
      v.annotations.push(ann);
      return ann;
    }
    const ann: Annotation = { label: this.activeTool, points: [xy] };
    v.annotations.push(ann);
    return ann;
  }

  /** Remove the last annotation (or drop a buffered first click). */
  undo(): boolean {
    if (this.pending !== null) {
      this.pending = null;
      return true;
    }
    const v = this.vehicle;
    if (!v.annotations.length) return false;
    v.annotations.pop();
    v.lastResponse = undefined;
    return true;
  }

  recordResponse(resp: SolveResponse): void {
    this.vehicle.lastResponse = resp;
  }

  private stopTimer(v: VehicleState): void {
    if (v.startedAt !== undefined) {
      v.elapsedS += this.clock() - v.startedAt;
      v.startedAt = undefined;
    }
  }

  accept(): void {
    const v = this.vehicle;
    this.stopTimer(v);
    v.status = "accepted";
  }

  markFailed(): void {
    const v = this.vehicle;
    this.stopTimer(v);
    v.status = "failed";
  }

  /** Elapsed labeling seconds, live while the timer runs. */
  elapsed(v: VehicleState = this.vehicle): number {
    return v.elapsedS + (v.startedAt !== undefined ? this.clock() - v.startedAt : 0);
  }

  exportDocument(): AnnotationDocument {
    if (!this.camera) throw new Error("no camera loaded");
    const vehicles: VehicleRecord[] = this.vehicles.map((v) => {
      const rec: VehicleRecord = {
        id: v.id,
        annotations: v.annotations.map((a) => ({
          label: a.label,
          points: a.points.map((p) => [p[0], p[1]] as Point2),
        })),
      };
      if (v.prototypeClass) rec.prototype_class = v.prototypeClass;
      const elapsed = this.elapsed(v);
      if (elapsed > 0) rec.elapsed_s = elapsed;
      if (v.status) rec.status = v.status;
      return rec;
    });
    const doc: AnnotationDocument = { camera: this.camera, vehicles };
    if (this.imageRef) doc.image = this.imageRef;
    return doc;
  }

  static importDocument(doc: AnnotationDocument, clock?: Clock): Session {
    const s = new Session(clock);
    s.camera = doc.camera;
    s.imageRef = doc.image;
    s.vehicles = doc.vehicles.map((rec, i) => ({
      id: rec.id ?? `vehicle-${i}`,
      prototypeClass: rec.prototype_class,
      annotations: rec.annotations.map((a) => ({
        label: a.label,
        points: a.points.map((p) => [p[0], p[1]] as Point2),
      })),
      elapsedS: rec.elapsed_s ?? 0,
      status: rec.status,
    }));
    s.activeVehicle = 0;
    return s;
  }
}
