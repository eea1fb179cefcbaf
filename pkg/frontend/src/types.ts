/** Shared wire/document types: the annotation JSON schema and the solve API. */

export type AnnotationLabel =
  | "wheel-front-left"
  | "wheel-front-right"
  | "wheel-rear-left"
  | "wheel-rear-right"
  | "center-front"
  | "center-back"
  | "center-top"
  | "edge-rear-left"
  | "edge-rear-right"
  | "edge-front-left"
  | "edge-front-right"
  | "corner-top-rear-left"
  | "corner-top-rear-right"
  | "corner-top-front-left"
  | "corner-top-front-right"
  | "symmetry-front"
  | "symmetry-back"
  | "symmetry-roof"
  | "dir-forward"
  | "dir-upward"
  | "dir-sideways";

export type Point2 = [number, number];

export interface Annotation {
  label: AnnotationLabel;
  /** one point, or [left, right] / [tail, tip] for two-point labels */
  points: Point2[];
}

export interface CameraIntrinsics {
  fx: number;
  fy: number;
  cx: number;
  cy: number;
  skew?: number;
  distortion?: [number, number, number, number, number];
}

export interface Pose {
  rotation: number[][];
  translation: number[];
  dimensions: number[];
}

export interface FeatureScale {
  label_pair: [AnnotationLabel, AnnotationLabel];
  length_m: number;
}

export interface VehicleRecord {
  id: string;
  annotations: Annotation[];
  prototype_class?: string;
  feature_scale?: FeatureScale;
  gt?: Pose;
  elapsed_s?: number;
  status?: "accepted" | "failed";
}

export interface AnnotationDocument {
  camera: CameraIntrinsics;
  vehicles: VehicleRecord[];
  image?: string;
}

export type DofStatus = "solvable" | "gauge-only-deficient" | "under-constrained";

export interface DofReport {
  dof_available: number;
  dof_needed: number;
  status: DofStatus;
}

export interface Wireframe {
  corners: Point2[]; // 8 projected corners, pixel coordinates
  edges: [number, number][]; // 12 corner-index pairs
}

export interface SolveResponse {
  dof: DofReport;
  converged: boolean;
  pose?: Pose;
  projected_wireframe_px?: Wireframe | null;
  per_point_residuals_px?: number[];
  cost_pixel?: number;
  detail?: string;
}

export interface SolveConfigOverrides {
  gauge?: "fix_dz_to_1" | "homogeneous_svd" | "prior";
  lambda_prior?: number;
  lambda_pixel?: number;
  finetune?: boolean;
}

export interface SolveRequest {
  camera: CameraIntrinsics;
  vehicle: VehicleRecord;
  config?: SolveConfigOverrides;
}

export interface PriorsListing {
  classes: { name: string; mu: number[] }[];
}
