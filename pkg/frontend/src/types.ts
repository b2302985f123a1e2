/** Wire types for the review service. Field names match the JSON exactly. */

export type Kind = 'A' | 'B' | 'C' | 'D' | 'E' | 'CB';

export type Vec3 = [number, number, number];

export interface AssetSummary {
  id: string;
  object_name: string;
  category: string;
  n_parts: number;
  n_constraints: number;
  review: string;
  version: number;
}

export interface MaterialSpec {
  name: string;
  youngs_modulus_gpa: number;
  poisson_ratio: number;
  density_g_cm3: number;
}

export interface DescriptionSet {
  basic: string;
  functional: string;
  kinematic: string;
  grasped: string;
}

export interface PartRecord {
  id: number;
  name: string;
  mesh: string;
  material: MaterialSpec;
  affordance_rank: number;
  descriptions: DescriptionSet;
}

export interface WireConstraint {
  kind: Kind;
  parent_part: number | null;
  child_part: number | null;
  direction: Vec3 | null;
  pivot: Vec3 | null;
  range: [number, number] | null;
  finalized?: boolean;
}

export interface AssetRecord {
  format_version: number;
  object_name: string;
  category: string;
  absolute_scale_cm: Vec3;
  provenance: string;
  parts: PartRecord[];
  constraints: WireConstraint[];
}

export interface AxisCandidate {
  direction: Vec3;
  pivot: Vec3 | null;
  score: number;
  provenance: string;
}

export interface CandidatePayload {
  child: number;
  parent: number;
  kind: Kind;
  candidates: AxisCandidate[];
  pivot_clusters: Vec3[];
  plane_normal: Vec3;
  plane_rms_residual: number;
}

export interface Violation {
  code: string;
  path: string;
  message: string;
}
