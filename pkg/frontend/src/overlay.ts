/** Projection math for the candidate overlay canvas.
 *
 * Assets are normalized (union bbox in [-1, 1]^3, z up), so a fixed orbit
 * camera with an orthographic projection is enough for inspection; no 3D
 * library needed. All functions are pure so the math is unit-testable.
 */

import { degToRad } from './units';
import type { Vec3 } from './types';

export interface ViewBasis {
  right: Vec3;
  up: Vec3;
  forward: Vec3;
}

function cross(a: Vec3, b: Vec3): Vec3 {
  return [
    a[1] * b[2] - a[2] * b[1],
    a[2] * b[0] - a[0] * b[2],
    a[0] * b[1] - a[1] * b[0],
  ];
}

function unit(v: Vec3): Vec3 {
  const n = Math.hypot(v[0], v[1], v[2]);
  return [v[0] / n, v[1] / n, v[2] / n];
}

export function dot(a: Vec3, b: Vec3): number {
  return a[0] * b[0] + a[1] * b[1] + a[2] * b[2];
}

/** Orbit basis: eye at (azimuth, elevation) looking at the origin, z up. */
export function viewBasis(azimuthDeg: number, elevationDeg: number): ViewBasis {
  const az = degToRad(azimuthDeg);
  const el = degToRad(elevationDeg);
  const eye: Vec3 = [
    Math.cos(el) * Math.cos(az),
    Math.cos(el) * Math.sin(az),
    Math.sin(el),
  ];
  const forward = unit([-eye[0], -eye[1], -eye[2]]);
  const right = unit(cross(forward, [0, 0, 1]));
  const up = cross(right, forward);
  return { right, up, forward };
}

export interface ScreenPoint {
  x: number;
  y: number;
  /** view-space depth; larger = closer to the camera */
  depth: number;
}

/** Orthographic map of a normalized-space point onto a canvas. The world
 * box [-extent, extent] fills the canvas minus the margin; canvas y grows
 * downward. */
export function projectPoint(
  p: Vec3, basis: ViewBasis, width: number, height: number,
  margin = 12, extent = 1.25,
): ScreenPoint {
  const scale = (Math.min(width, height) / 2 - margin) / extent;
  return {
    x: width / 2 + scale * dot(p, basis.right),
    y: height / 2 - scale * dot(p, basis.up),
    depth: -dot(p, basis.forward),
  };
}

/** Candidate axis drawn as a segment through its anchor point. */
export function axisSegment(
  direction: Vec3, anchor: Vec3, halfLength = 1.2,
): [Vec3, Vec3] {
  const d = unit(direction);
  return [
    [anchor[0] - halfLength * d[0], anchor[1] - halfLength * d[1], anchor[2] - halfLength * d[2]],
    [anchor[0] + halfLength * d[0], anchor[1] + halfLength * d[1], anchor[2] + halfLength * d[2]],
  ];
}
