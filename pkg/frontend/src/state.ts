/** Client-side state for one asset under review.
 *
 * The edit buffer keeps raw user input in display units (degrees for
 * rotation ranges); conversion to wire units happens in one place, and a
 * POST is only possible while the buffer passes the same invariants the
 * server enforces.
 */

import type { AssetSummary, CandidatePayload, Kind, Vec3, Violation, WireConstraint } from './types';
import { normalize3, validateConstraint } from './validate';
import { degToRad, rangeUsesDegrees } from './units';

export interface EditBuffer {
  kind: Kind;
  parentPart: number | null;
  childPart: number | null;
  direction: Vec3 | null;
  pivot: Vec3 | null;
  /** display units: degrees when rangeUsesDegrees(kind), else normalized */
  rangeLo: number | null;
  rangeHi: number | null;
}

/** Buffer in wire units, for validation and POSTing. Directions pass
 * through unnormalized here so zero-length input trips the same check the
 * server would run. */
export function bufferToWire(buf: EditBuffer): WireConstraint {
  let range: [number, number] | null = null;
  if (buf.rangeLo !== null && buf.rangeHi !== null) {
    range = rangeUsesDegrees(buf.kind)
      ? [degToRad(buf.rangeLo), degToRad(buf.rangeHi)]
      : [buf.rangeLo, buf.rangeHi];
  }
  return {
    kind: buf.kind,
    parent_part: buf.parentPart,
    child_part: buf.childPart,
    direction: buf.direction,
    pivot: buf.pivot,
    range,
  };
}

export function bufferViolations(buf: EditBuffer): Violation[] {
  return validateConstraint(bufferToWire(buf));
}

export function canPost(buf: EditBuffer): boolean {
  return bufferViolations(buf).length === 0;
}

/** The constraint actually POSTed: validated buffer with the direction
 * normalized at the boundary. Throws if the buffer is invalid; the UI must
 * gate on canPost first. */
export function selectionConstraint(buf: EditBuffer): WireConstraint {
  const violations = bufferViolations(buf);
  if (violations.length > 0) {
    throw new Error(`invalid edit buffer: ${violations[0]!.code}`);
  }
  const wire = bufferToWire(buf);
  if (wire.direction) {
    wire.direction = normalize3(wire.direction);
  }
  return wire;
}

/** Load one fetched candidate into the buffer. Rotation kinds get the
 * pending-review default range of (0, 90) degrees; prismatic ranges stay
 * empty until edited (the service stores a constraint without one). */
export function bufferFromCandidate(
  payload: CandidatePayload, index: number,
): EditBuffer {
  const cand = payload.candidates[index];
  if (!cand) {
    throw new Error(`no candidate at index ${index}`);
  }
  const needsPivot = payload.kind === 'C' || payload.kind === 'D' || payload.kind === 'CB';
  const pivot = needsPivot
    ? cand.pivot ?? payload.pivot_clusters[0] ?? null
    : null;
  const rotates = rangeUsesDegrees(payload.kind);
  return {
    kind: payload.kind,
    parentPart: payload.parent,
    childPart: payload.child,
    direction: payload.kind === 'D' ? null : [...cand.direction],
    pivot: pivot ? [...pivot] : null,
    rangeLo: rotates ? 0 : null,
    rangeHi: rotates ? 90 : null,
  };
}

export type StatusFilter = 'all' | string;

export function filterSummaries(
  rows: AssetSummary[], filter: StatusFilter,
): AssetSummary[] {
  if (filter === 'all') return rows;
  return rows.filter((r) => r.review === filter);
}

/** Per-asset view state driven by the DOM layer. */
export class UiAssetView {
  partVisibility = new Map<number, boolean>();
  selectedPair: { child: number; parent: number } | null = null;
  candidates: CandidatePayload | null = null;
  buffer: EditBuffer | null = null;

  constructor(public summary: AssetSummary, public version: number) {}

  setPartVisible(partId: number, visible: boolean): void {
    this.partVisibility.set(partId, visible);
  }

  isPartVisible(partId: number): boolean {
    return this.partVisibility.get(partId) ?? true;
  }

  selectPair(child: number, parent: number): void {
    if (child === parent) {
      throw new Error('child and parent must differ');
    }
    this.selectedPair = { child, parent };
    this.candidates = null;
    this.buffer = null;
  }

  loadCandidates(payload: CandidatePayload): void {
    this.candidates = payload;
  }

  chooseCandidate(index: number): void {
    if (!this.candidates) {
      throw new Error('candidates not fetched yet');
    }
    this.buffer = bufferFromCandidate(this.candidates, index);
  }
}
