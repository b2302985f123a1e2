/** Client-side mirror of the server's constraint invariants.
 *
 * Same rules, same violation codes, so a buffer that passes here can only
 * 422 on the server if the asset changed underneath us. The one deliberate
 * difference: directions are normalized at the wire boundary, so here a
 * direction only has to be nonzero, not unit.
 */

import type { Kind, Vec3, Violation, WireConstraint } from './types';

export const KIND_CODES: Record<Kind, number> = {
  A: 0, B: 1, C: 2, D: 3, E: 4, CB: 5,
};

const UNCONSTRAINED_KINDS: Kind[] = ['A', 'E'];
const DIRECTION_KINDS: Kind[] = ['B', 'C', 'CB'];
const PIVOT_KINDS: Kind[] = ['C', 'D', 'CB'];

const MIN_DIRECTION_NORM = 1e-9;

export function norm3(v: Vec3): number {
  return Math.hypot(v[0], v[1], v[2]);
}

export function normalize3(v: Vec3): Vec3 {
  const n = norm3(v);
  return [v[0] / n, v[1] / n, v[2] / n];
}

export function validateConstraint(c: WireConstraint): Violation[] {
  const out: Violation[] = [];
  if (!(c.kind in KIND_CODES)) {
    out.push({ code: 'UnknownKind', path: 'constraint.kind',
               message: `unknown kind ${c.kind}` });
    return out;
  }
  if (UNCONSTRAINED_KINDS.includes(c.kind)) {
    for (const name of ['parent_part', 'child_part', 'direction', 'pivot', 'range'] as const) {
      if (c[name] !== null && c[name] !== undefined) {
        out.push({ code: 'FieldForbiddenForKind', path: `constraint.${name}`,
                   message: `kind ${c.kind} takes no parameters but ${name} is set` });
      }
    }
    return out;
  }
  if (c.parent_part === null || c.child_part === null
      || c.parent_part === undefined || c.child_part === undefined) {
    out.push({ code: 'MissingParentChild', path: 'constraint',
               message: `kind ${c.kind} requires parent_part and child_part` });
  } else if (c.parent_part === c.child_part) {
    out.push({ code: 'ParentChildIdentical', path: 'constraint',
               message: `parent and child are both part ${c.parent_part}` });
  }
  if (DIRECTION_KINDS.includes(c.kind)) {
    if (!c.direction) {
      out.push({ code: 'MissingDirection', path: 'constraint.direction',
                 message: `kind ${c.kind} requires a direction` });
    } else if (norm3(c.direction) < MIN_DIRECTION_NORM) {
      out.push({ code: 'DirectionNotUnit', path: 'constraint.direction',
                 message: 'direction has zero length' });
    }
  }
  if (PIVOT_KINDS.includes(c.kind)) {
    if (!c.pivot) {
      out.push({ code: 'MissingPivot', path: 'constraint.pivot',
                 message: `kind ${c.kind} requires a pivot` });
    }
  } else if (c.pivot) {
    out.push({ code: 'PivotForbiddenForPrismatic', path: 'constraint.pivot',
               message: `kind ${c.kind} takes no pivot` });
  }
  if (c.range && !(c.range[0] <= c.range[1])) {
    out.push({ code: 'RangeReversed', path: 'constraint.range',
               message: `range lo ${c.range[0]} > hi ${c.range[1]}` });
  }
  return out;
}

/** Editable annotation fields; mirrors the server-side reply checks. */
export interface AnnotationEdit {
  density: number;
  affordanceRank: number;
  materialName: string;
}

export function validateAnnotationEdit(edit: AnnotationEdit): Violation[] {
  const out: Violation[] = [];
  if (!Number.isFinite(edit.density) || edit.density < 0) {
    out.push({ code: 'NegativeDensity', path: 'part.density',
               message: 'density must be >= 0 g/cm3' });
  }
  if (!Number.isInteger(edit.affordanceRank)
      || edit.affordanceRank < 1 || edit.affordanceRank > 10) {
    out.push({ code: 'RankOutOfRange', path: 'part.affordance_rank',
               message: 'rank must be an integer in 1..10' });
  }
  if (edit.materialName.trim() === '') {
    out.push({ code: 'EmptyMaterial', path: 'part.material',
               message: 'material name must be non-empty' });
  }
  return out;
}
