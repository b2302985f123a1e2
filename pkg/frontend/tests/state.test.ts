import { describe, expect, it } from 'vitest';

import {
  bufferFromCandidate,
  bufferToWire,
  bufferViolations,
  canPost,
  filterSummaries,
  selectionConstraint,
  UiAssetView,
} from '../src/state';
import type { AssetSummary, CandidatePayload } from '../src/types';

const PAYLOAD_C: CandidatePayload = {
  child: 2, parent: 1, kind: 'C',
  candidates: [
    { direction: [0.9998, 0.02, 0], pivot: [0, -0.44, 0.54], score: 0.91, provenance: 'inplane-0' },
    { direction: [0, 1, 0], pivot: null, score: 0.5, provenance: 'inplane-6' },
  ],
  pivot_clusters: [[0, -0.44, 0.54], [0, 0.4, 0.5]],
  plane_normal: [0, 0, 1],
  plane_rms_residual: 0.001,
};

const SUMMARY: AssetSummary = {
  id: 'laptop', object_name: 'laptop', category: 'electronics',
  n_parts: 2, n_constraints: 0, review: 'pending', version: 1,
};

describe('candidate -> edit buffer', () => {
  it('loads direction, pivot and the default rotation range', () => {
    const buf = bufferFromCandidate(PAYLOAD_C, 0);
    expect(buf.kind).toBe('C');
    expect(buf.childPart).toBe(2);
    expect(buf.parentPart).toBe(1);
    expect(buf.direction).toEqual([0.9998, 0.02, 0]);
    expect(buf.pivot).toEqual([0, -0.44, 0.54]);
    expect(buf.rangeLo).toBe(0);
    expect(buf.rangeHi).toBe(90);
    expect(canPost(buf)).toBe(true);
  });

  it('falls back to the top pivot cluster when the candidate has none', () => {
    const buf = bufferFromCandidate(PAYLOAD_C, 1);
    expect(buf.pivot).toEqual([0, -0.44, 0.54]);
  });

  it('prismatic buffers keep normalized units and no pivot', () => {
    const payload: CandidatePayload = {
      ...PAYLOAD_C, kind: 'B',
      candidates: [{ direction: [1, 0, 0], pivot: null, score: 1, provenance: 'normal' }],
    };
    const buf = bufferFromCandidate(payload, 0);
    expect(buf.pivot).toBeNull();
    expect(buf.rangeLo).toBeNull();
    buf.rangeLo = -0.4;
    buf.rangeHi = 0;
    const wire = bufferToWire(buf);
    expect(wire.range).toEqual([-0.4, 0]); // no degree conversion for B
    expect(canPost(buf)).toBe(true);
  });

  it('point pivots need no direction', () => {
    const payload: CandidatePayload = { ...PAYLOAD_C, kind: 'D' };
    const buf = bufferFromCandidate(payload, 0);
    expect(buf.direction).toBeNull();
    expect(canPost(buf)).toBe(true);
  });

  it('throws on an out-of-range index', () => {
    expect(() => bufferFromCandidate(PAYLOAD_C, 7)).toThrow(/index/);
  });
});

describe('wire conversion', () => {
  it('rotation ranges convert degrees to radians', () => {
    const buf = bufferFromCandidate(PAYLOAD_C, 0);
    buf.rangeLo = 0;
    buf.rangeHi = 120;
    const wire = bufferToWire(buf);
    expect(wire.range![0]).toBe(0);
    expect(Math.abs(wire.range![1] - 2.0944)).toBeLessThan(1e-4);
    expect(Math.abs(wire.range![1] - (2 * Math.PI) / 3)).toBeLessThan(1e-12);
  });

  it('the POSTed direction is normalized', () => {
    const buf = bufferFromCandidate(PAYLOAD_C, 0);
    buf.direction = [2, 0, 0];
    const wire = selectionConstraint(buf);
    expect(wire.direction).toEqual([1, 0, 0]);
  });
});

describe('client-side gating', () => {
  it('a zero-length direction blocks the POST', () => {
    const buf = bufferFromCandidate(PAYLOAD_C, 0);
    buf.direction = [0, 0, 0];
    expect(canPost(buf)).toBe(false);
    expect(bufferViolations(buf).map((v) => v.code)).toContain('DirectionNotUnit');
    expect(() => selectionConstraint(buf)).toThrow(/DirectionNotUnit/);
  });

  it('a reversed range blocks the POST', () => {
    const buf = bufferFromCandidate(PAYLOAD_C, 0);
    buf.rangeLo = 90;
    buf.rangeHi = 0;
    expect(canPost(buf)).toBe(false);
  });
});

describe('asset view state', () => {
  it('selecting a pair clears stale candidates and buffer', () => {
    const view = new UiAssetView(SUMMARY, 1);
    view.selectPair(2, 1);
    view.loadCandidates(PAYLOAD_C);
    view.chooseCandidate(0);
    expect(view.buffer).not.toBeNull();
    view.selectPair(1, 2);
    expect(view.candidates).toBeNull();
    expect(view.buffer).toBeNull();
  });

  it('rejects a self-pair', () => {
    const view = new UiAssetView(SUMMARY, 1);
    expect(() => view.selectPair(2, 2)).toThrow(/differ/);
  });

  it('part visibility defaults to on', () => {
    const view = new UiAssetView(SUMMARY, 1);
    expect(view.isPartVisible(1)).toBe(true);
    view.setPartVisible(1, false);
    expect(view.isPartVisible(1)).toBe(false);
  });

  it('choosing a candidate before fetching throws', () => {
    const view = new UiAssetView(SUMMARY, 1);
    expect(() => view.chooseCandidate(0)).toThrow(/not fetched/);
  });
});

describe('status filtering', () => {
  const rows = [
    SUMMARY,
    { ...SUMMARY, id: 'drawer', review: 'human_approved' },
  ];

  it('passes everything through on "all"', () => {
    expect(filterSummaries(rows, 'all')).toHaveLength(2);
  });

  it('filters by review state', () => {
    expect(filterSummaries(rows, 'human_approved').map((r) => r.id))
      .toEqual(['drawer']);
    expect(filterSummaries(rows, 'rejected')).toHaveLength(0);
  });
});
