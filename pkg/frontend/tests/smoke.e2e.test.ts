/** End-to-end smoke against a real service process.
 *
 * Builds a fixture asset root, starts `physparts serve`, then drives the
 * same client/state modules the page uses: list, fetch hinge candidates,
 * select the top one, confirm the finalized constraint via GET, show that
 * invalid edits never reach the wire, and walk the review states.
 */

import { execFileSync, spawn, type ChildProcess } from 'node:child_process';
import { mkdtempSync, rmSync } from 'node:fs';
import { tmpdir } from 'node:os';
import { join } from 'node:path';
import { afterAll, beforeAll, describe, expect, it } from 'vitest';

import { ApiClient, ApiError } from '../src/api';
import { canPost, selectionConstraint, UiAssetView } from '../src/state';
import type { CandidatePayload, WireConstraint } from '../src/types';

const PORT = 8931;
const BASE = `http://127.0.0.1:${PORT}`;

const FIXTURE_SCRIPT = `
import sys
from pathlib import Path
from physparts.asset import save_asset
from physparts.fixtures import drawer_slide, laptop_hinge

root = Path(sys.argv[1])
laptop, _ = laptop_hinge()
drawer, _ = drawer_slide()
save_asset(laptop, root / "laptop")
save_asset(drawer, root / "drawer")
`;

let root: string;
let server: ChildProcess;
const api = new ApiClient(BASE);

async function waitForService(): Promise<void> {
  for (let i = 0; i < 120; i += 1) {
    try {
      const resp = await fetch(`${BASE}/assets`);
      if (resp.ok) return;
    } catch {
      // not listening yet
    }
    await new Promise((r) => setTimeout(r, 250));
  }
  throw new Error('service never came up');
}

beforeAll(async () => {
  root = mkdtempSync(join(tmpdir(), 'physparts-smoke-'));
  execFileSync('python3', ['-c', FIXTURE_SCRIPT, root]);
  server = spawn('physparts', ['serve', root, '--port', String(PORT)], {
    stdio: 'ignore',
  });
  await waitForService();
}, 90_000);

afterAll(() => {
  if (server) server.kill();
  if (root) rmSync(root, { recursive: true, force: true });
});

describe('review flow over the live service', () => {
  let view: UiAssetView;
  let payload: CandidatePayload;
  let posted: WireConstraint;

  it('lists the fixture assets as pending', async () => {
    const rows = await api.listAssets();
    expect(rows.map((r) => r.id)).toEqual(['drawer', 'laptop']);
    const laptop = rows.find((r) => r.id === 'laptop')!;
    expect(laptop.review).toBe('pending');
    expect(laptop.version).toBe(1);
    expect(laptop.n_parts).toBe(2);
    view = new UiAssetView(laptop, laptop.version);
  }, 30_000);

  it('serves a parseable candidate payload for the hinge pair', async () => {
    view.selectPair(2, 1);
    payload = await api.getCandidates('laptop', 2, 1, 'C');
    expect(payload.kind).toBe('C');
    expect(payload.candidates.length).toBeGreaterThan(0);
    const scores = payload.candidates.map((c) => c.score);
    for (let i = 1; i < scores.length; i += 1) {
      expect(scores[i]!).toBeLessThanOrEqual(scores[i - 1]!);
    }
    view.loadCandidates(payload);
  }, 30_000);

  it('selecting the top candidate finalizes a kind-C constraint', async () => {
    view.chooseCandidate(0);
    expect(canPost(view.buffer!)).toBe(true);
    posted = selectionConstraint(view.buffer!);
    const resp = await api.postSelection('laptop', view.version, posted);
    expect(resp.version).toBe(2);
    view.version = resp.version;

    const { asset, version } = await api.getAsset('laptop');
    expect(version).toBe(2);
    const stored = asset.constraints.find((c) => c.child_part === 2)!;
    expect(stored.kind).toBe('C');
    expect(stored.finalized).toBe(true);
    expect(stored.parent_part).toBe(1);
    for (let i = 0; i < 3; i += 1) {
      expect(Math.abs(stored.direction![i]! - posted.direction![i]!))
        .toBeLessThan(1e-9);
      expect(Math.abs(stored.pivot![i]! - posted.pivot![i]!))
        .toBeLessThan(1e-9);
    }
    expect(Math.abs(stored.range![0]! - 0)).toBeLessThan(1e-9);
    expect(Math.abs(stored.range![1]! - Math.PI / 2)).toBeLessThan(1e-9);
  }, 30_000);

  it('blocks an invalid edit before it reaches the wire', async () => {
    view.chooseCandidate(0);
    view.buffer!.direction = [0, 0, 0];
    expect(canPost(view.buffer!)).toBe(false);
    expect(() => selectionConstraint(view.buffer!)).toThrow(/DirectionNotUnit/);
    // nothing was POSTed, so the server version is unchanged
    const { version } = await api.getAsset('laptop');
    expect(version).toBe(2);
  }, 30_000);

  it('rejects a stale write with 409 and the current version', async () => {
    view.chooseCandidate(0);
    const err = await api
      .postSelection('laptop', 1, selectionConstraint(view.buffer!))
      .then(() => null, (e: unknown) => e as ApiError);
    expect(err).toBeInstanceOf(ApiError);
    expect(err!.status).toBe(409);
    expect(err!.serverVersion).toBe(2);
  }, 30_000);

  it('walks the review states through to approval', async () => {
    const marked = await api.postReview('laptop', 2, 'vlm_done');
    expect(marked.review).toBe('vlm_done');
    const approved = await api.postReview('laptop', marked.version, 'approve', 'smoke');
    expect(approved.review).toBe('human_approved');

    const rows = await api.listAssets();
    expect(rows.find((r) => r.id === 'laptop')!.review).toBe('human_approved');
    expect(rows.find((r) => r.id === 'drawer')!.review).toBe('pending');
  }, 30_000);

  it('reject returns an asset to pending for re-query', async () => {
    // same two-step sequence the reject button issues
    const marked = await api.postReview('drawer', 1, 'vlm_done');
    const rejected = await api.postReview('drawer', marked.version, 'reject', 'smoke');
    expect(rejected.review).toBe('rejected');
    const requeued = await api.postReview('drawer', rejected.version, 'requeue', 'smoke');
    expect(requeued.review).toBe('pending');

    const rows = await api.listAssets();
    expect(rows.find((r) => r.id === 'drawer')!.review).toBe('pending');
  }, 30_000);
});
