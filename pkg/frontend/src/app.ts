/** DOM wiring for the review client. All numbers displayed come from the
 * service; this layer only formats, converts units, and draws. */

import { ApiClient, ApiError } from './api';
import { parseMesh, wireframeEdges, type ParsedMesh } from './mesh';
import { axisSegment, projectPoint, viewBasis, type ViewBasis } from './overlay';
import {
  UiAssetView,
  bufferViolations,
  canPost,
  filterSummaries,
  selectionConstraint,
} from './state';
import { formatScaleCm, radToDeg, rangeUsesDegrees } from './units';
import type { AssetRecord, AssetSummary, Vec3 } from './types';

const api = new ApiClient('');

let view: UiAssetView | null = null;
let record: AssetRecord | null = null;
let meshes = new Map<number, ParsedMesh>();
let azimuth = 35;
let elevation = 25;

function el<T extends HTMLElement>(id: string): T {
  const node = document.getElementById(id);
  if (!node) throw new Error(`missing #${id}`);
  return node as T;
}

function banner(text: string, isError = false): void {
  const b = el<HTMLDivElement>('banner');
  b.textContent = text;
  b.className = isError ? 'banner error' : 'banner';
  b.hidden = text === '';
}

// ------------------------------------------------------------- browse panel

async function refreshList(): Promise<void> {
  let rows: AssetSummary[];
  try {
    rows = await api.listAssets();
  } catch (err) {
    banner(`service unreachable: ${(err as Error).message}`, true);
    return;
  }
  banner('');
  const filter = el<HTMLSelectElement>('status-filter').value;
  const shown = filterSummaries(rows, filter);
  const tbody = el<HTMLTableSectionElement>('asset-rows');
  tbody.replaceChildren();
  if (shown.length === 0) {
    const row = tbody.insertRow();
    const cell = row.insertCell();
    cell.colSpan = 5;
    cell.textContent = 'no assets';
    return;
  }
  for (const s of shown) {
    const row = tbody.insertRow();
    row.insertCell().textContent = s.id;
    row.insertCell().textContent = s.object_name;
    row.insertCell().textContent = `${s.n_parts} parts / ${s.n_constraints} joints`;
    row.insertCell().textContent = s.review;
    const open = document.createElement('button');
    open.textContent = 'open';
    open.onclick = () => openAsset(s);
    row.insertCell().append(open);
  }
}

// ------------------------------------------------------------ inspect panel

async function openAsset(summary: AssetSummary): Promise<void> {
  const { asset, version } = await api.getAsset(summary.id);
  view = new UiAssetView(summary, version);
  record = asset;
  meshes = new Map();
  for (const part of asset.parts) {
    const blob = await api.getMesh(summary.id, part.id);
    meshes.set(part.id, parseMesh(blob));
  }
  el<HTMLSpanElement>('asset-title').textContent =
    `${asset.object_name} (${formatScaleCm(asset.absolute_scale_cm)})`;
  renderPartList();
  renderPairSelectors();
  renderReviewPanel();
  drawScene();
}

function renderPartList(): void {
  if (!view || !record) return;
  const list = el<HTMLUListElement>('part-list');
  list.replaceChildren();
  for (const part of record.parts) {
    const item = document.createElement('li');
    const toggle = document.createElement('input');
    toggle.type = 'checkbox';
    toggle.checked = view.isPartVisible(part.id);
    toggle.onchange = () => {
      view!.setPartVisible(part.id, toggle.checked);
      drawScene();
    };
    item.append(toggle,
      ` ${part.id}: ${part.name} [${part.material.name}, rank ${part.affordance_rank}]`);
    list.append(item);
  }
}

function renderPairSelectors(): void {
  if (!record) return;
  for (const id of ['pair-child', 'pair-parent']) {
    const sel = el<HTMLSelectElement>(id);
    sel.replaceChildren();
    for (const part of record.parts) {
      const opt = document.createElement('option');
      opt.value = String(part.id);
      opt.textContent = `${part.id}: ${part.name}`;
      sel.append(opt);
    }
  }
}

async function fetchCandidates(): Promise<void> {
  if (!view) return;
  const child = Number(el<HTMLSelectElement>('pair-child').value);
  const parent = Number(el<HTMLSelectElement>('pair-parent').value);
  const kind = el<HTMLSelectElement>('pair-kind').value;
  try {
    view.selectPair(child, parent);
  } catch (err) {
    banner((err as Error).message, true);
    return;
  }
  try {
    view.loadCandidates(await api.getCandidates(view.summary.id, child, parent, kind));
  } catch (err) {
    banner((err as Error).message, true);
    return;
  }
  banner('');
  renderCandidateList();
  drawScene();
}

function renderCandidateList(): void {
  const list = el<HTMLOListElement>('candidate-list');
  list.replaceChildren();
  if (!view?.candidates) return;
  view.candidates.candidates.forEach((cand, i) => {
    const item = document.createElement('li');
    const pick = document.createElement('button');
    pick.textContent = `score ${cand.score.toFixed(3)} (${cand.provenance})`;
    pick.onclick = () => {
      view!.chooseCandidate(i);
      renderEditBuffer();
      drawScene();
    };
    item.append(pick);
    list.append(item);
  });
}

function renderEditBuffer(): void {
  const panel = el<HTMLDivElement>('edit-panel');
  if (!view?.buffer) {
    panel.hidden = true;
    return;
  }
  panel.hidden = false;
  const buf = view.buffer;
  el<HTMLSpanElement>('edit-kind').textContent = buf.kind;
  el<HTMLInputElement>('edit-dir-x').value = buf.direction ? String(buf.direction[0]) : '';
  el<HTMLInputElement>('edit-dir-y').value = buf.direction ? String(buf.direction[1]) : '';
  el<HTMLInputElement>('edit-dir-z').value = buf.direction ? String(buf.direction[2]) : '';
  el<HTMLInputElement>('edit-range-lo').value = buf.rangeLo === null ? '' : String(buf.rangeLo);
  el<HTMLInputElement>('edit-range-hi').value = buf.rangeHi === null ? '' : String(buf.rangeHi);
  el<HTMLSpanElement>('edit-range-unit').textContent =
    rangeUsesDegrees(buf.kind) ? 'deg' : 'norm. units';
  updatePostGate();
}

function readBufferEdits(): void {
  if (!view?.buffer) return;
  const buf = view.buffer;
  const num = (id: string) => Number(el<HTMLInputElement>(id).value);
  if (buf.direction) {
    buf.direction = [num('edit-dir-x'), num('edit-dir-y'), num('edit-dir-z')] as Vec3;
  }
  const lo = el<HTMLInputElement>('edit-range-lo').value;
  const hi = el<HTMLInputElement>('edit-range-hi').value;
  buf.rangeLo = lo === '' ? null : Number(lo);
  buf.rangeHi = hi === '' ? null : Number(hi);
  updatePostGate();
  drawScene();
}

function updatePostGate(): void {
  if (!view?.buffer) return;
  const violations = bufferViolations(view.buffer);
  el<HTMLButtonElement>('post-selection').disabled = violations.length > 0;
  el<HTMLDivElement>('edit-errors').textContent =
    violations.map((v) => `${v.path}: ${v.message}`).join('; ');
}

async function postSelection(): Promise<void> {
  if (!view?.buffer || !canPost(view.buffer)) return; // gate: never POST invalid
  try {
    const result = await api.postSelection(
      view.summary.id, view.version, selectionConstraint(view.buffer));
    view.version = result.version;
    banner(`constraint finalized (version ${result.version})`);
    const { asset } = await api.getAsset(view.summary.id);
    record = asset;
    drawScene();
  } catch (err) {
    if (err instanceof ApiError && err.status === 409) {
      banner('asset changed in another tab; reload to continue', true);
    } else if (err instanceof ApiError && err.status === 422) {
      el<HTMLDivElement>('edit-errors').textContent =
        err.violations.map((v) => `${v.path}: ${v.message}`).join('; ');
    } else {
      banner((err as Error).message, true);
    }
  }
}

// ------------------------------------------------------------- review panel

function renderReviewPanel(): void {
  if (!view || !record) return;
  el<HTMLSpanElement>('review-status').textContent = view.summary.review;
  const detail = el<HTMLDivElement>('review-detail');
  detail.replaceChildren();
  for (const part of record.parts) {
    const block = document.createElement('p');
    block.textContent =
      `${part.name}: ${part.descriptions.basic} / ${part.descriptions.functional}`;
    detail.append(block);
  }
}

async function postReview(decision: string): Promise<void> {
  if (!view) return;
  try {
    // reject returns the asset to pending so it can be re-queried
    const decisions = decision === 'reject' ? ['reject', 'requeue'] : [decision];
    for (const step of decisions) {
      const result = await api.postReview(view.summary.id, view.version, step, 'reviewer');
      view.version = result.version;
      view.summary.review = result.review;
    }
    renderReviewPanel();
    await refreshList();
  } catch (err) {
    if (err instanceof ApiError && err.status === 409) {
      banner('asset changed in another tab; reload to continue', true);
    } else {
      banner((err as Error).message, true);
    }
  }
}

// -------------------------------------------------------------------- draw

function drawScene(): void {
  const canvas = el<HTMLCanvasElement>('scene');
  const ctx = canvas.getContext('2d');
  if (!ctx || !view || !record) return;
  const basis: ViewBasis = viewBasis(azimuth, elevation);
  const { width, height } = canvas;
  ctx.clearRect(0, 0, width, height);

  for (const part of record.parts) {
    if (!view.isPartVisible(part.id)) continue;
    const mesh = meshes.get(part.id);
    if (!mesh) continue;
    const selected = view.selectedPair
      && (part.id === view.selectedPair.child || part.id === view.selectedPair.parent);
    ctx.strokeStyle = selected ? '#1565c0' : '#9e9e9e';
    ctx.lineWidth = selected ? 1.4 : 0.7;
    const edges = wireframeEdges(mesh.faces);
    ctx.beginPath();
    for (let i = 0; i + 1 < edges.length; i += 2) {
      const a = edges[i]! * 3;
      const b = edges[i + 1]! * 3;
      const pa = projectPoint(
        [mesh.vertices[a]!, mesh.vertices[a + 1]!, mesh.vertices[a + 2]!],
        basis, width, height);
      const pb = projectPoint(
        [mesh.vertices[b]!, mesh.vertices[b + 1]!, mesh.vertices[b + 2]!],
        basis, width, height);
      ctx.moveTo(pa.x, pa.y);
      ctx.lineTo(pb.x, pb.y);
    }
    ctx.stroke();
  }

  if (view.candidates) {
    const payload = view.candidates;
    for (const center of payload.pivot_clusters) {
      const p = projectPoint(center, basis, width, height);
      ctx.fillStyle = '#e53935';
      ctx.beginPath();
      ctx.arc(p.x, p.y, 4, 0, 2 * Math.PI);
      ctx.fill();
    }
    payload.candidates.forEach((cand, i) => {
      const anchor = cand.pivot ?? payload.pivot_clusters[0] ?? [0, 0, 0];
      const [a, b] = axisSegment(cand.direction, anchor as Vec3);
      const pa = projectPoint(a, basis, width, height);
      const pb = projectPoint(b, basis, width, height);
      ctx.strokeStyle = i === 0 ? '#2e7d32' : '#a5d6a7';
      ctx.lineWidth = i === 0 ? 2 : 1;
      ctx.beginPath();
      ctx.moveTo(pa.x, pa.y);
      ctx.lineTo(pb.x, pb.y);
      ctx.stroke();
    });
  }

  if (view.buffer?.direction && view.buffer.pivot) {
    const [a, b] = axisSegment(view.buffer.direction, view.buffer.pivot);
    const pa = projectPoint(a, basis, width, height);
    const pb = projectPoint(b, basis, width, height);
    ctx.strokeStyle = '#ef6c00';
    ctx.lineWidth = 2.4;
    ctx.setLineDash([6, 4]);
    ctx.beginPath();
    ctx.moveTo(pa.x, pa.y);
    ctx.lineTo(pb.x, pb.y);
    ctx.stroke();
    ctx.setLineDash([]);
  }

  // range readout in display units (conversion is the UI's only math)
  const buf = view.buffer;
  const readout = el<HTMLSpanElement>('range-readout');
  if (buf?.rangeLo !== null && buf?.rangeHi !== null && buf) {
    readout.textContent = rangeUsesDegrees(buf.kind)
      ? `${buf.rangeLo} to ${buf.rangeHi} deg`
      : `${buf.rangeLo} to ${buf.rangeHi}`;
  } else {
    readout.textContent = '';
  }
}

// ------------------------------------------------------------------- wiring

export function initApp(): void {
  el<HTMLButtonElement>('refresh').onclick = () => void refreshList();
  el<HTMLSelectElement>('status-filter').onchange = () => void refreshList();
  el<HTMLButtonElement>('fetch-candidates').onclick = () => void fetchCandidates();
  el<HTMLButtonElement>('post-selection').onclick = () => void postSelection();
  el<HTMLButtonElement>('review-approve').onclick = () => void postReview('approve');
  el<HTMLButtonElement>('review-reject').onclick = () => void postReview('reject');
  el<HTMLButtonElement>('review-vlm-done').onclick = () => void postReview('vlm_done');
  for (const [id, fn] of [
    ['edit-dir-x', readBufferEdits], ['edit-dir-y', readBufferEdits],
    ['edit-dir-z', readBufferEdits], ['edit-range-lo', readBufferEdits],
    ['edit-range-hi', readBufferEdits],
  ] as const) {
    el<HTMLInputElement>(id).oninput = fn;
  }
  el<HTMLInputElement>('cam-azimuth').oninput = (e) => {
    azimuth = Number((e.target as HTMLInputElement).value);
    drawScene();
  };
  el<HTMLInputElement>('cam-elevation').oninput = (e) => {
    elevation = Number((e.target as HTMLInputElement).value);
    drawScene();
  };
  void refreshList();
}

if (typeof document !== 'undefined' && document.getElementById('asset-rows')) {
  initApp();
}

// test-only hook: expose the degree display of a stored radian range
export function displayRange(kind: string, loRad: number, hiRad: number): string {
  return rangeUsesDegrees(kind)
    ? `${radToDeg(loRad).toFixed(1)} to ${radToDeg(hiRad).toFixed(1)} deg`
    : `${loRad} to ${hiRad}`;
}
