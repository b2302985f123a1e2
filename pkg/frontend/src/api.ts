/** Typed client for the review service. Every number shown in the UI comes
 * from these calls; the client computes nothing but unit conversion. */

import type {
  AssetRecord,
  AssetSummary,
  CandidatePayload,
  Violation,
  WireConstraint,
} from './types';

export class ApiError extends Error {
  constructor(
    public status: number,
    public detail: string,
    public violations: Violation[] = [],
    public serverVersion?: number,
  ) {
    super(`${status}: ${detail}`);
  }
}

async function raiseFor(resp: Response): Promise<never> {
  let detail = resp.statusText;
  let violations: Violation[] = [];
  let serverVersion: number | undefined;
  try {
    const body = await resp.json();
    detail = body.detail ?? detail;
    violations = body.violations ?? [];
    serverVersion = body.version;
  } catch {
    // non-JSON error body; keep the status text
  }
  throw new ApiError(resp.status, detail, violations, serverVersion);
}

export class ApiClient {
  constructor(private baseUrl: string) {}

  private async getJson<T>(path: string): Promise<T> {
    const resp = await fetch(this.baseUrl + path);
    if (!resp.ok) await raiseFor(resp);
    return (await resp.json()) as T;
  }

  async listAssets(): Promise<AssetSummary[]> {
    const body = await this.getJson<{ assets: AssetSummary[] }>('/assets');
    return body.assets;
  }

  async getAsset(id: string): Promise<{ asset: AssetRecord; version: number }> {
    const resp = await fetch(`${this.baseUrl}/assets/${id}`);
    if (!resp.ok) await raiseFor(resp);
    const version = Number(resp.headers.get('X-Asset-Version') ?? '0');
    return { asset: (await resp.json()) as AssetRecord, version };
  }

  async getMesh(id: string, partId: number): Promise<ArrayBuffer> {
    const resp = await fetch(`${this.baseUrl}/assets/${id}/mesh/${partId}`);
    if (!resp.ok) await raiseFor(resp);
    return resp.arrayBuffer();
  }

  async getCandidates(
    id: string, child: number, parent: number, kind: string,
  ): Promise<CandidatePayload> {
    return this.getJson<CandidatePayload>(
      `/assets/${id}/candidates/${child}/${parent}?kind=${encodeURIComponent(kind)}`,
    );
  }

  async postSelection(
    id: string, version: number, constraint: WireConstraint,
  ): Promise<{ version: number; constraint: WireConstraint }> {
    const resp = await fetch(`${this.baseUrl}/assets/${id}/selection`, {
      method: 'POST',
      headers: { 'Content-Type': 'application/json' },
      body: JSON.stringify({ version, constraint }),
    });
    if (!resp.ok) await raiseFor(resp);
    return resp.json();
  }

  async postReview(
    id: string, version: number, decision: string, editor = '',
  ): Promise<{ version: number; review: string }> {
    const resp = await fetch(`${this.baseUrl}/assets/${id}/review`, {
      method: 'POST',
      headers: { 'Content-Type': 'application/json' },
      body: JSON.stringify({ version, decision, editor }),
    });
    if (!resp.ok) await raiseFor(resp);
    return resp.json();
  }
}
