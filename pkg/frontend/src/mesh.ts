/** Parser for the binary mesh endpoint.
 *
 * Layout, all little-endian: 8-byte ASCII magic "PHYSMSH1", then uint32
 * vertex and face counts, then float32 xyz triples, then int32 index
 * triples.
 */

export interface ParsedMesh {
  vertices: Float32Array; // length 3 * nVertices
  faces: Int32Array;      // length 3 * nFaces
  nVertices: number;
  nFaces: number;
}

const MAGIC = 'PHYSMSH1';

export function parseMesh(buf: ArrayBuffer): ParsedMesh {
  if (buf.byteLength < 16) {
    throw new Error(`mesh blob truncated: ${buf.byteLength} bytes`);
  }
  const magic = new TextDecoder('ascii').decode(new Uint8Array(buf, 0, 8));
  if (magic !== MAGIC) {
    throw new Error(`bad mesh magic ${JSON.stringify(magic)}`);
  }
  const head = new DataView(buf);
  const nVertices = head.getUint32(8, true);
  const nFaces = head.getUint32(12, true);
  const need = 16 + nVertices * 12 + nFaces * 12;
  if (buf.byteLength < need) {
    throw new Error(`mesh blob truncated: need ${need}, got ${buf.byteLength}`);
  }
  // Float32Array views require 4-byte alignment; the 16-byte header gives it
  const vertices = new Float32Array(buf, 16, nVertices * 3);
  const faces = new Int32Array(buf, 16 + nVertices * 12, nFaces * 3);
  return { vertices, faces, nVertices, nFaces };
}

/** Unique undirected edges as index pairs, for wireframe drawing. */
export function wireframeEdges(faces: Int32Array): Uint32Array {
  const seen = new Set<number>();
  const edges: number[] = [];
  const add = (a: number, b: number) => {
    const lo = Math.min(a, b);
    const hi = Math.max(a, b);
    const key = lo * 0x100000 + hi;
    if (!seen.has(key)) {
      seen.add(key);
      edges.push(lo, hi);
    }
  };
  for (let i = 0; i + 2 < faces.length; i += 3) {
    const a = faces[i]!;
    const b = faces[i + 1]!;
    const c = faces[i + 2]!;
    add(a, b);
    add(b, c);
    add(c, a);
  }
  return new Uint32Array(edges);
}
